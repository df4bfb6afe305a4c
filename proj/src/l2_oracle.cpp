#include "linf_mwu/l2_oracle.hpp"

#include <cmath>

#include "linf_mwu/error.hpp"

namespace linf_mwu {

namespace {

constexpr double kSingularRcond = 1e-15;

Mat weighted_gram(const RowMat& C, const Vec& w) {
  Mat WC = w.asDiagonal() * C;
  return C.transpose() * WC;
}

}  // namespace

double psi_of(const Vec& rbar, const Vec& u) { return (rbar.array() * u.array().square()).sum(); }

OracleResult solve_direct(const RowMat& C, const Vec& d, const Vec& rbar, const OracleConfig& cfg) {
  if (C.rows() != d.size() || C.rows() != rbar.size())
    throw Error(ErrorCode::dimension_mismatch, "oracle dimensions disagree");
  if (!(rbar.array() > 0.0).all()) throw Error(ErrorCode::invalid_parameter, "resistances must be positive");
  const int dim = static_cast<int>(C.cols());
  Mat M = weighted_gram(C, rbar);
  Vec rhs = C.transpose() * (rbar.array() * d.array()).matrix();
  OracleResult res;
  res.ridge = std::max(0.0, cfg.ridge_floor) * M.trace() / dim;
  M.diagonal().array() += res.ridge;
  Eigen::LDLT<Mat> ldlt(M);
  double rc = ldlt.info() == Eigen::Success ? ldlt.rcond() : 0.0;
  if (!(rc > kSingularRcond)) throw SingularOracleError("normal matrix is numerically singular", rc);
  res.delta = ldlt.solve(rhs);
  res.residual_u = C * res.delta - d;
  res.psi = psi_of(rbar, res.residual_u);
  return res;
}

double normal_equation_residual(const RowMat& C, const Vec& d, const Vec& rbar, const OracleResult& res) {
  Vec g = C.transpose() * (rbar.array() * res.residual_u.array()).matrix();
  Vec scale = C.transpose() * (rbar.array() * d.array()).matrix();
  double denom = scale.cwiseAbs().maxCoeff();
  double num = g.cwiseAbs().maxCoeff();
  return denom > 0 ? num / denom : num;
}

namespace {

Mat augmented_matrix(const RowMat& C, const Vec& d, const Vec& rbar, double ridge) {
  const int dim = static_cast<int>(C.cols());
  Mat M = Mat::Zero(dim + 1, dim + 1);
  M.topLeftCorner(dim, dim) = weighted_gram(C, rbar);
  M.topLeftCorner(dim, dim).diagonal().array() += ridge;
  M.topRightCorner(dim, 1) = -(C.transpose() * (rbar.array() * d.array()).matrix());
  M(dim, dim) = 1.0;
  return M;
}

double initial_ridge(const RowMat& C, const Vec& rbar, const OracleConfig& cfg) {
  Mat M = weighted_gram(C, rbar);
  return std::max(0.0, cfg.ridge_floor) * M.trace() / static_cast<double>(C.cols());
}

}  // namespace

MaintainedOracle::MaintainedOracle(const RowMat& C, const Vec& d, const Vec& rbar0, const MaintainedConfig& mcfg,
                                   const OracleConfig& cfg)
    : C_(C),
      d_(d),
      rbar_(rbar0),
      mcfg_(mcfg),
      ridge_(initial_ridge(C, rbar0, cfg)),
      dim_(static_cast<int>(C.cols())),
      im_(mcfg.kind, augmented_matrix(C, d, rbar0, ridge_),
          mcfg.kind == MaintainerKind::implicit ? std::optional<Vec>(Vec::Unit(C.cols() + 1, C.cols()))
                                                 : std::nullopt,
          false) {
  if (C.rows() != d.size() || C.rows() != rbar0.size())
    throw Error(ErrorCode::dimension_mismatch, "oracle dimensions disagree");
  const double rows = static_cast<double>(C.rows());
  k0_threshold_ = std::pow(rows, mcfg.a0);
  k1_threshold_ = std::pow(rows, mcfg.a1);
  im_.set_fault_inject(mcfg.fault_inject);
}

void MaintainedOracle::apply(const std::vector<std::pair<int, double>>& rbar_delta) {
  if (im_.t() != calls_) throw Error(ErrorCode::stale_maintainer, "maintainer counter out of sync");
  ++calls_;
  std::vector<std::pair<int, double>> changes;
  changes.reserve(rbar_delta.size());
  for (auto [e, value] : rbar_delta) {
    if (e < 0 || e >= rbar_.size()) throw Error(ErrorCode::dimension_mismatch, "rbar update index out of range");
    if (!(value > 0.0)) throw Error(ErrorCode::invalid_parameter, "resistances must be positive");
    double diff = value - rbar_(e);
    if (diff != 0.0) changes.emplace_back(e, diff);
    rbar_(e) = value;
  }
  UpdateBatch batch;
  const int k = static_cast<int>(changes.size());
  batch.U = Mat::Zero(dim_ + 1, k);
  batch.V = Mat::Zero(dim_ + 1, k);
  batch.core = Mat::Zero(k, k);
  for (int j = 0; j < k; ++j) {
    int e = changes[j].first;
    batch.U.col(j).head(dim_) = C_.row(e).transpose();
    batch.V.col(j).head(dim_) = C_.row(e).transpose();
    batch.V(dim_, j) = -d_(e);
    batch.core(j, j) = changes[j].second;
    batch.touched.push_back(e);
  }
  // More changed rows than the matrix dimension: feed an equivalent factorization of rank <= dim + 1.
  if (k > dim_ + 1) {
    Eigen::JacobiSVD<Mat> svd(batch.U * batch.core * batch.V.transpose(), Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vec& s = svd.singularValues();
    int r = 0;
    while (r < s.size() && s(r) > 1e-15 * s(0)) ++r;
    batch.U = svd.matrixU().leftCols(r) * s.head(r).asDiagonal();
    batch.V = svd.matrixV().leftCols(r);
    batch.core = Mat::Identity(r, r);
  }
  im_.update_no_accumulate(batch);
  logical_k0_ += k;
  logical_k1_ += k;
  if (logical_k0_ >= k0_threshold_) {
    im_.reset();
    logical_k0_ = logical_k1_ = 0;
  } else if (mcfg_.kind != MaintainerKind::one_level && logical_k1_ >= k1_threshold_) {
    im_.partial_reset();
    logical_k1_ = 0;
  }
}

PartialResult MaintainedOracle::solve(const std::vector<std::pair<int, double>>& rbar_delta,
                                      const std::vector<int>& query_rows) {
  apply(rbar_delta);
  std::vector<int> rows(dim_);
  for (int j = 0; j < dim_; ++j) rows[j] = j;
  Mat col = im_.query(rows, {dim_});
  PartialResult out;
  out.delta = col.col(0);
  out.rows = query_rows;
  out.residual_rows.resize(query_rows.size());
  for (std::size_t j = 0; j < query_rows.size(); ++j) {
    int e = query_rows[j];
    if (e < 0 || e >= C_.rows()) throw Error(ErrorCode::dimension_mismatch, "query row out of range");
    out.residual_rows(j) = C_.row(e).dot(out.delta) - d_(e);
  }
  return out;
}

OracleResult MaintainedOracle::solve_full(const std::vector<std::pair<int, double>>& rbar_delta) {
  apply(rbar_delta);
  std::vector<int> rows(dim_);
  for (int j = 0; j < dim_; ++j) rows[j] = j;
  Mat col = im_.query(rows, {dim_});
  OracleResult res;
  res.delta = col.col(0);
  res.residual_u = C_ * res.delta - d_;
  res.psi = psi_of(rbar_, res.residual_u);
  res.ridge = ridge_;
  return res;
}

void MaintainedOracle::accumulate_step() { im_.accumulate(); }

std::pair<Vec, double> MaintainedOracle::accumulated() const {
  Vec s = im_.query_sum();
  return {s.head(dim_), s(dim_)};
}

}  // namespace linf_mwu
