#include "linf_mwu/inverse_maintenance.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "linf_mwu/error.hpp"

namespace linf_mwu {

namespace {

// Below this reciprocal condition the inner Woodbury block is treated as singular.
constexpr double kInnerRcond = 1e-9;

Mat hcat(const Mat& a, const Mat& b) {
  if (a.cols() == 0) return b;
  if (b.cols() == 0) return a;
  Mat out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

Mat blockdiag(const Mat& a, const Mat& b) {
  Mat out = Mat::Zero(a.rows() + b.rows(), a.cols() + b.cols());
  out.topLeftCorner(a.rows(), a.cols()) = a;
  out.bottomRightCorner(b.rows(), b.cols()) = b;
  return out;
}

bool invert_checked(const Mat& A, Mat& out) {
  if (A.rows() == 0) {
    out.resize(0, 0);
    return true;
  }
  Eigen::PartialPivLU<Mat> lu(A);
  double rc = lu.rcond();
  if (!(rc > kInnerRcond)) return false;
  // every inner matrix is I + X; a pivot far below 1 + |X| means cancellation
  const double scale = 1.0 + (A - Mat::Identity(A.rows(), A.cols())).cwiseAbs().maxCoeff();
  if (!(lu.matrixLU().diagonal().cwiseAbs().minCoeff() > kInnerRcond * scale)) return false;
  out = lu.inverse();
  return out.allFinite();
}

Mat select_rows(const Mat& m, const std::vector<int>& rows) {
  Mat out(rows.size(), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(i) = m.row(rows[i]);
  return out;
}

Mat select_cols(const Mat& m, const std::vector<int>& cols) {
  Mat out(m.rows(), cols.size());
  for (std::size_t j = 0; j < cols.size(); ++j) out.col(j) = m.col(cols[j]);
  return out;
}

}  // namespace

OpCounts& OpCounts::operator+=(const OpCounts& o) {
  resets += o.resets;
  partial_resets += o.partial_resets;
  queries += o.queries;
  reset_ops += o.reset_ops;
  partial_reset_ops += o.partial_reset_ops;
  query_ops += o.query_ops;
  return *this;
}

nlohmann::json OpCounts::to_json() const {
  return {{"resets", resets},
          {"partial_resets", partial_resets},
          {"queries", queries},
          {"scalar_ops", {{"reset", reset_ops}, {"partial_reset", partial_reset_ops}, {"query", query_ops}}}};
}

InverseMaintainer::InverseMaintainer(MaintainerKind kind, const Mat& M0, std::optional<Vec> v,
                                     bool accumulate_initial)
    : kind_(kind), n_(static_cast<int>(M0.rows())), M_t0_(M0), v_(std::move(v)) {
  if (M0.rows() != M0.cols()) throw Error(ErrorCode::dimension_mismatch, "M0 must be square");
  if (kind_ == MaintainerKind::implicit) {
    if (!v_) throw Error(ErrorCode::invalid_parameter, "implicit maintainer needs a right-hand vector");
    if (v_->size() != n_) throw Error(ErrorCode::dimension_mismatch, "v length does not match M0");
  }
  Eigen::PartialPivLU<Mat> lu(M0);
  if (!(lu.rcond() > 1e-15) || !lu.inverse().allFinite())
    throw SingularOracleError("initial matrix is singular", lu.rcond());
  N_ = lu.inverse();
  U0_.resize(n_, 0);
  V0_.resize(n_, 0);
  C0_.resize(0, 0);
  F_.resize(n_, 0);
  B_.resize(0, 0);
  E_.resize(0, n_);
  U1_.resize(n_, 0);
  V1_.resize(n_, 0);
  C1_.resize(0, 0);
  if (v_) {
    Nv_ = N_ * *v_;
    u0_ = Vec::Zero(n_);
    u1_ = Vec::Zero(n_);
    u2_.resize(0);
    if (accumulate_initial) u0_ += Nv_;
  }
}

void InverseMaintainer::check_batch(const UpdateBatch& b) const {
  int k = b.width();
  if (b.U.rows() != n_ || b.V.rows() != n_ || b.V.cols() != k || b.core.rows() != k || b.core.cols() != k)
    throw Error(ErrorCode::dimension_mismatch, "update factors do not match maintainer dimension");
}

void InverseMaintainer::update(const UpdateBatch& batch) {
  update_no_accumulate(batch);
  if (kind_ == MaintainerKind::implicit) accumulate();
}

void InverseMaintainer::update_no_accumulate(const UpdateBatch& batch) {
  check_batch(batch);
  ++t_;
  if (batch.width() == 0) return;
  U1_ = hcat(U1_, batch.U);
  V1_ = hcat(V1_, batch.V);
  C1_ = blockdiag(C1_, batch.core);
  J1_.insert(J1_.end(), batch.touched.begin(), batch.touched.end());
  k0_ += batch.width();
  k1_ += batch.width();
}

bool InverseMaintainer::inner_level2(Mat& PU1, Mat& G1) const {
  PU1 = N_ * U1_;
  if (F_.cols() > 0) PU1 -= F_ * (E_ * U1_);
  Mat inner = Mat::Identity(U1_.cols(), U1_.cols()) + C1_ * (V1_.transpose() * PU1);
  Mat inv;
  if (!invert_checked(inner, inv)) return false;
  G1 = inv * C1_;
  return true;
}

Mat InverseMaintainer::current_matrix() const {
  Mat M = M_t0_;
  if (U0_.cols() > 0) M += U0_ * C0_ * V0_.transpose();
  if (U1_.cols() > 0) M += U1_ * C1_ * V1_.transpose();
  return M;
}

void InverseMaintainer::full_reinvert() {
  Mat M = current_matrix();
  Eigen::PartialPivLU<Mat> lu(M);
  if (!(lu.rcond() > 1e-15)) throw SingularOracleError("maintained matrix is singular", lu.rcond());
  if (v_) {
    u0_ += N_ * u1_;
    if (F_.cols() > 0) u0_ += F_ * u2_;
  }
  N_ = lu.inverse();
  M_t0_ = M;
  degraded_ = true;
  counts_.resets += 1;
  counts_.reset_ops += static_cast<double>(n_) * n_ * n_;
  U0_.resize(n_, 0);
  V0_.resize(n_, 0);
  C0_.resize(0, 0);
  F_.resize(n_, 0);
  B_.resize(0, 0);
  E_.resize(0, n_);
  U1_.resize(n_, 0);
  V1_.resize(n_, 0);
  C1_.resize(0, 0);
  J_.clear();
  J1_.clear();
  k0_ = k1_ = 0;
  t0_ = t1_ = t_;
  if (v_) {
    Nv_ = N_ * *v_;
    u1_.setZero();
    u2_.resize(0);
  }
}

void InverseMaintainer::reset() {
  if (k0_ == 0) {
    t0_ = t1_ = t_;
    return;
  }
  Mat U = hcat(U0_, U1_);
  Mat V = hcat(V0_, V1_);
  Mat Cc = blockdiag(C0_, C1_);
  Mat NU = N_ * U;
  Mat inner = Mat::Identity(U.cols(), U.cols()) + Cc * (V.transpose() * NU);
  Mat inv;
  if (!invert_checked(inner, inv)) {
    full_reinvert();
    return;
  }
  counts_.resets += 1;
  counts_.reset_ops += static_cast<double>(n_) * n_ * k0_;
  if (v_) {
    u0_ += N_ * u1_;
    if (F_.cols() > 0) u0_ += F_ * u2_;
    u1_.setZero();
    u2_.resize(0);
  }
  Mat Nnew = N_ - NU * (inv * (Cc * (V.transpose() * N_)));
  if (fault_inject_) Nnew(0, 0) += 1e-3 * (1.0 + std::abs(Nnew(0, 0)));
  M_t0_ += U * Cc * V.transpose();
  N_ = std::move(Nnew);
  U0_.resize(n_, 0);
  V0_.resize(n_, 0);
  C0_.resize(0, 0);
  F_.resize(n_, 0);
  B_.resize(0, 0);
  E_.resize(0, n_);
  U1_.resize(n_, 0);
  V1_.resize(n_, 0);
  C1_.resize(0, 0);
  J_.clear();
  J1_.clear();
  k0_ = k1_ = 0;
  t0_ = t1_ = t_;
  if (v_) Nv_ = N_ * *v_;
}

void InverseMaintainer::partial_reset() {
  if (kind_ == MaintainerKind::one_level)
    throw Error(ErrorCode::contract_violation, "one-level maintainer has no partial reset");
  if (k1_ == 0) {
    t1_ = t_;
    return;
  }
  // Block inverse of [[A X],[Y Z]] with B = A^{-1} already known.
  Mat NU1 = N_ * U1_;
  Mat Z = Mat::Identity(k1_, k1_) + C1_ * (V1_.transpose() * NU1);
  Mat Bn;
  if (B_.rows() == 0) {
    if (!invert_checked(Z, Bn)) {
      full_reinvert();
      return;
    }
  } else {
    Mat X = C0_ * (V0_.transpose() * NU1);
    Mat Y = C1_ * (V1_.transpose() * F_);
    Mat S = Z - Y * (B_ * X);
    Mat Sinv;
    if (!invert_checked(S, Sinv)) {
      full_reinvert();
      return;
    }
    Mat BX = B_ * X;
    Mat YB = Y * B_;
    int a = static_cast<int>(B_.rows());
    Bn.resize(a + k1_, a + k1_);
    Bn.topLeftCorner(a, a) = B_ + BX * Sinv * YB;
    Bn.topRightCorner(a, k1_) = -BX * Sinv;
    Bn.bottomLeftCorner(k1_, a) = -Sinv * YB;
    Bn.bottomRightCorner(k1_, k1_) = Sinv;
  }
  counts_.partial_resets += 1;
  counts_.partial_reset_ops += static_cast<double>(n_) * k0_ * k1_;
  U0_ = hcat(U0_, U1_);
  V0_ = hcat(V0_, V1_);
  C0_ = blockdiag(C0_, C1_);
  F_ = hcat(F_, NU1);
  B_ = std::move(Bn);
  E_ = B_ * (C0_ * (V0_.transpose() * N_));
  if (v_) {
    Vec u2 = Vec::Zero(U0_.cols());
    u2.head(u2_.size()) = u2_;
    u2_ = std::move(u2);
  }
  std::set<int> js(J_.begin(), J_.end());
  js.insert(J1_.begin(), J1_.end());
  J_.assign(js.begin(), js.end());
  U1_.resize(n_, 0);
  V1_.resize(n_, 0);
  C1_.resize(0, 0);
  J1_.clear();
  k1_ = 0;
  t1_ = t_;
}

Mat InverseMaintainer::query(const std::vector<int>& rows, const std::vector<int>& cols) {
  for (int r : rows)
    if (r < 0 || r >= n_) throw Error(ErrorCode::dimension_mismatch, "query row out of range");
  for (int c : cols)
    if (c < 0 || c >= n_) throw Error(ErrorCode::dimension_mismatch, "query column out of range");
  counts_.queries += 1;
  {
    double k0 = k0_;
    double k1 = kind_ == MaintainerKind::one_level ? k0_ : k1_;
    double nc = static_cast<double>(cols.size());
    counts_.query_ops += k0 * k1 * std::max(k1, nc) + k0 * static_cast<double>(rows.size()) * nc;
  }
  Mat Ncols = select_cols(N_, cols);
  Mat P = select_rows(Ncols, rows);
  Mat Ec;
  if (F_.cols() > 0) {
    Ec = select_cols(E_, cols);
    P -= select_rows(F_, rows) * Ec;
  }
  if (k1_ == 0) return P;
  Mat PU1, G1;
  if (!inner_level2(PU1, G1)) {
    full_reinvert();
    return select_rows(select_cols(N_, cols), rows);
  }
  Mat VP = V1_.transpose() * Ncols;
  if (F_.cols() > 0) VP -= (V1_.transpose() * F_) * Ec;
  return P - select_rows(PU1, rows) * (G1 * VP);
}

Mat InverseMaintainer::query_all() {
  std::vector<int> all(n_);
  for (int i = 0; i < n_; ++i) all[i] = i;
  return query(all, all);
}

void InverseMaintainer::accumulate() {
  if (!v_) throw Error(ErrorCode::contract_violation, "accumulate needs the implicit kind");
  // (M^t)^{-1} v = P z with P = N - F E and z = v - U1 G1 V1^T P v.
  Vec Pv = Nv_;
  if (F_.cols() > 0) Pv -= F_ * (E_ * *v_);
  Vec z = *v_;
  if (k1_ > 0) {
    Mat PU1, G1;
    if (!inner_level2(PU1, G1)) {
      full_reinvert();
      u1_ += *v_;
      return;
    }
    z -= U1_ * (G1 * (V1_.transpose() * Pv));
  }
  u1_ += z;
  if (F_.cols() > 0) u2_ -= E_ * z;
}

Vec InverseMaintainer::query_sum() const {
  if (!v_) throw Error(ErrorCode::contract_violation, "query_sum needs the implicit kind");
  Vec out = u0_ + N_ * u1_;
  if (F_.cols() > 0) out += F_ * u2_;
  return out;
}

}  // namespace linf_mwu
