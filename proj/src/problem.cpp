#include "linf_mwu/problem.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include "linf_mwu/error.hpp"

namespace linf_mwu {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_instance: return "invalid-instance";
    case ErrorCode::invalid_scale: return "invalid-scale";
    case ErrorCode::unsupported_distribution: return "unsupported-distribution";
    case ErrorCode::singular_oracle: return "singular-oracle";
    case ErrorCode::stale_maintainer: return "stale-maintainer";
    case ErrorCode::dimension_mismatch: return "dimension-mismatch";
    case ErrorCode::internal_consistency: return "internal-consistency";
    case ErrorCode::contract_violation: return "contract-violation";
    case ErrorCode::budget_exceeded: return "budget-exceeded";
    case ErrorCode::invalid_parameter: return "invalid-parameter";
    case ErrorCode::invariant_breach: return "invariant-breach";
    case ErrorCode::io_error: return "io-error";
  }
  return "unknown";
}

void Instance::validate() const {
  if (n < 1 || d_dim < 1) throw Error(ErrorCode::invalid_instance, "n and d must be >= 1");
  if (d_dim > n) throw Error(ErrorCode::invalid_instance, "d must not exceed n");
  if (C.rows() != n || C.cols() != d_dim)
    throw Error(ErrorCode::invalid_instance, "C shape does not match n x d");
  if (target.size() != n) throw Error(ErrorCode::invalid_instance, "target length does not match n");
  if (!C.allFinite() || !target.allFinite())
    throw Error(ErrorCode::invalid_instance, "non-finite entry");
  if (scale_hint && !(*scale_hint > 0.0))
    throw Error(ErrorCode::invalid_instance, "scale_hint must be positive");
}

DoubledInstance double_instance(const Instance& inst) {
  inst.validate();
  DoubledInstance out;
  out.C_tilde.resize(2 * inst.n, inst.d_dim);
  out.C_tilde.topRows(inst.n) = inst.C;
  out.C_tilde.bottomRows(inst.n) = -inst.C;
  out.d_tilde.resize(2 * inst.n);
  out.d_tilde.head(inst.n) = inst.target;
  out.d_tilde.tail(inst.n) = -inst.target;
  return out;
}

Instance normalize(const Instance& inst, double opt) {
  if (!(opt > 0.0) || !std::isfinite(opt))
    throw Error(ErrorCode::invalid_scale, "normalization scale must be positive");
  Instance out = inst;
  if (opt == 1.0) return out;
  out.C /= opt;
  out.target /= opt;
  if (out.scale_hint) *out.scale_hint /= opt;
  return out;
}

double residual_inf(const Instance& inst, const Vec& x) {
  return (inst.C * x - inst.target).cwiseAbs().maxCoeff();
}

double residual_inf(const DoubledInstance& dbl, const Vec& x) {
  return (dbl.C_tilde * x - dbl.d_tilde).cwiseAbs().maxCoeff();
}

DistributionSpec parse_distribution(const std::string& name, double condition) {
  DistributionSpec spec;
  spec.condition = condition;
  if (name == "gaussian") spec.kind = Distribution::gaussian;
  else if (name == "uniform") spec.kind = Distribution::uniform;
  else if (name == "ill-conditioned" || name == "ill_conditioned") spec.kind = Distribution::ill_conditioned;
  else throw Error(ErrorCode::unsupported_distribution, "unsupported distribution: " + name);
  return spec;
}

namespace {

Mat gaussian_matrix(std::mt19937_64& gen, int rows, int cols) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = nd(gen);
  return m;
}

}  // namespace

Instance generate(std::uint64_t seed, int n, int d_dim, const DistributionSpec& spec) {
  if (d_dim < 1 || n < d_dim) throw Error(ErrorCode::invalid_instance, "need n >= d >= 1");
  std::mt19937_64 gen(seed);
  Instance inst;
  inst.n = n;
  inst.d_dim = d_dim;
  inst.C.resize(n, d_dim);
  inst.target.resize(n);
  switch (spec.kind) {
    case Distribution::gaussian: {
      std::normal_distribution<double> nd(0.0, 1.0);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < d_dim; ++j) inst.C(i, j) = nd(gen);
      for (int i = 0; i < n; ++i) inst.target(i) = nd(gen);
      break;
    }
    case Distribution::uniform: {
      std::uniform_real_distribution<double> ud(-1.0, 1.0);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < d_dim; ++j) inst.C(i, j) = ud(gen);
      for (int i = 0; i < n; ++i) inst.target(i) = ud(gen);
      break;
    }
    case Distribution::ill_conditioned: {
      if (!(spec.condition >= 1.0))
        throw Error(ErrorCode::unsupported_distribution, "condition number must be >= 1");
      Eigen::HouseholderQR<Mat> qu(gaussian_matrix(gen, n, d_dim));
      Mat U = qu.householderQ() * Mat::Identity(n, d_dim);
      Eigen::HouseholderQR<Mat> qv(gaussian_matrix(gen, d_dim, d_dim));
      Mat V = qv.householderQ() * Mat::Identity(d_dim, d_dim);
      Vec sigma(d_dim);
      for (int j = 0; j < d_dim; ++j) {
        double t = d_dim == 1 ? 0.0 : static_cast<double>(j) / (d_dim - 1);
        sigma(j) = std::pow(spec.condition, -t);
      }
      // Scale so typical row norms are O(1).
      inst.C = std::sqrt(static_cast<double>(n)) * U * sigma.asDiagonal() * V.transpose();
      std::normal_distribution<double> nd(0.0, 1.0);
      for (int i = 0; i < n; ++i) inst.target(i) = nd(gen);
      break;
    }
  }
  return inst;
}

nlohmann::json to_json(const Instance& inst) {
  nlohmann::json j;
  j["n"] = inst.n;
  j["d"] = inst.d_dim;
  std::vector<double> c(inst.C.data(), inst.C.data() + inst.C.size());
  j["C"] = c;
  j["target"] = std::vector<double>(inst.target.data(), inst.target.data() + inst.target.size());
  if (inst.scale_hint) j["scale_hint"] = *inst.scale_hint;
  else j["scale_hint"] = nullptr;
  return j;
}

Instance instance_from_json(const nlohmann::json& j) {
  try {
    Instance inst;
    inst.n = j.at("n").get<int>();
    inst.d_dim = j.at("d").get<int>();
    auto c = j.at("C").get<std::vector<double>>();
    auto t = j.at("target").get<std::vector<double>>();
    if (inst.n < 1 || inst.d_dim < 1)
      throw Error(ErrorCode::invalid_instance, "n and d must be >= 1");
    if (c.size() != static_cast<std::size_t>(inst.n) * inst.d_dim)
      throw Error(ErrorCode::invalid_instance, "C length does not equal n*d");
    if (t.size() != static_cast<std::size_t>(inst.n))
      throw Error(ErrorCode::invalid_instance, "target length does not equal n");
    inst.C = Eigen::Map<RowMat>(c.data(), inst.n, inst.d_dim);
    inst.target = Eigen::Map<Vec>(t.data(), inst.n);
    if (j.contains("scale_hint") && !j["scale_hint"].is_null())
      inst.scale_hint = j["scale_hint"].get<double>();
    inst.validate();
    return inst;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::invalid_instance, std::string("malformed instance JSON: ") + e.what());
  }
}

Instance load_instance(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, "cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::invalid_instance, std::string("malformed instance JSON: ") + e.what());
  }
  return instance_from_json(j);
}

void save_instance(const Instance& inst, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io_error, "cannot write " + path);
  out << to_json(inst).dump() << "\n";
}

Vec least_squares(const Instance& inst) {
  Mat c = inst.C;
  return c.completeOrthogonalDecomposition().solve(inst.target);
}

}  // namespace linf_mwu
