#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <Eigen/Dense>
#include "json.hpp"

namespace linf_mwu {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Instance {
  int n = 0;
  int d_dim = 0;
  RowMat C;
  Vec target;
  std::optional<double> scale_hint;

  // Throws invalid_instance when shapes or entries are bad.
  void validate() const;
};

struct DoubledInstance {
  RowMat C_tilde;
  Vec d_tilde;

  int rows() const { return static_cast<int>(C_tilde.rows()); }
  int half() const { return rows() / 2; }
};

DoubledInstance double_instance(const Instance& inst);

Instance normalize(const Instance& inst, double opt);

double residual_inf(const Instance& inst, const Vec& x);
double residual_inf(const DoubledInstance& dbl, const Vec& x);

enum class Distribution { gaussian, uniform, ill_conditioned };

struct DistributionSpec {
  Distribution kind = Distribution::gaussian;
  double condition = 1e6;  // only for ill_conditioned
};

DistributionSpec parse_distribution(const std::string& name, double condition = 1e6);

Instance generate(std::uint64_t seed, int n, int d_dim, const DistributionSpec& spec);

nlohmann::json to_json(const Instance& inst);
Instance instance_from_json(const nlohmann::json& j);
Instance load_instance(const std::string& path);
void save_instance(const Instance& inst, const std::string& path);

// Least-squares fit x2 = argmin ||Cx - target||_2 (complete orthogonal decomposition).
Vec least_squares(const Instance& inst);

}  // namespace linf_mwu
