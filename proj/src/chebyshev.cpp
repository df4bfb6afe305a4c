#include "linf_mwu/chebyshev.hpp"

#include <algorithm>
#include <cmath>

#include "linf_mwu/error.hpp"

namespace linf_mwu {

namespace {

// C = Cr * V^T with Cr of full column rank.
struct Reduced {
  Mat Cr;
  Mat V;
  int rank = 0;
};

Reduced reduce(const Instance& inst) {
  Eigen::JacobiSVD<Mat> svd(Mat(inst.C), Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vec& s = svd.singularValues();
  Reduced red;
  const double tol = s.size() > 0 ? std::max(inst.n, inst.d_dim) * 1e-13 * s(0) : 0;
  while (red.rank < s.size() && s(red.rank) > tol) ++red.rank;
  red.Cr = svd.matrixU().leftCols(red.rank) * s.head(red.rank).asDiagonal();
  red.V = svd.matrixV().leftCols(red.rank);
  return red;
}

Vec solve_active(const Reduced& red, const Vec& d, const Vec& lambda, double& h) {
  const double l1 = lambda.lpNorm<1>();
  std::vector<int> rows;
  for (int e = 0; e < lambda.size(); ++e)
    if (std::abs(lambda(e)) > 1e-12 * l1) rows.push_back(e);
  Mat A(rows.size(), red.rank + 1);
  Vec rhs(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    A.row(k).head(red.rank) = red.Cr.row(rows[k]);
    A(k, red.rank) = lambda(rows[k]) > 0 ? 1.0 : -1.0;
    rhs(k) = d(rows[k]);
  }
  Vec z = Eigen::CompleteOrthogonalDecomposition<Mat>(A).solve(rhs);
  h = z(red.rank);
  return z.head(red.rank);
}

ChebyshevResult finish(const Instance& inst, const Reduced& red, Vec lambda, const Vec& y_route, bool fallback,
                       long subsets) {
  ChebyshevResult res;
  res.fallback = fallback;
  res.subsets = subsets;
  const Vec& d = inst.target;
  const double l1 = lambda.lpNorm<1>();
  if (l1 > 0) lambda /= l1;
  if (lambda.dot(d) < 0) lambda = -lambda;
  double h = 0;
  Vec y_ref = solve_active(red, d, lambda, h);
  Vec x_route = red.V * y_route;
  Vec x_ref = red.V * y_ref;
  const double p_route = residual_inf(inst, x_route);
  const double p_ref = y_ref.allFinite() ? residual_inf(inst, x_ref) : std::numeric_limits<double>::infinity();
  res.x = p_ref <= p_route ? x_ref : x_route;
  res.primal_value = std::min(p_ref, p_route);
  res.opt = res.primal_value;
  res.lambda = lambda;
  res.dual_value = lambda.dot(d);
  res.stationarity = (inst.C.transpose() * lambda).cwiseAbs().maxCoeff();
  for (int e = 0; e < lambda.size(); ++e)
    if (std::abs(lambda(e)) > 1e-12) res.active.push_back(e);
  const double scale = std::max(1.0, res.primal_value);
  const double cscale = std::max(1.0, inst.C.cwiseAbs().maxCoeff());
  res.certified = std::abs(res.gap()) <= 1e-9 * scale && res.stationarity <= 1e-9 * cscale;
  return res;
}

// Zero optimum when the target lies in the column space; also covers C = 0.
bool trivial_case(const Instance& inst, const Reduced& red, ChebyshevResult& out) {
  if (red.rank == 0) {
    out.x = Vec::Zero(inst.d_dim);
    out.primal_value = out.opt = inst.target.cwiseAbs().maxCoeff();
    int e = 0;
    out.lambda = Vec::Zero(inst.n);
    if (out.opt > 0) {
      inst.target.cwiseAbs().maxCoeff(&e);
      out.lambda(e) = inst.target(e) > 0 ? 1.0 : -1.0;
      out.active = {e};
    }
    out.dual_value = out.lambda.dot(inst.target);
    out.certified = true;
    return true;
  }
  Vec x = least_squares(inst);
  const double r = residual_inf(inst, x);
  if (r <= 1e-12 * std::max(1.0, inst.target.cwiseAbs().maxCoeff())) {
    out.x = x;
    out.opt = out.primal_value = r;
    out.lambda = Vec::Zero(inst.n);
    out.certified = true;
    return true;
  }
  return false;
}

}  // namespace

long subset_count(int n, int k, long cap) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  double c = 1;
  for (int i = 1; i <= k; ++i) {
    c = c * (n - k + i) / i;
    if (c > static_cast<double>(cap)) return cap + 1;
  }
  return static_cast<long>(std::llround(c));
}

ChebyshevResult chebyshev_enumerate(const Instance& inst, long max_subsets) {
  inst.validate();
  const Reduced red = reduce(inst);
  ChebyshevResult triv;
  if (trivial_case(inst, red, triv)) return triv;
  const int n = inst.n;
  const int k = red.rank + 1;
  if (k > n) throw Error(ErrorCode::invalid_instance, "need more rows than the column rank");
  const long total = subset_count(n, k, max_subsets);
  if (total > max_subsets) throw Error(ErrorCode::budget_exceeded, "too many row subsets to enumerate");
  const Vec& d = inst.target;
  std::vector<int> idx(k);
  for (int i = 0; i < k; ++i) idx[i] = i;
  double best = -1;
  Vec best_lambda = Vec::Zero(n);
  Mat M(red.rank, k);
  long count = 0;
  while (true) {
    ++count;
    for (int i = 0; i < k; ++i) M.col(i) = red.Cr.row(idx[i]).transpose();
    Eigen::FullPivLU<Mat> lu(M);
    lu.setThreshold(1e-10);
    Mat ker = lu.kernel();
    if (ker.cols() == 1 && ker.norm() > 0) {
      Vec l = ker.col(0) / ker.col(0).lpNorm<1>();
      double h = 0;
      for (int i = 0; i < k; ++i) h += l(i) * d(idx[i]);
      if (h < 0) {
        l = -l;
        h = -h;
      }
      if (h > best) {
        best = h;
        best_lambda.setZero();
        for (int i = 0; i < k; ++i) best_lambda(idx[i]) = l(i);
      }
    }
    int p = k - 1;
    while (p >= 0 && idx[p] == n - k + p) --p;
    if (p < 0) break;
    ++idx[p];
    for (int i = p + 1; i < k; ++i) idx[i] = idx[i - 1] + 1;
  }
  if (best < 0) throw Error(ErrorCode::internal_consistency, "no nondegenerate row subset");
  double h = 0;
  Vec y = solve_active(red, d, best_lambda, h);
  return finish(inst, red, best_lambda, y, false, count);
}

ChebyshevResult chebyshev_simplex(const Instance& inst) {
  inst.validate();
  const Reduced red = reduce(inst);
  ChebyshevResult triv;
  if (trivial_case(inst, red, triv)) {
    triv.fallback = true;
    return triv;
  }
  const int n = inst.n;
  const int r = red.rank;
  const int m = r + 1;
  const int cols = 2 * n + 1 + r;  // lambda+, lambda-, slack, artificials
  const int art0 = 2 * n + 1;
  const Vec& d = inst.target;
  Mat A = Mat::Zero(m, cols);
  Vec c = Vec::Zero(cols);
  for (int j = 0; j < n; ++j) {
    A.col(j).head(r) = red.Cr.row(j).transpose();
    A.col(j + n).head(r) = -red.Cr.row(j).transpose();
    A(r, j) = A(r, j + n) = 1;
    c(j) = d(j);
    c(j + n) = -d(j);
  }
  A(r, 2 * n) = 1;
  for (int q = 0; q < r; ++q) A(q, art0 + q) = 1;
  Vec b = Vec::Zero(m);
  b(r) = 1;
  std::vector<int> basis(m);
  for (int q = 0; q < r; ++q) basis[q] = art0 + q;
  basis[r] = 2 * n;
  std::vector<char> in_basis(cols, 0);
  for (int j : basis) in_basis[j] = 1;

  auto basis_matrix = [&]() {
    Mat B(m, m);
    for (int i = 0; i < m; ++i) B.col(i) = A.col(basis[i]);
    return B;
  };

  // Pivot the zero-level artificials out of the basis.
  for (int i = 0; i < r; ++i) {
    Eigen::PartialPivLU<Mat> lu(basis_matrix());
    Mat Binv = lu.inverse();
    int pick = -1;
    double mag = 1e-9;
    for (int j = 0; j < art0; ++j) {
      if (in_basis[j]) continue;
      const double v = std::abs(Binv.row(i).dot(A.col(j)));
      if (v > mag) {
        mag = v;
        pick = j;
      }
    }
    if (pick < 0) throw Error(ErrorCode::internal_consistency, "dependent constraint rows in the simplex");
    in_basis[basis[i]] = 0;
    basis[i] = pick;
    in_basis[pick] = 1;
  }

  const double tol = 1e-12 * std::max(1.0, d.cwiseAbs().maxCoeff());
  Vec xB, y;
  for (long iter = 0;; ++iter) {
    if (iter > 200000) throw Error(ErrorCode::internal_consistency, "simplex iteration limit");
    Eigen::PartialPivLU<Mat> lu(basis_matrix());
    xB = lu.solve(b);
    Vec cB(m);
    for (int i = 0; i < m; ++i) cB(i) = c(basis[i]);
    y = lu.transpose().solve(cB);
    int enter = -1;
    for (int j = 0; j < art0; ++j) {
      if (in_basis[j]) continue;
      if (c(j) - y.dot(A.col(j)) > tol) {
        enter = j;
        break;
      }
    }
    if (enter < 0) break;
    Vec dB = lu.solve(A.col(enter));
    int leave = -1;
    double best = 0;
    for (int i = 0; i < m; ++i) {
      if (dB(i) <= 1e-12) continue;
      const double ratio = std::max(0.0, xB(i)) / dB(i);
      if (leave < 0 || ratio < best - 1e-15 || (ratio <= best + 1e-15 && basis[i] < basis[leave])) {
        leave = i;
        best = ratio;
      }
    }
    if (leave < 0) throw Error(ErrorCode::internal_consistency, "unbounded dual program");
    in_basis[basis[leave]] = 0;
    basis[leave] = enter;
    in_basis[enter] = 1;
  }
  Vec lambda = Vec::Zero(n);
  for (int i = 0; i < m; ++i) {
    const int j = basis[i];
    if (j < n) lambda(j) += std::max(0.0, xB(i));
    else if (j < 2 * n) lambda(j - n) -= std::max(0.0, xB(i));
  }
  return finish(inst, red, lambda, y.head(r), true, 0);
}

ChebyshevResult bruteforce_opt(const Instance& inst, long max_subsets) {
  inst.validate();
  const int rank = std::min(inst.n, inst.d_dim);
  if (subset_count(inst.n, rank + 1, max_subsets) <= max_subsets) {
    ChebyshevResult res = chebyshev_enumerate(inst, max_subsets);
    if (res.certified) return res;
  }
  return chebyshev_simplex(inst);
}

}  // namespace linf_mwu
