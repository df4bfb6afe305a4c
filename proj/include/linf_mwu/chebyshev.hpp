#pragma once

#include <vector>

#include "linf_mwu/problem.hpp"

namespace linf_mwu {

// Exact min_x ||Cx - target||_inf with a primal point and a dual certificate.
struct ChebyshevResult {
  double opt = 0;
  Vec x;
  Vec lambda;  // signed row weights: C^T lambda = 0, ||lambda||_1 = 1, lambda^T target = opt
  std::vector<int> active;
  bool fallback = false;  // simplex path instead of subset enumeration
  long subsets = 0;
  double primal_value = 0;  // ||C x - target||_inf
  double dual_value = 0;    // lambda^T target
  double stationarity = 0;  // ||C^T lambda||_inf
  bool certified = false;

  double gap() const { return primal_value - dual_value; }
};

// Number of (k)-subsets of n rows, saturating at `cap + 1`.
long subset_count(int n, int k, long cap);

// Enumerates equioscillation bases of rank+1 rows. Throws budget_exceeded above max_subsets.
ChebyshevResult chebyshev_enumerate(const Instance& inst, long max_subsets = 200000);

// Dense simplex on the dual linear program.
ChebyshevResult chebyshev_simplex(const Instance& inst);

// Enumeration when the subset count fits the budget, simplex otherwise (flagged).
ChebyshevResult bruteforce_opt(const Instance& inst, long max_subsets = 200000);

}  // namespace linf_mwu
