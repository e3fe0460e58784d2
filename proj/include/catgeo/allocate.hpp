#pragma once

#include <optional>
#include <variant>

#include "catgeo/common.hpp"

namespace catgeo {

// Constraint functionals Psi for the resource term int Psi(F_code) P dx.
struct PowerLaw {
  double alpha = 1.0;
};
struct Entropic {};  // Psi = ln; multiplier is beta with F_code = beta F_cat
struct Tabulated {   // monotone samples of Psi on a u-grid
  Vec u;
  Vec psi;
};
using Constraint = std::variant<PowerLaw, Entropic, Tabulated>;

// 1-D grid of (x, P(x), F_cat(x)) plus a constraint; input to the optimizer
// minimizing 1/2 int (F_cat/F_code) P dx + lambda (int Psi(F_code) P dx - c).
struct AllocationProblem {
  Vec x;
  Vec w;     // quadrature weights
  Vec p;     // P(x) at nodes
  Vec fcat;  // F_cat(x) at nodes, scalar (K = 1)
  Constraint constraint = PowerLaw{1.0};
  double multiplier = 1.0;          // lambda (power-law / tabulated) or beta (entropic)
  std::optional<double> budget;     // when set, lambda solves sum w p Psi(F) = c

  void validate() const;
};

struct AllocationResult {
  Vec fcode;
  std::vector<int> branch_id;   // index of the monotone branch of u^2 Psi'(u)
  std::vector<int> jump_nodes;  // nodes where the branch changes vs the previous node
  double lambda = 0;            // multiplier actually used (after budget solve)
};

// Closed form F = (F_cat / (2 alpha lambda))^{1/(1+alpha)}.
AllocationResult solve_power_law(const AllocationProblem& problem);

// F = beta F_cat pointwise.
AllocationResult solve_entropic(const AllocationProblem& problem);

// Per-node root solve of u^2 Psi'(u) = v/(2 lambda) on a tabulated Psi
// (monotone cubic interpolant); among multiple roots picks the one with the
// smallest per-node contribution v/(2u) + lambda Psi(u), ties to smaller u.
AllocationResult solve_general(const AllocationProblem& problem);

// Independent oracle: direct per-node 1-D minimization of the integrand
// v/(2u) + lambda Psi(u) (dense bracketing scan + golden-section refinement).
AllocationResult grid_minimize(const AllocationProblem& problem);

// Monotone cubic (Fritsch-Carlson) interpolant used for tabulated Psi.
struct MonotoneCubic {
  Vec x, y, slope;
  static MonotoneCubic fit(const Vec& x, const Vec& y);
  double eval(double t) const;
  double deriv(double t) const;
  double lo() const { return x(0); }
  double hi() const { return x(x.size() - 1); }
};

}  // namespace catgeo
