#pragma once

#include "catgeo/categories.hpp"
#include "catgeo/fisher_matrix.hpp"

namespace catgeo {

// Categorical Fisher information F_cat(x) = sum_y grad P(y|x) grad P(y|x)^T / P(y|x).
// Classes with posterior below 1e-300 are dropped with a DegeneratePosterior flag.
FisherMatrix fisher_cat(const CategoryModel& model, const Vec& x);

// Principal discriminant direction: unit grad L and the unique nonzero
// eigenvalue f_cat = P(+|x) P(-|x) ||grad L||^2. Binary models only.
struct Pdd {
  Vec direction;
  double eigenvalue = 0;
  Flags flags;
};
Pdd pdd(const CategoryModel& model, const Vec& x);

double fcat_eigenvalue(const CategoryModel& model, const Vec& x);

// Integrates dx/dt = +-grad L (RK4, fixed spatial step), heading toward the
// class boundary; stops at max_arc, shortly after a boundary crossing, or at
// a stationary point of L.
Polyline trace_pdc(const CategoryModel& model, const Vec& x0, double step, double max_arc);

// Bisection on arc length to |L| < 1e-10; throws NoSignChange.
Vec find_boundary_on_pdc(const CategoryModel& model, const Polyline& pdc);

// Golden-section search for the interior maximum of f_cat along the polyline;
// throws NoInteriorMax when f_cat is monotone along it.
Vec find_fcat_max_on_pdc(const CategoryModel& model, const Polyline& pdc);

// Residual of the extremum balance condition
// (1-e^L)/(1+e^L) ||grad L||^4 + 2 grad L^T H grad L at x.
double fcat_extremum_residual(const CategoryModel& model, const Vec& x);

// Closed-form geometry of the 1-D pair N(-c, sigma^2), N(+c, (a sigma)^2):
// both boundaries, both Fisher maxima, and the data density at each boundary.
struct Gauss1dSummary {
  double a = 1, sigma = 1, c = 1;
  double eta = 0, rho = 0, gamma = 0;
  double z_b = 0;  // boundary radius about -rho c
  double z = 0;    // Fisher-maximum radius, z > z_b
  double x_b_plus = 0, x_b_minus = 0;
  double x_cat_plus = 0, x_cat_minus = 0;
  double p_at_xb_plus = 0, p_at_xb_minus = 0;
};
Gauss1dSummary gauss1d_summary(double a, double sigma, double c);

// Builds the corresponding CategoryModel (class 0 at -c, class 1 at +c).
CategoryModel gauss1d_model(double a, double sigma, double c);

// K-dimensional circular case: class 0 is N(-c, sigma^2 I), class 1 is
// N(+c, (a sigma)^2 I); returns boundary radius z_b and maximum radius z
// of the spheres centered at -rho c.
struct GaussKdSummary {
  double eta = 0, rho = 0, gamma = 0, z_b = 0, z = 0;
};
GaussKdSummary gauss_kd_summary(double a, double sigma, int K);

// Count of F_cat eigenvalues above max(1e-8 * lambda_max, abs_floor);
// always <= min(M-1, K).
int rank_fcat(const CategoryModel& model, const Vec& x, double abs_floor = 1e-12);

}  // namespace catgeo
