#include "catgeo/catfisher.hpp"

#include <cmath>

namespace catgeo {

FisherMatrix fisher_cat(const CategoryModel& model, const Vec& x) {
  const int K = model.dim();
  Flags flags;
  Vec post = model.posterior(x);
  Mat grads = model.posterior_gradients(x, &flags);
  Mat f = Mat::Zero(K, K);
  for (int y = 0; y < model.num_classes(); ++y) {
    if (post(y) < 1e-300) {
      // numerator vanishes faster than the posterior
      add_flag(flags, "DegeneratePosterior");
      continue;
    }
    f.noalias() += grads.row(y).transpose() * grads.row(y) / post(y);
  }
  return FisherMatrix::from_matrix(f, std::move(flags));
}

Pdd pdd(const CategoryModel& model, const Vec& x) {
  GradResult g = model.grad_log_odds(x);
  double norm = g.value.norm();
  if (norm < 1e-12) fail("ZeroGradient", "stationary point of the log odds");
  Vec post = model.posterior(x);
  Pdd out;
  out.direction = g.value / norm;
  out.eigenvalue = post(0) * post(1) * norm * norm;
  out.flags = std::move(g.flags);
  return out;
}

double fcat_eigenvalue(const CategoryModel& model, const Vec& x) {
  GradResult g = model.grad_log_odds(x);
  Vec post = model.posterior(x);
  return post(0) * post(1) * g.value.squaredNorm();
}

Polyline trace_pdc(const CategoryModel& model, const Vec& x0, double step, double max_arc) {
  if (!(step > 0.0) || !(max_arc > 0.0))
    fail("InvalidParameter", "step and max_arc must be positive");
  GradResult g0 = model.grad_log_odds(x0);
  if (g0.value.norm() < 1e-12) fail("ZeroGradient", "grad L vanishes at the start point");
  double l0 = model.log_odds(x0);
  // Head toward the boundary: along -grad L on the L>0 side, +grad L otherwise.
  double sign = l0 > 0.0 ? -1.0 : 1.0;

  auto field = [&](const Vec& p) { return (sign * model.grad_log_odds(p).value).eval(); };

  Polyline line;
  line.push(x0);
  Vec x = x0;
  double lprev = l0;
  double crossed_at = -1.0;
  const double margin = 0.25 * max_arc;
  while (line.total_arc() < max_arc) {
    Vec k1 = field(x);
    double speed = k1.norm();
    if (speed < 1e-10) break;  // stationary point
    double dt = step / speed;
    Vec k2 = field(x + 0.5 * dt * k1);
    Vec k3 = field(x + 0.5 * dt * k2);
    Vec k4 = field(x + dt * k3);
    Vec xn = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    double ln = model.log_odds(xn);
    if (std::abs(ln - lprev) > 10.0)
      fail("StepTooLarge", "single step changed L by more than 10");
    if ((xn - x).norm() == 0.0) break;
    line.push(xn);
    if (crossed_at < 0.0 && lprev * ln <= 0.0 && lprev != ln) crossed_at = line.total_arc();
    if (crossed_at >= 0.0 && line.total_arc() >= crossed_at + margin) break;
    x = xn;
    lprev = ln;
  }
  return line;
}

Vec find_boundary_on_pdc(const CategoryModel& model, const Polyline& pdc) {
  if (pdc.size() < 2) fail("NoSignChange", "polyline too short");
  auto l_at = [&](double s) { return model.log_odds(pdc.at_arc(s)); };
  double lo = pdc.arc_lengths.front(), hi = pdc.arc_lengths.back();
  double llo = l_at(lo);
  // locate a bracketing segment
  double bracket_hi = -1.0, bracket_lo = -1.0;
  for (size_t i = 1; i < pdc.size(); ++i) {
    double li = model.log_odds(pdc.points[i]);
    if (llo == 0.0) return pdc.points[i - 1];
    if (llo * li <= 0.0) {
      bracket_lo = pdc.arc_lengths[i - 1];
      bracket_hi = pdc.arc_lengths[i];
      break;
    }
    llo = li;
  }
  if (bracket_hi < 0.0) fail("NoSignChange", "L does not change sign along the polyline");
  lo = bracket_lo;
  hi = bracket_hi;
  double flo = l_at(lo);
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    double fm = l_at(mid);
    if (std::abs(fm) < 1e-10) return pdc.at_arc(mid);
    if (flo * fm <= 0.0) {
      hi = mid;
    } else {
      lo = mid;
      flo = fm;
    }
  }
  return pdc.at_arc(0.5 * (lo + hi));
}

Vec find_fcat_max_on_pdc(const CategoryModel& model, const Polyline& pdc) {
  if (pdc.size() < 3) fail("NoInteriorMax", "polyline too short");
  // coarse scan over the recorded nodes
  size_t best = 0;
  double fbest = -1.0;
  for (size_t i = 0; i < pdc.size(); ++i) {
    double f = fcat_eigenvalue(model, pdc.points[i]);
    if (f > fbest) {
      fbest = f;
      best = i;
    }
  }
  if (best == 0 || best + 1 == pdc.size())
    fail("NoInteriorMax", "f_cat is monotone along the polyline");
  double lo = pdc.arc_lengths[best - 1];
  double hi = pdc.arc_lengths[best + 1];
  auto f_at = [&](double s) { return fcat_eigenvalue(model, pdc.at_arc(s)); };
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = hi - gr * (hi - lo);
  double d = lo + gr * (hi - lo);
  double fc = f_at(c), fd = f_at(d);
  while (hi - lo > 1e-12 * (1.0 + hi)) {
    if (fc > fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - gr * (hi - lo);
      fc = f_at(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + gr * (hi - lo);
      fd = f_at(d);
    }
  }
  return pdc.at_arc(0.5 * (lo + hi));
}

double fcat_extremum_residual(const CategoryModel& model, const Vec& x) {
  double l = model.log_odds(x);
  Vec g = model.grad_log_odds(x).value;
  Mat h = model.hessian_log_odds(x);
  double g2 = g.squaredNorm();
  // (1 - e^L)/(1 + e^L) = -tanh(L/2), computed in a form stable for large |L|
  double t = -std::tanh(0.5 * l);
  return t * g2 * g2 + 2.0 * g.dot(h * g);
}

CategoryModel gauss1d_model(double a, double sigma, double c) {
  Vec m0(1), m1(1);
  m0 << -c;
  m1 << c;
  Mat s0(1, 1), s1(1, 1);
  s0 << sigma * sigma;
  s1 << a * a * sigma * sigma;
  Vec priors(2);
  priors << 0.5, 0.5;
  std::vector<Component> comps;
  comps.emplace_back(GaussianComponent(m0, s0));
  comps.emplace_back(GaussianComponent(m1, s1));
  return CategoryModel(priors, std::move(comps));
}

namespace {

// Solves z^2 = (2/eta) coth(l(z)/2) with l(z) = eta/2 (z^2 - z_b^2), z > z_b.
double solve_fcat_radius(double eta, double z_b) {
  auto psi = [&](double z) {
    double l = 0.5 * eta * (z * z - z_b * z_b);
    return z * z - (2.0 / eta) / std::tanh(0.5 * l);
  };
  double lo = z_b * (1.0 + 1e-14) + 1e-14;
  double hi = z_b + 1.0;
  while (psi(hi) < 0.0) hi += hi;  // expand until the root is bracketed
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (psi(mid) < 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

GaussKdSummary gauss_kd_summary(double a, double sigma, int K) {
  if (!(a >= 1.0) || !(sigma > 0.0) || K < 1)
    fail("InvalidParameter", "need a >= 1, sigma > 0, K >= 1");
  GaussKdSummary s;
  if (a == 1.0) return s;  // degenerate: hyperplane boundary through the origin
  s.eta = (a * a - 1.0) / (a * a * sigma * sigma);
  s.rho = (a * a + 1.0) / (a * a - 1.0);
  s.gamma = 2.0 * std::log(a) / s.eta;
  s.z_b = std::sqrt(s.rho * s.rho - 1.0 + K * s.gamma);
  s.z = solve_fcat_radius(s.eta, s.z_b);
  return s;
}

Gauss1dSummary gauss1d_summary(double a, double sigma, double c) {
  if (!(a >= 1.0) || !(sigma > 0.0) || !(c > 0.0))
    fail("InvalidParameter", "need a >= 1, sigma > 0, c > 0");
  Gauss1dSummary s;
  s.a = a;
  s.sigma = sigma;
  s.c = c;
  CategoryModel model = gauss1d_model(a, sigma, c);
  auto density_at = [&](double x) {
    Vec v(1);
    v << x;
    return model.density(v);
  };
  if (a == 1.0) {
    // equal variances: boundary and maximum coincide at x = 0
    s.p_at_xb_plus = density_at(0.0);
    s.p_at_xb_minus = s.p_at_xb_plus;
    return s;
  }
  s.eta = (a * a - 1.0) / (a * a * sigma * sigma);
  s.rho = (a * a + 1.0) / (a * a - 1.0);
  s.gamma = 2.0 * std::log(a) / s.eta;
  s.z_b = std::sqrt((s.rho * s.rho - 1.0) * c * c + s.gamma);
  s.z = solve_fcat_radius(s.eta, s.z_b);
  s.x_b_plus = -s.rho * c + s.z_b;
  s.x_b_minus = -s.rho * c - s.z_b;
  s.x_cat_plus = -s.rho * c + s.z;
  s.x_cat_minus = -s.rho * c - s.z;
  s.p_at_xb_plus = density_at(s.x_b_plus);
  s.p_at_xb_minus = density_at(s.x_b_minus);
  return s;
}

int rank_fcat(const CategoryModel& model, const Vec& x, double abs_floor) {
  FisherMatrix f = fisher_cat(model, x);
  return f.rank(1e-8, abs_floor);
}

}  // namespace catgeo
