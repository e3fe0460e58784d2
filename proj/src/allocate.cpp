#include "catgeo/allocate.hpp"

#include <cmath>
#include <functional>
#include <memory>

namespace catgeo {

namespace {

constexpr double kUMin = 1e-8;

double golden_min(const std::function<double(double)>& f, double lo, double hi) {
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = hi - gr * (hi - lo);
  double d = lo + gr * (hi - lo);
  double fc = f(c), fd = f(d);
  while (hi - lo > 1e-13 * (1.0 + std::abs(hi))) {
    if (fc < fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - gr * (hi - lo);
      fc = f(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + gr * (hi - lo);
      fd = f(d);
    }
  }
  return 0.5 * (lo + hi);
}

// lambda from the budget via monotone bisection on sum w p Psi(F(lambda)) = c.
template <typename Solve>
double solve_budget(const AllocationProblem& pb, double c, const Solve& profile_cost) {
  double lo = 1e-12, hi = 1.0;
  // profile cost decreases as lambda grows
  while (profile_cost(hi) > c) hi *= 2.0;
  while (profile_cost(lo) < c) lo *= 0.5;
  for (int it = 0; it < 200; ++it) {
    double mid = std::sqrt(lo * hi);
    if (profile_cost(mid) > c)
      lo = mid;
    else
      hi = mid;
  }
  return std::sqrt(lo * hi);
}

}  // namespace

void AllocationProblem::validate() const {
  const long n = x.size();
  if (n < 1 || w.size() != n || p.size() != n || fcat.size() != n)
    fail("DimMismatch", "grid arrays must have equal length");
  if (p.minCoeff() < 0.0) fail("InvalidParameter", "p must be nonnegative");
  if (fcat.minCoeff() < 0.0) fail("InvalidParameter", "fcat must be nonnegative");
  double mass = (w.array() * p.array()).sum();
  if (std::abs(mass - 1.0) > 1e-3)
    fail("InvalidParameter", "sum w p must be approximately 1, got " + std::to_string(mass));
  if (!(multiplier > 0.0)) fail("InvalidParameter", "multiplier must be positive");
  if (const auto* pl = std::get_if<PowerLaw>(&constraint)) {
    if (!(pl->alpha > 0.0)) fail("InvalidParameter", "alpha must be positive");
  } else if (const auto* tab = std::get_if<Tabulated>(&constraint)) {
    if (tab->u.size() < 4 || tab->u.size() != tab->psi.size())
      fail("InvalidParameter", "tabulated Psi needs at least 4 samples");
    for (long i = 1; i < tab->u.size(); ++i) {
      if (!(tab->u(i) > tab->u(i - 1)))
        fail("InvalidParameter", "tabulated u grid must be strictly increasing");
      if (tab->psi(i) < tab->psi(i - 1))
        fail("InvalidParameter", "tabulated Psi must be monotone nondecreasing");
    }
  }
}

namespace {

// derivative at x(i) of the Lagrange polynomial through points [lo, hi)
double lagrange_deriv_at(const Vec& x, const Vec& y, long lo, long hi, long i) {
  double acc = 0.0;
  for (long j = lo; j < hi; ++j) {
    if (j == i) {
      double s = 0.0;
      for (long k = lo; k < hi; ++k)
        if (k != i) s += 1.0 / (x(i) - x(k));
      acc += y(i) * s;
    } else {
      double num = 1.0, den = 1.0;
      for (long k = lo; k < hi; ++k) {
        if (k == j) continue;
        if (k != i) num *= x(i) - x(k);
        den *= x(j) - x(k);
      }
      acc += y(j) * num / den;
    }
  }
  return acc;
}

}  // namespace

MonotoneCubic MonotoneCubic::fit(const Vec& x, const Vec& y) {
  const long n = x.size();
  MonotoneCubic mc;
  mc.x = x;
  mc.y = y;
  mc.slope = Vec(n);
  Vec d(n - 1);
  for (long i = 0; i + 1 < n; ++i) d(i) = (y(i + 1) - y(i)) / (x(i + 1) - x(i));
  for (long i = 0; i < n; ++i) {
    // high-order slope from a 5-point stencil, then the Hyman monotonicity
    // filter so the interpolant stays monotone on monotone data
    long lo = std::max<long>(0, std::min(i - 2, n - 5));
    long hi = std::min(n, lo + 5);
    double s = lagrange_deriv_at(x, y, lo, hi, i);
    double dl = i > 0 ? d(i - 1) : d(i);
    double dr = i + 1 < n ? d(i) : d(i - 1);
    if (dl * dr < 0.0) {
      s = 0.0;
    } else {
      double cap = 3.0 * std::min(std::abs(dl), std::abs(dr));
      double sign = dr >= 0.0 ? 1.0 : -1.0;
      if (s * sign < 0.0)
        s = 0.0;
      else if (std::abs(s) > cap)
        s = sign * cap;
    }
    mc.slope(i) = s;
  }
  return mc;
}

double MonotoneCubic::eval(double t) const {
  const long n = x.size();
  if (t <= x(0)) return y(0) + slope(0) * (t - x(0));
  if (t >= x(n - 1)) return y(n - 1) + slope(n - 1) * (t - x(n - 1));
  long lo = 0, hi = n - 1;
  while (hi - lo > 1) {
    long mid = (lo + hi) / 2;
    if (x(mid) <= t)
      lo = mid;
    else
      hi = mid;
  }
  double h = x(lo + 1) - x(lo);
  double s = (t - x(lo)) / h;
  double h00 = (1 + 2 * s) * (1 - s) * (1 - s);
  double h10 = s * (1 - s) * (1 - s);
  double h01 = s * s * (3 - 2 * s);
  double h11 = s * s * (s - 1);
  return h00 * y(lo) + h10 * h * slope(lo) + h01 * y(lo + 1) + h11 * h * slope(lo + 1);
}

double MonotoneCubic::deriv(double t) const {
  const long n = x.size();
  if (t <= x(0)) return slope(0);
  if (t >= x(n - 1)) return slope(n - 1);
  long lo = 0, hi = n - 1;
  while (hi - lo > 1) {
    long mid = (lo + hi) / 2;
    if (x(mid) <= t)
      lo = mid;
    else
      hi = mid;
  }
  double h = x(lo + 1) - x(lo);
  double s = (t - x(lo)) / h;
  double d00 = 6 * s * s - 6 * s;
  double d10 = 3 * s * s - 4 * s + 1;
  double d01 = -6 * s * s + 6 * s;
  double d11 = 3 * s * s - 2 * s;
  return (d00 * y(lo) + d01 * y(lo + 1)) / h + d10 * slope(lo) + d11 * slope(lo + 1);
}

AllocationResult solve_power_law(const AllocationProblem& pb) {
  pb.validate();
  const auto* pl = std::get_if<PowerLaw>(&pb.constraint);
  if (!pl) fail("InvalidParameter", "constraint is not a power law");
  const long n = pb.x.size();
  double alpha = pl->alpha;
  auto profile = [&](double lambda) {
    Vec f(n);
    for (long i = 0; i < n; ++i)
      f(i) = pb.fcat(i) > 0.0
                 ? std::pow(pb.fcat(i) / (2.0 * alpha * lambda), 1.0 / (1.0 + alpha))
                 : 0.0;
    return f;
  };
  double lambda = pb.multiplier;
  if (pb.budget) {
    auto cost = [&](double lam) {
      Vec f = profile(lam);
      double c = 0.0;
      for (long i = 0; i < n; ++i)
        c += pb.w(i) * pb.p(i) * std::pow(f(i), alpha);
      return c;
    };
    lambda = solve_budget(pb, *pb.budget, cost);
  }
  AllocationResult res;
  res.fcode = profile(lambda);
  res.branch_id.assign(n, 0);
  res.lambda = lambda;
  return res;
}

AllocationResult solve_entropic(const AllocationProblem& pb) {
  pb.validate();
  if (!std::holds_alternative<Entropic>(pb.constraint))
    fail("InvalidParameter", "constraint is not entropic");
  AllocationResult res;
  res.fcode = pb.multiplier * pb.fcat;
  res.branch_id.assign(pb.x.size(), 0);
  res.lambda = pb.multiplier;
  return res;
}

AllocationResult solve_general(const AllocationProblem& pb) {
  pb.validate();
  const auto* tab = std::get_if<Tabulated>(&pb.constraint);
  if (!tab) fail("InvalidParameter", "constraint is not tabulated");
  const long n = pb.x.size();
  MonotoneCubic psi = MonotoneCubic::fit(tab->u, tab->psi);
  double lambda = pb.multiplier;

  // phi(u) = u^2 Psi'(u) sampled finely; roots are bracketed on its sign
  // changes and refined by bisection. Branches are the maximal increasing
  // segments of phi.
  const long m = 20000;
  double ulo = std::max(psi.lo(), kUMin);
  double uhi = psi.hi();
  Vec us(m), phi(m);
  for (long i = 0; i < m; ++i) {
    us(i) = ulo + (uhi - ulo) * i / (m - 1.0);
    phi(i) = us(i) * us(i) * psi.deriv(us(i));
  }
  std::vector<int> branch_of(m, 0);
  int nb = 0;
  for (long i = 1; i < m; ++i) {
    if (phi(i) < phi(i - 1)) {
      // decreasing part: next increasing segment is a new branch
      while (i + 1 < m && phi(i + 1) < phi(i)) {
        branch_of[i] = -1;
        ++i;
      }
      branch_of[i] = -1;
      ++nb;
    }
    if (branch_of[i] == 0) branch_of[i] = nb;
  }
  branch_of[0] = 0;
  double phimax = phi.maxCoeff();

  auto contribution = [&](double v, double u) {
    return v / (2.0 * u) + lambda * psi.eval(u);
  };

  AllocationResult res;
  res.fcode = Vec::Zero(n);
  res.branch_id.assign(n, 0);
  for (long node = 0; node < n; ++node) {
    double v = pb.fcat(node);
    if (v <= 0.0) {
      res.fcode(node) = 0.0;
      res.branch_id[node] = 0;
      continue;
    }
    double target = v / (2.0 * lambda);
    if (target > phimax)
      fail("NoRoot", "v/(2 lambda) exceeds the range of u^2 Psi'(u)");
    double best_u = -1.0;
    double best_cost = 0.0;
    int best_branch = 0;
    for (long i = 1; i < m; ++i) {
      if ((phi(i - 1) - target) * (phi(i) - target) > 0.0) continue;
      if (phi(i) < phi(i - 1)) continue;  // decreasing crossings are not minima
      double lo = us(i - 1), hi = us(i);
      for (int it = 0; it < 100; ++it) {
        double mid = 0.5 * (lo + hi);
        double pm = mid * mid * psi.deriv(mid);
        if (pm < target)
          lo = mid;
        else
          hi = mid;
      }
      double u = 0.5 * (lo + hi);
      double cost = contribution(v, u);
      if (best_u < 0.0 || cost < best_cost - 1e-14 * std::abs(best_cost) ||
          (std::abs(cost - best_cost) <= 1e-14 * std::abs(best_cost) && u < best_u)) {
        best_u = u;
        best_cost = cost;
        best_branch = branch_of[i] >= 0 ? branch_of[i] : branch_of[i - 1];
      }
    }
    if (best_u < 0.0) fail("NoRoot", "no increasing-branch root found");
    res.fcode(node) = best_u;
    res.branch_id[node] = best_branch;
  }
  for (long node = 1; node < n; ++node)
    if (res.branch_id[node] != res.branch_id[node - 1])
      res.jump_nodes.push_back(static_cast<int>(node));
  res.lambda = lambda;
  return res;
}

AllocationResult grid_minimize(const AllocationProblem& pb) {
  pb.validate();
  const long n = pb.x.size();
  double lambda = pb.multiplier;
  std::function<double(double)> psi_fn;
  if (const auto* pl = std::get_if<PowerLaw>(&pb.constraint)) {
    double alpha = pl->alpha;
    psi_fn = [alpha](double u) { return std::pow(u, alpha); };
  } else if (std::holds_alternative<Entropic>(pb.constraint)) {
    // entropic multiplier is beta = 1/(2 lambda)
    lambda = 1.0 / (2.0 * pb.multiplier);
    psi_fn = [](double u) { return std::log(u); };
  } else {
    const auto* tab = std::get_if<Tabulated>(&pb.constraint);
    auto interp = std::make_shared<MonotoneCubic>(MonotoneCubic::fit(tab->u, tab->psi));
    psi_fn = [interp](double u) { return interp->eval(u); };
  }

  AllocationResult res;
  res.fcode = Vec::Zero(n);
  res.branch_id.assign(n, 0);
  res.lambda = lambda;
  for (long node = 0; node < n; ++node) {
    double v = pb.fcat(node);
    if (v <= 0.0) continue;
    auto obj = [&](double u) { return v / (2.0 * u) + lambda * psi_fn(u); };
    double umax = 1.0;
    // expand until the best coarse sample is interior
    for (int attempt = 0; attempt < 60; ++attempt) {
      const int scan = 4000;
      double best = kUMin;
      double fbest = obj(kUMin);
      for (int i = 1; i <= scan; ++i) {
        double u = kUMin + (umax - kUMin) * i / static_cast<double>(scan);
        double f = obj(u);
        if (f < fbest) {
          fbest = f;
          best = u;
        }
      }
      if (best < umax * (1.0 - 2.0 / scan)) {
        double h = (umax - kUMin) / scan;
        res.fcode(node) = golden_min(obj, std::max(kUMin, best - h), best + h);
        break;
      }
      umax *= 4.0;
    }
  }
  return res;
}

}  // namespace catgeo
