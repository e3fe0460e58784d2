#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "catgeo/catfisher.hpp"
#include "catgeo/scenarios.hpp"

using namespace catgeo;

namespace {

Vec v1(double a) {
  Vec v(1);
  v << a;
  return v;
}

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

// K-dimensional circular pair: class 0 ~ N(-c, sigma^2 I), class 1 ~ N(+c, a^2 sigma^2 I).
CategoryModel circular_model(double a, double sigma, const Vec& c) {
  const int k = static_cast<int>(c.size());
  Vec priors(2);
  priors << 0.5, 0.5;
  std::vector<Component> comps;
  comps.emplace_back(GaussianComponent(-c, sigma * sigma * Mat::Identity(k, k)));
  comps.emplace_back(GaussianComponent(c, a * a * sigma * sigma * Mat::Identity(k, k)));
  return CategoryModel(priors, std::move(comps));
}

CategoryModel random_gaussian_model(int M, int K, RngEngine& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.4, 1.6);
  Vec priors(M);
  for (int y = 0; y < M; ++y) priors(y) = unif(rng);
  priors /= priors.sum();
  std::vector<Component> comps;
  for (int y = 0; y < M; ++y) {
    Vec mean(K);
    for (int d = 0; d < K; ++d) mean(d) = 2.0 * gauss(rng);
    Mat a(K, K);
    for (int i = 0; i < K; ++i)
      for (int j = 0; j < K; ++j) a(i, j) = gauss(rng);
    Mat cov = a * a.transpose() + 0.3 * Mat::Identity(K, K);
    comps.emplace_back(GaussianComponent(mean, cov));
  }
  return CategoryModel(priors, std::move(comps));
}

}  // namespace

TEST_CASE("fisher_cat: symmetric 1-D pair at the boundary") {
  // (1 - m^2) c~^2 with m(0) = 0, c~ = 1
  CategoryModel model = gauss1d_model(1.0, 1.0, 1.0);
  FisherMatrix f = fisher_cat(model, v1(0.0));
  CHECK(f.entries(0, 0) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("fisher_cat: vanishes far from the boundary") {
  CategoryModel model = gauss1d_model(1.0, 1.0, 1.0);
  CHECK(fisher_cat(model, v1(20.0)).entries(0, 0) < 1e-10);
  CHECK(fisher_cat(model, v1(-20.0)).entries(0, 0) < 1e-10);
}

TEST_CASE("fisher_cat: deep-inside trace is tiny next to the boundary trace") {
  CategoryModel model = three_gaussian_model();
  Vec deep = v2(0.0, 5.0);  // well into the top category
  double tr_deep = fisher_cat(model, deep).trace();
  // grid-scan oracle for the nearest boundary point: top-two posteriors equal
  Vec best;
  double best_dist = 1e9;
  for (double x = -4.0; x <= 4.0; x += 0.02) {
    for (double y = -4.0; y <= 5.2; y += 0.02) {
      Vec p = model.posterior(v2(x, y));
      std::vector<double> s(p.data(), p.data() + 3);
      std::sort(s.begin(), s.end());
      if (std::abs(s[2] - s[1]) < 0.01) {
        double d = (v2(x, y) - deep).norm();
        if (d < best_dist) {
          best_dist = d;
          best = v2(x, y);
        }
      }
    }
  }
  REQUIRE(best.size() == 2);
  double tr_boundary = fisher_cat(model, best).trace();
  CHECK(tr_deep < 1e-3 * tr_boundary);
}

TEST_CASE("fisher_cat: outer-product form equals the expected-Hessian form") {
  RngEngine rng = make_engine(101);
  for (int rep = 0; rep < 8; ++rep) {
    CategoryModel model = random_gaussian_model(3, 2, rng);
    std::uniform_real_distribution<double> unif(-2.0, 2.0);
    Vec x = v2(unif(rng), unif(rng));
    FisherMatrix f = fisher_cat(model, x);
    // -sum_y P(y|x) Hess ln P(y|x), finite differences
    double h = 1e-4;
    Mat hess_form = Mat::Zero(2, 2);
    Vec post = model.posterior(x);
    for (int y = 0; y < 3; ++y) {
      Mat hy(2, 2);
      for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
          Vec xpp = x, xpm = x, xmp = x, xmm = x;
          xpp(i) += h; xpp(j) += h;
          xpm(i) += h; xpm(j) -= h;
          xmp(i) -= h; xmp(j) += h;
          xmm(i) -= h; xmm(j) -= h;
          hy(i, j) = (std::log(model.posterior(xpp)(y)) - std::log(model.posterior(xpm)(y)) -
                      std::log(model.posterior(xmp)(y)) + std::log(model.posterior(xmm)(y))) /
                     (4.0 * h * h);
        }
      }
      hess_form -= post(y) * hy;
    }
    double scale = std::max(1e-12, f.entries.cwiseAbs().maxCoeff());
    CHECK((f.entries - hess_form).cwiseAbs().maxCoeff() / scale < 1e-6);
  }
}

TEST_CASE("pdd: equal-covariance direction is c~ everywhere") {
  Vec c = v2(1.0, 0.5);
  Mat cov(2, 2);
  cov << 1.0, 0.2, 0.2, 0.7;
  Vec priors(2);
  priors << 0.5, 0.5;
  std::vector<Component> comps;
  comps.emplace_back(GaussianComponent(-c, cov));
  comps.emplace_back(GaussianComponent(c, cov));
  CategoryModel model(priors, std::move(comps));
  Vec ctilde = cov.llt().solve(c).normalized();
  RngEngine rng = make_engine(7);
  std::uniform_real_distribution<double> unif(-2.0, 2.0);
  for (int it = 0; it < 20; ++it) {
    Vec x = v2(unif(rng), unif(rng));
    Pdd p = pdd(model, x);
    CHECK(std::abs(std::abs(p.direction.dot(ctilde)) - 1.0) < 1e-10);
  }
}

TEST_CASE("pdd: circular case is radial from -rho c") {
  double a = 1.2, sigma = 1.3;
  Vec c = v2(1.0, 0.0);
  CategoryModel model = circular_model(a, sigma, c);
  GaussKdSummary s = gauss_kd_summary(a, sigma, 2);
  Vec center = -s.rho * c;
  RngEngine rng = make_engine(8);
  std::uniform_real_distribution<double> unif(-3.0, 3.0);
  for (int it = 0; it < 20; ++it) {
    Vec x = v2(unif(rng), unif(rng));
    if ((x - center).norm() < 0.5) continue;
    Vec radial = (x - center).normalized();
    Pdd p = pdd(model, x);
    CHECK(std::abs(std::abs(p.direction.dot(radial)) - 1.0) < 1e-10);
  }
}

TEST_CASE("pdd: eigenvalue formula matches the matrix eigensolver") {
  RngEngine rng = make_engine(303);
  int checked = 0;
  while (checked < 100) {
    CategoryModel model = random_gaussian_model(2, 3, rng);
    std::uniform_real_distribution<double> unif(-2.0, 2.0);
    Vec x(3);
    for (int d = 0; d < 3; ++d) x(d) = unif(rng);
    GradResult g = model.grad_log_odds(x);
    if (g.value.norm() < 1e-6) continue;
    Pdd p = pdd(model, x);
    FisherMatrix f = fisher_cat(model, x);
    CHECK(std::abs(p.eigenvalue - f.top_eigenvalue()) <=
          1e-8 * std::max(1e-300, f.top_eigenvalue()));
    ++checked;
  }
}

TEST_CASE("pdd: zero gradient raises") {
  // symmetric equal pair: grad L = 2 c~ never zero; use circular model center
  double a = 1.2, sigma = 1.3;
  Vec c = v2(1.0, 0.0);
  CategoryModel model = circular_model(a, sigma, c);
  GaussKdSummary s = gauss_kd_summary(a, sigma, 2);
  Vec center = -s.rho * c;  // grad L = eta (x + rho c) vanishes here
  CHECK_THROWS_WITH_AS(pdd(model, center), doctest::Contains("ZeroGradient"), Error);
}

TEST_CASE("trace_pdc: equal covariance yields a straight segment") {
  Vec c = v2(1.0, 0.0);
  CategoryModel model = circular_model(1.0, 1.0, c);
  Vec x0 = v2(2.0, 1.5);
  Polyline line = trace_pdc(model, x0, 0.01, 6.0);
  REQUIRE(line.size() > 10);
  // lateral deviation from the line through x0 along c~ (= c here)
  for (const auto& p : line.points) CHECK(std::abs(p(1) - 1.5) < 1e-6);
}

TEST_CASE("trace_pdc: circular case stays on the ray through -rho c") {
  double a = 1.2, sigma = 1.3;
  Vec c = v2(1.0, 0.0);
  CategoryModel model = circular_model(a, sigma, c);
  GaussKdSummary s = gauss_kd_summary(a, sigma, 2);
  Vec center = -s.rho * c;
  Vec x0 = v2(1.3, 2.2);  // off-axis start
  Polyline line = trace_pdc(model, x0, 0.01, 10.0);
  Vec dir = (x0 - center).normalized();
  for (const auto& p : line.points) {
    Vec rel = p - center;
    Vec lateral = rel - dir * dir.dot(rel);
    CHECK(lateral.norm() < 1e-5);
  }
}

TEST_CASE("trace_pdc: recorded tangents align with the local gradient field") {
  double a = 1.5, sigma = 0.9;
  Vec c = v2(0.8, 0.3);
  CategoryModel model = circular_model(a, sigma, c);
  Polyline line = trace_pdc(model, v2(1.5, 1.0), 0.005, 4.0);
  REQUIRE(line.size() > 20);
  for (size_t i = 1; i + 1 < line.size(); ++i) {
    Vec tangent = (line.points[i + 1] - line.points[i - 1]).normalized();
    Vec g = model.grad_log_odds(line.points[i]).value.normalized();
    CHECK(std::abs(tangent.dot(g)) > 1.0 - 1e-6);
  }
}

TEST_CASE("find_boundary_on_pdc: symmetric 1-D boundary at zero") {
  for (double sigma : {0.5, 1.0, 2.0}) {
    CategoryModel model = gauss1d_model(1.0, sigma, 1.0);
    Polyline line = trace_pdc(model, v1(1.7), 0.01, 6.0);
    Vec b = find_boundary_on_pdc(model, line);
    CHECK(std::abs(b(0)) < 1e-9);
    Vec post = model.posterior(b);
    CHECK(std::abs(post(1) - 0.5) < 1e-8);
  }
}

TEST_CASE("find_boundary_on_pdc: 1-D diagonal case frozen oracle value") {
  // a = 1.5, sigma = 0.6: bisection oracle on the closed-form L recorded
  // x_b = -0.09291348770965202 before the build.
  CategoryModel model = gauss1d_model(1.5, 0.6, 1.0);
  Polyline line = trace_pdc(model, v1(1.0), 0.005, 8.0);
  Vec b = find_boundary_on_pdc(model, line);
  CHECK(b(0) == doctest::Approx(-0.09291348770965202).epsilon(1e-8));
}

TEST_CASE("find_boundary_on_pdc: 2-D boundary lands on the z_B sphere") {
  double a = 1.2, sigma = 1.3;
  Vec c = v2(1.0, 0.0);
  CategoryModel model = circular_model(a, sigma, c);
  GaussKdSummary s = gauss_kd_summary(a, sigma, 2);
  Vec center = -s.rho * c;
  for (double ang : {0.3, 1.1, 2.0, 4.4}) {
    Vec x0 = center + (s.z_b + 1.5) * v2(std::cos(ang), std::sin(ang));
    Polyline line = trace_pdc(model, x0, 0.01, 6.0);
    Vec b = find_boundary_on_pdc(model, line);
    CHECK(std::abs((b - center).norm() - s.z_b) < 1e-8);
  }
}

TEST_CASE("find_boundary_on_pdc: no crossing raises") {
  CategoryModel model = gauss1d_model(1.0, 1.0, 1.0);
  Polyline line = trace_pdc(model, v1(6.0), 0.01, 1.0);  // stops long before 0
  CHECK_THROWS_WITH_AS(find_boundary_on_pdc(model, line), doctest::Contains("NoSignChange"),
                       Error);
}

TEST_CASE("find_fcat_max_on_pdc: equal covariance maximum at the boundary") {
  CategoryModel model = gauss1d_model(1.0, 0.8, 1.0);
  Polyline line = trace_pdc(model, v1(1.4), 0.005, 6.0);
  Vec m = find_fcat_max_on_pdc(model, line);
  CHECK(std::abs(m(0)) < 1e-6);
  CHECK(std::abs(fcat_extremum_residual(model, m)) <
        1e-6 * std::pow(model.grad_log_odds(m).value.norm(), 4));
}

TEST_CASE("find_fcat_max_on_pdc: displaced into the wider category") {
  // frozen oracle: scalar root of the radius equation gives
  // x_cat = 0.005113031356466902 for a = 1.5, sigma = 0.6
  CategoryModel model = gauss1d_model(1.5, 0.6, 1.0);
  Gauss1dSummary s = gauss1d_summary(1.5, 0.6, 1.0);
  Polyline line = trace_pdc(model, v1(1.0), 0.002, 8.0);
  Vec m = find_fcat_max_on_pdc(model, line);
  CHECK(m(0) == doctest::Approx(0.005113031356466902).epsilon(1e-5));
  CHECK(m(0) > s.x_b_plus);  // into the wider '+' category
  CHECK(std::abs(fcat_extremum_residual(model, m)) <
        1e-6 * std::pow(model.grad_log_odds(m).value.norm(), 4));
}

TEST_CASE("find_fcat_max_on_pdc: 2-D maxima sphere radius solves the balance") {
  double a = 1.2, sigma = 1.3;
  Vec c = v2(1.0, 0.0);
  CategoryModel model = circular_model(a, sigma, c);
  GaussKdSummary s = gauss_kd_summary(a, sigma, 2);
  Vec center = -s.rho * c;
  CHECK(s.z > s.z_b);
  for (double ang : {0.7, 2.9}) {
    Vec x0 = center + (s.z_b + 2.0) * v2(std::cos(ang), std::sin(ang));
    Polyline line = trace_pdc(model, x0, 0.005, 8.0);
    Vec m = find_fcat_max_on_pdc(model, line);
    CHECK(std::abs((m - center).norm() - s.z) < 1e-5);
  }
}

TEST_CASE("gauss1d_summary: equal variances collapse to zero") {
  Gauss1dSummary s = gauss1d_summary(1.0, 0.7, 1.0);
  CHECK(s.x_b_plus == 0.0);
  CHECK(s.x_cat_plus == 0.0);
}

TEST_CASE("gauss1d_summary: closed forms match the generic pdc pipeline") {
  double a = 2.0, sigma = 1.0;
  Gauss1dSummary s = gauss1d_summary(a, sigma, 1.0);
  CategoryModel model = gauss1d_model(a, sigma, 1.0);
  Polyline line = trace_pdc(model, v1(1.2), 0.002, 10.0);
  Vec b = find_boundary_on_pdc(model, line);
  Vec m = find_fcat_max_on_pdc(model, line);
  CHECK(b(0) == doctest::Approx(s.x_b_plus).epsilon(1e-8));
  CHECK(m(0) == doctest::Approx(s.x_cat_plus).epsilon(1e-5));
  // frozen oracle values (independent bisection, recorded before the build)
  CHECK(s.x_b_plus == doctest::Approx(0.2375839101406414).epsilon(1e-10));
  CHECK(s.x_cat_plus == doctest::Approx(0.8067230981144646).epsilon(1e-8));
  CHECK(s.p_at_xb_plus > s.p_at_xb_minus);  // the other root sees almost no data
}

TEST_CASE("gauss1d_summary: z - z_B shrinks monotonically as a -> 1") {
  double prev = 1e9;
  for (double a : {1.4, 1.3, 1.2, 1.1, 1.05, 1.02}) {
    Gauss1dSummary s = gauss1d_summary(a, 1.0, 1.0);
    double gap = s.z - s.z_b;
    CHECK(gap > 0.0);
    CHECK(gap < prev);
    prev = gap;
  }
}

TEST_CASE("rank_fcat: binary 2-D generic point has rank one") {
  CategoryModel model = circular_model(1.2, 1.3, v2(1.0, 0.0));
  CHECK(rank_fcat(model, v2(0.4, 0.8)) == 1);
}

TEST_CASE("rank_fcat: three classes near the triple point has rank two") {
  CategoryModel model = three_gaussian_model();
  CHECK(rank_fcat(model, v2(0.02, 0.01)) == 2);
}

TEST_CASE("rank_fcat: deep inside a category all eigenvalues are negligible") {
  CategoryModel model = three_gaussian_model();
  CHECK(rank_fcat(model, v2(0.0, 12.0)) == 0);
}

TEST_CASE("invariant: PSD with rank at most min(M-1, K)") {
  RngEngine rng = make_engine(404);
  for (int rep = 0; rep < 200; ++rep) {
    int M = 2 + static_cast<int>(rng() % 3);
    int K = 1 + static_cast<int>(rng() % 3);
    CategoryModel model = random_gaussian_model(M, K, rng);
    std::uniform_real_distribution<double> unif(-3.0, 3.0);
    Vec x(K);
    for (int d = 0; d < K; ++d) x(d) = unif(rng);
    FisherMatrix f = fisher_cat(model, x);
    CHECK(f.eigenvalues.minCoeff() >= -1e-10 * std::max(1.0, f.top_eigenvalue()));
    CHECK(f.rank() <= std::min(M - 1, K));
  }
}

TEST_CASE("invariant: PDD is orthogonal to the boundary tangent") {
  CategoryModel model = circular_model(1.3, 1.1, v2(1.0, 0.0));
  GaussKdSummary s = gauss_kd_summary(1.3, 1.1, 2);
  Vec center = -s.rho * v2(1.0, 0.0);
  for (double ang : {0.2, 1.5, 3.3, 5.1}) {
    Vec b = center + s.z_b * v2(std::cos(ang), std::sin(ang));
    REQUIRE(std::abs(model.log_odds(b)) < 1e-9);
    // numeric boundary tangent: follow the level set a tiny step
    Vec g = model.grad_log_odds(b).value;
    Vec t = v2(-g(1), g(0)).normalized();
    Pdd p = pdd(model, b);
    CHECK(std::abs(p.direction.dot(t)) < 1e-6);
  }
}

TEST_CASE("invariant: F_cat transforms as J^T F J under linear maps") {
  RngEngine rng = make_engine(505);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int rep = 0; rep < 20; ++rep) {
    CategoryModel model = random_gaussian_model(3, 2, rng);
    // random J with condition number < 10
    Mat j(2, 2);
    do {
      for (int i = 0; i < 2; ++i)
        for (int k = 0; k < 2; ++k) j(i, k) = gauss(rng);
    } while (std::abs(j.determinant()) < 0.2 || j.norm() > 4.0);
    std::vector<Component> comps;
    for (int y = 0; y < 3; ++y) {
      const auto& g = model.gaussian(y);
      comps.emplace_back(GaussianComponent(j * g.mean, j * g.cov * j.transpose()));
    }
    CategoryModel model_z(model.priors(), std::move(comps));
    std::uniform_real_distribution<double> unif(-2.0, 2.0);
    Vec x = v2(unif(rng), unif(rng));
    Mat fx = fisher_cat(model, x).entries;
    Mat fz = fisher_cat(model_z, j * x).entries;
    Mat pulled = j.transpose() * fz * j;
    double scale = std::max(1.0, fx.cwiseAbs().maxCoeff());
    CHECK((fx - pulled).cwiseAbs().maxCoeff() / scale < 1e-8);
  }
}
