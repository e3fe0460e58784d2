#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "catgeo/categories.hpp"
#include "catgeo/catfisher.hpp"
#include "catgeo/scenarios.hpp"

using namespace catgeo;

namespace {

CategoryModel equal_pair_1d(double c, double sigma) {
  Vec m0(1), m1(1);
  m0 << -c;
  m1 << c;
  Mat s(1, 1);
  s << sigma * sigma;
  Vec priors(2);
  priors << 0.5, 0.5;
  std::vector<Component> comps;
  comps.emplace_back(GaussianComponent(m0, s));
  comps.emplace_back(GaussianComponent(m1, s));
  return CategoryModel(priors, std::move(comps));
}

// ExpGauss pair with the parameters used for the non-Gaussian 2-D figure:
// tau- = 0.2, tau+ = 0.5, sigma2- = 0.1, sigma2+ = 0.4, centers at -1 / +1.
CategoryModel expgauss_pair() {
  Vec priors(2);
  priors << 0.5, 0.5;
  std::vector<Component> comps;
  comps.emplace_back(ExpGaussComponent(-1.0, 0.2, 0.1));
  comps.emplace_back(ExpGaussComponent(1.0, 0.5, 0.4));
  return CategoryModel(priors, std::move(comps));
}

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

}  // namespace

TEST_CASE("posterior: symmetric pair gives 1/2 at the midpoint") {
  CategoryModel model = equal_pair_1d(1.0, 1.0);
  Vec p = model.posterior(v1(0.0));
  CHECK(p(0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(p(1) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("posterior: equal-covariance logistic form at x = c") {
  // P(+|x) = 1/(1+exp(-2 c~ . x)); c = sigma = 1 at x = c gives 1/(1+e^-2).
  CategoryModel model = equal_pair_1d(1.0, 1.0);
  Vec p = model.posterior(v1(1.0));
  CHECK(p(1) == doctest::Approx(0.8807970779778823).epsilon(1e-12));
  // direct density-ratio cross-check
  double num = std::exp(-0.0) /* N(1;1,1) up to shared consts */;
  double den = num + std::exp(-2.0) /* N(1;-1,1) */;
  CHECK(p(1) == doctest::Approx(num / den).epsilon(1e-12));
}

TEST_CASE("posterior: three-Gaussian argmax at a center matches ball labels") {
  CategoryModel model = three_gaussian_model();
  auto samples = model.sample(200000, 7);
  for (int k = 0; k < 3; ++k) {
    Vec center = model.gaussian(k).mean;
    Vec post = model.posterior(center);
    int argmax = 0;
    post.maxCoeff(&argmax);
    CHECK(argmax == k);
    // MC oracle: majority label inside a small ball around the center
    int counts[3] = {0, 0, 0};
    for (const auto& s : samples)
      if ((s.x - center).norm() < 0.3) counts[s.y]++;
    int best = 0;
    for (int y = 1; y < 3; ++y)
      if (counts[y] > counts[best]) best = y;
    CHECK(best == k);
  }
}

TEST_CASE("posterior: far outside every support raises AllDensitiesZero") {
  CategoryModel model = expgauss_pair();
  CHECK_THROWS_WITH_AS(model.posterior(v2(5.0, 0.0)), doctest::Contains("AllDensitiesZero"),
                       Error);
}

TEST_CASE("log_odds: equal covariance has constant gradient and zero Hessian") {
  Vec m0(2), m1(2);
  m0 << -1.0, 0.0;
  m1 << 1.0, 0.0;
  Vec priors(2);
  priors << 0.5, 0.5;
  std::vector<Component> comps;
  comps.emplace_back(GaussianComponent(m0, Mat::Identity(2, 2)));
  comps.emplace_back(GaussianComponent(m1, Mat::Identity(2, 2)));
  CategoryModel model(priors, std::move(comps));
  for (double x1 : {-2.0, 0.0, 1.5}) {
    Vec g = model.grad_log_odds(v2(x1, 0.7)).value;
    CHECK(g(0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(g(1) == doctest::Approx(0.0).epsilon(1e-12));
  }
  CHECK(model.hessian_log_odds(v2(0.3, -0.2)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("log_odds: 1-D diagonal case matches eta/rho closed form") {
  // a = 1.5, sigma = 0.6, c = 1: eta = (a^2-1)/(a^2 s^2), rho = (a^2+1)/(a^2-1)
  double a = 1.5, sigma = 0.6;
  double eta = (a * a - 1.0) / (a * a * sigma * sigma);
  double rho = (a * a + 1.0) / (a * a - 1.0);
  double gamma = 2.0 * std::log(a) / eta;
  CategoryModel model = gauss1d_model(a, sigma, 1.0);
  for (double x : {-2.0, -0.5, 0.0, 0.4, 1.7}) {
    double expected = 0.5 * eta * (x * x + 2.0 * rho * x + 1.0 - gamma);
    CHECK(model.log_odds(v1(x)) == doctest::Approx(expected).epsilon(1e-12));
  }
  CHECK(eta == doctest::Approx(1.54320987654321));
  CHECK(rho == doctest::Approx(2.6));
}

TEST_CASE("log_odds: ExpGauss gradient matches the piecewise analytic form") {
  CategoryModel model = expgauss_pair();
  // L = -|x1-1|/0.5 + |x1+1|/0.2 - x2^2/0.8 + x2^2/0.2 + const
  for (double x1 : {-0.6, -0.2, 0.3, 0.8}) {
    for (double x2 : {-0.5, 0.1, 0.9}) {
      GradResult g = model.grad_log_odds(v2(x1, x2));
      double d1 = -((x1 - 1.0) > 0 ? 1.0 : -1.0) / 0.5 + ((x1 + 1.0) > 0 ? 1.0 : -1.0) / 0.2;
      double d2 = -x2 / 0.4 + x2 / 0.1;
      CHECK(g.value(0) == doctest::Approx(d1).epsilon(1e-6));
      CHECK(g.value(1) == doctest::Approx(d2).epsilon(1e-6));
      CHECK(!has_flag(g.flags, "NearKink"));
    }
  }
  // evaluation right at the kink carries a quality flag, not an error
  GradResult gk = model.grad_log_odds(v2(1.0 - 1e-7, 0.0));
  CHECK(has_flag(gk.flags, "NearKink"));
}

TEST_CASE("log_odds: non-binary model is rejected") {
  CategoryModel model = three_gaussian_model();
  CHECK_THROWS_WITH_AS(model.log_odds(v2(0, 0)), doctest::Contains("NotBinary"), Error);
}

TEST_CASE("sample: degenerate prior yields a single class") {
  Vec priors(2);
  priors << 1.0, 0.0;
  std::vector<Component> comps;
  comps.emplace_back(GaussianComponent(v1(-1.0), Mat::Identity(1, 1)));
  comps.emplace_back(GaussianComponent(v1(1.0), Mat::Identity(1, 1)));
  CategoryModel model(priors, std::move(comps));
  for (const auto& s : model.sample(2000, 3)) CHECK(s.y == 0);
}

TEST_CASE("sample: label frequencies converge to priors") {
  CategoryModel model = equal_pair_1d(1.0, 1.0);
  auto samples = model.sample(100000, 11);
  long n0 = 0;
  for (const auto& s : samples) n0 += s.y == 0;
  // binomial 3 sigma: 3 * 0.5 / sqrt(1e5) < 0.005 < 0.01
  CHECK(std::abs(n0 / 1e5 - 0.5) < 0.01);
}

TEST_CASE("sample: component means converge at the CLT rate") {
  Vec mean(2);
  mean << 0.7, -1.3;
  Mat cov(2, 2);
  cov << 1.5, 0.4, 0.4, 0.8;
  Vec priors(1);
  priors << 1.0;
  std::vector<Component> comps;
  comps.emplace_back(GaussianComponent(mean, cov));
  CategoryModel model(priors, std::move(comps));
  long n = 100000;
  auto samples = model.sample(n, 5);
  Vec acc = Vec::Zero(2);
  for (const auto& s : samples) acc += s.x;
  acc /= static_cast<double>(n);
  for (int d = 0; d < 2; ++d) {
    double bound = 4.0 * std::sqrt(cov(d, d)) / std::sqrt(static_cast<double>(n));
    CHECK(std::abs(acc(d) - mean(d)) < bound);
  }
}

TEST_CASE("sample: deterministic per seed") {
  CategoryModel model = three_gaussian_model();
  auto a = model.sample(100, 42);
  auto b = model.sample(100, 42);
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].y == b[i].y);
    CHECK((a[i].x - b[i].x).norm() == 0.0);
  }
}

TEST_CASE("expgauss: x1 density integrates to one over the domain") {
  ExpGaussComponent e(0.35, 0.4, 0.2);
  // trapezoid split at the kink
  auto dens = [&](double x1) {
    return std::exp(-std::abs(x1 - e.c1) / e.tau - e.log_z1);
  };
  double total = 0.0;
  for (double lo : {-1.0, e.c1}) {
    double hi = lo == -1.0 ? e.c1 : 1.0;
    int n = 200001;
    double h = (hi - lo) / (n - 1);
    double acc = 0.5 * (dens(lo) + dens(hi));
    for (int i = 1; i + 1 < n; ++i) acc += dens(lo + h * i);
    total += acc * h;
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("embed_continuum: identity affine map pads the input") {
  LatentEmbedding emb = LatentEmbedding::identity(2, 5);
  std::vector<Vec> path = {v2(0.3, -0.7)};
  auto out = embed_continuum(emb, path);
  REQUIRE(out.size() == 1);
  CHECK(out[0](0) == 0.3);
  CHECK(out[0](1) == -0.7);
  for (int d = 2; d < 5; ++d) CHECK(out[0](d) == 0.0);
}

TEST_CASE("embed_continuum: 31-point line maps to pairwise distinct points") {
  LatentEmbedding emb = LatentEmbedding::random(2, 12, 99);
  std::vector<Vec> path;
  for (int i = 0; i < 31; ++i) path.push_back(v2(-1.0 + i / 15.0, 0.5 - i / 30.0));
  auto out = embed_continuum(emb, path);
  REQUIRE(out.size() == 31);
  for (size_t i = 0; i < out.size(); ++i)
    for (size_t j = i + 1; j < out.size(); ++j) CHECK((out[i] - out[j]).norm() > 1e-9);
  // bit-identical on reapplication with the same seed
  LatentEmbedding emb2 = LatentEmbedding::random(2, 12, 99);
  auto out2 = embed_continuum(emb2, path);
  for (size_t i = 0; i < out.size(); ++i) CHECK((out[i] - out2[i]).norm() == 0.0);
}

TEST_CASE("embed_continuum: reversed path gives the reversed output") {
  LatentEmbedding emb = LatentEmbedding::random(1, 6, 4);
  std::vector<Vec> path, rpath;
  for (int i = 0; i < 9; ++i) path.push_back(v1(i * 0.25 - 1.0));
  rpath.assign(path.rbegin(), path.rend());
  auto a = embed_continuum(emb, path);
  auto b = embed_continuum(emb, rpath);
  for (size_t i = 0; i < a.size(); ++i) CHECK((a[i] - b[a.size() - 1 - i]).norm() == 0.0);
}

TEST_CASE("embed_continuum: dimension mismatch is rejected") {
  LatentEmbedding emb = LatentEmbedding::random(2, 6, 4);
  std::vector<Vec> path = {v1(0.0)};
  CHECK_THROWS_WITH_AS(embed_continuum(emb, path), doctest::Contains("DimMismatch"), Error);
}

TEST_CASE("invariant: posteriors sum to one and their gradients to zero") {
  CategoryModel model = three_gaussian_model();
  RngEngine rng = make_engine(17);
  std::uniform_real_distribution<double> unif(-4.0, 4.0);
  for (int it = 0; it < 100; ++it) {
    Vec x = v2(unif(rng), unif(rng));
    Vec p = model.posterior(x);
    CHECK(std::abs(p.sum() - 1.0) < 1e-10);
    CHECK(p.minCoeff() >= 0.0);
    // finite-difference gradients of the posteriors
    double h = 1e-5;
    for (int d = 0; d < 2; ++d) {
      Vec xp = x, xm = x;
      xp(d) += h;
      xm(d) -= h;
      Vec g = (model.posterior(xp) - model.posterior(xm)) / (2.0 * h);
      CHECK(std::abs(g.sum()) < 1e-8);
    }
  }
}

TEST_CASE("invariant: analytic posterior gradients match finite differences") {
  CategoryModel model = three_gaussian_model();
  RngEngine rng = make_engine(23);
  std::uniform_real_distribution<double> unif(-3.0, 3.0);
  for (int it = 0; it < 25; ++it) {
    Vec x = v2(unif(rng), unif(rng));
    Mat g = model.posterior_gradients(x);
    double h = 1e-6;
    for (int d = 0; d < 2; ++d) {
      Vec xp = x, xm = x;
      xp(d) += h;
      xm(d) -= h;
      Vec fd = (model.posterior(xp) - model.posterior(xm)) / (2.0 * h);
      for (int y = 0; y < 3; ++y) CHECK(g(y, d) == doctest::Approx(fd(y)).epsilon(5e-5));
    }
    CHECK(g.colwise().sum().cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("invariant: zero set of L is the hyperplane c~.x = 0") {
  Vec m0(3), m1(3);
  m0 << -0.8, -0.4, 0.6;
  m1 = -m0;
  Mat cov(3, 3);
  cov << 1.2, 0.3, 0.0, 0.3, 0.9, 0.1, 0.0, 0.1, 1.1;
  Vec priors(2);
  priors << 0.5, 0.5;
  std::vector<Component> comps;
  comps.emplace_back(GaussianComponent(m0, cov));
  comps.emplace_back(GaussianComponent(m1, cov));
  CategoryModel model(priors, std::move(comps));
  Vec ctilde = cov.llt().solve(m1);
  RngEngine rng = make_engine(31);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int it = 0; it < 100; ++it) {
    Vec x(3);
    for (int d = 0; d < 3; ++d) x(d) = 2.0 * gauss(rng);
    x -= ctilde * (ctilde.dot(x) / ctilde.squaredNorm());  // project onto the plane
    CHECK(std::abs(model.log_odds(x)) < 1e-8);
  }
}

TEST_CASE("invariant: ball-label regression reproduces the posterior") {
  CategoryModel model = three_gaussian_model();
  auto samples = model.sample(400000, 13);
  RngEngine rng = make_engine(19);
  std::uniform_real_distribution<double> unif(-2.5, 2.5);
  const double radius = 0.2;
  for (int probe = 0; probe < 20; ++probe) {
    Vec x = v2(unif(rng), unif(rng));
    Vec post = model.posterior(x);
    long m = 0;
    Vec counts = Vec::Zero(3);
    for (const auto& s : samples) {
      if ((s.x - x).norm() < radius) {
        counts(s.y) += 1.0;
        ++m;
      }
    }
    REQUIRE(m > 100);
    for (int y = 0; y < 3; ++y) {
      double frac = counts(y) / static_cast<double>(m);
      double se = std::sqrt(std::max(post(y) * (1.0 - post(y)), 0.01) / m);
      CHECK(std::abs(frac - post(y)) < 4.0 * se + 0.04);
    }
  }
}
