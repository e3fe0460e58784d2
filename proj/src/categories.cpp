#include "catgeo/categories.hpp"

#include <cmath>
#include <limits>

namespace catgeo {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLog2Pi = 1.8378770664093454836;
}  // namespace

GaussianComponent::GaussianComponent(Vec mean_in, Mat cov_in)
    : mean(std::move(mean_in)), cov(std::move(cov_in)) {
  const int k = dim();
  if (cov.rows() != k || cov.cols() != k)
    fail("DimMismatch", "covariance shape does not match mean");
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, cov.cwiseAbs().maxCoeff()))
    fail("NotSymmetric", "covariance must be symmetric");
  Eigen::SelfAdjointEigenSolver<Mat> es(cov);
  if (es.eigenvalues().minCoeff() <= 0.0)
    fail("NotPositiveDefinite", "covariance must have strictly positive eigenvalues");
  Eigen::LLT<Mat> llt(cov);
  chol = llt.matrixL();
  cov_inv = llt.solve(Mat::Identity(k, k));
  double log_det = 0.0;
  for (int i = 0; i < k; ++i) log_det += 2.0 * std::log(chol(i, i));
  log_norm = -0.5 * (k * kLog2Pi + log_det);
}

double GaussianComponent::log_density(const Vec& x) const {
  Vec d = x - mean;
  Vec w = chol.triangularView<Eigen::Lower>().solve(d);
  return log_norm - 0.5 * w.squaredNorm();
}

Vec GaussianComponent::grad_log_density(const Vec& x) const {
  return -(cov_inv * (x - mean));
}

Vec GaussianComponent::sample(RngEngine& rng) const {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vec z(dim());
  for (int i = 0; i < dim(); ++i) z(i) = gauss(rng);
  return mean + chol * z;
}

ExpGaussComponent::ExpGaussComponent(double c1_in, double tau_in, double sigma2_sq_in)
    : c1(c1_in), tau(tau_in), sigma2_sq(sigma2_sq_in) {
  if (!(tau > 0.0)) fail("InvalidParameter", "tau must be positive");
  if (!(sigma2_sq > 0.0)) fail("InvalidParameter", "sigma2_sq must be positive");
  if (c1 < kDomainLo || c1 > kDomainHi)
    fail("InvalidParameter", "c1 must lie in the domain [-1, 1]");
  double z1 = tau * (2.0 - std::exp(-(c1 - kDomainLo) / tau) - std::exp(-(kDomainHi - c1) / tau));
  log_z1 = std::log(z1);
}

double ExpGaussComponent::log_density(const Vec& x) const {
  if (x.size() != 2) fail("DimMismatch", "ExpGauss component is 2-D");
  if (x(0) < kDomainLo || x(0) > kDomainHi) return kNegInf;
  double lx1 = -std::abs(x(0) - c1) / tau - log_z1;
  double lx2 = -0.5 * x(1) * x(1) / sigma2_sq - 0.5 * (kLog2Pi + std::log(sigma2_sq));
  return lx1 + lx2;
}

Vec ExpGaussComponent::sample(RngEngine& rng) const {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  // Side masses of the truncated two-sided exponential.
  double ml = tau * (1.0 - std::exp(-(c1 - kDomainLo) / tau));
  double mr = tau * (1.0 - std::exp(-(kDomainHi - c1) / tau));
  double u = unif(rng);
  double x1;
  if (u * (ml + mr) < ml) {
    double v = unif(rng);
    double e = -tau * std::log1p(-v * (1.0 - std::exp(-(c1 - kDomainLo) / tau)));
    x1 = c1 - e;
  } else {
    double v = unif(rng);
    double e = -tau * std::log1p(-v * (1.0 - std::exp(-(kDomainHi - c1) / tau)));
    x1 = c1 + e;
  }
  Vec out(2);
  out(0) = x1;
  out(1) = std::sqrt(sigma2_sq) * gauss(rng);
  return out;
}

double component_log_density(const Component& c, const Vec& x) {
  return std::visit([&](const auto& d) { return d.log_density(x); }, c);
}

int component_dim(const Component& c) {
  return std::visit([](const auto& d) { return d.dim(); }, c);
}

CategoryModel::CategoryModel(Vec priors, std::vector<Component> components)
    : priors_(std::move(priors)), components_(std::move(components)) {
  if (priors_.size() == 0 || static_cast<size_t>(priors_.size()) != components_.size())
    fail("DimMismatch", "priors and components must have the same length");
  if (priors_.minCoeff() < 0.0) fail("InvalidParameter", "priors must be nonnegative");
  if (std::abs(priors_.sum() - 1.0) > 1e-12)
    fail("InvalidParameter", "priors must sum to 1");
  dim_ = component_dim(components_[0]);
  for (const auto& c : components_) {
    if (component_dim(c) != dim_) fail("DimMismatch", "components must share a dimension");
    if (!std::holds_alternative<GaussianComponent>(c)) all_gaussian_ = false;
  }
}

const GaussianComponent& CategoryModel::gaussian(int y) const {
  const auto* g = std::get_if<GaussianComponent>(&components_[y]);
  if (!g) fail("NotGaussian", "component " + std::to_string(y) + " is not Gaussian");
  return *g;
}

Vec CategoryModel::log_weights(const Vec& x) const {
  if (x.size() != dim_) fail("DimMismatch", "x has wrong dimension");
  Vec lw(num_classes());
  for (int y = 0; y < num_classes(); ++y) {
    double lp = priors_(y) > 0.0 ? std::log(priors_(y)) : kNegInf;
    lw(y) = lp + component_log_density(components_[y], x);
  }
  return lw;
}

Vec CategoryModel::posterior(const Vec& x) const {
  Vec lw = log_weights(x);
  double m = lw.maxCoeff();
  if (!std::isfinite(m))
    fail("AllDensitiesZero", "every class density underflows at this x");
  Vec w = (lw.array() - m).exp();
  w.array() /= w.sum();
  return w;
}

Vec CategoryModel::fd_step(const Vec& x) const {
  Vec h(dim_);
  for (int i = 0; i < dim_; ++i) h(i) = 1e-5 * (1.0 + std::abs(x(i)));
  return h;
}

Mat CategoryModel::posterior_gradients(const Vec& x, Flags* flags) const {
  const int M = num_classes();
  const int K = dim_;
  Mat grads(M, K);
  if (all_gaussian_) {
    Vec post = posterior(x);
    Mat glogs(M, K);  // rows grad ln p(x|y)
    for (int y = 0; y < M; ++y) glogs.row(y) = gaussian(y).grad_log_density(x).transpose();
    Vec mean_g = glogs.transpose() * post;
    for (int y = 0; y < M; ++y)
      grads.row(y) = post(y) * (glogs.row(y) - mean_g.transpose());
    return grads;
  }
  Vec h = fd_step(x);
  Vec p0 = posterior(x);
  for (int i = 0; i < K; ++i) {
    Vec xp = x, xm = x;
    xp(i) += h(i);
    xm(i) -= h(i);
    bool ok_p = std::isfinite(log_density(xp));
    bool ok_m = std::isfinite(log_density(xm));
    if (ok_p && ok_m) {
      grads.col(i) = (posterior(xp) - posterior(xm)) / (2.0 * h(i));
    } else if (ok_p) {  // one-sided at a domain edge
      grads.col(i) = (posterior(xp) - p0) / h(i);
      if (flags) add_flag(*flags, "NearDomainEdge");
    } else if (ok_m) {
      grads.col(i) = (p0 - posterior(xm)) / h(i);
      if (flags) add_flag(*flags, "NearDomainEdge");
    } else {
      grads.col(i).setZero();
      if (flags) add_flag(*flags, "NearDomainEdge");
    }
  }
  if (flags) {
    for (const auto& c : components_) {
      if (const auto* e = std::get_if<ExpGaussComponent>(&c)) {
        if (e->kink_distance(x) < 2.0 * h(0)) add_flag(*flags, "NearKink");
      }
    }
  }
  return grads;
}

double CategoryModel::log_density(const Vec& x) const {
  Vec lw = log_weights(x);
  double m = lw.maxCoeff();
  if (!std::isfinite(m)) return kNegInf;
  return m + std::log((lw.array() - m).exp().sum());
}

double CategoryModel::density(const Vec& x) const {
  double l = log_density(x);
  return std::isfinite(l) ? std::exp(l) : 0.0;
}

void CategoryModel::require_binary() const {
  if (num_classes() != 2) fail("NotBinary", "log odds requires exactly two classes");
}

double CategoryModel::log_odds(const Vec& x) const {
  require_binary();
  Vec lw = log_weights(x);
  return lw(1) - lw(0);
}

GradResult CategoryModel::grad_log_odds(const Vec& x) const {
  require_binary();
  GradResult res;
  if (all_gaussian_) {
    res.value = gaussian(1).grad_log_density(x) - gaussian(0).grad_log_density(x);
    return res;
  }
  Vec h = fd_step(x);
  double l0 = log_odds(x);
  res.value = Vec(dim_);
  for (int i = 0; i < dim_; ++i) {
    Vec xp = x, xm = x;
    xp(i) += h(i);
    xm(i) -= h(i);
    double lp = log_odds(xp), lm = log_odds(xm);
    if (std::isfinite(lp) && std::isfinite(lm)) {
      res.value(i) = (lp - lm) / (2.0 * h(i));
    } else if (std::isfinite(lp)) {  // one-sided at a domain edge
      res.value(i) = (lp - l0) / h(i);
      add_flag(res.flags, "NearDomainEdge");
    } else if (std::isfinite(lm)) {
      res.value(i) = (l0 - lm) / h(i);
      add_flag(res.flags, "NearDomainEdge");
    } else {
      res.value(i) = 0.0;
      add_flag(res.flags, "NearDomainEdge");
    }
  }
  for (const auto& c : components_) {
    if (const auto* e = std::get_if<ExpGaussComponent>(&c)) {
      if (e->kink_distance(x) < 2.0 * h(0)) add_flag(res.flags, "NearKink");
    }
  }
  return res;
}

Mat CategoryModel::hessian_log_odds(const Vec& x) const {
  require_binary();
  if (all_gaussian_) return gaussian(0).cov_inv - gaussian(1).cov_inv;
  Vec h = fd_step(x);
  Mat H(dim_, dim_);
  double l0 = log_odds(x);
  for (int i = 0; i < dim_; ++i) {
    for (int j = i; j < dim_; ++j) {
      double v;
      if (i == j) {
        Vec xp = x, xm = x;
        xp(i) += h(i);
        xm(i) -= h(i);
        v = (log_odds(xp) - 2.0 * l0 + log_odds(xm)) / (h(i) * h(i));
      } else {
        Vec xpp = x, xpm = x, xmp = x, xmm = x;
        xpp(i) += h(i); xpp(j) += h(j);
        xpm(i) += h(i); xpm(j) -= h(j);
        xmp(i) -= h(i); xmp(j) += h(j);
        xmm(i) -= h(i); xmm(j) -= h(j);
        v = (log_odds(xpp) - log_odds(xpm) - log_odds(xmp) + log_odds(xmm)) /
            (4.0 * h(i) * h(j));
      }
      H(i, j) = v;
      H(j, i) = v;
    }
  }
  return H;
}

std::vector<Sample> CategoryModel::sample(long n, uint64_t seed) const {
  if (n < 1) fail("InvalidParameter", "n must be at least 1");
  RngEngine rng = make_engine(seed);
  std::discrete_distribution<int> label(priors_.data(), priors_.data() + priors_.size());
  std::vector<Sample> out;
  out.reserve(static_cast<size_t>(n));
  for (long i = 0; i < n; ++i) {
    Sample s;
    s.y = label(rng);
    s.x = std::visit([&](const auto& d) { return d.sample(rng); }, components_[s.y]);
    out.push_back(std::move(s));
  }
  return out;
}

LatentEmbedding LatentEmbedding::random(int latent_dim, int ambient_dim, uint64_t seed) {
  if (ambient_dim < latent_dim)
    fail("InvalidParameter", "ambient dimension must be at least the latent one");
  LatentEmbedding emb;
  emb.latent_dim = latent_dim;
  emb.ambient_dim = ambient_dim;
  emb.seed = seed;
  RngEngine rng = make_engine(seed, 0x1a7e);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Mat a(ambient_dim, latent_dim);
  for (int i = 0; i < ambient_dim; ++i)
    for (int j = 0; j < latent_dim; ++j) a(i, j) = gauss(rng);
  // Gram-Schmidt; a seeded Gaussian matrix is full rank with probability 1.
  for (int j = 0; j < latent_dim; ++j) {
    for (int k = 0; k < j; ++k) a.col(j) -= a.col(k).dot(a.col(j)) * a.col(k);
    a.col(j).normalize();
  }
  emb.weights = a;
  emb.bias = Vec::Zero(ambient_dim);
  emb.squash = true;
  return emb;
}

LatentEmbedding LatentEmbedding::identity(int latent_dim, int ambient_dim) {
  if (ambient_dim < latent_dim)
    fail("InvalidParameter", "ambient dimension must be at least the latent one");
  LatentEmbedding emb;
  emb.latent_dim = latent_dim;
  emb.ambient_dim = ambient_dim;
  emb.weights = Mat::Identity(ambient_dim, latent_dim);
  emb.bias = Vec::Zero(ambient_dim);
  emb.squash = false;
  return emb;
}

Vec LatentEmbedding::map(const Vec& x) const {
  if (x.size() != latent_dim) fail("DimMismatch", "latent point has wrong dimension");
  Vec s = weights * x + bias;
  if (squash) s = s.array().tanh();
  return s;
}

Mat LatentEmbedding::jacobian(const Vec& x) const {
  if (x.size() != latent_dim) fail("DimMismatch", "latent point has wrong dimension");
  if (!squash) return weights;
  Vec a = weights * x + bias;
  Vec d = 1.0 - a.array().tanh().square();
  return d.asDiagonal() * weights;
}

std::vector<Vec> embed_continuum(const LatentEmbedding& emb, const std::vector<Vec>& path) {
  std::vector<Vec> out;
  out.reserve(path.size());
  for (const auto& p : path) out.push_back(emb.map(p));
  return out;
}

}  // namespace catgeo
