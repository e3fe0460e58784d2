#pragma once

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "catgeo/common.hpp"
#include "catgeo/rng.hpp"

namespace catgeo {

// Multivariate Gaussian class density N(mean, cov).
struct GaussianComponent {
  GaussianComponent(Vec mean, Mat cov);

  int dim() const { return static_cast<int>(mean.size()); }
  double log_density(const Vec& x) const;
  // gradient of ln p(x) w.r.t. x, i.e. -cov^{-1}(x - mean)
  Vec grad_log_density(const Vec& x) const;
  Vec sample(RngEngine& rng) const;

  Vec mean;
  Mat cov;
  Mat cov_inv;
  Mat chol;             // lower Cholesky factor of cov
  double log_norm = 0;  // -K/2 ln(2 pi) - 1/2 ln det cov
};

// 2-D class density: x1 has a two-sided exponential decay from c1, truncated
// to [-1, 1]; x2 is an independent centered Gaussian with variance sigma2_sq.
struct ExpGaussComponent {
  ExpGaussComponent(double c1, double tau, double sigma2_sq);

  int dim() const { return 2; }
  double log_density(const Vec& x) const;
  Vec sample(RngEngine& rng) const;
  // distance of x1 to the density kink at c1
  double kink_distance(const Vec& x) const { return std::abs(x(0) - c1); }

  double c1 = 0;
  double tau = 1;
  double sigma2_sq = 1;
  double log_z1 = 0;  // ln of the x1 normalization over [-1, 1]
  static constexpr double kDomainLo = -1.0;
  static constexpr double kDomainHi = 1.0;
};

using Component = std::variant<GaussianComponent, ExpGaussComponent>;

double component_log_density(const Component& c, const Vec& x);
int component_dim(const Component& c);

struct Sample {
  Vec x;
  int y = 0;
};

// Gradient paired with quality flags (e.g. evaluation near an ExpGauss kink).
struct GradResult {
  Vec value;
  Flags flags;
};

// M class priors plus per-class densities over a K-dimensional feature space.
class CategoryModel {
 public:
  CategoryModel(Vec priors, std::vector<Component> components);

  int dim() const { return dim_; }
  int num_classes() const { return static_cast<int>(priors_.size()); }
  const Vec& priors() const { return priors_; }
  const std::vector<Component>& components() const { return components_; }
  bool all_gaussian() const { return all_gaussian_; }
  const GaussianComponent& gaussian(int y) const;

  // ln P_y + ln P(x|y) per class.
  Vec log_weights(const Vec& x) const;
  // P(y|x), log-domain with max subtraction; throws AllDensitiesZero.
  Vec posterior(const Vec& x) const;
  // rows are grad P(y|x); analytic for all-Gaussian models, otherwise
  // central finite differences with step h_i = 1e-5 (1 + |x_i|).
  Mat posterior_gradients(const Vec& x, Flags* flags = nullptr) const;

  // marginal density P(x) and its log
  double log_density(const Vec& x) const;
  double density(const Vec& x) const;

  // Binary (M=2) log odds L(x) = ln P(1|x) - ln P(0|x); class 1 is '+'.
  double log_odds(const Vec& x) const;
  GradResult grad_log_odds(const Vec& x) const;
  Mat hessian_log_odds(const Vec& x) const;

  std::vector<Sample> sample(long n, uint64_t seed) const;

 private:
  void require_binary() const;
  Vec fd_step(const Vec& x) const;

  Vec priors_;
  std::vector<Component> components_;
  int dim_ = 0;
  bool all_gaussian_ = true;
};

// Deterministic smooth embedding of a K-dimensional latent space into an
// N_s-dimensional ambient space: s = squash(A x + b) with orthonormal columns
// in A. Stand-in for a learned autoencoder latent map.
struct LatentEmbedding {
  int latent_dim = 0;
  int ambient_dim = 0;
  Mat weights;  // ambient_dim x latent_dim
  Vec bias;
  bool squash = true;
  uint64_t seed = 0;

  static LatentEmbedding random(int latent_dim, int ambient_dim, uint64_t seed);
  static LatentEmbedding identity(int latent_dim, int ambient_dim);

  Vec map(const Vec& x) const;
  // ambient_dim x latent_dim Jacobian at x
  Mat jacobian(const Vec& x) const;
};

std::vector<Vec> embed_continuum(const LatentEmbedding& emb, const std::vector<Vec>& path);

}  // namespace catgeo
