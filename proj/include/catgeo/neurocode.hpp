#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "catgeo/common.hpp"
#include "catgeo/fisher_matrix.hpp"
#include "catgeo/rng.hpp"

namespace catgeo {

// Interface shared by parametric population codes and trained network coding
// layers: mean responses, response densities, samples, scores, and the neural
// Fisher information over the K-dimensional feature space.
class CodingModel {
 public:
  virtual ~CodingModel() = default;
  virtual int input_dim() const = 0;
  virtual int num_units() const = 0;
  virtual Vec mean_response(const Vec& x) const = 0;
  virtual Mat response_jacobian(const Vec& x) const = 0;  // N x K
  virtual Vec sample_response(const Vec& x, RngEngine& rng) const = 0;
  // ln P(r|x) given the precomputed mean response f(x); every implemented
  // family depends on x only through f(x), which lets grid loops cache it.
  virtual double log_density_from_mean(const Vec& r, const Vec& f) const = 0;
  virtual Vec score(const Vec& r, const Vec& x) const = 0;  // grad_x log P(r|x)
  virtual FisherMatrix fisher(const Vec& x) const = 0;

  double log_density(const Vec& r, const Vec& x) const {
    return log_density_from_mean(r, mean_response(x));
  }

  // Batched ln P(r|x_i) over a fixed node set; fills ll (one entry per node).
  // The default loops over nodes; families with a bilinear log density
  // override it with matrix-vector forms.
  using GridEvaluator = std::function<void(const Vec& r, Vec& ll)>;
  virtual GridEvaluator grid_evaluator(const std::vector<Vec>& nodes) const;
};

enum class CurveFamily { RadialBump, SigmoidRamp };

struct TuningUnit {
  Vec center;
  double width = 1;
  double rmax = 1;
  CurveFamily family = CurveFamily::RadialBump;
};

enum class NoiseFamily {
  GaussianIID,            // r_i = f_i + sigma z_i, z_i ~ Q iid (unit variance)
  GaussianCorrelated,     // r = f + sigma z, z ~ N(0, C), unit diagonal
  MultiplicativeGaussian, // r_i = f_i + sigma sqrt(f_i) z_i, z_i ~ N(0,1)
  PoissonCount,           // r_i ~ Poisson(t f_i)
};

enum class DensityTag { Gaussian, Laplace, StudentT };

struct NoiseSpec {
  NoiseFamily family = NoiseFamily::GaussianIID;
  double sigma = 1.0;
  double t = 1.0;  // Poisson observation window
  DensityTag qtag = DensityTag::Gaussian;
  double nu = 5.0;  // Student-t dof (unit-variance scaling applied internally)
  Mat corr;         // N x N correlation, GaussianCorrelated only

  void validate(int n_units) const;
};

// Fisher information of a unit-variance noise density for a location
// parameter; 1 exactly for the Gaussian, >= 1 otherwise (Stam bound).
double fq_of_density(DensityTag tag, double nu = 5.0);
// Quadrature route used to cross-check the closed-form values.
double fq_of_density_quadrature(DensityTag tag, double nu = 5.0);

// N tuning-curve units plus a noise specification; defines P(r|x).
class PopulationCode : public CodingModel {
 public:
  PopulationCode(std::vector<TuningUnit> units, NoiseSpec noise);

  int input_dim() const override { return dim_; }
  int num_units() const override { return static_cast<int>(units_.size()); }
  const std::vector<TuningUnit>& units() const { return units_; }
  const NoiseSpec& noise() const { return noise_; }

  Vec mean_response(const Vec& x) const override;
  Mat response_jacobian(const Vec& x) const override;
  Vec sample_response(const Vec& x, RngEngine& rng) const override;
  double log_density_from_mean(const Vec& r, const Vec& f) const override;
  Vec score(const Vec& r, const Vec& x) const override;
  FisherMatrix fisher(const Vec& x) const override;
  GridEvaluator grid_evaluator(const std::vector<Vec>& nodes) const override;

 private:
  std::vector<TuningUnit> units_;
  NoiseSpec noise_;
  int dim_ = 0;
  Mat corr_chol_;  // cached Cholesky factor for correlated noise
  Mat corr_inv_;
};

FisherMatrix fisher_code(const CodingModel& code, const Vec& x);

struct MCFisherConfig {
  long samples = 100000;
  uint64_t seed = 0;
  long chunk_size = 4096;
};

// Empirical covariance of the score over mc.samples draws; converges to
// fisher_code at rate 1/sqrt(samples). Chunked with per-chunk seeds and an
// ordered reduction, so the result is independent of the worker count.
FisherMatrix fisher_code_numeric(const CodingModel& code, const Vec& x,
                                 const MCFisherConfig& mc);

// Pushforward J^T F J into ambient space; J is the K x N_s matrix dx_i/ds_j.
FisherMatrix pushforward_fisher(const FisherMatrix& f, const Mat& jacobian);

// Seeded convenience overload matching the operation signature.
Vec sample_response(const CodingModel& code, const Vec& x, uint64_t seed);

// Uniformly spaced 1-D sigmoid-ramp population over [lo, hi].
PopulationCode dense_sigmoid_code_1d(int n_units, double lo, double hi, double width,
                                     double rmax, NoiseSpec noise);

// Grid of radial bumps covering the 2-D box [lo, hi]^2.
PopulationCode bump_grid_code_2d(int per_side, double lo, double hi, double width,
                                 double rmax, NoiseSpec noise);

}  // namespace catgeo
