#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "catgeo/categories.hpp"
#include "catgeo/fisher_matrix.hpp"
#include "catgeo/infomeasure.hpp"
#include "catgeo/neurocode.hpp"

namespace catgeo {

enum class Activation { Sigmoid, Relu };

// Variance link g(f) of the coding-layer noise: r = f + sigma sqrt(g(f)) z.
enum class VarianceLink { Rate, RateSquared, Additive };  // g = f, f^2, 1

// Small feedforward classifier with softmax readout and a noisy coding layer
// (the last hidden layer unless configured otherwise).
struct MLPModel {
  std::vector<int> layer_dims;  // input, hidden..., output
  std::vector<Mat> weights;     // weights[l]: dims[l+1] x dims[l]
  std::vector<Vec> biases;
  Activation activation = Activation::Sigmoid;
  int noise_layer = 1;  // hidden layer index in [1, L-1]
  double sigma = 0.1;
  VarianceLink link = VarianceLink::Rate;

  static MLPModel init(std::vector<int> dims, Activation act, double sigma,
                       VarianceLink link, uint64_t seed);

  int num_layers() const { return static_cast<int>(weights.size()); }
  int input_dim() const { return layer_dims.front(); }
  int output_dim() const { return layer_dims.back(); }
  int coding_units() const { return layer_dims[noise_layer]; }
  double variance_link(double f) const;
  double variance_link_deriv(double f) const;
};

struct ForwardResult {
  std::vector<Vec> activations;  // consumed value per layer (post-noise)
  Vec coding_mean;               // noiseless coding-layer activation f
  Vec output;                    // softmax probabilities
};

ForwardResult forward(const MLPModel& net, const Vec& x, bool noisy = false,
                      RngEngine* rng = nullptr);

struct TrainConfig {
  int epochs = 100;
  int batch_size = 64;
  double learning_rate = 0.05;
  uint64_t seed = 0;
  bool noise_during_training = true;
};

struct TrainTrace {
  std::vector<double> epoch_loss;  // mean cross-entropy per epoch
};

TrainTrace train_sgd(MLPModel& net, const std::vector<Vec>& inputs,
                     const std::vector<int>& labels, const TrainConfig& cfg);

struct CodingJacobian {
  Mat j;  // N x K, rows are grad f_i
  std::vector<int> kink_rows;
};

// Forward accumulation of layer Jacobians up to the coding layer. Rows whose
// value depends on a ReLU pre-activation within 1e-6 of its kink are flagged.
CodingJacobian coding_jacobian(const MLPModel& net, const Vec& x);

// F_code of the trained coding layer, sum_i w_i grad f_i grad f_i^T with w_i
// from the noise family; units below the 1e-9 rate floor are dropped.
FisherMatrix fisher_code_net(const MLPModel& net, const Vec& x, bool exact = true);

// Coding layer of a net viewed as a CodingModel over the feature space; an
// optional latent embedding composes net(embed(x)) for continuum scenarios.
class NetCode : public CodingModel {
 public:
  explicit NetCode(const MLPModel& net);
  NetCode(const MLPModel& net, LatentEmbedding emb);

  int input_dim() const override;
  int num_units() const override { return net_->coding_units(); }
  Vec mean_response(const Vec& x) const override;
  Mat response_jacobian(const Vec& x) const override;
  Vec sample_response(const Vec& x, RngEngine& rng) const override;
  double log_density_from_mean(const Vec& r, const Vec& f) const override;
  Vec score(const Vec& r, const Vec& x) const override;
  FisherMatrix fisher(const Vec& x) const override;
  GridEvaluator grid_evaluator(const std::vector<Vec>& nodes) const override;

 private:
  Vec to_input(const Vec& x) const;
  const MLPModel* net_;
  std::optional<LatentEmbedding> emb_;
};

// Softmax readout of the net applied to a coding-layer activity.
Vec decode(const MLPModel& net, const Vec& r);

struct PathProbe {
  std::vector<Vec> points;  // >= 3 ordered input-space points
  void validate() const;
};

struct PathFisher {
  std::vector<double> t;             // path index
  std::vector<double> arc_length;    // cumulative input-space arc length
  std::vector<double> fisher;        // tangent Fisher per unit arc length
  std::vector<double> fisher_index;  // tangent Fisher per unit index step
  int argmax_index() const;
};

PathFisher fisher_along_path(const MLPModel& net, const PathProbe& probe);

struct CosineProxy {
  std::vector<double> d;  // 1 - cos between consecutive mean activities
  double scale = 0, offset = 0;  // best |a d + b - F| alignment
  double residual = 0;
  double pearson = 0;
};

// Cosine distances between consecutive mean activities plus the affine
// alignment report against the scalar Fisher profile.
CosineProxy cosine_proxy(const MLPModel& net, const PathProbe& probe,
                         const PathFisher* fisher = nullptr);

using Decoder = std::function<Vec(const Vec& r)>;

struct CostDecomposition {
  double total = 0, total_se = 0;
  double coding = 0, coding_se = 0;     // I[Y,X] - I[Y,R]
  double decoding = 0, decoding_se = 0; // total - coding
  double decoding_direct = 0, decoding_direct_se = 0;
  MIResult iyx, iyr;
};

CostDecomposition decompose_cost(const CategoryModel& model, const CodingModel& code,
                                 const Decoder& decoder, const QuadratureGrid& grid,
                                 const MCConfig& mc);
CostDecomposition decompose_cost(const CategoryModel& model, const MLPModel& net,
                                 const MCConfig& mc);

struct BiasVariance {
  double manifold = 0, manifold_se = 0;  // total - bias - variance
  double bias = 0, bias_se = 0;
  double variance = 0, variance_se = 0;
  double total = 0, total_se = 0;
  double eps_max = 0;     // max |u| over all draws, u = (g - gbar)/gbar
  double var_u = 0;       // E_x sum_y P(y|x) Var(U_y)
  double band_lo = 0, band_hi = 0;  // Jensen-gap band for the variance term
};

BiasVariance bias_variance(const CategoryModel& model, const CodingModel& code,
                           const Decoder& decoder, const MCConfig& mc);
BiasVariance bias_variance(const CategoryModel& model, const MLPModel& net,
                           const MCConfig& mc);

struct TuningCurves {
  Mat curves;  // one row per requested unit, one column per path point
  std::vector<int> unit_ids;
  int fisher_argmax_index = 0;
};

TuningCurves tuning_curves(const MLPModel& net, const PathProbe& probe,
                           const std::vector<int>& unit_ids);

}  // namespace catgeo
