#pragma once

#include <string>

#include <json.hpp>

#include "catgeo/categories.hpp"
#include "catgeo/infomeasure.hpp"
#include "catgeo/nettrain.hpp"

namespace catgeo {

using Json = nlohmann::json;

// Shared scenario builders and runners; the CLI maps subcommands onto these.

// Three equiprobable unit-covariance Gaussians on a circle of radius 2.
CategoryModel three_gaussian_model();

// Two equiprobable 1-D Gaussian categories at -c and +c.
CategoryModel two_gaussian_model_1d(double c, double sigma);

// Latent two-category continuum model (1-D) behind the synthetic embedding.
CategoryModel continuum_latent_model();

// Probe set for the three-Gaussian scenario: 50 points on the pairwise
// boundaries (rays from the triple point, arc band chosen inside the data
// mass), their categorical PDDs, and a few near-triple probes.
struct BoundaryProbes {
  std::vector<Vec> points;
  std::vector<Vec> pdds;
  std::vector<Vec> near_triple;
};
BoundaryProbes three_gaussian_boundary_probes();

struct Train2dConfig {
  int epochs = 300;
  int batch_size = 64;
  double learning_rate = 0.05;
  double sigma = 0.3;
  long n_train = 6000;
  long n_test = 20000;
  bool noise_during_training = true;
  int gap_grid = 61;
};

struct Train2dRun {
  MLPModel net;
  double bayes_rate = 0;
  double test_accuracy = 0;
  std::vector<double> angles_before, angles_after;  // degrees, per probe
  std::vector<double> ratios_after, ratios_triple;  // lambda2 / lambda1
  double angle_median_before = 0, angle_median_after = 0;
  double ratio_median_after = 0, ratio_median_triple = 0;
  std::vector<double> delta_checkpoints;  // asymptotic gap at init/mid/end
  TrainTrace trace;
};
Train2dRun run_train2d(uint64_t seed, const Train2dConfig& cfg);

struct ContinuumConfig {
  int ambient_dim = 16;
  int path_points = 31;
  double x_halfwidth = 1.5;  // interpolates between one sample from each class
  int epochs = 300;
  int batch_size = 64;
  double learning_rate = 0.05;
  double sigma = 0.1;
  long n_train = 6000;
  double active_range = 0.05;
};

struct ContinuumRun {
  MLPModel net;
  LatentEmbedding embedding;
  PathProbe path;                 // ambient probe points
  std::vector<double> latent_t;   // latent coordinates along the path
  PathFisher fisher;
  CosineProxy proxy;
  Mat posteriors;                 // outputs (M rows) along the path
  int fisher_argmax = 0;
  int posterior_cross_index = 0;
  int n_active = 0;
  double steep_in_transition_fraction = 0;
  Mat curves;                     // tuning curves, one row per coding unit
};
ContinuumRun run_continuum(uint64_t seed, const ContinuumConfig& cfg);

struct ScenarioResult {
  int exit_code = 0;
  Json metrics;
  std::vector<std::string> artifacts;  // paths written (manifest excluded)
};

// Runs one named scenario with a JSON config, writing artifacts plus a
// manifest into out_dir. Every random quantity derives from config["seed"].
ScenarioResult run_scenario(const std::string& name, const Json& config,
                            const std::string& out_dir);

Json default_scenario_config(const std::string& name);

std::vector<std::string> scenario_names();

}  // namespace catgeo
