#pragma once

#include <cstdint>
#include <functional>

#include "catgeo/categories.hpp"
#include "catgeo/fisher_matrix.hpp"
#include "catgeo/neurocode.hpp"

namespace catgeo {

struct MCConfig {
  long outer_samples = 100000;
  long inner_samples = 1000;
  uint64_t seed = 0;
  long chunk_size = 4096;
};

// Tensor-product trapezoid grid over a bounded box covering essentially all
// of the data mass (mean +- span sigma per component, domain bounds for the
// bounded families). Trapezoid weights decay to zero with the integrand, so
// the rule is spectrally accurate here.
struct QuadratureGrid {
  std::vector<Vec> nodes;
  std::vector<double> weights;
  Vec lo, hi;
  int per_dim = 0;

  static QuadratureGrid for_model(const CategoryModel& model, int per_dim = 201,
                                  double span = 6.0);
  static QuadratureGrid for_box(const Vec& lo, const Vec& hi, int per_dim);

  size_t size() const { return nodes.size(); }
  double mass(const CategoryModel& model) const;
};

struct MIResult {
  double estimate = 0;
  double std_err = 0;
  Flags flags;
};

double entropy(const Vec& probs);

// I[Y,X] = H[Y] - E_x H[Y|x], in nats.
MIResult mi_yx(const CategoryModel& model, const QuadratureGrid& grid);
MIResult mi_yx_mc(const CategoryModel& model, const MCConfig& mc);

// I[Y,R] with P(y|r) from an inner x-quadrature and an outer MC over
// (y, x, r); the paired gap I[Y,X] - I[Y,R] shares the same draws, which
// cancels most of the MC variance. Jackknife standard errors over chunks.
struct MiYrResult {
  MIResult mi_yr;
  MIResult gap;  // I[Y,X] - I[Y,R], paired estimate
};
MiYrResult mi_yr(const CategoryModel& model, const CodingModel& code,
                 const QuadratureGrid& grid, const MCConfig& mc);

using FisherField = std::function<FisherMatrix(const Vec&)>;

// Delta = 1/2 int tr(F_cat^T F_code^{-1}) P(x) dx; grid nodes whose neural
// Fisher is flagged singular are excluded and their probability mass reported.
struct GapReport {
  double delta = 0;
  double excluded_mass = 0;
  Flags flags;
};
GapReport asymptotic_gap(const CategoryModel& model, const FisherField& fcode_field,
                         const QuadratureGrid& grid);
GapReport asymptotic_gap(const CategoryModel& model, const CodingModel& code,
                         const QuadratureGrid& grid);

// Recomputes Delta in coordinates z = J x (transforming the model, the grid
// and both Fisher fields) and returns |Delta_z - Delta_x| / Delta_x.
double invariance_check(const CategoryModel& model, const CodingModel& code,
                        const Mat& jacobian, int per_dim = 201);

struct DataProcReport {
  MIResult mi_yr;
  MIResult mi_yx;
  double margin = 0;  // I[Y,X] - I[Y,R]
};
// Asserts I[Y,R] <= I[Y,X] + 3 combined standard errors; throws
// InequalityViolated beyond that (an estimator bug, not a model property).
DataProcReport data_processing_check(const CategoryModel& model, const CodingModel& code,
                                     const MCConfig& mc);

}  // namespace catgeo
