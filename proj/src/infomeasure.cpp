#include "catgeo/infomeasure.hpp"

#include <cmath>
#include <limits>

#include "catgeo/catfisher.hpp"
#include "catgeo/parallel.hpp"

namespace catgeo {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct BoundingBox {
  Vec lo, hi;
};

BoundingBox model_box(const CategoryModel& model, double span) {
  const int k = model.dim();
  Vec lo = Vec::Constant(k, std::numeric_limits<double>::infinity());
  Vec hi = Vec::Constant(k, -std::numeric_limits<double>::infinity());
  for (const auto& comp : model.components()) {
    if (const auto* g = std::get_if<GaussianComponent>(&comp)) {
      for (int d = 0; d < k; ++d) {
        double s = std::sqrt(g->cov(d, d));
        lo(d) = std::min(lo(d), g->mean(d) - span * s);
        hi(d) = std::max(hi(d), g->mean(d) + span * s);
      }
    } else if (const auto* e = std::get_if<ExpGaussComponent>(&comp)) {
      lo(0) = std::min(lo(0), ExpGaussComponent::kDomainLo);
      hi(0) = std::max(hi(0), ExpGaussComponent::kDomainHi);
      double s = std::sqrt(e->sigma2_sq);
      lo(1) = std::min(lo(1), -span * s);
      hi(1) = std::max(hi(1), span * s);
    }
  }
  return {lo, hi};
}

// Jackknife standard error over chunk sums of a mean statistic.
double jackknife_se(const std::vector<double>& chunk_sums,
                    const std::vector<long>& chunk_counts) {
  const int m = static_cast<int>(chunk_sums.size());
  if (m < 2) return 0.0;
  double total = 0.0;
  long n = 0;
  for (int c = 0; c < m; ++c) {
    total += chunk_sums[c];
    n += chunk_counts[c];
  }
  std::vector<double> loo(m);
  double mean_loo = 0.0;
  for (int c = 0; c < m; ++c) {
    loo[c] = (total - chunk_sums[c]) / static_cast<double>(n - chunk_counts[c]);
    mean_loo += loo[c];
  }
  mean_loo /= m;
  double ss = 0.0;
  for (int c = 0; c < m; ++c) ss += (loo[c] - mean_loo) * (loo[c] - mean_loo);
  return std::sqrt((m - 1.0) / m * ss);
}

void check_grid_mass(const CategoryModel& model, const QuadratureGrid& grid) {
  double mass = grid.mass(model);
  if (std::abs(mass - 1.0) > 1e-3)
    fail("GridTooCoarse", "grid mass " + std::to_string(mass));
}

double entropy_of_posterior_at(const CategoryModel& model, const Vec& x) {
  return entropy(model.posterior(x));
}

}  // namespace

double entropy(const Vec& probs) {
  double h = 0.0;
  for (int i = 0; i < probs.size(); ++i)
    if (probs(i) > 0.0) h -= probs(i) * std::log(probs(i));
  return h;
}

QuadratureGrid QuadratureGrid::for_box(const Vec& lo, const Vec& hi, int per_dim) {
  const int k = static_cast<int>(lo.size());
  if (k < 1 || k > 3) fail("Unsupported", "quadrature grids support 1 <= K <= 3");
  if (per_dim < 2) fail("InvalidParameter", "per_dim must be at least 2");
  QuadratureGrid grid;
  grid.lo = lo;
  grid.hi = hi;
  grid.per_dim = per_dim;
  std::vector<Vec> axis(k), axis_w(k);
  for (int d = 0; d < k; ++d) {
    double h = (hi(d) - lo(d)) / (per_dim - 1);
    axis[d] = Vec(per_dim);
    axis_w[d] = Vec::Constant(per_dim, h);
    for (int i = 0; i < per_dim; ++i) axis[d](i) = lo(d) + h * i;
    axis_w[d](0) *= 0.5;
    axis_w[d](per_dim - 1) *= 0.5;
  }
  long total = 1;
  for (int d = 0; d < k; ++d) total *= per_dim;
  grid.nodes.reserve(total);
  grid.weights.reserve(total);
  std::vector<int> idx(k, 0);
  for (long n = 0; n < total; ++n) {
    Vec x(k);
    double w = 1.0;
    for (int d = 0; d < k; ++d) {
      x(d) = axis[d](idx[d]);
      w *= axis_w[d](idx[d]);
    }
    grid.nodes.push_back(x);
    grid.weights.push_back(w);
    for (int d = k - 1; d >= 0; --d) {
      if (++idx[d] < per_dim) break;
      idx[d] = 0;
    }
  }
  return grid;
}

QuadratureGrid QuadratureGrid::for_model(const CategoryModel& model, int per_dim,
                                         double span) {
  BoundingBox box = model_box(model, span);
  return for_box(box.lo, box.hi, per_dim);
}

double QuadratureGrid::mass(const CategoryModel& model) const {
  double m = 0.0;
  for (size_t i = 0; i < nodes.size(); ++i) m += weights[i] * model.density(nodes[i]);
  return m;
}

MIResult mi_yx(const CategoryModel& model, const QuadratureGrid& grid) {
  check_grid_mass(model, grid);
  double hy = entropy(model.priors());
  double hyx = 0.0;
  for (size_t i = 0; i < grid.size(); ++i) {
    double p = model.density(grid.nodes[i]);
    if (p <= 0.0) continue;
    hyx += grid.weights[i] * p * entropy_of_posterior_at(model, grid.nodes[i]);
  }
  MIResult res;
  res.estimate = hy - hyx;
  if (res.estimate < 0.0) {
    res.estimate = 0.0;
    add_flag(res.flags, "Clipped");
  }
  return res;
}

MIResult mi_yx_mc(const CategoryModel& model, const MCConfig& mc) {
  long chunk = mc.chunk_size > 0 ? mc.chunk_size : 4096;
  int n_chunks = static_cast<int>((mc.outer_samples + chunk - 1) / chunk);
  std::vector<double> sums(n_chunks, 0.0), sq(n_chunks, 0.0);
  std::vector<long> counts(n_chunks, 0);
  const Vec& priors = model.priors();
  for_each_chunk(n_chunks, [&](int c) {
    long lo = static_cast<long>(c) * chunk;
    long hi = std::min(mc.outer_samples, lo + chunk);
    RngEngine rng = make_engine(mc.seed, static_cast<uint64_t>(c));
    std::discrete_distribution<int> label(priors.data(), priors.data() + priors.size());
    double s = 0.0, s2 = 0.0;
    for (long i = lo; i < hi; ++i) {
      int y = label(rng);
      Vec x = std::visit([&](const auto& d) { return d.sample(rng); },
                         model.components()[y]);
      double h = entropy_of_posterior_at(model, x);
      s += h;
      s2 += h * h;
    }
    sums[c] = s;
    sq[c] = s2;
    counts[c] = hi - lo;
  });
  double total = 0.0, total_sq = 0.0;
  long n = 0;
  for (int c = 0; c < n_chunks; ++c) {
    total += sums[c];
    total_sq += sq[c];
    n += counts[c];
  }
  double mean = total / n;
  double var = std::max(0.0, total_sq / n - mean * mean);
  MIResult res;
  res.estimate = entropy(model.priors()) - mean;
  res.std_err = std::sqrt(var / n);
  if (res.estimate < 0.0) {
    res.estimate = 0.0;
    add_flag(res.flags, "Clipped");
  }
  return res;
}

MiYrResult mi_yr(const CategoryModel& model, const CodingModel& code,
                 const QuadratureGrid& grid, const MCConfig& mc) {
  check_grid_mass(model, grid);
  const int M = model.num_classes();
  const long G = static_cast<long>(grid.size());

  // Cache the log joint weights ln(w_i P_y P(x_i|y)) per node.
  Mat lwq(G, M);
  for (long i = 0; i < G; ++i) {
    Vec lw = model.log_weights(grid.nodes[i]);
    double lnw = std::log(grid.weights[i]);
    for (int y = 0; y < M; ++y) lwq(i, y) = lw(y) + lnw;
  }
  CodingModel::GridEvaluator evaluate = code.grid_evaluator(grid.nodes);

  long chunk = mc.chunk_size > 0 ? mc.chunk_size : 4096;
  int n_chunks = static_cast<int>((mc.outer_samples + chunk - 1) / chunk);
  std::vector<double> sum_hr(n_chunks, 0.0), sum_gap(n_chunks, 0.0);
  std::vector<long> counts(n_chunks, 0);
  const Vec& priors = model.priors();

  for_each_chunk(n_chunks, [&](int c) {
    long lo = static_cast<long>(c) * chunk;
    long hi = std::min(mc.outer_samples, lo + chunk);
    RngEngine rng = make_engine(mc.seed, static_cast<uint64_t>(c));
    std::discrete_distribution<int> label(priors.data(), priors.data() + priors.size());
    double shr = 0.0, sgap = 0.0;
    Vec lse(M), pyr(M), ll(G), t(G);
    for (long s = lo; s < hi; ++s) {
      int y = label(rng);
      Vec x = std::visit([&](const auto& d) { return d.sample(rng); },
                         model.components()[y]);
      Vec r = code.sample_response(x, rng);
      double hx = entropy_of_posterior_at(model, x);

      // P(y|r) proportional to sum_i w_i P(r|x_i) P(x_i|y) P_y
      evaluate(r, ll);
      for (int yy = 0; yy < M; ++yy) {
        t = ll + lwq.col(yy);
        double m = t.maxCoeff();
        lse(yy) = std::isfinite(m) ? m + std::log((t.array() - m).exp().sum()) : kNegInf;
      }
      double mmax = lse.maxCoeff();
      if (!std::isfinite(mmax))
        fail("GridTooCoarse", "inner posterior underflowed for a sampled response");
      pyr = (lse.array() - mmax).exp();
      pyr /= pyr.sum();
      double hr = entropy(pyr);
      shr += hr;
      sgap += hr - hx;
    }
    sum_hr[c] = shr;
    sum_gap[c] = sgap;
    counts[c] = hi - lo;
  });

  double tot_hr = 0.0, tot_gap = 0.0;
  long n = 0;
  for (int c = 0; c < n_chunks; ++c) {
    tot_hr += sum_hr[c];
    tot_gap += sum_gap[c];
    n += counts[c];
  }
  MiYrResult out;
  out.mi_yr.estimate = entropy(model.priors()) - tot_hr / n;
  out.mi_yr.std_err = jackknife_se(sum_hr, counts);
  if (out.mi_yr.estimate < 0.0) {
    out.mi_yr.estimate = 0.0;
    add_flag(out.mi_yr.flags, "Clipped");
  }
  out.gap.estimate = tot_gap / n;
  out.gap.std_err = jackknife_se(sum_gap, counts);
  return out;
}

GapReport asymptotic_gap(const CategoryModel& model, const FisherField& fcode_field,
                         const QuadratureGrid& grid) {
  const long G = static_cast<long>(grid.size());
  const int K = model.dim();
  std::vector<double> contrib(G, 0.0), excluded(G, 0.0);
  const long block = 256;
  int n_blocks = static_cast<int>((G + block - 1) / block);
  for_each_chunk(n_blocks, [&](int b) {
    long lo = static_cast<long>(b) * block;
    long hi = std::min(G, lo + block);
    for (long i = lo; i < hi; ++i) {
      double p = model.density(grid.nodes[i]);
      if (p <= 0.0) continue;
      double wp = grid.weights[i] * p;
      FisherMatrix fcode = fcode_field(grid.nodes[i]);
      if (has_flag(fcode.flags, "SingularFisher")) {
        excluded[i] = wp;
        continue;
      }
      FisherMatrix fcat = fisher_cat(model, grid.nodes[i]);
      Mat inv = fcode.eigenvectors *
                fcode.eigenvalues.cwiseInverse().asDiagonal() *
                fcode.eigenvectors.transpose();
      double tr = (fcat.entries.transpose() * inv).trace();
      contrib[i] = 0.5 * wp * tr;
    }
  });
  GapReport rep;
  double kept_mass = 0.0;
  for (long i = 0; i < G; ++i) {
    rep.delta += contrib[i];
    rep.excluded_mass += excluded[i];
    if (excluded[i] == 0.0) kept_mass += 1.0;
  }
  (void)K;
  if (kept_mass == 0.0) fail("AllSingular", "every grid node was excluded");
  if (rep.excluded_mass > 0.0) add_flag(rep.flags, "SingularNodesExcluded");
  return rep;
}

GapReport asymptotic_gap(const CategoryModel& model, const CodingModel& code,
                         const QuadratureGrid& grid) {
  return asymptotic_gap(model, [&code](const Vec& x) { return code.fisher(x); }, grid);
}

double invariance_check(const CategoryModel& model, const CodingModel& code,
                        const Mat& jacobian, int per_dim) {
  const int K = model.dim();
  if (jacobian.rows() != K || jacobian.cols() != K)
    fail("DimMismatch", "jacobian must be K x K");
  Eigen::JacobiSVD<Mat> svd(jacobian);
  double smin = svd.singularValues().minCoeff();
  double smax = svd.singularValues().maxCoeff();
  if (!(smin > 0.0) || smax / smin >= 100.0)
    fail("InvalidParameter", "jacobian must be invertible with condition number < 100");
  if (!model.all_gaussian())
    fail("Unsupported", "invariance check needs an all-Gaussian model");

  QuadratureGrid grid_x = QuadratureGrid::for_model(model, per_dim);
  double delta_x = asymptotic_gap(model, code, grid_x).delta;

  // transformed model: means J c, covariances J Sigma J^T
  std::vector<Component> comps;
  for (int y = 0; y < model.num_classes(); ++y) {
    const auto& g = model.gaussian(y);
    comps.emplace_back(GaussianComponent(jacobian * g.mean,
                                         jacobian * g.cov * jacobian.transpose()));
  }
  CategoryModel model_z(model.priors(), std::move(comps));
  Mat jinv = jacobian.inverse();
  FisherField field_z = [&](const Vec& z) {
    FisherMatrix fx = code.fisher(jinv * z);
    return pushforward_fisher(fx, jinv);
  };
  QuadratureGrid grid_z = QuadratureGrid::for_model(model_z, per_dim);
  double delta_z = asymptotic_gap(model_z, field_z, grid_z).delta;
  return std::abs(delta_z - delta_x) / delta_x;
}

DataProcReport data_processing_check(const CategoryModel& model, const CodingModel& code,
                                     const MCConfig& mc) {
  QuadratureGrid grid = QuadratureGrid::for_model(model, model.dim() == 1 ? 201 : 101);
  DataProcReport rep;
  rep.mi_yx = mi_yx(model, grid);
  MiYrResult yr = mi_yr(model, code, grid, mc);
  rep.mi_yr = yr.mi_yr;
  rep.margin = yr.gap.estimate;
  if (rep.margin < -3.0 * yr.gap.std_err)
    fail("InequalityViolated",
         "data processing inequality violated beyond 3 sigma: margin " +
             std::to_string(rep.margin));
  return rep;
}

}  // namespace catgeo
