#include "catgeo/nettrain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "catgeo/parallel.hpp"

namespace catgeo {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kRateFloor = 1e-9;
constexpr double kKinkTol = 1e-6;

Vec activate(const Vec& z, Activation act) {
  if (act == Activation::Sigmoid)
    return (1.0 / (1.0 + (-z.array()).exp())).matrix();
  return z.cwiseMax(0.0);
}

// derivative of the activation at pre-activation z (subgradient 0 at a kink)
Vec activate_deriv(const Vec& z, Activation act) {
  if (act == Activation::Sigmoid) {
    Vec a = activate(z, act);
    return (a.array() * (1.0 - a.array())).matrix();
  }
  return (z.array() > 0.0).cast<double>().matrix();
}

Vec softmax(const Vec& z) {
  Vec e = (z.array() - z.maxCoeff()).exp();
  return e / e.sum();
}

// L1 affine fit min_{a,b} mean |a d + b - f| by candidate-slope enumeration.
void l1_affine_fit(const std::vector<double>& d, const std::vector<double>& f,
                   double* a_out, double* b_out, double* residual) {
  const size_t n = d.size();
  auto mae_for_slope = [&](double a, double* b_best) {
    std::vector<double> res(n);
    for (size_t i = 0; i < n; ++i) res[i] = f[i] - a * d[i];
    std::nth_element(res.begin(), res.begin() + n / 2, res.end());
    double b = res[n / 2];
    double mae = 0.0;
    for (size_t i = 0; i < n; ++i) mae += std::abs(f[i] - a * d[i] - b);
    *b_best = b;
    return mae / n;
  };
  double best_a = 0.0, best_b = 0.0, best = -1.0;
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i + 1; j < n; ++j) {
      if (d[i] == d[j]) continue;
      double a = (f[i] - f[j]) / (d[i] - d[j]);
      double b;
      double m = mae_for_slope(a, &b);
      if (best < 0.0 || m < best) {
        best = m;
        best_a = a;
        best_b = b;
      }
    }
  }
  double b0;
  double m0 = mae_for_slope(0.0, &b0);
  if (best < 0.0 || m0 < best) {
    best = m0;
    best_a = 0.0;
    best_b = b0;
  }
  *a_out = best_a;
  *b_out = best_b;
  *residual = best;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const size_t n = a.size();
  double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (size_t i = 0; i < n; ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa <= 0.0 || sbb <= 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

double kl_divergence(const Vec& p, const Vec& q) {
  double kl = 0.0;
  for (int i = 0; i < p.size(); ++i)
    if (p(i) > 0.0) kl += p(i) * (std::log(p(i)) - std::log(std::max(q(i), 1e-300)));
  return kl;
}

double jackknife_se(const std::vector<double>& sums, const std::vector<long>& counts) {
  const int m = static_cast<int>(sums.size());
  if (m < 2) return 0.0;
  double total = 0.0;
  long n = 0;
  for (int c = 0; c < m; ++c) {
    total += sums[c];
    n += counts[c];
  }
  std::vector<double> loo(m);
  double mean = 0.0;
  for (int c = 0; c < m; ++c) {
    loo[c] = (total - sums[c]) / static_cast<double>(n - counts[c]);
    mean += loo[c];
  }
  mean /= m;
  double ss = 0.0;
  for (int c = 0; c < m; ++c) ss += (loo[c] - mean) * (loo[c] - mean);
  return std::sqrt((m - 1.0) / m * ss);
}

}  // namespace

double MLPModel::variance_link(double f) const {
  switch (link) {
    case VarianceLink::Rate:
      return f;
    case VarianceLink::RateSquared:
      return f * f;
    case VarianceLink::Additive:
      return 1.0;
  }
  return 1.0;
}

double MLPModel::variance_link_deriv(double f) const {
  switch (link) {
    case VarianceLink::Rate:
      return 1.0;
    case VarianceLink::RateSquared:
      return 2.0 * f;
    case VarianceLink::Additive:
      return 0.0;
  }
  return 0.0;
}

MLPModel MLPModel::init(std::vector<int> dims, Activation act, double sigma,
                        VarianceLink link, uint64_t seed) {
  if (dims.size() < 3) fail("InvalidParameter", "need at least one hidden layer");
  MLPModel net;
  net.layer_dims = std::move(dims);
  net.activation = act;
  net.sigma = sigma;
  net.link = link;
  net.noise_layer = static_cast<int>(net.layer_dims.size()) - 2;  // last hidden
  RngEngine rng = make_engine(seed, 0xdead);
  for (size_t l = 0; l + 1 < net.layer_dims.size(); ++l) {
    // 0.5/sqrt(fan_in) keeps the sigmoid layers out of saturation at init
    double gain = 0.5 / std::sqrt(static_cast<double>(net.layer_dims[l]));
    std::uniform_real_distribution<double> unif(-gain, gain);
    Mat w(net.layer_dims[l + 1], net.layer_dims[l]);
    for (int i = 0; i < w.rows(); ++i)
      for (int j = 0; j < w.cols(); ++j) w(i, j) = unif(rng);
    net.weights.push_back(std::move(w));
    net.biases.push_back(Vec::Zero(net.layer_dims[l + 1]));
  }
  return net;
}

ForwardResult forward(const MLPModel& net, const Vec& x, bool noisy, RngEngine* rng) {
  if (x.size() != net.input_dim()) fail("DimMismatch", "input has wrong dimension");
  const int L = net.num_layers();
  ForwardResult res;
  res.activations.resize(L + 1);
  res.activations[0] = x;
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int l = 1; l <= L; ++l) {
    Vec z = net.weights[l - 1] * res.activations[l - 1] + net.biases[l - 1];
    if (l == L) {
      res.output = softmax(z);
      res.activations[l] = res.output;
      break;
    }
    Vec a = activate(z, net.activation);
    if (l == net.noise_layer) {
      res.coding_mean = a;
      if (noisy) {
        if (!rng) fail("InvalidParameter", "noisy forward needs an engine");
        for (int i = 0; i < a.size(); ++i) {
          double g = net.variance_link(a(i));
          a(i) += net.sigma * std::sqrt(std::max(g, 0.0)) * gauss(*rng);
        }
      }
    }
    res.activations[l] = a;
  }
  return res;
}

TrainTrace train_sgd(MLPModel& net, const std::vector<Vec>& inputs,
                     const std::vector<int>& labels, const TrainConfig& cfg) {
  if (inputs.size() != labels.size() || inputs.empty())
    fail("InvalidParameter", "inputs and labels must be nonempty and aligned");
  const int M = net.output_dim();
  for (int y : labels)
    if (y < 0 || y >= M) fail("InvalidParameter", "label out of range");
  const int L = net.num_layers();
  const long n = static_cast<long>(inputs.size());

  RngEngine rng_shuffle = make_engine(cfg.seed, 0x5f);
  RngEngine rng_noise = make_engine(cfg.seed, 0x401);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<long> order(n);
  std::iota(order.begin(), order.end(), 0);

  TrainTrace trace;
  std::vector<Mat> gw(L);
  std::vector<Vec> gb(L);
  std::vector<Vec> acts(L + 1), pre(L + 1), mean_act(L + 1);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng_shuffle);
    double loss_sum = 0.0;
    for (long start = 0; start < n; start += cfg.batch_size) {
      long stop = std::min(n, start + static_cast<long>(cfg.batch_size));
      for (int l = 0; l < L; ++l) {
        gw[l] = Mat::Zero(net.weights[l].rows(), net.weights[l].cols());
        gb[l] = Vec::Zero(net.biases[l].size());
      }
      for (long s = start; s < stop; ++s) {
        const Vec& x = inputs[order[s]];
        int y = labels[order[s]];
        // forward, keeping pre-activations for the backward pass
        acts[0] = x;
        for (int l = 1; l <= L; ++l) {
          pre[l] = net.weights[l - 1] * acts[l - 1] + net.biases[l - 1];
          if (l == L) {
            acts[l] = softmax(pre[l]);
            break;
          }
          Vec a = activate(pre[l], net.activation);
          mean_act[l] = a;
          if (l == net.noise_layer && cfg.noise_during_training) {
            // noise draw held constant per sample; straight-through on the link
            for (int i = 0; i < a.size(); ++i) {
              double g = net.variance_link(a(i));
              a(i) += net.sigma * std::sqrt(std::max(g, 0.0)) * gauss(rng_noise);
            }
          }
          acts[l] = a;
        }
        loss_sum += -std::log(std::max(acts[L](y), 1e-300));
        // backward
        Vec delta = acts[L];
        delta(y) -= 1.0;
        for (int l = L; l >= 1; --l) {
          gw[l - 1].noalias() += delta * acts[l - 1].transpose();
          gb[l - 1] += delta;
          if (l > 1) {
            Vec upstream = net.weights[l - 1].transpose() * delta;
            delta = upstream.cwiseProduct(activate_deriv(pre[l - 1], net.activation));
          }
        }
      }
      double scale = cfg.learning_rate / static_cast<double>(stop - start);
      for (int l = 0; l < L; ++l) {
        net.weights[l] -= scale * gw[l];
        net.biases[l] -= scale * gb[l];
      }
    }
    double epoch_loss = loss_sum / static_cast<double>(n);
    if (!std::isfinite(epoch_loss)) fail("Diverged", "training loss became non-finite");
    trace.epoch_loss.push_back(epoch_loss);
  }
  return trace;
}

CodingJacobian coding_jacobian(const MLPModel& net, const Vec& x) {
  if (x.size() != net.input_dim()) fail("DimMismatch", "input has wrong dimension");
  CodingJacobian out;
  Vec a = x;
  Mat j = Mat::Identity(net.input_dim(), net.input_dim());
  bool kink_below = false;
  for (int l = 1; l <= net.noise_layer; ++l) {
    Vec z = net.weights[l - 1] * a + net.biases[l - 1];
    Mat jz = net.weights[l - 1] * j;
    Vec d = activate_deriv(z, net.activation);
    j = d.asDiagonal() * jz;
    a = activate(z, net.activation);
    if (net.activation == Activation::Relu) {
      if (l < net.noise_layer) {
        for (int i = 0; i < z.size(); ++i)
          if (std::abs(z(i)) < kKinkTol) kink_below = true;
      } else {
        for (int i = 0; i < z.size(); ++i)
          if (std::abs(z(i)) < kKinkTol) out.kink_rows.push_back(i);
      }
    }
  }
  if (kink_below) {
    out.kink_rows.resize(net.coding_units());
    std::iota(out.kink_rows.begin(), out.kink_rows.end(), 0);
  }
  out.j = j;
  return out;
}

FisherMatrix fisher_code_net(const MLPModel& net, const Vec& x, bool exact) {
  ForwardResult fwd = forward(net, x);
  CodingJacobian cj = coding_jacobian(net, x);
  const int K = net.input_dim();
  const double s2 = net.sigma * net.sigma;
  Flags flags;
  Mat f = Mat::Zero(K, K);
  for (int i = 0; i < net.coding_units(); ++i) {
    double fi = fwd.coding_mean(i);
    double w = 0.0;
    switch (net.link) {
      case VarianceLink::Additive:
        w = 1.0 / s2;
        break;
      case VarianceLink::Rate:
        if (fi < kRateFloor) {
          add_flag(flags, "RateUnderflow");
          continue;
        }
        w = 1.0 / (s2 * fi) + (exact ? 0.5 / (fi * fi) : 0.0);
        break;
      case VarianceLink::RateSquared:
        if (fi < kRateFloor) {
          add_flag(flags, "RateUnderflow");
          continue;
        }
        w = 1.0 / (s2 * fi * fi) + (exact ? 2.0 / (fi * fi) : 0.0);
        break;
    }
    f.noalias() += w * cj.j.row(i).transpose() * cj.j.row(i);
  }
  if (!cj.kink_rows.empty()) add_flag(flags, "KinkAdjacent");
  FisherMatrix fm = FisherMatrix::from_matrix(0.5 * (f + f.transpose()), std::move(flags));
  if (fm.rank(1e-10) < K) add_flag(fm.flags, "SingularFisher");
  return fm;
}

NetCode::NetCode(const MLPModel& net) : net_(&net) {}
NetCode::NetCode(const MLPModel& net, LatentEmbedding emb)
    : net_(&net), emb_(std::move(emb)) {
  if (emb_->ambient_dim != net.input_dim())
    fail("DimMismatch", "embedding ambient dimension must match the net input");
}

int NetCode::input_dim() const { return emb_ ? emb_->latent_dim : net_->input_dim(); }

Vec NetCode::to_input(const Vec& x) const { return emb_ ? emb_->map(x) : x; }

Vec NetCode::mean_response(const Vec& x) const {
  return forward(*net_, to_input(x)).coding_mean;
}

Mat NetCode::response_jacobian(const Vec& x) const {
  Mat j = coding_jacobian(*net_, to_input(x)).j;
  if (emb_) return j * emb_->jacobian(x);
  return j;
}

Vec NetCode::sample_response(const Vec& x, RngEngine& rng) const {
  Vec f = mean_response(x);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int i = 0; i < f.size(); ++i) {
    double g = net_->variance_link(f(i));
    f(i) += net_->sigma * std::sqrt(std::max(g, 0.0)) * gauss(rng);
  }
  return f;
}

double NetCode::log_density_from_mean(const Vec& r, const Vec& f) const {
  double lp = 0.0;
  const double s2 = net_->sigma * net_->sigma;
  for (int i = 0; i < f.size(); ++i) {
    // variance floored so the density stays finite and node-consistent
    double v = s2 * std::max(net_->variance_link(f(i)), kRateFloor);
    lp += -0.5 * (r(i) - f(i)) * (r(i) - f(i)) / v - 0.5 * (kLog2Pi + std::log(v));
  }
  return lp;
}

CodingModel::GridEvaluator NetCode::grid_evaluator(const std::vector<Vec>& nodes) const {
  const long G = static_cast<long>(nodes.size());
  const int N = net_->coding_units();
  const double s2 = net_->sigma * net_->sigma;
  // diagonal heteroscedastic Gaussian: ll = A r^2 + B r + c per node
  auto a = std::make_shared<Mat>(Mat(G, N));
  auto b = std::make_shared<Mat>(Mat(G, N));
  auto c = std::make_shared<Vec>(Vec::Zero(G));
  for (long i = 0; i < G; ++i) {
    Vec f = mean_response(nodes[i]);
    for (int u = 0; u < N; ++u) {
      double v = s2 * std::max(net_->variance_link(f(u)), kRateFloor);
      (*a)(i, u) = -0.5 / v;
      (*b)(i, u) = f(u) / v;
      (*c)(i) += -0.5 * f(u) * f(u) / v - 0.5 * (kLog2Pi + std::log(v));
    }
  }
  return [a, b, c](const Vec& r, Vec& ll) {
    ll = (*a) * r.cwiseProduct(r) + (*b) * r + *c;
  };
}

Vec NetCode::score(const Vec& r, const Vec& x) const {
  Vec f = mean_response(x);
  Mat j = response_jacobian(x);
  const double s2 = net_->sigma * net_->sigma;
  Vec s = Vec::Zero(input_dim());
  for (int i = 0; i < f.size(); ++i) {
    double g = net_->variance_link(f(i));
    bool clamped = g < kRateFloor;
    double v = s2 * std::max(g, kRateFloor);
    double d = r(i) - f(i);
    double vp = clamped ? 0.0 : s2 * net_->variance_link_deriv(f(i));
    double coeff = d / v + (d * d / (2.0 * v * v) - 0.5 / v) * vp;
    s += coeff * j.row(i).transpose();
  }
  return s;
}

FisherMatrix NetCode::fisher(const Vec& x) const {
  if (!emb_) return fisher_code_net(*net_, x);
  // pull the input-space Fisher back through the embedding Jacobian
  FisherMatrix fs = fisher_code_net(*net_, to_input(x));
  Mat je = emb_->jacobian(x);  // ambient x latent
  Mat f = je.transpose() * fs.entries * je;
  FisherMatrix fm = FisherMatrix::from_matrix(0.5 * (f + f.transpose()), fs.flags);
  if (fm.rank(1e-10) < input_dim()) add_flag(fm.flags, "SingularFisher");
  return fm;
}

Vec decode(const MLPModel& net, const Vec& r) {
  if (r.size() != net.coding_units()) fail("DimMismatch", "activity has wrong dimension");
  Vec a = r;
  for (int l = net.noise_layer + 1; l <= net.num_layers(); ++l) {
    Vec z = net.weights[l - 1] * a + net.biases[l - 1];
    a = (l == net.num_layers()) ? softmax(z) : activate(z, net.activation);
  }
  return a;
}

void PathProbe::validate() const {
  if (points.size() < 3) fail("InvalidParameter", "path probe needs at least 3 points");
  for (size_t i = 1; i < points.size(); ++i) {
    if ((points[i] - points[i - 1]).norm() == 0.0)
      fail("InvalidParameter", "consecutive path points must be distinct");
    if (points[i].size() != points[0].size())
      fail("DimMismatch", "path points must share a dimension");
  }
}

int PathFisher::argmax_index() const {
  int best = 0;
  for (size_t i = 1; i < fisher.size(); ++i)
    if (fisher[i] > fisher[best]) best = static_cast<int>(i);
  return best;
}

PathFisher fisher_along_path(const MLPModel& net, const PathProbe& probe) {
  probe.validate();
  const size_t P = probe.points.size();
  PathFisher out;
  out.t.resize(P);
  out.arc_length.resize(P);
  out.fisher.resize(P);
  out.fisher_index.resize(P);
  out.arc_length[0] = 0.0;
  for (size_t i = 1; i < P; ++i)
    out.arc_length[i] = out.arc_length[i - 1] + (probe.points[i] - probe.points[i - 1]).norm();
  for (size_t i = 0; i < P; ++i) {
    out.t[i] = static_cast<double>(i);
    // index-step tangent: central difference of the path w.r.t. t
    Vec tangent;
    if (i == 0)
      tangent = probe.points[1] - probe.points[0];
    else if (i + 1 == P)
      tangent = probe.points[P - 1] - probe.points[P - 2];
    else
      tangent = 0.5 * (probe.points[i + 1] - probe.points[i - 1]);
    FisherMatrix f = fisher_code_net(net, probe.points[i]);
    out.fisher_index[i] = tangent.dot(f.entries * tangent);
    double speed2 = tangent.squaredNorm();
    out.fisher[i] = speed2 > 0.0 ? out.fisher_index[i] / speed2 : 0.0;
  }
  return out;
}

CosineProxy cosine_proxy(const MLPModel& net, const PathProbe& probe,
                         const PathFisher* fisher) {
  probe.validate();
  const size_t P = probe.points.size();
  std::vector<Vec> means(P);
  for (size_t i = 0; i < P; ++i) means[i] = forward(net, probe.points[i]).coding_mean;
  CosineProxy out;
  out.d.resize(P - 1);
  for (size_t i = 0; i + 1 < P; ++i) {
    double na = means[i].norm(), nb = means[i + 1].norm();
    if (na < 1e-12 || nb < 1e-12)
      fail("ZeroActivity", "mean activity vector has vanishing norm");
    out.d[i] = 1.0 - means[i].dot(means[i + 1]) / (na * nb);
  }
  if (fisher) {
    // the cosine distance is a per-segment quantity; compare against the
    // per-index Fisher evaluated at the segment midpoints
    std::vector<double> fmid(P - 1);
    for (size_t i = 0; i + 1 < P; ++i) {
      Vec xm = 0.5 * (probe.points[i] + probe.points[i + 1]);
      Vec tangent = probe.points[i + 1] - probe.points[i];
      FisherMatrix f = fisher_code_net(net, xm);
      fmid[i] = tangent.dot(f.entries * tangent);
    }
    l1_affine_fit(out.d, fmid, &out.scale, &out.offset, &out.residual);
    out.pearson = pearson(out.d, fmid);
  }
  return out;
}

CostDecomposition decompose_cost(const CategoryModel& model, const CodingModel& code,
                                 const Decoder& decoder, const QuadratureGrid& grid,
                                 const MCConfig& mc) {
  const int M = model.num_classes();
  const long G = static_cast<long>(grid.size());
  Mat lwq(G, M);
  for (long i = 0; i < G; ++i) {
    Vec lw = model.log_weights(grid.nodes[i]);
    for (int y = 0; y < M; ++y) lwq(i, y) = lw(y) + std::log(grid.weights[i]);
  }
  CodingModel::GridEvaluator evaluate = code.grid_evaluator(grid.nodes);

  long chunk = mc.chunk_size > 0 ? mc.chunk_size : 4096;
  int n_chunks = static_cast<int>((mc.outer_samples + chunk - 1) / chunk);
  std::vector<double> s_total(n_chunks, 0), s_gap(n_chunks, 0), s_dec(n_chunks, 0),
      s_decrest(n_chunks, 0);
  std::vector<long> counts(n_chunks, 0);
  const Vec& priors = model.priors();

  for_each_chunk(n_chunks, [&](int c) {
    long lo = static_cast<long>(c) * chunk;
    long hi = std::min(mc.outer_samples, lo + chunk);
    RngEngine rng = make_engine(mc.seed, static_cast<uint64_t>(c));
    std::discrete_distribution<int> label(priors.data(), priors.data() + priors.size());
    double tot = 0, gap = 0, dec = 0, decrest = 0;
    Vec lse(M), ll(G), t(G);
    for (long s = lo; s < hi; ++s) {
      int y = label(rng);
      Vec x = std::visit([&](const auto& d) { return d.sample(rng); },
                         model.components()[y]);
      Vec r = code.sample_response(x, rng);
      Vec post_x = model.posterior(x);
      Vec g = decoder(r);
      double kl_total = kl_divergence(post_x, g);

      evaluate(r, ll);
      for (int yy = 0; yy < M; ++yy) {
        t = ll + lwq.col(yy);
        double m = t.maxCoeff();
        lse(yy) = std::isfinite(m) ? m + std::log((t.array() - m).exp().sum())
                                   : -std::numeric_limits<double>::infinity();
      }
      double mm = lse.maxCoeff();
      if (!std::isfinite(mm)) fail("GridTooCoarse", "inner posterior underflowed");
      Vec post_r = (lse.array() - mm).exp();
      post_r /= post_r.sum();

      double h_gap = entropy(post_r) - entropy(post_x);
      double kl_dec = kl_divergence(post_r, g);
      tot += kl_total;
      gap += h_gap;
      dec += kl_dec;
      decrest += (kl_total - h_gap) - kl_dec;
    }
    s_total[c] = tot;
    s_gap[c] = gap;
    s_dec[c] = dec;
    s_decrest[c] = decrest;
    counts[c] = hi - lo;
  });

  double tot = 0, gap = 0, dec = 0, rest = 0;
  long n = 0;
  for (int c = 0; c < n_chunks; ++c) {
    tot += s_total[c];
    gap += s_gap[c];
    dec += s_dec[c];
    rest += s_decrest[c];
    n += counts[c];
  }
  CostDecomposition out;
  out.total = tot / n;
  out.total_se = jackknife_se(s_total, counts);
  out.coding = gap / n;
  out.coding_se = jackknife_se(s_gap, counts);
  out.decoding = out.total - out.coding;
  out.decoding_se = std::sqrt(out.total_se * out.total_se + out.coding_se * out.coding_se);
  out.decoding_direct = dec / n;
  out.decoding_direct_se = jackknife_se(s_dec, counts);
  out.iyx = mi_yx(model, grid);
  out.iyr.estimate = out.iyx.estimate - out.coding;
  out.iyr.std_err = out.coding_se;

  double diff = rest / n;
  double diff_se = jackknife_se(s_decrest, counts);
  if (std::abs(diff) > 3.0 * std::max(diff_se, 1e-12))
    fail("InconsistentDecomposition",
         "decoding cross-check failed: diff " + std::to_string(diff) + " vs se " +
             std::to_string(diff_se));
  return out;
}

CostDecomposition decompose_cost(const CategoryModel& model, const MLPModel& net,
                                 const MCConfig& mc) {
  if (model.dim() > 2) fail("Unsupported", "decompose_cost needs K <= 2");
  NetCode code(net);
  QuadratureGrid grid = QuadratureGrid::for_model(model, model.dim() == 1 ? 201 : 101);
  Decoder dec = [&net](const Vec& r) { return decode(net, r); };
  return decompose_cost(model, code, dec, grid, mc);
}

BiasVariance bias_variance(const CategoryModel& model, const CodingModel& code,
                           const Decoder& decoder, const MCConfig& mc) {
  const int M = model.num_classes();
  long chunk = mc.chunk_size > 0 ? mc.chunk_size : 256;
  int n_chunks = static_cast<int>((mc.outer_samples + chunk - 1) / chunk);
  std::vector<double> s_bias(n_chunks, 0), s_var(n_chunks, 0), s_tot(n_chunks, 0),
      s_mani(n_chunks, 0), s_varu(n_chunks, 0), s_eps(n_chunks, 0);
  std::vector<long> counts(n_chunks, 0);
  const Vec& priors = model.priors();
  const long inner = std::max<long>(2, mc.inner_samples);

  for_each_chunk(n_chunks, [&](int c) {
    long lo = static_cast<long>(c) * chunk;
    long hi = std::min(mc.outer_samples, lo + chunk);
    RngEngine rng = make_engine(mc.seed, static_cast<uint64_t>(c));
    std::discrete_distribution<int> label(priors.data(), priors.data() + priors.size());
    double acc_bias = 0, acc_var = 0, acc_tot = 0, acc_mani = 0, acc_varu = 0, eps = 0;
    Mat gs(inner, M);
    for (long s = lo; s < hi; ++s) {
      int y = label(rng);
      Vec x = std::visit([&](const auto& d) { return d.sample(rng); },
                         model.components()[y]);
      Vec post = model.posterior(x);
      Vec gbar = Vec::Zero(M);
      Vec mean_lng = Vec::Zero(M);
      double tot = 0;
      for (long k = 0; k < inner; ++k) {
        Vec r = code.sample_response(x, rng);
        Vec g = decoder(r);
        gs.row(k) = g.transpose();
        gbar += g;
        for (int yy = 0; yy < M; ++yy)
          mean_lng(yy) += std::log(std::max(g(yy), 1e-300));
        tot += kl_divergence(post, g);
      }
      gbar /= static_cast<double>(inner);
      mean_lng /= static_cast<double>(inner);
      tot /= static_cast<double>(inner);
      double bias = kl_divergence(post, gbar);
      double var = 0, varu = 0;
      for (int yy = 0; yy < M; ++yy) {
        var += post(yy) * (std::log(std::max(gbar(yy), 1e-300)) - mean_lng(yy));
        double u2 = 0;
        for (long k = 0; k < inner; ++k) {
          double u = (gs(k, yy) - gbar(yy)) / std::max(gbar(yy), 1e-300);
          u2 += u * u;
          eps = std::max(eps, std::abs(u));
        }
        varu += post(yy) * u2 / static_cast<double>(inner);
      }
      acc_bias += bias;
      acc_var += var;
      acc_tot += tot;
      acc_mani += tot - bias - var;
      acc_varu += varu;
    }
    s_bias[c] = acc_bias;
    s_var[c] = acc_var;
    s_tot[c] = acc_tot;
    s_mani[c] = acc_mani;
    s_varu[c] = acc_varu;
    s_eps[c] = eps;
    counts[c] = hi - lo;
  });

  double bias = 0, var = 0, tot = 0, mani = 0, varu = 0, eps = 0;
  long n = 0;
  for (int c = 0; c < n_chunks; ++c) {
    bias += s_bias[c];
    var += s_var[c];
    tot += s_tot[c];
    mani += s_mani[c];
    varu += s_varu[c];
    eps = std::max(eps, s_eps[c]);
    n += counts[c];
  }
  BiasVariance out;
  out.bias = bias / n;
  out.bias_se = jackknife_se(s_bias, counts);
  out.variance = var / n;
  out.variance_se = jackknife_se(s_var, counts);
  out.total = tot / n;
  out.total_se = jackknife_se(s_tot, counts);
  out.manifold = mani / n;
  out.manifold_se = jackknife_se(s_mani, counts);
  out.var_u = varu / n;
  out.eps_max = eps;
  out.band_lo = 0.5 * (1.0 - 2.0 * eps / 3.0) * out.var_u;
  out.band_hi = (0.5 + eps / 3.0 + eps * eps / 4.0) * out.var_u;
  if (out.manifold < -3.0 * std::max(out.manifold_se, 1e-12))
    fail("InconsistentDecomposition", "manifold term below -3 sigma");
  return out;
}

BiasVariance bias_variance(const CategoryModel& model, const MLPModel& net,
                           const MCConfig& mc) {
  NetCode code(net);
  Decoder dec = [&net](const Vec& r) { return decode(net, r); };
  return bias_variance(model, code, dec, mc);
}

TuningCurves tuning_curves(const MLPModel& net, const PathProbe& probe,
                           const std::vector<int>& unit_ids) {
  probe.validate();
  for (int id : unit_ids)
    if (id < 0 || id >= net.coding_units())
      fail("InvalidParameter", "unit id out of range");
  TuningCurves out;
  out.unit_ids = unit_ids;
  out.curves = Mat(static_cast<long>(unit_ids.size()), static_cast<long>(probe.points.size()));
  for (size_t p = 0; p < probe.points.size(); ++p) {
    Vec f = forward(net, probe.points[p]).coding_mean;
    for (size_t u = 0; u < unit_ids.size(); ++u)
      out.curves(static_cast<long>(u), static_cast<long>(p)) = f(unit_ids[u]);
  }
  out.fisher_argmax_index = fisher_along_path(net, probe).argmax_index();
  return out;
}

}  // namespace catgeo
