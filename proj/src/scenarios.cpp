#include "catgeo/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <sstream>

#include "catgeo/allocate.hpp"
#include "catgeo/catfisher.hpp"
#include "catgeo/io.hpp"

namespace catgeo {

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

double median(std::vector<double> xs) {
  if (xs.empty()) return 0.0;
  std::sort(xs.begin(), xs.end());
  return xs[xs.size() / 2];
}

double angle_deg(const Vec& a, const Vec& b) {
  double c = std::abs(a.normalized().dot(b.normalized()));
  return std::acos(std::min(1.0, c)) * 180.0 / M_PI;
}

}  // namespace

CategoryModel three_gaussian_model() {
  const double r = 2.0;
  std::vector<Component> comps;
  for (int i = 0; i < 3; ++i) {
    double ang = M_PI / 2.0 + i * 2.0 * M_PI / 3.0;
    Vec mean(2);
    mean << r * std::cos(ang), r * std::sin(ang);
    comps.emplace_back(GaussianComponent(mean, Mat::Identity(2, 2)));
  }
  Vec priors = Vec::Constant(3, 1.0 / 3.0);
  return CategoryModel(priors, std::move(comps));
}

CategoryModel two_gaussian_model_1d(double c, double sigma) {
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

CategoryModel continuum_latent_model() { return two_gaussian_model_1d(1.0, 0.5); }

BoundaryProbes three_gaussian_boundary_probes() {
  CategoryModel model = three_gaussian_model();
  BoundaryProbes out;
  for (int pair = 0; pair < 3; ++pair) {
    // the boundary between classes pair and pair+1 is the ray from the
    // triple point (origin) directed away from the remaining center
    int k = (pair + 2) % 3;
    Vec ray = -model.gaussian(k).mean.normalized();
    for (int t = 0; t < 17 && static_cast<int>(out.points.size()) < 50; ++t) {
      Vec x = ray * (1.4 + 1.2 * t / 16.0);
      out.points.push_back(x);
      out.pdds.push_back(fisher_cat(model, x).top_eigenvector());
    }
    for (int t = 0; t < 3; ++t) out.near_triple.push_back(ray * (0.08 + 0.15 * t));
  }
  return out;
}

Train2dRun run_train2d(uint64_t seed, const Train2dConfig& cfg) {
  CategoryModel model = three_gaussian_model();
  BoundaryProbes probes = three_gaussian_boundary_probes();

  Train2dRun run;
  QuadratureGrid grid = QuadratureGrid::for_model(model, 201);
  for (size_t i = 0; i < grid.size(); ++i) {
    double p = model.density(grid.nodes[i]);
    if (p <= 0.0) continue;
    run.bayes_rate += grid.weights[i] * p * model.posterior(grid.nodes[i]).maxCoeff();
  }

  auto train_set = model.sample(cfg.n_train, seed);
  std::vector<Vec> inputs;
  std::vector<int> labels;
  inputs.reserve(train_set.size());
  for (const auto& s : train_set) {
    inputs.push_back(s.x);
    labels.push_back(s.y);
  }

  run.net = MLPModel::init({2, 32, 32, 3}, Activation::Sigmoid, cfg.sigma,
                           VarianceLink::Rate, seed);

  auto angles_of = [&](const MLPModel& net) {
    std::vector<double> out;
    for (size_t i = 0; i < probes.points.size(); ++i)
      out.push_back(angle_deg(fisher_code_net(net, probes.points[i]).top_eigenvector(),
                              probes.pdds[i]));
    return out;
  };
  auto ratios_of = [&](const MLPModel& net, const std::vector<Vec>& pts) {
    std::vector<double> out;
    for (const auto& x : pts) {
      FisherMatrix f = fisher_code_net(net, x);
      out.push_back(f.eigenvalues(1) / f.eigenvalues(0));
    }
    return out;
  };
  QuadratureGrid gap_grid = QuadratureGrid::for_model(model, cfg.gap_grid);
  auto gap_of = [&](const MLPModel& net) {
    NetCode code(net);
    return asymptotic_gap(model, code, gap_grid).delta;
  };

  run.angles_before = angles_of(run.net);
  run.delta_checkpoints.push_back(gap_of(run.net));

  TrainConfig tc;
  tc.batch_size = cfg.batch_size;
  tc.learning_rate = cfg.learning_rate;
  tc.seed = seed;
  tc.noise_during_training = cfg.noise_during_training;
  tc.epochs = cfg.epochs / 2;
  TrainTrace first = train_sgd(run.net, inputs, labels, tc);
  run.delta_checkpoints.push_back(gap_of(run.net));
  tc.epochs = cfg.epochs - cfg.epochs / 2;
  tc.seed = derive_seed(seed, 0x2e);
  TrainTrace second = train_sgd(run.net, inputs, labels, tc);
  run.delta_checkpoints.push_back(gap_of(run.net));
  run.trace.epoch_loss = first.epoch_loss;
  run.trace.epoch_loss.insert(run.trace.epoch_loss.end(), second.epoch_loss.begin(),
                              second.epoch_loss.end());

  auto test_set = model.sample(cfg.n_test, derive_seed(seed, 0x7e57));
  long correct = 0;
  for (const auto& s : test_set) {
    int am = 0;
    forward(run.net, s.x).output.maxCoeff(&am);
    correct += am == s.y;
  }
  run.test_accuracy = static_cast<double>(correct) / static_cast<double>(test_set.size());

  run.angles_after = angles_of(run.net);
  run.ratios_after = ratios_of(run.net, probes.points);
  run.ratios_triple = ratios_of(run.net, probes.near_triple);
  run.angle_median_before = median(run.angles_before);
  run.angle_median_after = median(run.angles_after);
  run.ratio_median_after = median(run.ratios_after);
  run.ratio_median_triple = median(run.ratios_triple);
  return run;
}

ContinuumRun run_continuum(uint64_t seed, const ContinuumConfig& cfg) {
  CategoryModel latent = continuum_latent_model();
  ContinuumRun run;
  run.embedding = LatentEmbedding::random(1, cfg.ambient_dim, seed);

  auto latent_samples = latent.sample(cfg.n_train, seed);
  std::vector<Vec> inputs;
  std::vector<int> labels;
  for (const auto& s : latent_samples) {
    inputs.push_back(run.embedding.map(s.x));
    labels.push_back(s.y);
  }

  run.net = MLPModel::init({cfg.ambient_dim, 32, 32, 2}, Activation::Sigmoid, cfg.sigma,
                           VarianceLink::Rate, seed);
  TrainConfig tc;
  tc.epochs = cfg.epochs;
  tc.batch_size = cfg.batch_size;
  tc.learning_rate = cfg.learning_rate;
  tc.seed = seed;
  train_sgd(run.net, inputs, labels, tc);

  std::vector<Vec> latent_path;
  for (int i = 0; i < cfg.path_points; ++i) {
    double t = -cfg.x_halfwidth + 2.0 * cfg.x_halfwidth * i / (cfg.path_points - 1.0);
    Vec x(1);
    x << t;
    latent_path.push_back(x);
    run.latent_t.push_back(t);
  }
  run.path.points = embed_continuum(run.embedding, latent_path);

  run.fisher = fisher_along_path(run.net, run.path);
  run.proxy = cosine_proxy(run.net, run.path, &run.fisher);
  // continua are parameterized by item index, matching the proxy profile
  run.fisher_argmax = 0;
  for (size_t i = 1; i < run.fisher.fisher_index.size(); ++i)
    if (run.fisher.fisher_index[i] > run.fisher.fisher_index[run.fisher_argmax])
      run.fisher_argmax = static_cast<int>(i);

  const int P = cfg.path_points;
  run.posteriors = Mat(2, P);
  for (int i = 0; i < P; ++i)
    run.posteriors.col(i) = forward(run.net, run.path.points[i]).output;

  // nearest index to the net posterior 0.5-crossing
  run.posterior_cross_index = 0;
  double best = 1e9;
  for (int i = 0; i < P; ++i) {
    double d = std::abs(run.posteriors(1, i) - 0.5);
    if (d < best) {
      best = d;
      run.posterior_cross_index = i;
    }
  }

  // tuning curves and the steepest-slope statistic over the active units
  const int N = run.net.coding_units();
  run.curves = Mat(N, P);
  for (int i = 0; i < P; ++i) {
    Vec f = forward(run.net, run.path.points[i]).coding_mean;
    run.curves.col(i) = f;
  }
  std::vector<bool> transition(P, false);
  for (int i = 0; i < P; ++i)
    transition[i] = run.posteriors.col(i).maxCoeff() < 0.9;
  int steep_inside = 0;
  for (int u = 0; u < N; ++u) {
    double range = run.curves.row(u).maxCoeff() - run.curves.row(u).minCoeff();
    if (range < cfg.active_range) continue;  // unit does not activate on the path
    ++run.n_active;
    int arg = 1;
    double best_slope = -1.0;
    for (int i = 1; i + 1 < P; ++i) {
      double slope = std::abs(run.curves(u, i + 1) - run.curves(u, i - 1));
      if (slope > best_slope) {
        best_slope = slope;
        arg = i;
      }
    }
    if (transition[arg]) ++steep_inside;
  }
  run.steep_in_transition_fraction =
      run.n_active ? static_cast<double>(steep_inside) / run.n_active : 0.0;
  return run;
}

// ---------------------------------------------------------------------------
// scenario runners
// ---------------------------------------------------------------------------

namespace {

namespace fs = std::filesystem;

struct Emitter {
  std::string dir;
  std::vector<std::string> artifacts;

  std::string path(const std::string& name) const { return dir + "/" + name; }
  void text(const std::string& name, const std::string& content) {
    write_text_file(path(name), content);
    artifacts.push_back(name);
  }
  void json(const std::string& name, const Json& j) { text(name, j.dump(2) + "\n"); }
};

template <typename T>
T cfg_get(const Json& cfg, const std::string& key, T fallback) {
  if (cfg.contains(key)) return cfg.at(key).get<T>();
  return fallback;
}

uint64_t cfg_seed(const Json& cfg) { return cfg_get<uint64_t>(cfg, "seed", 0); }

// log-log least squares slope plus R^2
void loglog_fit(const std::vector<double>& xs, const std::vector<double>& ys,
                double* slope, double* r2) {
  const size_t n = xs.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (size_t i = 0; i < n; ++i) {
    double lx = std::log(xs[i]), ly = std::log(ys[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    syy += ly * ly;
  }
  double cov = sxy - sx * sy / n;
  double vx = sxx - sx * sx / n;
  double vy = syy - sy * sy / n;
  *slope = cov / vx;
  *r2 = vx > 0 && vy > 0 ? cov * cov / (vx * vy) : 0.0;
}

Json gauss1d_run(const Json& cfg, Emitter& em) {
  std::vector<double> a_values = cfg_get<std::vector<double>>(cfg, "a_values", {1.0, 1.5, 2.0});
  std::vector<double> sigma_values =
      cfg_get<std::vector<double>>(cfg, "sigma_values", {0.6, 1.0});
  double c = cfg_get<double>(cfg, "c", 1.0);
  int sweep = cfg_get<int>(cfg, "sweep_points", 401);

  Json summaries = Json::array();
  for (double a : a_values) {
    for (double sigma : sigma_values) {
      Gauss1dSummary s = gauss1d_summary(a, sigma, c);
      Json js;
      js["a"] = a;
      js["sigma"] = sigma;
      js["c"] = c;
      js["eta"] = s.eta;
      js["rho"] = s.rho;
      js["gamma"] = s.gamma;
      js["z_b"] = s.z_b;
      js["z"] = s.z;
      js["x_b_plus"] = s.x_b_plus;
      js["x_b_minus"] = s.x_b_minus;
      js["x_cat_plus"] = s.x_cat_plus;
      js["x_cat_minus"] = s.x_cat_minus;
      js["p_at_xb_plus"] = s.p_at_xb_plus;
      js["p_at_xb_minus"] = s.p_at_xb_minus;
      summaries.push_back(js);

      CategoryModel model = gauss1d_model(a, sigma, c);
      std::ostringstream csv;
      csv << "x,dens_minus,dens_plus,posterior_plus,f_cat\n";
      for (int i = 0; i < sweep; ++i) {
        Vec x(1);
        x << -6.0 + 12.0 * i / (sweep - 1.0);
        Vec lw = model.log_weights(x);
        Vec post = model.posterior(x);
        csv << format_double(x(0)) << "," << format_double(2.0 * std::exp(lw(0))) << ","
            << format_double(2.0 * std::exp(lw(1))) << "," << format_double(post(1)) << ","
            << format_double(fcat_eigenvalue(model, x)) << "\n";
      }
      std::ostringstream name;
      name << "gauss1d_profile_a" << a << "_s" << sigma << ".csv";
      em.text(name.str(), csv.str());
    }
  }
  em.json("gauss1d_summary.json", summaries);
  Json metrics;
  metrics["cases"] = summaries;
  return metrics;
}

Json pdc2d_run(const Json& cfg, Emitter& em) {
  double a = cfg_get<double>(cfg, "a", 1.2);
  double sigma = cfg_get<double>(cfg, "sigma", 1.3);
  int n_pdcs = cfg_get<int>(cfg, "n_pdcs", 12);
  double step = cfg_get<double>(cfg, "step", 0.01);
  double max_arc = cfg_get<double>(cfg, "max_arc", 8.0);

  Vec c = v2(1.0, 0.0);
  Vec priors(2);
  priors << 0.5, 0.5;
  std::vector<Component> comps;
  comps.emplace_back(GaussianComponent(-c, sigma * sigma * Mat::Identity(2, 2)));
  comps.emplace_back(GaussianComponent(c, a * a * sigma * sigma * Mat::Identity(2, 2)));
  CategoryModel model(priors, std::move(comps));

  GaussKdSummary s = gauss_kd_summary(a, sigma, 2);
  Vec center = -s.rho * c;

  std::ostringstream blocus, mlocus;
  blocus << "x_1,x_2,radius\n";
  mlocus << "x_1,x_2,radius\n";
  double max_boundary_err = 0, max_maxima_err = 0, max_lateral = 0;
  for (int k = 0; k < n_pdcs; ++k) {
    double ang = 2.0 * M_PI * k / n_pdcs;
    Vec dir = v2(std::cos(ang), std::sin(ang));
    Vec x0 = center + (s.z_b + 2.0) * dir;
    Polyline pdc = trace_pdc(model, x0, step, max_arc);
    std::ostringstream name;
    name << "pdc_" << k << ".csv";
    write_pdc_csv(em.path(name.str()), model, pdc);
    em.artifacts.push_back(name.str());
    for (const auto& p : pdc.points) {
      Vec rel = p - center;
      max_lateral = std::max(max_lateral, (rel - dir * dir.dot(rel)).norm());
    }
    Vec b = find_boundary_on_pdc(model, pdc);
    Vec m = find_fcat_max_on_pdc(model, pdc);
    blocus << format_double(b(0)) << "," << format_double(b(1)) << ","
           << format_double((b - center).norm()) << "\n";
    mlocus << format_double(m(0)) << "," << format_double(m(1)) << ","
           << format_double((m - center).norm()) << "\n";
    max_boundary_err = std::max(max_boundary_err, std::abs((b - center).norm() - s.z_b));
    max_maxima_err = std::max(max_maxima_err, std::abs((m - center).norm() - s.z));
  }
  em.text("boundary_locus.csv", blocus.str());
  em.text("maxima_locus.csv", mlocus.str());

  Json metrics;
  metrics["a"] = a;
  metrics["sigma"] = sigma;
  metrics["z_b"] = s.z_b;
  metrics["z"] = s.z;
  metrics["center"] = {center(0), center(1)};
  metrics["max_boundary_radius_error"] = max_boundary_err;
  metrics["max_maxima_radius_error"] = max_maxima_err;
  metrics["max_pdc_lateral_deviation"] = max_lateral;
  em.json("pdc2d_summary.json", metrics);
  return metrics;
}

CategoryModel model_from_config(const Json& cfg) {
  std::string name = cfg_get<std::string>(cfg, "model", "three_gaussian");
  if (name == "three_gaussian") return three_gaussian_model();
  if (name == "continuum_latent") return continuum_latent_model();
  if (name == "inline") return model_from_json(cfg.at("model_json"));
  if (name == "file") return model_from_json(Json::parse(read_text_file(cfg.at("model_file"))));
  fail("ConfigError", "unknown model " + name);
}

Json fcat_field_run(const Json& cfg, Emitter& em) {
  CategoryModel model = model_from_config(cfg);
  int per_dim = cfg_get<int>(cfg, "per_dim", 41);
  double lo = cfg_get<double>(cfg, "lo", -4.0);
  double hi = cfg_get<double>(cfg, "hi", 4.0);
  if (model.dim() != 2) fail("ConfigError", "fcat-field expects a 2-D model");
  std::vector<Vec> nodes;
  std::vector<FisherMatrix> fields;
  for (int i = 0; i < per_dim; ++i) {
    for (int j = 0; j < per_dim; ++j) {
      Vec x = v2(lo + (hi - lo) * i / (per_dim - 1.0), lo + (hi - lo) * j / (per_dim - 1.0));
      nodes.push_back(x);
      fields.push_back(fisher_cat(model, x));
    }
  }
  write_fisher_field_csv(em.path("fcat_field.csv"), nodes, fields);
  em.artifacts.push_back("fcat_field.csv");
  Json metrics;
  metrics["nodes"] = nodes.size();
  return metrics;
}

Json fcode_field_run(const Json& cfg, Emitter& em) {
  int per_dim = cfg_get<int>(cfg, "per_dim", 41);
  double lo = cfg_get<double>(cfg, "lo", -4.0);
  double hi = cfg_get<double>(cfg, "hi", 4.0);
  MLPModel net;
  if (cfg.contains("checkpoint")) {
    net = net_from_json(Json::parse(read_text_file(cfg.at("checkpoint"))));
  } else {
    Train2dConfig tc;
    tc.epochs = cfg_get<int>(cfg, "epochs", 300);
    net = run_train2d(cfg_seed(cfg), tc).net;
  }
  if (net.input_dim() != 2) fail("ConfigError", "fcode-field expects a 2-D input net");
  std::vector<Vec> nodes;
  std::vector<FisherMatrix> fields;
  for (int i = 0; i < per_dim; ++i) {
    for (int j = 0; j < per_dim; ++j) {
      Vec x = v2(lo + (hi - lo) * i / (per_dim - 1.0), lo + (hi - lo) * j / (per_dim - 1.0));
      nodes.push_back(x);
      fields.push_back(fisher_code_net(net, x));
    }
  }
  write_fisher_field_csv(em.path("fcode_field.csv"), nodes, fields);
  em.artifacts.push_back("fcode_field.csv");
  Json metrics;
  metrics["nodes"] = nodes.size();
  return metrics;
}

Json train2d_scenario(const Json& cfg, Emitter& em) {
  Train2dConfig tc;
  tc.epochs = cfg_get<int>(cfg, "epochs", 300);
  tc.batch_size = cfg_get<int>(cfg, "batch_size", 64);
  tc.learning_rate = cfg_get<double>(cfg, "learning_rate", 0.05);
  tc.sigma = cfg_get<double>(cfg, "sigma", 0.3);
  tc.n_train = cfg_get<long>(cfg, "n_train", 6000);
  tc.n_test = cfg_get<long>(cfg, "n_test", 20000);
  tc.noise_during_training = cfg_get<bool>(cfg, "noise_during_training", true);
  uint64_t seed = cfg_seed(cfg);

  Train2dRun run = run_train2d(seed, tc);
  em.json("checkpoint.json", net_to_json(run.net));

  // scalar Fisher and posteriors along the blue-red path between two centers
  CategoryModel model = three_gaussian_model();
  PathProbe probe;
  const int P = 41;
  Vec a = model.gaussian(0).mean, b = model.gaussian(1).mean;
  for (int i = 0; i < P; ++i) probe.points.push_back(a + (b - a) * i / (P - 1.0));
  PathFisher pf = fisher_along_path(run.net, probe);
  CosineProxy proxy = cosine_proxy(run.net, probe, &pf);
  std::ostringstream csv;
  csv << "t,arc_length";
  for (int y = 0; y < 3; ++y) csv << ",g_" << (y + 1);
  csv << ",fisher,cosine_proxy\n";
  for (int i = 0; i < P; ++i) {
    Vec g = forward(run.net, probe.points[i]).output;
    double d = i == 0 ? proxy.d.front()
                      : (i + 1 == P ? proxy.d.back()
                                    : 0.5 * (proxy.d[i - 1] + proxy.d[i]));
    csv << format_double(pf.t[i]) << "," << format_double(pf.arc_length[i]);
    for (int y = 0; y < 3; ++y) csv << "," << format_double(g(y));
    csv << "," << format_double(pf.fisher[i]) << "," << format_double(d) << "\n";
  }
  em.text("fisher_path.csv", csv.str());

  std::ostringstream pcsv;
  pcsv << "x_1,x_2,angle_before,angle_after,ratio_after\n";
  BoundaryProbes probes = three_gaussian_boundary_probes();
  for (size_t i = 0; i < probes.points.size(); ++i) {
    pcsv << format_double(probes.points[i](0)) << "," << format_double(probes.points[i](1))
         << "," << format_double(run.angles_before[i]) << ","
         << format_double(run.angles_after[i]) << "," << format_double(run.ratios_after[i])
         << "\n";
  }
  em.text("boundary_probes.csv", pcsv.str());

  Json metrics;
  metrics["bayes_rate"] = run.bayes_rate;
  metrics["test_accuracy"] = run.test_accuracy;
  metrics["angle_median_before_deg"] = run.angle_median_before;
  metrics["angle_median_after_deg"] = run.angle_median_after;
  metrics["ratio_median_after"] = run.ratio_median_after;
  metrics["ratio_median_triple"] = run.ratio_median_triple;
  metrics["delta_checkpoints"] = run.delta_checkpoints;
  metrics["final_loss"] = run.trace.epoch_loss.back();
  metrics["path_fisher_argmax"] = pf.argmax_index();
  metrics["proxy_pearson"] = proxy.pearson;
  em.json("train2d_metrics.json", metrics);
  return metrics;
}

Json continuum_scenario(const Json& cfg, Emitter& em) {
  ContinuumConfig cc;
  cc.ambient_dim = cfg_get<int>(cfg, "ambient_dim", 16);
  cc.path_points = cfg_get<int>(cfg, "path_points", 31);
  cc.x_halfwidth = cfg_get<double>(cfg, "x_halfwidth", cc.x_halfwidth);
  cc.epochs = cfg_get<int>(cfg, "epochs", 300);
  cc.batch_size = cfg_get<int>(cfg, "batch_size", 64);
  cc.learning_rate = cfg_get<double>(cfg, "learning_rate", 0.05);
  cc.sigma = cfg_get<double>(cfg, "sigma", 0.1);
  cc.n_train = cfg_get<long>(cfg, "n_train", 6000);
  cc.active_range = cfg_get<double>(cfg, "active_range", cc.active_range);
  uint64_t seed = cfg_seed(cfg);

  ContinuumRun run = run_continuum(seed, cc);
  em.json("checkpoint.json", net_to_json(run.net));

  std::ostringstream csv;
  csv << "t,latent_x,g_1,g_2,fisher,fisher_per_arc,cosine_proxy\n";
  const int P = cc.path_points;
  for (int i = 0; i < P; ++i) {
    double d = i == 0 ? run.proxy.d.front()
                      : (i + 1 == P ? run.proxy.d.back()
                                    : 0.5 * (run.proxy.d[i - 1] + run.proxy.d[i]));
    csv << format_double(run.fisher.t[i]) << "," << format_double(run.latent_t[i]) << ","
        << format_double(run.posteriors(0, i)) << "," << format_double(run.posteriors(1, i))
        << "," << format_double(run.fisher.fisher_index[i]) << ","
        << format_double(run.fisher.fisher[i]) << "," << format_double(d) << "\n";
  }
  em.text("continuum_path.csv", csv.str());

  std::ostringstream tcsv;
  tcsv << "unit";
  for (int i = 0; i < P; ++i) tcsv << ",t_" << i;
  tcsv << "\n";
  for (int u = 0; u < run.curves.rows(); ++u) {
    tcsv << u;
    for (int i = 0; i < P; ++i) tcsv << "," << format_double(run.curves(u, i));
    tcsv << "\n";
  }
  em.text("tuning_curves.csv", tcsv.str());

  Json metrics;
  metrics["fisher_argmax"] = run.fisher_argmax;
  metrics["posterior_cross_index"] = run.posterior_cross_index;
  metrics["proxy_pearson"] = run.proxy.pearson;
  metrics["proxy_scale"] = run.proxy.scale;
  metrics["proxy_residual"] = run.proxy.residual;
  metrics["n_active_units"] = run.n_active;
  metrics["steep_in_transition_fraction"] = run.steep_in_transition_fraction;
  em.json("continuum_metrics.json", metrics);
  return metrics;
}

Json mi_validate_run(const Json& cfg, Emitter& em) {
  std::vector<int> n_list = cfg_get<std::vector<int>>(cfg, "n_units", {64, 128, 256, 512});
  long outer = cfg_get<long>(cfg, "outer_samples", 100000);
  double width = cfg_get<double>(cfg, "width", 0.4);
  double sigma = cfg_get<double>(cfg, "noise_sigma", 0.4);
  uint64_t seed = cfg_seed(cfg);

  CategoryModel model = two_gaussian_model_1d(1.0, 1.0);
  QuadratureGrid grid = QuadratureGrid::for_model(model, 201);
  MIResult iyx = mi_yx(model, grid);

  std::ostringstream csv;
  csv << "n_units,gap_mc,gap_se,delta_asym,mi_yr,mi_yr_se\n";
  std::vector<double> ns, gaps;
  double ratio_at_max = 0;
  for (size_t k = 0; k < n_list.size(); ++k) {
    int n = n_list[k];
    NoiseSpec noise;
    noise.family = NoiseFamily::GaussianIID;
    noise.sigma = sigma;
    PopulationCode code = dense_sigmoid_code_1d(n, -6.0, 6.0, width, 1.0, noise);
    MCConfig mc;
    mc.outer_samples = outer;
    mc.seed = derive_seed(seed, k);
    MiYrResult r = mi_yr(model, code, grid, mc);
    GapReport asym = asymptotic_gap(model, code, grid);
    csv << n << "," << format_double(r.gap.estimate) << ","
        << format_double(r.gap.std_err) << "," << format_double(asym.delta) << ","
        << format_double(r.mi_yr.estimate) << "," << format_double(r.mi_yr.std_err) << "\n";
    ns.push_back(n);
    gaps.push_back(r.gap.estimate);
    if (k + 1 == n_list.size()) ratio_at_max = r.gap.estimate / asym.delta;
  }
  em.text("gap_vs_n.csv", csv.str());

  double slope = 0, r2 = 0;
  loglog_fit(ns, gaps, &slope, &r2);
  Json metrics;
  metrics["iyx"] = iyx.estimate;
  metrics["loglog_slope"] = slope;
  metrics["loglog_r2"] = r2;
  metrics["ratio_at_largest_n"] = ratio_at_max;
  em.json("mi_validate_metrics.json", metrics);
  return metrics;
}

Json allocate_run(const Json& cfg, Emitter& em) {
  int n_nodes = cfg_get<int>(cfg, "n_nodes", 1000);
  double alpha = cfg_get<double>(cfg, "alpha", 2.0);
  double lambda = cfg_get<double>(cfg, "lambda", 0.3);
  double beta = cfg_get<double>(cfg, "beta", 2.0);
  uint64_t seed = cfg_seed(cfg);

  AllocationProblem pb;
  pb.x = Vec(n_nodes);
  pb.w = Vec(n_nodes);
  pb.p = Vec(n_nodes);
  pb.fcat = Vec(n_nodes);
  double h = 4.0 / (n_nodes - 1);
  RngEngine rng = make_engine(seed, 0xa110);
  std::uniform_real_distribution<double> unif(0.0, 5.0);
  for (int i = 0; i < n_nodes; ++i) {
    pb.x(i) = -2.0 + h * i;
    pb.w(i) = h;
    pb.p(i) = 0.25;
    pb.fcat(i) = unif(rng);
  }
  pb.w(0) *= 0.5;
  pb.w(n_nodes - 1) *= 0.5;
  double mass = (pb.w.array() * pb.p.array()).sum();
  pb.p /= mass;

  pb.constraint = PowerLaw{alpha};
  pb.multiplier = lambda;
  AllocationResult pl = solve_power_law(pb);
  AllocationResult pl_oracle = grid_minimize(pb);
  double pl_err = 0;
  for (int i = 0; i < n_nodes; ++i)
    if (pb.fcat(i) > 0)
      pl_err = std::max(pl_err, std::abs(pl.fcode(i) - pl_oracle.fcode(i)) / pl.fcode(i));
  write_allocation_csv(em.path("profile_power_law.csv"), pb, pl);
  em.artifacts.push_back("profile_power_law.csv");

  pb.constraint = Entropic{};
  pb.multiplier = beta;
  AllocationResult en = solve_entropic(pb);
  AllocationResult en_oracle = grid_minimize(pb);
  double en_err = 0;
  for (int i = 0; i < n_nodes; ++i)
    if (pb.fcat(i) > 0)
      en_err = std::max(en_err, std::abs(en.fcode(i) - en_oracle.fcode(i)) / en.fcode(i));
  write_allocation_csv(em.path("profile_entropic.csv"), pb, en);
  em.artifacts.push_back("profile_entropic.csv");

  // two-branch tabulated constraint: F_cat sweeps upward over the grid
  auto jump_study = [&](int nodes) {
    AllocationProblem tb;
    tb.x = Vec(nodes);
    tb.w = Vec(nodes);
    tb.p = Vec(nodes);
    tb.fcat = Vec(nodes);
    double hh = 1.0 / (nodes - 1);
    for (int i = 0; i < nodes; ++i) {
      tb.x(i) = hh * i;
      tb.w(i) = hh;
      tb.p(i) = 1.0;
      tb.fcat(i) = 35.0 * tb.x(i);
    }
    tb.w(0) *= 0.5;
    tb.w(nodes - 1) *= 0.5;
    double m2 = (tb.w.array() * tb.p.array()).sum();
    tb.p /= m2;
    Tabulated tab;
    const int m = 6000;
    tab.u = Vec(m);
    tab.psi = Vec(m);
    double acc = 0, prev_u = 0.01, prev_d = 0;
    auto dpsi = [](double u) { return 1.0 + 40.0 / (1.0 + std::exp((u - 1.0) / 0.04)); };
    prev_d = dpsi(prev_u);
    for (int i = 0; i < m; ++i) {
      double u = 0.01 + (14.0 - 0.01) * i / (m - 1.0);
      double d = dpsi(u);
      if (i > 0) acc += 0.5 * (d + prev_d) * (u - prev_u);
      tab.u(i) = u;
      tab.psi(i) = acc;
      prev_u = u;
      prev_d = d;
    }
    tb.constraint = tab;
    tb.multiplier = 0.5;
    return std::pair<AllocationProblem, AllocationResult>(tb, solve_general(tb));
  };
  auto [tb1, res1] = jump_study(n_nodes);
  auto [tb2, res2] = jump_study(2 * n_nodes);
  write_allocation_csv(em.path("profile_two_branch.csv"), tb1, res1);
  em.artifacts.push_back("profile_two_branch.csv");

  Json metrics;
  metrics["power_law_max_rel_err"] = pl_err;
  metrics["entropic_max_rel_err"] = en_err;
  metrics["jumps_coarse"] = res1.jump_nodes.size();
  metrics["jumps_fine"] = res2.jump_nodes.size();
  if (!res1.jump_nodes.empty()) metrics["jump_x_coarse"] = tb1.x(res1.jump_nodes[0]);
  if (!res2.jump_nodes.empty()) metrics["jump_x_fine"] = tb2.x(res2.jump_nodes[0]);
  em.json("allocate_metrics.json", metrics);
  return metrics;
}

Json biasvar_run(const Json& cfg, Emitter& em) {
  uint64_t seed = cfg_seed(cfg);
  Train2dConfig tc;
  tc.epochs = cfg_get<int>(cfg, "epochs", 150);
  MLPModel net;
  if (cfg.contains("checkpoint")) {
    net = net_from_json(Json::parse(read_text_file(cfg.at("checkpoint"))));
  } else {
    net = run_train2d(seed, tc).net;
  }
  CategoryModel model = three_gaussian_model();

  MCConfig mc;
  mc.outer_samples = cfg_get<long>(cfg, "outer_samples", 20000);
  mc.inner_samples = cfg_get<long>(cfg, "inner_samples", 200);
  mc.seed = derive_seed(seed, 0xb1a5);

  CostDecomposition dec = decompose_cost(model, net, mc);
  BiasVariance bv = bias_variance(model, net, mc);

  MLPModel small = net;
  small.sigma = cfg_get<double>(cfg, "sigma_small", 0.02);
  MCConfig mcs = mc;
  mcs.outer_samples = cfg_get<long>(cfg, "small_outer_samples", 4000);
  mcs.inner_samples = cfg_get<long>(cfg, "small_inner_samples", 400);
  BiasVariance bvs = bias_variance(model, small, mcs);

  Json metrics;
  metrics["total"] = dec.total;
  metrics["total_se"] = dec.total_se;
  metrics["coding"] = dec.coding;
  metrics["coding_se"] = dec.coding_se;
  metrics["decoding"] = dec.decoding;
  metrics["decoding_se"] = dec.decoding_se;
  metrics["decoding_direct"] = dec.decoding_direct;
  metrics["decoding_direct_se"] = dec.decoding_direct_se;
  metrics["iyx"] = dec.iyx.estimate;
  metrics["manifold"] = bv.manifold;
  metrics["manifold_se"] = bv.manifold_se;
  metrics["bias"] = bv.bias;
  metrics["bias_se"] = bv.bias_se;
  metrics["variance"] = bv.variance;
  metrics["variance_se"] = bv.variance_se;
  metrics["bv_total"] = bv.total;
  metrics["bv_total_se"] = bv.total_se;
  metrics["small_sigma"] = small.sigma;
  metrics["small_variance"] = bvs.variance;
  metrics["small_band_lo"] = bvs.band_lo;
  metrics["small_band_hi"] = bvs.band_hi;
  metrics["small_eps_max"] = bvs.eps_max;
  em.json("biasvar_metrics.json", metrics);
  return metrics;
}

}  // namespace

std::vector<std::string> scenario_names() {
  return {"gauss1d", "pdc2d",     "fcat-field", "fcode-field", "train2d",
          "continuum", "mi-validate", "allocate",  "biasvar"};
}

Json default_scenario_config(const std::string& name) {
  Json cfg;
  cfg["seed"] = 1;
  if (name == "gauss1d") {
    cfg["a_values"] = {1.0, 1.5, 2.0};
    cfg["sigma_values"] = {0.6, 1.0};
    cfg["c"] = 1.0;
  } else if (name == "pdc2d") {
    cfg["a"] = 1.2;
    cfg["sigma"] = 1.3;
    cfg["n_pdcs"] = 12;
  } else if (name == "mi-validate") {
    cfg["n_units"] = {64, 128, 256, 512};
    cfg["outer_samples"] = 100000;
  } else if (name == "allocate") {
    cfg["n_nodes"] = 1000;
  } else if (name == "train2d" || name == "fcode-field") {
    cfg["epochs"] = 300;
  } else if (name == "continuum") {
    cfg["epochs"] = 300;
    cfg["ambient_dim"] = 16;
  } else if (name == "biasvar") {
    cfg["epochs"] = 150;
  }
  return cfg;
}

ScenarioResult run_scenario(const std::string& name, const Json& config,
                            const std::string& out_dir) {
  fs::create_directories(out_dir);
  Emitter em;
  em.dir = out_dir;

  ScenarioResult result;
  try {
    if (name == "gauss1d") {
      result.metrics = gauss1d_run(config, em);
    } else if (name == "pdc2d") {
      result.metrics = pdc2d_run(config, em);
    } else if (name == "fcat-field") {
      result.metrics = fcat_field_run(config, em);
    } else if (name == "fcode-field") {
      result.metrics = fcode_field_run(config, em);
    } else if (name == "train2d") {
      result.metrics = train2d_scenario(config, em);
    } else if (name == "continuum") {
      result.metrics = continuum_scenario(config, em);
    } else if (name == "mi-validate") {
      result.metrics = mi_validate_run(config, em);
    } else if (name == "allocate") {
      result.metrics = allocate_run(config, em);
    } else if (name == "biasvar") {
      result.metrics = biasvar_run(config, em);
    } else {
      fail("ConfigError", "unknown scenario " + name);
    }
  } catch (const Error& e) {
    Json err;
    err["error"] = e.code();
    err["message"] = e.what();
    write_text_file(out_dir + "/error.json", err.dump(2) + "\n");
    result.exit_code = e.code() == "ConfigError" || e.code() == "IoError" ? 2 : 3;
    return result;
  }

  Json manifest;
  manifest["scenario"] = name;
  manifest["config"] = config;
  manifest["config_digest"] = digest_hex(name + ":" + config.dump());
  manifest["seed"] = cfg_seed(config);
  manifest["version"] = "catgeo 1.0";
  manifest["artifacts"] = em.artifacts;
  manifest["generated_at"] = static_cast<long>(std::time(nullptr));
  write_text_file(out_dir + "/manifest.json", manifest.dump(2) + "\n");
  result.artifacts = em.artifacts;
  return result;
}

}  // namespace catgeo
