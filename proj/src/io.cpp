#include "catgeo/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace catgeo {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string digest_hex(const std::string& s) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a(s)));
  return buf;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("IoError", "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("IoError", "cannot write " + path);
  out << content;
  if (!out) fail("IoError", "write failed for " + path);
}

namespace {

Json vec_to_json(const Vec& v) {
  Json a = Json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Vec vec_from_json(const Json& a) {
  Vec v(a.size());
  for (size_t i = 0; i < a.size(); ++i) v(static_cast<long>(i)) = a[i].get<double>();
  return v;
}

Json mat_to_json(const Mat& m) {
  Json rows = Json::array();
  for (int i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

Mat mat_from_json(const Json& rows) {
  size_t r = rows.size();
  size_t c = r ? rows[0].size() : 0;
  Mat m(r, c);
  for (size_t i = 0; i < r; ++i)
    for (size_t j = 0; j < c; ++j) m(static_cast<long>(i), static_cast<long>(j)) = rows[i][j].get<double>();
  return m;
}

}  // namespace

Json model_to_json(const CategoryModel& model) {
  Json j;
  j["dim"] = model.dim();
  j["priors"] = vec_to_json(model.priors());
  Json comps = Json::array();
  for (const auto& c : model.components()) {
    Json jc;
    if (const auto* g = std::get_if<GaussianComponent>(&c)) {
      jc["type"] = "gaussian";
      jc["mean"] = vec_to_json(g->mean);
      jc["cov"] = mat_to_json(g->cov);
    } else {
      const auto& e = std::get<ExpGaussComponent>(c);
      jc["type"] = "expgauss";
      jc["c1"] = e.c1;
      jc["tau"] = e.tau;
      jc["sigma2_sq"] = e.sigma2_sq;
    }
    comps.push_back(jc);
  }
  j["components"] = comps;
  return j;
}

CategoryModel model_from_json(const Json& j) {
  Vec priors = vec_from_json(j.at("priors"));
  std::vector<Component> comps;
  for (const auto& jc : j.at("components")) {
    std::string type = jc.at("type").get<std::string>();
    if (type == "gaussian") {
      comps.emplace_back(GaussianComponent(vec_from_json(jc.at("mean")),
                                           mat_from_json(jc.at("cov"))));
    } else if (type == "expgauss") {
      comps.emplace_back(ExpGaussComponent(jc.at("c1").get<double>(),
                                           jc.at("tau").get<double>(),
                                           jc.at("sigma2_sq").get<double>()));
    } else {
      fail("ConfigError", "unknown component type " + type);
    }
  }
  CategoryModel model(priors, std::move(comps));
  if (j.contains("dim") && j.at("dim").get<int>() != model.dim())
    fail("ConfigError", "dim field does not match components");
  return model;
}

namespace {

std::string family_name(NoiseFamily f) {
  switch (f) {
    case NoiseFamily::GaussianIID: return "gaussian_iid";
    case NoiseFamily::GaussianCorrelated: return "gaussian_correlated";
    case NoiseFamily::MultiplicativeGaussian: return "multiplicative_gaussian";
    case NoiseFamily::PoissonCount: return "poisson_count";
  }
  return "gaussian_iid";
}

NoiseFamily family_from_name(const std::string& s) {
  if (s == "gaussian_iid") return NoiseFamily::GaussianIID;
  if (s == "gaussian_correlated") return NoiseFamily::GaussianCorrelated;
  if (s == "multiplicative_gaussian") return NoiseFamily::MultiplicativeGaussian;
  if (s == "poisson_count") return NoiseFamily::PoissonCount;
  fail("ConfigError", "unknown noise family " + s);
}

std::string qtag_name(DensityTag q) {
  switch (q) {
    case DensityTag::Gaussian: return "gaussian";
    case DensityTag::Laplace: return "laplace";
    case DensityTag::StudentT: return "student_t";
  }
  return "gaussian";
}

DensityTag qtag_from_name(const std::string& s) {
  if (s == "gaussian") return DensityTag::Gaussian;
  if (s == "laplace") return DensityTag::Laplace;
  if (s == "student_t") return DensityTag::StudentT;
  fail("ConfigError", "unknown density tag " + s);
}

}  // namespace

Json code_to_json(const PopulationCode& code) {
  Json j;
  Json units = Json::array();
  for (const auto& u : code.units()) {
    Json ju;
    ju["center"] = vec_to_json(u.center);
    ju["width"] = u.width;
    ju["rmax"] = u.rmax;
    ju["family"] = u.family == CurveFamily::RadialBump ? "radial_bump" : "sigmoid_ramp";
    units.push_back(ju);
  }
  j["units"] = units;
  Json jn;
  const NoiseSpec& n = code.noise();
  jn["family"] = family_name(n.family);
  jn["sigma"] = n.sigma;
  jn["t"] = n.t;
  jn["qtag"] = qtag_name(n.qtag);
  jn["nu"] = n.nu;
  if (n.family == NoiseFamily::GaussianCorrelated) jn["corr"] = mat_to_json(n.corr);
  j["noise"] = jn;
  return j;
}

PopulationCode code_from_json(const Json& j) {
  std::vector<TuningUnit> units;
  for (const auto& ju : j.at("units")) {
    TuningUnit u;
    u.center = vec_from_json(ju.at("center"));
    u.width = ju.at("width").get<double>();
    u.rmax = ju.at("rmax").get<double>();
    std::string fam = ju.at("family").get<std::string>();
    if (fam == "radial_bump")
      u.family = CurveFamily::RadialBump;
    else if (fam == "sigmoid_ramp")
      u.family = CurveFamily::SigmoidRamp;
    else
      fail("ConfigError", "unknown curve family " + fam);
    units.push_back(std::move(u));
  }
  const Json& jn = j.at("noise");
  NoiseSpec n;
  n.family = family_from_name(jn.at("family").get<std::string>());
  if (jn.contains("sigma")) n.sigma = jn.at("sigma").get<double>();
  if (jn.contains("t")) n.t = jn.at("t").get<double>();
  if (jn.contains("qtag")) n.qtag = qtag_from_name(jn.at("qtag").get<std::string>());
  if (jn.contains("nu")) n.nu = jn.at("nu").get<double>();
  if (jn.contains("corr")) n.corr = mat_from_json(jn.at("corr"));
  return PopulationCode(std::move(units), std::move(n));
}

Json net_to_json(const MLPModel& net) {
  Json j;
  j["layer_dims"] = net.layer_dims;
  j["activation"] = net.activation == Activation::Sigmoid ? "sigmoid" : "relu";
  j["noise_layer"] = net.noise_layer;
  j["sigma"] = net.sigma;
  switch (net.link) {
    case VarianceLink::Rate: j["link"] = "rate"; break;
    case VarianceLink::RateSquared: j["link"] = "rate_squared"; break;
    case VarianceLink::Additive: j["link"] = "additive"; break;
  }
  Json ws = Json::array(), bs = Json::array();
  for (int l = 0; l < net.num_layers(); ++l) {
    ws.push_back(mat_to_json(net.weights[l]));
    bs.push_back(vec_to_json(net.biases[l]));
  }
  j["weights"] = ws;
  j["biases"] = bs;
  return j;
}

MLPModel net_from_json(const Json& j) {
  MLPModel net;
  net.layer_dims = j.at("layer_dims").get<std::vector<int>>();
  std::string act = j.at("activation").get<std::string>();
  net.activation = act == "sigmoid" ? Activation::Sigmoid : Activation::Relu;
  net.noise_layer = j.at("noise_layer").get<int>();
  net.sigma = j.at("sigma").get<double>();
  std::string link = j.at("link").get<std::string>();
  if (link == "rate")
    net.link = VarianceLink::Rate;
  else if (link == "rate_squared")
    net.link = VarianceLink::RateSquared;
  else
    net.link = VarianceLink::Additive;
  for (const auto& w : j.at("weights")) net.weights.push_back(mat_from_json(w));
  for (const auto& b : j.at("biases")) net.biases.push_back(vec_from_json(b));
  return net;
}

void write_samples_csv(const std::string& path, const std::vector<Sample>& samples) {
  if (samples.empty()) fail("InvalidParameter", "no samples to write");
  std::ostringstream out;
  const int k = static_cast<int>(samples[0].x.size());
  for (int d = 0; d < k; ++d) out << "x_" << (d + 1) << ",";
  out << "y\n";
  for (const auto& s : samples) {
    for (int d = 0; d < k; ++d) out << format_double(s.x(d)) << ",";
    out << s.y << "\n";
  }
  write_text_file(path, out.str());
}

std::vector<Sample> read_samples_csv(const std::string& path) {
  std::istringstream in(read_text_file(path));
  std::string line;
  if (!std::getline(in, line)) fail("IoError", "empty csv " + path);
  int k = 0;
  for (char c : line)
    if (c == ',') ++k;  // x_1..x_K then y
  std::vector<Sample> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    Sample s;
    s.x = Vec(k);
    for (int d = 0; d < k; ++d) {
      std::getline(row, cell, ',');
      s.x(d) = std::stod(cell);
    }
    std::getline(row, cell, ',');
    s.y = std::stoi(cell);
    out.push_back(std::move(s));
  }
  return out;
}

void write_pdc_csv(const std::string& path, const CategoryModel& model,
                   const Polyline& pdc) {
  std::ostringstream out;
  const int k = model.dim();
  out << "arc_length";
  for (int d = 0; d < k; ++d) out << ",x_" << (d + 1);
  out << ",L,f_cat\n";
  for (size_t i = 0; i < pdc.size(); ++i) {
    out << format_double(pdc.arc_lengths[i]);
    for (int d = 0; d < k; ++d) out << "," << format_double(pdc.points[i](d));
    out << "," << format_double(model.log_odds(pdc.points[i]));
    out << "," << format_double(fcat_eigenvalue(model, pdc.points[i]));
    out << "\n";
  }
  write_text_file(path, out.str());
}

void write_fisher_field_csv(const std::string& path, const std::vector<Vec>& nodes,
                            const std::vector<FisherMatrix>& fields) {
  if (nodes.size() != fields.size() || nodes.empty())
    fail("InvalidParameter", "nodes and fields must align");
  const int k = static_cast<int>(nodes[0].size());
  std::ostringstream out;
  for (int d = 0; d < k; ++d) out << (d ? "," : "") << "x_" << (d + 1);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) out << ",F_" << (i + 1) << (j + 1);
  for (int i = 0; i < k; ++i) out << ",lambda_" << (i + 1);
  out << "\n";
  for (size_t n = 0; n < nodes.size(); ++n) {
    for (int d = 0; d < k; ++d) out << (d ? "," : "") << format_double(nodes[n](d));
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j) out << "," << format_double(fields[n].entries(i, j));
    for (int i = 0; i < k; ++i) out << "," << format_double(fields[n].eigenvalues(i));
    out << "\n";
  }
  write_text_file(path, out.str());
}

void write_allocation_csv(const std::string& path, const AllocationProblem& problem,
                          const AllocationResult& result) {
  std::ostringstream out;
  out << "x,p,fcat,fcode,branch_id\n";
  for (long i = 0; i < problem.x.size(); ++i) {
    out << format_double(problem.x(i)) << "," << format_double(problem.p(i)) << ","
        << format_double(problem.fcat(i)) << "," << format_double(result.fcode(i)) << ","
        << result.branch_id[i] << "\n";
  }
  write_text_file(path, out.str());
}

Json mi_result_to_json(const MIResult& r, const std::string& config_digest) {
  Json j;
  j["estimate"] = r.estimate;
  j["std_err"] = r.std_err;
  j["nats"] = true;
  j["config_digest"] = config_digest;
  if (!r.flags.empty()) j["flags"] = r.flags;
  return j;
}

}  // namespace catgeo
