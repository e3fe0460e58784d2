#include "catgeo/neurocode.hpp"

#include <cmath>

#include "catgeo/parallel.hpp"

namespace catgeo {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kRateFloor = 1e-9;
constexpr double kLaplaceB = 0.70710678118654752440;  // unit-variance scale

double student_scale(double nu) { return std::sqrt((nu - 2.0) / nu); }

double log_q(double z, DensityTag tag, double nu) {
  switch (tag) {
    case DensityTag::Gaussian:
      return -0.5 * z * z - 0.5 * kLog2Pi;
    case DensityTag::Laplace:
      return -std::abs(z) / kLaplaceB - std::log(2.0 * kLaplaceB);
    case DensityTag::StudentT: {
      double s = student_scale(nu);
      double c = std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
                 0.5 * std::log(nu * M_PI) - std::log(s);
      return c - 0.5 * (nu + 1.0) * std::log1p(z * z / (nu * s * s));
    }
  }
  return 0.0;
}

// d/dz ln Q(z)
double dlog_q(double z, DensityTag tag, double nu) {
  switch (tag) {
    case DensityTag::Gaussian:
      return -z;
    case DensityTag::Laplace:
      return z >= 0.0 ? -1.0 / kLaplaceB : 1.0 / kLaplaceB;
    case DensityTag::StudentT: {
      double s = student_scale(nu);
      return -(nu + 1.0) * z / (nu * s * s + z * z);
    }
  }
  return 0.0;
}

double sample_q(RngEngine& rng, DensityTag tag, double nu) {
  switch (tag) {
    case DensityTag::Gaussian: {
      std::normal_distribution<double> gauss(0.0, 1.0);
      return gauss(rng);
    }
    case DensityTag::Laplace: {
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      std::exponential_distribution<double> expo(1.0);
      double sign = unif(rng) < 0.5 ? -1.0 : 1.0;
      return sign * kLaplaceB * expo(rng);
    }
    case DensityTag::StudentT: {
      std::student_t_distribution<double> st(nu);
      return student_scale(nu) * st(rng);
    }
  }
  return 0.0;
}

double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double fa, double fm, double fb, double whole, double tol,
                        int depth) {
  double m = 0.5 * (a + b);
  double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  double flm = f(lm), frm = f(rm);
  double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol)
    return left + right + (left + right - whole) / 15.0;
  return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

double integrate(const std::function<double(double)>& f, double a, double b, double tol) {
  double m = 0.5 * (a + b);
  double fa = f(a), fm = f(m), fb = f(b);
  double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return adaptive_simpson(f, a, b, fa, fm, fb, whole, tol, 48);
}

}  // namespace

double fq_of_density_quadrature(DensityTag tag, double nu) {
  if (tag == DensityTag::StudentT && !(nu > 2.0))
    fail("NonSmoothDensity", "Student-t needs nu > 2 for unit variance");
  auto integrand = [&](double z) {
    double d = dlog_q(z, tag, nu);
    return d * d * std::exp(log_q(z, tag, nu));
  };
  // The Laplace score is discontinuous at 0; split the domain there.
  const double T = 12.0;
  return integrate(integrand, -T, 0.0, 1e-12) + integrate(integrand, 0.0, T, 1e-12);
}

double fq_of_density(DensityTag tag, double nu) {
  switch (tag) {
    case DensityTag::Gaussian:
      return 1.0;  // exact reference value; quadrature is cross-checked in tests
    case DensityTag::Laplace:
    case DensityTag::StudentT:
      return fq_of_density_quadrature(tag, nu);
  }
  return 1.0;
}

void NoiseSpec::validate(int n_units) const {
  switch (family) {
    case NoiseFamily::GaussianIID:
      if (!(sigma > 0.0)) fail("InvalidParameter", "sigma must be positive");
      if (qtag == DensityTag::StudentT && !(nu > 2.0))
        fail("InvalidParameter", "Student-t noise needs nu > 2");
      break;
    case NoiseFamily::GaussianCorrelated: {
      if (!(sigma > 0.0)) fail("InvalidParameter", "sigma must be positive");
      if (qtag != DensityTag::Gaussian)
        fail("Unsupported", "correlated noise is Gaussian only");
      if (corr.rows() != n_units || corr.cols() != n_units)
        fail("DimMismatch", "correlation matrix must be N x N");
      if ((corr - corr.transpose()).cwiseAbs().maxCoeff() > 1e-12)
        fail("NotSymmetric", "correlation matrix must be symmetric");
      for (int i = 0; i < n_units; ++i)
        if (std::abs(corr(i, i) - 1.0) > 1e-12)
          fail("InvalidParameter", "correlation matrix must have unit diagonal");
      Eigen::LLT<Mat> llt(corr);
      if (llt.info() != Eigen::Success)
        fail("NotPositiveDefinite", "correlation matrix must be positive definite");
      break;
    }
    case NoiseFamily::MultiplicativeGaussian:
      if (!(sigma > 0.0)) fail("InvalidParameter", "sigma must be positive");
      if (qtag != DensityTag::Gaussian)
        fail("Unsupported", "multiplicative noise is Gaussian only");
      break;
    case NoiseFamily::PoissonCount:
      if (!(t > 0.0)) fail("InvalidParameter", "t must be positive");
      break;
  }
}

PopulationCode::PopulationCode(std::vector<TuningUnit> units, NoiseSpec noise)
    : units_(std::move(units)), noise_(std::move(noise)) {
  if (units_.empty()) fail("InvalidParameter", "need at least one unit");
  dim_ = static_cast<int>(units_[0].center.size());
  for (const auto& u : units_) {
    if (u.center.size() != dim_) fail("DimMismatch", "unit centers must share a dimension");
    if (!(u.width > 0.0)) fail("InvalidParameter", "unit width must be positive");
    if (!(u.rmax > 0.0)) fail("InvalidParameter", "unit max rate must be positive");
  }
  noise_.validate(num_units());
  if (noise_.family == NoiseFamily::GaussianCorrelated) {
    Eigen::LLT<Mat> llt(noise_.corr);
    corr_chol_ = llt.matrixL();
    corr_inv_ = llt.solve(Mat::Identity(num_units(), num_units()));
  }
}

Vec PopulationCode::mean_response(const Vec& x) const {
  if (x.size() != dim_) fail("DimMismatch", "x has wrong dimension");
  Vec f(num_units());
  for (int i = 0; i < num_units(); ++i) {
    const auto& u = units_[i];
    if (u.family == CurveFamily::RadialBump) {
      f(i) = u.rmax * std::exp(-0.5 * (x - u.center).squaredNorm() / (u.width * u.width));
    } else {
      double arg = (x - u.center).sum() / u.width;
      f(i) = u.rmax / (1.0 + std::exp(-arg));
    }
  }
  return f;
}

Mat PopulationCode::response_jacobian(const Vec& x) const {
  if (x.size() != dim_) fail("DimMismatch", "x has wrong dimension");
  Mat j(num_units(), dim_);
  for (int i = 0; i < num_units(); ++i) {
    const auto& u = units_[i];
    if (u.family == CurveFamily::RadialBump) {
      double f = u.rmax * std::exp(-0.5 * (x - u.center).squaredNorm() / (u.width * u.width));
      j.row(i) = (-f / (u.width * u.width)) * (x - u.center).transpose();
    } else {
      double arg = (x - u.center).sum() / u.width;
      double s = 1.0 / (1.0 + std::exp(-arg));
      double d = u.rmax * s * (1.0 - s) / u.width;
      j.row(i).setConstant(d);
    }
  }
  return j;
}

Vec PopulationCode::sample_response(const Vec& x, RngEngine& rng) const {
  Vec f = mean_response(x);
  const int n = num_units();
  Vec r(n);
  switch (noise_.family) {
    case NoiseFamily::GaussianIID:
      for (int i = 0; i < n; ++i)
        r(i) = f(i) + noise_.sigma * sample_q(rng, noise_.qtag, noise_.nu);
      break;
    case NoiseFamily::GaussianCorrelated: {
      std::normal_distribution<double> gauss(0.0, 1.0);
      Vec z(n);
      for (int i = 0; i < n; ++i) z(i) = gauss(rng);
      r = f + noise_.sigma * (corr_chol_ * z);
      break;
    }
    case NoiseFamily::MultiplicativeGaussian: {
      if (f.minCoeff() < 0.0) fail("NegativeRate", "multiplicative noise needs f >= 0");
      std::normal_distribution<double> gauss(0.0, 1.0);
      for (int i = 0; i < n; ++i)
        r(i) = f(i) + noise_.sigma * std::sqrt(f(i)) * gauss(rng);
      break;
    }
    case NoiseFamily::PoissonCount:
      for (int i = 0; i < n; ++i) {
        double lam = noise_.t * f(i);
        if (lam < 1e-12) {
          r(i) = 0.0;
        } else {
          std::poisson_distribution<long> pois(lam);
          r(i) = static_cast<double>(pois(rng));
        }
      }
      break;
  }
  return r;
}

double PopulationCode::log_density_from_mean(const Vec& r, const Vec& f) const {
  const int n = num_units();
  double lp = 0.0;
  switch (noise_.family) {
    case NoiseFamily::GaussianIID:
      for (int i = 0; i < n; ++i)
        lp += log_q((r(i) - f(i)) / noise_.sigma, noise_.qtag, noise_.nu);
      lp -= n * std::log(noise_.sigma);
      break;
    case NoiseFamily::GaussianCorrelated: {
      Vec z = (r - f) / noise_.sigma;
      Vec w = corr_chol_.triangularView<Eigen::Lower>().solve(z);
      double log_det = 0.0;
      for (int i = 0; i < n; ++i) log_det += std::log(corr_chol_(i, i));
      lp = -0.5 * w.squaredNorm() - 0.5 * n * kLog2Pi - n * std::log(noise_.sigma) - log_det;
      break;
    }
    case NoiseFamily::MultiplicativeGaussian:
      for (int i = 0; i < n; ++i) {
        // rate floor keeps the density finite and consistent across nodes
        double fi = std::max(f(i), kRateFloor);
        double v = noise_.sigma * noise_.sigma * fi;
        lp += -0.5 * (r(i) - fi) * (r(i) - fi) / v - 0.5 * (kLog2Pi + std::log(v));
      }
      break;
    case NoiseFamily::PoissonCount:
      for (int i = 0; i < n; ++i) {
        double lam = noise_.t * std::max(f(i), kRateFloor);
        lp += r(i) * std::log(lam) - lam - std::lgamma(r(i) + 1.0);
      }
      break;
  }
  return lp;
}

Vec PopulationCode::score(const Vec& r, const Vec& x) const {
  Vec f = mean_response(x);
  Mat j = response_jacobian(x);
  const int n = num_units();
  Vec s = Vec::Zero(dim_);
  switch (noise_.family) {
    case NoiseFamily::GaussianIID:
      for (int i = 0; i < n; ++i) {
        double z = (r(i) - f(i)) / noise_.sigma;
        s -= dlog_q(z, noise_.qtag, noise_.nu) / noise_.sigma * j.row(i).transpose();
      }
      break;
    case NoiseFamily::GaussianCorrelated: {
      Vec z = (r - f) / noise_.sigma;
      s = j.transpose() * (corr_inv_ * z) / noise_.sigma;
      break;
    }
    case NoiseFamily::MultiplicativeGaussian:
      for (int i = 0; i < n; ++i) {
        if (f(i) < kRateFloor) continue;
        double s2 = noise_.sigma * noise_.sigma;
        double d = r(i) - f(i);
        double coeff = d / (s2 * f(i)) + d * d / (2.0 * s2 * f(i) * f(i)) - 0.5 / f(i);
        s += coeff * j.row(i).transpose();
      }
      break;
    case NoiseFamily::PoissonCount:
      // closed-form log-pmf derivative, exact at integer counts
      for (int i = 0; i < n; ++i) {
        if (f(i) < kRateFloor) continue;
        s += (r(i) / f(i) - noise_.t) * j.row(i).transpose();
      }
      break;
  }
  return s;
}

FisherMatrix PopulationCode::fisher(const Vec& x) const {
  Vec f = mean_response(x);
  Mat j = response_jacobian(x);
  const int n = num_units();
  Flags flags;
  Mat out = Mat::Zero(dim_, dim_);
  switch (noise_.family) {
    case NoiseFamily::GaussianIID: {
      double fq = fq_of_density(noise_.qtag, noise_.nu);
      out = (fq / (noise_.sigma * noise_.sigma)) * (j.transpose() * j);
      break;
    }
    case NoiseFamily::GaussianCorrelated:
      out = (j.transpose() * corr_inv_ * j) / (noise_.sigma * noise_.sigma);
      break;
    case NoiseFamily::MultiplicativeGaussian:
      for (int i = 0; i < n; ++i) {
        if (f(i) < kRateFloor) {
          add_flag(flags, "RateUnderflow");
          continue;
        }
        double w = 1.0 / (noise_.sigma * noise_.sigma * f(i)) + 0.5 / (f(i) * f(i));
        out.noalias() += w * j.row(i).transpose() * j.row(i);
      }
      break;
    case NoiseFamily::PoissonCount:
      for (int i = 0; i < n; ++i) {
        if (f(i) < kRateFloor) {
          add_flag(flags, "RateUnderflow");
          continue;
        }
        out.noalias() += (noise_.t / f(i)) * j.row(i).transpose() * j.row(i);
      }
      break;
  }
  FisherMatrix fm = FisherMatrix::from_matrix(out, std::move(flags));
  if (fm.rank(1e-10) < dim_) add_flag(fm.flags, "SingularFisher");
  return fm;
}

CodingModel::GridEvaluator CodingModel::grid_evaluator(const std::vector<Vec>& nodes) const {
  auto means = std::make_shared<std::vector<Vec>>();
  means->reserve(nodes.size());
  for (const auto& x : nodes) means->push_back(mean_response(x));
  return [this, means](const Vec& r, Vec& ll) {
    ll.resize(static_cast<long>(means->size()));
    for (size_t i = 0; i < means->size(); ++i)
      ll(static_cast<long>(i)) = log_density_from_mean(r, (*means)[i]);
  };
}

CodingModel::GridEvaluator PopulationCode::grid_evaluator(const std::vector<Vec>& nodes) const {
  const long G = static_cast<long>(nodes.size());
  const int N = num_units();
  Mat means(G, N);
  for (long i = 0; i < G; ++i) means.row(i) = mean_response(nodes[i]).transpose();

  // ln P(r|x_i) is bilinear in (r, r^2) for the Gaussian-type and Poisson
  // families: ll = A r^2 + B r + c, one GEMV per response.
  switch (noise_.family) {
    case NoiseFamily::GaussianIID: {
      if (noise_.qtag != DensityTag::Gaussian) break;  // fall back below
      double inv2s2 = 0.5 / (noise_.sigma * noise_.sigma);
      auto b = std::make_shared<Mat>((2.0 * inv2s2) * means);
      auto c = std::make_shared<Vec>(Vec(G));
      double cst = -N * (0.5 * kLog2Pi + std::log(noise_.sigma));
      for (long i = 0; i < G; ++i)
        (*c)(i) = cst - inv2s2 * means.row(i).squaredNorm();
      return [b, c, inv2s2](const Vec& r, Vec& ll) {
        ll = (*b) * r + *c;
        ll.array() -= inv2s2 * r.squaredNorm();
      };
    }
    case NoiseFamily::GaussianCorrelated: {
      double inv2s2 = 0.5 / (noise_.sigma * noise_.sigma);
      auto lchol = std::make_shared<Mat>(corr_chol_);
      Mat wf(G, N);
      for (long i = 0; i < G; ++i)
        wf.row(i) = corr_chol_.triangularView<Eigen::Lower>()
                        .solve(means.row(i).transpose())
                        .transpose();
      double log_det = 0.0;
      for (int i = 0; i < N; ++i) log_det += std::log(corr_chol_(i, i));
      double cst = -0.5 * N * kLog2Pi - N * std::log(noise_.sigma) - log_det;
      auto b = std::make_shared<Mat>((2.0 * inv2s2) * wf);
      auto c = std::make_shared<Vec>(Vec(G));
      for (long i = 0; i < G; ++i) (*c)(i) = cst - inv2s2 * wf.row(i).squaredNorm();
      return [b, c, lchol, inv2s2](const Vec& r, Vec& ll) {
        Vec wr = lchol->triangularView<Eigen::Lower>().solve(r);
        ll = (*b) * wr + *c;
        ll.array() -= inv2s2 * wr.squaredNorm();
      };
    }
    case NoiseFamily::MultiplicativeGaussian: {
      double s2 = noise_.sigma * noise_.sigma;
      auto a = std::make_shared<Mat>(Mat::Zero(G, N));
      auto b = std::make_shared<Mat>(Mat::Zero(G, N));
      auto c = std::make_shared<Vec>(Vec::Zero(G));
      for (long i = 0; i < G; ++i) {
        for (int u = 0; u < N; ++u) {
          double f = std::max(means(i, u), kRateFloor);
          double v = s2 * f;
          (*a)(i, u) = -0.5 / v;
          (*b)(i, u) = f / v;
          (*c)(i) += -0.5 * f * f / v - 0.5 * (kLog2Pi + std::log(v));
        }
      }
      return [a, b, c](const Vec& r, Vec& ll) {
        ll = (*a) * r.cwiseProduct(r) + (*b) * r + *c;
      };
    }
    case NoiseFamily::PoissonCount: {
      auto b = std::make_shared<Mat>(Mat::Zero(G, N));
      auto c = std::make_shared<Vec>(Vec::Zero(G));
      for (long i = 0; i < G; ++i) {
        for (int u = 0; u < N; ++u) {
          double lam = noise_.t * std::max(means(i, u), kRateFloor);
          (*b)(i, u) = std::log(lam);
          (*c)(i) -= lam;
        }
      }
      return [b, c](const Vec& r, Vec& ll) {
        double lg = 0.0;
        for (int u = 0; u < r.size(); ++u) lg -= std::lgamma(r(u) + 1.0);
        ll = (*b) * r + *c;
        ll.array() += lg;
      };
    }
  }
  return CodingModel::grid_evaluator(nodes);
}

FisherMatrix fisher_code(const CodingModel& code, const Vec& x) { return code.fisher(x); }

FisherMatrix fisher_code_numeric(const CodingModel& code, const Vec& x,
                                 const MCFisherConfig& mc) {
  const int k = code.input_dim();
  long chunk = mc.chunk_size > 0 ? mc.chunk_size : 4096;
  int n_chunks = static_cast<int>((mc.samples + chunk - 1) / chunk);
  std::vector<Mat> outer(n_chunks);
  std::vector<Vec> sums(n_chunks);
  for_each_chunk(n_chunks, [&](int c) {
    long lo = static_cast<long>(c) * chunk;
    long hi = std::min(mc.samples, lo + chunk);
    RngEngine rng = make_engine(mc.seed, static_cast<uint64_t>(c));
    Mat acc = Mat::Zero(k, k);
    Vec sum = Vec::Zero(k);
    for (long i = lo; i < hi; ++i) {
      Vec r = code.sample_response(x, rng);
      Vec s = code.score(r, x);
      acc.noalias() += s * s.transpose();
      sum += s;
    }
    outer[c] = acc;
    sums[c] = sum;
  });
  Mat acc = Mat::Zero(k, k);
  Vec sum = Vec::Zero(k);
  for (int c = 0; c < n_chunks; ++c) {
    acc += outer[c];
    sum += sums[c];
  }
  double n = static_cast<double>(mc.samples);
  Mat cov = acc / n - (sum / n) * (sum / n).transpose();
  return FisherMatrix::from_matrix(0.5 * (cov + cov.transpose()));
}

FisherMatrix pushforward_fisher(const FisherMatrix& f, const Mat& jacobian) {
  if (jacobian.rows() != f.dim)
    fail("DimMismatch", "jacobian must have K rows matching the Fisher matrix");
  Mat out = jacobian.transpose() * f.entries * jacobian;
  return FisherMatrix::from_matrix(0.5 * (out + out.transpose()), f.flags);
}

Vec sample_response(const CodingModel& code, const Vec& x, uint64_t seed) {
  RngEngine rng = make_engine(seed);
  return code.sample_response(x, rng);
}

PopulationCode dense_sigmoid_code_1d(int n_units, double lo, double hi, double width,
                                     double rmax, NoiseSpec noise) {
  std::vector<TuningUnit> units(n_units);
  for (int i = 0; i < n_units; ++i) {
    Vec c(1);
    c << (n_units == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * i / (n_units - 1.0));
    units[i] = {c, width, rmax, CurveFamily::SigmoidRamp};
  }
  return PopulationCode(std::move(units), std::move(noise));
}

PopulationCode bump_grid_code_2d(int per_side, double lo, double hi, double width,
                                 double rmax, NoiseSpec noise) {
  std::vector<TuningUnit> units;
  units.reserve(static_cast<size_t>(per_side) * per_side);
  for (int i = 0; i < per_side; ++i) {
    for (int j = 0; j < per_side; ++j) {
      Vec c(2);
      c << lo + (hi - lo) * i / (per_side - 1.0), lo + (hi - lo) * j / (per_side - 1.0);
      units.push_back({c, width, rmax, CurveFamily::RadialBump});
    }
  }
  return PopulationCode(std::move(units), std::move(noise));
}

}  // namespace catgeo
