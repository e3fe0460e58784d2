#include "catgeo/fisher_matrix.hpp"

#include <algorithm>
#include <cmath>

namespace catgeo {

FisherMatrix FisherMatrix::from_matrix(const Mat& m, Flags flags) {
  if (m.rows() != m.cols()) fail("DimMismatch", "Fisher matrix must be square");
  const int k = static_cast<int>(m.rows());
  double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-10 * scale) fail("NotSymmetric", "asymmetry " + std::to_string(asym));

  Mat sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(sym);
  Vec evals = es.eigenvalues();  // ascending
  Mat evecs = es.eigenvectors();

  FisherMatrix f;
  f.dim = k;
  f.entries = sym;
  f.eigenvalues = Vec(k);
  f.eigenvectors = Mat(k, k);
  for (int i = 0; i < k; ++i) {
    f.eigenvalues(i) = evals(k - 1 - i);
    f.eigenvectors.col(i) = evecs.col(k - 1 - i);
  }
  f.flags = std::move(flags);

  double top = std::max(f.eigenvalues(0), 0.0);
  double psd_tol = 1e-10 * std::max(1.0, top);
  if (f.eigenvalues(k - 1) < -psd_tol)
    fail("NotPSD", "min eigenvalue " + std::to_string(f.eigenvalues(k - 1)));
  return f;
}

int FisherMatrix::rank(double rel_tol, double abs_floor) const {
  if (dim == 0) return 0;
  double top = eigenvalues(0);
  if (!(top > 0.0)) return 0;
  double thresh = std::max(rel_tol * top, abs_floor);
  int r = 0;
  for (int i = 0; i < dim; ++i)
    if (eigenvalues(i) > thresh) ++r;
  return r;
}

void Polyline::push(const Vec& p) {
  if (points.empty()) {
    points.push_back(p);
    arc_lengths.push_back(0.0);
    return;
  }
  double d = (p - points.back()).norm();
  if (!(d > 0.0)) fail("DegeneratePolyline", "consecutive points must be distinct");
  points.push_back(p);
  arc_lengths.push_back(arc_lengths.back() + d);
}

Vec Polyline::at_arc(double s) const {
  if (points.empty()) fail("DegeneratePolyline", "empty polyline");
  if (s <= arc_lengths.front()) return points.front();
  if (s >= arc_lengths.back()) return points.back();
  auto it = std::upper_bound(arc_lengths.begin(), arc_lengths.end(), s);
  size_t hi = static_cast<size_t>(it - arc_lengths.begin());
  size_t lo = hi - 1;
  double t = (s - arc_lengths[lo]) / (arc_lengths[hi] - arc_lengths[lo]);
  return points[lo] + t * (points[hi] - points[lo]);
}

}  // namespace catgeo
