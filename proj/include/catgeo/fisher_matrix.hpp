#pragma once

#include "catgeo/common.hpp"

namespace catgeo {

// Symmetric PSD matrix with cached eigendecomposition (eigenvalues in
// descending order, eigenvectors as orthonormal columns). Used for both the
// categorical and the neural Fisher information.
struct FisherMatrix {
  int dim = 0;
  Mat entries;
  Vec eigenvalues;
  Mat eigenvectors;
  Flags flags;

  // Validates symmetry and positive semi-definiteness (up to round-off,
  // relative to the top eigenvalue for badly scaled matrices).
  static FisherMatrix from_matrix(const Mat& m, Flags flags = {});

  // Number of eigenvalues above max(rel_tol * lambda_max, abs_floor).
  int rank(double rel_tol = 1e-8, double abs_floor = 0.0) const;

  const Vec top_eigenvector() const { return eigenvectors.col(0); }
  double top_eigenvalue() const { return eigenvalues(0); }
  double trace() const { return entries.trace(); }
};

// Ordered list of points with cumulative arc lengths; consecutive points are
// distinct and arc lengths strictly increase.
struct Polyline {
  std::vector<Vec> points;
  std::vector<double> arc_lengths;

  void push(const Vec& p);
  double total_arc() const { return arc_lengths.empty() ? 0.0 : arc_lengths.back(); }
  // Linear interpolation at arc length s (clamped to the ends).
  Vec at_arc(double s) const;
  size_t size() const { return points.size(); }
};

}  // namespace catgeo
