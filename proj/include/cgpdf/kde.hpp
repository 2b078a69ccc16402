#pragma once

#include "cgpdf/density.hpp"
#include "cgpdf/types.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace cgpdf {

/// Outcome of the 1D plug-in bandwidth search.
struct Bandwidth1D {
  double h = 0.0;
  /// The fixed-point equation had no bracketed root; h is the
  /// Gaussian-reference value sd * (4 / (3 L))^(1/5).
  bool fallback = false;
};

/// Diagonal kernel covariance H; `diag` holds squared bandwidths.
struct BandwidthMatrix {
  Vector diag;
  std::vector<bool> fallback;

  std::size_t dims() const { return static_cast<std::size_t>(diag.size()); }
};

inline constexpr std::size_t kMaxKdeDims = 3;

/// Gaussian-reference bandwidth sd * (4 / (3 L))^(1/5), sd the population
/// standard deviation.
double gaussian_reference_bandwidth(std::span<const double> samples);

/// Solve-the-equation plug-in bandwidth for a Gaussian kernel. The curvature
/// functional is estimated by a fixed-point iteration on a discrete cosine
/// representation of the binned data (2^12 bins, range padded by 10%).
Bandwidth1D solve_bandwidth_1d(std::span<const double> samples);

/// Per-dimension plug-in bandwidths, each rescaled by L^(1/5) * L^(-1/(d+4))
/// so that the squared entries decay like L^(-2/(d+4)). Rows are samples.
BandwidthMatrix bandwidth_diag(const Matrix& samples);

/// Kernel covariance for the observed block of the mixture: bandwidth_diag up to
/// three columns, independent 1D bandwidths per column beyond that.
BandwidthMatrix mixture_bandwidth(const Matrix& samples);

/// (1/L) sum_i N(q; sample_i, diag(H)) for every query row.
Vector kde_evaluate(const Matrix& samples, const BandwidthMatrix& H, const Matrix& queries);

/// The same estimator tabulated on a grid whose axes match the sample
/// columns. Kernels are truncated beyond 8 bandwidths.
DensityField kde_on_grid(const Matrix& samples, const BandwidthMatrix& H, const GridSpec& grid);

}  // namespace cgpdf
