#pragma once

#include "cgpdf/cg_filter.hpp"
#include "cgpdf/density.hpp"
#include "cgpdf/kde.hpp"

#include <cstddef>
#include <random>
#include <vector>

namespace cgpdf {

/// Equally weighted mixture of L Gaussians with block-diagonal covariances
/// blockdiag(diag(H), R_i). Variables are ordered observed block first.
struct GaussianMixture {
  std::size_t n_obs = 0;
  std::size_t n_hid = 0;
  Matrix means;                  // L x (n_obs + n_hid)
  Vector H;                      // n_obs squared bandwidths, shared by all components
  std::vector<Matrix> hid_cov;   // L matrices of n_hid x n_hid
  double t = 0.0;

  std::size_t components() const { return static_cast<std::size_t>(means.rows()); }
  std::size_t dims() const { return n_obs + n_hid; }
  double weight() const { return 1.0 / static_cast<double>(components()); }
  /// Full covariance of component i.
  Matrix component_cov(std::size_t i) const;
};

/// Component i gets mean (uI_i, mean_i) and covariance blockdiag(H, cov_i).
GaussianMixture assemble_joint(const Matrix& uI_endpoints, const BandwidthMatrix& H,
                               const std::vector<ConditionalGaussianState>& hid_states);

/// Sub-block selection. `dims` index the joint variables; observed indices must
/// precede hidden ones so the block structure is preserved.
GaussianMixture marginal(const GaussianMixture& mix, const std::vector<std::size_t>& dims);

/// Mixture density tabulated on a grid of matching dimension (at most 3).
/// Each component contributes only within 8 of its marginal standard
/// deviations along every axis.
DensityField evaluate_on_grid(const GaussianMixture& mix, const GridSpec& grid);

/// Density at arbitrary points (rows of `points`).
Vector evaluate_points(const GaussianMixture& mix, const Matrix& points);

struct Moments {
  double mean = 0.0;
  double variance = 0.0;
  double skewness = 0.0;
  double kurtosis = 0.0;  // non-excess, Gaussian = 3
};

/// Closed-form 1D moments of the mixture marginal along `dim`.
Moments mixture_moments(const GaussianMixture& mix, std::size_t dim);

Vector mixture_mean(const GaussianMixture& mix);
/// Average component covariance plus covariance of the component means.
Matrix mixture_covariance(const GaussianMixture& mix);

/// n draws from the mixture, one per row.
Matrix sample_mixture(const GaussianMixture& mix, std::size_t n, std::mt19937_64& rng);

}  // namespace cgpdf
