#pragma once

#include "cgpdf/models.hpp"
#include "cgpdf/simulate.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace cgpdf {

/// Gaussian posterior N(mean, cov) of the hidden variables given one observed path.
struct ConditionalGaussianState {
  Vector mean;
  Matrix cov;
  double t = 0.0;
};

/// Covariance hygiene bookkeeping for one filter run.
struct FilterDiagnostics {
  /// Largest pre-clamp violation, -min_eigenvalue / trace, over all steps (0 if none).
  double max_negative_ratio = 0.0;
  std::size_t clamp_count = 0;
};

/// Explicit Euler step of the conditional Gaussian filter:
///
///   dm = (a0 + a1 m) dt + (R A1^T)(S_I S_I^T)^{-1} [duI - (A0 + A1 m) dt]
///   dR = {a1 R + R a1^T + S_II S_II^T - (R A1^T)(S_I S_I^T)^{-1}(R A1^T)^T} dt
///
/// with coefficients frozen at (t, uI_t). The returned covariance is exactly
/// symmetric and has no negative eigenvalues.
ConditionalGaussianState filter_step(const CGSystemSpec& spec,
                                     const ConditionalGaussianState& state, double t,
                                     const ConstVectorRef& uI_t, const ConstVectorRef& duI,
                                     double dt, FilterDiagnostics* diagnostics = nullptr);

struct FilterRun {
  std::vector<ConditionalGaussianState> states;  // one per requested snapshot
  FilterDiagnostics diagnostics;
};

/// Runs filter_step along one member of `paths` from its first time point,
/// using every `thinning`-th path point (effective step thinning * dt).
/// Snapshot times must lie on the thinned grid.
FilterRun run_filter(const CGSystemSpec& spec, const EnsemblePaths& paths, std::size_t member,
                     const ConditionalGaussianState& init,
                     const std::vector<double>& snapshot_times, std::size_t thinning = 1);

/// run_filter for every member (parallel over members). Result is indexed
/// [member][snapshot].
std::vector<FilterRun> run_filters(const CGSystemSpec& spec, const EnsemblePaths& paths,
                                   const std::vector<ConditionalGaussianState>& init,
                                   const std::vector<double>& snapshot_times,
                                   std::size_t thinning = 1);

struct FilterInit {
  enum class Mode { point_with_epsilon, kde_diagonal };
  Mode mode = Mode::point_with_epsilon;
  /// Point-mode covariance eps * I. When unset, eps_d = 1e-4 * max(var_d, 1e-6)
  /// per dimension, var_d the sample variance of the t = 0 hidden samples.
  std::optional<double> epsilon;
};

/// Per-member initial posteriors: mean = that member's hidden sample.
/// kde_diagonal mode uses diag(h_d^2) from the 1D plug-in bandwidth of each
/// hidden dimension; dimensions whose samples are degenerate (or L = 1) fall
/// back to the point-mode default.
std::vector<ConditionalGaussianState> init_states(const Matrix& uII_samples_at_0,
                                                  const FilterInit& init, double t0 = 0.0);

/// The point-mode default epsilon for one dimension's sample variance.
double default_point_epsilon(double sample_variance);

}  // namespace cgpdf
