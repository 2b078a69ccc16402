#pragma once

#include "cgpdf/density.hpp"
#include "cgpdf/models.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace cgpdf {

/// Distribution of one state component at t = 0.
struct MarginalInit {
  enum class Kind { delta, gaussian, gamma, bimodal_gaussian };
  Kind kind = Kind::delta;
  double mean = 0.0;      // delta value / gaussian mean / first bimodal mean
  double variance = 0.0;  // gaussian variance / first bimodal variance
  double shape = 1.0;     // gamma
  double scale = 1.0;     // gamma
  double mean2 = 0.0;     // second bimodal component
  double variance2 = 0.0;
  double weight1 = 0.5;   // probability of the first bimodal component

  bool operator==(const MarginalInit&) const = default;

  static MarginalInit delta(double value);
  static MarginalInit gaussian(double mean, double variance);
  static MarginalInit gamma(double shape, double scale);
  static MarginalInit bimodal(double mean1, double var1, double mean2, double var2,
                              double weight1 = 0.5);
};

/// Initial distribution of the full state. Components are independent unless
/// `custom_sampler` is set, in which case it draws the whole state.
struct InitialCondition {
  std::vector<MarginalInit> marginals;
  std::function<Vector(std::mt19937_64&)> custom_sampler;

  static InitialCondition delta(const Vector& state);
  static InitialCondition gaussian(const Vector& mean, const Vector& variance);

  void validate(std::size_t dim) const;
  Vector sample(std::mt19937_64& rng, std::size_t dim) const;
};

/// L trajectories on a uniform grid times[k] = k * dt, k = 0..steps.
/// Arrays are row-major: member, then time index, then component.
struct EnsemblePaths {
  std::size_t n_obs = 0;
  std::size_t n_hid = 0;
  std::size_t members = 0;
  std::uint64_t seed = 0;
  double dt = 0.0;
  std::vector<double> times;
  std::vector<double> uI;
  std::vector<double> uII;

  std::size_t n_times() const { return times.size(); }
  std::span<const double> obs(std::size_t member, std::size_t k) const {
    return {uI.data() + (member * n_times() + k) * n_obs, n_obs};
  }
  std::span<const double> hid(std::size_t member, std::size_t k) const {
    return {uII.data() + (member * n_times() + k) * n_hid, n_hid};
  }
  /// Time index of t on the grid; throws ConfigError if t is not a grid point.
  std::size_t index_of_time(double t) const;
  /// L x n_obs matrix of observed states at time index k.
  Matrix obs_at(std::size_t k) const;
  /// L x n_hid matrix of hidden states at time index k.
  Matrix hid_at(std::size_t k) const;
};

/// Binary layout (little-endian):
///   char[8] "CGPDFENS", u32 version=1, u32 n_obs, u32 n_hid, u32 reserved,
///   u64 members, u64 n_times, u64 seed, f64 dt,
///   f64 times[n_times], f64 uI[members*n_times*n_obs], f64 uII[members*n_times*n_hid]
void save_ensemble(const EnsemblePaths& paths, const std::filesystem::path& file);
EnsemblePaths load_ensemble(const std::filesystem::path& file);

/// Number of Euler-Maruyama steps to reach t_end; t_end must be a multiple of dt.
std::size_t step_count(double t_end, double dt);

/// Euler-Maruyama paths of the full coupled system. Member m draws from
/// member_engine(seed, m, ...) so output does not depend on thread count.
EnsemblePaths simulate_ensemble(const CGSystemSpec& spec, const InitialCondition& init,
                                std::size_t L, double dt, double t_end, std::uint64_t seed);

/// Like simulate_ensemble but keeps only the states at `snapshot_times`;
/// returns one L x dim matrix per snapshot. Used for large truth ensembles.
std::vector<Matrix> simulate_snapshots(const CGSystemSpec& spec, const InitialCondition& init,
                                       std::size_t L, double dt,
                                       const std::vector<double>& snapshot_times,
                                       std::uint64_t seed);

/// Monte Carlo reference density of the marginal `dims` at t_snap, smoothed
/// with the same diagonal-bandwidth KDE as the recovery path.
DensityField mc_truth_density(const CGSystemSpec& spec, const InitialCondition& init,
                              std::size_t L_mc, double dt, double t_snap, std::uint64_t seed,
                              const std::vector<std::size_t>& marginal_dims,
                              const GridSpec& grid);

/// KDE density of selected columns of a sample matrix; marks a warning when
/// samples fall outside the grid.
DensityField density_from_samples(const Matrix& samples, const std::vector<std::size_t>& dims,
                                  const GridSpec& grid);

/// Time-average density of one long trajectory after burn-in, from states
/// recorded every `sample_interval` time units.
DensityField long_run_equilibrium(const CGSystemSpec& spec, double t_burn, double t_total,
                                  double dt, std::uint64_t seed,
                                  const std::vector<std::size_t>& marginal_dims,
                                  const GridSpec& grid, double sample_interval = 0.01,
                                  const Vector& initial_state = Vector());

/// Samples (rows) recorded by the long-run integrator, for diagnostics.
Matrix long_run_samples(const CGSystemSpec& spec, double t_burn, double t_total, double dt,
                        std::uint64_t seed, double sample_interval = 0.01,
                        const Vector& initial_state = Vector());

}  // namespace cgpdf
