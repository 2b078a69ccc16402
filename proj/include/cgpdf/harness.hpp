#pragma once

#include "cgpdf/config.hpp"
#include "cgpdf/metrics.hpp"
#include "cgpdf/mixture.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace cgpdf {

/// Large-ensemble states at each configured snapshot (L_mc x dim per entry).
struct TruthEnsemble {
  std::vector<double> times;
  std::vector<Matrix> samples;
  bool from_cache = false;
  std::string key;
};

/// Cache key of the truth ensemble: model, parameters, initial condition,
/// dt, L_mc, truth seed and snapshot times.
std::string truth_cache_key(const ExperimentConfig& config);

/// Simulates the truth ensemble, or loads it from config.cache_dir.
TruthEnsemble truth_ensemble(const ExperimentConfig& config);

/// Marginal requests with variable indices sorted ascending (observed before
/// hidden). An empty config list means every variable in 1D plus every pair
/// when the model has at most four variables.
struct MarginalRequest {
  std::vector<std::string> variables;
  std::vector<std::size_t> dims;
};
std::vector<MarginalRequest> resolve_marginals(const ExperimentConfig& config,
                                               const CGSystemSpec& spec);

/// Explicit axes where configured, otherwise mean +- width_sd * sd of the
/// truth samples.
GridSpec resolve_grid(const ExperimentConfig& config, const CGSystemSpec& spec,
                      const MarginalRequest& request, const Matrix& truth_samples);

struct MarginalResult {
  MarginalRequest request;
  DensityField model;
  DensityField truth;
  KLReport kl;
  std::optional<double> gate;
};

struct MomentResult {
  std::string variable;
  Moments model;
  Moments truth;
  double truth_mean_se = 0.0;      // standard error of the truth mean
  double truth_variance_se = 0.0;  // standard error of the truth variance
};

struct SnapshotResult {
  double t = 0.0;
  Vector bandwidth;  // squared bandwidths of the observed block
  std::vector<bool> bandwidth_fallback;
  FilterDiagnostics filter;
  std::vector<MarginalResult> marginals;
  std::vector<MomentResult> moments;
  GaussianMixture mixture;
  std::vector<ConditionalGaussianState> states;
  std::vector<std::string> warnings;
};

struct PipelineResult {
  std::vector<SnapshotResult> snapshots;
};

/// Algorithm steps for one ensemble size and seed against a fixed truth:
/// simulate, filter, bandwidth, mixture, marginals, relative entropy, moments.
PipelineResult run_pipeline(const ExperimentConfig& config, std::size_t L, std::uint64_t seed,
                            const TruthEnsemble& truth, EnsemblePaths* paths_out = nullptr);

struct RunReport {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string version;
  std::filesystem::path output;
  PipelineResult result;
  std::vector<std::string> files;
  bool gates_pass = true;
};

/// Full experiment with artifacts written under config.output.
RunReport run_experiment(const ExperimentConfig& config);

struct SweepRow {
  std::size_t L = 0;
  std::string metric;  // kl_1d or kl_2d
  std::string variables;
  double value = 0.0;
  double floor_mass = 0.0;
  std::uint64_t seed = 0;
  double t = 0.0;
};

/// Reruns the pipeline for every L (and seed) against one shared truth.
std::vector<SweepRow> l_sweep(const ExperimentConfig& config, const std::vector<std::size_t>& L_values,
                              const std::vector<std::uint64_t>& seeds);
std::vector<SweepRow> l_sweep(const ExperimentConfig& config, const std::vector<std::size_t>& L_values,
                              const std::vector<std::uint64_t>& seeds, const TruthEnsemble& truth);
void write_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& file);

struct KdeHistogramRow {
  double t = 0.0;
  std::string variable;
  double kl_kde = 0.0;
  double kl_histogram = 0.0;
  double histogram_floor_mass = 0.0;
  std::size_t bins = 0;
};

struct KdeHistogramComparison {
  std::vector<KdeHistogramRow> rows;
  std::vector<DensityField> kde, histogram, truth;  // parallel to rows
};

/// KDE and a sqrt(L)-bin histogram of the same L observed samples, each
/// compared with the truth density. Writes CSVs when `out_dir` is non-empty.
KdeHistogramComparison compare_kde_vs_mc(const ExperimentConfig& config, std::size_t L,
                                         const TruthEnsemble& truth,
                                         const std::filesystem::path& out_dir = {});

/// Sets the OpenMP worker count when n > 0.
void set_threads(int n);

std::string library_version();

}  // namespace cgpdf
