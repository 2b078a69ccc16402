#pragma once

#include "cgpdf/cg_filter.hpp"
#include "cgpdf/density.hpp"
#include "cgpdf/models.hpp"
#include "cgpdf/simulate.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace cgpdf {

/// One experiment, as read from an INI-style config file. See docs/config.md.
struct ExperimentConfig {
  std::string name;
  std::string model = "l63";
  ParamMap params;  // overrides of the model defaults

  /// Per-variable initial distributions; variables not listed use `init_default`.
  std::map<std::string, MarginalInit> init;
  MarginalInit init_default = MarginalInit::delta(0.0);

  std::size_t L = 100;
  std::size_t L_mc = 150000;
  double dt = 1e-3;
  std::optional<double> t_end;  // defaults to the last snapshot
  std::vector<double> snapshots;
  std::uint64_t seed = 1;
  std::optional<std::uint64_t> truth_seed;  // defaults to a value derived from seed

  /// Each entry names 1 or 2 variables.
  std::vector<std::vector<std::string>> marginals;

  /// Explicit axes by variable name; variables without one get an automatic axis.
  std::map<std::string, GridAxis> grid;
  std::size_t grid_points_1d = 200;
  std::size_t grid_points_2d = 100;
  double grid_width_sd = 6.0;

  FilterInit::Mode filter_init = FilterInit::Mode::point_with_epsilon;
  std::optional<double> epsilon;
  std::size_t thinning = 1;

  std::vector<std::size_t> sweep;
  std::vector<std::uint64_t> sweep_seeds;
  int threads = 0;  // 0 = runtime default
  std::string output = "out";
  std::string cache_dir;  // empty = no truth cache
  bool save_ensemble = true;
  bool save_filter_states = false;

  std::optional<double> gate_kl_1d;
  std::optional<double> gate_kl_2d;
  std::string gate_label;

  bool operator==(const ExperimentConfig&) const = default;

  std::uint64_t resolved_truth_seed() const;
  double resolved_t_end() const;
};

/// Parses config text. Unknown sections or keys are ConfigErrors.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& file);
/// Canonical text; parse_config(to_ini(c)) == c.
std::string to_ini(const ExperimentConfig& config);

/// Checks the config against its model: variable names, snapshot grid, sizes.
void validate_config(const ExperimentConfig& config);

/// Initial condition for the model's variable order.
InitialCondition build_initial_condition(const ExperimentConfig& config, const CGSystemSpec& spec);
CGSystemSpec build_spec(const ExperimentConfig& config);

/// "gaussian 0 1", "delta 0", "gamma 1 1", "bimodal -1 0.2 1 0.2 [w1]".
MarginalInit parse_marginal_init(const std::string& text);
std::string format_marginal_init(const MarginalInit& m);

/// "min:max:n".
GridAxis parse_axis(const std::string& text, const std::string& label);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view data);
std::string hex64(std::uint64_t value);

}  // namespace cgpdf
