// Command-line front end: run, sweep, truth, compare, models list, validate-config.

#include "cgpdf/harness.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <iostream>
#include <sstream>

namespace {

using namespace cgpdf;

struct Overrides {
  std::string config;
  std::string model;
  std::string regime;
  std::string L;
  std::size_t mc = 0;
  double dt = 0.0;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string snapshots;
  std::string out;
  std::string grid;
  int threads = 0;
};

void add_common(CLI::App* cmd, Overrides& o, bool multi_L) {
  cmd->add_option("--config", o.config, "Experiment config file");
  cmd->add_option("--model", o.model, "Model id (l63, climate4d, triad3:I|II|III, turb6d, l96two)");
  cmd->add_option("--regime", o.regime, "Triad regime I, II or III");
  cmd->add_option("-L", o.L, multi_L ? "Ensemble sizes, comma separated" : "Ensemble size");
  cmd->add_option("--mc-particles", o.mc, "Monte Carlo truth ensemble size");
  cmd->add_option("--dt", o.dt, "Time step");
  cmd->add_option_function<std::uint64_t>(
      "--seed", [&o](const std::uint64_t& s) { o.seed = s; o.seed_set = true; }, "Random seed");
  cmd->add_option("--snapshots", o.snapshots, "Snapshot times t1,t2,...");
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_option("--grid", o.grid, "auto, or min:max:n per model variable, comma separated");
  cmd->add_option("--threads", o.threads, "Worker threads (0 = default)");
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::size_t parse_size(const std::string& s) {
  try {
    std::size_t used = 0;
    const auto v = std::stoull(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("expected a positive integer, got '" + s + "'");
  }
}

ExperimentConfig resolve(const Overrides& o, bool multi_L) {
  ExperimentConfig c;
  if (!o.config.empty()) {
    c = load_config(o.config);
  } else if (o.model.empty()) {
    throw ConfigError("either --config or --model is required");
  }
  if (!o.model.empty()) c.model = o.model;
  if (!o.regime.empty()) {
    const auto colon = c.model.find(':');
    const std::string base = colon == std::string::npos ? c.model : c.model.substr(0, colon);
    if (base != "triad3") throw ConfigError("--regime applies only to the triad model");
    c.model = base + ":" + o.regime;
  }
  if (!o.L.empty() && !multi_L) c.L = parse_size(o.L);
  if (o.mc > 0) c.L_mc = o.mc;
  if (o.dt > 0.0) c.dt = o.dt;
  if (o.seed_set) c.seed = o.seed;
  if (!o.snapshots.empty()) {
    c.snapshots.clear();
    for (const auto& t : split(o.snapshots, ',')) c.snapshots.push_back(std::stod(t));
    c.t_end.reset();
  }
  if (!o.out.empty()) c.output = o.out;
  if (o.threads > 0) c.threads = o.threads;
  if (!o.grid.empty()) {
    c.grid.clear();
    if (o.grid != "auto") {
      const CGSystemSpec spec = build_spec(c);
      const auto axes = split(o.grid, ',');
      if (axes.size() != spec.dim()) {
        throw ConfigError("--grid needs one min:max:n per model variable (" +
                          std::to_string(spec.dim()) + ")");
      }
      for (std::size_t i = 0; i < axes.size(); ++i) c.grid[spec.names[i]] = parse_axis(axes[i], spec.names[i]);
    }
  }
  validate_config(c);
  return c;
}

void print_summary(const RunReport& r) {
  std::printf("report: %s\n", (r.output / "report.json").string().c_str());
  for (const auto& s : r.result.snapshots) {
    for (const auto& m : s.marginals) {
      std::string names;
      for (const auto& v : m.request.variables) names += (names.empty() ? "" : ",") + v;
      std::printf("t=%-8g %-10s KL=%.5f%s\n", s.t, names.c_str(), m.kl.value,
                  m.gate ? (m.kl.value < *m.gate ? "  (gate pass)" : "  (gate FAIL)") : "");
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conditional Gaussian PDF recovery"};
  app.require_subcommand(1);

  Overrides run_o, sweep_o, truth_o, cmp_o, val_o;
  auto* run = app.add_subcommand("run", "Run one experiment and write its artifacts");
  add_common(run, run_o, false);
  auto* sweep = app.add_subcommand("sweep", "Relative entropy against ensemble size");
  add_common(sweep, sweep_o, true);
  std::string sweep_seeds;
  sweep->add_option("--seeds", sweep_seeds, "Seeds, comma separated");
  auto* truth = app.add_subcommand("truth", "Monte Carlo truth densities only");
  add_common(truth, truth_o, false);
  auto* compare = app.add_subcommand("compare", "KDE against histogram for observed marginals");
  add_common(compare, cmp_o, false);
  auto* models = app.add_subcommand("models", "Model catalogue");
  models->require_subcommand(1);
  auto* models_list = models->add_subcommand("list", "List model ids and variables");
  auto* validate = app.add_subcommand("validate-config", "Check a config file");
  add_common(validate, val_o, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return 1;
  }

  try {
    if (*run) {
      const auto c = resolve(run_o, false);
      print_summary(run_experiment(c));
    } else if (*sweep) {
      auto c = resolve(sweep_o, true);
      set_threads(c.threads);
      std::vector<std::size_t> Ls = c.sweep;
      if (!sweep_o.L.empty()) {
        Ls.clear();
        for (const auto& s : split(sweep_o.L, ',')) Ls.push_back(parse_size(s));
      }
      if (Ls.empty()) throw ConfigError("no ensemble sizes: use -L or run.sweep");
      std::vector<std::uint64_t> seeds = c.sweep_seeds;
      if (!sweep_seeds.empty()) {
        seeds.clear();
        for (const auto& s : split(sweep_seeds, ',')) seeds.push_back(parse_size(s));
      }
      const auto rows = l_sweep(c, Ls, seeds);
      std::filesystem::create_directories(c.output);
      const auto file = std::filesystem::path(c.output) / "sweep.csv";
      write_sweep_csv(rows, file);
      std::printf("sweep table: %s (%zu rows)\n", file.string().c_str(), rows.size());
    } else if (*truth) {
      const auto c = resolve(truth_o, false);
      set_threads(c.threads);
      const TruthEnsemble t = truth_ensemble(c);
      const CGSystemSpec spec = build_spec(c);
      const auto out = std::filesystem::path(c.output) / "truth";
      std::filesystem::create_directories(out);
      for (std::size_t s = 0; s < c.snapshots.size(); ++s) {
        for (const auto& r : resolve_marginals(c, spec)) {
          const GridSpec grid = resolve_grid(c, spec, r, t.samples[s]);
          std::string names;
          for (const auto& v : r.variables) names += (names.empty() ? "" : "-") + v;
          char tag[64];
          std::snprintf(tag, sizeof tag, "t%g_", c.snapshots[s]);
          write_density_csv(density_from_samples(t.samples[s], r.dims, grid),
                            out / (tag + names + "_truth.csv"));
        }
      }
      std::printf("truth densities: %s (cache key %s%s)\n", out.string().c_str(), t.key.c_str(),
                  t.from_cache ? ", cached" : "");
    } else if (*compare) {
      const auto c = resolve(cmp_o, false);
      set_threads(c.threads);
      const auto out = std::filesystem::path(c.output) / "kde_vs_histogram";
      const auto cmp = compare_kde_vs_mc(c, c.L, truth_ensemble(c), out);
      for (const auto& r : cmp.rows) {
        std::printf("t=%-8g %-6s KL(kde)=%.5f KL(histogram)=%.5f\n", r.t, r.variable.c_str(),
                    r.kl_kde, r.kl_histogram);
      }
    } else if (*models && *models_list) {
      for (const auto& id : model_ids()) {
        const CGSystemSpec spec = build_model(id);
        std::string obs, hid;
        for (std::size_t i = 0; i < spec.n_obs; ++i) obs += (i ? " " : "") + spec.names[i];
        for (std::size_t k = 0; k < spec.n_hid; ++k) {
          const bool shown = spec.n_hid <= 8 || k < 4 || k + 1 == spec.n_hid;
          if (shown) hid += (k ? " " : "") + spec.names[spec.n_obs + k];
          else if (k == 4) hid += " ...";
        }
        std::printf("%-11s observed: %-14s hidden: %s\n", id.c_str(), obs.c_str(), hid.c_str());
      }
    } else if (*validate) {
      const auto c = resolve(val_o, false);
      std::printf("config ok: model %s, L=%zu, %zu snapshot(s), hash %s\n", c.model.c_str(), c.L,
                  c.snapshots.size(), hex64(fnv1a(to_ini(c))).c_str());
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: bad number (" << e.what() << ")\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
