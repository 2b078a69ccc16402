#include "cgpdf/harness.hpp"

#include "cgpdf/kde.hpp"
#include "cgpdf/rng.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#ifndef CGPDF_VERSION
#define CGPDF_VERSION "0.0.0"
#endif

namespace cgpdf {

using json = nlohmann::ordered_json;

namespace {

template <typename F>
auto staged(const char* stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string(stage) + ": " + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(std::string(stage) + ": " + e.what());
  } catch (const std::exception& e) {
    throw Error(std::string(stage) + ": " + e.what());
  }
}

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string short_time(double t) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", t);
  return buf;
}

std::string join_names(const std::vector<std::string>& names, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i) out += sep;
    out += names[i];
  }
  return out;
}

constexpr char kTruthMagic[8] = {'C', 'G', 'P', 'D', 'F', 'T', 'R', 'U'};

void save_truth(const TruthEnsemble& truth, const std::filesystem::path& file) {
  const auto tmp = file.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot write truth cache " + tmp);
    out.write(kTruthMagic, sizeof kTruthMagic);
    const std::uint64_t n = truth.samples.size();
    const std::uint64_t rows = n ? static_cast<std::uint64_t>(truth.samples[0].rows()) : 0;
    const std::uint64_t cols = n ? static_cast<std::uint64_t>(truth.samples[0].cols()) : 0;
    out.write(reinterpret_cast<const char*>(&n), sizeof n);
    out.write(reinterpret_cast<const char*>(&rows), sizeof rows);
    out.write(reinterpret_cast<const char*>(&cols), sizeof cols);
    out.write(reinterpret_cast<const char*>(truth.times.data()),
              static_cast<std::streamsize>(n * sizeof(double)));
    for (const auto& m : truth.samples) {
      out.write(reinterpret_cast<const char*>(m.data()),
                static_cast<std::streamsize>(rows * cols * sizeof(double)));
    }
    if (!out) throw Error("failed writing truth cache " + tmp);
  }
  std::filesystem::rename(tmp, file);
}

std::optional<TruthEnsemble> load_truth(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) return std::nullopt;
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kTruthMagic, sizeof magic) != 0) return std::nullopt;
  std::uint64_t n = 0, rows = 0, cols = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof n);
  in.read(reinterpret_cast<char*>(&rows), sizeof rows);
  in.read(reinterpret_cast<char*>(&cols), sizeof cols);
  if (!in) return std::nullopt;
  TruthEnsemble truth;
  truth.times.resize(n);
  in.read(reinterpret_cast<char*>(truth.times.data()), static_cast<std::streamsize>(n * sizeof(double)));
  for (std::uint64_t s = 0; s < n; ++s) {
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(rows * cols * sizeof(double)));
    truth.samples.push_back(std::move(m));
  }
  if (!in) return std::nullopt;
  truth.from_cache = true;
  return truth;
}

}  // namespace

void set_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

std::string library_version() { return CGPDF_VERSION; }

// --- truth -----------------------------------------------------------------

std::string truth_cache_key(const ExperimentConfig& config) {
  const CGSystemSpec spec = build_spec(config);
  const InitialCondition init = build_initial_condition(config, spec);
  std::ostringstream os;
  os << "truth-v1|" << config.model;
  const ModelParams params = [&] {
    ModelParams p = default_params(config.model);
    p.override_with(config.params);
    return p;
  }();
  for (const auto& [k, v] : params.values()) os << '|' << k << '=' << g17(v);
  for (std::size_t i = 0; i < spec.dim(); ++i) {
    os << '|' << spec.names[i] << ':' << format_marginal_init(init.marginals[i]);
  }
  os << "|dt=" << g17(config.dt) << "|L_mc=" << config.L_mc
     << "|seed=" << config.resolved_truth_seed() << "|t=";
  for (double t : config.snapshots) os << g17(t) << ',';
  return hex64(fnv1a(os.str()));
}

TruthEnsemble truth_ensemble(const ExperimentConfig& config) {
  const std::string key = truth_cache_key(config);
  std::filesystem::path file;
  if (!config.cache_dir.empty()) {
    file = std::filesystem::path(config.cache_dir) / ("truth-" + key + ".bin");
    if (auto cached = load_truth(file)) {
      cached->key = key;
      return *cached;
    }
  }
  const CGSystemSpec spec = build_spec(config);
  const InitialCondition init = build_initial_condition(config, spec);
  TruthEnsemble truth;
  truth.key = key;
  truth.times = config.snapshots;
  if (!config.snapshots.empty()) {
    truth.samples = simulate_snapshots(spec, init, config.L_mc, config.dt, config.snapshots,
                                       config.resolved_truth_seed());
  }
  if (!file.empty()) {
    std::filesystem::create_directories(file.parent_path());
    save_truth(truth, file);
  }
  return truth;
}

// --- marginals and grids ---------------------------------------------------

std::vector<MarginalRequest> resolve_marginals(const ExperimentConfig& config,
                                               const CGSystemSpec& spec) {
  std::vector<std::vector<std::string>> names = config.marginals;
  if (names.empty()) {
    for (const auto& n : spec.names) names.push_back({n});
    if (spec.dim() <= 4) {
      for (std::size_t a = 0; a < spec.dim(); ++a) {
        for (std::size_t b = a + 1; b < spec.dim(); ++b) names.push_back({spec.names[a], spec.names[b]});
      }
    }
  }
  std::vector<MarginalRequest> out;
  for (const auto& group : names) {
    MarginalRequest r;
    std::vector<std::size_t> idx;
    for (const auto& n : group) idx.push_back(spec.index_of(n));
    std::sort(idx.begin(), idx.end());
    for (auto i : idx) {
      r.dims.push_back(i);
      r.variables.push_back(spec.names[i]);
    }
    out.push_back(std::move(r));
  }
  return out;
}

GridSpec resolve_grid(const ExperimentConfig& config, const CGSystemSpec& spec,
                      const MarginalRequest& request, const Matrix& truth_samples) {
  (void)spec;
  const std::size_t points =
      request.dims.size() == 1 ? config.grid_points_1d : config.grid_points_2d;
  const GridSpec automatic = auto_grid(truth_samples, request.dims, request.variables,
                                       config.grid_width_sd, points, points);
  GridSpec grid;
  for (std::size_t k = 0; k < request.dims.size(); ++k) {
    const auto it = config.grid.find(request.variables[k]);
    grid.axes.push_back(it != config.grid.end() ? it->second : automatic.axes[k]);
    grid.axes.back().label = request.variables[k];
  }
  return grid;
}

// --- pipeline --------------------------------------------------------------

PipelineResult run_pipeline(const ExperimentConfig& config, std::size_t L, std::uint64_t seed,
                            const TruthEnsemble& truth, EnsemblePaths* paths_out) {
  PipelineResult result;
  if (config.snapshots.empty()) return result;
  if (truth.samples.size() != config.snapshots.size()) {
    throw ConfigError("truth ensemble does not match the configured snapshots");
  }
  const CGSystemSpec spec = staged("model", [&] { return build_spec(config); });
  const InitialCondition init =
      staged("initial condition", [&] { return build_initial_condition(config, spec); });
  const auto requests = staged("marginals", [&] { return resolve_marginals(config, spec); });

  EnsemblePaths paths = staged("simulate", [&] {
    return simulate_ensemble(spec, init, L, config.dt, config.resolved_t_end(), seed);
  });

  const auto runs = staged("filter", [&] {
    FilterInit fi;
    fi.mode = config.filter_init;
    fi.epsilon = config.epsilon;
    const auto init_states_vec = init_states(paths.hid_at(0), fi, paths.times.front());
    return run_filters(spec, paths, init_states_vec, config.snapshots, config.thinning);
  });

  std::set<std::size_t> moment_dims;
  for (const auto& r : requests) moment_dims.insert(r.dims.begin(), r.dims.end());

  for (std::size_t s = 0; s < config.snapshots.size(); ++s) {
    SnapshotResult snap;
    snap.t = config.snapshots[s];
    const Matrix& T = truth.samples[s];
    staged("mixture", [&] {
      const std::size_t k = paths.index_of_time(snap.t);
      const Matrix uI = paths.obs_at(k);
      std::vector<ConditionalGaussianState> states;
      states.reserve(L);
      for (std::size_t m = 0; m < L; ++m) {
        states.push_back(runs[m].states[s]);
        snap.filter.max_negative_ratio =
            std::max(snap.filter.max_negative_ratio, runs[m].diagnostics.max_negative_ratio);
        snap.filter.clamp_count += runs[m].diagnostics.clamp_count;
      }
      const BandwidthMatrix H = mixture_bandwidth(uI);
      if (spec.n_obs > kMaxKdeDims) {
        snap.warnings.push_back("observed dimension " + std::to_string(spec.n_obs) +
                                " > 3: 1D bandwidth per observed variable");
      }
      snap.bandwidth = H.diag;
      snap.bandwidth_fallback = H.fallback;
      for (std::size_t j = 0; j < H.fallback.size(); ++j) {
        if (H.fallback[j]) {
          snap.warnings.push_back("bandwidth for " + spec.names[j] +
                                  " used the Gaussian-reference fallback");
        }
      }
      snap.mixture = assemble_joint(uI, H, states);
      if (config.save_filter_states) snap.states = std::move(states);
    });

    staged("density", [&] {
      for (const auto& r : requests) {
        MarginalResult mr;
        mr.request = r;
        const GridSpec grid = resolve_grid(config, spec, r, T);
        mr.model = evaluate_on_grid(marginal(snap.mixture, r.dims), grid);
        mr.truth = density_from_samples(T, r.dims, grid);
        if (std::abs(mr.truth.integral - 1.0) > 1e-3) {
          mr.truth.warnings.push_back("truth integrates to " + g17(mr.truth.integral));
        }
        mr.kl = relative_entropy(mr.truth, mr.model);
        mr.gate = r.dims.size() == 1 ? config.gate_kl_1d : config.gate_kl_2d;
        for (const auto& w : mr.truth.warnings) {
          snap.warnings.push_back("truth " + join_names(r.variables, ",") + ": " + w);
        }
        snap.marginals.push_back(std::move(mr));
      }
    });

    staged("moments", [&] {
      for (std::size_t d : moment_dims) {
        MomentResult m;
        m.variable = spec.names[d];
        m.model = mixture_moments(snap.mixture, d);
        const auto col = T.col(static_cast<Eigen::Index>(d));
        std::vector<double> values(col.data(), col.data() + col.size());
        m.truth = sample_moments(values);
        const double n = static_cast<double>(values.size());
        const double m4 = m.truth.kurtosis * m.truth.variance * m.truth.variance;
        m.truth_mean_se = std::sqrt(m.truth.variance / n);
        m.truth_variance_se = std::sqrt(std::max(m4 - m.truth.variance * m.truth.variance, 0.0) / n);
        snap.moments.push_back(m);
      }
    });
    result.snapshots.push_back(std::move(snap));
  }
  if (paths_out) *paths_out = std::move(paths);
  return result;
}

// --- experiment ------------------------------------------------------------

namespace {

json moments_json(const Moments& m) {
  return {{"mean", m.mean}, {"variance", m.variance}, {"skewness", m.skewness}, {"kurtosis", m.kurtosis}};
}

json state_json(const ConditionalGaussianState& s) {
  json packed = json::array();
  for (Eigen::Index i = 0; i < s.cov.rows(); ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) packed.push_back(s.cov(i, j));
  }
  return {{"t", s.t}, {"mean", std::vector<double>(s.mean.data(), s.mean.data() + s.mean.size())},
          {"cov_lower", packed}};
}

void write_text(const std::filesystem::path& file, const std::string& text) {
  std::ofstream out(file);
  if (!out) throw Error("cannot write " + file.string());
  out << text;
}

}  // namespace

RunReport run_experiment(const ExperimentConfig& config) {
  set_threads(config.threads);
  staged("config", [&] { validate_config(config); });

  RunReport report;
  report.seed = config.seed;
  report.version = library_version();
  report.output = config.output;
  const std::string config_text = to_ini(config);
  report.config_hash = hex64(fnv1a(config_text));

  const std::filesystem::path out = config.output;
  std::filesystem::create_directories(out / "densities");
  auto rel = [&](const std::filesystem::path& p) {
    return std::filesystem::relative(p, out).generic_string();
  };

  json j;
  j["status"] = "running";
  j["provenance"] = {{"config_hash", report.config_hash}, {"config_file", "config.ini"},
                     {"seed", config.seed}, {"truth_seed", config.resolved_truth_seed()},
                     {"version", report.version}, {"model", config.model}, {"L", config.L},
                     {"L_mc", config.L_mc}, {"dt", config.dt}, {"t_end", config.resolved_t_end()},
                     {"filter_init", config.filter_init == FilterInit::Mode::kde_diagonal ? "kde" : "point"},
                     {"thinning", config.thinning}};
  write_text(out / "config.ini", config_text);
  report.files.push_back("config.ini");

  std::string stage = "truth";
  try {
    const TruthEnsemble truth = staged("truth", [&] { return truth_ensemble(config); });
    j["truth"] = {{"cache_key", truth.key}, {"from_cache", truth.from_cache}};
    stage = "pipeline";
    EnsemblePaths paths;
    report.result = run_pipeline(config, config.L, config.seed, truth,
                                 config.save_ensemble ? &paths : nullptr);
    stage = "write";
    if (config.save_ensemble && paths.members > 0) {
      save_ensemble(paths, out / "ensemble.bin");
      report.files.push_back("ensemble.bin");
    }

    std::ostringstream kl_csv, mom_csv;
    kl_csv << "L,metric,variables,value,floor_mass,t\n";
    mom_csv << "t,variable,source,mean,variance,skewness,kurtosis,mean_se,variance_se\n";
    json snaps = json::array();
    for (const auto& snap : report.result.snapshots) {
      const std::string tag = "t" + short_time(snap.t);
      json js;
      js["t"] = snap.t;
      js["bandwidth_squared"] = std::vector<double>(snap.bandwidth.data(), snap.bandwidth.data() + snap.bandwidth.size());
      js["bandwidth_fallback"] = snap.bandwidth_fallback;
      js["filter"] = {{"max_negative_ratio", snap.filter.max_negative_ratio},
                      {"clamp_count", snap.filter.clamp_count}};
      js["warnings"] = snap.warnings;
      json marg = json::array();
      for (const auto& m : snap.marginals) {
        const std::string names = join_names(m.request.variables, "-");
        const auto model_file = out / "densities" / (tag + "_" + names + "_model.csv");
        const auto truth_file = out / "densities" / (tag + "_" + names + "_truth.csv");
        write_density_csv(m.model, model_file);
        write_density_csv(m.truth, truth_file);
        report.files.push_back(rel(model_file));
        report.files.push_back(rel(truth_file));
        const std::string metric = m.request.dims.size() == 1 ? "kl_1d" : "kl_2d";
        kl_csv << config.L << ',' << metric << ',' << join_names(m.request.variables, ":") << ','
               << g17(m.kl.value) << ',' << g17(m.kl.floor_mass) << ',' << g17(snap.t) << '\n';
        json jm = {{"variables", m.request.variables}, {"kl", m.kl.value},
                   {"floor_mass", m.kl.floor_mass}, {"grid", m.kl.grid_id},
                   {"model_integral", m.model.integral}, {"truth_integral", m.truth.integral},
                   {"model_file", rel(model_file)}, {"truth_file", rel(truth_file)}};
        if (m.gate) {
          const bool pass = m.kl.value < *m.gate;
          jm["gate"] = *m.gate;
          jm["pass"] = pass;
          report.gates_pass = report.gates_pass && pass;
        }
        marg.push_back(jm);
      }
      js["marginals"] = marg;
      json mom = json::array();
      for (const auto& m : snap.moments) {
        for (const auto& [source, mm] : {std::pair{"model", m.model}, std::pair{"truth", m.truth}}) {
          mom_csv << g17(snap.t) << ',' << m.variable << ',' << source << ',' << g17(mm.mean) << ','
                  << g17(mm.variance) << ',' << g17(mm.skewness) << ',' << g17(mm.kurtosis) << ',';
          if (std::string(source) == "truth") {
            mom_csv << g17(m.truth_mean_se) << ',' << g17(m.truth_variance_se) << '\n';
          } else {
            mom_csv << ",\n";
          }
        }
        mom.push_back({{"variable", m.variable}, {"model", moments_json(m.model)},
                       {"truth", moments_json(m.truth)}, {"truth_mean_se", m.truth_mean_se},
                       {"truth_variance_se", m.truth_variance_se}});
      }
      js["moments"] = mom;
      if (config.save_filter_states) {
        json states = json::array();
        for (const auto& s : snap.states) states.push_back(state_json(s));
        const auto file = out / ("filter_states_" + tag + ".json");
        write_text(file, states.dump(1) + "\n");
        report.files.push_back(rel(file));
        js["filter_states_file"] = rel(file);
      }
      snaps.push_back(js);
    }
    write_text(out / "kl.csv", kl_csv.str());
    write_text(out / "moments.csv", mom_csv.str());
    report.files.push_back("kl.csv");
    report.files.push_back("moments.csv");
    j["snapshots"] = snaps;
    j["gates"] = {{"kl_1d", config.gate_kl_1d ? json(*config.gate_kl_1d) : json()},
                  {"kl_2d", config.gate_kl_2d ? json(*config.gate_kl_2d) : json()},
                  {"label", config.gate_label}, {"pass", report.gates_pass}};
    j["status"] = "ok";
  } catch (const std::exception& e) {
    j["status"] = "failed";
    j["failed_stage"] = stage;
    j["error"] = e.what();
    j["partial_files"] = report.files;
    write_text(out / "report.json", j.dump(2) + "\n");
    throw;
  }
  report.files.push_back("report.json");
  j["files"] = report.files;
  write_text(out / "report.json", j.dump(2) + "\n");
  return report;
}

// --- sweep -----------------------------------------------------------------

std::vector<SweepRow> l_sweep(const ExperimentConfig& config, const std::vector<std::size_t>& L_values,
                              const std::vector<std::uint64_t>& seeds, const TruthEnsemble& truth) {
  std::vector<SweepRow> rows;
  const std::vector<std::uint64_t> seed_list = seeds.empty() ? std::vector{config.seed} : seeds;
  for (std::size_t L : L_values) {
    for (std::uint64_t seed : seed_list) {
      ExperimentConfig c = config;
      c.save_filter_states = false;
      const PipelineResult r = run_pipeline(c, L, seed, truth);
      for (const auto& snap : r.snapshots) {
        for (const auto& m : snap.marginals) {
          SweepRow row;
          row.L = L;
          row.metric = m.request.dims.size() == 1 ? "kl_1d" : "kl_2d";
          row.variables = join_names(m.request.variables, ":");
          row.value = m.kl.value;
          row.floor_mass = m.kl.floor_mass;
          row.seed = seed;
          row.t = snap.t;
          rows.push_back(row);
        }
      }
    }
  }
  return rows;
}

std::vector<SweepRow> l_sweep(const ExperimentConfig& config, const std::vector<std::size_t>& L_values,
                              const std::vector<std::uint64_t>& seeds) {
  validate_config(config);
  const TruthEnsemble truth = truth_ensemble(config);
  return l_sweep(config, L_values, seeds, truth);
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& file) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file);
  if (!out) throw Error("cannot write " + file.string());
  out << "L,metric,variables,value,floor_mass,seed,t\n";
  for (const auto& r : rows) {
    out << r.L << ',' << r.metric << ',' << r.variables << ',' << g17(r.value) << ','
        << g17(r.floor_mass) << ',' << r.seed << ',' << g17(r.t) << '\n';
  }
}

// --- KDE versus histogram --------------------------------------------------

KdeHistogramComparison compare_kde_vs_mc(const ExperimentConfig& config, std::size_t L,
                                         const TruthEnsemble& truth,
                                         const std::filesystem::path& out_dir) {
  const CGSystemSpec spec = build_spec(config);
  const InitialCondition init = build_initial_condition(config, spec);
  KdeHistogramComparison cmp;
  if (config.snapshots.empty()) return cmp;
  const auto samples = simulate_snapshots(spec, init, L, config.dt, config.snapshots, config.seed);
  const auto bins = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(L)))));
  if (!out_dir.empty()) std::filesystem::create_directories(out_dir);
  for (std::size_t s = 0; s < config.snapshots.size(); ++s) {
    for (std::size_t j = 0; j < spec.n_obs; ++j) {
      MarginalRequest r{{spec.names[j]}, {j}};
      const GridSpec grid = resolve_grid(config, spec, r, truth.samples[s]);
      DensityField truth_field = density_from_samples(truth.samples[s], {j}, grid);
      DensityField kde = density_from_samples(samples[s], {j}, grid);
      const auto col = samples[s].col(static_cast<Eigen::Index>(j));
      std::vector<double> values(col.data(), col.data() + col.size());
      DensityField hist = histogram_density(values, bins, grid);
      KdeHistogramRow row;
      row.t = config.snapshots[s];
      row.variable = spec.names[j];
      const KLReport kl_kde = relative_entropy(truth_field, kde);
      const KLReport kl_hist = relative_entropy(truth_field, hist);
      row.kl_kde = kl_kde.value;
      row.kl_histogram = kl_hist.value;
      row.histogram_floor_mass = kl_hist.floor_mass;
      row.bins = bins;
      if (!out_dir.empty()) {
        const std::string tag = "t" + short_time(row.t) + "_" + row.variable;
        write_density_csv(kde, out_dir / (tag + "_kde.csv"));
        write_density_csv(hist, out_dir / (tag + "_histogram.csv"));
        write_density_csv(truth_field, out_dir / (tag + "_truth.csv"));
      }
      cmp.rows.push_back(row);
      cmp.kde.push_back(std::move(kde));
      cmp.histogram.push_back(std::move(hist));
      cmp.truth.push_back(std::move(truth_field));
    }
  }
  if (!out_dir.empty()) {
    std::ofstream out(out_dir / "kde_vs_histogram.csv");
    out << "t,variable,L,bins,kl_kde,kl_histogram,histogram_floor_mass\n";
    for (const auto& r : cmp.rows) {
      out << g17(r.t) << ',' << r.variable << ',' << L << ',' << r.bins << ',' << g17(r.kl_kde)
          << ',' << g17(r.kl_histogram) << ',' << g17(r.histogram_floor_mass) << '\n';
    }
  }
  return cmp;
}

}  // namespace cgpdf
