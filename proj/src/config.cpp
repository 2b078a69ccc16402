#include "cgpdf/config.hpp"

#include "cgpdf/rng.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace cgpdf {

namespace pt = boost::property_tree;

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::stringstream ss(s);
  while (std::getline(ss, item, sep)) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    out.push_back(b == std::string::npos ? "" : item.substr(b, e - b + 1));
  }
  return out;
}

std::vector<std::string> words(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string w;
  while (ss >> w) out.push_back(w);
  return out;
}

double to_double(const std::string& s, const std::string& key) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "': expected a number, got '" + s + "'");
  }
}

std::uint64_t to_u64(const std::string& s, const std::string& key) {
  try {
    std::size_t used = 0;
    if (!s.empty() && s.front() == '-') throw std::invalid_argument(s);
    const auto v = std::stoull(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "': expected a non-negative integer, got '" + s + "'");
  }
}

bool to_bool(const std::string& s, const std::string& key) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError("'" + key + "': expected true or false, got '" + s + "'");
}

/// List values separated by commas and/or whitespace.
std::vector<std::string> list_items(std::string s) {
  std::replace(s.begin(), s.end(), ',', ' ');
  return words(s);
}

std::vector<double> to_doubles(const std::string& s, const std::string& key) {
  std::vector<double> out;
  for (const auto& item : list_items(s)) out.push_back(to_double(item, key));
  return out;
}

template <typename T>
std::string join(const std::vector<T>& values, const std::string& sep) {
  std::ostringstream os;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) os << sep;
    if constexpr (std::is_floating_point_v<T>) {
      os << fmt(values[i]);
    } else {
      os << values[i];
    }
  }
  return os.str();
}

std::string strip_comments(const std::string& text) {
  std::ostringstream os;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first != std::string::npos && line[first] == ';') line.clear();
    os << line << '\n';
  }
  return os.str();
}

}  // namespace

std::uint64_t fnv1a(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

std::uint64_t ExperimentConfig::resolved_truth_seed() const {
  return truth_seed ? *truth_seed : mix64(seed ^ 0x7275746873656564ULL);
}

double ExperimentConfig::resolved_t_end() const {
  if (t_end) return *t_end;
  if (snapshots.empty()) return dt;
  return *std::max_element(snapshots.begin(), snapshots.end());
}

MarginalInit parse_marginal_init(const std::string& text) {
  const auto w = words(text);
  if (w.empty()) throw ConfigError("empty initial condition");
  std::vector<double> a;
  for (std::size_t i = 1; i < w.size(); ++i) a.push_back(to_double(w[i], text));
  auto need = [&](std::size_t lo, std::size_t hi) {
    if (a.size() < lo || a.size() > hi) {
      throw ConfigError("initial condition '" + text + "' has the wrong number of values");
    }
  };
  MarginalInit m;
  if (w[0] == "delta") {
    need(1, 1);
    m = MarginalInit::delta(a[0]);
  } else if (w[0] == "gaussian") {
    need(2, 2);
    m = MarginalInit::gaussian(a[0], a[1]);
  } else if (w[0] == "gamma") {
    need(2, 2);
    m = MarginalInit::gamma(a[0], a[1]);
  } else if (w[0] == "bimodal") {
    need(4, 5);
    m = MarginalInit::bimodal(a[0], a[1], a[2], a[3], a.size() == 5 ? a[4] : 0.5);
  } else {
    throw ConfigError("unknown initial distribution '" + w[0] +
                      "' (expected delta, gaussian, gamma or bimodal)");
  }
  InitialCondition probe;
  probe.marginals = {m};
  probe.validate(1);
  return m;
}

std::string format_marginal_init(const MarginalInit& m) {
  switch (m.kind) {
    case MarginalInit::Kind::delta: return "delta " + fmt(m.mean);
    case MarginalInit::Kind::gaussian: return "gaussian " + fmt(m.mean) + " " + fmt(m.variance);
    case MarginalInit::Kind::gamma: return "gamma " + fmt(m.shape) + " " + fmt(m.scale);
    case MarginalInit::Kind::bimodal_gaussian:
      return "bimodal " + fmt(m.mean) + " " + fmt(m.variance) + " " + fmt(m.mean2) + " " +
             fmt(m.variance2) + " " + fmt(m.weight1);
  }
  return {};
}

GridAxis parse_axis(const std::string& text, const std::string& label) {
  const auto parts = split(text, ':');
  if (parts.size() != 3) throw ConfigError("grid axis '" + text + "' must be min:max:n");
  GridAxis axis;
  axis.min = to_double(parts[0], label);
  axis.max = to_double(parts[1], label);
  axis.points = static_cast<std::size_t>(to_u64(parts[2], label));
  axis.label = label;
  GridSpec probe{{axis}};
  probe.validate();
  return axis;
}

ExperimentConfig parse_config(const std::string& text) {
  pt::ptree tree;
  try {
    std::istringstream in(strip_comments(text));
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config syntax: ") + e.what());
  }
  ExperimentConfig c;
  const std::set<std::string> sections{"experiment", "params", "init", "grid", "filter", "run", "gates"};
  for (const auto& [section, body] : tree) {
    if (!sections.count(section)) throw ConfigError("unknown config section [" + section + "]");
    if (body.empty() && !body.data().empty()) {
      throw ConfigError("config key '" + section + "' appears outside a section");
    }
    for (const auto& [key, node] : body) {
      const std::string v = node.get_value<std::string>();
      const std::string where = section + "." + key;
      if (section == "experiment") {
        if (key == "name") c.name = v;
        else if (key == "model") c.model = v;
        else if (key == "seed") c.seed = to_u64(v, where);
        else if (key == "truth_seed") c.truth_seed = to_u64(v, where);
        else if (key == "L") c.L = to_u64(v, where);
        else if (key == "L_mc") c.L_mc = to_u64(v, where);
        else if (key == "dt") c.dt = to_double(v, where);
        else if (key == "t_end") c.t_end = to_double(v, where);
        else if (key == "snapshots") c.snapshots = to_doubles(v, where);
        else if (key == "marginals") {
          c.marginals.clear();
          for (const auto& w : words(v)) c.marginals.push_back(split(w, ','));
        } else throw ConfigError("unknown key '" + where + "'");
      } else if (section == "params") {
        c.params[key] = to_double(v, where);
      } else if (section == "init") {
        if (key == "default") c.init_default = parse_marginal_init(v);
        else c.init[key] = parse_marginal_init(v);
      } else if (section == "grid") {
        if (key == "points_1d") c.grid_points_1d = to_u64(v, where);
        else if (key == "points_2d") c.grid_points_2d = to_u64(v, where);
        else if (key == "width_sd") c.grid_width_sd = to_double(v, where);
        else c.grid[key] = parse_axis(v, key);
      } else if (section == "filter") {
        if (key == "init") {
          if (v == "point") c.filter_init = FilterInit::Mode::point_with_epsilon;
          else if (v == "kde") c.filter_init = FilterInit::Mode::kde_diagonal;
          else throw ConfigError("filter.init must be 'point' or 'kde', got '" + v + "'");
        } else if (key == "epsilon") c.epsilon = to_double(v, where);
        else if (key == "thinning") c.thinning = to_u64(v, where);
        else throw ConfigError("unknown key '" + where + "'");
      } else if (section == "run") {
        if (key == "sweep") {
          c.sweep.clear();
          for (const auto& s : list_items(v)) c.sweep.push_back(to_u64(s, where));
        } else if (key == "sweep_seeds") {
          c.sweep_seeds.clear();
          for (const auto& s : list_items(v)) c.sweep_seeds.push_back(to_u64(s, where));
        } else if (key == "threads") c.threads = static_cast<int>(to_u64(v, where));
        else if (key == "output") c.output = v;
        else if (key == "cache_dir") c.cache_dir = v;
        else if (key == "save_ensemble") c.save_ensemble = to_bool(v, where);
        else if (key == "save_filter_states") c.save_filter_states = to_bool(v, where);
        else throw ConfigError("unknown key '" + where + "'");
      } else if (section == "gates") {
        if (key == "kl_1d") c.gate_kl_1d = to_double(v, where);
        else if (key == "kl_2d") c.gate_kl_2d = to_double(v, where);
        else if (key == "label") c.gate_label = v;
        else throw ConfigError("unknown key '" + where + "'");
      }
    }
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot read config " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string to_ini(const ExperimentConfig& c) {
  std::ostringstream os;
  os << "[experiment]\n";
  if (!c.name.empty()) os << "name = " << c.name << '\n';
  os << "model = " << c.model << '\n';
  os << "seed = " << c.seed << '\n';
  if (c.truth_seed) os << "truth_seed = " << *c.truth_seed << '\n';
  os << "L = " << c.L << '\n';
  os << "L_mc = " << c.L_mc << '\n';
  os << "dt = " << fmt(c.dt) << '\n';
  if (c.t_end) os << "t_end = " << fmt(*c.t_end) << '\n';
  os << "snapshots = " << join(c.snapshots, ", ") << '\n';
  if (!c.marginals.empty()) {
    os << "marginals =";
    for (const auto& m : c.marginals) os << ' ' << join(m, ",");
    os << '\n';
  }
  if (!c.params.empty()) {
    os << "\n[params]\n";
    for (const auto& [k, v] : c.params) os << k << " = " << fmt(v) << '\n';
  }
  os << "\n[init]\n";
  os << "default = " << format_marginal_init(c.init_default) << '\n';
  for (const auto& [k, v] : c.init) os << k << " = " << format_marginal_init(v) << '\n';
  os << "\n[grid]\n";
  os << "points_1d = " << c.grid_points_1d << '\n';
  os << "points_2d = " << c.grid_points_2d << '\n';
  os << "width_sd = " << fmt(c.grid_width_sd) << '\n';
  for (const auto& [k, a] : c.grid) {
    os << k << " = " << fmt(a.min) << ':' << fmt(a.max) << ':' << a.points << '\n';
  }
  os << "\n[filter]\n";
  os << "init = " << (c.filter_init == FilterInit::Mode::kde_diagonal ? "kde" : "point") << '\n';
  if (c.epsilon) os << "epsilon = " << fmt(*c.epsilon) << '\n';
  os << "thinning = " << c.thinning << '\n';
  os << "\n[run]\n";
  if (!c.sweep.empty()) os << "sweep = " << join(c.sweep, ", ") << '\n';
  if (!c.sweep_seeds.empty()) os << "sweep_seeds = " << join(c.sweep_seeds, ", ") << '\n';
  os << "threads = " << c.threads << '\n';
  os << "output = " << c.output << '\n';
  if (!c.cache_dir.empty()) os << "cache_dir = " << c.cache_dir << '\n';
  os << "save_ensemble = " << (c.save_ensemble ? "true" : "false") << '\n';
  os << "save_filter_states = " << (c.save_filter_states ? "true" : "false") << '\n';
  if (c.gate_kl_1d || c.gate_kl_2d || !c.gate_label.empty()) {
    os << "\n[gates]\n";
    if (c.gate_kl_1d) os << "kl_1d = " << fmt(*c.gate_kl_1d) << '\n';
    if (c.gate_kl_2d) os << "kl_2d = " << fmt(*c.gate_kl_2d) << '\n';
    if (!c.gate_label.empty()) os << "label = " << c.gate_label << '\n';
  }
  return os.str();
}

CGSystemSpec build_spec(const ExperimentConfig& config) {
  return build_model(config.model, config.params);
}

InitialCondition build_initial_condition(const ExperimentConfig& config,
                                         const CGSystemSpec& spec) {
  for (const auto& [name, m] : config.init) {
    (void)m;
    spec.index_of(name);
  }
  InitialCondition ic;
  for (const auto& name : spec.names) {
    const auto it = config.init.find(name);
    ic.marginals.push_back(it != config.init.end() ? it->second : config.init_default);
  }
  ic.validate(spec.dim());
  return ic;
}

void validate_config(const ExperimentConfig& c) {
  const CGSystemSpec spec = build_spec(c);
  build_initial_condition(c, spec);
  if (c.L < 2) throw ConfigError("L must be >= 2");
  if (c.L_mc < 2) throw ConfigError("L_mc must be >= 2");
  if (!(c.dt > 0.0) || !std::isfinite(c.dt)) throw ConfigError("dt must be positive");
  if (c.thinning < 1) throw ConfigError("filter.thinning must be >= 1");
  if (c.epsilon && !(*c.epsilon > 0.0)) throw ConfigError("filter.epsilon must be > 0");
  if (!(c.grid_width_sd > 0.0)) throw ConfigError("grid.width_sd must be > 0");
  if (c.grid_points_1d < 2 || c.grid_points_2d < 2) throw ConfigError("grid points must be >= 2");
  const double t_end = c.resolved_t_end();
  step_count(t_end, c.dt);
  for (double t : c.snapshots) {
    if (!(t > 0.0)) throw ConfigError("snapshot times must be > 0");
    if (t > t_end * (1.0 + 1e-12)) {
      throw ConfigError("snapshot " + fmt(t) + " is beyond t_end = " + fmt(t_end));
    }
    const std::size_t k = step_count(t, c.dt);
    if (k % c.thinning != 0) {
      throw ConfigError("snapshot " + fmt(t) + " is not a multiple of dt * thinning");
    }
  }
  for (const auto& m : c.marginals) {
    if (m.empty() || m.size() > 2) throw ConfigError("each marginal names one or two variables");
    for (const auto& name : m) spec.index_of(name);
    if (m.size() == 2 && m[0] == m[1]) throw ConfigError("marginal repeats variable " + m[0]);
  }
  for (const auto& [name, axis] : c.grid) {
    (void)axis;
    spec.index_of(name);
  }
  for (auto L : c.sweep) {
    if (L < 2) throw ConfigError("sweep sizes must be >= 2");
  }
}

}  // namespace cgpdf
