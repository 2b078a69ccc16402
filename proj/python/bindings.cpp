#include "cgpdf/cg_filter.hpp"
#include "cgpdf/config.hpp"
#include "cgpdf/harness.hpp"
#include "cgpdf/kde.hpp"
#include "cgpdf/metrics.hpp"
#include "cgpdf/mixture.hpp"
#include "cgpdf/models.hpp"
#include "cgpdf/simulate.hpp"

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace pybind11::literals;
using namespace cgpdf;

namespace {

py::array_t<double> paths_array(const std::vector<double>& data, const EnsemblePaths& p,
                                std::size_t width) {
  py::array_t<double> out({p.members, p.n_times(), width});
  std::copy(data.begin(), data.end(), out.mutable_data());
  return out;
}

py::array_t<double> field_values(const DensityField& f) {
  std::vector<py::ssize_t> shape;
  for (const auto& a : f.grid.axes) shape.push_back(static_cast<py::ssize_t>(a.points));
  py::array_t<double> out(shape);
  std::copy(f.values.begin(), f.values.end(), out.mutable_data());
  return out;
}

DensityField field_from(const GridSpec& grid, py::array_t<double, py::array::c_style | py::array::forcecast> values) {
  DensityField f;
  f.grid = grid;
  grid.validate();
  if (static_cast<std::size_t>(values.size()) != grid.size()) {
    throw ConfigError("values have " + std::to_string(values.size()) + " entries, grid has " +
                      std::to_string(grid.size()));
  }
  f.values.assign(values.data(), values.data() + values.size());
  f.update_integral();
  return f;
}

InitialCondition gaussian_init(const Vector& mean, const Vector& variance) {
  if (variance.size() == 0) return InitialCondition::delta(mean);
  return InitialCondition::gaussian(mean, variance);
}

}  // namespace

PYBIND11_MODULE(_cgpdf, m) {
  m.doc() = "Conditional Gaussian PDF recovery";
  m.attr("__version__") = library_version();

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<NumericalError>(m, "NumericalError", base.ptr());

  py::class_<CGSystemSpec>(m, "Model")
      .def_readonly("id", &CGSystemSpec::id)
      .def_readonly("n_obs", &CGSystemSpec::n_obs)
      .def_readonly("n_hid", &CGSystemSpec::n_hid)
      .def_readonly("names", &CGSystemSpec::names)
      .def_property_readonly("dim", &CGSystemSpec::dim)
      .def("drift", [](const CGSystemSpec& s, double t, const Vector& u) { return s.drift(t, u); },
           "t"_a, "u"_a)
      .def("assembled_drift",
           [](const CGSystemSpec& s, double t, const Vector& u) { return s.assembled_drift(t, u); },
           "t"_a, "u"_a)
      .def("energy_violation",
           [](const CGSystemSpec& s, std::size_t trials, std::uint64_t seed) {
             const auto r = check_energy_conservation(s, trials, 0.0, seed);
             return r.applicable ? py::object(py::float_(r.max_violation)) : py::object(py::none());
           },
           "trials"_a = 10000, "seed"_a = 2024,
           "Max relative |u.B(u,u)| over random states, or None without a quadratic part.")
      .def("__repr__", [](const CGSystemSpec& s) {
        return "<Model " + s.id + " n_obs=" + std::to_string(s.n_obs) +
               " n_hid=" + std::to_string(s.n_hid) + ">";
      });

  m.def("model_ids", &model_ids);
  m.def("default_params", [](const std::string& id) { return default_params(id).values(); }, "id"_a);
  m.def("build_model", [](const std::string& id, const ParamMap& p) { return build_model(id, p); },
        "id"_a, "params"_a = ParamMap{});

  m.def(
      "simulate",
      [](const CGSystemSpec& spec, std::size_t L, double dt, double t_end, std::uint64_t seed,
         const Vector& mean, const Vector& variance) {
        const auto p = simulate_ensemble(spec, gaussian_init(mean, variance), L, dt, t_end, seed);
        py::dict out;
        out["times"] = p.times;
        out["uI"] = paths_array(p.uI, p, p.n_obs);
        out["uII"] = paths_array(p.uII, p, p.n_hid);
        return out;
      },
      "model"_a, "L"_a, "dt"_a, "t_end"_a, "seed"_a, "mean"_a, "variance"_a = Vector(),
      "Euler-Maruyama ensemble. Returns times, uI[L, T, n_obs] and uII[L, T, n_hid]; an "
      "empty variance starts every member at `mean`.");

  m.def("solve_bandwidth",
        [](const std::vector<double>& x) {
          const auto b = solve_bandwidth_1d(x);
          return py::make_tuple(b.h, b.fallback);
        },
        "samples"_a, "Plug-in bandwidth h and whether the Gaussian-reference fallback was used.");
  m.def("reference_bandwidth",
        [](const std::vector<double>& x) { return gaussian_reference_bandwidth(x); }, "samples"_a);
  m.def("bandwidth_diag", [](const Matrix& s) { return bandwidth_diag(s).diag; }, "samples"_a,
        "Squared per-dimension bandwidths for samples[L, d].");
  m.def("kde_evaluate",
        [](const Matrix& s, const Vector& H, const Matrix& q) {
          return kde_evaluate(s, BandwidthMatrix{H, std::vector<bool>(H.size(), false)}, q);
        },
        "samples"_a, "H"_a, "queries"_a);

  py::class_<GridAxis>(m, "GridAxis")
      .def(py::init([](double lo, double hi, std::size_t n, std::string label) {
             return GridAxis{lo, hi, n, std::move(label)};
           }),
           "min"_a, "max"_a, "points"_a, "label"_a = "")
      .def_readonly("min", &GridAxis::min)
      .def_readonly("max", &GridAxis::max)
      .def_readonly("points", &GridAxis::points)
      .def_readonly("label", &GridAxis::label)
      .def("coords", [](const GridAxis& a) {
        std::vector<double> c(a.points);
        for (std::size_t i = 0; i < a.points; ++i) c[i] = a.coord(i);
        return c;
      });

  m.def(
      "kde_on_grid",
      [](const Matrix& s, const std::vector<GridAxis>& axes) {
        return field_values(kde_on_grid(s, bandwidth_diag(s), GridSpec{axes}));
      },
      "samples"_a, "axes"_a, "Plug-in KDE of samples[L, d] tabulated on the grid.");
  m.def(
      "relative_entropy",
      [](const std::vector<GridAxis>& axes, py::array_t<double> truth, py::array_t<double> model) {
        const GridSpec g{axes};
        const auto r = relative_entropy(field_from(g, truth), field_from(g, model));
        return py::make_tuple(r.value, r.floor_mass);
      },
      "axes"_a, "truth"_a, "model"_a, "KL(truth || model) on a grid and the floored mass.");
  m.def("trapezoid",
        [](const std::vector<GridAxis>& axes, py::array_t<double> values) {
          return field_from(GridSpec{axes}, values).integral;
        },
        "axes"_a, "values"_a);

  m.def(
      "recover",
      [](const CGSystemSpec& spec, std::size_t L, double dt, double t, std::uint64_t seed,
         const Vector& mean, const Vector& variance) {
        const auto paths = simulate_ensemble(spec, gaussian_init(mean, variance), L, dt, t, seed);
        const auto init = init_states(paths.hid_at(0), FilterInit{});
        const auto runs = run_filters(spec, paths, init, {t});
        std::vector<ConditionalGaussianState> states;
        for (const auto& r : runs) states.push_back(r.states[0]);
        const Matrix uI = paths.obs_at(paths.index_of_time(t));
        const auto mix = assemble_joint(uI, mixture_bandwidth(uI), states);
        py::dict out;
        out["means"] = mix.means;
        out["H"] = mix.H;
        out["hid_cov"] = mix.hid_cov;
        out["mean"] = mixture_mean(mix);
        out["cov"] = mixture_covariance(mix);
        return out;
      },
      "model"_a, "L"_a, "dt"_a, "t"_a, "seed"_a, "mean"_a, "variance"_a = Vector(),
      "Simulate, filter and assemble the hybrid mixture at time t.");

  py::class_<ExperimentConfig>(m, "Config")
      .def(py::init([](const std::string& text) { return parse_config(text); }), "text"_a = "")
      .def_static("load", [](const std::filesystem::path& f) { return load_config(f); }, "path"_a)
      .def_readwrite("name", &ExperimentConfig::name)
      .def_readwrite("model", &ExperimentConfig::model)
      .def_readwrite("L", &ExperimentConfig::L)
      .def_readwrite("L_mc", &ExperimentConfig::L_mc)
      .def_readwrite("dt", &ExperimentConfig::dt)
      .def_readwrite("snapshots", &ExperimentConfig::snapshots)
      .def_readwrite("seed", &ExperimentConfig::seed)
      .def_readwrite("output", &ExperimentConfig::output)
      .def_readwrite("cache_dir", &ExperimentConfig::cache_dir)
      .def_readwrite("save_ensemble", &ExperimentConfig::save_ensemble)
      .def("validate", [](const ExperimentConfig& c) { validate_config(c); })
      .def("to_ini", [](const ExperimentConfig& c) { return to_ini(c); });

  m.def(
      "run_experiment",
      [](const ExperimentConfig& c) {
        RunReport r;
        {
          py::gil_scoped_release release;
          r = run_experiment(c);
        }
        py::list kl;
        for (const auto& s : r.result.snapshots) {
          for (const auto& mr : s.marginals) {
            kl.append(py::dict("t"_a = s.t, "variables"_a = mr.request.variables,
                               "kl"_a = mr.kl.value, "floor_mass"_a = mr.kl.floor_mass));
          }
        }
        return py::dict("config_hash"_a = r.config_hash, "output"_a = r.output,
                        "files"_a = r.files, "gates_pass"_a = r.gates_pass, "kl"_a = kl);
      },
      "config"_a,
      "Runs a full experiment, writes its artifacts and returns a summary.");
}
