#include "cgpdf/simulate.hpp"

#include "cgpdf/kde.hpp"
#include "cgpdf/rng.hpp"

#include <atomic>
#include <cmath>
#include <cstring>
#include <fstream>
#include <mutex>
#include <optional>

namespace cgpdf {

// --- initial conditions ----------------------------------------------------

MarginalInit MarginalInit::delta(double value) {
  MarginalInit m;
  m.kind = Kind::delta;
  m.mean = value;
  return m;
}

MarginalInit MarginalInit::gaussian(double mean, double variance) {
  MarginalInit m;
  m.kind = Kind::gaussian;
  m.mean = mean;
  m.variance = variance;
  return m;
}

MarginalInit MarginalInit::gamma(double shape, double scale) {
  MarginalInit m;
  m.kind = Kind::gamma;
  m.shape = shape;
  m.scale = scale;
  return m;
}

MarginalInit MarginalInit::bimodal(double mean1, double var1, double mean2, double var2,
                                   double weight1) {
  MarginalInit m;
  m.kind = Kind::bimodal_gaussian;
  m.mean = mean1;
  m.variance = var1;
  m.mean2 = mean2;
  m.variance2 = var2;
  m.weight1 = weight1;
  return m;
}

InitialCondition InitialCondition::delta(const Vector& state) {
  InitialCondition ic;
  for (Eigen::Index i = 0; i < state.size(); ++i) ic.marginals.push_back(MarginalInit::delta(state[i]));
  return ic;
}

InitialCondition InitialCondition::gaussian(const Vector& mean, const Vector& variance) {
  InitialCondition ic;
  for (Eigen::Index i = 0; i < mean.size(); ++i) {
    ic.marginals.push_back(MarginalInit::gaussian(mean[i], variance[i]));
  }
  return ic;
}

void InitialCondition::validate(std::size_t dim) const {
  if (custom_sampler) return;
  if (marginals.size() != dim) {
    throw ConfigError("initial condition has " + std::to_string(marginals.size()) +
                      " components, model has " + std::to_string(dim));
  }
  for (const auto& m : marginals) {
    switch (m.kind) {
      case MarginalInit::Kind::delta: break;
      case MarginalInit::Kind::gaussian:
        if (!(m.variance >= 0.0)) throw ConfigError("gaussian initial variance must be >= 0");
        break;
      case MarginalInit::Kind::gamma:
        if (!(m.shape > 0.0) || !(m.scale > 0.0)) {
          throw ConfigError("gamma initial condition requires shape > 0 and scale > 0");
        }
        break;
      case MarginalInit::Kind::bimodal_gaussian:
        if (!(m.variance >= 0.0) || !(m.variance2 >= 0.0) || !(m.weight1 >= 0.0) ||
            !(m.weight1 <= 1.0)) {
          throw ConfigError("bimodal initial condition needs variances >= 0 and weight in [0,1]");
        }
        break;
    }
  }
}

Vector InitialCondition::sample(std::mt19937_64& rng, std::size_t dim) const {
  if (custom_sampler) {
    Vector u = custom_sampler(rng);
    if (static_cast<std::size_t>(u.size()) != dim) {
      throw ConfigError("custom initial sampler returned the wrong dimension");
    }
    return u;
  }
  Vector u(static_cast<Eigen::Index>(dim));
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uniform;
  for (std::size_t i = 0; i < dim; ++i) {
    const auto& m = marginals[i];
    double v = 0.0;
    switch (m.kind) {
      case MarginalInit::Kind::delta: v = m.mean; break;
      case MarginalInit::Kind::gaussian: v = m.mean + std::sqrt(m.variance) * normal(rng); break;
      case MarginalInit::Kind::gamma: {
        std::gamma_distribution<double> gamma(m.shape, m.scale);
        v = gamma(rng);
        break;
      }
      case MarginalInit::Kind::bimodal_gaussian: {
        const bool first = uniform(rng) < m.weight1;
        v = first ? m.mean + std::sqrt(m.variance) * normal(rng)
                  : m.mean2 + std::sqrt(m.variance2) * normal(rng);
        break;
      }
    }
    u[static_cast<Eigen::Index>(i)] = v;
  }
  return u;
}

// --- paths -----------------------------------------------------------------

std::size_t EnsemblePaths::index_of_time(double t) const {
  const double k = std::round(t / dt);
  if (k < 0 || k >= static_cast<double>(n_times()) ||
      std::abs(k * dt - t) > 1e-9 * std::max(1.0, std::abs(t))) {
    throw ConfigError("time " + std::to_string(t) + " is not on the ensemble time grid");
  }
  return static_cast<std::size_t>(k);
}

Matrix EnsemblePaths::obs_at(std::size_t k) const {
  Matrix out(static_cast<Eigen::Index>(members), static_cast<Eigen::Index>(n_obs));
  for (std::size_t m = 0; m < members; ++m) {
    const auto row = obs(m, k);
    for (std::size_t j = 0; j < n_obs; ++j) out(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(j)) = row[j];
  }
  return out;
}

Matrix EnsemblePaths::hid_at(std::size_t k) const {
  Matrix out(static_cast<Eigen::Index>(members), static_cast<Eigen::Index>(n_hid));
  for (std::size_t m = 0; m < members; ++m) {
    const auto row = hid(m, k);
    for (std::size_t j = 0; j < n_hid; ++j) out(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(j)) = row[j];
  }
  return out;
}

namespace {

constexpr char kEnsembleMagic[8] = {'C', 'G', 'P', 'D', 'F', 'E', 'N', 'S'};

template <typename T>
void put(std::ofstream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T take(std::ifstream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw Error("truncated ensemble file");
  return value;
}

}  // namespace

void save_ensemble(const EnsemblePaths& p, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error("cannot open " + file.string() + " for writing");
  out.write(kEnsembleMagic, sizeof kEnsembleMagic);
  put<std::uint32_t>(out, 1);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(p.n_obs));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(p.n_hid));
  put<std::uint32_t>(out, 0);
  put<std::uint64_t>(out, p.members);
  put<std::uint64_t>(out, p.n_times());
  put<std::uint64_t>(out, p.seed);
  put<double>(out, p.dt);
  auto write_array = [&](const std::vector<double>& v) {
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
  };
  write_array(p.times);
  write_array(p.uI);
  write_array(p.uII);
  if (!out) throw Error("failed writing " + file.string());
}

EnsemblePaths load_ensemble(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error("cannot open " + file.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kEnsembleMagic, sizeof magic) != 0) {
    throw Error(file.string() + " is not an ensemble file");
  }
  if (take<std::uint32_t>(in) != 1) throw Error("unsupported ensemble file version");
  EnsemblePaths p;
  p.n_obs = take<std::uint32_t>(in);
  p.n_hid = take<std::uint32_t>(in);
  (void)take<std::uint32_t>(in);
  p.members = take<std::uint64_t>(in);
  const auto n_times = take<std::uint64_t>(in);
  p.seed = take<std::uint64_t>(in);
  p.dt = take<double>(in);
  auto read_array = [&](std::vector<double>& v, std::size_t n) {
    v.resize(n);
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) throw Error("truncated ensemble file " + file.string());
  };
  read_array(p.times, n_times);
  read_array(p.uI, p.members * n_times * p.n_obs);
  read_array(p.uII, p.members * n_times * p.n_hid);
  return p;
}

// --- Euler-Maruyama --------------------------------------------------------

std::size_t step_count(double t_end, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("dt must be positive");
  if (!(t_end >= 0.0)) throw ConfigError("end time must be >= 0");
  const double k = std::round(t_end / dt);
  if (std::abs(k * dt - t_end) > 1e-9 * std::max(1.0, t_end)) {
    throw ConfigError("time " + std::to_string(t_end) + " is not a multiple of dt = " +
                      std::to_string(dt));
  }
  return static_cast<std::size_t>(k);
}

namespace {

/// Noise application u += sqrt(dt) * blockdiag(S_I, S_II) z, with a fast path
/// for constant diagonal coefficients.
class NoiseApplier {
 public:
  explicit NoiseApplier(const CGSystemSpec& spec) : spec_(spec), coef_(spec.n_obs, spec.n_hid) {
    if (spec.constant_noise) {
      spec.coefficients(0.0, Vector::Zero(static_cast<Eigen::Index>(spec.n_obs)), coef_);
      diagonal_ = is_diagonal(coef_.sigma_I) && is_diagonal(coef_.sigma_II);
      if (diagonal_) {
        diag_.resize(static_cast<Eigen::Index>(spec.dim()));
        diag_.head(static_cast<Eigen::Index>(spec.n_obs)) = coef_.sigma_I.diagonal();
        diag_.tail(static_cast<Eigen::Index>(spec.n_hid)) = coef_.sigma_II.diagonal();
      }
    }
  }

  void apply(double t, Vector& u, double sqrt_dt, std::mt19937_64& rng,
             std::normal_distribution<double>& normal, Coefficients& scratch, Vector& z) const {
    const auto n_obs = static_cast<Eigen::Index>(spec_.n_obs);
    const auto n_hid = static_cast<Eigen::Index>(spec_.n_hid);
    if (spec_.constant_noise && diagonal_) {
      for (Eigen::Index i = 0; i < u.size(); ++i) u[i] += sqrt_dt * diag_[i] * normal(rng);
      return;
    }
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = normal(rng);
    const Coefficients* c = &coef_;
    if (!spec_.constant_noise) {
      spec_.coefficients(t, u.head(n_obs), scratch);
      c = &scratch;
    }
    u.head(n_obs) += sqrt_dt * (c->sigma_I * z.head(n_obs));
    u.tail(n_hid) += sqrt_dt * (c->sigma_II * z.tail(n_hid));
  }

 private:
  static bool is_diagonal(const Matrix& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        if (i != j && m(i, j) != 0.0) return false;
      }
    }
    return true;
  }

  const CGSystemSpec& spec_;
  Coefficients coef_;
  bool diagonal_ = false;
  Vector diag_;
};

/// Captures the first exception thrown inside a parallel loop.
class ErrorSlot {
 public:
  template <typename F>
  void run(F&& f) {
    if (failed_.load(std::memory_order_relaxed)) return;
    try {
      f();
    } catch (...) {
      std::lock_guard lock(mutex_);
      if (!error_) error_ = std::current_exception();
      failed_ = true;
    }
  }
  void rethrow() const {
    if (error_) std::rethrow_exception(error_);
  }

 private:
  std::atomic<bool> failed_{false};
  std::mutex mutex_;
  std::exception_ptr error_;
};

/// Integrates one member and calls `record(k, u)` after each step k.
template <typename Record>
void integrate_member(const CGSystemSpec& spec, const NoiseApplier& noise,
                      const InitialCondition& init, std::size_t member, std::size_t steps,
                      double dt, std::uint64_t seed, Record&& record) {
  auto init_rng = member_engine(seed, member, Stream::initial_condition);
  Vector u = init.sample(init_rng, spec.dim());
  auto rng = member_engine(seed, member, Stream::dynamics);
  std::normal_distribution<double> normal;
  Vector drift(static_cast<Eigen::Index>(spec.dim()));
  Vector z(static_cast<Eigen::Index>(spec.dim()));
  Coefficients scratch(spec.n_obs, spec.n_hid);
  const double sqrt_dt = std::sqrt(dt);
  record(std::size_t{0}, u);
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    spec.rhs(t, u, drift);
    u += dt * drift;
    noise.apply(t, u, sqrt_dt, rng, normal, scratch, z);
    if (!u.allFinite()) {
      throw NumericalError("non-finite state in member " + std::to_string(member) + " at t = " +
                           std::to_string(t + dt));
    }
    record(k + 1, u);
  }
}

}  // namespace

EnsemblePaths simulate_ensemble(const CGSystemSpec& spec, const InitialCondition& init,
                                std::size_t L, double dt, double t_end, std::uint64_t seed) {
  if (L < 1) throw ConfigError("ensemble size L must be >= 1");
  init.validate(spec.dim());
  const std::size_t steps = step_count(t_end, dt);
  if (steps < 1) throw ConfigError("end time must be at least one step");

  EnsemblePaths p;
  p.n_obs = spec.n_obs;
  p.n_hid = spec.n_hid;
  p.members = L;
  p.seed = seed;
  p.dt = dt;
  p.times.resize(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) p.times[k] = static_cast<double>(k) * dt;
  p.uI.resize(L * (steps + 1) * spec.n_obs);
  p.uII.resize(L * (steps + 1) * spec.n_hid);

  const NoiseApplier noise(spec);
  ErrorSlot errors;
  const auto n_obs = static_cast<Eigen::Index>(spec.n_obs);
  const auto n_hid = static_cast<Eigen::Index>(spec.n_hid);
#pragma omp parallel for schedule(dynamic, 4)
  for (std::ptrdiff_t m = 0; m < static_cast<std::ptrdiff_t>(L); ++m) {
    errors.run([&] {
      const auto member = static_cast<std::size_t>(m);
      integrate_member(spec, noise, init, member, steps, dt, seed,
                       [&](std::size_t k, const Vector& u) {
                         double* obs = p.uI.data() + (member * (steps + 1) + k) * spec.n_obs;
                         double* hid = p.uII.data() + (member * (steps + 1) + k) * spec.n_hid;
                         Eigen::Map<Vector>(obs, n_obs) = u.head(n_obs);
                         Eigen::Map<Vector>(hid, n_hid) = u.tail(n_hid);
                       });
    });
  }
  errors.rethrow();
  return p;
}

std::vector<Matrix> simulate_snapshots(const CGSystemSpec& spec, const InitialCondition& init,
                                       std::size_t L, double dt,
                                       const std::vector<double>& snapshot_times,
                                       std::uint64_t seed) {
  if (L < 1) throw ConfigError("ensemble size must be >= 1");
  init.validate(spec.dim());
  std::vector<std::size_t> snap_steps;
  std::size_t steps = 0;
  for (double t : snapshot_times) {
    snap_steps.push_back(step_count(t, dt));
    steps = std::max(steps, snap_steps.back());
  }
  std::vector<Matrix> out(snapshot_times.size(),
                          Matrix(static_cast<Eigen::Index>(L), static_cast<Eigen::Index>(spec.dim())));
  const NoiseApplier noise(spec);
  ErrorSlot errors;
#pragma omp parallel for schedule(dynamic, 64)
  for (std::ptrdiff_t m = 0; m < static_cast<std::ptrdiff_t>(L); ++m) {
    errors.run([&] {
      integrate_member(spec, noise, init, static_cast<std::size_t>(m), steps, dt, seed,
                       [&](std::size_t k, const Vector& u) {
                         for (std::size_t s = 0; s < snap_steps.size(); ++s) {
                           if (snap_steps[s] == k) out[s].row(m) = u.transpose();
                         }
                       });
    });
  }
  errors.rethrow();
  return out;
}

DensityField density_from_samples(const Matrix& samples, const std::vector<std::size_t>& dims,
                                  const GridSpec& grid) {
  if (dims.empty() || dims.size() != grid.dims()) {
    throw ConfigError("marginal dimensions do not match the grid");
  }
  Matrix sub(samples.rows(), static_cast<Eigen::Index>(dims.size()));
  for (std::size_t k = 0; k < dims.size(); ++k) {
    if (dims[k] >= static_cast<std::size_t>(samples.cols())) {
      throw ConfigError("marginal dimension index out of range");
    }
    sub.col(static_cast<Eigen::Index>(k)) = samples.col(static_cast<Eigen::Index>(dims[k]));
  }
  const BandwidthMatrix H = bandwidth_diag(sub);
  return kde_on_grid(sub, H, grid);
}

DensityField mc_truth_density(const CGSystemSpec& spec, const InitialCondition& init,
                              std::size_t L_mc, double dt, double t_snap, std::uint64_t seed,
                              const std::vector<std::size_t>& marginal_dims,
                              const GridSpec& grid) {
  if (marginal_dims.empty() || marginal_dims.size() > 2) {
    throw ConfigError("truth marginals must be 1D or 2D");
  }
  const auto snaps = simulate_snapshots(spec, init, L_mc, dt, {t_snap}, seed);
  return density_from_samples(snaps.front(), marginal_dims, grid);
}

Matrix long_run_samples(const CGSystemSpec& spec, double t_burn, double t_total, double dt,
                        std::uint64_t seed, double sample_interval, const Vector& initial_state) {
  if (!(t_total > t_burn)) throw ConfigError("long run requires t_total > t_burn");
  const std::size_t steps = step_count(t_total, dt);
  const std::size_t burn = static_cast<std::size_t>(std::ceil(t_burn / dt - 1e-9));
  const std::size_t stride =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(sample_interval / dt)));
  InitialCondition init = InitialCondition::delta(
      initial_state.size() > 0 ? initial_state : Vector::Zero(static_cast<Eigen::Index>(spec.dim())));
  const NoiseApplier noise(spec);
  std::vector<double> buffer;
  integrate_member(spec, noise, init, 0, steps, dt, seed, [&](std::size_t k, const Vector& u) {
    if (k >= burn && (k - burn) % stride == 0) buffer.insert(buffer.end(), u.begin(), u.end());
  });
  const auto dim = static_cast<Eigen::Index>(spec.dim());
  const auto rows = static_cast<Eigen::Index>(buffer.size()) / dim;
  return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      buffer.data(), rows, dim);
}

DensityField long_run_equilibrium(const CGSystemSpec& spec, double t_burn, double t_total,
                                  double dt, std::uint64_t seed,
                                  const std::vector<std::size_t>& marginal_dims,
                                  const GridSpec& grid, double sample_interval,
                                  const Vector& initial_state) {
  const Matrix samples =
      long_run_samples(spec, t_burn, t_total, dt, seed, sample_interval, initial_state);
  return density_from_samples(samples, marginal_dims, grid);
}

}  // namespace cgpdf
