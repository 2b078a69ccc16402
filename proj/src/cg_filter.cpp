#include "cgpdf/cg_filter.hpp"

#include "cgpdf/kde.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>

namespace cgpdf {

namespace {

/// Symmetrizes in place and clamps negative eigenvalues to zero. Returns the
/// pre-clamp violation -min_eig / trace, or 0 when the matrix was PSD.
double make_psd(Matrix& R) {
  R = 0.5 * (R + R.transpose()).eval();
  if (R.size() == 0) return 0.0;
  Eigen::LLT<Matrix> llt(R);
  if (llt.info() == Eigen::Success) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(R);
  if (eig.info() != Eigen::Success) throw NumericalError("covariance eigen-decomposition failed");
  const Vector& lambda = eig.eigenvalues();
  const double min_eig = lambda.minCoeff();
  if (min_eig >= 0.0) return 0.0;
  const double trace = std::max(R.trace(), 0.0);
  const Vector clamped = lambda.cwiseMax(0.0);
  R = eig.eigenvectors() * clamped.asDiagonal() * eig.eigenvectors().transpose();
  R = 0.5 * (R + R.transpose()).eval();
  return trace > 0.0 ? -min_eig / trace : std::numeric_limits<double>::infinity();
}

}  // namespace

ConditionalGaussianState filter_step(const CGSystemSpec& spec,
                                     const ConditionalGaussianState& state, double t,
                                     const ConstVectorRef& uI_t, const ConstVectorRef& duI,
                                     double dt, FilterDiagnostics* diagnostics) {
  const Coefficients c = spec.eval(t, uI_t);
  const Matrix noise_I = c.sigma_I * c.sigma_I.transpose();
  Eigen::LDLT<Matrix> solver(noise_I);
  if (solver.info() != Eigen::Success || !solver.isPositive() ||
      solver.vectorD().cwiseAbs().minCoeff() <= 1e-300) {
    throw NumericalError("singular observation noise covariance at t = " + std::to_string(t));
  }
  const Vector& m = state.mean;
  const Matrix& R = state.cov;
  const Matrix RA1t = R * c.A1.transpose();                       // n_hid x n_obs
  const Matrix gain = solver.solve(RA1t.transpose()).transpose();  // R A1^T (S S^T)^{-1}
  const Vector innovation = duI - (c.A0 + c.A1 * m) * dt;

  ConditionalGaussianState next;
  next.t = t + dt;
  next.mean = m + (c.a0 + c.a1 * m) * dt + gain * innovation;
  next.cov = R + (c.a1 * R + R * c.a1.transpose() + c.sigma_II * c.sigma_II.transpose() -
                  gain * RA1t.transpose()) *
                     dt;
  const double violation = make_psd(next.cov);
  if (!next.mean.allFinite() || !next.cov.allFinite()) {
    throw NumericalError("non-finite filter update at t = " + std::to_string(t));
  }
  if (diagnostics && violation > 0.0) {
    diagnostics->max_negative_ratio = std::max(diagnostics->max_negative_ratio, violation);
    ++diagnostics->clamp_count;
  }
  return next;
}

FilterRun run_filter(const CGSystemSpec& spec, const EnsemblePaths& paths, std::size_t member,
                     const ConditionalGaussianState& init,
                     const std::vector<double>& snapshot_times, std::size_t thinning) {
  if (thinning < 1) throw ConfigError("filter thinning must be >= 1");
  if (member >= paths.members) throw ConfigError("member index out of range");
  if (static_cast<std::size_t>(init.mean.size()) != spec.n_hid ||
      static_cast<std::size_t>(init.cov.rows()) != spec.n_hid) {
    throw ConfigError("initial filter state has the wrong dimension");
  }
  FilterRun run;
  if (snapshot_times.empty()) return run;
  std::vector<std::size_t> snap_idx;
  std::size_t last = 0;
  for (double t : snapshot_times) {
    const std::size_t k = paths.index_of_time(t);
    if (k % thinning != 0) {
      throw ConfigError("snapshot " + std::to_string(t) + " is not on the thinned filter grid");
    }
    snap_idx.push_back(k);
    last = std::max(last, k);
  }
  run.states.resize(snap_idx.size());
  auto record = [&](std::size_t k, const ConditionalGaussianState& s) {
    for (std::size_t i = 0; i < snap_idx.size(); ++i) {
      if (snap_idx[i] == k) run.states[i] = s;
    }
  };
  const auto n_obs = static_cast<Eigen::Index>(paths.n_obs);
  const double dt = paths.dt * static_cast<double>(thinning);
  ConditionalGaussianState state = init;
  state.t = paths.times[0];
  record(0, state);
  for (std::size_t k = 0; k + thinning <= last; k += thinning) {
    const auto now = paths.obs(member, k);
    const auto next = paths.obs(member, k + thinning);
    const Eigen::Map<const Vector> uI(now.data(), n_obs);
    const Vector duI = Eigen::Map<const Vector>(next.data(), n_obs) - uI;
    try {
      state = filter_step(spec, state, paths.times[k], uI, duI, dt, &run.diagnostics);
    } catch (const NumericalError& e) {
      throw NumericalError(std::string(e.what()) + " (member " + std::to_string(member) + ")");
    }
    state.t = paths.times[k + thinning];
    record(k + thinning, state);
  }
  return run;
}

std::vector<FilterRun> run_filters(const CGSystemSpec& spec, const EnsemblePaths& paths,
                                   const std::vector<ConditionalGaussianState>& init,
                                   const std::vector<double>& snapshot_times,
                                   std::size_t thinning) {
  if (init.size() != paths.members) {
    throw ConfigError("need one initial filter state per ensemble member");
  }
  std::vector<FilterRun> runs(paths.members);
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex mutex;
#pragma omp parallel for schedule(dynamic, 4)
  for (std::ptrdiff_t m = 0; m < static_cast<std::ptrdiff_t>(paths.members); ++m) {
    if (failed.load(std::memory_order_relaxed)) continue;
    try {
      const auto member = static_cast<std::size_t>(m);
      runs[member] = run_filter(spec, paths, member, init[member], snapshot_times, thinning);
    } catch (...) {
      std::lock_guard lock(mutex);
      if (!error) error = std::current_exception();
      failed = true;
    }
  }
  if (error) std::rethrow_exception(error);
  return runs;
}

double default_point_epsilon(double sample_variance) {
  return 1e-4 * std::max(sample_variance, 1e-6);
}

std::vector<ConditionalGaussianState> init_states(const Matrix& uII_samples_at_0,
                                                  const FilterInit& init, double t0) {
  const Eigen::Index L = uII_samples_at_0.rows();
  const Eigen::Index n = uII_samples_at_0.cols();
  if (L < 1) throw ConfigError("init_states needs at least one member");
  if (init.epsilon && !(*init.epsilon > 0.0)) throw ConfigError("epsilon must be > 0");

  Vector diag(n);
  for (Eigen::Index d = 0; d < n; ++d) {
    const auto col = uII_samples_at_0.col(d);
    const double mean = col.mean();
    const double var = (col.array() - mean).square().mean();
    const double point = init.epsilon ? *init.epsilon : default_point_epsilon(var);
    diag[d] = point;
    if (init.mode == FilterInit::Mode::kde_diagonal && L >= 2 && var > 0.0) {
      std::vector<double> values(col.data(), col.data() + L);
      const Bandwidth1D bw = solve_bandwidth_1d(values);
      diag[d] = bw.h * bw.h;
    }
  }
  std::vector<ConditionalGaussianState> states(static_cast<std::size_t>(L));
  for (Eigen::Index i = 0; i < L; ++i) {
    auto& s = states[static_cast<std::size_t>(i)];
    s.mean = uII_samples_at_0.row(i).transpose();
    s.cov = diag.asDiagonal();
    s.t = t0;
  }
  return states;
}

}  // namespace cgpdf
