#include "cgpdf/mixture.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace cgpdf {

Matrix GaussianMixture::component_cov(std::size_t i) const {
  const auto no = static_cast<Eigen::Index>(n_obs);
  const auto nh = static_cast<Eigen::Index>(n_hid);
  Matrix c = Matrix::Zero(no + nh, no + nh);
  if (no > 0) c.topLeftCorner(no, no) = H.asDiagonal();
  if (nh > 0) c.bottomRightCorner(nh, nh) = hid_cov[i];
  return c;
}

GaussianMixture assemble_joint(const Matrix& uI_endpoints, const BandwidthMatrix& H,
                               const std::vector<ConditionalGaussianState>& hid_states) {
  const auto L = static_cast<std::size_t>(uI_endpoints.rows());
  if (L == 0) throw ConfigError("assemble_joint: no members");
  if (hid_states.size() != L) {
    throw ConfigError("assemble_joint: " + std::to_string(hid_states.size()) +
                      " hidden states for " + std::to_string(L) + " observed endpoints");
  }
  if (static_cast<Eigen::Index>(H.dims()) != uI_endpoints.cols()) {
    throw ConfigError("assemble_joint: bandwidth dimension does not match observed dimension");
  }
  GaussianMixture mix;
  mix.n_obs = static_cast<std::size_t>(uI_endpoints.cols());
  mix.n_hid = static_cast<std::size_t>(hid_states.front().mean.size());
  mix.t = hid_states.front().t;
  mix.H = H.diag;
  const auto no = static_cast<Eigen::Index>(mix.n_obs);
  const auto nh = static_cast<Eigen::Index>(mix.n_hid);
  mix.means.resize(static_cast<Eigen::Index>(L), no + nh);
  mix.hid_cov.reserve(L);
  for (std::size_t i = 0; i < L; ++i) {
    const auto& s = hid_states[i];
    if (std::abs(s.t - mix.t) > 1e-9 * std::max(1.0, std::abs(mix.t))) {
      throw ConfigError("assemble_joint: hidden states have different timestamps");
    }
    if (s.mean.size() != nh || s.cov.rows() != nh || s.cov.cols() != nh) {
      throw ConfigError("assemble_joint: hidden state dimension mismatch");
    }
    const auto row = static_cast<Eigen::Index>(i);
    mix.means.row(row).head(no) = uI_endpoints.row(row);
    mix.means.row(row).tail(nh) = s.mean.transpose();
    mix.hid_cov.push_back(s.cov);
  }
  return mix;
}

GaussianMixture marginal(const GaussianMixture& mix, const std::vector<std::size_t>& dims) {
  if (dims.empty()) throw ConfigError("marginal: no dimensions selected");
  std::vector<Eigen::Index> obs, hid;
  for (std::size_t d : dims) {
    if (d >= mix.dims()) {
      throw ConfigError("marginal: index " + std::to_string(d) + " out of range");
    }
    if (d < mix.n_obs) {
      if (!hid.empty()) throw ConfigError("marginal: observed indices must precede hidden ones");
      obs.push_back(static_cast<Eigen::Index>(d));
    } else {
      hid.push_back(static_cast<Eigen::Index>(d - mix.n_obs));
    }
  }
  GaussianMixture out;
  out.n_obs = obs.size();
  out.n_hid = hid.size();
  out.t = mix.t;
  out.H.resize(static_cast<Eigen::Index>(obs.size()));
  for (std::size_t k = 0; k < obs.size(); ++k) out.H[static_cast<Eigen::Index>(k)] = mix.H[obs[k]];
  const Eigen::Index L = mix.means.rows();
  out.means.resize(L, static_cast<Eigen::Index>(dims.size()));
  for (std::size_t k = 0; k < dims.size(); ++k) {
    out.means.col(static_cast<Eigen::Index>(k)) = mix.means.col(static_cast<Eigen::Index>(dims[k]));
  }
  out.hid_cov.reserve(mix.hid_cov.size());
  const auto nh = static_cast<Eigen::Index>(hid.size());
  for (const auto& R : mix.hid_cov) {
    Matrix sub(nh, nh);
    for (Eigen::Index a = 0; a < nh; ++a) {
      for (Eigen::Index b = 0; b < nh; ++b) sub(a, b) = R(hid[a], hid[b]);
    }
    out.hid_cov.push_back(std::move(sub));
  }
  return out;
}

namespace {

/// Precision matrix and log normalizer of one component, with jitter for a
/// singular covariance.
struct ComponentFactor {
  Matrix precision;
  double log_norm = 0.0;
  Vector sd;
};

ComponentFactor factor(const Matrix& cov) {
  const Eigen::Index d = cov.rows();
  Matrix c = cov;
  double jitter = 0.0;
  for (int attempt = 0; attempt < 40; ++attempt) {
    Eigen::LLT<Matrix> llt(c);
    if (llt.info() == Eigen::Success && llt.matrixL().toDenseMatrix().diagonal().minCoeff() > 0.0) {
      ComponentFactor f;
      f.precision = llt.solve(Matrix::Identity(d, d));
      const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
      f.log_norm = -0.5 * (static_cast<double>(d) * std::log(2.0 * std::numbers::pi) + log_det);
      f.sd = c.diagonal().cwiseSqrt();
      return f;
    }
    jitter = jitter == 0.0 ? 1e-14 * std::max(1.0, cov.trace()) : jitter * 10.0;
    c = cov + jitter * Matrix::Identity(d, d);
  }
  throw NumericalError("mixture component covariance is not positive definite");
}

}  // namespace

DensityField evaluate_on_grid(const GaussianMixture& mix, const GridSpec& grid) {
  grid.validate();
  const std::size_t d = mix.dims();
  if (grid.dims() != d) throw ConfigError("evaluate_on_grid: grid and mixture dimensions differ");
  if (d > 3) throw ConfigError("evaluate_on_grid supports at most 3 dimensions");
  const std::size_t L = mix.components();
  std::vector<ComponentFactor> factors(L);
  for (std::size_t i = 0; i < L; ++i) factors[i] = factor(mix.component_cov(i));

  std::array<std::size_t, 3> n{1, 1, 1};
  for (std::size_t a = 0; a < d; ++a) n[a] = grid.axes[a].points;

  // Per component and axis, the index range [lo, hi] within 8 sd of the mean.
  std::vector<std::array<std::ptrdiff_t, 3>> lo(L), hi(L);
  for (std::size_t i = 0; i < L; ++i) {
    for (std::size_t a = 0; a < 3; ++a) {
      if (a >= d) {
        lo[i][a] = 0;
        hi[i][a] = 0;
        continue;
      }
      const auto& ax = grid.axes[a];
      const double mu = mix.means(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(a));
      const double r = 8.0 * factors[i].sd[static_cast<Eigen::Index>(a)];
      lo[i][a] = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(std::ceil((mu - r - ax.min) / ax.step())));
      hi[i][a] = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(ax.points) - 1,
                                          static_cast<std::ptrdiff_t>(std::floor((mu + r - ax.min) / ax.step())));
    }
  }

  DensityField field;
  field.grid = grid;
  field.values.assign(grid.size(), 0.0);
  const double w = mix.weight();
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t r0 = 0; r0 < static_cast<std::ptrdiff_t>(n[0]); ++r0) {
    Eigen::Vector3d z = Eigen::Vector3d::Zero();
    for (std::size_t i = 0; i < L; ++i) {
      if (r0 < lo[i][0] || r0 > hi[i][0]) continue;
      const auto row = static_cast<Eigen::Index>(i);
      const Matrix& P = factors[i].precision;
      const double scale = w * std::exp(factors[i].log_norm);
      z[0] = grid.axes[0].coord(static_cast<std::size_t>(r0)) - mix.means(row, 0);
      for (std::ptrdiff_t r1 = lo[i][1]; r1 <= hi[i][1]; ++r1) {
        if (d > 1) z[1] = grid.axes[1].coord(static_cast<std::size_t>(r1)) - mix.means(row, 1);
        for (std::ptrdiff_t r2 = lo[i][2]; r2 <= hi[i][2]; ++r2) {
          if (d > 2) z[2] = grid.axes[2].coord(static_cast<std::size_t>(r2)) - mix.means(row, 2);
          double quad = 0.0;
          for (std::size_t a = 0; a < d; ++a) {
            for (std::size_t b = 0; b < d; ++b) {
              quad += z[static_cast<Eigen::Index>(a)] * P(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) *
                      z[static_cast<Eigen::Index>(b)];
            }
          }
          const std::size_t flat = (static_cast<std::size_t>(r0) * n[1] + static_cast<std::size_t>(r1)) * n[2] +
                                   static_cast<std::size_t>(r2);
          field.values[flat] += scale * std::exp(-0.5 * quad);
        }
      }
    }
  }
  field.update_integral();
  return field;
}

Vector evaluate_points(const GaussianMixture& mix, const Matrix& points) {
  const auto d = static_cast<Eigen::Index>(mix.dims());
  if (points.cols() != d) throw ConfigError("evaluate_points: dimension mismatch");
  const std::size_t L = mix.components();
  std::vector<ComponentFactor> factors(L);
  for (std::size_t i = 0; i < L; ++i) factors[i] = factor(mix.component_cov(i));
  Vector out = Vector::Zero(points.rows());
  for (Eigen::Index q = 0; q < points.rows(); ++q) {
    double sum = 0.0;
    for (std::size_t i = 0; i < L; ++i) {
      const Vector z = (points.row(q) - mix.means.row(static_cast<Eigen::Index>(i))).transpose();
      sum += std::exp(factors[i].log_norm - 0.5 * z.dot(factors[i].precision * z));
    }
    out[q] = sum * mix.weight();
  }
  return out;
}

Moments mixture_moments(const GaussianMixture& mix, std::size_t dim) {
  if (dim >= mix.dims()) throw ConfigError("mixture_moments: index out of range");
  const auto col = static_cast<Eigen::Index>(dim);
  const std::size_t L = mix.components();
  auto component_var = [&](std::size_t i) {
    return dim < mix.n_obs ? mix.H[col]
                           : mix.hid_cov[i](col - static_cast<Eigen::Index>(mix.n_obs),
                                            col - static_cast<Eigen::Index>(mix.n_obs));
  };
  const double mean = mix.means.col(col).mean();
  double c2 = 0.0, c3 = 0.0, c4 = 0.0;
  for (std::size_t i = 0; i < L; ++i) {
    const double delta = mix.means(static_cast<Eigen::Index>(i), col) - mean;
    const double s2 = component_var(i);
    c2 += delta * delta + s2;
    c3 += delta * delta * delta + 3.0 * delta * s2;
    c4 += delta * delta * delta * delta + 6.0 * delta * delta * s2 + 3.0 * s2 * s2;
  }
  const double n = static_cast<double>(L);
  c2 /= n;
  c3 /= n;
  c4 /= n;
  if (!(c2 > 0.0)) throw NumericalError("mixture marginal has zero variance");
  return {mean, c2, c3 / std::pow(c2, 1.5), c4 / (c2 * c2)};
}

Vector mixture_mean(const GaussianMixture& mix) { return mix.means.colwise().mean().transpose(); }

Matrix mixture_covariance(const GaussianMixture& mix) {
  const Vector mean = mixture_mean(mix);
  const auto d = static_cast<Eigen::Index>(mix.dims());
  Matrix cov = Matrix::Zero(d, d);
  for (std::size_t i = 0; i < mix.components(); ++i) {
    const Vector delta = mix.means.row(static_cast<Eigen::Index>(i)).transpose() - mean;
    cov += mix.component_cov(i) + delta * delta.transpose();
  }
  return cov / static_cast<double>(mix.components());
}

Matrix sample_mixture(const GaussianMixture& mix, std::size_t n, std::mt19937_64& rng) {
  const auto d = static_cast<Eigen::Index>(mix.dims());
  const std::size_t L = mix.components();
  std::vector<Matrix> chol(L);
  for (std::size_t i = 0; i < L; ++i) {
    Eigen::LDLT<Matrix> ldlt(mix.component_cov(i));
    const Matrix D = ldlt.vectorD().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    chol[i] = ldlt.transpositionsP().transpose() * Matrix(ldlt.matrixL()) * D;
  }
  std::uniform_int_distribution<std::size_t> pick(0, L - 1);
  std::normal_distribution<double> normal;
  Matrix out(static_cast<Eigen::Index>(n), d);
  Vector z(d);
  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t i = pick(rng);
    for (Eigen::Index k = 0; k < d; ++k) z[k] = normal(rng);
    out.row(static_cast<Eigen::Index>(s)) =
        mix.means.row(static_cast<Eigen::Index>(i)) + (chol[i] * z).transpose();
  }
  return out;
}

}  // namespace cgpdf
