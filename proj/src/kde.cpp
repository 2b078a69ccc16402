#include "cgpdf/kde.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace cgpdf {

namespace {

constexpr std::size_t kBins = 4096;
constexpr int kFixedPointOrder = 7;

double population_sd(std::span<const double> x) {
  const double n = static_cast<double>(x.size());
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / n);
}

/// Squared half-coefficients (a_k / 2)^2, k = 1..n-1, of the DCT-II of the
/// binned empirical measure: a_k = 2 sum_j w_j cos(pi k (2j+1) / 2n).
std::vector<double> binned_dct_power(std::span<const double> samples, double lo, double span) {
  std::vector<double> weight(kBins, 0.0);
  const double inv_width = static_cast<double>(kBins) / span;
  for (double x : samples) {
    auto bin = static_cast<std::size_t>((x - lo) * inv_width);
    weight[std::min(bin, kBins - 1)] += 1.0;
  }
  const double total = static_cast<double>(samples.size());
  std::vector<std::size_t> occupied;
  for (std::size_t j = 0; j < kBins; ++j) {
    if (weight[j] > 0.0) {
      weight[j] /= total;
      occupied.push_back(j);
    }
  }
  // cos(pi m / 2n) tabulated for m in [0, 4n); the argument index
  // k (2j+1) is reduced modulo 4n.
  const std::size_t period = 4 * kBins;
  std::vector<double> cos_table(period);
  for (std::size_t m = 0; m < period; ++m) {
    cos_table[m] = std::cos(std::numbers::pi * static_cast<double>(m) / (2.0 * kBins));
  }
  std::vector<double> power(kBins - 1);
  for (std::size_t k = 1; k < kBins; ++k) {
    double a = 0.0;
    for (std::size_t j : occupied) a += weight[j] * cos_table[(k * (2 * j + 1)) % period];
    a *= 2.0;
    power[k - 1] = 0.25 * a * a;
  }
  return power;
}

/// k^2 and (k^2)^s * power_k for s = 2..l, tabulated once per sample set.
struct CurvatureTable {
  std::vector<double> kk;
  std::vector<std::vector<double>> weighted;  // indexed by s

  explicit CurvatureTable(const std::vector<double>& power)
      : kk(power.size()), weighted(kFixedPointOrder + 1) {
    for (std::size_t k = 0; k < power.size(); ++k) {
      kk[k] = static_cast<double>(k + 1) * static_cast<double>(k + 1);
    }
    for (int s = 2; s <= kFixedPointOrder; ++s) {
      auto& w = weighted[static_cast<std::size_t>(s)];
      w.resize(power.size());
      for (std::size_t k = 0; k < power.size(); ++k) w[k] = std::pow(kk[k], s) * power[k];
    }
  }

  /// 2 pi^(2s) sum_k (k^2)^s power_k exp(-k^2 pi^2 t)
  double functional(int s, double t) const {
    const double pi2 = std::numbers::pi * std::numbers::pi;
    const auto& w = weighted[static_cast<std::size_t>(s)];
    double sum = 0.0;
    for (std::size_t k = 0; k < kk.size(); ++k) {
      const double e = std::exp(-kk[k] * pi2 * t);
      if (e == 0.0) break;
      sum += w[k] * e;
    }
    return 2.0 * std::pow(std::numbers::pi, 2 * s) * sum;
  }
};

/// t - xi * gamma^[l](t) in the unit-interval scaling of the binned data.
double fixed_point_residual(double t, double n, const CurvatureTable& table) {
  double f = table.functional(kFixedPointOrder, t);
  for (int s = kFixedPointOrder - 1; s >= 2; --s) {
    double odd_factorial = 1.0;
    for (int m = 1; m <= 2 * s - 1; m += 2) odd_factorial *= m;
    const double K0 = odd_factorial / std::sqrt(2.0 * std::numbers::pi);
    const double c = (1.0 + std::pow(0.5, s + 0.5)) / 3.0;
    const double time = std::pow(2.0 * c * K0 / n / f, 2.0 / (3.0 + 2.0 * s));
    f = table.functional(s, time);
  }
  return t - std::pow(2.0 * n * std::sqrt(std::numbers::pi) * f, -0.4);
}

}  // namespace

double gaussian_reference_bandwidth(std::span<const double> samples) {
  if (samples.size() < 2) throw ConfigError("bandwidth needs at least two samples");
  return population_sd(samples) * std::pow(4.0 / (3.0 * static_cast<double>(samples.size())), 0.2);
}

Bandwidth1D solve_bandwidth_1d(std::span<const double> samples) {
  if (samples.size() < 2) throw ConfigError("bandwidth needs at least two samples");
  const auto [min_it, max_it] = std::minmax_element(samples.begin(), samples.end());
  const double range = *max_it - *min_it;
  const double sd = population_sd(samples);
  if (!(range > 0.0) || !(sd > 0.0) || !std::isfinite(range)) {
    throw ConfigError("bandwidth needs samples with nonzero variance");
  }
  const double lo = *min_it - range / 10.0;
  const double span = range * 1.2;
  const CurvatureTable table(binned_dct_power(samples, lo, span));
  const double n = static_cast<double>(samples.size());

  auto residual = [&](double t) { return fixed_point_residual(t, n, table); };
  // The residual can change sign more than once; bisect on the first
  // bracket found on a log-spaced scan of [1e-12, 1] * sd^2 / span^2.
  const double t_min = 1e-12 * sd * sd / (span * span);
  const double t_max = sd * sd / (span * span);
  constexpr int kScan = 64;
  double t_lo = t_min;
  double r_lo = residual(t_lo);
  double t_hi = 0.0;
  bool bracketed = false;
  for (int i = 1; i <= kScan && std::isfinite(r_lo); ++i) {
    const double t = t_min * std::pow(t_max / t_min, static_cast<double>(i) / kScan);
    const double r = residual(t);
    if (!std::isfinite(r)) break;
    if ((r < 0.0) != (r_lo < 0.0)) {
      t_hi = t;
      bracketed = true;
      break;
    }
    t_lo = t;
    r_lo = r;
  }
  Bandwidth1D out;
  if (!bracketed) {
    out.h = gaussian_reference_bandwidth(samples);
    out.fallback = true;
    return out;
  }
  for (int iter = 0; iter < 200 && (t_hi - t_lo) > 1e-14 * t_hi; ++iter) {
    const double mid = 0.5 * (t_lo + t_hi);
    const double r_mid = residual(mid);
    if (!std::isfinite(r_mid)) break;
    if ((r_mid < 0.0) == (r_lo < 0.0)) {
      t_lo = mid;
      r_lo = r_mid;
    } else {
      t_hi = mid;
    }
  }
  out.h = std::sqrt(0.5 * (t_lo + t_hi)) * span;
  return out;
}

BandwidthMatrix bandwidth_diag(const Matrix& samples) {
  const auto d = static_cast<std::size_t>(samples.cols());
  if (d == 0) throw ConfigError("bandwidth needs at least one dimension");
  if (d > kMaxKdeDims) {
    throw ConfigError("kernel density estimation is limited to " + std::to_string(kMaxKdeDims) +
                      " observed dimensions; got " + std::to_string(d));
  }
  const double L = static_cast<double>(samples.rows());
  const double correction = std::pow(L, 0.2 - 1.0 / (static_cast<double>(d) + 4.0));
  BandwidthMatrix H;
  H.diag.resize(static_cast<Eigen::Index>(d));
  H.fallback.assign(d, false);
  std::vector<double> column(static_cast<std::size_t>(samples.rows()));
  for (std::size_t j = 0; j < d; ++j) {
    for (Eigen::Index i = 0; i < samples.rows(); ++i) {
      column[static_cast<std::size_t>(i)] = samples(i, static_cast<Eigen::Index>(j));
    }
    const Bandwidth1D bw = solve_bandwidth_1d(column);
    const double h = bw.h * correction;
    H.diag[static_cast<Eigen::Index>(j)] = h * h;
    H.fallback[j] = bw.fallback;
  }
  return H;
}

BandwidthMatrix mixture_bandwidth(const Matrix& samples) {
  if (static_cast<std::size_t>(samples.cols()) <= kMaxKdeDims) return bandwidth_diag(samples);
  BandwidthMatrix H;
  H.diag.resize(samples.cols());
  for (Eigen::Index j = 0; j < samples.cols(); ++j) {
    const BandwidthMatrix one = bandwidth_diag(samples.col(j));
    H.diag[j] = one.diag[0];
    H.fallback.push_back(one.fallback[0]);
  }
  return H;
}

Vector kde_evaluate(const Matrix& samples, const BandwidthMatrix& H, const Matrix& queries) {
  const Eigen::Index d = samples.cols();
  if (H.diag.size() != d || queries.cols() != d) {
    throw ConfigError("kde_evaluate: dimension mismatch between samples, bandwidth and queries");
  }
  if ((H.diag.array() <= 0.0).any()) throw ConfigError("kde_evaluate: bandwidth must be positive");
  if (samples.rows() == 0) throw ConfigError("kde_evaluate: no samples");
  const Vector inv_var = H.diag.cwiseInverse();
  const double norm = std::pow(2.0 * std::numbers::pi, -0.5 * static_cast<double>(d)) /
                      std::sqrt(H.diag.prod()) / static_cast<double>(samples.rows());
  Vector out = Vector::Zero(queries.rows());
  for (Eigen::Index q = 0; q < queries.rows(); ++q) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < samples.rows(); ++i) {
      double quad = 0.0;
      for (Eigen::Index j = 0; j < d; ++j) {
        const double z = queries(q, j) - samples(i, j);
        quad += z * z * inv_var[j];
      }
      sum += std::exp(-0.5 * quad);
    }
    out[q] = norm * sum;
  }
  return out;
}

DensityField kde_on_grid(const Matrix& samples, const BandwidthMatrix& H, const GridSpec& grid) {
  grid.validate();
  const std::size_t d = grid.dims();
  if (static_cast<std::size_t>(samples.cols()) != d || H.dims() != d) {
    throw ConfigError("kde_on_grid: grid, samples and bandwidth dimensions differ");
  }
  if (d > kMaxKdeDims) throw ConfigError("kde_on_grid supports at most 3 dimensions");
  DensityField field;
  field.grid = grid;
  field.values.assign(grid.size(), 0.0);

  std::vector<std::size_t> stride(d, 1);
  for (std::size_t a = d - 1; a-- > 0;) stride[a] = stride[a + 1] * grid.axes[a + 1].points;

  std::vector<double> h(d);
  for (std::size_t a = 0; a < d; ++a) h[a] = std::sqrt(H.diag[static_cast<Eigen::Index>(a)]);

  std::vector<std::vector<double>> weights(d);
  std::vector<std::size_t> first(d), count(d);
  std::size_t outside = 0;
  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    bool empty = false;
    for (std::size_t a = 0; a < d; ++a) {
      const auto& ax = grid.axes[a];
      const double c = samples(i, static_cast<Eigen::Index>(a));
      if (c < ax.min || c > ax.max) ++outside;
      const double step = ax.step();
      const double lo = std::ceil((c - 8.0 * h[a] - ax.min) / step);
      const double hi = std::floor((c + 8.0 * h[a] - ax.min) / step);
      const double lo_c = std::max(lo, 0.0);
      const double hi_c = std::min(hi, static_cast<double>(ax.points - 1));
      if (hi_c < lo_c) {
        empty = true;
        break;
      }
      first[a] = static_cast<std::size_t>(lo_c);
      count[a] = static_cast<std::size_t>(hi_c - lo_c) + 1;
      auto& w = weights[a];
      w.resize(count[a]);
      const double norm = 1.0 / (h[a] * std::sqrt(2.0 * std::numbers::pi));
      for (std::size_t k = 0; k < count[a]; ++k) {
        const double z = (ax.coord(first[a] + k) - c) / h[a];
        w[k] = norm * std::exp(-0.5 * z * z);
      }
    }
    if (empty) continue;
    if (d == 1) {
      for (std::size_t k = 0; k < count[0]; ++k) field.values[first[0] + k] += weights[0][k];
    } else if (d == 2) {
      for (std::size_t k0 = 0; k0 < count[0]; ++k0) {
        double* row = field.values.data() + (first[0] + k0) * stride[0] + first[1];
        const double w0 = weights[0][k0];
        for (std::size_t k1 = 0; k1 < count[1]; ++k1) row[k1] += w0 * weights[1][k1];
      }
    } else {
      for (std::size_t k0 = 0; k0 < count[0]; ++k0) {
        for (std::size_t k1 = 0; k1 < count[1]; ++k1) {
          double* row = field.values.data() + (first[0] + k0) * stride[0] +
                        (first[1] + k1) * stride[1] + first[2];
          const double w01 = weights[0][k0] * weights[1][k1];
          for (std::size_t k2 = 0; k2 < count[2]; ++k2) row[k2] += w01 * weights[2][k2];
        }
      }
    }
  }
  const double inv_n = 1.0 / static_cast<double>(samples.rows());
  for (auto& v : field.values) v *= inv_n;
  field.update_integral();
  if (outside > 0) {
    field.warnings.push_back(std::to_string(outside) + " sample coordinates fall outside the grid");
  }
  return field;
}

}  // namespace cgpdf
