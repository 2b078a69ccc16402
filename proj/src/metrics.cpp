#include "cgpdf/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace cgpdf {

KLReport relative_entropy(const DensityField& truth, const DensityField& model) {
  if (!truth.grid.same_shape(model.grid) || truth.values.size() != model.values.size()) {
    throw ConfigError("relative_entropy: truth and model grids differ (" + truth.grid.id() +
                      " vs " + model.grid.id() + ")");
  }
  const double p_int = trapezoid(truth.grid, truth.values);
  if (std::abs(p_int - 1.0) > 1e-2) {
    throw ConfigError("relative_entropy: truth integrates to " + std::to_string(p_int) +
                      " on the grid; widen the grid");
  }
  const double q_int = trapezoid(model.grid, model.values);
  const double q_scale = q_int > 0.0 ? 1.0 / q_int : 1.0;

  const GridSpec& grid = truth.grid;
  const std::size_t d = grid.dims();
  std::vector<std::size_t> idx(d, 0);
  double kl = 0.0;
  double floored = 0.0;
  for (std::size_t flat = 0; flat < truth.values.size(); ++flat) {
    double w = 1.0;
    for (std::size_t a = 0; a < d; ++a) {
      const auto& ax = grid.axes[a];
      w *= ax.step() * ((idx[a] == 0 || idx[a] + 1 == ax.points) ? 0.5 : 1.0);
    }
    for (std::size_t a = d; a-- > 0;) {
      if (++idx[a] < grid.axes[a].points) break;
      idx[a] = 0;
    }
    const double p = truth.values[flat] / p_int;
    if (p < kTruthSupportCutoff) continue;
    double q = model.values[flat] * q_scale;
    if (!(q >= kModelDensityFloor)) {
      q = kModelDensityFloor;
      floored += w * p;
    }
    kl += w * p * std::log(p / q);
  }
  return {kl, floored, grid.id()};
}

Moments sample_moments(std::span<const double> samples) {
  if (samples.size() < 4) throw ConfigError("sample_moments needs at least 4 samples");
  const double n = static_cast<double>(samples.size());
  double mean = 0.0;
  for (double x : samples) mean += x;
  mean /= n;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double x : samples) {
    const double d = x - mean;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  if (!(m2 > 0.0)) throw ConfigError("sample_moments: samples have zero variance");
  return {mean, m2, m3 / std::pow(m2, 1.5), m4 / (m2 * m2)};
}

DensityField histogram_density(std::span<const double> samples, std::size_t bins,
                               const GridSpec& grid) {
  if (grid.dims() != 1) throw ConfigError("histogram_density is one-dimensional");
  if (bins < 1 || samples.empty()) throw ConfigError("histogram needs samples and bins");
  const auto [lo_it, hi_it] = std::minmax_element(samples.begin(), samples.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (!(hi > lo)) throw ConfigError("histogram samples have zero range");
  const double width = (hi - lo) / static_cast<double>(bins);
  std::vector<double> counts(bins, 0.0);
  for (double x : samples) {
    const auto b = std::min(bins - 1, static_cast<std::size_t>((x - lo) / width));
    counts[b] += 1.0;
  }
  const double norm = 1.0 / (static_cast<double>(samples.size()) * width);
  DensityField field;
  field.grid = grid;
  const auto& ax = grid.axes.front();
  field.values.resize(ax.points);
  for (std::size_t k = 0; k < ax.points; ++k) {
    const double x = ax.coord(k);
    if (x < lo || x > hi) {
      field.values[k] = 0.0;
      continue;
    }
    const auto b = std::min(bins - 1, static_cast<std::size_t>((x - lo) / width));
    field.values[k] = counts[b] * norm;
  }
  field.update_integral();
  return field;
}

}  // namespace cgpdf
