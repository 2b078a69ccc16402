#pragma once

#include "cgpdf/density.hpp"
#include "cgpdf/mixture.hpp"

#include <span>
#include <string>

namespace cgpdf {

struct KLReport {
  double value = 0.0;       // nats
  double floor_mass = 0.0;  // truth mass where the model density was floored
  std::string grid_id;
};

inline constexpr double kModelDensityFloor = 1e-300;
inline constexpr double kTruthSupportCutoff = 1e-14;

/// Relative entropy int p ln(p / q) of truth p against model q on a shared
/// grid. Both fields are renormalized on the grid first; q is floored at
/// 1e-300 and points where p < 1e-14 are skipped.
KLReport relative_entropy(const DensityField& truth, const DensityField& model);

/// Population-convention central moments; kurtosis is non-excess.
Moments sample_moments(std::span<const double> samples);

/// Normalized histogram of 1D samples with `bins` equal bins spanning the
/// sample range, tabulated at the grid points (zero outside the range).
DensityField histogram_density(std::span<const double> samples, std::size_t bins,
                               const GridSpec& grid);

}  // namespace cgpdf
