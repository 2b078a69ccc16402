#pragma once

#include "cgpdf/types.hpp"

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace cgpdf {

struct GridAxis {
  double min = 0.0;
  double max = 1.0;
  std::size_t points = 2;
  std::string label;

  double step() const { return (max - min) / static_cast<double>(points - 1); }
  double coord(std::size_t i) const { return min + step() * static_cast<double>(i); }
  bool operator==(const GridAxis&) const = default;
};

/// Rectangular grid; values are stored row-major with the last axis fastest.
struct GridSpec {
  std::vector<GridAxis> axes;

  std::size_t dims() const { return axes.size(); }
  std::size_t size() const;
  void validate() const;
  /// Axes compare equal up to labels.
  bool same_shape(const GridSpec& other) const;
  std::string id() const;
  bool operator==(const GridSpec&) const = default;
};

/// Per-axis [mean - width*sd, mean + width*sd] from the columns of `samples`.
GridSpec auto_grid(const Matrix& samples, const std::vector<std::size_t>& dims,
                   const std::vector<std::string>& labels, double width_sd = 6.0,
                   std::size_t points_1d = 200, std::size_t points_2d = 100);

struct DensityField {
  GridSpec grid;
  std::vector<double> values;
  double integral = 0.0;
  std::vector<std::string> warnings;

  /// Recomputes `integral` by the trapezoidal rule.
  void update_integral();
  /// Divides values by the stored integral (no-op when it is zero).
  void normalize();
};

/// Trapezoidal rule over the grid of `values`.
double trapezoid(const GridSpec& grid, const std::vector<double>& values);

/// CSV with one column per axis followed by a "density" column.
void write_density_csv(const DensityField& field, const std::filesystem::path& file);
DensityField read_density_csv(const std::filesystem::path& file);

}  // namespace cgpdf
