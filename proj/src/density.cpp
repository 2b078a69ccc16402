#include "cgpdf/density.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace cgpdf {

std::size_t GridSpec::size() const {
  std::size_t n = axes.empty() ? 0 : 1;
  for (const auto& a : axes) n *= a.points;
  return n;
}

void GridSpec::validate() const {
  if (axes.empty()) throw ConfigError("grid has no axes");
  for (const auto& a : axes) {
    if (a.points < 2) throw ConfigError("grid axis '" + a.label + "' needs at least 2 points");
    if (!(a.max > a.min)) throw ConfigError("grid axis '" + a.label + "' has max <= min");
  }
}

bool GridSpec::same_shape(const GridSpec& other) const {
  if (axes.size() != other.axes.size()) return false;
  for (std::size_t i = 0; i < axes.size(); ++i) {
    const auto& a = axes[i];
    const auto& b = other.axes[i];
    if (a.points != b.points || a.min != b.min || a.max != b.max) return false;
  }
  return true;
}

std::string GridSpec::id() const {
  std::ostringstream os;
  os.precision(10);
  for (std::size_t i = 0; i < axes.size(); ++i) {
    if (i) os << ',';
    os << axes[i].label << ':' << axes[i].min << ':' << axes[i].max << ':' << axes[i].points;
  }
  return os.str();
}

GridSpec auto_grid(const Matrix& samples, const std::vector<std::size_t>& dims,
                   const std::vector<std::string>& labels, double width_sd,
                   std::size_t points_1d, std::size_t points_2d) {
  if (samples.rows() < 2) throw ConfigError("auto grid needs at least two samples");
  GridSpec grid;
  const std::size_t points = dims.size() == 1 ? points_1d : points_2d;
  for (std::size_t k = 0; k < dims.size(); ++k) {
    const auto col = samples.col(static_cast<Eigen::Index>(dims[k]));
    const double mean = col.mean();
    const double var = (col.array() - mean).square().mean();
    double sd = std::sqrt(var);
    if (!(sd > 0.0)) sd = 1.0;
    GridAxis axis;
    axis.min = mean - width_sd * sd;
    axis.max = mean + width_sd * sd;
    axis.points = points;
    axis.label = k < labels.size() ? labels[k] : "x" + std::to_string(k);
    grid.axes.push_back(axis);
  }
  return grid;
}

double trapezoid(const GridSpec& grid, const std::vector<double>& values) {
  const std::size_t d = grid.dims();
  if (values.size() != grid.size()) throw ConfigError("field size does not match grid");
  std::vector<std::size_t> idx(d, 0);
  double total = 0.0;
  for (std::size_t flat = 0; flat < values.size(); ++flat) {
    double w = 1.0;
    for (std::size_t a = 0; a < d; ++a) {
      const auto& ax = grid.axes[a];
      const bool edge = idx[a] == 0 || idx[a] + 1 == ax.points;
      w *= ax.step() * (edge ? 0.5 : 1.0);
    }
    total += w * values[flat];
    for (std::size_t a = d; a-- > 0;) {
      if (++idx[a] < grid.axes[a].points) break;
      idx[a] = 0;
    }
  }
  return total;
}

void DensityField::update_integral() { integral = trapezoid(grid, values); }

void DensityField::normalize() {
  if (integral > 0.0) {
    for (auto& v : values) v /= integral;
    integral = 1.0;
  }
}

void write_density_csv(const DensityField& field, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw Error("cannot open " + file.string() + " for writing");
  const std::size_t d = field.grid.dims();
  for (std::size_t a = 0; a < d; ++a) out << field.grid.axes[a].label << ',';
  out << "density\n";
  std::vector<std::size_t> idx(d, 0);
  char buf[64];
  for (std::size_t flat = 0; flat < field.values.size(); ++flat) {
    for (std::size_t a = 0; a < d; ++a) {
      std::snprintf(buf, sizeof buf, "%.17g,", field.grid.axes[a].coord(idx[a]));
      out << buf;
    }
    std::snprintf(buf, sizeof buf, "%.17g\n", field.values[flat]);
    out << buf;
    for (std::size_t a = d; a-- > 0;) {
      if (++idx[a] < field.grid.axes[a].points) break;
      idx[a] = 0;
    }
  }
}

DensityField read_density_csv(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error("cannot open " + file.string());
  std::string header;
  std::getline(in, header);
  std::vector<std::string> labels;
  {
    std::stringstream ss(header);
    std::string col;
    while (std::getline(ss, col, ',')) labels.push_back(col);
  }
  if (labels.size() < 2 || labels.back() != "density") {
    throw Error("malformed density CSV header in " + file.string());
  }
  const std::size_t d = labels.size() - 1;
  std::vector<std::vector<double>> coords(d);
  DensityField field;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    for (std::size_t a = 0; a < d; ++a) {
      std::getline(ss, cell, ',');
      coords[a].push_back(std::stod(cell));
    }
    std::getline(ss, cell, ',');
    field.values.push_back(std::stod(cell));
  }
  // Recover axes: the last axis varies fastest.
  std::size_t stride = 1;
  for (std::size_t a = d; a-- > 0;) {
    GridAxis axis;
    axis.label = labels[a];
    axis.min = coords[a].front();
    std::size_t n = 1;
    while (n * stride < coords[a].size() && coords[a][n * stride] != axis.min) ++n;
    axis.points = n;
    axis.max = coords[a][(n - 1) * stride];
    field.grid.axes.insert(field.grid.axes.begin(), axis);
    stride *= n;
  }
  if (field.grid.size() != field.values.size()) {
    throw Error("density CSV " + file.string() + " is not a full rectangular grid");
  }
  field.update_integral();
  return field;
}

}  // namespace cgpdf
