#pragma once

#include "cgpdf/types.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace cgpdf {

/// Coefficients of a conditional Gaussian system evaluated at one (t, uI):
///
///   duI  = (A0 + A1 uII) dt + sigma_I  dW_I
///   duII = (a0 + a1 uII) dt + sigma_II dW_II
struct Coefficients {
  Vector A0;        // n_obs
  Matrix A1;        // n_obs x n_hid
  Vector a0;        // n_hid
  Matrix a1;        // n_hid x n_hid
  Matrix sigma_I;   // n_obs x n_obs
  Matrix sigma_II;  // n_hid x n_hid

  Coefficients() = default;
  Coefficients(std::size_t n_obs, std::size_t n_hid);
};

using CoefficientFn =
    std::function<void(double t, const ConstVectorRef& uI, Coefficients& out)>;
using DriftFn =
    std::function<void(double t, const ConstVectorRef& u, VectorRef out)>;
using QuadraticFn = std::function<Vector(const Vector& u)>;

/// One conditional Gaussian model. Immutable after construction; all callables
/// are safe to invoke concurrently.
struct CGSystemSpec {
  std::string id;
  std::size_t n_obs = 0;
  std::size_t n_hid = 0;
  std::vector<std::string> names;  // n_obs observed names, then n_hid hidden names

  CoefficientFn coefficients;
  /// Direct right-hand side of the full state equation (the model as written).
  DriftFn rhs;
  /// Quadratic part B(u,u) of the drift; empty when the model has none.
  QuadraticFn quad_energy;
  /// sigma_I and sigma_II independent of (t, uI).
  bool constant_noise = false;

  std::size_t dim() const { return n_obs + n_hid; }

  Coefficients eval(double t, const ConstVectorRef& uI) const;
  Vector A0(double t, const ConstVectorRef& uI) const;
  Matrix A1(double t, const ConstVectorRef& uI) const;
  Vector a0(double t, const ConstVectorRef& uI) const;
  Matrix a1(double t, const ConstVectorRef& uI) const;
  Matrix sigma_I(double t, const ConstVectorRef& uI) const;
  Matrix sigma_II(double t, const ConstVectorRef& uI) const;

  /// [A0 + A1 uII ; a0 + a1 uII], assembled from the coefficient bundle.
  Vector assembled_drift(double t, const ConstVectorRef& u) const;
  /// The model right-hand side evaluated directly.
  Vector drift(double t, const ConstVectorRef& u) const;

  /// Index of a variable by name; throws ConfigError when unknown.
  std::size_t index_of(std::string_view name) const;
};

using ParamMap = std::map<std::string, double, std::less<>>;

/// Named scalar parameters of a model. Keys are fixed per model; overriding an
/// unknown key is a ConfigError.
class ModelParams {
 public:
  ModelParams() = default;
  explicit ModelParams(ParamMap values) : values_(std::move(values)) {}

  double get(std::string_view key) const;
  bool has(std::string_view key) const;
  void set(std::string_view key, double value);
  /// Applies overrides; every key must already exist.
  void override_with(const ParamMap& overrides);
  const ParamMap& values() const { return values_; }

 private:
  ParamMap values_;
};

enum class TriadRegime { I, II, III };
enum class L63Partition { observe_x, observe_yz };

TriadRegime parse_triad_regime(std::string_view s);
std::string_view to_string(TriadRegime regime);

ModelParams l63_defaults();
ModelParams climate4d_defaults();
ModelParams triad3_defaults(TriadRegime regime);
ModelParams turbulence6d_defaults();
/// Includes integer-valued "I" and "J" entries.
ModelParams lorenz96_two_layer_defaults();

CGSystemSpec build_l63(const ModelParams& params,
                       L63Partition partition = L63Partition::observe_x);
CGSystemSpec build_climate4d(const ModelParams& params);
CGSystemSpec build_triad3(const ModelParams& params, TriadRegime regime);
CGSystemSpec build_turbulence6d(const ModelParams& params);

inline constexpr std::size_t kL96MaxHidden = 512;
CGSystemSpec build_lorenz96_two_layer(int I, int J, const ModelParams& params,
                                      std::size_t max_hidden = kL96MaxHidden);

/// Canonical model ids: "l63", "climate4d", "triad3:I|II|III", "turb6d", "l96two".
std::vector<std::string> model_ids();
ModelParams default_params(std::string_view model_id);
CGSystemSpec build_model(std::string_view model_id,
                         const ParamMap& overrides = {});

struct EnergyReport {
  bool applicable = false;
  double max_violation = 0.0;
  bool pass = false;
};

/// Max over random states of |u . B(u,u)| / (1 + |u|^3).
EnergyReport check_energy_conservation(const CGSystemSpec& spec, std::size_t trials,
                                       double tol, std::uint64_t seed = 2024);

}  // namespace cgpdf
