#include "cgpdf/models.hpp"

#include "cgpdf/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace cgpdf {

Coefficients::Coefficients(std::size_t n_obs, std::size_t n_hid)
    : A0(Vector::Zero(n_obs)),
      A1(Matrix::Zero(n_obs, n_hid)),
      a0(Vector::Zero(n_hid)),
      a1(Matrix::Zero(n_hid, n_hid)),
      sigma_I(Matrix::Zero(n_obs, n_obs)),
      sigma_II(Matrix::Zero(n_hid, n_hid)) {}

Coefficients CGSystemSpec::eval(double t, const ConstVectorRef& uI) const {
  Coefficients c(n_obs, n_hid);
  coefficients(t, uI, c);
  return c;
}

Vector CGSystemSpec::A0(double t, const ConstVectorRef& uI) const { return eval(t, uI).A0; }
Matrix CGSystemSpec::A1(double t, const ConstVectorRef& uI) const { return eval(t, uI).A1; }
Vector CGSystemSpec::a0(double t, const ConstVectorRef& uI) const { return eval(t, uI).a0; }
Matrix CGSystemSpec::a1(double t, const ConstVectorRef& uI) const { return eval(t, uI).a1; }
Matrix CGSystemSpec::sigma_I(double t, const ConstVectorRef& uI) const {
  return eval(t, uI).sigma_I;
}
Matrix CGSystemSpec::sigma_II(double t, const ConstVectorRef& uI) const {
  return eval(t, uI).sigma_II;
}

Vector CGSystemSpec::assembled_drift(double t, const ConstVectorRef& u) const {
  const auto uI = u.head(n_obs);
  const auto uII = u.tail(n_hid);
  const Coefficients c = eval(t, uI);
  Vector out(dim());
  out.head(n_obs) = c.A0 + c.A1 * uII;
  out.tail(n_hid) = c.a0 + c.a1 * uII;
  return out;
}

Vector CGSystemSpec::drift(double t, const ConstVectorRef& u) const {
  Vector out(dim());
  rhs(t, u, out);
  return out;
}

std::size_t CGSystemSpec::index_of(std::string_view name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) {
    throw ConfigError("model '" + id + "' has no variable named '" + std::string(name) + "'");
  }
  return static_cast<std::size_t>(it - names.begin());
}

// --- ModelParams -----------------------------------------------------------

double ModelParams::get(std::string_view key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("missing model parameter '" + std::string(key) + "'");
  return it->second;
}

bool ModelParams::has(std::string_view key) const { return values_.find(key) != values_.end(); }

void ModelParams::set(std::string_view key, double value) { values_[std::string(key)] = value; }

void ModelParams::override_with(const ParamMap& overrides) {
  for (const auto& [key, value] : overrides) {
    if (!has(key)) throw ConfigError("unknown model parameter '" + key + "'");
    values_[key] = value;
  }
}

// --- helpers ---------------------------------------------------------------

namespace {

void require_positive(const ModelParams& p, std::initializer_list<std::string_view> keys) {
  for (auto key : keys) {
    const double v = p.get(key);
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw ConfigError("parameter '" + std::string(key) + "' must be positive, got " +
                        std::to_string(v));
    }
  }
}

void require_finite(const ModelParams& p) {
  for (const auto& [key, v] : p.values()) {
    if (!std::isfinite(v)) throw ConfigError("parameter '" + key + "' is not finite");
  }
}

}  // namespace

// --- noisy Lorenz 63 -------------------------------------------------------

ModelParams l63_defaults() {
  return ModelParams({{"sigma", 10.0},
                      {"rho", 28.0},
                      {"beta", 8.0 / 3.0},
                      {"sigma_x", 10.0},
                      {"sigma_y", 10.0},
                      {"sigma_z", 10.0}});
}

CGSystemSpec build_l63(const ModelParams& params, L63Partition partition) {
  require_finite(params);
  require_positive(params, {"sigma_x", "sigma_y", "sigma_z"});
  const double s = params.get("sigma");
  const double rho = params.get("rho");
  const double beta = params.get("beta");
  const double sx = params.get("sigma_x");
  const double sy = params.get("sigma_y");
  const double sz = params.get("sigma_z");

  CGSystemSpec spec;
  spec.id = "l63";
  spec.constant_noise = true;
  spec.rhs = [=](double, const ConstVectorRef& u, VectorRef out) {
    // State order depends on the partition; recover (x, y, z).
    double x, y, z;
    if (partition == L63Partition::observe_x) {
      x = u[0], y = u[1], z = u[2];
    } else {
      y = u[0], z = u[1], x = u[2];
    }
    const double dx = s * (y - x);
    const double dy = x * (rho - z) - y;
    const double dz = x * y - beta * z;
    if (partition == L63Partition::observe_x) {
      out[0] = dx, out[1] = dy, out[2] = dz;
    } else {
      out[0] = dy, out[1] = dz, out[2] = dx;
    }
  };

  if (partition == L63Partition::observe_x) {
    spec.n_obs = 1;
    spec.n_hid = 2;
    spec.names = {"x", "y", "z"};
    spec.coefficients = [=](double, const ConstVectorRef& uI, Coefficients& c) {
      const double x = uI[0];
      c.A0[0] = -s * x;
      c.A1(0, 0) = s;
      c.A1(0, 1) = 0.0;
      c.a0[0] = rho * x;
      c.a0[1] = 0.0;
      c.a1 << -1.0, -x, x, -beta;
      c.sigma_I(0, 0) = sx;
      c.sigma_II.setZero();
      c.sigma_II(0, 0) = sy;
      c.sigma_II(1, 1) = sz;
    };
    spec.quad_energy = [](const Vector& u) {
      Vector b(3);
      b << 0.0, -u[0] * u[2], u[0] * u[1];
      return b;
    };
  } else {
    spec.n_obs = 2;
    spec.n_hid = 1;
    spec.names = {"y", "z", "x"};
    spec.coefficients = [=](double, const ConstVectorRef& uI, Coefficients& c) {
      const double y = uI[0];
      const double z = uI[1];
      c.A0 << -y, -beta * z;
      c.A1 << rho - z, y;
      c.a0[0] = s * y;
      c.a1(0, 0) = -s;
      c.sigma_I.setZero();
      c.sigma_I(0, 0) = sy;
      c.sigma_I(1, 1) = sz;
      c.sigma_II(0, 0) = sx;
    };
    spec.quad_energy = [](const Vector& u) {
      // u = (y, z, x)
      Vector b(3);
      b << -u[2] * u[1], u[2] * u[0], 0.0;
      return b;
    };
  }
  return spec;
}

// --- 4D stochastic climate model -------------------------------------------

ModelParams climate4d_defaults() {
  return ModelParams({{"L12", 1.0},     {"L13", 0.5},     {"L24", 0.5},     {"a1", 2.0},
                      {"a2", 1.0},      {"d1", -1.0},     {"d2", -0.4},     {"epsilon", 1.0},
                      {"sigma_1", 0.5}, {"sigma_2", 2.0}, {"sigma_3", 0.5}, {"sigma_4", 1.0},
                      {"b123", 1.5},    {"b213", 1.5},    {"b312", -3.0},   {"F1", 0.0},
                      {"F2", 0.0},      {"F3", 0.0},      {"F4", 0.0},      {"gamma_1", 1.0},
                      {"gamma_2", 1.0}});
}

CGSystemSpec build_climate4d(const ModelParams& p) {
  require_finite(p);
  require_positive(p, {"epsilon", "sigma_1", "sigma_2", "sigma_3", "sigma_4"});
  const double L12 = p.get("L12"), L13 = p.get("L13"), L24 = p.get("L24");
  const double a1c = p.get("a1"), a2c = p.get("a2");
  const double d1 = p.get("d1"), d2 = p.get("d2");
  const double eps = p.get("epsilon");
  const double s1 = p.get("sigma_1"), s2 = p.get("sigma_2");
  const double s3 = p.get("sigma_3"), s4 = p.get("sigma_4");
  const double b123 = p.get("b123"), b213 = p.get("b213"), b312 = p.get("b312");
  const double F1 = p.get("F1"), F2 = p.get("F2"), F3 = p.get("F3"), F4 = p.get("F4");
  const double g1 = p.get("gamma_1"), g2 = p.get("gamma_2");
  if (std::abs(b123 + b213 + b312) > 1e-12 * (1.0 + std::abs(b123) + std::abs(b213))) {
    throw ConfigError("climate4d requires b123 + b213 + b312 = 0");
  }

  CGSystemSpec spec;
  spec.id = "climate4d";
  spec.n_obs = 2;
  spec.n_hid = 2;
  spec.names = {"x1", "x2", "y1", "y2"};
  spec.constant_noise = true;
  spec.rhs = [=](double, const ConstVectorRef& u, VectorRef out) {
    const double x1 = u[0], x2 = u[1], y1 = u[2], y2 = u[3];
    const double shared = L12 + a1c * x1 + a2c * x2;
    out[0] = -x2 * shared + d1 * x1 + F1 + L13 * y1 + b123 * x2 * y1;
    out[1] = x1 * shared + d2 * x2 + F2 + L24 * y2 + b213 * x1 * y1;
    out[2] = -L13 * x1 + b312 * x1 * x2 + F3 - g1 / eps * y1;
    out[3] = -L24 * x2 + F4 - g2 / eps * y2;
  };
  spec.coefficients = [=](double, const ConstVectorRef& uI, Coefficients& c) {
    const double x1 = uI[0], x2 = uI[1];
    const double shared = L12 + a1c * x1 + a2c * x2;
    c.A0 << -x2 * shared + d1 * x1 + F1, x1 * shared + d2 * x2 + F2;
    c.A1 << L13 + b123 * x2, 0.0, b213 * x1, L24;
    c.a0 << -L13 * x1 + b312 * x1 * x2 + F3, -L24 * x2 + F4;
    c.a1 << -g1 / eps, 0.0, 0.0, -g2 / eps;
    c.sigma_I << s1, 0.0, 0.0, s2;
    c.sigma_II << s3 / std::sqrt(eps), 0.0, 0.0, s4 / std::sqrt(eps);
  };
  spec.quad_energy = [=](const Vector& u) {
    const double x1 = u[0], x2 = u[1], y1 = u[2];
    Vector b(4);
    b << -x2 * (a1c * x1 + a2c * x2) + b123 * x2 * y1,
        x1 * (a1c * x1 + a2c * x2) + b213 * x1 * y1, b312 * x1 * x2, 0.0;
    return b;
  };
  return spec;
}

// --- 3D nonlinear triad ----------------------------------------------------

TriadRegime parse_triad_regime(std::string_view s) {
  if (s == "I") return TriadRegime::I;
  if (s == "II") return TriadRegime::II;
  if (s == "III") return TriadRegime::III;
  throw ConfigError("unknown triad regime '" + std::string(s) + "' (expected I, II or III)");
}

std::string_view to_string(TriadRegime regime) {
  switch (regime) {
    case TriadRegime::I: return "I";
    case TriadRegime::II: return "II";
    case TriadRegime::III: return "III";
  }
  return "?";
}

ModelParams triad3_defaults(TriadRegime regime) {
  switch (regime) {
    case TriadRegime::I:
      return ModelParams({{"gamma_1", 2.0}, {"gamma_2", 0.2}, {"gamma_3", 0.4}, {"L12", 0.2},
                          {"L13", 0.1},     {"L23", 0.0},     {"sigma_1", 0.5}, {"sigma_2", 1.2},
                          {"sigma_3", 0.8}, {"I", 5.0},       {"epsilon", 1.0}, {"F_mean", 2.0},
                          {"F_amplitude", 0.0}});
    case TriadRegime::II:
      return ModelParams({{"gamma_1", 2.0}, {"gamma_2", 0.6}, {"gamma_3", 0.4}, {"L12", 1.0},
                          {"L13", 0.5},     {"L23", 0.0},     {"sigma_1", 0.5}, {"sigma_2", 0.1},
                          {"sigma_3", 0.1}, {"I", 5.0},       {"epsilon", 0.1}, {"F_mean", 2.0},
                          {"F_amplitude", 2.0}});
    case TriadRegime::III:
      return ModelParams({{"gamma_1", 2.0}, {"gamma_2", 0.6}, {"gamma_3", 0.4}, {"L12", 1.0},
                          {"L13", 1.0},     {"L23", 10.0},    {"sigma_1", 0.5}, {"sigma_2", 0.1},
                          {"sigma_3", 0.1}, {"I", 5.0},       {"epsilon", 0.1}, {"F_mean", 2.0},
                          {"F_amplitude", 2.0}});
  }
  throw ConfigError("unknown triad regime");
}

CGSystemSpec build_triad3(const ModelParams& p, TriadRegime regime) {
  require_finite(p);
  require_positive(p, {"epsilon", "sigma_1", "sigma_2", "sigma_3"});
  const double g1 = p.get("gamma_1"), g2 = p.get("gamma_2"), g3 = p.get("gamma_3");
  const double L12 = p.get("L12"), L13 = p.get("L13"), L23 = p.get("L23");
  const double s1 = p.get("sigma_1"), s2 = p.get("sigma_2"), s3 = p.get("sigma_3");
  const double I = p.get("I"), eps = p.get("epsilon");
  const double F0 = p.get("F_mean"), Famp = p.get("F_amplitude");
  // F(t) = F0 + Famp sin(2 pi t); the phase is reduced modulo 1 so F(t+1) == F(t).
  auto forcing = [=](double t) {
    if (Famp == 0.0) return F0;
    const double phase = t - std::floor(t);
    return F0 + Famp * std::sin(2.0 * std::numbers::pi * phase);
  };

  CGSystemSpec spec;
  spec.id = "triad3:" + std::string(to_string(regime));
  spec.n_obs = 1;
  spec.n_hid = 2;
  spec.names = {"u1", "u2", "u3"};
  spec.constant_noise = true;
  spec.rhs = [=](double t, const ConstVectorRef& u, VectorRef out) {
    const double u1 = u[0], u2 = u[1], u3 = u[2];
    out[0] = -g1 * u1 + L12 * u2 + L13 * u3 + I * u1 * u2 + forcing(t);
    out[1] = -L12 * u1 - g2 / eps * u2 + L23 * u3 - I * u1 * u1;
    out[2] = -L13 * u1 - L23 * u2 - g3 / eps * u3;
  };
  spec.coefficients = [=](double t, const ConstVectorRef& uI, Coefficients& c) {
    const double u1 = uI[0];
    c.A0[0] = -g1 * u1 + forcing(t);
    c.A1 << L12 + I * u1, L13;
    c.a0 << -L12 * u1 - I * u1 * u1, -L13 * u1;
    c.a1 << -g2 / eps, L23, -L23, -g3 / eps;
    c.sigma_I(0, 0) = s1;
    c.sigma_II << s2 / std::sqrt(eps), 0.0, 0.0, s3 / std::sqrt(eps);
  };
  spec.quad_energy = [=](const Vector& u) {
    Vector b(3);
    b << I * u[0] * u[1], -I * u[0] * u[0], 0.0;
    return b;
  };
  return spec;
}

// --- 6D conceptual turbulence model ----------------------------------------

ModelParams turbulence6d_defaults() {
  ModelParams p({{"d_u", 0.1}, {"F", 0.5}, {"sigma_u", 2.0}});
  const double sv[5] = {0.5, 0.2, 0.1, 0.1, 0.1};
  const double dv[5] = {0.2, 0.5, 1.0, 2.0, 5.0};
  for (int i = 0; i < 5; ++i) {
    const std::string k = std::to_string(i + 1);
    p.set("gamma_" + k, 0.25);
    p.set("sigma_v" + k, sv[i]);
    p.set("d_v" + k, dv[i]);
  }
  return p;
}

CGSystemSpec build_turbulence6d(const ModelParams& p) {
  require_finite(p);
  require_positive(p, {"sigma_u", "sigma_v1", "sigma_v2", "sigma_v3", "sigma_v4", "sigma_v5"});
  const double du = p.get("d_u"), F = p.get("F"), su = p.get("sigma_u");
  std::array<double, 5> gamma{}, sv{}, dv{};
  for (int i = 0; i < 5; ++i) {
    const std::string k = std::to_string(i + 1);
    gamma[i] = p.get("gamma_" + k);
    sv[i] = p.get("sigma_v" + k);
    dv[i] = p.get("d_v" + k);
  }

  CGSystemSpec spec;
  spec.id = "turb6d";
  spec.n_obs = 1;
  spec.n_hid = 5;
  spec.names = {"u", "v1", "v2", "v3", "v4", "v5"};
  spec.constant_noise = true;
  spec.rhs = [=](double, const ConstVectorRef& u, VectorRef out) {
    const double uu = u[0];
    double coupling = 0.0;
    for (int i = 0; i < 5; ++i) coupling += gamma[i] * uu * u[1 + i];
    out[0] = -du * uu + F + coupling;
    for (int i = 0; i < 5; ++i) out[1 + i] = -dv[i] * u[1 + i] - gamma[i] * uu * uu;
  };
  spec.coefficients = [=](double, const ConstVectorRef& uI, Coefficients& c) {
    const double uu = uI[0];
    c.A0[0] = -du * uu + F;
    c.a1.setZero();
    c.sigma_II.setZero();
    for (int i = 0; i < 5; ++i) {
      c.A1(0, i) = gamma[i] * uu;
      c.a0[i] = -gamma[i] * uu * uu;
      c.a1(i, i) = -dv[i];
      c.sigma_II(i, i) = sv[i];
    }
    c.sigma_I(0, 0) = su;
  };
  spec.quad_energy = [=](const Vector& u) {
    Vector b(6);
    b[0] = 0.0;
    for (int i = 0; i < 5; ++i) {
      b[0] += gamma[i] * u[0] * u[1 + i];
      b[1 + i] = -gamma[i] * u[0] * u[0];
    }
    return b;
  };
  return spec;
}

// --- advective two-layer Lorenz 96 (a_S = 0) -------------------------------

ModelParams lorenz96_two_layer_defaults() {
  return ModelParams({{"I", 8.0},
                      {"J", 4.0},
                      {"lambda", 1.0},
                      {"d1", 1.0},
                      {"d2", 1.0},
                      {"F", 8.0},
                      {"epsilon", 0.5},
                      {"a_L", 1.0},
                      {"sigma_u", 1.0},
                      {"sigma_v", 0.1}});
}

CGSystemSpec build_lorenz96_two_layer(int I, int J, const ModelParams& p,
                                      std::size_t max_hidden) {
  require_finite(p);
  require_positive(p, {"epsilon", "sigma_u", "sigma_v"});
  if (I < 4) throw ConfigError("l96two requires I >= 4");
  if (J < 1) throw ConfigError("l96two requires J >= 1");
  const auto n_hid = static_cast<std::size_t>(I) * static_cast<std::size_t>(J);
  if (n_hid > max_hidden) {
    throw ConfigError("l96two hidden dimension I*J = " + std::to_string(n_hid) +
                      " exceeds the cap of " + std::to_string(max_hidden));
  }
  const double lambda = p.get("lambda"), d1 = p.get("d1"), d2 = p.get("d2");
  const double F = p.get("F"), eps = p.get("epsilon"), aL = p.get("a_L");
  const double su = p.get("sigma_u"), sv = p.get("sigma_v");
  const long nI = I;
  const long nV = static_cast<long>(n_hid);
  // u_i periodic in i; v is one ring of length I*J with v_{i,J+1} = v_{i+1,1}.
  auto wrapI = [nI](long i) { return ((i % nI) + nI) % nI; };
  auto wrapV = [nV](long k) { return ((k % nV) + nV) % nV; };

  CGSystemSpec spec;
  spec.id = "l96two";
  spec.n_obs = static_cast<std::size_t>(I);
  spec.n_hid = n_hid;
  for (int i = 0; i < I; ++i) spec.names.push_back("u" + std::to_string(i + 1));
  for (int i = 0; i < I; ++i) {
    for (int j = 0; j < J; ++j) {
      spec.names.push_back("v" + std::to_string(i + 1) + "_" + std::to_string(j + 1));
    }
  }
  spec.constant_noise = true;

  spec.rhs = [=](double, const ConstVectorRef& u, VectorRef out) {
    const auto uu = u.head(nI);
    const auto v = u.tail(nV);
    for (long i = 0; i < nI; ++i) {
      double coupling = 0.0;
      for (long j = 0; j < J; ++j) coupling += v[i * J + j];
      out[i] = uu[wrapI(i - 1)] * (uu[wrapI(i + 1)] - uu[wrapI(i - 2)]) + lambda * coupling -
               d1 * uu[i] + F;
    }
    for (long k = 0; k < nV; ++k) {
      const long i = k / J;
      out[nI + k] = aL * uu[i] / eps * (v[wrapV(k - 1)] - v[wrapV(k + 2)]) - lambda * uu[i] -
                    d2 * v[k];
    }
  };
  spec.coefficients = [=](double, const ConstVectorRef& uI, Coefficients& c) {
    c.A1.setZero();
    c.a1.setZero();
    c.sigma_I.setZero();
    c.sigma_II.setZero();
    for (long i = 0; i < nI; ++i) {
      c.A0[i] = uI[wrapI(i - 1)] * (uI[wrapI(i + 1)] - uI[wrapI(i - 2)]) - d1 * uI[i] + F;
      for (long j = 0; j < J; ++j) c.A1(i, i * J + j) = lambda;
      c.sigma_I(i, i) = su;
    }
    for (long k = 0; k < nV; ++k) {
      const long i = k / J;
      const double adv = aL * uI[i] / eps;
      c.a0[k] = -lambda * uI[i];
      c.a1(k, wrapV(k - 1)) += adv;
      c.a1(k, wrapV(k + 2)) -= adv;
      c.a1(k, k) -= d2;
      c.sigma_II(k, k) = sv;
    }
  };
  spec.quad_energy = [=](const Vector& u) {
    const auto uu = u.head(nI);
    const auto v = u.tail(nV);
    Vector b = Vector::Zero(nI + nV);
    for (long i = 0; i < nI; ++i) {
      b[i] = uu[wrapI(i - 1)] * (uu[wrapI(i + 1)] - uu[wrapI(i - 2)]);
    }
    for (long k = 0; k < nV; ++k) {
      b[nI + k] = aL * uu[k / J] / eps * (v[wrapV(k - 1)] - v[wrapV(k + 2)]);
    }
    return b;
  };
  return spec;
}

// --- registry --------------------------------------------------------------

std::vector<std::string> model_ids() {
  return {"l63", "climate4d", "triad3:I", "triad3:II", "triad3:III", "turb6d", "l96two"};
}

namespace {

std::string_view triad_suffix(std::string_view id) {
  constexpr std::string_view prefix = "triad3:";
  if (id.substr(0, prefix.size()) != prefix) return {};
  return id.substr(prefix.size());
}

}  // namespace

ModelParams default_params(std::string_view model_id) {
  if (model_id == "l63") return l63_defaults();
  if (model_id == "climate4d") return climate4d_defaults();
  if (model_id == "turb6d") return turbulence6d_defaults();
  if (model_id == "l96two") return lorenz96_two_layer_defaults();
  if (const auto regime = triad_suffix(model_id); !regime.empty()) {
    return triad3_defaults(parse_triad_regime(regime));
  }
  throw ConfigError("unknown model id '" + std::string(model_id) + "'");
}

CGSystemSpec build_model(std::string_view model_id,
                         const ParamMap& overrides) {
  ModelParams params = default_params(model_id);
  params.override_with(overrides);
  if (model_id == "l63") return build_l63(params);
  if (model_id == "climate4d") return build_climate4d(params);
  if (model_id == "turb6d") return build_turbulence6d(params);
  if (model_id == "l96two") {
    const double I = params.get("I");
    const double J = params.get("J");
    if (I != std::floor(I) || J != std::floor(J)) {
      throw ConfigError("l96two sizes I and J must be integers");
    }
    return build_lorenz96_two_layer(static_cast<int>(I), static_cast<int>(J), params);
  }
  return build_triad3(params, parse_triad_regime(triad_suffix(model_id)));
}

// --- energy conservation check ---------------------------------------------

EnergyReport check_energy_conservation(const CGSystemSpec& spec, std::size_t trials, double tol,
                                       std::uint64_t seed) {
  EnergyReport report;
  if (!spec.quad_energy) return report;
  report.applicable = true;
  auto rng = member_engine(seed, 0, Stream::energy_check);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> log_scale(std::log(0.1), std::log(100.0));
  Vector u(spec.dim());
  for (std::size_t trial = 0; trial < trials; ++trial) {
    const double scale = std::exp(log_scale(rng));
    for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = scale * normal(rng);
    const double norm = u.norm();
    const double violation = std::abs(u.dot(spec.quad_energy(u))) / (1.0 + norm * norm * norm);
    if (!std::isfinite(violation)) {
      report.max_violation = std::numeric_limits<double>::infinity();
      break;
    }
    report.max_violation = std::max(report.max_violation, violation);
  }
  report.pass = report.max_violation <= tol;
  return report;
}

}  // namespace cgpdf
