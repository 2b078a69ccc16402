#pragma once

// Constant-coefficient linear conditional Gaussian systems with closed-form
// answers, shared by several test files.

#include "cgpdf/models.hpp"

namespace cgpdf::testing {

inline CGSystemSpec linear_spec(const Vector& A0, const Matrix& A1, const Vector& a0,
                                const Matrix& a1, const Matrix& sI, const Matrix& sII,
                                const Matrix& obs_feedback = Matrix()) {
  const auto n_obs = static_cast<std::size_t>(A0.size());
  const auto n_hid = static_cast<std::size_t>(a0.size());
  // Optional linear dependence of the observed drift on uI itself.
  const Matrix B = obs_feedback.size() ? obs_feedback
                                       : Matrix(Matrix::Zero(A0.size(), A0.size()));
  CGSystemSpec spec;
  spec.id = "linear";
  spec.n_obs = n_obs;
  spec.n_hid = n_hid;
  for (std::size_t i = 0; i < n_obs; ++i) spec.names.push_back("o" + std::to_string(i + 1));
  for (std::size_t i = 0; i < n_hid; ++i) spec.names.push_back("h" + std::to_string(i + 1));
  spec.constant_noise = true;
  spec.coefficients = [=](double, const ConstVectorRef& uI, Coefficients& c) {
    c.A0 = A0 + B * uI;
    c.A1 = A1;
    c.a0 = a0;
    c.a1 = a1;
    c.sigma_I = sI;
    c.sigma_II = sII;
  };
  spec.rhs = [=](double, const ConstVectorRef& u, VectorRef out) {
    const auto uI = u.head(static_cast<Eigen::Index>(n_obs));
    const auto uII = u.tail(static_cast<Eigen::Index>(n_hid));
    out.head(static_cast<Eigen::Index>(n_obs)) = A0 + B * uI + A1 * uII;
    out.tail(static_cast<Eigen::Index>(n_hid)) = a0 + a1 * uII;
  };
  return spec;
}

inline Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }
inline Vector vscalar(double v) { return Vector::Constant(1, v); }

/// du1 = -g1 u1 dt + s1 dW1, du2 = -g2 u2 dt + s2 dW2, uncoupled.
inline CGSystemSpec ou_pair(double g1, double s1, double g2, double s2) {
  return linear_spec(vscalar(0.0), scalar(0.0), vscalar(0.0), scalar(-g2), scalar(s1),
                     scalar(s2), scalar(-g1));
}

}  // namespace cgpdf::testing
