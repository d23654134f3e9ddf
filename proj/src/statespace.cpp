#include "airtrack/statespace.hpp"

#include <cmath>
#include <stdexcept>

namespace airtrack {

ModelMatrices make_models(double delta, double sigma_q, double sigma_m_pos, double sigma_m_r) {
  if (!(delta > 0.0) || !(sigma_q > 0.0) || !(sigma_m_pos > 0.0) || !(sigma_m_r > 0.0))
    throw std::invalid_argument("make_models: all parameters must be positive");
  ModelMatrices m;
  m.delta = delta;
  m.F.setIdentity();
  m.F(0, 4) = m.F(1, 5) = m.F(2, 6) = delta;
  m.Q.setZero();
  m.Q.bottomRightCorner<4, 4>().diagonal().setConstant(sigma_q * sigma_q * delta);
  m.H.setZero();
  m.H.leftCols<4>().setIdentity();
  m.R.setZero();
  m.R.diagonal() << sigma_m_pos * sigma_m_pos, sigma_m_pos * sigma_m_pos, sigma_m_pos * sigma_m_pos,
      sigma_m_r * sigma_m_r;
  return m;
}

void apply_constraints(GaussianState& s, const StateConstraints& c) {
  if (c.renormalize_direction) {
    const double n = s.mean.tail<3>().norm();
    if (n > 0.0) s.mean.tail<3>() /= n;
  }
  if (c.clamp_radius && s.mean[3] <= c.min_radius) s.mean[3] = c.min_radius;
}

GaussianState initial_state(const Measurement& m, const Vec3& axis, double p0_scale) {
  if (!(p0_scale > 0.0)) throw std::invalid_argument("initial_state: p0_scale must be positive");
  const double n = axis.norm();
  if (n == 0.0) throw std::invalid_argument("initial_state: zero axis");
  if (std::abs(n - 1.0) > 1e-6) throw std::invalid_argument("initial_state: axis must be unit length");
  GaussianState s;
  s.mean << m.position, m.radius, axis;
  s.cov = p0_scale * StateCov::Identity();
  return s;
}

}  // namespace airtrack
