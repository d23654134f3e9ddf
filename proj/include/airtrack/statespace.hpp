#pragma once

#include <Eigen/Core>

#include "airtrack/blobs.hpp"

namespace airtrack {

inline constexpr int kStateDim = 7;        // x, y, z, r, vx, vy, vz
inline constexpr int kMeasurementDim = 4;  // x, y, z, r

using StateVec = Eigen::Matrix<double, kStateDim, 1>;
using StateCov = Eigen::Matrix<double, kStateDim, kStateDim>;
using MeasVec = Eigen::Matrix<double, kMeasurementDim, 1>;
using MeasCov = Eigen::Matrix<double, kMeasurementDim, kMeasurementDim>;
using MeasMat = Eigen::Matrix<double, kMeasurementDim, kStateDim>;

/// Gaussian estimate of one tube segment (7-vector state).
struct GaussianState {
  StateVec mean = StateVec::Zero();
  StateCov cov = StateCov::Zero();

  Vec3 position() const { return mean.head<3>(); }
  double radius() const { return mean[3]; }
  Vec3 direction() const { return mean.tail<3>(); }
};

/// Constant-direction process model and position+radius measurement model.
struct ModelMatrices {
  StateCov F = StateCov::Identity();
  StateCov Q = StateCov::Zero();
  MeasMat H = MeasMat::Zero();
  MeasCov R = MeasCov::Identity();
  double delta = 1.0;
};

/// F = I with Delta on the position/direction coupling, Q = sigma_q^2 Delta on the
/// radius and direction block, H selects (x, y, z, r), R = diag(pos^2 x3, r^2).
ModelMatrices make_models(double delta, double sigma_q, double sigma_m_pos, double sigma_m_r);

/// Post-update adjustments applied to the mean only.
struct StateConstraints {
  bool renormalize_direction = true;
  bool clamp_radius = true;
  double min_radius = 0.1;  // mm

  /// Plain linear-Gaussian algebra, nothing adjusted.
  static StateConstraints none() { return {false, false, 0.1}; }
};

void apply_constraints(GaussianState& s, const StateConstraints& c);

/// Measurement vector (x, y, z, r) of a blob.
inline MeasVec measurement_vector(const Measurement& m) {
  MeasVec y;
  y << m.position, m.radius;
  return y;
}

/// Seed density N([position, radius, axis], p0_scale * I).
GaussianState initial_state(const Measurement& m, const Vec3& axis, double p0_scale);

/// Symmetrizes in place: (A + A^T) / 2.
template <typename Derived>
void symmetrize(Eigen::MatrixBase<Derived>& a) {
  a = (0.5 * (a + a.transpose())).eval();
}

}  // namespace airtrack
