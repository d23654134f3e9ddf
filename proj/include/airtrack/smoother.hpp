#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "airtrack/statespace.hpp"

namespace airtrack {

inline constexpr std::ptrdiff_t kNoMeasurement = -1;

/// One forward-filter step. A coasted step has posterior == predicted and no measurement.
struct FilterStep {
  GaussianState predicted;  // x_{k|k-1}, P_{k|k-1}
  GaussianState posterior;  // x_{k|k},   P_{k|k}
  std::ptrdiff_t measurement_index = kNoMeasurement;
};

struct SmoothedStep {
  GaussianState state;  // x_{k|L}, P_{k|L}
};

/// Rectangular + ellipsoidal gate parameters.
struct GateParams {
  double kappa = 3.0;
  double G = 0.0;
  double P_g = 0.99;
  /// Bound |v_i| by kappa * sqrt(S_ii) instead of the literal kappa * S_ii.
  bool rect_use_stddev = false;

  /// Derives G from P_g; validates kappa >= 3 and 0 < P_g < 1.
  static GateParams from_probability(double P_g, double kappa = 3.0, bool rect_use_stddev = false);
};

/// G = -2 ln(1 - P_g), the inverse of P_g = 1 - exp(-G/2).
double gate_threshold(double P_g);

/// x = F x, P = F P F^T + Q.
GaussianState predict(const GaussianState& s, const ModelMatrices& m);

/// Innovation covariance S = H P H^T + R.
MeasCov innovation_covariance(const GaussianState& pred, const ModelMatrices& m);

/// Per-component half widths of the region a measurement must lie in to pass both
/// gates; usable as a conservative spatial query box.
MeasVec gate_extent(const MeasCov& S, const GateParams& gp);

/// Gated candidate with its squared Mahalanobis distance.
struct GateHit {
  std::size_t index = 0;
  double distance2 = 0.0;
};

/// Unconsumed measurements that pass the rectangular and then the ellipsoidal gate,
/// sorted by ascending Mahalanobis distance (index breaks ties).
/// Throws NumericalError when S is singular.
std::vector<GateHit> gate_hits(const GaussianState& pred, std::span<const Measurement> pool, const ModelMatrices& m,
                               const GateParams& gp);

/// Same, restricted to the listed pool indices (e.g. from a spatial query).
std::vector<GateHit> gate_hits(const GaussianState& pred, std::span<const Measurement> pool,
                               std::span<const std::size_t> candidates, const ModelMatrices& m, const GateParams& gp);

/// Indices only, in gate order.
std::vector<std::size_t> gate(const GaussianState& pred, std::span<const Measurement> pool, const ModelMatrices& m,
                              const GateParams& gp);

/// Kalman update with measurement y, followed by the mean constraints.
/// Throws NumericalError when S is singular.
GaussianState update(const GaussianState& pred, const MeasVec& y, const ModelMatrices& m,
                     const StateConstraints& c = {});

/// Rauch-Tung-Striebel backward pass. The last smoothed state equals the last posterior.
std::vector<SmoothedStep> rts_smooth(std::span<const FilterStep> steps, const ModelMatrices& m);

}  // namespace airtrack
