#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "airtrack/blobs.hpp"
#include "airtrack/smoother.hpp"
#include "airtrack/volume.hpp"

namespace airtrack {

enum class CovarianceSource { Smoothed, Filtered };

struct TrackerConfig {
  // Models
  double delta = 0.5;  // mm per tracking step
  double sigma_q = 0.3;
  double sigma_m_pos = 2.0;  // mm
  double sigma_m_r = 1.0;    // mm
  double p0_scale = 1.0;
  bool renormalize_direction = false;
  // Gating
  double kappa = 3.0;
  double P_g = 0.99;
  bool rect_gate_use_stddev = false;
  // Branches
  double mu_c = 2.0;
  int min_branch_length = 3;
  int max_branch_length = 500;
  CovarianceSource covariance_source = CovarianceSource::Smoothed;
  int max_coast_steps = 0;

  void validate() const;
  ModelMatrices models() const;
  GateParams gate() const;
  StateConstraints constraints() const;
};

/// A tracked branch: forward-filter steps, their RTS-smoothed counterparts, and the
/// validation score. States are ordered along the seed axis.
struct Branch {
  std::vector<FilterStep> filtered;
  std::vector<SmoothedStep> smoothed;
  std::size_t seed_index = 0;  // measurement index of the seed
  std::size_t seed_step = 0;   // position of the seed within the states
  int direction_sign = +1;     // +1: states run along the seed axis
  double score_mu = 0.0;
  bool accepted = false;

  std::size_t length() const { return filtered.size(); }
  /// Measurement indices used by this branch (seed included), in state order.
  std::vector<std::size_t> measurement_indices() const;
  /// Smoothed centerline positions.
  std::vector<Vec3> positions() const;
};

/// Spatial bucket grid over a measurement list; consumption is tracked on the
/// measurements themselves.
class MeasurementPool {
 public:
  explicit MeasurementPool(std::span<Measurement> measurements, double cell_mm = 4.0);

  std::span<const Measurement> measurements() const { return items_; }
  const Measurement& operator[](std::size_t i) const { return items_[i]; }
  std::size_t size() const { return items_.size(); }

  void consume(std::size_t i) { items_[i].consumed = true; }
  bool consumed(std::size_t i) const { return items_[i].consumed; }

  /// Indices (ascending) of measurements whose bucket overlaps the box.
  std::vector<std::size_t> query_box(const Vec3& center, const Vec3& half_extent) const;

 private:
  std::span<Measurement> items_;
  Vec3 lo_ = Vec3::Zero();
  double cell_ = 4.0;
  Index3 cells_{1, 1, 1};
  std::vector<std::vector<std::size_t>> buckets_;
};

/// Tube-axis estimates at seed measurements, caching one smoothed volume per scale.
class SeedAxisEstimator {
 public:
  explicit SeedAxisEstimator(const Volume& vol) : vol_(&vol) {}
  /// Hessian principal axis; +x when the Hessian is degenerate or the point is too
  /// close to the border.
  Vec3 axis(const Measurement& m);

 private:
  const Volume* vol_;
  std::map<double, Volume> smoothed_;
};

/// Unconsumed measurement maximal under (scale, |response|); lowest index wins ties.
std::optional<std::size_t> select_seed_index(std::span<const Measurement> pool);

struct SeedChoice {
  std::size_t index = 0;
  Vec3 axis = Vec3::UnitX();
};

std::optional<SeedChoice> select_seed(std::span<const Measurement> pool, SeedAxisEstimator& axes);

/// Tracks from `seed` along `axis`: predict, gate, update with the nearest
/// candidate, consuming it; stops after more than max_coast_steps empty gates or at
/// max_branch_length states. The seed is consumed. Returns the filtered and
/// smoothed half-branch (state 0 is the seed).
Branch track_branch(std::size_t seed, const Vec3& axis, MeasurementPool& pool, const TrackerConfig& cfg);

/// Re-filters a joined association sequence (measurement indices, kNoMeasurement for
/// coasted steps) and smooths it in one pass.
Branch filter_sequence(std::span<const std::ptrdiff_t> sequence, const Vec3& initial_direction,
                       std::span<const Measurement> pool, const TrackerConfig& cfg);

/// Whole-volume extraction: seed selection, bidirectional tracking, joining,
/// scoring and validation. Consumption flags are written back to `pool`.
std::vector<Branch> track_all(std::span<Measurement> pool, const Volume& vol, const TrackerConfig& cfg);

/// Mean covariance trace over the branch states.
double branch_score(const Branch& b, const TrackerConfig& cfg);

struct Partition {
  std::vector<std::size_t> accepted;
  std::vector<std::size_t> rejected;
};

/// accepted <=> mu <= mu_c and length >= min_branch_length; sets Branch::accepted.
Partition validate(std::span<Branch> branches, const TrackerConfig& cfg);

}  // namespace airtrack
