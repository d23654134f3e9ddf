#include "airtrack/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "airtrack/error.hpp"

namespace airtrack {

void TrackerConfig::validate() const {
  if (!(delta > 0.0)) throw std::invalid_argument("delta must be positive");
  if (!(sigma_q > 0.0) || !(sigma_m_pos > 0.0) || !(sigma_m_r > 0.0))
    throw std::invalid_argument("noise standard deviations must be positive");
  if (!(p0_scale > 0.0)) throw std::invalid_argument("p0_scale must be positive");
  if (!(kappa >= 3.0)) throw std::invalid_argument("kappa must be >= 3");
  if (!(P_g > 0.0 && P_g < 1.0)) throw std::invalid_argument("P_g must lie in (0, 1)");
  if (!(mu_c > 0.0)) throw std::invalid_argument("mu_c must be positive");
  if (min_branch_length < 1) throw std::invalid_argument("min_branch_length must be >= 1");
  if (max_branch_length < min_branch_length)
    throw std::invalid_argument("max_branch_length must be >= min_branch_length");
  if (max_coast_steps < 0) throw std::invalid_argument("max_coast_steps must be >= 0");
}

ModelMatrices TrackerConfig::models() const { return make_models(delta, sigma_q, sigma_m_pos, sigma_m_r); }

GateParams TrackerConfig::gate() const { return GateParams::from_probability(P_g, kappa, rect_gate_use_stddev); }

StateConstraints TrackerConfig::constraints() const {
  StateConstraints c;
  c.renormalize_direction = renormalize_direction;
  return c;
}

std::vector<std::size_t> Branch::measurement_indices() const {
  std::vector<std::size_t> out;
  for (const auto& s : filtered)
    if (s.measurement_index != kNoMeasurement) out.push_back(static_cast<std::size_t>(s.measurement_index));
  return out;
}

std::vector<Vec3> Branch::positions() const {
  std::vector<Vec3> out;
  out.reserve(smoothed.size());
  for (const auto& s : smoothed) out.push_back(s.state.position());
  return out;
}

// ---------------------------------------------------------------------------

MeasurementPool::MeasurementPool(std::span<Measurement> measurements, double cell_mm)
    : items_(measurements), cell_(cell_mm) {
  if (!(cell_ > 0.0)) throw std::invalid_argument("MeasurementPool: cell size must be positive");
  if (items_.empty()) {
    buckets_.resize(1);
    return;
  }
  Vec3 hi = items_[0].position;
  lo_ = hi;
  for (const auto& m : items_) {
    lo_ = lo_.cwiseMin(m.position);
    hi = hi.cwiseMax(m.position);
  }
  for (int a = 0; a < 3; ++a) cells_[a] = static_cast<int>(std::floor((hi[a] - lo_[a]) / cell_)) + 1;
  buckets_.resize(static_cast<std::size_t>(cells_[0]) * cells_[1] * cells_[2]);
  for (std::size_t i = 0; i < items_.size(); ++i) {
    const Vec3 c = (items_[i].position - lo_) / cell_;
    const int x = std::min(static_cast<int>(c.x()), cells_[0] - 1);
    const int y = std::min(static_cast<int>(c.y()), cells_[1] - 1);
    const int z = std::min(static_cast<int>(c.z()), cells_[2] - 1);
    buckets_[static_cast<std::size_t>(x) + cells_[0] * (static_cast<std::size_t>(y) + cells_[1] * z)].push_back(i);
  }
}

std::vector<std::size_t> MeasurementPool::query_box(const Vec3& center, const Vec3& half_extent) const {
  std::vector<std::size_t> out;
  if (items_.empty()) return out;
  int lo[3], hi[3];
  for (int a = 0; a < 3; ++a) {
    const double l = std::floor((center[a] - half_extent[a] - lo_[a]) / cell_);
    const double h = std::floor((center[a] + half_extent[a] - lo_[a]) / cell_);
    if (h < 0.0 || l > cells_[a] - 1) return out;
    lo[a] = static_cast<int>(std::max(l, 0.0));
    hi[a] = static_cast<int>(std::min(h, static_cast<double>(cells_[a] - 1)));
  }
  for (int z = lo[2]; z <= hi[2]; ++z)
    for (int y = lo[1]; y <= hi[1]; ++y)
      for (int x = lo[0]; x <= hi[0]; ++x) {
        const auto& b = buckets_[static_cast<std::size_t>(x) + cells_[0] * (static_cast<std::size_t>(y) + cells_[1] * z)];
        out.insert(out.end(), b.begin(), b.end());
      }
  std::sort(out.begin(), out.end());
  return out;
}

Vec3 SeedAxisEstimator::axis(const Measurement& m) {
  auto it = smoothed_.find(m.scale);
  if (it == smoothed_.end()) it = smoothed_.emplace(m.scale, gaussian_smooth(*vol_, m.scale)).first;
  try {
    if (auto a = principal_axis_from_smoothed(it->second, m.position)) return *a;
  } catch (const std::out_of_range&) {
  }
  return Vec3::UnitX();
}

// ---------------------------------------------------------------------------

std::optional<std::size_t> select_seed_index(std::span<const Measurement> pool) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (pool[i].consumed) continue;
    if (!best) {
      best = i;
      continue;
    }
    const Measurement& b = pool[*best];
    const Measurement& c = pool[i];
    if (c.scale > b.scale || (c.scale == b.scale && std::abs(c.response) > std::abs(b.response))) best = i;
  }
  return best;
}

std::optional<SeedChoice> select_seed(std::span<const Measurement> pool, SeedAxisEstimator& axes) {
  const auto idx = select_seed_index(pool);
  if (!idx) return std::nullopt;
  return SeedChoice{*idx, axes.axis(pool[*idx])};
}

namespace {

void trim_trailing_coast(std::vector<FilterStep>& steps) {
  while (steps.size() > 1 && steps.back().measurement_index == kNoMeasurement) steps.pop_back();
}

}  // namespace

Branch track_branch(std::size_t seed, const Vec3& axis, MeasurementPool& pool, const TrackerConfig& cfg) {
  if (seed >= pool.size()) throw std::out_of_range("track_branch: seed index out of range");
  const ModelMatrices models = cfg.models();
  const GateParams gp = cfg.gate();
  const StateConstraints constraints = cfg.constraints();

  pool.consume(seed);
  const GaussianState init = initial_state(pool[seed], axis.normalized(), cfg.p0_scale);

  Branch half;
  half.seed_index = seed;
  half.filtered.push_back({init, init, static_cast<std::ptrdiff_t>(seed)});

  GaussianState state = init;
  int coast = 0;
  while (half.filtered.size() < static_cast<std::size_t>(cfg.max_branch_length)) {
    const GaussianState pred = predict(state, models);
    std::vector<GateHit> hits;
    try {
      const MeasVec extent = gate_extent(innovation_covariance(pred, models), gp);
      const auto nearby = pool.query_box(pred.position(), extent.head<3>());
      hits = gate_hits(pred, pool.measurements(), nearby, models, gp);
    } catch (const NumericalError&) {
      break;
    }
    if (hits.empty()) {
      if (++coast > cfg.max_coast_steps) break;
      half.filtered.push_back({pred, pred, kNoMeasurement});
      state = pred;
      continue;
    }
    const std::size_t chosen = hits.front().index;
    GaussianState post;
    try {
      post = update(pred, measurement_vector(pool[chosen]), models, constraints);
    } catch (const NumericalError&) {
      break;
    }
    pool.consume(chosen);
    half.filtered.push_back({pred, post, static_cast<std::ptrdiff_t>(chosen)});
    state = post;
    coast = 0;
  }
  trim_trailing_coast(half.filtered);
  half.smoothed = rts_smooth(half.filtered, models);
  half.score_mu = branch_score(half, cfg);
  return half;
}

Branch filter_sequence(std::span<const std::ptrdiff_t> sequence, const Vec3& initial_direction,
                       std::span<const Measurement> pool, const TrackerConfig& cfg) {
  if (sequence.empty() || sequence.front() == kNoMeasurement)
    throw std::invalid_argument("filter_sequence: sequence must start with a measurement");
  const ModelMatrices models = cfg.models();
  const StateConstraints constraints = cfg.constraints();

  Branch b;
  const GaussianState init =
      initial_state(pool[static_cast<std::size_t>(sequence.front())], initial_direction.normalized(), cfg.p0_scale);
  b.filtered.push_back({init, init, sequence.front()});
  GaussianState state = init;
  for (std::size_t k = 1; k < sequence.size(); ++k) {
    const GaussianState pred = predict(state, models);
    if (sequence[k] == kNoMeasurement) {
      b.filtered.push_back({pred, pred, kNoMeasurement});
      state = pred;
      continue;
    }
    try {
      state = update(pred, measurement_vector(pool[static_cast<std::size_t>(sequence[k])]), models, constraints);
    } catch (const NumericalError&) {
      break;
    }
    b.filtered.push_back({pred, state, sequence[k]});
  }
  trim_trailing_coast(b.filtered);
  b.smoothed = rts_smooth(b.filtered, models);
  b.score_mu = branch_score(b, cfg);
  return b;
}

std::vector<Branch> track_all(std::span<Measurement> measurements, const Volume& vol, const TrackerConfig& cfg) {
  cfg.validate();
  std::vector<Branch> branches;
  if (measurements.empty()) return branches;

  MeasurementPool pool(measurements);
  SeedAxisEstimator axes(vol);
  while (auto seed = select_seed(pool.measurements(), axes)) {
    pool.consume(seed->index);
    const Branch forward = track_branch(seed->index, seed->axis, pool, cfg);
    const Branch backward = track_branch(seed->index, -seed->axis, pool, cfg);

    // reverse(backward) + seed + forward, with the seed appearing once.
    std::vector<std::ptrdiff_t> sequence;
    for (std::size_t k = backward.filtered.size(); k-- > 1;) sequence.push_back(backward.filtered[k].measurement_index);
    const std::size_t seed_step = sequence.size();
    sequence.push_back(static_cast<std::ptrdiff_t>(seed->index));
    for (std::size_t k = 1; k < forward.filtered.size(); ++k) sequence.push_back(forward.filtered[k].measurement_index);

    Vec3 start_dir = seed->axis;
    if (backward.filtered.size() > 1) {
      const Vec3 d = -backward.filtered.back().posterior.direction();
      if (d.norm() > 0.0) start_dir = d.normalized();
    }
    Branch joined = filter_sequence(sequence, start_dir, pool.measurements(), cfg);
    joined.seed_index = seed->index;
    joined.seed_step = std::min(seed_step, joined.length() - 1);
    joined.direction_sign = +1;
    branches.push_back(std::move(joined));
  }
  validate(branches, cfg);
  return branches;
}

double branch_score(const Branch& b, const TrackerConfig& cfg) {
  if (b.filtered.empty()) throw std::invalid_argument("branch_score: empty branch");
  double total = 0.0;
  if (cfg.covariance_source == CovarianceSource::Smoothed) {
    for (const auto& s : b.smoothed) total += s.state.cov.trace();
    return total / static_cast<double>(b.smoothed.size());
  }
  for (const auto& s : b.filtered) total += s.posterior.cov.trace();
  return total / static_cast<double>(b.filtered.size());
}

Partition validate(std::span<Branch> branches, const TrackerConfig& cfg) {
  Partition p;
  for (std::size_t i = 0; i < branches.size(); ++i) {
    Branch& b = branches[i];
    b.accepted = b.score_mu <= cfg.mu_c && b.length() >= static_cast<std::size_t>(cfg.min_branch_length);
    (b.accepted ? p.accepted : p.rejected).push_back(i);
  }
  return p;
}

}  // namespace airtrack
