#include "airtrack/smoother.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Cholesky>

#include "airtrack/error.hpp"

namespace airtrack {

namespace {

constexpr double kJitter = 1e-9;

// Cholesky factorization with a single jitter retry.
template <int N>
Eigen::LLT<Eigen::Matrix<double, N, N>> factor(const Eigen::Matrix<double, N, N>& a, const char* what) {
  Eigen::LLT<Eigen::Matrix<double, N, N>> llt(a);
  if (llt.info() == Eigen::Success) return llt;
  llt.compute(a + kJitter * Eigen::Matrix<double, N, N>::Identity());
  if (llt.info() == Eigen::Success) return llt;
  throw NumericalError(std::string(what) + " is not positive definite");
}

}  // namespace

GateParams GateParams::from_probability(double P_g, double kappa, bool rect_use_stddev) {
  if (!(kappa >= 3.0)) throw std::invalid_argument("gate: kappa must be >= 3");
  GateParams gp;
  gp.kappa = kappa;
  gp.P_g = P_g;
  gp.G = gate_threshold(P_g);
  gp.rect_use_stddev = rect_use_stddev;
  return gp;
}

double gate_threshold(double P_g) {
  if (!(P_g > 0.0 && P_g < 1.0)) throw std::invalid_argument("gate_threshold: P_g must lie in (0, 1)");
  return -2.0 * std::log1p(-P_g);
}

GaussianState predict(const GaussianState& s, const ModelMatrices& m) {
  GaussianState p;
  p.mean = m.F * s.mean;
  p.cov = m.F * s.cov * m.F.transpose() + m.Q;
  symmetrize(p.cov);
  return p;
}

MeasCov innovation_covariance(const GaussianState& pred, const ModelMatrices& m) {
  MeasCov S = m.H * pred.cov * m.H.transpose() + m.R;
  symmetrize(S);
  return S;
}

MeasVec gate_extent(const MeasCov& S, const GateParams& gp) {
  MeasVec e;
  for (int i = 0; i < kMeasurementDim; ++i) {
    const double sd = std::sqrt(S(i, i));
    const double rect = gp.rect_use_stddev ? gp.kappa * sd : gp.kappa * S(i, i);
    // The ellipsoid {v : v^T S^-1 v <= G} spans +-sqrt(G S_ii) along axis i.
    e[i] = std::min(rect, std::sqrt(gp.G) * sd);
  }
  return e;
}

namespace {

template <typename IndexRange>
std::vector<GateHit> gate_impl(const GaussianState& pred, std::span<const Measurement> pool, const IndexRange& indices,
                               const ModelMatrices& m, const GateParams& gp) {
  std::vector<GateHit> hits;
  const MeasCov S = innovation_covariance(pred, m);
  const auto llt = factor<kMeasurementDim>(S, "innovation covariance");
  const MeasCov S_inv = llt.solve(MeasCov::Identity());
  const MeasVec predicted = m.H * pred.mean;
  MeasVec bound;
  for (int i = 0; i < kMeasurementDim; ++i)
    bound[i] = gp.rect_use_stddev ? gp.kappa * std::sqrt(S(i, i)) : gp.kappa * S(i, i);

  for (const std::size_t idx : indices) {
    const Measurement& y = pool[idx];
    if (y.consumed) continue;
    const MeasVec v = measurement_vector(y) - predicted;
    if ((v.cwiseAbs().array() > bound.array()).any()) continue;
    const double d2 = v.dot(S_inv * v);
    if (d2 <= gp.G) hits.push_back({idx, d2});
  }
  std::sort(hits.begin(), hits.end(), [](const GateHit& a, const GateHit& b) {
    return a.distance2 != b.distance2 ? a.distance2 < b.distance2 : a.index < b.index;
  });
  return hits;
}

struct IotaRange {
  std::size_t n;
  struct It {
    std::size_t i;
    std::size_t operator*() const { return i; }
    It& operator++() {
      ++i;
      return *this;
    }
    bool operator!=(const It& o) const { return i != o.i; }
  };
  It begin() const { return {0}; }
  It end() const { return {n}; }
};

}  // namespace

std::vector<GateHit> gate_hits(const GaussianState& pred, std::span<const Measurement> pool, const ModelMatrices& m,
                               const GateParams& gp) {
  return gate_impl(pred, pool, IotaRange{pool.size()}, m, gp);
}

std::vector<GateHit> gate_hits(const GaussianState& pred, std::span<const Measurement> pool,
                               std::span<const std::size_t> candidates, const ModelMatrices& m, const GateParams& gp) {
  return gate_impl(pred, pool, candidates, m, gp);
}

std::vector<std::size_t> gate(const GaussianState& pred, std::span<const Measurement> pool, const ModelMatrices& m,
                              const GateParams& gp) {
  std::vector<std::size_t> out;
  for (const auto& h : gate_hits(pred, pool, m, gp)) out.push_back(h.index);
  return out;
}

GaussianState update(const GaussianState& pred, const MeasVec& y, const ModelMatrices& m, const StateConstraints& c) {
  const MeasCov S = innovation_covariance(pred, m);
  const auto llt = factor<kMeasurementDim>(S, "innovation covariance");
  const MeasVec v = y - m.H * pred.mean;
  // K = P H^T S^-1, computed as (S^-1 H P)^T since S and P are symmetric.
  const Eigen::Matrix<double, kStateDim, kMeasurementDim> K = llt.solve(m.H * pred.cov).transpose();
  GaussianState post;
  post.mean = pred.mean + K * v;
  post.cov = pred.cov - K * S * K.transpose();
  symmetrize(post.cov);
  apply_constraints(post, c);
  return post;
}

std::vector<SmoothedStep> rts_smooth(std::span<const FilterStep> steps, const ModelMatrices& m) {
  if (steps.empty()) throw std::invalid_argument("rts_smooth: empty step sequence");
  const std::size_t n = steps.size();
  std::vector<SmoothedStep> out(n);
  out[n - 1].state = steps[n - 1].posterior;
  for (std::size_t k = n - 1; k-- > 0;) {
    const GaussianState& filt = steps[k].posterior;
    const GaussianState& next_pred = steps[k + 1].predicted;
    const GaussianState& next_smooth = out[k + 1].state;
    const auto llt = factor<kStateDim>(next_pred.cov, "predicted covariance");
    // G = P_{k|k} F^T P_{k+1|k}^-1
    const StateCov G = llt.solve(m.F * filt.cov).transpose();
    GaussianState& s = out[k].state;
    s.mean = filt.mean + G * (next_smooth.mean - next_pred.mean);
    s.cov = filt.cov - G * (next_pred.cov - next_smooth.cov) * G.transpose();
    symmetrize(s.cov);
  }
  return out;
}

}  // namespace airtrack
