#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "airtrack/tracker.hpp"
#include "oracles.hpp"

using namespace airtrack;

namespace {

Measurement meas(Vec3 p, double r = 2.0, double scale = 1.0, double response = 1.0) {
  Measurement m;
  m.position = p;
  m.radius = r;
  m.scale = scale;
  m.response = response;
  return m;
}

std::vector<Measurement> line(int n, Vec3 start = Vec3::Zero(), Vec3 dir = Vec3::UnitX(), double step = 1.0) {
  std::vector<Measurement> out;
  for (int i = 0; i < n; ++i) out.push_back(meas(start + i * step * dir));
  return out;
}

Volume blank() { return Volume({8, 8, 8}, Vec3::Ones()); }

Branch with_covs(const std::vector<StateCov>& covs) {
  Branch b;
  for (const auto& c : covs) {
    GaussianState s;
    s.cov = c;
    b.filtered.push_back({s, s, 0});
    b.smoothed.push_back({s});
  }
  return b;
}

Branch of_length(std::size_t n, double mu) {
  Branch b = with_covs(std::vector<StateCov>(n, StateCov::Identity()));
  b.score_mu = mu;
  return b;
}

}  // namespace

TEST_CASE("TrackerConfig validation") {
  TrackerConfig ok;
  CHECK_NOTHROW(ok.validate());
  auto bad = [](auto mutate) {
    TrackerConfig c;
    mutate(c);
    return c;
  };
  CHECK_THROWS(bad([](TrackerConfig& c) { c.delta = 0; }).validate());
  CHECK_THROWS(bad([](TrackerConfig& c) { c.P_g = 1.0; }).validate());
  CHECK_THROWS(bad([](TrackerConfig& c) { c.P_g = 0.0; }).validate());
  CHECK_THROWS(bad([](TrackerConfig& c) { c.mu_c = -1; }).validate());
  CHECK_THROWS(bad([](TrackerConfig& c) { c.max_coast_steps = -1; }).validate());
}

TEST_CASE("select_seed_index") {
  std::vector<Measurement> pool{meas({0, 0, 0}, 2, 2, 9), meas({1, 0, 0}, 2, 8, 3), meas({2, 0, 0}, 2, 8, 5)};
  CHECK(select_seed_index(pool) == 2u);

  pool[2].consumed = true;
  CHECK(select_seed_index(pool) == 1u);
  for (auto& m : pool) m.consumed = true;
  CHECK_FALSE(select_seed_index(pool).has_value());

  std::vector<Measurement> one{meas({5, 5, 5})};
  CHECK(select_seed_index(one) == 0u);
  CHECK_FALSE(select_seed_index(std::span<const Measurement>{}).has_value());

  // Dark blobs compete by magnitude; equal keys go to the lowest index.
  std::vector<Measurement> signs{meas({0, 0, 0}, 2, 4, 2), meas({1, 0, 0}, 2, 4, -3), meas({2, 0, 0}, 2, 4, -3)};
  CHECK(select_seed_index(signs) == 1u);
}

TEST_CASE("MeasurementPool query_box covers every point inside the box") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-20, 20);
  std::vector<Measurement> ms;
  for (int i = 0; i < 400; ++i) ms.push_back(meas({u(rng), u(rng), u(rng)}));
  MeasurementPool pool(ms, 3.0);
  for (int q = 0; q < 50; ++q) {
    const Vec3 c(u(rng), u(rng), u(rng));
    const Vec3 h(std::abs(u(rng)) / 2, std::abs(u(rng)) / 2, std::abs(u(rng)) / 2);
    const auto got = pool.query_box(c, h);
    CHECK(std::is_sorted(got.begin(), got.end()));
    CHECK(std::adjacent_find(got.begin(), got.end()) == got.end());
    const std::set<std::size_t> s(got.begin(), got.end());
    for (std::size_t i = 0; i < ms.size(); ++i)
      if (((ms[i].position - c).cwiseAbs() - h).maxCoeff() <= 0.0) CHECK(s.count(i) == 1);
  }
  CHECK(pool.query_box(Vec3(500, 0, 0), Vec3::Ones()).empty());

  std::vector<Measurement> none;
  MeasurementPool empty(none);
  CHECK(empty.query_box(Vec3::Zero(), Vec3::Constant(100)).empty());
  CHECK_THROWS_AS(MeasurementPool(ms, 0.0), std::invalid_argument);
}

TEST_CASE("track_branch follows a straight line in order") {
  auto ms = line(30);
  MeasurementPool pool(ms);
  TrackerConfig cfg;
  const Branch b = track_branch(0, Vec3::UnitX(), pool, cfg);
  const auto idx = b.measurement_indices();
  REQUIRE(idx.size() == ms.size());
  for (std::size_t i = 0; i < idx.size(); ++i) CHECK(idx[i] == i);
  for (const auto& m : ms) CHECK(m.consumed);
  REQUIRE(b.smoothed.size() == b.filtered.size());
  for (const Vec3& p : b.positions()) {
    CHECK(std::hypot(p.y(), p.z()) < 0.5);
    CHECK(p.x() > -0.5);
    CHECK(p.x() < 29.5);
  }
  CHECK(b.score_mu == doctest::Approx(branch_score(b, cfg)));
}

TEST_CASE("track_branch filter and smoother agree with dense conditioning") {
  // Irregular but well-separated measurements, radius far from the clamp.
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 0.2);
  std::vector<Measurement> ms;
  for (int i = 0; i < 12; ++i) ms.push_back(meas(Vec3(i + g(rng), g(rng), g(rng)), 3.0 + g(rng)));
  MeasurementPool pool(ms);
  TrackerConfig cfg;
  const Branch b = track_branch(0, Vec3::UnitX(), pool, cfg);
  REQUIRE(b.length() == ms.size());

  const ModelMatrices m = cfg.models();
  const GaussianState first = predict(b.filtered[0].posterior, m);
  std::vector<oracle::Vec> ys;
  for (std::size_t k = 1; k < b.length(); ++k)
    ys.push_back(measurement_vector(ms[static_cast<std::size_t>(b.filtered[k].measurement_index)]));
  const auto o = oracle::condition_chain(first.mean, first.cov, m.F, m.Q, m.H, m.R, ys);
  double worst = 0.0;
  for (std::size_t k = 1; k < b.length(); ++k) {
    worst = std::max(worst, oracle::rel_frobenius(b.filtered[k].posterior.mean, o.filtered_mean[k - 1]));
    worst = std::max(worst, oracle::rel_frobenius(b.filtered[k].posterior.cov, o.filtered_cov[k - 1]));
    worst = std::max(worst, oracle::rel_frobenius(b.smoothed[k].state.mean, o.smoothed_mean[k - 1]));
    worst = std::max(worst, oracle::rel_frobenius(b.smoothed[k].state.cov, o.smoothed_cov[k - 1]));
  }
  CHECK(worst < 1e-8);
}

TEST_CASE("track_branch edge cases") {
  TrackerConfig cfg;
  SUBCASE("isolated seed") {
    std::vector<Measurement> ms{meas({0, 0, 0}), meas({100, 0, 0})};
    MeasurementPool pool(ms);
    const Branch b = track_branch(0, Vec3::UnitX(), pool, cfg);
    CHECK(b.length() == 1);
    CHECK(b.smoothed.size() == 1);
    CHECK(b.score_mu == doctest::Approx(7.0));
    CHECK(ms[0].consumed);
    CHECK_FALSE(ms[1].consumed);
  }
  SUBCASE("seed out of range") {
    std::vector<Measurement> ms{meas({0, 0, 0})};
    MeasurementPool pool(ms);
    CHECK_THROWS_AS(track_branch(3, Vec3::UnitX(), pool, cfg), std::out_of_range);
  }
  SUBCASE("max_branch_length caps the walk") {
    auto ms = line(40);
    MeasurementPool pool(ms);
    cfg.max_branch_length = 10;
    CHECK(track_branch(0, Vec3::UnitX(), pool, cfg).length() == 10);
  }
}

TEST_CASE("coasting bridges a short gap") {
  TrackerConfig cfg;
  cfg.delta = 1.0;
  cfg.sigma_m_pos = 0.5;
  cfg.sigma_m_r = 0.3;
  cfg.sigma_q = 0.05;
  cfg.p0_scale = 0.1;
  auto make = [] {
    std::vector<Measurement> ms;
    for (int i = 0; i <= 20; ++i)
      if (i != 6 && i != 7) ms.push_back(meas(Vec3(i, 0, 0)));
    return ms;
  };
  {
    auto ms = make();
    MeasurementPool pool(ms);
    const Branch b = track_branch(0, Vec3::UnitX(), pool, cfg);
    CHECK(b.length() == 6);
  }
  {
    cfg.max_coast_steps = 1;
    auto ms = make();
    MeasurementPool pool(ms);
    const Branch b = track_branch(0, Vec3::UnitX(), pool, cfg);
    CHECK(b.measurement_indices().size() == ms.size());
    CHECK(b.length() == ms.size() + 1);
    CHECK(b.filtered.back().measurement_index != kNoMeasurement);
    const auto coasted = std::count_if(b.filtered.begin(), b.filtered.end(),
                                       [](const FilterStep& s) { return s.measurement_index == kNoMeasurement; });
    CHECK(coasted == 1);
  }
}

TEST_CASE("track_all on an empty pool") {
  std::vector<Measurement> none;
  CHECK(track_all(none, blank(), TrackerConfig{}).empty());
}

TEST_CASE("track_all joins both halves of a tube seeded in the middle") {
  auto ms = line(41);
  ms[20].scale = 2.0;  // seed
  TrackerConfig cfg;
  const auto branches = track_all(ms, blank(), cfg);
  REQUIRE(branches.size() == 1);
  const Branch& b = branches[0];
  CHECK(b.seed_index == 20);
  CHECK(b.length() == 41);
  CHECK(b.filtered[b.seed_step].measurement_index == 20);
  const auto idx = b.measurement_indices();
  REQUIRE(idx.size() == 41);
  // States run from one end to the other, monotone in x.
  const bool up = idx.front() < idx.back();
  for (std::size_t i = 1; i < idx.size(); ++i) CHECK((up ? idx[i] == idx[i - 1] + 1 : idx[i] + 1 == idx[i - 1]));
  const auto pos = b.positions();
  CHECK(std::min(pos.front().x(), pos.back().x()) < 1.0);
  CHECK(std::max(pos.front().x(), pos.back().x()) > 39.0);
  CHECK(b.accepted);
  CHECK(b.score_mu < cfg.mu_c);
}

TEST_CASE("track_all result does not depend on which way the line is listed") {
  auto fwd = line(41);
  fwd[20].scale = 2.0;
  std::vector<Measurement> rev(fwd.rbegin(), fwd.rend());
  TrackerConfig cfg;
  const auto a = track_all(fwd, blank(), cfg);
  const auto b = track_all(rev, blank(), cfg);
  REQUIRE(a.size() == 1);
  REQUIRE(b.size() == 1);
  CHECK(a[0].score_mu == doctest::Approx(b[0].score_mu).epsilon(1e-9));
  auto pa = a[0].positions();
  auto pb = b[0].positions();
  REQUIRE(pa.size() == pb.size());
  auto by_x = [](const Vec3& l, const Vec3& r) { return l.x() < r.x(); };
  std::sort(pa.begin(), pa.end(), by_x);
  std::sort(pb.begin(), pb.end(), by_x);
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK((pa[i] - pb[i]).norm() < 1e-6);
}

TEST_CASE("track_all on a Y conserves measurements") {
  std::vector<Measurement> ms;
  for (int i = 0; i <= 20; ++i) ms.push_back(meas(Vec3(i, 0, 0), 3.0, 2.0));
  const double a = 35.0 * M_PI / 180.0;
  for (int s : {-1, 1})
    for (int i = 1; i <= 25; ++i) ms.push_back(meas(Vec3(20 + i * std::cos(a), s * i * std::sin(a), 0)));
  TrackerConfig cfg;
  const auto branches = track_all(ms, blank(), cfg);
  CHECK(branches.size() >= 2);

  std::set<std::size_t> seen;
  std::size_t total = 0;
  for (const auto& b : branches) {
    const auto idx = b.measurement_indices();
    total += idx.size();
    seen.insert(idx.begin(), idx.end());
    CHECK(std::find(idx.begin(), idx.end(), b.seed_index) != idx.end());
  }
  CHECK(total == seen.size());  // disjoint
  CHECK(seen.size() == ms.size());
  for (const auto& m : ms) CHECK(m.consumed);
  CHECK(std::count_if(branches.begin(), branches.end(), [](const Branch& b) { return b.length() >= 20; }) >= 2);
}

TEST_CASE("track_all is deterministic") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0, 30);
  std::vector<Measurement> ms = line(30, Vec3(0, 15, 15));
  for (int i = 0; i < 60; ++i) ms.push_back(meas({u(rng), u(rng), u(rng)}, 1.0, 1.0, 0.5));
  auto ms2 = ms;
  const auto a = track_all(ms, blank(), TrackerConfig{});
  const auto b = track_all(ms2, blank(), TrackerConfig{});
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].measurement_indices() == b[i].measurement_indices());
    CHECK(a[i].score_mu == b[i].score_mu);
    CHECK(a[i].accepted == b[i].accepted);
  }
}

TEST_CASE("branch_score") {
  TrackerConfig cfg;
  CHECK(branch_score(with_covs({StateCov::Identity()}), cfg) == doctest::Approx(7.0));
  const StateCov one = StateCov::Identity() / 7.0;
  const StateCov three = 3.0 * one;
  CHECK(branch_score(with_covs({one, three}), cfg) == doctest::Approx(2.0));

  Branch b = with_covs({one, three});
  b.smoothed[1].state.cov = one;
  CHECK(branch_score(b, cfg) == doctest::Approx(1.0));
  cfg.covariance_source = CovarianceSource::Filtered;
  CHECK(branch_score(b, cfg) == doctest::Approx(2.0));
  CHECK_THROWS_AS(branch_score(Branch{}, cfg), std::invalid_argument);
}

TEST_CASE("noise branches score worse than a tube") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0, 100);
  std::vector<Measurement> ms = line(60, Vec3(20, 50, 50));
  for (auto& m : ms) m.scale = 2.0;
  for (int i = 0; i < 40; ++i) ms.push_back(meas({u(rng), u(rng), u(rng)}, 1.0, 1.0));
  TrackerConfig cfg;
  const auto branches = track_all(ms, blank(), cfg);
  REQUIRE(branches.size() >= 2);
  const double tube = branches[0].score_mu;
  CHECK(branches[0].length() >= 55);
  CHECK(branches[0].accepted);
  double noise = 0.0;
  for (std::size_t i = 1; i < branches.size(); ++i) noise += branches[i].score_mu;
  noise /= static_cast<double>(branches.size() - 1);
  CHECK(noise > tube);
  CHECK(noise > cfg.mu_c);
}

TEST_CASE("validate") {
  TrackerConfig cfg;
  std::vector<Branch> bs{of_length(10, 1.9), of_length(10, 2.1), of_length(1, 0.5), of_length(3, 2.0)};
  const Partition p = validate(bs, cfg);
  CHECK(p.accepted == std::vector<std::size_t>{0, 3});
  CHECK(p.rejected == std::vector<std::size_t>{1, 2});
  CHECK(bs[0].accepted);
  CHECK_FALSE(bs[1].accepted);
  CHECK_FALSE(bs[2].accepted);
  CHECK(bs[3].accepted);
}

TEST_CASE("accepted set grows with mu_c") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.5, 6.0);
  std::uniform_int_distribution<int> len(1, 30);
  std::vector<Branch> bs;
  for (int i = 0; i < 100; ++i) bs.push_back(of_length(static_cast<std::size_t>(len(rng)), u(rng)));
  std::set<std::size_t> prev;
  for (double mu : {0.5, 1.0, 2.0, 3.0, 5.0, 7.0}) {
    TrackerConfig cfg;
    cfg.mu_c = mu;
    const Partition p = validate(bs, cfg);
    const std::set<std::size_t> now(p.accepted.begin(), p.accepted.end());
    CHECK(std::includes(now.begin(), now.end(), prev.begin(), prev.end()));
    CHECK(p.accepted.size() + p.rejected.size() == bs.size());
    prev = now;
  }
}
