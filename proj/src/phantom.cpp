#include "airtrack/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <Eigen/Geometry>

namespace airtrack {

namespace {

constexpr double kSampleSpacing = 0.5;  // mm
constexpr double kJitterDeg = 5.0;
constexpr double kMinRadius = 0.5;  // mm

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double deg2rad(double d) { return d * std::numbers::pi / 180.0; }

// A unit vector perpendicular to d, at a uniformly drawn angle around it.
Vec3 random_perpendicular(const Vec3& d, CounterRng& rng) {
  const Vec3 helper = std::abs(d.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  const Vec3 u = d.cross(helper).normalized();
  const Vec3 w = d.cross(u).normalized();
  const double phi = 2.0 * std::numbers::pi * rng.uniform();
  return (std::cos(phi) * u + std::sin(phi) * w).normalized();
}

Vec3 rotate(const Vec3& v, const Vec3& axis, double angle_rad) {
  return Eigen::AngleAxisd(angle_rad, axis) * v;
}

void grow(PhantomTree& tree, const PhantomSpec& spec, const Vec3& start, const Vec3& direction, double radius,
          int generation, int parent, std::uint64_t node_id) {
  CounterRng rng(spec.rng_seed, node_id);
  // Jitter: tilt by up to 5 degrees about a random perpendicular axis.
  const Vec3 jitter_axis = random_perpendicular(direction, rng);
  const double jitter = deg2rad(kJitterDeg) * (2.0 * rng.uniform() - 1.0);
  const Vec3 dir = rotate(direction, jitter_axis, jitter).normalized();

  PhantomBranch b;
  b.parent = parent;
  const int n = static_cast<int>(std::ceil(spec.segment_length / kSampleSpacing));
  for (int i = 0; i <= n; ++i) {
    b.points.push_back(start + dir * (spec.segment_length * i / n));
    b.radii.push_back(radius);
  }
  const Vec3 end = b.points.back();
  const int self = static_cast<int>(tree.branches.size());
  tree.branches.push_back(std::move(b));
  if (generation >= spec.depth) return;

  const Vec3 split_axis = random_perpendicular(dir, rng);
  const double angle = deg2rad(spec.branch_angle_deg);
  const double child_radius = radius * spec.radius_taper;
  grow(tree, spec, end, rotate(dir, split_axis, +angle).normalized(), child_radius, generation + 1, self,
       2 * node_id + 1);
  grow(tree, spec, end, rotate(dir, split_axis, -angle).normalized(), child_radius, generation + 1, self,
       2 * node_id + 2);
}

// Closest point parameter of p on segment [a, b].
double segment_param(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 == 0.0) return 0.0;
  return std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
}

}  // namespace

std::uint64_t CounterRng::next_u64() {
  return splitmix64(splitmix64(seed_ ^ splitmix64(stream_)) + counter_++);
}

double CounterRng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double CounterRng::normal() {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

void PhantomSpec::validate() const {
  if (!(root_radius > 0.0)) throw std::invalid_argument("phantom root_radius must be positive");
  if (depth < 0) throw std::invalid_argument("phantom depth must be >= 0");
  if (!(radius_taper > 0.0 && radius_taper < 1.0)) throw std::invalid_argument("phantom radius_taper must lie in (0, 1)");
  if (!(segment_length > 0.0)) throw std::invalid_argument("phantom segment_length must be positive");
  if (!(root_direction.norm() > 0.0)) throw std::invalid_argument("phantom root_direction must be nonzero");
  if (root_radius * std::pow(radius_taper, depth) < kMinRadius)
    throw std::invalid_argument("phantom leaf radius would fall below 0.5 mm");
}

std::vector<Vec3> PhantomTree::samples() const {
  std::vector<Vec3> out;
  for (const auto& b : branches) out.insert(out.end(), b.points.begin(), b.points.end());
  return out;
}

PhantomTree generate_tree(const PhantomSpec& spec) {
  spec.validate();
  PhantomTree tree;
  grow(tree, spec, spec.root, spec.root_direction.normalized(), spec.root_radius, 0, -1, 0);
  return tree;
}

Volume rasterize(const PhantomTree& tree, const Index3& dims, const Vec3& spacing) {
  Volume vol(dims, spacing);
  for (const auto& b : tree.branches)
    for (const auto& p : b.points) {
      const Vec3 c = vol.to_continuous_index(p);
      for (int a = 0; a < 3; ++a)
        if (c[a] < 2.0 || c[a] > dims[a] - 3.0)
          throw std::out_of_range("rasterize: tree does not fit the volume with a 2-voxel margin");
    }

  for (const auto& b : tree.branches) {
    if (b.points.empty()) continue;
    const std::size_t last = b.points.size() - 1;
    const std::size_t segments = std::max<std::size_t>(last, 1);
    for (std::size_t s = 0; s < segments; ++s) {
      const std::size_t s1 = std::min(s + 1, last);
      const Vec3& a = b.points[s];
      const Vec3& e = b.points[s1];
      const double ra = b.radii[s];
      const double re = b.radii[s1];
      const double reach = 2.0 * std::max(ra, re);
      const Vec3 lo = (a.cwiseMin(e) - Vec3::Constant(reach)).cwiseQuotient(spacing);
      const Vec3 hi = (a.cwiseMax(e) + Vec3::Constant(reach)).cwiseQuotient(spacing);
      int i0[3], i1[3];
      for (int ax = 0; ax < 3; ++ax) {
        i0[ax] = std::max(0, static_cast<int>(std::ceil(lo[ax])));
        i1[ax] = std::min(dims[ax] - 1, static_cast<int>(std::floor(hi[ax])));
      }
      for (int k = i0[2]; k <= i1[2]; ++k)
        for (int j = i0[1]; j <= i1[1]; ++j)
          for (int i = i0[0]; i <= i1[0]; ++i) {
            const Vec3 p = vol.voxel_center(i, j, k);
            const double t = segment_param(p, a, e);
            const double r = ra + t * (re - ra);
            const double d2 = (p - (a + t * (e - a))).squaredNorm();
            if (d2 > 4.0 * r * r) continue;
            const double v = std::exp(-d2 / (2.0 * 0.25 * r * r));
            double& cell = vol.at(i, j, k);
            if (v > cell) cell = v;
          }
    }
  }
  return vol;
}

Volume corrupt(const Volume& vol, double noise_sigma, const std::vector<Occlusion>& occlusions,
               std::uint64_t rng_seed) {
  if (!(noise_sigma >= 0.0)) throw std::invalid_argument("corrupt: noise_sigma must be >= 0");
  Volume out = vol;
  if (noise_sigma > 0.0) {
    CounterRng rng(rng_seed, 0x6e6f697365ULL);
    for (auto& v : out.data()) v = std::clamp(v + noise_sigma * rng.normal(), 0.0, 1.0);
  }
  const auto [nx, ny, nz] = out.dims();
  for (const auto& occ : occlusions)
    for (int k = 0; k < nz; ++k)
      for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
          const Vec3 d = (out.voxel_center(i, j, k) - occ.center).cwiseAbs();
          if ((d.array() <= occ.half_extent.array()).all()) out.at(i, j, k) = 0.0;
        }
  return out;
}

}  // namespace airtrack
