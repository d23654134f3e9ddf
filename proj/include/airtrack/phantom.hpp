#pragma once

#include <cstdint>
#include <vector>

#include "airtrack/volume.hpp"

namespace airtrack {

struct PhantomSpec {
  Vec3 root{20.0, 20.0, 14.0};                       // mm
  Vec3 root_direction = Vec3(1.0, 1.0, 1.3).normalized();
  double root_radius = 5.0;                         // mm
  int depth = 3;                                    // branching generations
  double branch_angle_deg = 20.0;                   // mean bifurcation half-angle
  double radius_taper = 0.7;                        // child / parent radius
  double segment_length = 30.0;                     // mm
  std::uint64_t rng_seed = 1;

  void validate() const;
};

struct PhantomBranch {
  std::vector<Vec3> points;    // centerline samples, <= 0.5 mm apart
  std::vector<double> radii;   // mm, one per sample
  int parent = -1;             // index into PhantomTree::branches, -1 for the root

  friend bool operator==(const PhantomBranch&, const PhantomBranch&) = default;
};

struct PhantomTree {
  std::vector<PhantomBranch> branches;

  /// Every centerline sample of every branch, branch-major.
  std::vector<Vec3> samples() const;
  friend bool operator==(const PhantomTree&, const PhantomTree&) = default;
};

/// Axis-aligned box zeroed by corrupt().
struct Occlusion {
  Vec3 center = Vec3::Zero();       // mm
  Vec3 half_extent = Vec3::Zero();  // mm

  friend bool operator==(const Occlusion&, const Occlusion&) = default;
};

/// Counter-based generator: draw n of stream s is a pure function of (seed, s, n).
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}
  std::uint64_t next_u64();
  /// Uniform in [0, 1).
  double uniform();
  /// Standard normal (Box-Muller on two uniforms).
  double normal();

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
};

/// Recursive bifurcating tube tree: each branch is straight with +-5 deg jitter,
/// children are rotated +-branch_angle about a random axis and tapered.
PhantomTree generate_tree(const PhantomSpec& spec);

/// Soft tube rasterization: max over branches of exp(-d^2 / (2 (r/2)^2)), zero beyond 2r.
/// Origin is (0, 0, 0). Throws when a centerline sample is within 2 voxels of the border.
Volume rasterize(const PhantomTree& tree, const Index3& dims, const Vec3& spacing);

/// Additive Gaussian noise (clamped to [0, 1]) followed by zeroed occlusion boxes.
Volume corrupt(const Volume& vol, double noise_sigma, const std::vector<Occlusion>& occlusions,
               std::uint64_t rng_seed = 1);

}  // namespace airtrack
