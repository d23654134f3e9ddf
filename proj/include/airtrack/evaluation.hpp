#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "airtrack/phantom.hpp"
#include "airtrack/tracker.hpp"
#include "airtrack/volume.hpp"

namespace airtrack {

/// Average minimum distances between two centerline point sets (mm).
struct CenterlineMetrics {
  double d_fp = 0.0;   // segmentation -> reference
  double d_fn = 0.0;   // reference -> segmentation
  double d_err = 0.0;  // (d_fp + d_fn) / 2

  friend bool operator==(const CenterlineMetrics&, const CenterlineMetrics&) = default;
};

/// Exact nearest-neighbour queries on a static point set via a uniform bucket grid.
class PointGrid {
 public:
  explicit PointGrid(std::span<const Vec3> points);

  /// Distance from p to the closest stored point. Requires a non-empty set.
  double nearest_distance(const Vec3& p) const;
  double cell_size() const { return cell_; }

 private:
  std::vector<Vec3> points_;  // bucket order
  std::vector<std::size_t> cell_start_;
  Vec3 lo_ = Vec3::Zero();
  double cell_ = 1.0;
  Index3 cells_{1, 1, 1};

  std::size_t cell_index(int x, int y, int z) const {
    return static_cast<std::size_t>(x) + cells_[0] * (static_cast<std::size_t>(y) + cells_[1] * static_cast<std::size_t>(z));
  }
};

/// Mean of nearest-neighbour distances from every point of `from` to `to`.
double mean_min_distance(std::span<const Vec3> from, std::span<const Vec3> to);

/// d_FP, d_FN and d_err. Throws std::invalid_argument on an empty set.
CenterlineMetrics centerline_distance(std::span<const Vec3> segmentation, std::span<const Vec3> reference);

/// 26-connected flood fill of voxels >= threshold from the voxel nearest to seed.
/// Returns ascending linear voxel indices. Throws when the seed is outside the grid
/// or below threshold.
std::vector<std::size_t> region_grow(const Volume& vol, double threshold, const Vec3& seed);

/// World-space centers of the given voxels.
std::vector<Vec3> voxel_centers(const Volume& vol, std::span<const std::size_t> indices);

/// Smoothed positions of all given branches, in branch order.
std::vector<Vec3> branch_points(std::span<const Branch> branches);

/// Only the accepted branches.
std::vector<Branch> accepted_branches(std::span<const Branch> branches);

/// Fraction of ground-truth samples within tol_mm of any of the given points.
double sample_recall(std::span<const Vec3> points, const PhantomTree& tree, double tol_mm);

/// Fraction of ground-truth samples within tol_mm of any smoothed state of the branches.
double branch_recall(std::span<const Branch> branches, const PhantomTree& tree, double tol_mm);

}  // namespace airtrack
