#include "airtrack/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace airtrack {

PointGrid::PointGrid(std::span<const Vec3> points) {
  if (points.empty()) throw std::invalid_argument("PointGrid: empty point set");
  Vec3 hi = points[0];
  lo_ = points[0];
  for (const auto& p : points) {
    lo_ = lo_.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }

  // Median spacing of consecutive points, enlarged so the grid holds O(n) cells.
  std::vector<double> gaps;
  for (std::size_t i = 1; i < points.size(); ++i) {
    const double g = (points[i] - points[i - 1]).norm();
    if (g > 0.0) gaps.push_back(g);
  }
  double cell = 1.0;
  if (!gaps.empty()) {
    std::nth_element(gaps.begin(), gaps.begin() + gaps.size() / 2, gaps.end());
    cell = gaps[gaps.size() / 2];
  }
  const Vec3 extent = (hi - lo_).cwiseMax(Vec3::Constant(1e-9));
  const double budget = 8.0 * static_cast<double>(points.size());
  for (;;) {
    double n = 1.0;
    for (int a = 0; a < 3; ++a) n *= std::floor(extent[a] / cell) + 1.0;
    if (n <= budget) break;
    cell *= 1.5;
  }
  cell_ = cell;
  for (int a = 0; a < 3; ++a) cells_[a] = static_cast<int>(std::floor(extent[a] / cell_)) + 1;

  auto cell_of = [&](const Vec3& p) {
    const Vec3 c = (p - lo_) / cell_;
    return cell_index(std::min(static_cast<int>(c.x()), cells_[0] - 1), std::min(static_cast<int>(c.y()), cells_[1] - 1),
                      std::min(static_cast<int>(c.z()), cells_[2] - 1));
  };
  const std::size_t ncells = static_cast<std::size_t>(cells_[0]) * cells_[1] * cells_[2];
  cell_start_.assign(ncells + 1, 0);
  std::vector<std::size_t> owner(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    owner[i] = cell_of(points[i]);
    ++cell_start_[owner[i] + 1];
  }
  std::partial_sum(cell_start_.begin(), cell_start_.end(), cell_start_.begin());
  points_.resize(points.size());
  std::vector<std::size_t> fill(cell_start_.begin(), cell_start_.end() - 1);
  for (std::size_t i = 0; i < points.size(); ++i) points_[fill[owner[i]]++] = points[i];
}

double PointGrid::nearest_distance(const Vec3& p) const {
  const Vec3 c = (p - lo_) / cell_;
  int home[3];
  for (int a = 0; a < 3; ++a)
    home[a] = std::clamp(static_cast<int>(std::floor(c[a])), 0, cells_[a] - 1);
  const int max_ring = std::max({cells_[0], cells_[1], cells_[2]});

  double best2 = std::numeric_limits<double>::infinity();
  auto scan = [&](int x, int y, int z) {
    if (x < 0 || y < 0 || z < 0 || x >= cells_[0] || y >= cells_[1] || z >= cells_[2]) return;
    const std::size_t ci = cell_index(x, y, z);
    for (std::size_t i = cell_start_[ci]; i < cell_start_[ci + 1]; ++i)
      best2 = std::min(best2, (points_[i] - p).squaredNorm());
  };
  for (int r = 0; r <= max_ring; ++r) {
    for (int dz = -r; dz <= r; ++dz)
      for (int dy = -r; dy <= r; ++dy) {
        const bool face = std::abs(dz) == r || std::abs(dy) == r;
        if (face) {
          for (int dx = -r; dx <= r; ++dx) scan(home[0] + dx, home[1] + dy, home[2] + dz);
        } else {
          scan(home[0] - r, home[1] + dy, home[2] + dz);
          if (r > 0) scan(home[0] + r, home[1] + dy, home[2] + dz);
        }
      }
    // Every cell beyond ring r is at least r cells away from p along some axis.
    const double reach = r * cell_;
    if (best2 <= reach * reach) break;
  }
  return std::sqrt(best2);
}

double mean_min_distance(std::span<const Vec3> from, std::span<const Vec3> to) {
  if (from.empty() || to.empty()) throw std::invalid_argument("mean_min_distance: empty point set");
  const PointGrid grid(to);
  double sum = 0.0;
  for (const auto& p : from) sum += grid.nearest_distance(p);
  return sum / static_cast<double>(from.size());
}

CenterlineMetrics centerline_distance(std::span<const Vec3> segmentation, std::span<const Vec3> reference) {
  if (segmentation.empty()) throw std::invalid_argument("centerline_distance: empty segmentation point set");
  if (reference.empty()) throw std::invalid_argument("centerline_distance: empty reference point set");
  CenterlineMetrics m;
  m.d_fp = mean_min_distance(segmentation, reference);
  m.d_fn = mean_min_distance(reference, segmentation);
  m.d_err = 0.5 * (m.d_fp + m.d_fn);
  return m;
}

std::vector<std::size_t> region_grow(const Volume& vol, double threshold, const Vec3& seed) {
  const Index3 s = vol.nearest_voxel(seed);
  if (!vol.in_grid(s[0], s[1], s[2])) throw std::invalid_argument("region_grow: seed outside the volume");
  if (!(vol.at(s[0], s[1], s[2]) >= threshold)) throw std::invalid_argument("region_grow: seed voxel below threshold");

  std::vector<char> visited(vol.size(), 0);
  std::vector<std::size_t> out;
  std::deque<Index3> queue{s};
  visited[vol.index(s[0], s[1], s[2])] = 1;
  while (!queue.empty()) {
    const Index3 v = queue.front();
    queue.pop_front();
    out.push_back(vol.index(v[0], v[1], v[2]));
    for (int dk = -1; dk <= 1; ++dk)
      for (int dj = -1; dj <= 1; ++dj)
        for (int di = -1; di <= 1; ++di) {
          const int i = v[0] + di, j = v[1] + dj, k = v[2] + dk;
          if (!vol.in_grid(i, j, k)) continue;
          const std::size_t idx = vol.index(i, j, k);
          if (visited[idx] || !(vol.at(i, j, k) >= threshold)) continue;
          visited[idx] = 1;
          queue.push_back({i, j, k});
        }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<Vec3> voxel_centers(const Volume& vol, std::span<const std::size_t> indices) {
  std::vector<Vec3> out;
  out.reserve(indices.size());
  for (const auto idx : indices) {
    const Index3 v = vol.voxel_of(idx);
    out.push_back(vol.voxel_center(v[0], v[1], v[2]));
  }
  return out;
}

std::vector<Vec3> branch_points(std::span<const Branch> branches) {
  std::vector<Vec3> out;
  for (const auto& b : branches)
    for (const auto& s : b.smoothed) out.push_back(s.state.position());
  return out;
}

std::vector<Branch> accepted_branches(std::span<const Branch> branches) {
  std::vector<Branch> out;
  for (const auto& b : branches)
    if (b.accepted) out.push_back(b);
  return out;
}

double sample_recall(std::span<const Vec3> points, const PhantomTree& tree, double tol_mm) {
  const auto truth = tree.samples();
  if (truth.empty()) throw std::invalid_argument("recall: empty ground-truth tree");
  if (!(tol_mm > 0.0)) throw std::invalid_argument("recall: tolerance must be positive");
  if (points.empty()) return 0.0;
  const PointGrid grid(points);
  std::size_t hit = 0;
  for (const auto& p : truth)
    if (grid.nearest_distance(p) <= tol_mm) ++hit;
  return static_cast<double>(hit) / static_cast<double>(truth.size());
}

double branch_recall(std::span<const Branch> branches, const PhantomTree& tree, double tol_mm) {
  return sample_recall(branch_points(branches), tree, tol_mm);
}

}  // namespace airtrack
