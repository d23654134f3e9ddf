#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace airtrack {

using Vec3 = Eigen::Vector3d;
using Index3 = std::array<int, 3>;

/// Dense 3D scalar grid in world coordinates (mm).
///
/// Voxel (i, j, k) has its center at origin + (i*sx, j*sy, k*sz); data is stored
/// x-fastest. All public operations of this module take points in mm; voxel
/// indices are only used for direct element access.
class Volume {
 public:
  Volume() = default;
  Volume(Index3 dims, Vec3 spacing, Vec3 origin = Vec3::Zero(), double fill = 0.0);
  Volume(Index3 dims, Vec3 spacing, Vec3 origin, std::vector<double> data);

  const Index3& dims() const { return dims_; }
  const Vec3& spacing() const { return spacing_; }
  const Vec3& origin() const { return origin_; }
  std::size_t size() const { return data_.size(); }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(dims_[0]) *
               (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims_[1]) * static_cast<std::size_t>(k));
  }
  Index3 voxel_of(std::size_t linear) const;

  double at(int i, int j, int k) const { return data_[index(i, j, k)]; }
  double& at(int i, int j, int k) { return data_[index(i, j, k)]; }
  /// Edge-replicated access: indices are clamped into the grid.
  double at_clamped(int i, int j, int k) const;

  bool in_grid(int i, int j, int k) const {
    return i >= 0 && j >= 0 && k >= 0 && i < dims_[0] && j < dims_[1] && k < dims_[2];
  }

  Vec3 voxel_center(int i, int j, int k) const;
  /// Continuous voxel coordinates of a world point.
  Vec3 to_continuous_index(const Vec3& p) const;
  /// Nearest voxel to a world point (may lie outside the grid).
  Index3 nearest_voxel(const Vec3& p) const;

  /// A copy with the same geometry and every voxel set to `fill`.
  Volume like(double fill = 0.0) const { return Volume(dims_, spacing_, origin_, fill); }

  friend bool operator==(const Volume&, const Volume&) = default;

 private:
  Index3 dims_{0, 0, 0};
  Vec3 spacing_{1.0, 1.0, 1.0};
  Vec3 origin_{0.0, 0.0, 0.0};
  std::vector<double> data_;
};

/// Symmetric 3x3 matrix of second derivatives (response / mm^2).
struct SymMat3 {
  double xx = 0, yy = 0, zz = 0, xy = 0, xz = 0, yz = 0;

  Eigen::Matrix3d matrix() const;
  /// Eigenvalues ascending, eigenvectors as matching columns.
  std::pair<Vec3, Eigen::Matrix3d> eigen() const;
};

enum class ElementType { Float, Short, UChar };

/// Reads a MetaImage (.mhd) header and its detached little-endian raw file.
Volume load_volume(const std::filesystem::path& header);

/// Writes `<stem>.mhd` + `<stem>.raw` (MET_FLOAT) next to `header`.
void save_volume(const Volume& vol, const std::filesystem::path& header);

/// 1D Gaussian kernel in voxel units, truncated at 4 sigma and normalized to sum 1.
std::vector<double> gaussian_kernel(double sigma_vox);

/// Convolves along one axis with a centered odd-length kernel; borders replicate edges.
Volume convolve_axis(const Volume& vol, int axis, std::span<const double> kernel);

/// Separable Gaussian smoothing with per-axis sigma = sigma_mm / spacing.
Volume gaussian_smooth(const Volume& vol, double sigma_mm);

/// Trilinear interpolation at a world point inside the hull of voxel centers.
double trilinear_sample(const Volume& vol, const Vec3& point);

/// Hessian of an already smoothed volume: central differences on the grid,
/// trilinearly interpolated to `point`.
SymMat3 hessian_of_smoothed(const Volume& smoothed, const Vec3& point);

/// Hessian of the sigma-smoothed volume at `point`.
SymMat3 hessian_at(const Volume& vol, const Vec3& point, double sigma_mm);

}  // namespace airtrack
