#pragma once

#include <optional>
#include <vector>

#include "airtrack/volume.hpp"

namespace airtrack {

/// One scale-space blob: a 4-D observation (x, y, z, r) plus detector metadata.
struct Measurement {
  Vec3 position = Vec3::Zero();  // mm
  double radius = 0.0;           // mm
  double scale = 0.0;            // selected sigma (mm)
  double response = 0.0;         // signed scale-normalized LoG
  bool consumed = false;         // set by the tracker

  friend bool operator==(const Measurement&, const Measurement&) = default;
};

enum class Polarity { Bright, Dark, Both };

struct BlobConfig {
  std::vector<double> scales{1.0, 2.0, 4.0, 8.0, 12.0};
  double response_threshold = 0.1;
  Polarity polarity = Polarity::Bright;

  void validate() const;
};

/// Blob radius for a selected scale: a solid ball of radius R peaks near sigma = R / sqrt(3).
inline double radius_from_scale(double sigma_mm) { return 1.7320508075688772 * sigma_mm; }

/// Scale-normalized Laplacian of Gaussian, sigma^2 * (Lxx + Lyy + Lzz), computed with
/// sampled second-derivative-of-Gaussian kernels (4 sigma support, edge replication).
Volume log_response(const Volume& vol, double sigma_mm);

/// Multi-scale blob detection. Candidates are strict maxima of |response| over the 26
/// spatial neighbours and over the adjacent scales at the same voxel, with the sign the
/// polarity asks for. Sorted by scale desc, |response| desc, then position (z, y, x).
std::vector<Measurement> detect_blobs(const Volume& vol, const BlobConfig& cfg);

/// Total order used for measurement lists (and seed selection ties).
bool measurement_order(const Measurement& a, const Measurement& b);

/// Unit eigenvector of the Hessian at the measurement scale with the smallest
/// |eigenvalue| (the tube axis), with its first nonzero component positive.
/// Returns nullopt when the Hessian is degenerate (all |eigenvalues| < 1e-12).
std::optional<Vec3> principal_axis(const Volume& vol, const Measurement& m);

/// Same as principal_axis, from a volume already smoothed at m.scale.
std::optional<Vec3> principal_axis_from_smoothed(const Volume& smoothed, const Vec3& position);

}  // namespace airtrack
