#include "airtrack/blobs.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "airtrack/error.hpp"

namespace airtrack {

void BlobConfig::validate() const {
  if (scales.empty()) throw std::invalid_argument("blob scales must not be empty");
  for (std::size_t i = 0; i < scales.size(); ++i) {
    if (!(scales[i] > 0.0)) throw std::invalid_argument("blob scales must be positive");
    if (i > 0 && !(scales[i] > scales[i - 1])) throw std::invalid_argument("blob scales must be strictly ascending");
  }
  if (!(response_threshold >= 0.0)) throw std::invalid_argument("response_threshold must be nonnegative");
}

namespace {

// d^2/dx^2 of the sampled Gaussian, same support as gaussian_kernel, forced to zero sum.
std::vector<double> second_derivative_kernel(double sigma_vox) {
  const int radius = std::max(1, static_cast<int>(std::ceil(4.0 * sigma_vox)));
  std::vector<double> g(2 * radius + 1), d2(2 * radius + 1);
  const double s2 = sigma_vox * sigma_vox;
  double sum = 0.0;
  for (int t = -radius; t <= radius; ++t) {
    g[t + radius] = std::exp(-0.5 * t * t / s2);
    sum += g[t + radius];
  }
  double mean = 0.0;
  for (int t = -radius; t <= radius; ++t) {
    d2[t + radius] = (t * t / (s2 * s2) - 1.0 / s2) * g[t + radius] / sum;
    mean += d2[t + radius];
  }
  mean /= static_cast<double>(d2.size());
  for (auto& v : d2) v -= mean;
  return d2;
}

void add_scaled(Volume& acc, const Volume& v, double w) {
  auto a = acc.data();
  const auto b = v.data();
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += w * b[i];
}

}  // namespace

Volume log_response(const Volume& vol, double sigma_mm) {
  if (!(sigma_mm > 0.0)) throw std::invalid_argument("log_response: sigma must be positive");
  const Vec3& h = vol.spacing();
  std::vector<double> g[3], d2[3];
  for (int a = 0; a < 3; ++a) {
    g[a] = gaussian_kernel(sigma_mm / h[a]);
    d2[a] = second_derivative_kernel(sigma_mm / h[a]);
  }
  // Lxx = Gz Gy D2x, Lyy = Gz D2y Gx, Lzz = D2z Gy Gx; shared passes are reused.
  const Volume gx = convolve_axis(vol, 0, g[0]);
  const Volume dx = convolve_axis(vol, 0, d2[0]);
  const Volume gx_gy = convolve_axis(gx, 1, g[1]);
  Volume xy_part = convolve_axis(dx, 1, g[1]);
  add_scaled(xy_part, convolve_axis(gx, 1, d2[1]), (h.x() * h.x()) / (h.y() * h.y()));
  Volume out = convolve_axis(xy_part, 2, g[2]);
  const double sx = sigma_mm * sigma_mm / (h.x() * h.x());
  for (auto& v : out.data()) v *= sx;
  add_scaled(out, convolve_axis(gx_gy, 2, d2[2]), sigma_mm * sigma_mm / (h.z() * h.z()));
  return out;
}

bool measurement_order(const Measurement& a, const Measurement& b) {
  if (a.scale != b.scale) return a.scale > b.scale;
  const double ra = std::abs(a.response), rb = std::abs(b.response);
  if (ra != rb) return ra > rb;
  if (a.position.z() != b.position.z()) return a.position.z() < b.position.z();
  if (a.position.y() != b.position.y()) return a.position.y() < b.position.y();
  return a.position.x() < b.position.x();
}

std::vector<Measurement> detect_blobs(const Volume& vol, const BlobConfig& cfg) {
  cfg.validate();
  const auto [nx, ny, nz] = vol.dims();
  if (nx <= 3 || ny <= 3 || nz <= 3) throw std::invalid_argument("detect_blobs: volume must exceed 3 voxels per axis");

  std::vector<Volume> stack;
  stack.reserve(cfg.scales.size());
  for (double s : cfg.scales) stack.push_back(log_response(vol, s));

  auto sign_ok = [&](double r) {
    switch (cfg.polarity) {
      case Polarity::Bright: return r < 0.0;
      case Polarity::Dark: return r > 0.0;
      case Polarity::Both: return r != 0.0;
    }
    return false;
  };

  std::vector<Measurement> out;
  for (std::size_t s = 0; s < stack.size(); ++s) {
    const Volume& cur = stack[s];
    for (int k = 0; k < nz; ++k)
      for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
          const double r = cur.at(i, j, k);
          const double mag = std::abs(r);
          if (mag < cfg.response_threshold || mag == 0.0 || !sign_ok(r)) continue;
          if (s > 0 && !(mag > std::abs(stack[s - 1].at(i, j, k)))) continue;
          if (s + 1 < stack.size() && !(mag > std::abs(stack[s + 1].at(i, j, k)))) continue;
          bool is_max = true;
          for (int dk = -1; dk <= 1 && is_max; ++dk)
            for (int dj = -1; dj <= 1 && is_max; ++dj)
              for (int di = -1; di <= 1; ++di) {
                if (!di && !dj && !dk) continue;
                const int a = i + di, b = j + dj, c = k + dk;
                if (!cur.in_grid(a, b, c)) continue;
                if (!(mag > std::abs(cur.at(a, b, c)))) {
                  is_max = false;
                  break;
                }
              }
          if (!is_max) continue;
          Measurement m;
          m.position = vol.voxel_center(i, j, k);
          m.scale = cfg.scales[s];
          m.radius = radius_from_scale(m.scale);
          m.response = r;
          out.push_back(m);
        }
  }
  std::sort(out.begin(), out.end(), measurement_order);
  return out;
}

std::optional<Vec3> principal_axis_from_smoothed(const Volume& smoothed, const Vec3& position) {
  const auto [values, vectors] = hessian_of_smoothed(smoothed, position).eigen();
  if (values.cwiseAbs().maxCoeff() < 1e-12) return std::nullopt;
  int best = 0;
  for (int i = 1; i < 3; ++i)
    if (std::abs(values[i]) < std::abs(values[best])) best = i;
  Vec3 axis = vectors.col(best).normalized();
  for (int a = 0; a < 3; ++a) {
    if (axis[a] == 0.0) continue;
    if (axis[a] < 0.0) axis = -axis;
    break;
  }
  return axis;
}

std::optional<Vec3> principal_axis(const Volume& vol, const Measurement& m) {
  return principal_axis_from_smoothed(gaussian_smooth(vol, m.scale), m.position);
}

}  // namespace airtrack
