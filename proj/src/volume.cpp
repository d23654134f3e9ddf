#include "airtrack/volume.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

#include <Eigen/Eigenvalues>

#include "airtrack/error.hpp"

namespace airtrack {

static_assert(std::endian::native == std::endian::little, "raw volume I/O assumes a little-endian host");

Volume::Volume(Index3 dims, Vec3 spacing, Vec3 origin, double fill)
    : Volume(dims, spacing, origin,
             std::vector<double>(static_cast<std::size_t>(std::max(dims[0], 0)) * std::max(dims[1], 0) *
                                     std::max(dims[2], 0),
                                 fill)) {}

Volume::Volume(Index3 dims, Vec3 spacing, Vec3 origin, std::vector<double> data)
    : dims_(dims), spacing_(std::move(spacing)), origin_(std::move(origin)), data_(std::move(data)) {
  if (dims_[0] <= 0 || dims_[1] <= 0 || dims_[2] <= 0)
    throw std::invalid_argument("volume dimensions must be positive");
  if (!(spacing_.array() > 0.0).all())
    throw std::invalid_argument("volume spacing must be strictly positive");
  if (data_.size() != static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2])
    throw std::invalid_argument("volume data length does not match dimensions");
}

Index3 Volume::voxel_of(std::size_t linear) const {
  const auto nx = static_cast<std::size_t>(dims_[0]);
  const auto ny = static_cast<std::size_t>(dims_[1]);
  return {static_cast<int>(linear % nx), static_cast<int>((linear / nx) % ny), static_cast<int>(linear / (nx * ny))};
}

double Volume::at_clamped(int i, int j, int k) const {
  i = std::clamp(i, 0, dims_[0] - 1);
  j = std::clamp(j, 0, dims_[1] - 1);
  k = std::clamp(k, 0, dims_[2] - 1);
  return data_[index(i, j, k)];
}

Vec3 Volume::voxel_center(int i, int j, int k) const {
  return origin_ + Vec3(i, j, k).cwiseProduct(spacing_);
}

Vec3 Volume::to_continuous_index(const Vec3& p) const {
  return (p - origin_).cwiseQuotient(spacing_);
}

Index3 Volume::nearest_voxel(const Vec3& p) const {
  const Vec3 c = to_continuous_index(p);
  return {static_cast<int>(std::lround(c.x())), static_cast<int>(std::lround(c.y())),
          static_cast<int>(std::lround(c.z()))};
}

Eigen::Matrix3d SymMat3::matrix() const {
  Eigen::Matrix3d m;
  m << xx, xy, xz, xy, yy, yz, xz, yz, zz;
  return m;
}

std::pair<Vec3, Eigen::Matrix3d> SymMat3::eigen() const {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(matrix());
  return {solver.eigenvalues(), solver.eigenvectors()};
}

// ---------------------------------------------------------------------------
// MetaImage subset

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <typename T, std::size_t N>
std::array<T, N> parse_tuple(const std::map<std::string, std::string>& kv, const std::string& key) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw IoError("MetaImage header: missing " + key);
  std::istringstream in(it->second);
  std::array<T, N> out{};
  for (auto& v : out)
    if (!(in >> v)) throw IoError("MetaImage header: cannot parse " + key + " = " + it->second);
  std::string rest;
  if (in >> rest) throw IoError("MetaImage header: too many values in " + key);
  return out;
}

std::size_t element_size(ElementType t) {
  switch (t) {
    case ElementType::Float: return 4;
    case ElementType::Short: return 2;
    case ElementType::UChar: return 1;
  }
  return 0;
}

}  // namespace

Volume load_volume(const std::filesystem::path& header) {
  std::ifstream in(header);
  if (!in) throw IoError("cannot open volume header " + header.string());

  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      if (!trim(line).empty()) throw IoError("MetaImage header: malformed line '" + line + "'");
      continue;
    }
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }

  auto require = [&](const std::string& key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) throw IoError("MetaImage header: missing " + key);
    return it->second;
  };

  if (require("ObjectType") != "Image") throw IoError("MetaImage header: ObjectType must be Image");
  if (require("NDims") != "3") throw IoError("MetaImage header: NDims must be 3");
  const auto dims = parse_tuple<int, 3>(kv, "DimSize");
  const auto sp = parse_tuple<double, 3>(kv, "ElementSpacing");
  std::array<double, 3> off{0.0, 0.0, 0.0};
  if (kv.contains("Offset")) off = parse_tuple<double, 3>(kv, "Offset");
  if (kv.contains("BinaryDataByteOrderMSB") && kv["BinaryDataByteOrderMSB"] == "True")
    throw IoError("MetaImage header: big-endian data is not supported");

  const std::string& et = require("ElementType");
  ElementType type;
  if (et == "MET_FLOAT") type = ElementType::Float;
  else if (et == "MET_SHORT") type = ElementType::Short;
  else if (et == "MET_UCHAR") type = ElementType::UChar;
  else throw IoError("MetaImage header: unsupported ElementType " + et);

  for (int d : dims)
    if (d <= 0) throw IoError("MetaImage header: DimSize entries must be positive");
  for (double s : sp)
    if (!(s > 0.0)) throw IoError("MetaImage header: ElementSpacing entries must be positive");

  const std::string& file = require("ElementDataFile");
  if (file == "LOCAL") throw IoError("MetaImage header: inline data (LOCAL) is not supported");
  const auto raw_path = header.parent_path() / file;

  const std::size_t n = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  const std::size_t bytes = n * element_size(type);
  std::error_code ec;
  const auto actual = std::filesystem::file_size(raw_path, ec);
  if (ec) throw IoError("cannot stat raw data file " + raw_path.string());
  if (actual != bytes)
    throw IoError("raw data size mismatch: expected " + std::to_string(bytes) + " bytes, found " +
                  std::to_string(actual) + " in " + raw_path.string());

  std::ifstream raw(raw_path, std::ios::binary);
  if (!raw) throw IoError("cannot open raw data file " + raw_path.string());
  std::vector<char> buf(bytes);
  if (!raw.read(buf.data(), static_cast<std::streamsize>(bytes))) throw IoError("short read on " + raw_path.string());

  std::vector<double> data(n);
  for (std::size_t i = 0; i < n; ++i) {
    switch (type) {
      case ElementType::Float: {
        float v;
        std::memcpy(&v, buf.data() + 4 * i, 4);
        data[i] = v;
        break;
      }
      case ElementType::Short: {
        std::int16_t v;
        std::memcpy(&v, buf.data() + 2 * i, 2);
        data[i] = v;
        break;
      }
      case ElementType::UChar: data[i] = static_cast<unsigned char>(buf[i]); break;
    }
    if (!std::isfinite(data[i])) throw IoError("non-finite voxel value in " + raw_path.string());
  }
  return Volume({dims[0], dims[1], dims[2]}, Vec3(sp[0], sp[1], sp[2]), Vec3(off[0], off[1], off[2]), std::move(data));
}

void save_volume(const Volume& vol, const std::filesystem::path& header) {
  auto raw_path = header;
  raw_path.replace_extension(".raw");

  std::ofstream h(header);
  if (!h) throw IoError("cannot write " + header.string());
  std::ostringstream txt;
  txt.precision(17);
  txt << "ObjectType = Image\n"
      << "NDims = 3\n"
      << "BinaryData = True\n"
      << "BinaryDataByteOrderMSB = False\n"
      << "DimSize = " << vol.dims()[0] << ' ' << vol.dims()[1] << ' ' << vol.dims()[2] << '\n'
      << "ElementSpacing = " << vol.spacing().x() << ' ' << vol.spacing().y() << ' ' << vol.spacing().z() << '\n'
      << "Offset = " << vol.origin().x() << ' ' << vol.origin().y() << ' ' << vol.origin().z() << '\n'
      << "ElementType = MET_FLOAT\n"
      << "ElementDataFile = " << raw_path.filename().string() << '\n';
  h << txt.str();
  if (!h) throw IoError("cannot write " + header.string());

  std::vector<float> f(vol.data().begin(), vol.data().end());
  std::ofstream raw(raw_path, std::ios::binary);
  if (!raw) throw IoError("cannot write " + raw_path.string());
  raw.write(reinterpret_cast<const char*>(f.data()), static_cast<std::streamsize>(f.size() * sizeof(float)));
  if (!raw) throw IoError("cannot write " + raw_path.string());
}

// ---------------------------------------------------------------------------
// Filtering

std::vector<double> gaussian_kernel(double sigma_vox) {
  if (!(sigma_vox > 0.0)) throw std::invalid_argument("gaussian_kernel: sigma must be positive");
  const int radius = std::max(1, static_cast<int>(std::ceil(4.0 * sigma_vox)));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int t = -radius; t <= radius; ++t) {
    k[t + radius] = std::exp(-0.5 * t * t / (sigma_vox * sigma_vox));
    sum += k[t + radius];
  }
  for (auto& v : k) v /= sum;
  return k;
}

Volume convolve_axis(const Volume& vol, int axis, std::span<const double> kernel) {
  if (axis < 0 || axis > 2) throw std::invalid_argument("convolve_axis: axis must be 0, 1 or 2");
  if (kernel.size() % 2 != 1) throw std::invalid_argument("convolve_axis: kernel length must be odd");
  const int radius = static_cast<int>(kernel.size() / 2);
  const auto [nx, ny, nz] = vol.dims();
  Volume out = vol.like();
  const auto in = vol.data();
  auto dst = out.data();

  if (axis == 0) {
    std::vector<double> line(static_cast<std::size_t>(nx + 2 * radius));
    for (int k = 0; k < nz; ++k)
      for (int j = 0; j < ny; ++j) {
        const std::size_t base = vol.index(0, j, k);
        for (int t = -radius; t < nx + radius; ++t) line[t + radius] = in[base + std::clamp(t, 0, nx - 1)];
        for (int i = 0; i < nx; ++i) {
          double acc = 0.0;
          for (std::size_t t = 0; t < kernel.size(); ++t) acc += kernel[kernel.size() - 1 - t] * line[i + t];
          dst[base + i] = acc;
        }
      }
    return out;
  }

  // Rows (axis 1) or planes (axis 2) are contiguous, so accumulate whole runs per tap.
  const std::size_t run = axis == 1 ? static_cast<std::size_t>(nx) : static_cast<std::size_t>(nx) * ny;
  const int n = axis == 1 ? ny : nz;
  const int outer = axis == 1 ? nz : 1;
  const std::size_t outer_stride = static_cast<std::size_t>(nx) * ny;
  for (int o = 0; o < outer; ++o) {
    const std::size_t block = static_cast<std::size_t>(o) * outer_stride;
    for (int c = 0; c < n; ++c) {
      double* d = dst.data() + block + static_cast<std::size_t>(c) * run;
      std::fill(d, d + run, 0.0);
      for (int t = -radius; t <= radius; ++t) {
        const double w = kernel[radius - t];
        const double* s = in.data() + block + static_cast<std::size_t>(std::clamp(c + t, 0, n - 1)) * run;
        for (std::size_t r = 0; r < run; ++r) d[r] += w * s[r];
      }
    }
  }
  return out;
}

Volume gaussian_smooth(const Volume& vol, double sigma_mm) {
  if (!(sigma_mm > 0.0)) throw std::invalid_argument("gaussian_smooth: sigma must be positive");
  Volume out = vol;
  for (int axis = 0; axis < 3; ++axis) {
    const auto kernel = gaussian_kernel(sigma_mm / vol.spacing()[axis]);
    out = convolve_axis(out, axis, kernel);
  }
  return out;
}

double trilinear_sample(const Volume& vol, const Vec3& point) {
  const Vec3 c = vol.to_continuous_index(point);
  constexpr double eps = 1e-9;
  for (int a = 0; a < 3; ++a)
    if (c[a] < -eps || c[a] > vol.dims()[a] - 1 + eps)
      throw std::out_of_range("trilinear_sample: point outside the volume");

  int base[3];
  double frac[3];
  for (int a = 0; a < 3; ++a) {
    const double x = std::clamp(c[a], 0.0, static_cast<double>(vol.dims()[a] - 1));
    base[a] = std::min(static_cast<int>(std::floor(x)), std::max(vol.dims()[a] - 2, 0));
    frac[a] = x - base[a];
  }
  double acc = 0.0;
  for (int dz = 0; dz < 2; ++dz)
    for (int dy = 0; dy < 2; ++dy)
      for (int dx = 0; dx < 2; ++dx) {
        const double w = (dx ? frac[0] : 1 - frac[0]) * (dy ? frac[1] : 1 - frac[1]) * (dz ? frac[2] : 1 - frac[2]);
        if (w == 0.0) continue;
        acc += w * vol.at_clamped(base[0] + dx, base[1] + dy, base[2] + dz);
      }
  return acc;
}

namespace {

SymMat3 grid_hessian(const Volume& v, int i, int j, int k) {
  const Vec3& h = v.spacing();
  auto f = [&](int a, int b, int c) { return v.at_clamped(i + a, j + b, k + c); };
  const double c0 = f(0, 0, 0);
  SymMat3 m;
  m.xx = (f(1, 0, 0) - 2 * c0 + f(-1, 0, 0)) / (h.x() * h.x());
  m.yy = (f(0, 1, 0) - 2 * c0 + f(0, -1, 0)) / (h.y() * h.y());
  m.zz = (f(0, 0, 1) - 2 * c0 + f(0, 0, -1)) / (h.z() * h.z());
  m.xy = (f(1, 1, 0) - f(1, -1, 0) - f(-1, 1, 0) + f(-1, -1, 0)) / (4 * h.x() * h.y());
  m.xz = (f(1, 0, 1) - f(1, 0, -1) - f(-1, 0, 1) + f(-1, 0, -1)) / (4 * h.x() * h.z());
  m.yz = (f(0, 1, 1) - f(0, 1, -1) - f(0, -1, 1) + f(0, -1, -1)) / (4 * h.y() * h.z());
  return m;
}

}  // namespace

SymMat3 hessian_of_smoothed(const Volume& smoothed, const Vec3& point) {
  const Vec3 c = smoothed.to_continuous_index(point);
  constexpr double eps = 1e-9;
  for (int a = 0; a < 3; ++a)
    if (c[a] < 1.0 - eps || c[a] > smoothed.dims()[a] - 2 + eps)
      throw std::out_of_range("hessian_at: point closer than one voxel to the volume border");

  int base[3];
  double frac[3];
  for (int a = 0; a < 3; ++a) {
    base[a] = static_cast<int>(std::floor(c[a]));
    frac[a] = c[a] - base[a];
  }
  SymMat3 out;
  for (int dz = 0; dz < 2; ++dz)
    for (int dy = 0; dy < 2; ++dy)
      for (int dx = 0; dx < 2; ++dx) {
        const double w = (dx ? frac[0] : 1 - frac[0]) * (dy ? frac[1] : 1 - frac[1]) * (dz ? frac[2] : 1 - frac[2]);
        if (w == 0.0) continue;
        const SymMat3 g = grid_hessian(smoothed, base[0] + dx, base[1] + dy, base[2] + dz);
        out.xx += w * g.xx;
        out.yy += w * g.yy;
        out.zz += w * g.zz;
        out.xy += w * g.xy;
        out.xz += w * g.xz;
        out.yz += w * g.yz;
      }
  return out;
}

SymMat3 hessian_at(const Volume& vol, const Vec3& point, double sigma_mm) {
  return hessian_of_smoothed(gaussian_smooth(vol, sigma_mm), point);
}

}  // namespace airtrack
