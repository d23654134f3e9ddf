#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>

#include "airtrack/error.hpp"
#include "airtrack/volume.hpp"
#include "oracles.hpp"

using namespace airtrack;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const char* name) {
  auto d = fs::temp_directory_path() / "airtrack_test_volume" / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

void write_header(const fs::path& p, const std::string& body) {
  std::ofstream(p) << body;
}

Volume random_volume(Index3 dims, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Volume v(dims, Vec3(1, 1, 1));
  for (auto& x : v.data()) x = u(rng);
  return v;
}

template <typename F>
Volume field(Index3 dims, Vec3 spacing, Vec3 origin, F f) {
  Volume v(dims, spacing, origin);
  for (int k = 0; k < dims[2]; ++k)
    for (int j = 0; j < dims[1]; ++j)
      for (int i = 0; i < dims[0]; ++i) {
        const Vec3 p = v.voxel_center(i, j, k);
        v.at(i, j, k) = f(p.x(), p.y(), p.z());
      }
  return v;
}

double max_abs_diff(const Volume& a, const Volume& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

}  // namespace

TEST_CASE("volume construction validates geometry") {
  CHECK_THROWS_AS(Volume({0, 2, 2}, Vec3(1, 1, 1)), std::invalid_argument);
  CHECK_THROWS_AS(Volume({2, 2, 2}, Vec3(1, 0, 1)), std::invalid_argument);
  CHECK_THROWS_AS(Volume({2, 2, 2}, Vec3(1, 1, 1), Vec3::Zero(), std::vector<double>(7)), std::invalid_argument);
  Volume v({3, 4, 5}, Vec3(1, 2, 3), Vec3(10, 20, 30), 2.5);
  CHECK(v.size() == 60);
  CHECK(v.at(2, 3, 4) == 2.5);
  CHECK(v.index(1, 2, 3) == 1 + 3 * (2 + 4 * 3));
  CHECK(v.voxel_of(v.index(1, 2, 3)) == Index3{1, 2, 3});
  CHECK(v.voxel_center(1, 1, 1).isApprox(Vec3(11, 22, 33)));
  CHECK(v.nearest_voxel(Vec3(11.4, 22.9, 31.6)) == Index3{1, 1, 1});
  CHECK(v.to_continuous_index(Vec3(10.5, 21, 34.5)).isApprox(Vec3(0.5, 0.5, 1.5)));
  CHECK(v.at_clamped(-5, 100, 2) == 2.5);
}

TEST_CASE("metaimage round trip and header arithmetic") {
  const auto dir = scratch_dir("roundtrip");
  SUBCASE("2x2x2 zeros") {
    Volume z({2, 2, 2}, Vec3(1, 1, 1));
    save_volume(z, dir / "z.mhd");
    const Volume back = load_volume(dir / "z.mhd");
    CHECK(back.size() == 8);
    CHECK(back == z);
  }
  SUBCASE("values, spacing and origin survive") {
    Volume v = random_volume({3, 4, 5}, 7);
    v = Volume(v.dims(), Vec3(0.78, 0.78, 1.0), Vec3(-3, 2, 5), std::vector<double>(v.data().begin(), v.data().end()));
    for (auto& x : v.data()) x = static_cast<float>(x);
    save_volume(v, dir / "v.mhd");
    const Volume back = load_volume(dir / "v.mhd");
    CHECK(back.dims() == Index3{3, 4, 5});
    CHECK(back == v);
  }
  SUBCASE("DimSize 3 4 5 with 240 bytes loads") {
    write_header(dir / "a.mhd",
                 "ObjectType = Image\nNDims = 3\nDimSize = 3 4 5\nElementSpacing = 1 1 1\n"
                 "ElementType = MET_FLOAT\nElementDataFile = a.raw\n");
    std::ofstream(dir / "a.raw", std::ios::binary) << std::string(240, '\0');
    const Volume v = load_volume(dir / "a.mhd");
    CHECK(v.dims() == Index3{3, 4, 5});
    CHECK(v.origin() == Vec3::Zero());
  }
  SUBCASE("size mismatch is an I/O error") {
    write_header(dir / "b.mhd",
                 "ObjectType = Image\nNDims = 3\nDimSize = 3 4 5\nElementSpacing = 1 1 1\n"
                 "ElementType = MET_FLOAT\nElementDataFile = b.raw\n");
    std::ofstream(dir / "b.raw", std::ios::binary) << std::string(100, '\0');
    CHECK_THROWS_AS(load_volume(dir / "b.mhd"), IoError);
  }
  SUBCASE("short and uchar element types") {
    write_header(dir / "s.mhd",
                 "ObjectType = Image\nNDims = 3\nDimSize = 2 1 1\nElementSpacing = 1 1 1\nOffset = 1 2 3\n"
                 "ElementType = MET_SHORT\nElementDataFile = s.raw\n");
    {
      std::ofstream raw(dir / "s.raw", std::ios::binary);
      const unsigned char bytes[] = {0xFF, 0xFF, 0x10, 0x00};  // -1, 16 little-endian
      raw.write(reinterpret_cast<const char*>(bytes), 4);
    }
    const Volume s = load_volume(dir / "s.mhd");
    CHECK(s.at(0, 0, 0) == -1.0);
    CHECK(s.at(1, 0, 0) == 16.0);
    CHECK(s.origin() == Vec3(1, 2, 3));
    write_header(dir / "u.mhd",
                 "ObjectType = Image\nNDims = 3\nDimSize = 1 1 1\nElementSpacing = 1 1 1\n"
                 "ElementType = MET_UCHAR\nElementDataFile = u.raw\n");
    std::ofstream(dir / "u.raw", std::ios::binary) << static_cast<char>(200);
    CHECK(load_volume(dir / "u.mhd").at(0, 0, 0) == 200.0);
  }
  SUBCASE("bad headers") {
    write_header(dir / "c.mhd", "ObjectType = Image\nNDims = 3\nDimSize = 1 1 1\nElementSpacing = 1 1 1\n"
                                "ElementType = MET_DOUBLE\nElementDataFile = c.raw\n");
    CHECK_THROWS_AS(load_volume(dir / "c.mhd"), IoError);
    write_header(dir / "d.mhd", "ObjectType = Image\nNDims = 3\nDimSize = 1 1\nElementSpacing = 1 1 1\n"
                                "ElementType = MET_FLOAT\nElementDataFile = d.raw\n");
    CHECK_THROWS_AS(load_volume(dir / "d.mhd"), IoError);
    write_header(dir / "e.mhd", "ObjectType = Image\nNDims = 3\nElementSpacing = 1 1 1\n"
                                "ElementType = MET_FLOAT\nElementDataFile = e.raw\n");
    CHECK_THROWS_AS(load_volume(dir / "e.mhd"), IoError);
    CHECK_THROWS_AS(load_volume(dir / "missing.mhd"), IoError);
  }
  SUBCASE("non-finite values are rejected") {
    write_header(dir / "n.mhd", "ObjectType = Image\nNDims = 3\nDimSize = 1 1 1\nElementSpacing = 1 1 1\n"
                                "ElementType = MET_FLOAT\nElementDataFile = n.raw\n");
    const float nan = std::numeric_limits<float>::quiet_NaN();
    std::ofstream(dir / "n.raw", std::ios::binary).write(reinterpret_cast<const char*>(&nan), 4);
    CHECK_THROWS_AS(load_volume(dir / "n.mhd"), IoError);
  }
}

TEST_CASE("gaussian kernel") {
  const auto k = gaussian_kernel(2.0);
  CHECK(k.size() == 17);
  double s = 0.0;
  for (double x : k) s += x;
  CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(k[8] > k[7]);
  CHECK(k[7] == doctest::Approx(k[9]).epsilon(1e-15));
  CHECK_THROWS_AS(gaussian_kernel(0.0), std::invalid_argument);
}

TEST_CASE("gaussian_smooth examples") {
  SUBCASE("constant stays constant") {
    Volume c({9, 10, 11}, Vec3(1, 0.5, 2), Vec3::Zero(), 3.25);
    const Volume s = gaussian_smooth(c, 1.7);
    for (double x : s.data()) CHECK(x == doctest::Approx(3.25).epsilon(1e-6));
  }
  SUBCASE("impulse peak and mass") {
    Volume imp({33, 33, 33}, Vec3(1, 1, 1));
    imp.at(16, 16, 16) = 1.0;
    const Volume s = gaussian_smooth(imp, 2.0);
    const double expected = std::pow(2 * M_PI * 4.0, -1.5);
    CHECK(std::abs(s.at(16, 16, 16) - expected) / expected < 0.02);
    double mass = 0.0;
    for (double x : s.data()) mass += x;
    CHECK(std::abs(mass - 1.0) < 1e-3);
  }
  SUBCASE("matches the dense direct convolution oracle") {
    const Volume v = random_volume({13, 12, 11}, 3);
    const double sigma = 1.3;
    const Volume s = gaussian_smooth(v, sigma);
    const auto k1 = gaussian_kernel(sigma);
    const int half = static_cast<int>(k1.size() / 2);
    const Volume o = oracle::dense_convolve(v, half, [&](int dx, int dy, int dz) {
      return k1[static_cast<std::size_t>(dx + half)] * k1[static_cast<std::size_t>(dy + half)] *
             k1[static_cast<std::size_t>(dz + half)];
    });
    CHECK(max_abs_diff(s, o) < 1e-12);
  }
  SUBCASE("anisotropic spacing uses per-axis widths") {
    Volume imp({21, 21, 21}, Vec3(1, 1, 2));
    imp.at(10, 10, 10) = 1.0;
    const Volume s = gaussian_smooth(imp, 2.0);
    // One voxel along z is 2 mm, the same physical offset as two voxels along x.
    CHECK(s.at(10, 10, 11) / s.at(10, 10, 10) == doctest::Approx(s.at(12, 10, 10) / s.at(10, 10, 10)).epsilon(0.02));
  }
  CHECK_THROWS_AS(gaussian_smooth(Volume({4, 4, 4}, Vec3(1, 1, 1)), 0.0), std::invalid_argument);
}

TEST_CASE("gaussian_smooth is linear") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Volume A = random_volume({10, 9, 8}, seed);
    const Volume B = random_volume({10, 9, 8}, seed + 100);
    const double a = 0.7 * static_cast<double>(seed), b = -1.3;
    Volume mix = A.like();
    for (std::size_t i = 0; i < A.size(); ++i) mix.data()[i] = a * A.data()[i] + b * B.data()[i];
    const Volume lhs = gaussian_smooth(mix, 1.5);
    const Volume sA = gaussian_smooth(A, 1.5), sB = gaussian_smooth(B, 1.5);
    Volume rhs = A.like();
    for (std::size_t i = 0; i < A.size(); ++i) rhs.data()[i] = a * sA.data()[i] + b * sB.data()[i];
    CHECK(max_abs_diff(lhs, rhs) < 1e-6);
  }
}

TEST_CASE("gaussian_smooth semigroup on band-limited volumes") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    // Band-limit first so sampling effects stay small, then compare in the interior.
    const Volume v = gaussian_smooth(random_volume({48, 48, 48}, seed), 2.0);
    const Volume twice = gaussian_smooth(gaussian_smooth(v, 1.5), 2.0);
    const Volume once = gaussian_smooth(v, std::sqrt(1.5 * 1.5 + 2.0 * 2.0));
    double num = 0.0, den = 0.0;
    for (int k = 14; k < 34; ++k)
      for (int j = 14; j < 34; ++j)
        for (int i = 14; i < 34; ++i) {
          num += std::pow(twice.at(i, j, k) - once.at(i, j, k), 2);
          den += std::pow(once.at(i, j, k), 2);
        }
    CHECK(std::sqrt(num / den) < 0.01);
  }
}

TEST_CASE("convolve_axis matches a direct 1D oracle on every axis") {
  const Volume v = random_volume({7, 6, 5}, 11);
  const std::vector<double> k{0.1, -0.4, 0.25, 0.3, 0.75};
  for (int axis = 0; axis < 3; ++axis) {
    const Volume c = convolve_axis(v, axis, k);
    for (int z = 0; z < 5; ++z)
      for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 7; ++x) {
          double acc = 0.0;
          for (int t = -2; t <= 2; ++t) {
            Index3 q{x, y, z};
            q[static_cast<std::size_t>(axis)] -= t;
            acc += k[static_cast<std::size_t>(t + 2)] * v.at_clamped(q[0], q[1], q[2]);
          }
          CHECK(c.at(x, y, z) == doctest::Approx(acc).epsilon(1e-12));
        }
  }
  CHECK_THROWS_AS(convolve_axis(v, 3, k), std::invalid_argument);
  CHECK_THROWS_AS(convolve_axis(v, 0, std::vector<double>{1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("trilinear_sample") {
  Volume v({2, 2, 2}, Vec3(1, 1, 1));
  v.at(1, 0, 0) = 1.0;
  CHECK(trilinear_sample(v, Vec3(1, 0, 0)) == 1.0);
  CHECK(trilinear_sample(v, Vec3(0.5, 0, 0)) == doctest::Approx(0.5));
  const Volume ramp = field({6, 5, 4}, Vec3(0.5, 1, 2), Vec3(1, -2, 3), [](double x, double, double) { return x; });
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ux(1.0, 3.5), uy(-2, 2), uz(3, 9);
  for (int n = 0; n < 50; ++n) {
    const Vec3 p(ux(rng), uy(rng), uz(rng));
    CHECK(trilinear_sample(ramp, p) == doctest::Approx(p.x()).epsilon(1e-6));
  }
  // Multilinear fields (x*y*z) are reproduced exactly too.
  const Volume xyz = field({5, 5, 5}, Vec3(1, 1, 1), Vec3::Zero(), [](double x, double y, double z) {
    return 1 + 2 * x - y + 0.5 * x * y * z;
  });
  for (int n = 0; n < 30; ++n) {
    std::uniform_real_distribution<double> u(0.0, 4.0);
    const Vec3 p(u(rng), u(rng), u(rng));
    CHECK(trilinear_sample(xyz, p) == doctest::Approx(1 + 2 * p.x() - p.y() + 0.5 * p.x() * p.y() * p.z()));
  }
  CHECK_THROWS_AS(trilinear_sample(v, Vec3(1.01, 0, 0)), std::out_of_range);
  CHECK_THROWS_AS(trilinear_sample(v, Vec3(-0.01, 0, 0)), std::out_of_range);
}

TEST_CASE("hessian_at") {
  SUBCASE("constant field gives zero") {
    const Volume c({12, 12, 12}, Vec3(1, 1, 1), Vec3::Zero(), 4.0);
    const SymMat3 h = hessian_at(c, Vec3(5.3, 6.1, 4.7), 1.0);
    CHECK(h.matrix().norm() < 1e-9);
  }
  SUBCASE("x squared") {
    const Volume q = field({21, 21, 21}, Vec3(1, 1, 1), Vec3(-10, -10, -10), [](double x, double, double) { return x * x; });
    const SymMat3 h = hessian_at(q, Vec3(0.3, -0.2, 0.1), 0.5);
    CHECK(h.xx == doctest::Approx(2.0).epsilon(0.05));
    CHECK(std::abs(h.yy) < 0.1);
    CHECK(std::abs(h.zz) < 0.1);
    CHECK(std::abs(h.xy) < 0.1);
  }
  SUBCASE("xy") {
    const Volume q = field({21, 21, 21}, Vec3(1, 1, 1), Vec3(-10, -10, -10), [](double x, double y, double) { return x * y; });
    const SymMat3 h = hessian_at(q, Vec3(0.4, 0.6, -0.5), 0.5);
    CHECK(h.xy == doctest::Approx(1.0).epsilon(0.05));
    CHECK(std::abs(h.xx) < 0.05);
    CHECK(std::abs(h.yy) < 0.05);
    CHECK(std::abs(h.xz) < 0.05);
  }
  SUBCASE("matches a finite-difference oracle on the smoothed grid") {
    const Volume v = random_volume({16, 16, 16}, 21);
    const Volume s = gaussian_smooth(v, 1.5);
    // At a voxel center the interpolation is the plain central difference.
    const SymMat3 h = hessian_at(v, Vec3(7, 8, 9), 1.5);
    const auto f = [&](int i, int j, int k) { return s.at(i, j, k); };
    CHECK(h.xx == doctest::Approx(f(8, 8, 9) - 2 * f(7, 8, 9) + f(6, 8, 9)).epsilon(1e-9));
    CHECK(h.yz == doctest::Approx((f(7, 9, 10) - f(7, 9, 8) - f(7, 7, 10) + f(7, 7, 8)) / 4).epsilon(1e-9));
  }
  SUBCASE("anisotropic spacing keeps mm units") {
    const Volume q = field({15, 15, 15}, Vec3(0.5, 1, 2), Vec3(-3.5, -7, -14),
                           [](double x, double y, double z) { return x * x + 3 * y * y + z * z; });
    const SymMat3 h = hessian_at(q, Vec3(0.1, 0.2, 0.3), 0.2);
    CHECK(h.xx == doctest::Approx(2.0).epsilon(0.05));
    CHECK(h.yy == doctest::Approx(6.0).epsilon(0.05));
    CHECK(h.zz == doctest::Approx(2.0).epsilon(0.05));
  }
  CHECK_THROWS_AS(hessian_at(Volume({6, 6, 6}, Vec3(1, 1, 1)), Vec3(0.5, 3, 3), 1.0), std::out_of_range);
}

TEST_CASE("SymMat3 eigen decomposition") {
  SymMat3 m{3, 1, 2, 0.5, 0, 0.25};
  const auto [vals, vecs] = m.eigen();
  CHECK(vals[0] <= vals[1]);
  CHECK(vals[1] <= vals[2]);
  for (int i = 0; i < 3; ++i) CHECK((m.matrix() * vecs.col(i) - vals[i] * vecs.col(i)).norm() < 1e-12);
}
