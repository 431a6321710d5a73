#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "otfwi/csv.hpp"
#include "otfwi/image.hpp"
#include "otfwi/metrics.hpp"
#include "otfwi/npy.hpp"

using namespace otfwi;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "otfwi_test_metrics_io";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Field2D pattern(int nx, int nz) {
  Field2D f(nx, nz);
  for (int ix = 0; ix < nx; ++ix)
    for (int iz = 0; iz < nz; ++iz) f(ix, iz) = 2000.0 + 300.0 * std::sin(0.5 * ix) + 40.0 * iz;
  return f;
}

// Independent P5 reader: header tokens separated by whitespace, one byte per pixel.
std::vector<unsigned char> read_pgm(const fs::path& p, int& w, int& h) {
  const std::string b = slurp(p);
  std::istringstream in(b);
  std::string magic;
  int maxv = 0;
  in >> magic >> w >> h >> maxv;
  REQUIRE(magic == "P5");
  REQUIRE(maxv == 255);
  in.get();
  const auto off = static_cast<std::size_t>(in.tellg());
  return {b.begin() + static_cast<std::ptrdiff_t>(off), b.end()};
}

}  // namespace

TEST_CASE("relative l2 error") {
  const Field2D t = pattern(5, 4);
  CHECK(rel_l2_error(t, t) == 0.0);
  CHECK(rel_l2_error(2.0 * t, t) == doctest::Approx(1.0).epsilon(1e-15));
  Field2D r = t;
  r(1, 1) += 30.0;
  CHECK(rel_l2_error(3.0 * r, 3.0 * t) == doctest::Approx(rel_l2_error(r, t)).epsilon(1e-13));
  CHECK_THROWS_AS(rel_l2_error(t, Field2D(5, 4, 0.0)), InvalidArgument);
  CHECK_THROWS_AS(rel_l2_error(t, Field2D(4, 4, 1.0)), InvalidArgument);
}

TEST_CASE("psnr") {
  const Field2D t = pattern(6, 6);
  CHECK(psnr(t, t) == kPsnrCap);
  Field2D off = t;
  for (auto& v : off.values()) v += 25.0;
  const auto [lo, hi] = std::ranges::minmax(t.values());
  CHECK(psnr(off, t) == doctest::Approx(10.0 * std::log10((hi - lo) * (hi - lo) / 625.0)).epsilon(1e-13));
  CHECK(psnr(off, t, 25.0) == doctest::Approx(0.0).epsilon(1e-13));
  CHECK_THROWS_AS(psnr(off, t, -1.0), InvalidArgument);
}

TEST_CASE("ssim") {
  const Field2D t = pattern(16, 16);
  CHECK(ssim(t, t) == doctest::Approx(1.0).epsilon(1e-9));

  Field2D check(16, 16), neg(16, 16);
  for (int ix = 0; ix < 16; ++ix)
    for (int iz = 0; iz < 16; ++iz) {
      check(ix, iz) = (ix + iz) % 2 ? 1.0 : 0.0;
      neg(ix, iz) = 1.0 - check(ix, iz);
    }
  CHECK(ssim(neg, check) < 0.0);

  Field2D r = t;
  r(4, 9) += 80.0;
  r(10, 3) -= 50.0;
  SsimOptions o;
  o.data_range = 800.0;
  CHECK(ssim(r, t, o) == doctest::Approx(ssim(t, r, o)).epsilon(1e-14));

  // Constant patches: local variances vanish, SSIM reduces to the luminance term.
  const Field2D a(12, 12, 2.0), b(12, 12, 3.0);
  o.data_range = 4.0;
  const double c1 = (0.01 * 4.0) * (0.01 * 4.0);
  CHECK(ssim(b, a, o) == doctest::Approx((2 * 2.0 * 3.0 + c1) / (4.0 + 9.0 + c1)).epsilon(1e-12));
  CHECK(ssim(b, a, o) < 1.0);

  CHECK_THROWS_AS(ssim(Field2D(8, 8, 1.0), Field2D(8, 8, 1.0)), InvalidArgument);
  const auto m = compute_metrics(r, t);
  CHECK(m.ssim < 1.0);
  CHECK(m.e_l2 > 0.0);
  const auto small = compute_metrics(pattern(8, 6), pattern(8, 6));
  CHECK(small.ssim == doctest::Approx(1.0));
  CHECK(std::isnan(compute_metrics(Field2D(4, 4, 2.0), Field2D(4, 4, 2.0)).psnr));
}

TEST_CASE("npy header bytes") {
  const std::string want = std::string("\x93NUMPY\x01\x00\x76\x00", 10) +
                           "{'descr': '<f4', 'fortran_order': False, 'shape': (71, 71), }" + std::string(56, ' ') + "\n";
  CHECK(npy_header({71, 71}, NpyDtype::f4) == want);
  CHECK(want.size() == 128);
  CHECK(npy_header({2, 3, 4}, NpyDtype::f8).size() % 64 == 0);
}

TEST_CASE("npy round trips") {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> nd;
  for (NpyDtype dt : {NpyDtype::f4, NpyDtype::f8}) {
    NpyArray a;
    a.dtype = dt;
    a.shape = dt == NpyDtype::f4 ? std::vector<std::size_t>{71, 71} : std::vector<std::size_t>{3, 5, 7};
    for (std::size_t j = 0; j < a.count(); ++j) {
      const double v = 1000.0 * nd(gen);
      a.data.push_back(dt == NpyDtype::f4 ? static_cast<float>(v) : v);
    }
    const auto p = scratch(dt == NpyDtype::f4 ? "a32.npy" : "a64.npy");
    npy_write(p, a);
    const auto b = npy_read(p);
    CHECK(b.shape == a.shape);
    CHECK(b.dtype == a.dtype);
    CHECK(b.data == a.data);
    npy_write(p, b);
    CHECK(slurp(p) == npy_serialize(a));
  }
}

TEST_CASE("npy errors are distinct") {
  NpyArray a{{2, 2}, {1, 2, 3, 4}, NpyDtype::f8};
  const std::string good = npy_serialize(a);
  CHECK_THROWS_AS(npy_parse("NOTNPY" + good.substr(6)), NpyMagicError);
  CHECK_THROWS_AS(npy_parse(good.substr(0, good.size() - 3)), NpyTruncatedError);
  std::string fortran = good;
  fortran.replace(fortran.find("False"), 5, "True ");
  CHECK_THROWS_AS(npy_parse(fortran), NpyUnsupportedError);
  std::string ints = good;
  ints.replace(ints.find("<f8"), 3, "<i8");
  CHECK_THROWS_AS(npy_parse(ints), NpyUnsupportedError);
  std::string big = good;
  big.replace(big.find("<f8"), 3, ">f8");
  CHECK_THROWS_AS(npy_parse(big), NpyUnsupportedError);
  CHECK_THROWS_AS(npy_read(scratch("missing.npy")), IoError);
  NpyArray one{{4}, {1, 2, 3, 4}, NpyDtype::f8};
  CHECK_THROWS_AS(npy_parse(npy_serialize(one)), NpyUnsupportedError);
}

TEST_CASE("pgm render") {
  Field2D f(3, 2, 1500.0);
  const auto p = scratch("mid.pgm");
  render_field(f, p, 1000.0, 2000.0);
  int w = 0, h = 0;
  auto px = read_pgm(p, w, h);
  CHECK(w == 3);
  CHECK(h == 2);
  for (auto v : px) CHECK(v == 128);

  Field2D g = pattern(7, 5);
  g(0, 4) = 1000.0;  // surface row, left: top-left pixel
  g(6, 0) = 3000.0;  // deepest row, right: bottom-right pixel
  render_field(g, p, 1000.0, 3000.0);
  px = read_pgm(p, w, h);
  REQUIRE(px.size() == 35);
  CHECK(px.front() == 0);
  CHECK(px.back() == 255);
  for (int row = 0; row < 5; ++row)
    for (int ix = 0; ix < 7; ++ix) CHECK(px[row * 7 + ix] == quantize(g(ix, 4 - row), 1000.0, 3000.0));
  CHECK_THROWS_AS(render_field(g, p, 2.0, 2.0), InvalidArgument);
}

TEST_CASE("csv") {
  CsvTable t({"step", "name", "value"});
  t.add_row({1LL, std::string("a,b"), 0.1});
  t.add_row({2LL, std::string("say \"hi\""), std::nan("")});
  CHECK(t.to_string() == "step,name,value\r\n1,\"a,b\",0.10000000000000001\r\n2,\"say \"\"hi\"\"\",nan\r\n");
  CHECK_THROWS_AS(t.add_row({1LL}), InvalidArgument);
}
