#include <catch2/catch_amalgamated.hpp>

#include "femseg/patching.hpp"
#include "support/oracles.hpp"

using namespace femseg;

TEST_CASE("an exactly fitting volume yields a single tile", "[patching]") {
  const PatchGrid g = plan_patches(Dim3{128, 128, 128}, Dim3{128, 128, 128}, Dim3{64, 64, 64});
  REQUIRE(g.origins.size() == 1);
  CHECK(g.origins[0] == Dim3{0, 0, 0});
  CHECK(g.padded_dims == Dim3{128, 128, 128});
  CHECK(g.pad_low == Dim3{0, 0, 0});
}

TEST_CASE("a 192-deep volume tiles at stride 64 in z", "[patching]") {
  const PatchGrid g = plan_patches(Dim3{192, 128, 128}, Dim3{128, 128, 128}, Dim3{64, 64, 64});
  REQUIRE(g.origins.size() == 2);
  CHECK(g.origins[0] == Dim3{0, 0, 0});
  CHECK(g.origins[1] == Dim3{64, 0, 0});
}

TEST_CASE("small axes pad to one patch", "[patching]") {
  const PatchGrid g = plan_patches(Dim3{100, 128, 128}, Dim3{128, 128, 128}, Dim3{64, 64, 64});
  REQUIRE(g.origins.size() == 1);
  CHECK(g.padded_dims.z == 128);
  CHECK(g.pad_low.z == 14);
}

TEST_CASE("patch not larger than overlap is a configuration error", "[patching]") {
  try {
    plan_patches(Dim3{64, 64, 64}, Dim3{32, 32, 32}, Dim3{32, 32, 32});
    FAIL("expected configuration error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Config);
  }
}

TEST_CASE("every voxel is covered by at least one tile", "[patching]") {
  std::mt19937_64 rng(100);
  for (int trial = 0; trial < 30; ++trial) {
    const Dim3 dims{static_cast<std::int64_t>(1 + rng() % 40),
                    static_cast<std::int64_t>(1 + rng() % 40),
                    static_cast<std::int64_t>(1 + rng() % 40)};
    const PatchGrid g = plan_patches(dims, Dim3{16, 16, 16}, Dim3{8, 8, 8});
    Grid3<std::int32_t> cover(g.padded_dims);
    for (const auto& o : g.origins)
      for (std::int64_t z = 0; z < 16; ++z)
        for (std::int64_t y = 0; y < 16; ++y)
          for (std::int64_t x = 0; x < 16; ++x) cover(o.z + z, o.y + y, o.x + x) += 1;
    for (auto c : cover.values()) REQUIRE(c >= 1);
    for (const auto& o : g.origins) {
      REQUIRE(o.z + 16 <= g.padded_dims.z);
      REQUIRE(o.y + 16 <= g.padded_dims.y);
      REQUIRE(o.x + 16 <= g.padded_dims.x);
    }
  }
}

namespace {

PreprocessedCase flat_case(Dim3 dims) {
  PreprocessedCase c;
  c.input.data = Grid3<float>(dims, 0.5f);
  LabelMask m;
  m.data = Grid3<std::uint8_t>(dims);
  m.data(dims.z / 2, dims.y / 2, dims.x / 2) = 1;
  c.mask = std::move(m);
  c.geometry = GeometryRecord{dims, Dim3{0, 0, 0}, false};
  return c;
}

}  // namespace

TEST_CASE("random_crop with dims equal to patch is deterministic", "[patching]") {
  const PreprocessedCase c = flat_case(Dim3{8, 8, 8});
  auto rng = make_rng(1);
  auto [img, tgt] = random_crop(c, Dim3{8, 8, 8}, rng);
  CHECK(img.shape == TensorShape{1, 1, 8, 8, 8});
  CHECK(tgt.shape == TensorShape{1, 2, 8, 8, 8});
  CHECK(img.at(0, 0, 4, 4, 4) == 0.5);
  CHECK(tgt.at(0, 1, 4, 4, 4) == 1.0);
}

TEST_CASE("random_crop targets are one-hot", "[patching]") {
  const PreprocessedCase c = flat_case(Dim3{12, 12, 12});
  auto rng = make_rng(9);
  auto [img, tgt] = random_crop(c, Dim3{8, 8, 8}, rng);
  for (std::int64_t i = 0; i < tgt.shape.spatial(); ++i)
    CHECK(tgt.channel(0, 0)[i] + tgt.channel(0, 1)[i] == 1.0);
}

TEST_CASE("random_crop z-origins are uniform (chi-square)", "[patching]") {
  // z spans 256 with a 128-deep patch, so origins are uniform on [0,128];
  // the in-plane extent is kept small to make 10^4 draws cheap
  const Dim3 dims{256, 16, 16};
  const Dim3 patch{128, 16, 16};
  PreprocessedCase c;
  c.input.data = Grid3<float>(dims, 0.1f);
  LabelMask m;
  m.data = Grid3<std::uint8_t>(dims);
  c.mask = std::move(m);
  // count origins via the marker trick: mark z=origin by reading back the
  // first voxel of each crop from a z-ramp volume
  for (std::int64_t z = 0; z < dims.z; ++z)
    for (std::int64_t y = 0; y < dims.y; ++y)
      for (std::int64_t x = 0; x < dims.x; ++x)
        c.input.data(z, y, x) = static_cast<float>(z);

  const int n = 10000;
  const int bins = 16;
  const int values = 129;  // origins 0..128 inclusive
  std::vector<int> hist(bins, 0);
  for (int i = 0; i < n; ++i) {
    auto rng = make_rng(derive_seed(777, static_cast<std::uint64_t>(i)));
    auto [img, tgt] = random_crop(c, patch, rng);
    const int z0 = static_cast<int>(img.at(0, 0, 0, 0, 0));
    hist[static_cast<std::size_t>(z0 * bins / values)] += 1;
  }
  double chi2 = 0.0;
  for (int b = 0; b < bins; ++b) {
    const int lo = (b * values + bins - 1) / bins;       // first origin in bin
    const int hi = ((b + 1) * values + bins - 1) / bins; // one past
    const double expected = static_cast<double>(n) * static_cast<double>(hi - lo) / values;
    chi2 += (hist[static_cast<std::size_t>(b)] - expected) *
            (hist[static_cast<std::size_t>(b)] - expected) / expected;
  }
  // chi-square df=15 critical value at p=0.001
  CHECK(chi2 < 37.697);
}

TEST_CASE("stitching a single tile reproduces the patch", "[patching]") {
  const PatchGrid g = plan_patches(Dim3{8, 8, 8}, Dim3{8, 8, 8}, Dim3{4, 4, 4});
  Tensor probs(TensorShape{1, 2, 8, 8, 8});
  std::mt19937_64 rng(4);
  for (std::int64_t i = 0; i < probs.shape.spatial(); ++i) {
    const double p = static_cast<double>(rng() % 1000) / 1000.0;
    probs.channel(0, 0)[i] = 1.0 - p;
    probs.channel(0, 1)[i] = p;
  }
  const auto out = stitch(g, {probs});
  for (std::int64_t z = 0; z < 8; ++z)
    for (std::int64_t y = 0; y < 8; ++y)
      for (std::int64_t x = 0; x < 8; ++x)
        CHECK(out[1](z, y, x) == probs.at(0, 1, z, y, x));
}

TEST_CASE("overlapping constant tiles average exactly", "[patching]") {
  // two tiles overlapping by 64 voxels along z
  const PatchGrid g = plan_patches(Dim3{192, 8, 8}, Dim3{128, 8, 8}, Dim3{64, 0, 0});
  REQUIRE(g.origins.size() == 2);
  auto constant = [](double fg) {
    Tensor t(TensorShape{1, 2, 128, 8, 8});
    for (std::int64_t i = 0; i < t.shape.spatial(); ++i) {
      t.channel(0, 0)[i] = 1.0 - fg;
      t.channel(0, 1)[i] = fg;
    }
    return t;
  };
  const auto out = stitch(g, {constant(0.2), constant(0.4)});
  CHECK(out[1](0, 0, 0) == 0.2);
  CHECK(out[1](100, 4, 4) == Catch::Approx(0.3).epsilon(1e-15));  // overlap region mean
  CHECK(out[1](191, 7, 7) == 0.4);
  for (std::int64_t z : {0L, 80L, 100L, 191L})
    CHECK(out[0](z, 0, 0) + out[1](z, 0, 0) == Catch::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("stitch arity mismatch is an error", "[patching]") {
  const PatchGrid g = plan_patches(Dim3{192, 8, 8}, Dim3{128, 8, 8}, Dim3{64, 0, 0});
  try {
    stitch(g, {});
    FAIL("expected arity error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Arity);
  }
}
