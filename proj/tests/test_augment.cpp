#include <catch2/catch_amalgamated.hpp>

#include "femseg/augment.hpp"
#include "support/oracles.hpp"

using namespace femseg;

namespace {

PreprocessedCase sphere_case(Dim3 dims, double radius_frac) {
  PreprocessedCase c;
  c.input.data = Grid3<float>(dims);
  c.input.unit = IntensityUnit::Normalized;
  LabelMask m;
  m.data = Grid3<std::uint8_t>(dims);
  const double cz = static_cast<double>(dims.z - 1) / 2.0;
  const double cy = static_cast<double>(dims.y - 1) / 2.0;
  const double cx = static_cast<double>(dims.x - 1) / 2.0;
  const double r = radius_frac * static_cast<double>(std::min({dims.z, dims.y, dims.x}));
  for (std::int64_t z = 0; z < dims.z; ++z)
    for (std::int64_t y = 0; y < dims.y; ++y)
      for (std::int64_t x = 0; x < dims.x; ++x) {
        const double d2 = (z - cz) * (z - cz) + (y - cy) * (y - cy) + (x - cx) * (x - cx);
        if (d2 <= r * r) {
          m.data(z, y, x) = 1;
          c.input.data(z, y, x) = 0.8f;
        } else {
          c.input.data(z, y, x) = 0.1f;
        }
      }
  c.mask = std::move(m);
  c.geometry = GeometryRecord{dims, Dim3{0, 0, 0}, false};
  return c;
}

}  // namespace

TEST_CASE("brightness factor 1 is the identity", "[augment]") {
  PreprocessedCase c = sphere_case(Dim3{4, 4, 4}, 0.3);
  const Volume out = apply_brightness(c.input, 1.0);
  CHECK(out.data.values() == c.input.data.values());
}

TEST_CASE("brightness scales and clamps", "[augment]") {
  Volume v;
  v.data = Grid3<float>(Dim3{1, 1, 2}, {0.5f, 0.9f});
  v.unit = IntensityUnit::Normalized;
  const Volume a = apply_brightness(v, 0.75);
  CHECK(a.data(0, 0, 0) == 0.375f);
  const Volume b = apply_brightness(v, 1.25);
  CHECK(b.data(0, 0, 1) == 1.0f);  // 1.125 clamped
}

TEST_CASE("identity affine is exact on both grids", "[augment]") {
  const PreprocessedCase c = sphere_case(Dim3{6, 6, 6}, 0.3);
  auto [img, msk] = apply_affine(c.input, c.mask, {0.0, 0.0, 0.0}, 1.0);
  CHECK(img.data.values() == c.input.data.values());
  CHECK(msk.data.values() == c.mask->data.values());
}

TEST_CASE("a 90-degree z rotation moves an impulse to the rotated index", "[augment]") {
  Volume v;
  v.data = Grid3<float>(Dim3{4, 4, 4});
  v.data(1, 1, 2) = 1.0f;  // (x=2, y=1, z=1)
  LabelMask m;
  m.data = Grid3<std::uint8_t>(Dim3{4, 4, 4});
  m.data(1, 1, 2) = 1;
  auto [img, msk] = apply_affine(v, m, {0.0, 0.0, 90.0}, 1.0);
  // forward map: (x,y) - c rotates (0.5,-0.5) -> (0.5,0.5), so (2,1) -> (2,2)
  CHECK(img.data(1, 2, 2) == Catch::Approx(1.0).margin(1e-9));
  CHECK(img.data(1, 1, 2) == Catch::Approx(0.0).margin(1e-9));
  CHECK(msk.data(1, 2, 2) == 1);
  CHECK(msk.foreground_count() == 1);
}

TEST_CASE("masks stay binary and images stay in [0,1] under affine", "[augment]") {
  const PreprocessedCase c = sphere_case(Dim3{10, 12, 14}, 0.35);
  auto [img, msk] = apply_affine(c.input, c.mask, {3.0, -3.0, 2.0}, 0.95);
  for (auto b : msk.data.values()) CHECK(b <= 1);
  for (float s : img.data.values()) {
    CHECK(s >= 0.0f);
    CHECK(s <= 1.0f);
  }
}

TEST_CASE("alpha 0 elastic deformation is the exact identity", "[augment]") {
  const PreprocessedCase c = sphere_case(Dim3{8, 8, 8}, 0.3);
  auto rng = make_rng(123);
  auto [img, msk] = elastic_deform(c.input, c.mask, 0.0, 11.0, rng);
  CHECK(img.data.values() == c.input.data.values());
  CHECK(msk.data.values() == c.mask->data.values());
}

TEST_CASE("elastic deformation is deterministic per seed", "[augment]") {
  const PreprocessedCase c = sphere_case(Dim3{10, 10, 10}, 0.3);
  auto rng1 = make_rng(77);
  auto rng2 = make_rng(77);
  auto [img1, msk1] = elastic_deform(c.input, c.mask, 50.0, 11.0, rng1);
  auto [img2, msk2] = elastic_deform(c.input, c.mask, 50.0, 11.0, rng2);
  CHECK(img1.data.values() == img2.data.values());
  CHECK(msk1.data.values() == msk2.data.values());
}

TEST_CASE("elastic deformation matches a brute-force warp and keeps the sphere size stable",
          "[augment]") {
  const PreprocessedCase c = sphere_case(Dim3{64, 64, 64}, 0.3);
  const std::int64_t before = c.mask->foreground_count();
  const double alpha = 100.0, sigma = 9.0;

  auto rng_field = make_rng(4242);
  const DisplacementField field = make_elastic_field(c.input.dims(), alpha, sigma, rng_field);
  auto rng_apply = make_rng(4242);
  auto [img, msk] = elastic_deform(c.input, c.mask, alpha, sigma, rng_apply);

  const auto expect = oracle::warp_mask_naive(
      c.mask->data, [&](std::int64_t x, std::int64_t y, std::int64_t z) {
        return std::array<double, 3>{static_cast<double>(x) + field.dx(z, y, x),
                                     static_cast<double>(y) + field.dy(z, y, x),
                                     static_cast<double>(z) + field.dz(z, y, x)};
      });
  REQUIRE(msk.data.values() == expect.values());

  const std::int64_t after = msk.foreground_count();
  CHECK(std::abs(after - before) < before / 5);
}

TEST_CASE("augment_pair with probability 0 is the identity", "[augment]") {
  const PreprocessedCase c = sphere_case(Dim3{6, 6, 6}, 0.3);
  AugmentConfig cfg;
  cfg.apply_probability = 0.0;
  auto rng = make_rng(1);
  const PreprocessedCase out = augment_pair(c, cfg, rng);
  CHECK(out.input.data.values() == c.input.data.values());
  CHECK(out.mask->data.values() == c.mask->data.values());
}

TEST_CASE("augment_pair with forced no-op parameters is the identity", "[augment]") {
  const PreprocessedCase c = sphere_case(Dim3{6, 6, 6}, 0.3);
  AugmentConfig cfg;
  cfg.apply_probability = 1.0;
  cfg.brightness_range = {1.0, 1.0};
  cfg.rotation_range_deg = {0.0, 0.0};
  cfg.scaling_range = {1.0, 1.0};
  cfg.elastic_alpha_range = {0.0, 0.0};
  cfg.elastic_sigma_range = {9.0, 9.0};
  auto rng = make_rng(2024);
  AugmentTrace trace;
  const PreprocessedCase out = augment_pair(c, cfg, rng, &trace);
  CHECK(trace.affine);
  CHECK(trace.elastic);
  CHECK(trace.brightness);
  CHECK(out.input.data.values() == c.input.data.values());
  CHECK(out.mask->data.values() == c.mask->data.values());
}

TEST_CASE("augment_pair is bit-deterministic for a fixed seed", "[augment]") {
  const PreprocessedCase c = sphere_case(Dim3{12, 12, 12}, 0.3);
  AugmentConfig cfg;
  auto rng1 = make_rng(555);
  auto rng2 = make_rng(555);
  const PreprocessedCase a = augment_pair(c, cfg, rng1);
  const PreprocessedCase b = augment_pair(c, cfg, rng2);
  CHECK(a.input.data.values() == b.input.data.values());
  CHECK(a.mask->data.values() == b.mask->data.values());
}

TEST_CASE("each transform fires at roughly the configured probability", "[augment]") {
  const PreprocessedCase c = sphere_case(Dim3{1, 1, 1}, 0.9);
  AugmentConfig cfg;  // p = 0.35
  int affine = 0, elastic = 0, brightness = 0;
  const int n = 2000;
  for (int i = 0; i < n; ++i) {
    auto rng = make_rng(derive_seed(9000, static_cast<std::uint64_t>(i)));
    AugmentTrace t;
    (void)augment_pair(c, cfg, rng, &t);
    affine += t.affine;
    elastic += t.elastic;
    brightness += t.brightness;
  }
  for (int count : {affine, elastic, brightness}) {
    CHECK(count > 700 - 120);
    CHECK(count < 700 + 120);
  }
}

TEST_CASE("augmented outputs keep masks binary and images in range", "[augment]") {
  const PreprocessedCase c = sphere_case(Dim3{10, 10, 10}, 0.35);
  AugmentConfig cfg;
  cfg.apply_probability = 1.0;
  for (int i = 0; i < 5; ++i) {
    auto rng = make_rng(derive_seed(31, static_cast<std::uint64_t>(i)));
    const PreprocessedCase out = augment_pair(c, cfg, rng);
    for (auto b : out.mask->data.values()) CHECK(b <= 1);
    for (float s : out.input.data.values()) {
      CHECK(s >= 0.0f);
      CHECK(s <= 1.0f);
    }
  }
}
