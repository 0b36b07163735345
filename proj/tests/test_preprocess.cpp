#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "femseg/preprocess.hpp"

using namespace femseg;

namespace {

Volume hu_volume(Dim3 dims, std::vector<float> vals) {
  Volume v;
  v.data = Grid3<float>(dims, std::move(vals));
  v.unit = IntensityUnit::HU;
  return v;
}

}  // namespace

TEST_CASE("min-max normalization maps the range onto [0,1]", "[preprocess]") {
  const Volume v = hu_volume(Dim3{1, 1, 3}, {-1000.0f, 0.0f, 1000.0f});
  const Volume n = normalize_minmax(v);
  CHECK(n.data(0, 0, 0) == 0.0f);
  CHECK(n.data(0, 0, 1) == 0.5f);
  CHECK(n.data(0, 0, 2) == 1.0f);
  CHECK(n.unit == IntensityUnit::Normalized);
}

TEST_CASE("normalization is the identity on [0,1]-spanning input", "[preprocess]") {
  const Volume v = hu_volume(Dim3{1, 1, 4}, {0.0f, 0.25f, 0.5f, 1.0f});
  const Volume n = normalize_minmax(v);
  CHECK(n.data.values() == v.data.values());
}

TEST_CASE("constant volumes are a degenerate input", "[preprocess]") {
  const Volume v = hu_volume(Dim3{2, 2, 2}, std::vector<float>(8, 400.0f));
  try {
    normalize_minmax(v);
    FAIL("expected degenerate-input error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Degenerate);
  }
}

TEST_CASE("normalization keeps values in [0,1] and preserves extremum positions",
          "[preprocess]") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<float> u(-2000.0f, 2000.0f);
  Volume v = hu_volume(Dim3{4, 5, 6}, {});
  v.data = Grid3<float>(Dim3{4, 5, 6});
  for (auto& s : v.data.values()) s = u(rng);
  const auto& vals = v.data.values();
  const auto mn = std::min_element(vals.begin(), vals.end()) - vals.begin();
  const auto mx = std::max_element(vals.begin(), vals.end()) - vals.begin();
  const Volume n = normalize_minmax(v);
  for (float s : n.data.values()) {
    CHECK(s >= 0.0f);
    CHECK(s <= 1.0f);
  }
  const auto& nv = n.data.values();
  CHECK(std::min_element(nv.begin(), nv.end()) - nv.begin() == mn);
  CHECK(std::max_element(nv.begin(), nv.end()) - nv.begin() == mx);
}

TEST_CASE("a 512-wide scan splits into two 512x256 halves", "[preprocess]") {
  Volume v;
  v.data = Grid3<float>(Dim3{2, 512, 512});
  auto [right, left] = split_halves(v, std::nullopt);
  CHECK(right.input.dims() == Dim3{2, 512, 256});
  CHECK(left.input.dims() == Dim3{2, 512, 256});
  CHECK(right.geometry.crop_offset == Dim3{0, 0, 0});
  CHECK(left.geometry.crop_offset == Dim3{0, 0, 256});
  CHECK(right.geometry.original_dims == Dim3{2, 512, 512});
}

TEST_CASE("split places a marker at the expected local coordinate", "[preprocess]") {
  Volume v;
  v.data = Grid3<float>(Dim3{1, 1, 4});
  v.data(0, 0, 3) = 9.0f;
  LabelMask m;
  m.data = Grid3<std::uint8_t>(Dim3{1, 1, 4});
  m.data(0, 0, 3) = 1;
  auto [right, left] = split_halves(v, m);
  CHECK(right.input.data(0, 0, 0) == 0.0f);
  CHECK(right.input.data(0, 0, 1) == 0.0f);
  CHECK(left.input.data(0, 0, 1) == 9.0f);
  CHECK(right.mask->foreground_count() == 0);
  CHECK(left.mask->foreground_count() == 1);
  CHECK(left.mask->data(0, 0, 1) == 1);
}

TEST_CASE("odd widths cannot be split", "[preprocess]") {
  Volume v;
  v.data = Grid3<float>(Dim3{1, 2, 5});
  try {
    split_halves(v, std::nullopt);
    FAIL("expected geometry error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Geometry);
  }
}

TEST_CASE("mirroring is an involution and toggles the flag", "[preprocess]") {
  PreprocessedCase c;
  c.input.data = Grid3<float>(Dim3{2, 3, 4});
  std::mt19937_64 rng(3);
  for (auto& s : c.input.data.values()) s = static_cast<float>(rng() % 100);
  LabelMask m;
  m.data = Grid3<std::uint8_t>(Dim3{2, 3, 4});
  m.data(0, 1, 0) = 1;
  c.mask = m;
  c.geometry = GeometryRecord{Dim3{2, 3, 4}, Dim3{0, 0, 0}, false};

  const PreprocessedCase once = mirror_lr(c);
  CHECK(once.geometry.mirrored == true);
  CHECK(once.mask->data(0, 1, 3) == 1);  // x=0 -> x=3 in a width-4 grid
  const PreprocessedCase twice = mirror_lr(once);
  CHECK(twice.geometry.mirrored == false);
  CHECK(twice.input.data.values() == c.input.data.values());
  CHECK(twice.mask->data.values() == c.mask->data.values());
}

TEST_CASE("split plus mirror preserves total foreground count", "[preprocess]") {
  std::mt19937_64 rng(17);
  Volume v;
  v.data = Grid3<float>(Dim3{3, 4, 8});
  LabelMask m;
  m.data = Grid3<std::uint8_t>(Dim3{3, 4, 8});
  for (auto& b : m.data.values()) b = static_cast<std::uint8_t>(rng() & 1);
  const std::int64_t total = m.foreground_count();
  auto [right, left] = split_halves(v, m);
  const PreprocessedCase mirrored_left = mirror_lr(std::move(left));
  CHECK(right.mask->foreground_count() + mirrored_left.mask->foreground_count() == total);
}

TEST_CASE("geometry records map processed voxels back to scan coordinates", "[preprocess]") {
  std::mt19937_64 rng(29);
  Volume v;
  v.data = Grid3<float>(Dim3{4, 6, 10});
  auto [right, left] = split_halves(v, std::nullopt);
  const PreprocessedCase ml = mirror_lr(std::move(left));
  const Dim3 pd = ml.input.dims();
  for (int trial = 0; trial < 200; ++trial) {
    const Dim3 p{static_cast<std::int64_t>(rng() % 4), static_cast<std::int64_t>(rng() % 6),
                 static_cast<std::int64_t>(rng() % 5)};
    const Dim3 orig = to_original_coord(ml.geometry, pd, p);
    CHECK(orig.z == p.z);
    CHECK(orig.y == p.y);
    CHECK(orig.x == 5 + (pd.x - 1 - p.x));  // un-mirror, then offset into the left half
    const Dim3 orig_r = to_original_coord(right.geometry, pd, p);
    CHECK(orig_r == p);
  }
}
