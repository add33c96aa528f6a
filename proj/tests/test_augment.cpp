#include <doctest.h>

#include "graindeck/augment.hpp"
#include "graindeck/error.hpp"
#include "support.hpp"

using namespace graindeck;
using augment::Axis;

namespace {

constexpr int kCases = 250;

Image random_shape_image(Rng& rng) {
  const int h = 1 + static_cast<int>(rng.index(24));
  const int w = 1 + static_cast<int>(rng.index(24));
  return testing::random_image(rng, h, w);
}

Image two_by_two() {
  Image img(2, 2);
  img.set_pixel(0, 0, {1, 1, 1});
  img.set_pixel(0, 1, {2, 2, 2});
  img.set_pixel(1, 0, {3, 3, 3});
  img.set_pixel(1, 1, {4, 4, 4});
  return img;
}

}  // namespace

TEST_SUITE("augment") {

TEST_CASE("hand-checked flips and quarter turn") {
  Image row(1, 2);
  row.set_pixel(0, 0, {10, 0, 0});
  row.set_pixel(0, 1, {20, 0, 0});
  const Image f = augment::flip(row, Axis::Horizontal);
  CHECK(f.pixel(0, 0) == Rgb{20, 0, 0});
  CHECK(f.pixel(0, 1) == Rgb{10, 0, 0});
  CHECK(augment::flip(row, Axis::Vertical) == row);

  const Image r = augment::rotate(two_by_two(), 90);
  CHECK(r.pixel(0, 0)[0] == 2);
  CHECK(r.pixel(0, 1)[0] == 4);
  CHECK(r.pixel(1, 0)[0] == 1);
  CHECK(r.pixel(1, 1)[0] == 3);
}

TEST_CASE("property: flips are involutions and preserve shape") {
  Rng rng(10);
  for (int i = 0; i < kCases; ++i) {
    const Image img = random_shape_image(rng);
    for (Axis a : {Axis::Horizontal, Axis::Vertical}) {
      const Image once = augment::flip(img, a);
      REQUIRE(once.height() == img.height());
      REQUIRE(once.width() == img.width());
      REQUIRE(augment::flip(once, a) == img);
    }
  }
}

TEST_CASE("property: four quarter turns are the identity") {
  Rng rng(11);
  for (int i = 0; i < kCases; ++i) {
    const Image img = random_shape_image(rng);
    Image x = img;
    for (int k = 0; k < 4; ++k) {
      x = augment::rotate(x, 90);
      if (k % 2 == 0) {
        REQUIRE(x.height() == img.width());
        REQUIRE(x.width() == img.height());
      }
    }
    REQUIRE(x == img);
    REQUIRE(augment::rotate(augment::rotate(img, 90), -90) == img);
    REQUIRE(augment::rotate(img, 360) == img);
  }
}

TEST_CASE("property: half turn equals both flips") {
  Rng rng(12);
  for (int i = 0; i < kCases; ++i) {
    const Image img = random_shape_image(rng);
    const Image both = augment::flip(augment::flip(img, Axis::Horizontal), Axis::Vertical);
    REQUIRE(augment::rotate(img, 180) == both);
  }
}

TEST_CASE("property: zero rotation and unit scale are identities") {
  Rng rng(13);
  for (int i = 0; i < kCases; ++i) {
    const Image img = random_shape_image(rng);
    REQUIRE(augment::rotate(img, 0) == img);
    REQUIRE(augment::rotate_on_canvas(img, 0.0, {0, 0, 0}) == img);
    REQUIRE(augment::scale(img, 1.0) == img);
  }
}

TEST_CASE("property: arbitrary angles and scales keep the shape") {
  Rng rng(14);
  for (int i = 0; i < kCases; ++i) {
    const Image img = random_shape_image(rng);
    const Image r = augment::rotate(img, rng.uniform(-40.0, 40.0));
    REQUIRE(r.height() == img.height());
    REQUIRE(r.width() == img.width());
    const Image s = augment::scale(img, rng.uniform(0.5, 1.5));
    REQUIRE(s.height() == img.height());
    REQUIRE(s.width() == img.width());
  }
}

TEST_CASE("property: the identity config leaves samples unchanged") {
  Rng rng(15);
  const auto cfg = augment::AugmentConfig::identity();
  for (int i = 0; i < kCases; ++i) {
    LabeledImage s{random_shape_image(rng), kAllVarieties[rng.index(kNumVarieties)], "x"};
    const LabeledImage out = augment::random_augment(s, cfg, rng);
    REQUIRE(out.pixels == s.pixels);
    REQUIRE(out.label == s.label);
  }
}

TEST_CASE("property: random augmentation keeps label and shape and is seeded") {
  Rng rng(16);
  augment::AugmentConfig cfg;
  for (int i = 0; i < kCases; ++i) {
    LabeledImage s{random_shape_image(rng), kAllVarieties[rng.index(kNumVarieties)], "x"};
    const std::uint64_t seed = rng.index(1u << 30);
    Rng a(seed);
    Rng b(seed);
    const LabeledImage x = augment::random_augment(s, cfg, a);
    const LabeledImage y = augment::random_augment(s, cfg, b);
    REQUIRE(x.pixels == y.pixels);
    REQUIRE(x.label == s.label);
    REQUIRE(x.pixels.height() == s.pixels.height());
    REQUIRE(x.pixels.width() == s.pixels.width());
  }
}

TEST_CASE("draws stay within the configured ranges") {
  augment::AugmentConfig cfg;
  Rng rng(17);
  int hflips = 0;
  for (int i = 0; i < 2000; ++i) {
    const auto d = augment::draw(cfg, rng);
    REQUIRE(d.scale >= cfg.scale_min);
    REQUIRE(d.scale <= cfg.scale_max);
    REQUIRE(d.angle >= cfg.rotation_min);
    REQUIRE(d.angle <= cfg.rotation_max);
    REQUIRE(d.quarter_turn % 90 == 0);
    hflips += d.hflip;
  }
  CHECK(hflips > 850);
  CHECK(hflips < 1150);
}

TEST_CASE("config validation") {
  augment::AugmentConfig c;
  c.rotation_min = 20;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.scale_min = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.hflip_prob = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.quarter_turns = {45};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_THROWS_AS(augment::scale(Image(4, 4), -1.0), ConfigError);
}

}
