#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <set>
#include <vector>

#include "helpers.hpp"
#include "in2out/masking.hpp"
#include "in2out/rng.hpp"

using namespace in2out;

TEST_CASE("band width is floor(ratio * width / 2)", "[masking]") {
  REQUIRE(band_width(0.25, 432) == 54);
  REQUIRE(band_width(1.0 / 3.0, 100) == 16);
  REQUIRE(band_width(0.5, 8) == 2);
  REQUIRE(band_width(1.0 / 6.0, 96) == 8);
  REQUIRE(band_width(1.0 / 12.0, 96) == 4);
  // floor, not round: 0.3 * 10 / 2 = 1.5 -> 1
  REQUIRE(band_width(0.3, 10) == 1);
  REQUIRE_THROWS_AS(band_width(0.0, 10), std::invalid_argument);
  REQUIRE_THROWS_AS(band_width(1.0, 10), std::invalid_argument);
  REQUIRE_THROWS_AS(band_width(0.5, 0), std::invalid_argument);
}

TEST_CASE("band columns sit at the lateral edges", "[masking]") {
  const OutBands b = OutBands::from(0.5, 8);
  REQUIRE(b.band() == 2);
  REQUIRE(b.left == std::vector<std::int64_t>{0, 1});
  REQUIRE(b.right == std::vector<std::int64_t>{6, 7});
  REQUIRE(b.all() == std::vector<std::int64_t>{0, 1, 6, 7});

  const OutBands wide = OutBands::from(0.25, 432);
  REQUIRE(wide.band() == 54);
  REQUIRE(wide.left.front() == 0);
  REQUIRE(wide.left.back() == 53);
  REQUIRE(wide.right.front() == 378);
  REQUIRE(wide.right.back() == 431);

  // a ratio too small for the width floors to zero columns
  REQUIRE_THROWS_WITH(OutBands::from(0.01, 10), Catch::Matchers::ContainsSubstring("empty band"));
}

TEST_CASE("bands and center partition the width", "[masking]") {
  Rng rng(123);
  for (int trial = 0; trial < 200; ++trial) {
    const std::int64_t W = 8 + static_cast<std::int64_t>(rng.below(500));
    const double m = rng.uniform(0.05, 0.9);
    const std::int64_t b = band_width(m, W);
    if (b < 1) continue;
    // floor property
    REQUIRE(static_cast<double>(b) <= m * static_cast<double>(W) / 2.0);
    REQUIRE(static_cast<double>(b + 1) > m * static_cast<double>(W) / 2.0);

    const OutBands bands = OutBands::from(m, W);
    const auto center = center_columns(m, W);
    REQUIRE(static_cast<std::int64_t>(bands.all().size() + center.size()) == W);
    std::set<std::int64_t> uni;
    for (auto c : bands.all()) uni.insert(c);
    for (auto c : center) uni.insert(c);
    REQUIRE(static_cast<std::int64_t>(uni.size()) == W);
    REQUIRE(*uni.begin() == 0);
    REQUIRE(*uni.rbegin() == W - 1);
  }
}

TEST_CASE("column selection keeps left-then-right order", "[masking]") {
  Tensor<float> x({1, 1, 1, 2, 8});
  for (std::int64_t i = 0; i < x.numel(); ++i) x[i] = static_cast<float>(i);
  const Tensor<float> bands = out_extract(x, 0.5);
  REQUIRE(bands.shape() == Shape{1, 1, 1, 2, 4});
  // row 0 holds columns 0,1,6,7
  REQUIRE(bands.at5(0, 0, 0, 0, 0) == 0.0f);
  REQUIRE(bands.at5(0, 0, 0, 0, 1) == 1.0f);
  REQUIRE(bands.at5(0, 0, 0, 0, 2) == 6.0f);
  REQUIRE(bands.at5(0, 0, 0, 0, 3) == 7.0f);
  REQUIRE(bands.at5(0, 0, 0, 1, 0) == 8.0f);

  const Tensor<float> center = center_extract(x, 0.5);
  REQUIRE(center.shape() == Shape{1, 1, 1, 2, 4});
  REQUIRE(center.at5(0, 0, 0, 0, 0) == 2.0f);
  REQUIRE(center.at5(0, 0, 0, 0, 3) == 5.0f);

  REQUIRE_THROWS_AS(select_columns(x, {8}), std::out_of_range);
}

TEST_CASE("mask tensor is band-shaped and constant over frames", "[masking]") {
  const auto mask = make_mask<float>(MaskSpec{0.25, 16}, 3, 4);
  REQUIRE(mask.data.shape() == Shape{1, 3, 1, 4, 16});
  const std::int64_t b = band_width(0.25, 16);
  REQUIRE(b == 2);
  for (std::int64_t t = 0; t < 3; ++t)
    for (std::int64_t h = 0; h < 4; ++h)
      for (std::int64_t w = 0; w < 16; ++w) {
        const float want = (w < b || w >= 16 - b) ? 1.0f : 0.0f;
        REQUIRE(mask.data.at5(0, t, 0, h, w) == want);
      }
}

TEST_CASE("masking zeroes bands and appends the mask channel", "[masking]") {
  Rng rng(5);
  Tensor<float> t({1, 2, 3, 4, 16});
  testutil::fill_uniform(t, rng, 0.1, 0.9);
  const VideoTensor<float> video(t, Space::pixel);
  const auto mask = make_mask<float>(MaskSpec{0.25, 16}, 2, 4);
  const VideoTensor<float> masked = apply_mask(video, mask);

  REQUIRE(masked.data.shape() == Shape{1, 2, 4, 4, 16});
  for (std::int64_t tf = 0; tf < 2; ++tf)
    for (std::int64_t h = 0; h < 4; ++h)
      for (std::int64_t w = 0; w < 16; ++w) {
        const bool in_band = w < 2 || w >= 14;
        for (std::int64_t c = 0; c < 3; ++c) {
          const float want = in_band ? 0.0f : t.at5(0, tf, c, h, w);
          REQUIRE(masked.data.at5(0, tf, c, h, w) == want);
        }
        REQUIRE(masked.data.at5(0, tf, 3, h, w) == (in_band ? 1.0f : 0.0f));
      }

  // mask must match the video geometry
  const auto wrong = make_mask<float>(MaskSpec{0.25, 16}, 3, 4);
  REQUIRE_THROWS_AS(apply_mask(video, wrong), std::invalid_argument);
}

TEST_CASE("ratio sampling honors the requested interval", "[masking]") {
  Rng rng(9);
  double lo = 1.0, hi = 0.0;
  for (int i = 0; i < 20000; ++i) {
    const double r = sample_ratio(1.0 / 12.0, 1.0 / 3.0, rng);
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  REQUIRE(lo >= 1.0 / 12.0);
  REQUIRE(hi <= 1.0 / 3.0);
  // the sampler actually spans the interval
  REQUIRE(lo < 1.0 / 12.0 + 0.01);
  REQUIRE(hi > 1.0 / 3.0 - 0.01);

  // degenerate interval returns the point without consuming randomness
  const std::string before = rng.state();
  REQUIRE(sample_ratio(0.25, 0.25, rng) == 0.25);
  REQUIRE(rng.state() == before);

  REQUIRE_THROWS_AS(sample_ratio(0.5, 0.25, rng), std::invalid_argument);
  REQUIRE_THROWS_AS(sample_ratio(0.0, 0.25, rng), std::invalid_argument);
  REQUIRE_THROWS_AS(sample_ratio(0.25, 1.0, rng), std::invalid_argument);
}
