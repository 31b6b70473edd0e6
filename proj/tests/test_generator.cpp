#include <catch2/catch_amalgamated.hpp>

#include <memory>
#include <set>

#include "helpers.hpp"
#include "in2out/generator.hpp"

using namespace in2out;

namespace {

// keep spatial dims small (must be multiples of 8) so forwards stay cheap
Tensor<float> masked_input(Rng& rng, std::int64_t t = 8) {
  Tensor<float> x({1, t, 4, 24, 32});
  testutil::fill_uniform(x, rng, 0.0f, 1.0f);
  return x;
}

VideoTensor<float> random_video(Rng& rng, std::int64_t t = 8) {
  VideoTensor<float> v;
  v.data = Tensor<float>({1, t, 3, 24, 32});
  v.space = Space::pixel;
  testutil::fill_uniform(v.data, rng, 0.0f, 1.0f);
  return v;
}

}  // namespace

TEST_CASE("toy generator maps masked video to RGB in [0,1]", "[generator]") {
  ToyGenerator<float> g(123);
  Rng rng(5);
  Var<float> y = g.forward(Var<float>::constant(masked_input(rng)));
  REQUIRE(y.value().shape() == Shape{1, 8, 3, 24, 32});
  REQUIRE(y.value().all_finite());
  for (std::int64_t i = 0; i < y.value().numel(); ++i) {
    REQUIRE(y.value()[i] >= 0.0f);
    REQUIRE(y.value()[i] <= 1.0f);
  }
  REQUIRE(g.kind() == "toy");
  // the default flow hook contributes nothing
  REQUIRE(g.flow_loss().value()[0] == 0.0f);
}

TEST_CASE("toy generator rejects bad input geometry", "[generator]") {
  ToyGenerator<float> g(123);
  REQUIRE_THROWS_AS(g.forward(Var<float>::constant(Tensor<float>({1, 4, 3, 24, 32}))),
                    std::invalid_argument);  // missing mask channel
  REQUIRE_THROWS_AS(g.forward(Var<float>::constant(Tensor<float>({1, 4, 4, 20, 32}))),
                    std::invalid_argument);  // 20 % 8 != 0
  REQUIRE_THROWS_AS(g.forward(Var<float>::constant(Tensor<float>({1, 4, 4, 24, 36}))),
                    std::invalid_argument);  // 36 % 8 != 0
}

TEST_CASE("toy generator is seed-deterministic", "[generator]") {
  ToyGenerator<float> a(77), b(77), c(78);
  Rng rng(5);
  const Tensor<float> x = masked_input(rng);
  Var<float> ya = a.forward(Var<float>::constant(x));
  Var<float> yb = b.forward(Var<float>::constant(x));
  Var<float> yc = c.forward(Var<float>::constant(x));
  REQUIRE(tensors_equal(ya.value(), yb.value()));
  REQUIRE_FALSE(tensors_equal(ya.value(), yc.value()));
}

TEST_CASE("all-zero parameters produce a 0.5 gray output", "[generator]") {
  ToyGenerator<float> g(1);
  for (auto& [name, p] : g.params()) {
    Tensor<float>& v = p.node()->value;
    for (std::int64_t i = 0; i < v.numel(); ++i) v[i] = 0.0f;
  }
  Rng rng(5);
  Var<float> y = g.forward(Var<float>::constant(masked_input(rng, 4)));
  for (std::int64_t i = 0; i < y.value().numel(); ++i) REQUIRE(y.value()[i] == 0.5f);
}

TEST_CASE("clip sampling draws 5 local plus 3 outside frames", "[generator][sampling]") {
  Rng rng(0xc11b);
  std::set<std::int64_t> starts;
  for (int trial = 0; trial < 200; ++trial) {
    ClipSample s = sample_clip(12, rng);
    REQUIRE_NOTHROW(s.validate(12));
    starts.insert(s.local_start);
    std::set<std::int64_t> nl(s.non_local.begin(), s.non_local.end());
    REQUIRE(nl.size() == 3);  // distinct
    for (auto f : nl) REQUIRE((f < s.local_start || f >= s.local_start + 5));
  }
  // every legal start (0..7) shows up in 200 draws
  REQUIRE(starts.size() == 8);

  // with exactly 8 frames the non-local picks are forced to the complement
  ClipSample tight = sample_clip(8, rng);
  std::set<std::int64_t> all(tight.local.begin(), tight.local.end());
  all.insert(tight.non_local.begin(), tight.non_local.end());
  REQUIRE(all.size() == 8);

  REQUIRE_THROWS_AS(sample_clip(7, rng), std::invalid_argument);
}

TEST_CASE("clip sample validation catches malformed samples", "[generator][sampling]") {
  ClipSample s;
  s.local_start = 2;
  s.local = {2, 3, 4, 5, 6};
  s.non_local = {0, 1, 9};
  REQUIRE_NOTHROW(s.validate(10));
  ClipSample bad = s;
  bad.non_local = {0, 1};  // wrong count
  REQUIRE_THROWS_AS(bad.validate(10), std::logic_error);
  bad = s;
  bad.local[3] = 9;  // break contiguity
  REQUIRE_THROWS_AS(bad.validate(10), std::logic_error);
  bad = s;
  bad.non_local[0] = 4;  // inside the local block
  REQUIRE_THROWS_AS(bad.validate(10), std::logic_error);
  bad = s;
  bad.non_local[0] = 10;  // past the end
  REQUIRE_THROWS_AS(bad.validate(10), std::logic_error);
}

TEST_CASE("single-window inference equals a direct masked forward", "[generator][infer]") {
  ToyGenerator<float> g(99);
  Rng rng(21);
  const VideoTensor<float> video = random_video(rng);
  const double ratio = 0.25;

  const VideoTensor<float> out = sliding_window_infer(g, video, 8, ratio);
  REQUIRE(out.data.shape() == video.data.shape());

  const MaskSpec spec{ratio, video.width()};
  const VideoTensor<float> mask = make_mask<float>(spec, video.frames(), video.height());
  const VideoTensor<float> masked = apply_mask(video, mask);
  Var<float> direct = g.forward(Var<float>::constant(masked.data));
  REQUIRE(tensors_equal(out.data, direct.value()));
}

TEST_CASE("windowed inference covers every frame exactly once", "[generator][infer]") {
  ToyGenerator<float> g(99);
  Rng rng(22);
  const VideoTensor<float> video = random_video(rng);

  // 8 frames in windows of 3 -> chunks of 3, 3, 2
  const VideoTensor<float> chunked = sliding_window_infer(g, video, 3, 0.25);
  REQUIRE(chunked.data.shape() == video.data.shape());
  REQUIRE(chunked.data.all_finite());

  // shorter windows see less temporal context, so results differ
  const VideoTensor<float> whole = sliding_window_infer(g, video, 8, 0.25);
  REQUIRE(max_abs_diff(chunked.data, whole.data) > 0.0);

  REQUIRE_THROWS_AS(sliding_window_infer(g, video, 0, 0.25), std::invalid_argument);
}

TEST_CASE("paste keeps generated bands and restores the known center", "[generator][infer]") {
  VideoTensor<float> generated, source;
  generated.data = Tensor<float>({1, 2, 3, 4, 12});
  source.data = Tensor<float>({1, 2, 3, 4, 12});
  generated.space = source.space = Space::pixel;
  for (std::int64_t i = 0; i < generated.data.numel(); ++i) {
    generated.data[i] = 0.25f;
    source.data[i] = 0.75f;
  }
  const OutBands bands = OutBands::from(1.0 / 3.0, 12);  // 2 columns per side
  const VideoTensor<float> pasted = paste_center(generated, source, bands);
  for (std::int64_t t = 0; t < 2; ++t)
    for (std::int64_t c = 0; c < 3; ++c)
      for (std::int64_t h = 0; h < 4; ++h)
        for (std::int64_t w = 0; w < 12; ++w) {
          const float v = pasted.data[pasted.data.index5(0, t, c, h, w)];
          if (w < 2 || w >= 10)
            REQUIRE(v == 0.25f);
          else
            REQUIRE(v == 0.75f);
        }

  VideoTensor<float> small;
  small.data = Tensor<float>({1, 2, 3, 4, 8});
  small.space = Space::pixel;
  REQUIRE_THROWS_AS(paste_center(generated, small, bands), std::invalid_argument);
}

TEST_CASE("registry resolves kinds and explains what is missing", "[generator][registry]") {
  auto& reg = GeneratorRegistry<float>::instance();
  auto g = reg.create("toy", 5);
  REQUIRE(g->kind() == "toy");

  REQUIRE_THROWS_WITH(reg.create("e2fgvi", 5), Catch::Matchers::ContainsSubstring("reserved"));
  REQUIRE_THROWS_WITH(reg.create("propainter", 5),
                      Catch::Matchers::ContainsSubstring("reserved"));
  REQUIRE_THROWS_WITH(reg.create("nope", 5),
                      Catch::Matchers::ContainsSubstring("unknown generator kind"));
  REQUIRE_THROWS_WITH(reg.create("nope", 5), Catch::Matchers::ContainsSubstring("toy"));

  reg.register_kind("toy-alias",
                    [](std::uint64_t seed) { return std::make_unique<ToyGenerator<float>>(seed); });
  REQUIRE(reg.create("toy-alias", 5)->kind() == "toy");
}

TEST_CASE("contract check accepts the toy net and rejects violators", "[generator][registry]") {
  ToyGenerator<float> good(3);
  REQUIRE_NOTHROW(check_generator_contract<float>(good, {1, 4, 4, 24, 32}));

  // echoes its input back: wrong channel count
  struct Echo final : Generator<float> {
    ParamStore<float> store;
    Echo() { store.add("g.p", Tensor<float>({1})); }
    Var<float> forward(const Var<float>& x) override { return x; }
    ParamStore<float>& params() override { return store; }
    std::string kind() const override { return "echo"; }
  } echo;
  REQUIRE_THROWS_AS(check_generator_contract<float>(echo, {1, 4, 4, 24, 32}),
                    std::runtime_error);

  REQUIRE_THROWS_AS(check_generator_contract<float>(good, {1, 4, 4, 24}),
                    std::invalid_argument);
}
