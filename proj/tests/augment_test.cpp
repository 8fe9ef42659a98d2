#include <cmath>

#include "doctest.h"
#include "sonarssl/augment.hpp"
#include "sonarssl/rng.hpp"
#include "testutil.hpp"

using namespace sonarssl;

TEST_CASE("speckle_noise scales the whole snippet by one draw") {
  Rng base(3);
  const Snippet s = testutil::random_snippet(16, base);
  AugmentPolicy policy;

  SUBCASE("degenerate range [1,1] is the identity") {
    policy.speckle_lo = policy.speckle_hi = 1.0;
    const Snippet out = speckle_noise(s, policy, 5);
    CHECK(out.values == s.values);
  }

  SUBCASE("range [2,2] doubles every value exactly (after f32 rounding)") {
    policy.speckle_lo = policy.speckle_hi = 2.0;
    const Snippet out = speckle_noise(s, policy, 5);
    for (std::size_t i = 0; i < s.values.size(); ++i)
      CHECK(out.values[i] == testutil::quantize_f32(2.0 * s.values[i]));
  }

  SUBCASE("one scalar per call: the per-pixel ratio is constant") {
    policy.speckle_lo = 0.5;
    policy.speckle_hi = 1.5;
    const Snippet out = speckle_noise(s, policy, 5);
    double ratio = 0.0;
    bool have_ratio = false;
    for (std::size_t i = 0; i < s.values.size(); ++i) {
      if (s.values[i] == 0.0) continue;
      const double r = out.values[i] / s.values[i];
      if (!have_ratio) {
        ratio = r;
        have_ratio = true;
      }
      CHECK(r == doctest::Approx(ratio).epsilon(1e-6));
    }
    CHECK(have_ratio);
    CHECK(ratio >= 0.5);
    CHECK(ratio <= 1.5);
  }

  SUBCASE("seed determinism and sensitivity") {
    const Snippet a = speckle_noise(s, policy, 7);
    const Snippet b = speckle_noise(s, policy, 7);
    const Snippet c = speckle_noise(s, policy, 8);
    CHECK(a.values == b.values);
    CHECK(a.values != c.values);
  }

  SUBCASE("label and provenance survive") {
    Snippet labeled = s;
    labeled.label = 1;
    labeled.scene_id = 9;
    labeled.center_row = 4;
    const Snippet out = speckle_noise(labeled, policy, 5);
    CHECK(out.label == labeled.label);
    CHECK(out.scene_id == 9);
    CHECK(out.center_row == 4);
    CHECK(out.size == labeled.size);
  }
}

TEST_CASE("hflip mirrors columns in every band") {
  Rng base(7);
  Snippet s = testutil::random_snippet(8, base);

  const Snippet flipped = hflip(s);
  const std::size_t n = s.size;
  for (std::size_t b = 0; b < Snippet::kBands; ++b)
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < n; ++c) CHECK(flipped.at(b, r, c) == s.at(b, r, n - 1 - c));

  SUBCASE("flip is an involution") { CHECK(hflip(flipped).values == s.values); }
  SUBCASE("an asymmetric snippet actually changes") { CHECK(flipped.values != s.values); }
  SUBCASE("label survives") {
    s.label = 0;
    CHECK(hflip(s).label == s.label);
  }
}

TEST_CASE("random_resized_crop") {
  Rng base(9);
  const Snippet s = testutil::random_snippet(16, base);
  AugmentPolicy policy;

  SUBCASE("scale range [1,1] crops the full window: exact identity") {
    policy.crop_scale_lo = policy.crop_scale_hi = 1.0;
    const Snippet out = random_resized_crop(s, policy, 11);
    CHECK(out.values == s.values);
  }

  SUBCASE("keeps shape and stays in the value hull") {
    double lo = s.values[0], hi = s.values[0];
    for (double v : s.values) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    for (int trial = 0; trial < 20; ++trial) {
      const Snippet out = random_resized_crop(s, policy, derive_seed(15, trial));
      CHECK(out.size == s.size);
      CHECK(out.values.size() == s.values.size());
      for (double v : out.values) {
        CHECK(v >= lo - 1e-6);
        CHECK(v <= hi + 1e-6);
      }
    }
  }

  SUBCASE("invalid scale ranges are rejected") {
    policy.crop_scale_lo = 0.0;
    CHECK_THROWS_AS(random_resized_crop(s, policy, 1), ConfigError);
    policy = AugmentPolicy{};
    policy.crop_scale_lo = 0.8;
    policy.crop_scale_hi = 0.4;
    CHECK_THROWS_AS(random_resized_crop(s, policy, 1), ConfigError);
    policy = AugmentPolicy{};
    policy.crop_scale_hi = 1.2;
    CHECK_THROWS_AS(random_resized_crop(s, policy, 1), ConfigError);
  }
}

TEST_CASE("two_views composes crop, flip, and speckle deterministically") {
  Rng base(17);
  const Snippet s = testutil::random_snippet(16, base);

  SUBCASE("degenerate policy returns two copies of the input") {
    AugmentPolicy policy;
    policy.crop_scale_lo = policy.crop_scale_hi = 1.0;
    policy.flip_probability = 0.0;
    policy.speckle_lo = policy.speckle_hi = 1.0;
    const auto [first, second] = two_views(s, policy, 19);
    CHECK(first.values == s.values);
    CHECK(second.values == s.values);
  }

  SUBCASE("same seed gives identical pairs, and defaults decorrelate views") {
    AugmentPolicy policy;
    const auto va = two_views(s, policy, 21);
    const auto vb = two_views(s, policy, 21);
    CHECK(va.first.values == vb.first.values);
    CHECK(va.second.values == vb.second.values);

    int differing = 0;
    for (int trial = 0; trial < 100; ++trial) {
      const auto vp = two_views(s, policy, derive_seed(23, trial));
      differing += (vp.first.values != vp.second.values) ? 1 : 0;
    }
    CHECK(differing >= 99);
  }

  SUBCASE("policy validation") {
    AugmentPolicy policy;
    policy.flip_probability = 1.5;
    CHECK_THROWS_AS(policy.validate(), ConfigError);
    policy = AugmentPolicy{};
    policy.speckle_lo = -0.1;
    CHECK_THROWS_AS(policy.validate(), ConfigError);
    policy = AugmentPolicy{};
    policy.speckle_hi = 0.5;  // below default lo
    CHECK_THROWS_AS(policy.validate(), ConfigError);
    policy = AugmentPolicy{};
    CHECK_NOTHROW(policy.validate());
  }
}

TEST_CASE("probe_augment is flip-only with probability one half") {
  Rng base(25);
  const Snippet s = testutil::random_snippet(8, base);
  const Snippet mirrored = hflip(s);

  int flips = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const Snippet out = probe_augment(s, derive_seed(27, trial));
    const bool is_input = out.values == s.values;
    const bool is_flip = out.values == mirrored.values;
    CHECK((is_input || is_flip));
    flips += is_flip ? 1 : 0;
  }
  CHECK(flips >= 450);
  CHECK(flips <= 550);

  SUBCASE("same seed, same outcome") {
    CHECK(probe_augment(s, 40).values == probe_augment(s, 40).values);
  }
}
