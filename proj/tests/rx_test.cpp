#include <cmath>
#include <cstdint>
#include <vector>

#include "doctest.h"
#include "sonarssl/rng.hpp"
#include "sonarssl/rx.hpp"
#include "testutil.hpp"

using namespace sonarssl;

namespace {

// Direct annulus-mode score: for each pixel, accumulate the clamped
// background box minus the clamped guard box and evaluate the quadratic form
// with the same trace-scaled ridge.
Image2D rx_local_oracle(const MultibandImage& image, const RxConfig& cfg) {
  const auto h = static_cast<std::ptrdiff_t>(image.height());
  const auto w = static_cast<std::ptrdiff_t>(image.width());
  const auto bg = static_cast<std::ptrdiff_t>(cfg.background_radius);
  const auto guard = static_cast<std::ptrdiff_t>(cfg.guard_radius);
  Image2D out(image.height(), image.width());
  for (std::ptrdiff_t r = 0; r < h; ++r) {
    for (std::ptrdiff_t c = 0; c < w; ++c) {
      double mx = 0.0, my = 0.0, n = 0.0;
      for (std::ptrdiff_t rr = std::max<std::ptrdiff_t>(0, r - bg);
           rr <= std::min(h - 1, r + bg); ++rr)
        for (std::ptrdiff_t cc = std::max<std::ptrdiff_t>(0, c - bg);
             cc <= std::min(w - 1, c + bg); ++cc) {
          if (std::abs(rr - r) <= guard && std::abs(cc - c) <= guard) continue;
          mx += image.lf.at(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc));
          my += image.hf.at(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc));
          n += 1.0;
        }
      mx /= n;
      my /= n;
      double sxx = 0.0, sxy = 0.0, syy = 0.0;
      for (std::ptrdiff_t rr = std::max<std::ptrdiff_t>(0, r - bg);
           rr <= std::min(h - 1, r + bg); ++rr)
        for (std::ptrdiff_t cc = std::max<std::ptrdiff_t>(0, c - bg);
             cc <= std::min(w - 1, c + bg); ++cc) {
          if (std::abs(rr - r) <= guard && std::abs(cc - c) <= guard) continue;
          const double dx =
              image.lf.at(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc)) - mx;
          const double dy =
              image.hf.at(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc)) - my;
          sxx += dx * dx;
          sxy += dx * dy;
          syy += dy * dy;
        }
      sxx /= n;
      sxy /= n;
      syy /= n;
      const double ridge = cfg.regularization_epsilon * (sxx + syy) / 2.0;
      sxx += ridge;
      syy += ridge;
      const double det = sxx * syy - sxy * sxy;
      const double dx = image.lf.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) - mx;
      const double dy = image.hf.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) - my;
      if (dx == 0.0 && dy == 0.0) continue;
      out.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) =
          (syy * dx * dx - 2.0 * sxy * dx * dy + sxx * dy * dy) / det;
    }
  }
  return out;
}

}  // namespace

TEST_CASE("global RX matches the brute-force Mahalanobis oracle") {
  Rng rng(31);
  RxConfig cfg;
  for (int instance = 0; instance < 20; ++instance) {
    const MultibandImage image = testutil::random_image(8, 8, rng);
    const Image2D got = rx_score_map(image, cfg);
    const Image2D want = testutil::rx_global_oracle(image, cfg.regularization_epsilon);
    for (std::size_t i = 0; i < got.size(); ++i)
      CHECK(testutil::rel_err(got.data()[i], want.data()[i]) < 1e-9);
  }
}

TEST_CASE("annulus RX matches a direct window oracle, borders included") {
  Rng rng(37);
  RxConfig cfg;
  cfg.global_background = false;
  cfg.guard_radius = 1;
  cfg.background_radius = 3;
  const MultibandImage image = testutil::random_image(12, 10, rng);
  const Image2D got = rx_score_map(image, cfg);
  const Image2D want = rx_local_oracle(image, cfg);
  for (std::size_t i = 0; i < got.size(); ++i)
    CHECK(testutil::rel_err(got.data()[i], want.data()[i]) < 1e-9);
}

TEST_CASE("RX scores are invariant under intensity scaling") {
  Rng rng(41);
  RxConfig cfg;
  const MultibandImage image = testutil::random_image(16, 16, rng);
  MultibandImage scaled = image;
  for (double& v : scaled.lf.data()) v *= 1000.0;
  for (double& v : scaled.hf.data()) v *= 1000.0;
  const Image2D a = rx_score_map(image, cfg);
  const Image2D b = rx_score_map(scaled, cfg);
  for (std::size_t i = 0; i < a.size(); ++i)
    CHECK(a.data()[i] == doctest::Approx(b.data()[i]).epsilon(1e-9));
}

TEST_CASE("constant image scores zero everywhere without a numeric error") {
  MultibandImage image;
  image.lf = Image2D(8, 8, 3.0);
  image.hf = Image2D(8, 8, 3.0);
  const Image2D scores = rx_score_map(image, RxConfig{});
  for (double v : scores.data()) CHECK(v == 0.0);
}

TEST_CASE("rx configuration constraints") {
  RxConfig cfg;
  cfg.global_background = false;
  cfg.guard_radius = 4;
  cfg.background_radius = 4;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  cfg.background_radius = 3;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  cfg = RxConfig{};
  cfg.regularization_epsilon = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("detect: threshold, isolated peak, NMS and tie order") {
  RxConfig cfg;
  cfg.score_threshold = 10.0;
  cfg.nms_radius = 4;

  Image2D flat(20, 20, 1.0);
  CHECK(detect(flat, cfg).empty());

  Image2D one(20, 20, 1.0);
  one.at(7, 9) = 50.0;
  const auto single = detect(one, cfg);
  REQUIRE(single.size() == 1);
  CHECK(single[0].row == 7);
  CHECK(single[0].col == 9);
  CHECK(single[0].score == 50.0);

  // Two peaks closer than nms_radius: only the higher survives.
  Image2D close_pair(20, 20, 1.0);
  close_pair.at(5, 5) = 40.0;
  close_pair.at(5, 7) = 60.0;
  const auto pruned = detect(close_pair, cfg);
  REQUIRE(pruned.size() == 1);
  CHECK(pruned[0].col == 7);

  // Equal heights: the smaller (row, col) wins.
  Image2D tie(20, 20, 1.0);
  tie.at(5, 5) = 60.0;
  tie.at(5, 7) = 60.0;
  const auto tied = detect(tie, cfg);
  REQUIRE(tied.size() == 1);
  CHECK(tied[0].col == 5);

  // Separated peaks survive and come out in descending score order.
  Image2D separated(20, 20, 1.0);
  separated.at(2, 2) = 30.0;
  separated.at(15, 15) = 70.0;
  const auto both = detect(separated, cfg);
  REQUIRE(both.size() == 2);
  CHECK(both[0].score == 70.0);
  CHECK(both[1].score == 30.0);

  // At exactly the threshold a pixel does not fire.
  Image2D at_threshold(20, 20, 1.0);
  at_threshold.at(3, 3) = 10.0;
  CHECK(detect(at_threshold, cfg).empty());
}

TEST_CASE("extract_snippet: window semantics") {
  Rng rng(43);
  const MultibandImage image = testutil::random_image(8, 8, rng);

  SUBCASE("source window covering the whole image is the identity") {
    const Snippet s = extract_snippet(image, 4, 4, 8);
    CHECK(s.size == 8);
    CHECK(s.center_row == 4);
    CHECK(s.center_col == 4);
    for (std::size_t r = 0; r < 8; ++r)
      for (std::size_t c = 0; c < 8; ++c) {
        CHECK(s.at(0, r, c) == doctest::Approx(image.lf.at(r, c)).epsilon(1e-12));
        CHECK(s.at(1, r, c) == doctest::Approx(image.hf.at(r, c)).epsilon(1e-12));
      }
  }

  SUBCASE("band 0 is LF for any center") {
    MultibandImage marked;
    marked.lf = Image2D(16, 16, 1.0);
    marked.hf = Image2D(16, 16, 2.0);
    const Snippet s = extract_snippet(marked, 8, 8, 8);
    CHECK(s.at(0, 4, 4) == 1.0);
    CHECK(s.at(1, 4, 4) == 2.0);
  }

  SUBCASE("corner centers shift the window inside the image") {
    const MultibandImage big = testutil::random_image(32, 32, rng);
    const Snippet corner = extract_snippet(big, 0, 0, 8);
    // The shifted window is [0,8) x [0,8).
    for (std::size_t r = 0; r < 8; ++r)
      for (std::size_t c = 0; c < 8; ++c)
        CHECK(corner.at(0, r, c) == doctest::Approx(big.lf.at(r, c)).epsilon(1e-12));
    CHECK(corner.center_row == 0);
    CHECK(corner.center_col == 0);
  }

  SUBCASE("wider source extent resizes down to the snippet size") {
    MultibandImage flat;
    flat.lf = Image2D(32, 32, 4.0);
    flat.hf = Image2D(32, 32, 4.0);
    const Snippet s = extract_snippet(flat, 16, 16, 8, 16);
    CHECK(s.size == 8);
    for (double v : s.values) CHECK(v == doctest::Approx(4.0).epsilon(1e-12));
  }

  SUBCASE("center outside the image is rejected") {
    CHECK_THROWS_AS(extract_snippet(image, 8, 4, 8), InputError);
    CHECK_THROWS_AS(extract_snippet(image, 4, 4, 6), ConfigError);
  }

  SUBCASE("values are f32-quantized at creation") {
    const Snippet s = extract_snippet(image, 4, 4, 8);
    for (double v : s.values) CHECK(v == testutil::quantize_f32(v));
  }
}

TEST_CASE("label_detections: nearest-first matching against object truths") {
  const double radius = 10.0;

  SUBCASE("empty truth labels everything 0") {
    const std::vector<Detection> dets = {{5, 5, 30.0}, {10, 10, 20.0}};
    for (const auto& [det, label] : label_detections(dets, {}, radius)) {
      (void)det;
      CHECK(label == 0);
    }
  }

  SUBCASE("a detection on an object center is labeled 1") {
    const std::vector<Detection> dets = {{5, 5, 30.0}};
    const std::vector<GroundTruthObject> truth = {{5.0, 5.0, TruthClass::object, 8.0}};
    CHECK(label_detections(dets, truth, radius)[0].second == 1);
  }

  SUBCASE("two detections near one object: only the nearer is matched") {
    const std::vector<Detection> dets = {{5, 10, 90.0}, {5, 6, 10.0}};
    const std::vector<GroundTruthObject> truth = {{5.0, 5.0, TruthClass::object, 8.0}};
    const auto labeled = label_detections(dets, truth, radius);
    CHECK(labeled[0].second == 0);  // distance 5, loses despite higher score
    CHECK(labeled[1].second == 1);  // distance 1
  }

  SUBCASE("clutter truths never match") {
    const std::vector<Detection> dets = {{5, 5, 30.0}};
    const std::vector<GroundTruthObject> truth = {{5.0, 5.0, TruthClass::clutter, 8.0}};
    CHECK(label_detections(dets, truth, radius)[0].second == 0);
  }

  SUBCASE("matches beyond match_radius do not count") {
    const std::vector<Detection> dets = {{5, 20, 30.0}};
    const std::vector<GroundTruthObject> truth = {{5.0, 5.0, TruthClass::object, 8.0}};
    CHECK(label_detections(dets, truth, radius)[0].second == 0);
  }

  SUBCASE("each truth claims at most one detection, each detection one truth") {
    const std::vector<Detection> dets = {{5, 4, 30.0}, {5, 8, 20.0}};
    const std::vector<GroundTruthObject> truth = {{5.0, 5.0, TruthClass::object, 8.0},
                                                  {5.0, 9.0, TruthClass::object, 8.0}};
    const auto labeled = label_detections(dets, truth, radius);
    CHECK(labeled[0].second == 1);
    CHECK(labeled[1].second == 1);
  }

  SUBCASE("match_radius must be positive") {
    CHECK_THROWS_AS(label_detections({}, {}, 0.0), ConfigError);
  }
}
