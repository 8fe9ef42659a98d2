#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "sonarssl/image.hpp"
#include "sonarssl/scene.hpp"
#include "sonarssl/snippet.hpp"

namespace sonarssl {

// Reed-Xiaoli detector settings. Background statistics come either from the
// whole image (global mode) or from a square annulus around each pixel:
// a (2*background_radius+1)^2 box minus a (2*guard_radius+1)^2 guard box.
struct RxConfig {
  bool global_background = true;
  std::size_t guard_radius = 4;
  std::size_t background_radius = 16;
  // Diagonal ridge added to the covariance, scaled by the mean band variance
  // (epsilon * tr(Sigma)/2) so scores stay invariant under intensity scaling.
  double regularization_epsilon = 1e-6;
  double score_threshold = 25.0;
  std::size_t nms_radius = 32;

  // Throws ConfigError: background_radius > guard_radius and the full annulus
  // must hold at least 6 pixels (3x the band count).
  void validate() const;
};

struct Detection {
  std::size_t row = 0;
  std::size_t col = 0;
  double score = 0.0;
};

// Mahalanobis distance of each pixel's (lf, hf) vector from the background
// mean/covariance (population covariance). Near the borders the annulus is
// clamped to the image. A pixel whose deviation is exactly zero scores 0
// without touching the covariance; otherwise a singular regularized
// covariance raises NumericError rather than producing garbage.
Image2D rx_score_map(const MultibandImage& image, const RxConfig& config);

// Local maxima of the score map above score_threshold, greedily pruned so no
// two surviving detections lie within nms_radius (Euclidean). Result sorted
// by descending score, ties broken toward smaller (row, col).
std::vector<Detection> detect(const Image2D& score_map, const RxConfig& config);

// Cuts a source_extent^2 window centered at (row, col), shifts it to stay
// inside the image (zero-padding only when the window exceeds the image
// itself), and bilinearly resizes each band to size x size. source_extent = 0
// means "use size". Center outside the image -> InputError.
Snippet extract_snippet(const MultibandImage& image, std::size_t center_row,
                        std::size_t center_col, std::size_t size,
                        std::size_t source_extent = 0);

// Nearest-first matching of detections to truth objects (class = object) no
// farther than match_radius; each truth object claims at most one detection.
// Matched detections are labeled 1, everything else 0.
std::vector<std::pair<Detection, std::uint8_t>> label_detections(
    const std::vector<Detection>& detections, const std::vector<GroundTruthObject>& truth,
    double match_radius);

}  // namespace sonarssl
