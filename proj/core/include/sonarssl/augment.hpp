#pragma once

#include <cstdint>
#include <utility>

#include "sonarssl/snippet.hpp"

namespace sonarssl {

// Stochastic augmentation policy. The SSL two-view pipeline runs
// crop -> flip -> speckle; probe training uses the flip alone.
struct AugmentPolicy {
  double speckle_lo = 0.7;
  double speckle_hi = 1.3;
  double flip_probability = 0.5;
  double crop_scale_lo = 0.6;
  double crop_scale_hi = 1.0;
  bool enable_crop = true;

  void validate() const;
};

// Multiplies every pixel of both bands by one scalar drawn uniformly from
// [speckle_lo, speckle_hi].
Snippet speckle_noise(const Snippet& snippet, const AugmentPolicy& policy, std::uint64_t seed);

// Mirrors both bands about the vertical axis; label and provenance unchanged.
Snippet hflip(const Snippet& snippet);

// Samples a square sub-window with area fraction in crop_scale_range (same
// window for both bands) and bilinearly resizes back to the original size.
Snippet random_resized_crop(const Snippet& snippet, const AugmentPolicy& policy,
                            std::uint64_t seed);

// Two independently augmented views of the same snippet (the SSL positive
// pair). Each view runs the full pipeline with its own derived seeds.
std::pair<Snippet, Snippet> two_views(const Snippet& snippet, const AugmentPolicy& policy,
                                      std::uint64_t seed);

// Probe-training augmentation: horizontal flip with probability 0.5, nothing
// else.
Snippet probe_augment(const Snippet& snippet, std::uint64_t seed);

}  // namespace sonarssl
