#include "sonarssl/augment.hpp"

#include <algorithm>
#include <cmath>

#include "sonarssl/binary_io.hpp"
#include "sonarssl/image.hpp"
#include "sonarssl/rng.hpp"

namespace sonarssl {

namespace {

// Seed streams for the augmentation stages.
constexpr std::uint64_t kStreamCrop = 0;
constexpr std::uint64_t kStreamFlip = 1;
constexpr std::uint64_t kStreamSpeckle = 2;

}  // namespace

void AugmentPolicy::validate() const {
  if (!(speckle_lo > 0.0) || speckle_hi < speckle_lo)
    throw ConfigError("augment: speckle range must satisfy 0 < lo <= hi");
  if (flip_probability < 0.0 || flip_probability > 1.0)
    throw ConfigError("augment: flip_probability must lie in [0,1]");
  if (!(crop_scale_lo > 0.0) || crop_scale_hi < crop_scale_lo || crop_scale_hi > 1.0)
    throw ConfigError("augment: crop scale range must satisfy 0 < lo <= hi <= 1");
}

Snippet speckle_noise(const Snippet& snippet, const AugmentPolicy& policy, std::uint64_t seed) {
  policy.validate();
  snippet.validate();
  Rng rng(seed);
  const double factor = rng.uniform(policy.speckle_lo, policy.speckle_hi);
  Snippet out = snippet;
  for (double& v : out.values) v = io::quantize_f32(v * factor);
  return out;
}

Snippet hflip(const Snippet& snippet) {
  snippet.validate();
  Snippet out = snippet;
  const std::size_t s = snippet.size;
  for (std::size_t band = 0; band < Snippet::kBands; ++band)
    for (std::size_t r = 0; r < s; ++r)
      for (std::size_t c = 0; c < s; ++c) out.at(band, r, c) = snippet.at(band, r, s - 1 - c);
  return out;
}

Snippet random_resized_crop(const Snippet& snippet, const AugmentPolicy& policy,
                            std::uint64_t seed) {
  policy.validate();
  snippet.validate();
  const std::size_t s = snippet.size;
  Rng rng(seed);
  const double area = rng.uniform(policy.crop_scale_lo, policy.crop_scale_hi);
  const auto side = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::floor(static_cast<double>(s) * std::sqrt(area) + 0.5)), 1, s);
  const std::size_t top = rng.uniform_index(s - side + 1);
  const std::size_t left = rng.uniform_index(s - side + 1);

  Snippet out = snippet;
  for (std::size_t band = 0; band < Snippet::kBands; ++band) {
    Image2D window(side, side);
    for (std::size_t r = 0; r < side; ++r)
      for (std::size_t c = 0; c < side; ++c) window.at(r, c) = snippet.at(band, top + r, left + c);
    const Image2D resized = bilinear_resize(window, s, s);
    for (std::size_t i = 0; i < s * s; ++i)
      out.values[band * s * s + i] = io::quantize_f32(resized.data()[i]);
  }
  return out;
}

namespace {

Snippet one_view(const Snippet& snippet, const AugmentPolicy& policy, std::uint64_t view_seed) {
  Snippet out = snippet;
  if (policy.enable_crop)
    out = random_resized_crop(out, policy, derive_seed(view_seed, kStreamCrop));
  if (Rng(derive_seed(view_seed, kStreamFlip)).bernoulli(policy.flip_probability))
    out = hflip(out);
  return speckle_noise(out, policy, derive_seed(view_seed, kStreamSpeckle));
}

}  // namespace

std::pair<Snippet, Snippet> two_views(const Snippet& snippet, const AugmentPolicy& policy,
                                      std::uint64_t seed) {
  policy.validate();
  snippet.validate();
  return {one_view(snippet, policy, derive_seed(seed, 0)),
          one_view(snippet, policy, derive_seed(seed, 1))};
}

Snippet probe_augment(const Snippet& snippet, std::uint64_t seed) {
  snippet.validate();
  return Rng(seed).bernoulli(0.5) ? hflip(snippet) : snippet;
}

}  // namespace sonarssl
