#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "sonarssl/error.hpp"

namespace sonarssl {

// A fixed-size two-band chip cut around a detection: band 0 = LF, band 1 =
// HF, each S×S row-major. Values are stored as doubles but are always exactly
// representable as float32 (quantized at creation) so the on-disk container
// round-trips bit-exactly.
struct Snippet {
  std::size_t size = 0;  // spatial side S
  std::vector<double> values;

  // 1 = object, 0 = not-object, empty = unlabeled.
  std::optional<std::uint8_t> label;

  // Provenance: which scene and which pixel the chip was cut from.
  std::uint64_t scene_id = 0;
  std::uint32_t center_row = 0;
  std::uint32_t center_col = 0;

  static constexpr std::size_t kBands = 2;

  std::size_t value_count() const { return kBands * size * size; }

  double& at(std::size_t band, std::size_t r, std::size_t c) {
    return values[(band * size + r) * size + c];
  }
  double at(std::size_t band, std::size_t r, std::size_t c) const {
    return values[(band * size + r) * size + c];
  }

  // Throws InputError unless the shape is consistent and every value is
  // finite and >= 0.
  void validate() const;
};

}  // namespace sonarssl
