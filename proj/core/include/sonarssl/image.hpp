#pragma once

#include <cstddef>
#include <vector>

#include "sonarssl/error.hpp"

namespace sonarssl {

// Dense row-major 2-D array of doubles.
class Image2D {
 public:
  Image2D() = default;
  Image2D(std::size_t height, std::size_t width, double fill = 0.0)
      : height_(height), width_(width), data_(height * width, fill) {}

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t size() const { return data_.size(); }

  double& at(std::size_t r, std::size_t c) { return data_[r * width_ + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * width_ + c]; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool same_shape(const Image2D& other) const {
    return height_ == other.height_ && width_ == other.width_;
  }

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<double> data_;
};

// Two co-registered nonnegative intensity rasters: low-frequency and
// high-frequency band of the same scene, identical shape.
struct MultibandImage {
  Image2D lf;
  Image2D hf;

  std::size_t height() const { return lf.height(); }
  std::size_t width() const { return lf.width(); }

  // Throws InputError when shapes differ or any value is negative/non-finite.
  void validate() const;
};

// Bilinear resize with the half-pixel center convention. Exact identity when
// sizes match and exact for constant inputs.
Image2D bilinear_resize(const Image2D& src, std::size_t out_height, std::size_t out_width);

// Mean filter over a (2*radius+1)^2 box, windows clamped at the borders.
// radius 0 returns the input unchanged. Computed with a summed-area table.
Image2D box_mean(const Image2D& src, std::size_t radius);

}  // namespace sonarssl
