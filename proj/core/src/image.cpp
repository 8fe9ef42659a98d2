#include "sonarssl/image.hpp"

#include <algorithm>
#include <cmath>

namespace sonarssl {

void MultibandImage::validate() const {
  if (!lf.same_shape(hf)) throw InputError("multi-band image: band shapes differ");
  if (lf.height() == 0 || lf.width() == 0)
    throw InputError("multi-band image: empty bands");
  for (const Image2D* band : {&lf, &hf}) {
    for (double v : band->data()) {
      if (!std::isfinite(v) || v < 0.0)
        throw InputError("multi-band image: values must be finite and nonnegative");
    }
  }
}

Image2D bilinear_resize(const Image2D& src, std::size_t out_height, std::size_t out_width) {
  if (src.height() == 0 || src.width() == 0)
    throw InputError("bilinear_resize: empty input");
  if (out_height == 0 || out_width == 0)
    throw InputError("bilinear_resize: empty output shape");

  if (out_height == src.height() && out_width == src.width()) return src;

  Image2D out(out_height, out_width);
  const double scale_r = static_cast<double>(src.height()) / static_cast<double>(out_height);
  const double scale_c = static_cast<double>(src.width()) / static_cast<double>(out_width);
  const std::size_t max_r = src.height() - 1;
  const std::size_t max_c = src.width() - 1;

  for (std::size_t r = 0; r < out_height; ++r) {
    double sr = (static_cast<double>(r) + 0.5) * scale_r - 0.5;
    sr = std::clamp(sr, 0.0, static_cast<double>(max_r));
    const auto r0 = static_cast<std::size_t>(sr);
    const std::size_t r1 = std::min(r0 + 1, max_r);
    const double fr = sr - static_cast<double>(r0);
    for (std::size_t c = 0; c < out_width; ++c) {
      double sc = (static_cast<double>(c) + 0.5) * scale_c - 0.5;
      sc = std::clamp(sc, 0.0, static_cast<double>(max_c));
      const auto c0 = static_cast<std::size_t>(sc);
      const std::size_t c1 = std::min(c0 + 1, max_c);
      const double fc = sc - static_cast<double>(c0);
      const double top = src.at(r0, c0) * (1.0 - fc) + src.at(r0, c1) * fc;
      const double bot = src.at(r1, c0) * (1.0 - fc) + src.at(r1, c1) * fc;
      out.at(r, c) = top * (1.0 - fr) + bot * fr;
    }
  }
  return out;
}

Image2D box_mean(const Image2D& src, std::size_t radius) {
  if (radius == 0) return src;
  const std::size_t h = src.height();
  const std::size_t w = src.width();

  // sat(r, c) = sum of src[0..r) x [0..c).
  std::vector<double> sat((h + 1) * (w + 1), 0.0);
  const std::size_t stride = w + 1;
  for (std::size_t r = 0; r < h; ++r) {
    double row_sum = 0.0;
    for (std::size_t c = 0; c < w; ++c) {
      row_sum += src.at(r, c);
      sat[(r + 1) * stride + (c + 1)] = sat[r * stride + (c + 1)] + row_sum;
    }
  }

  const auto rect_sum = [&](std::size_t r0, std::size_t c0, std::size_t r1, std::size_t c1) {
    // Inclusive corners [r0, r1] x [c0, c1].
    return sat[(r1 + 1) * stride + (c1 + 1)] - sat[r0 * stride + (c1 + 1)] -
           sat[(r1 + 1) * stride + c0] + sat[r0 * stride + c0];
  };

  Image2D out(h, w);
  const auto rad = static_cast<std::ptrdiff_t>(radius);
  for (std::size_t r = 0; r < h; ++r) {
    const std::size_t r0 = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(r) - rad));
    const std::size_t r1 = std::min(h - 1, r + radius);
    for (std::size_t c = 0; c < w; ++c) {
      const std::size_t c0 = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(c) - rad));
      const std::size_t c1 = std::min(w - 1, c + radius);
      const double n = static_cast<double>((r1 - r0 + 1) * (c1 - c0 + 1));
      out.at(r, c) = rect_sum(r0, c0, r1, c1) / n;
    }
  }
  return out;
}

}  // namespace sonarssl
