#include "sonarssl/rx.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <tuple>

#include "sonarssl/binary_io.hpp"

namespace sonarssl {

namespace {

struct BandStats {
  double mean_lf = 0.0, mean_hf = 0.0;
  double var_lf = 0.0, var_hf = 0.0, cov = 0.0;
};

// 2x2 regularized inverse quadratic form d' (S + lambda I)^-1 d. Returns
// false when the regularized matrix is not invertible.
bool mahalanobis(const BandStats& s, double eps, double dl, double dh, double& out) {
  if (dl == 0.0 && dh == 0.0) {
    out = 0.0;
    return true;
  }
  const double lambda = eps * (s.var_lf + s.var_hf) / 2.0;
  const double a = s.var_lf + lambda;
  const double d = s.var_hf + lambda;
  // Cauchy-Schwarz can break by rounding; keep the determinant nonnegative.
  const double bound = std::sqrt(s.var_lf * s.var_hf);
  const double b = std::clamp(s.cov, -bound, bound);
  const double det = a * d - b * b;
  if (!(det > 0.0) || !std::isfinite(det)) return false;
  out = std::max(0.0, (d * dl * dl - 2.0 * b * dl * dh + a * dh * dh) / det);
  return true;
}

// Inclusive prefix table with a zero row/column: sums over [r0,r1]x[c0,c1]
// come out as P(r1+1,c1+1)-P(r0,c1+1)-P(r1+1,c0)+P(r0,c0).
class Prefix {
 public:
  Prefix(const std::vector<double>& v, std::size_t h, std::size_t w) : w1_(w + 1), p_((h + 1) * w1_, 0.0) {
    for (std::size_t r = 0; r < h; ++r)
      for (std::size_t c = 0; c < w; ++c)
        p_[(r + 1) * w1_ + (c + 1)] =
            v[r * w + c] + p_[r * w1_ + (c + 1)] + p_[(r + 1) * w1_ + c] - p_[r * w1_ + c];
  }
  double box(std::size_t r0, std::size_t r1, std::size_t c0, std::size_t c1) const {
    return p_[(r1 + 1) * w1_ + (c1 + 1)] - p_[r0 * w1_ + (c1 + 1)] - p_[(r1 + 1) * w1_ + c0] +
           p_[r0 * w1_ + c0];
  }

 private:
  std::size_t w1_;
  std::vector<double> p_;
};

bool band_constant(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
}

Image2D global_score_map(const MultibandImage& image, const RxConfig& config) {
  const std::size_t n = image.lf.size();
  const auto& lf = image.lf.data();
  const auto& hf = image.hf.data();

  BandStats s;
  const bool lf_const = band_constant(lf);
  const bool hf_const = band_constant(hf);
  if (lf_const) {
    s.mean_lf = lf.front();
  } else {
    double acc = 0.0;
    for (double v : lf) acc += v;
    s.mean_lf = acc / static_cast<double>(n);
  }
  if (hf_const) {
    s.mean_hf = hf.front();
  } else {
    double acc = 0.0;
    for (double v : hf) acc += v;
    s.mean_hf = acc / static_cast<double>(n);
  }
  double vl = 0.0, vh = 0.0, cv = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dl = lf[i] - s.mean_lf;
    const double dh = hf[i] - s.mean_hf;
    vl += dl * dl;
    vh += dh * dh;
    cv += dl * dh;
  }
  s.var_lf = vl / static_cast<double>(n);
  s.var_hf = vh / static_cast<double>(n);
  s.cov = cv / static_cast<double>(n);

  Image2D scores(image.height(), image.width());
  for (std::size_t i = 0; i < n; ++i) {
    double score;
    if (!mahalanobis(s, config.regularization_epsilon, lf[i] - s.mean_lf, hf[i] - s.mean_hf,
                     score))
      throw NumericError(
          "rx: singular background covariance; raise regularization_epsilon");
    scores.data()[i] = score;
  }
  return scores;
}

Image2D local_score_map(const MultibandImage& image, const RxConfig& config) {
  const std::size_t h = image.height();
  const std::size_t w = image.width();
  const auto& lf = image.lf.data();
  const auto& hf = image.hf.data();

  // A constant image deviates nowhere regardless of annulus placement.
  if (band_constant(lf) && band_constant(hf)) return Image2D(h, w, 0.0);

  std::vector<double> ll(lf.size()), hh(lf.size()), lh(lf.size());
  for (std::size_t i = 0; i < lf.size(); ++i) {
    ll[i] = lf[i] * lf[i];
    hh[i] = hf[i] * hf[i];
    lh[i] = lf[i] * hf[i];
  }
  const Prefix pl(lf, h, w), ph(hf, h, w), pll(ll, h, w), phh(hh, h, w), plh(lh, h, w);

  const auto g = static_cast<std::int64_t>(config.guard_radius);
  const auto b = static_cast<std::int64_t>(config.background_radius);
  const auto clamp_lo = [](std::int64_t v) {
    return static_cast<std::size_t>(std::max<std::int64_t>(0, v));
  };
  const auto clamp_hi = [](std::int64_t v, std::size_t n) {
    return static_cast<std::size_t>(std::min<std::int64_t>(static_cast<std::int64_t>(n) - 1, v));
  };

  Image2D scores(h, w);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const auto ri = static_cast<std::int64_t>(r);
      const auto ci = static_cast<std::int64_t>(c);
      const std::size_t or0 = clamp_lo(ri - b), or1 = clamp_hi(ri + b, h);
      const std::size_t oc0 = clamp_lo(ci - b), oc1 = clamp_hi(ci + b, w);
      const std::size_t ir0 = clamp_lo(ri - g), ir1 = clamp_hi(ri + g, h);
      const std::size_t ic0 = clamp_lo(ci - g), ic1 = clamp_hi(ci + g, w);
      const double n_outer =
          static_cast<double>((or1 - or0 + 1) * (oc1 - oc0 + 1));
      const double n_inner =
          static_cast<double>((ir1 - ir0 + 1) * (ic1 - ic0 + 1));
      const double n_bg = n_outer - n_inner;
      if (n_bg < 6.0)
        throw InputError("rx: image too small for the local background annulus");

      const auto ann = [&](const Prefix& p) {
        return p.box(or0, or1, oc0, oc1) - p.box(ir0, ir1, ic0, ic1);
      };
      BandStats s;
      s.mean_lf = ann(pl) / n_bg;
      s.mean_hf = ann(ph) / n_bg;
      s.var_lf = std::max(0.0, ann(pll) / n_bg - s.mean_lf * s.mean_lf);
      s.var_hf = std::max(0.0, ann(phh) / n_bg - s.mean_hf * s.mean_hf);
      s.cov = ann(plh) / n_bg - s.mean_lf * s.mean_hf;

      const std::size_t i = r * w + c;
      double score;
      if (!mahalanobis(s, config.regularization_epsilon, lf[i] - s.mean_lf, hf[i] - s.mean_hf,
                       score))
        throw NumericError(
            "rx: singular background covariance; raise regularization_epsilon");
      scores.at(r, c) = score;
    }
  }
  return scores;
}

}  // namespace

void RxConfig::validate() const {
  if (regularization_epsilon < 0.0)
    throw ConfigError("rx: regularization_epsilon must be >= 0");
  if (score_threshold <= 0.0) throw ConfigError("rx: score_threshold must be > 0");
  if (!global_background) {
    if (background_radius <= guard_radius)
      throw ConfigError("rx: background_radius must exceed guard_radius");
    const std::size_t outer = (2 * background_radius + 1) * (2 * background_radius + 1);
    const std::size_t inner = (2 * guard_radius + 1) * (2 * guard_radius + 1);
    if (outer - inner < 6)
      throw ConfigError("rx: background annulus must contain at least 6 pixels");
  }
}

Image2D rx_score_map(const MultibandImage& image, const RxConfig& config) {
  image.validate();
  config.validate();
  if (image.lf.size() == 0) throw InputError("rx: empty image");
  return config.global_background ? global_score_map(image, config)
                                  : local_score_map(image, config);
}

std::vector<Detection> detect(const Image2D& score_map, const RxConfig& config) {
  config.validate();
  const std::size_t h = score_map.height();
  const std::size_t w = score_map.width();
  std::vector<Detection> candidates;
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const double v = score_map.at(r, c);
      if (!std::isfinite(v)) throw InputError("rx: score map contains non-finite values");
      if (v <= config.score_threshold) continue;
      bool is_max = true;
      for (int dr = -1; dr <= 1 && is_max; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          if (dr == 0 && dc == 0) continue;
          const auto rr = static_cast<std::int64_t>(r) + dr;
          const auto cc = static_cast<std::int64_t>(c) + dc;
          if (rr < 0 || cc < 0 || rr >= static_cast<std::int64_t>(h) ||
              cc >= static_cast<std::int64_t>(w))
            continue;
          if (score_map.at(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc)) > v) {
            is_max = false;
            break;
          }
        }
      }
      if (is_max) candidates.push_back({r, c, v});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Detection& a, const Detection& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.row != b.row) return a.row < b.row;
    return a.col < b.col;
  });

  const double r2 = static_cast<double>(config.nms_radius) * static_cast<double>(config.nms_radius);
  std::vector<Detection> kept;
  for (const Detection& cand : candidates) {
    bool suppressed = false;
    for (const Detection& k : kept) {
      const double dr = static_cast<double>(cand.row) - static_cast<double>(k.row);
      const double dc = static_cast<double>(cand.col) - static_cast<double>(k.col);
      if (dr * dr + dc * dc < r2) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(cand);
  }
  return kept;
}

Snippet extract_snippet(const MultibandImage& image, std::size_t center_row,
                        std::size_t center_col, std::size_t size, std::size_t source_extent) {
  if (size < 8 || size % 2 != 0)
    throw ConfigError("extract_snippet: snippet size must be even and >= 8");
  const std::size_t h = image.height();
  const std::size_t w = image.width();
  if (center_row >= h || center_col >= w)
    throw InputError("extract_snippet: center lies outside the image");
  const std::size_t extent = source_extent == 0 ? size : source_extent;

  // Shift the window inside the image where possible; zero-pad only when the
  // window is larger than the image.
  const auto window_start = [extent](std::size_t center, std::size_t dim) {
    auto start = static_cast<std::int64_t>(center) - static_cast<std::int64_t>(extent) / 2;
    if (extent <= dim)
      start = std::clamp<std::int64_t>(start, 0,
                                       static_cast<std::int64_t>(dim) -
                                           static_cast<std::int64_t>(extent));
    return start;
  };
  const std::int64_t r0 = window_start(center_row, h);
  const std::int64_t c0 = window_start(center_col, w);

  Snippet snippet;
  snippet.size = size;
  snippet.values.resize(Snippet::kBands * size * size);
  snippet.center_row = static_cast<std::uint32_t>(center_row);
  snippet.center_col = static_cast<std::uint32_t>(center_col);

  const Image2D* bands[Snippet::kBands] = {&image.lf, &image.hf};
  for (std::size_t band = 0; band < Snippet::kBands; ++band) {
    Image2D crop(extent, extent, 0.0);
    for (std::size_t r = 0; r < extent; ++r) {
      const std::int64_t sr = r0 + static_cast<std::int64_t>(r);
      if (sr < 0 || sr >= static_cast<std::int64_t>(h)) continue;
      for (std::size_t c = 0; c < extent; ++c) {
        const std::int64_t sc = c0 + static_cast<std::int64_t>(c);
        if (sc < 0 || sc >= static_cast<std::int64_t>(w)) continue;
        crop.at(r, c) = bands[band]->at(static_cast<std::size_t>(sr), static_cast<std::size_t>(sc));
      }
    }
    const Image2D resized = bilinear_resize(crop, size, size);
    for (std::size_t i = 0; i < size * size; ++i)
      snippet.values[band * size * size + i] = io::quantize_f32(resized.data()[i]);
  }
  return snippet;
}

std::vector<std::pair<Detection, std::uint8_t>> label_detections(
    const std::vector<Detection>& detections, const std::vector<GroundTruthObject>& truth,
    double match_radius) {
  if (match_radius <= 0.0) throw ConfigError("label_detections: match_radius must be > 0");

  // Candidate (distance, truth, detection) triples, nearest first; each truth
  // object and each detection is used at most once.
  std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;
  for (std::size_t t = 0; t < truth.size(); ++t) {
    if (truth[t].cls != TruthClass::object) continue;
    for (std::size_t d = 0; d < detections.size(); ++d) {
      const double dist = std::hypot(static_cast<double>(detections[d].row) - truth[t].center_row,
                                     static_cast<double>(detections[d].col) - truth[t].center_col);
      if (dist <= match_radius) pairs.emplace_back(dist, t, d);
    }
  }
  std::sort(pairs.begin(), pairs.end());

  std::vector<bool> truth_used(truth.size(), false);
  std::vector<std::uint8_t> labels(detections.size(), 0);
  std::vector<bool> det_used(detections.size(), false);
  for (const auto& [dist, t, d] : pairs) {
    (void)dist;
    if (truth_used[t] || det_used[d]) continue;
    truth_used[t] = true;
    det_used[d] = true;
    labels[d] = 1;
  }

  std::vector<std::pair<Detection, std::uint8_t>> out;
  out.reserve(detections.size());
  for (std::size_t d = 0; d < detections.size(); ++d) out.emplace_back(detections[d], labels[d]);
  return out;
}

void Snippet::validate() const {
  if (size == 0 || values.size() != kBands * size * size)
    throw InputError("snippet: inconsistent shape");
  for (double v : values)
    if (!std::isfinite(v) || v < 0.0) throw InputError("snippet: values must be finite and >= 0");
}

}  // namespace sonarssl
