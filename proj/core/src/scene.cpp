#include "sonarssl/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "sonarssl/rng.hpp"

namespace sonarssl {

namespace {

struct Placement {
  double row, col;
  double semi_major, semi_minor;
  double angle;
  int shadow_dir;  // -1 / +1 along columns, 0 = no shadow
};

// Paints contrast inside a rotated ellipse centered at (row, col).
void paint_ellipse(Image2D& refl, const Placement& p, double contrast) {
  const double cosa = std::cos(p.angle);
  const double sina = std::sin(p.angle);
  const double reach = std::max(p.semi_major, p.semi_minor) + 1.0;
  const auto r_lo = static_cast<std::size_t>(std::max(0.0, std::floor(p.row - reach)));
  const auto r_hi = static_cast<std::size_t>(
      std::min<double>(static_cast<double>(refl.height()) - 1.0, std::ceil(p.row + reach)));
  const auto c_lo = static_cast<std::size_t>(std::max(0.0, std::floor(p.col - reach)));
  const auto c_hi = static_cast<std::size_t>(
      std::min<double>(static_cast<double>(refl.width()) - 1.0, std::ceil(p.col + reach)));
  for (std::size_t r = r_lo; r <= r_hi; ++r) {
    for (std::size_t c = c_lo; c <= c_hi; ++c) {
      const double dr = static_cast<double>(r) - p.row;
      const double dc = static_cast<double>(c) - p.col;
      const double u = dr * cosa + dc * sina;
      const double v = -dr * sina + dc * cosa;
      const double q = (u * u) / (p.semi_major * p.semi_major) +
                       (v * v) / (p.semi_minor * p.semi_minor);
      if (q <= 1.0) refl.at(r, c) = std::max(refl.at(r, c), contrast);
    }
  }
}

// Shadow strip: a rectangle cast along the column (range) axis, starting just
// past the highlight edge.
void paint_shadow(Image2D& refl, const Placement& p, double depth) {
  const double reach = std::max(p.semi_major, p.semi_minor);
  const double length = 2.2 * (2.0 * p.semi_major);
  const double half_width = p.semi_minor;
  const double start = p.col + p.shadow_dir * (reach + 1.0);
  const double end = start + p.shadow_dir * length;
  const double c_min = std::min(start, end);
  const double c_max = std::max(start, end);
  const auto r_lo = static_cast<std::size_t>(std::max(0.0, std::floor(p.row - half_width)));
  const auto r_hi = static_cast<std::size_t>(
      std::min<double>(static_cast<double>(refl.height()) - 1.0, std::ceil(p.row + half_width)));
  const auto c_lo = static_cast<std::size_t>(std::max(0.0, std::floor(c_min)));
  const auto c_hi = static_cast<std::size_t>(
      std::min<double>(static_cast<double>(refl.width()) - 1.0, std::ceil(c_max)));
  if (c_lo > c_hi) return;
  for (std::size_t r = r_lo; r <= r_hi; ++r) {
    if (std::abs(static_cast<double>(r) - p.row) > half_width) continue;
    for (std::size_t c = c_lo; c <= c_hi; ++c) {
      const double cc = static_cast<double>(c);
      if (cc < c_min || cc > c_max) continue;
      refl.at(r, c) = std::min(refl.at(r, c), depth);
    }
  }
}

}  // namespace

void SceneConfig::validate() const {
  if (width < 32 || height < 32)
    throw ConfigError("scene: width/height must be at least 32 pixels");
  if (background_level <= 0.0) throw ConfigError("scene: background_level must be > 0");
  if (object_contrast <= 1.0) throw ConfigError("scene: object_contrast must be > 1");
  if (shadow_depth < 0.0 || shadow_depth >= 1.0)
    throw ConfigError("scene: shadow_depth must lie in [0,1)");
  if (band_decorrelation < 0.0 || band_decorrelation > 1.0)
    throw ConfigError("scene: band_decorrelation must lie in [0,1]");
  if (clutter_contrast_fraction <= 0.0 || clutter_contrast_fraction > 1.0)
    throw ConfigError("scene: clutter_contrast_fraction must lie in (0,1]");
  if (clutter_size_fraction <= 0.0 || clutter_size_fraction > 1.0)
    throw ConfigError("scene: clutter_size_fraction must lie in (0,1]");
}

Scene generate_scene(const SceneConfig& config) {
  config.validate();
  Rng rng(config.seed);

  // Highlight size range; the margin keeps every highlight and shadow strip
  // inside the scene.
  constexpr double kMajorLo = 4.0, kMajorHi = 7.0;
  constexpr double kMinorLo = 2.5, kMinorHi = 4.5;
  const double max_shadow = kMajorHi + 1.0 + 2.2 * 2.0 * kMajorHi;
  const double margin = std::min(std::ceil(max_shadow) + 2.0,
                                 static_cast<double>(std::min(config.width, config.height)) / 2.0 - 1.0);
  const double min_separation = 36.0;

  Scene scene;
  scene.truth.reserve(config.n_objects + config.n_clutter);
  Image2D refl(config.height, config.width, 1.0);

  std::vector<Placement> placements;
  const std::size_t total = config.n_objects + config.n_clutter;
  for (std::size_t i = 0; i < total; ++i) {
    const bool is_object = i < config.n_objects;
    Placement p{};
    bool placed = false;
    for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
      p.row = rng.uniform(margin, static_cast<double>(config.height) - margin);
      p.col = rng.uniform(margin, static_cast<double>(config.width) - margin);
      placed = true;
      for (const Placement& q : placements) {
        const double d = std::hypot(p.row - q.row, p.col - q.col);
        if (d < min_separation) {
          placed = false;
          break;
        }
      }
    }
    if (!placed)
      throw ConfigError("scene: could not place objects; scene too small for the requested counts");

    const double size_scale = is_object ? 1.0 : config.clutter_size_fraction;
    p.semi_major = size_scale * rng.uniform(kMajorLo, kMajorHi);
    p.semi_minor = size_scale * rng.uniform(kMinorLo, kMinorHi);
    p.angle = rng.uniform(0.0, std::numbers::pi);
    p.shadow_dir = is_object ? (rng.bernoulli(0.5) ? 1 : -1) : 0;
    placements.push_back(p);

    const double contrast =
        is_object ? config.object_contrast
                  : 1.0 + (config.object_contrast - 1.0) * config.clutter_contrast_fraction;
    if (p.shadow_dir != 0) paint_shadow(refl, p, config.shadow_depth);
    paint_ellipse(refl, p, contrast);

    GroundTruthObject truth;
    truth.center_row = p.row;
    truth.center_col = p.col;
    truth.cls = is_object ? TruthClass::object : TruthClass::clutter;
    truth.extent = 2.0 * std::max(p.semi_major, p.semi_minor);
    scene.truth.push_back(truth);
  }

  // Multiplicative fully developed speckle: intensity = level * refl * Exp(1).
  // The HF band reuses the LF speckle draw except at pixels selected for an
  // independent realization, so both bands stay exactly exponential.
  scene.image.lf = Image2D(config.height, config.width);
  scene.image.hf = Image2D(config.height, config.width);
  const std::size_t n = config.height * config.width;
  std::vector<double> lf_speckle(n);
  for (std::size_t i = 0; i < n; ++i) lf_speckle[i] = rng.exponential(1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double base = config.background_level * refl.data()[i];
    scene.image.lf.data()[i] = base * lf_speckle[i];
    const double hf_speckle =
        rng.bernoulli(config.band_decorrelation) ? rng.exponential(1.0) : lf_speckle[i];
    scene.image.hf.data()[i] = base * hf_speckle;
  }
  return scene;
}

std::vector<Scene> scene_corpus(const SceneConfig& config, std::size_t n_scenes,
                                std::uint64_t seed) {
  if (n_scenes < 1) throw ConfigError("scene_corpus: n_scenes must be >= 1");
  std::vector<Scene> scenes;
  scenes.reserve(n_scenes);
  for (std::size_t i = 0; i < n_scenes; ++i) {
    SceneConfig c = config;
    c.seed = derive_seed(seed, i);
    scenes.push_back(generate_scene(c));
  }
  return scenes;
}

}  // namespace sonarssl
