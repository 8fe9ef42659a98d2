#pragma once

#include <cstdint>
#include <vector>

#include "sonarssl/image.hpp"

namespace sonarssl {

// Parameters of one synthetic multi-band seafloor scene. Intensities are in
// arbitrary linear units; the background is fully developed speckle, i.e.
// exponentially distributed intensity with mean background_level.
struct SceneConfig {
  std::size_t width = 320;
  std::size_t height = 320;
  double background_level = 1.0;
  std::size_t n_objects = 6;
  std::size_t n_clutter = 8;
  // Multiplicative highlight factor for objects of interest ( > 1 ).
  double object_contrast = 8.0;
  // Multiplicative factor inside an object's acoustic shadow ( [0,1) ).
  double shadow_depth = 0.3;
  // Fraction of HF pixels whose speckle realization is drawn independently of
  // the LF band. 0 = identical speckle, 1 = fully independent.
  double band_decorrelation = 0.35;
  std::uint64_t seed = 0;

  // Clutter highlights relative to objects: contrast factor scaled toward 1
  // by clutter_contrast_fraction, semi-axes scaled by clutter_size_fraction.
  double clutter_contrast_fraction = 0.75;
  double clutter_size_fraction = 0.7;

  // Throws ConfigError on violated constraints.
  void validate() const;
};

enum class TruthClass : std::uint8_t { object = 1, clutter = 0 };

struct GroundTruthObject {
  double center_row = 0.0;
  double center_col = 0.0;
  TruthClass cls = TruthClass::clutter;
  // Bounding diameter of the highlight in pixels.
  double extent = 0.0;
};

struct Scene {
  MultibandImage image;
  std::vector<GroundTruthObject> truth;
};

// Renders one scene: exponential speckle background, elliptical object
// highlights with an adjacent shadow strip, smaller shadow-free clutter
// highlights. Both bands share the reflectivity map; the HF speckle field is
// decorrelated per config. Bit-identical output for identical config.
Scene generate_scene(const SceneConfig& config);

// n_scenes independent realizations; scene i uses a seed derived from
// (seed, i), so any sub-range can be regenerated without the rest.
std::vector<Scene> scene_corpus(const SceneConfig& config, std::size_t n_scenes,
                                std::uint64_t seed);

}  // namespace sonarssl
