#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sonarssl/augment.hpp"
#include "sonarssl/dataset.hpp"
#include "sonarssl/model.hpp"
#include "sonarssl/probe.hpp"
#include "sonarssl/rx.hpp"
#include "sonarssl/scene.hpp"
#include "sonarssl/ssl.hpp"
#include "sonarssl/tsne.hpp"

namespace sonarssl {

// Full experiment configuration. One flat key=value text file (section
// prefixes like ssl.moco.queue_size) drives every subcommand; unknown keys
// are rejected so a typo cannot silently fall back to a default.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string out_dir = "runs/default";

  // synth.*
  SceneConfig scene;
  std::size_t n_scenes = 120;
  // Scene-level partition: chips from the first round(fraction * n_scenes)
  // scenes feed the unlabeled pretrain pool, the rest the labeled pool, so
  // no scene contributes to both.
  double pretrain_scene_fraction = 0.5;

  // rx.*
  RxConfig rx;
  std::size_t multilook_radius = 2;  // box-mean prefilter; 0 disables
  double match_radius = 16.0;
  std::size_t source_extent = 0;  // chip source window; 0 = snippet_size

  // data.*
  std::size_t snippet_size = 64;
  SplitRatios ratios;

  // model.*
  EncoderConfig encoder;
  HeadConfig head;

  // augment.* — shared by both SSL models; the per-model SslHyper copies
  // below are kept in sync by the parser and again at point of use.
  AugmentPolicy augment;

  // ssl.moco.* / ssl.byol.*
  SslHyper moco;
  SslHyper byol = byol_default_hyper();

  // probe.*
  ProbeConfig probe;  // label_fraction/seed are per-cell, not config keys
  std::vector<double> fractions = {0.01, 0.05, 1.0};

  // matrix.*
  std::vector<ModelKind> models = {ModelKind::moco, ModelKind::byol};

  // tsne.*
  TsneConfig tsne;
  std::size_t tsne_max_points = 512;

  // Member validate()s plus cross-field checks (encoder input = snippet
  // size, scene large enough to chip, matrix nonempty...). ConfigError.
  void validate() const;

  static SslHyper byol_default_hyper() {
    SslHyper h;
    h.batch_size = 512;
    return h;
  }
};

// Parses flat key=value text. Blank lines and lines starting with '#' are
// skipped; later keys override earlier ones. ConfigError on malformed lines,
// unknown keys, or unparseable values. Does not call validate().
RunConfig parse_run_config(const std::string& text);

// Reads and parses a config file. InputError when unreadable.
RunConfig load_run_config(const std::string& path);

// Every key in a fixed order, doubles in shortest round-trip form, so
// parse(dump(c)) reproduces c exactly. dump(RunConfig{}) is the output of
// the `defaults` subcommand.
std::string dump_run_config(const RunConfig& config);

}  // namespace sonarssl
