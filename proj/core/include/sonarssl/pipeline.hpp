#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sonarssl/config.hpp"
#include "sonarssl/dataset.hpp"
#include "sonarssl/rx.hpp"
#include "sonarssl/scene.hpp"
#include "sonarssl/ssl.hpp"

namespace sonarssl {

// Experiment subcommands. Each one validates its configuration and inputs
// before writing anything, puts its artifacts under config.out_dir, records
// every written file in manifest.txt (relative paths, sorted, unique), and
// returns a one-line summary for the caller to print. All outputs are
// deterministic functions of the RunConfig, so re-runs reproduce files
// byte-identically.

// Scene corpus -> scenes.ssbn. n_scenes = 0 writes only an (empty) manifest.
std::string cmd_synth(const RunConfig& config);

// Detector over every scene -> chips -> balanced splits under data/. Scenes
// are partitioned up front: the first round(pretrain_scene_fraction * n)
// feed the unlabeled pretrain pool, the rest the labeled pool.
std::string cmd_build_data(const RunConfig& config);

// SSL pretraining -> pretrain/<model>/{checkpoint.ssbn,log.csv}. An existing
// checkpoint resumes training at the epoch it recorded.
std::string cmd_pretrain(const RunConfig& config, ModelKind kind);

// Frozen-backbone linear probe at one label fraction ->
// probe/<model>_f<fraction>/{probe.ssbn,log.csv,report.csv}.
std::string cmd_probe(const RunConfig& config, ModelKind kind, double fraction);

// End-to-end supervised baseline at one label fraction ->
// probe/supervised_f<fraction>/{model.ssbn,log.csv,report.csv}.
std::string cmd_supervised(const RunConfig& config, double fraction);

// Aggregates every (model, fraction) cell -> report/summary.csv, per-fraction
// PR/ROC charts, and a relative-accuracy-vs-fraction chart. The relative
// baseline is the supervised model at the 1% fraction (the smallest
// configured fraction when 0.01 is absent). Missing cells are listed in the
// error.
std::string cmd_report(const RunConfig& config);

// Encoder features of the test split per model -> 2-D embedding ->
// embed/<model>.csv + scatter SVG. The split is capped per class to
// tsne.max_points total when larger.
std::string cmd_embed(const RunConfig& config);

// ---- pieces shared with tests ----

// Multilook box-mean prefilter (radius 0 = identity) + RX scoring + NMS.
std::vector<Detection> detect_scene(const MultibandImage& image, const RunConfig& config);

// detect_scene + truth matching + chip extraction; chips carry labels,
// scene_id and center provenance. Chips are cut from the unfiltered image.
std::vector<std::pair<Snippet, std::uint8_t>> chip_scene(const Scene& scene,
                                                         const RunConfig& config,
                                                         std::uint64_t scene_id);

// Canonical artifact locations under config.out_dir.
std::string manifest_path(const RunConfig& config);
std::string scenes_path(const RunConfig& config);
std::string split_path(const RunConfig& config, SplitTag tag);
std::string pretrain_checkpoint_path(const RunConfig& config, ModelKind kind);
std::string pretrain_log_path(const RunConfig& config, ModelKind kind);
// "0.01" — shortest decimal form, used in cell directory names.
std::string fraction_token(double fraction);
// probe/<model_id>_f<fraction>
std::string cell_dir(const RunConfig& config, const std::string& model_id, double fraction);

}  // namespace sonarssl
