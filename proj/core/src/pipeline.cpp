#include "sonarssl/pipeline.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "sonarssl/checkpoint.hpp"
#include "sonarssl/error.hpp"
#include "sonarssl/image.hpp"
#include "sonarssl/metrics.hpp"
#include "sonarssl/probe.hpp"
#include "sonarssl/rng.hpp"
#include "sonarssl/svg.hpp"
#include "sonarssl/tsne.hpp"

namespace fs = std::filesystem;

namespace sonarssl {

namespace {

// Seed streams, one per pipeline stage, so no two stages ever share an RNG
// sequence even though they all derive from the single run seed.
constexpr std::uint64_t kStreamSplits = 21;
constexpr std::uint64_t kStreamInit = 22;
constexpr std::uint64_t kStreamTrain = 23;
constexpr std::uint64_t kStreamSubsample = 24;
constexpr std::uint64_t kStreamProbe = 25;
constexpr std::uint64_t kStreamTsne = 26;

std::string fmt(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::uint64_t fraction_index(double fraction) {
  return static_cast<std::uint64_t>(std::llround(fraction * 1e6));
}

void write_text_file(const std::string& path, const std::string& content) {
  fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot open '" + path + "' for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  out.flush();
  if (!out) throw InputError("write failed for '" + path + "'");
}

std::string trimmed(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// manifest.txt: every artifact path relative to out_dir, sorted, unique.
void update_manifest(const RunConfig& config, const std::vector<std::string>& new_entries) {
  std::set<std::string> entries;
  {
    std::ifstream in(manifest_path(config));
    std::string line;
    while (in && std::getline(in, line)) {
      std::string t = trimmed(line);
      if (!t.empty()) entries.insert(t);
    }
  }
  entries.insert(new_entries.begin(), new_entries.end());
  std::string out;
  for (const auto& e : entries) {
    out += e;
    out += '\n';
  }
  write_text_file(manifest_path(config), out);
}

std::vector<std::string> split_fields(const std::string& line, char sep) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(sep, start);
    fields.push_back(line.substr(start, pos == std::string::npos ? std::string::npos
                                                                 : pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return fields;
}

bool parse_double_field(const std::string& s, double& out) {
  auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc{} && res.ptr == s.data() + s.size();
}

// ---- pretraining log round-trip (resume keeps completed rows) ----

std::string pretrain_log_text(ModelKind kind, const SslHyper& hyper,
                              const std::vector<PretrainLogRow>& rows) {
  std::string out = "# model=";
  out += model_kind_name(kind);
  out += "\n# lr=" + fmt(hyper.lr) + " min_lr=" + fmt(hyper.min_lr) +
         " weight_decay=" + fmt(hyper.weight_decay) + " epochs=" + std::to_string(hyper.epochs) +
         " batch_size=" + std::to_string(hyper.batch_size);
  if (kind == ModelKind::moco)
    out += " queue_size=" + std::to_string(hyper.queue_size) +
           " temperature=" + fmt(hyper.temperature) + " momentum=" + fmt(hyper.momentum);
  else
    out += " ema_rate=" + fmt(hyper.ema_rate);
  out += "\nepoch,train_loss,val_loss,lr\n";
  for (const auto& row : rows)
    out += std::to_string(row.epoch) + "," + fmt(row.train_loss) + "," + fmt(row.val_loss) + "," +
           fmt(row.lr) + "\n";
  return out;
}

std::vector<PretrainLogRow> read_log_rows(const std::string& path, std::size_t keep_below) {
  std::vector<PretrainLogRow> rows;
  std::ifstream in(path);
  if (!in) return rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("epoch,", 0) == 0) continue;
    auto fields = split_fields(trimmed(line), ',');
    if (fields.size() != 4) continue;
    double epoch = 0.0;
    PretrainLogRow row;
    if (!parse_double_field(fields[0], epoch) || !parse_double_field(fields[1], row.train_loss) ||
        !parse_double_field(fields[2], row.val_loss) || !parse_double_field(fields[3], row.lr))
      continue;
    row.epoch = static_cast<std::size_t>(epoch);
    if (row.epoch < keep_below) rows.push_back(row);
  }
  return rows;
}

// ---- probe/supervised artifacts ----

std::string probe_log_text(const std::string& model_id, double fraction, const ProbeConfig& pc,
                           const std::vector<ProbeLogRow>& rows) {
  std::string out = "# model=" + model_id + " fraction=" + fmt(fraction) + " lr=" + fmt(pc.lr) +
                    " weight_decay=" + fmt(pc.weight_decay) +
                    " max_epochs=" + std::to_string(pc.max_epochs) +
                    " patience=" + std::to_string(pc.patience) +
                    " batch_size=" + std::to_string(pc.batch_size) + "\n";
  out += "epoch,train_loss,val_loss,lr\n";
  for (const auto& row : rows)
    out += std::to_string(row.epoch) + "," + fmt(row.train_loss) + "," + fmt(row.val_loss) + "," +
           fmt(row.lr) + "\n";
  return out;
}

// One row per distinct score threshold (descending), so the file carries the
// full PR/ROC geometry; the header line carries the single-threshold summary.
std::string report_csv_text(const MetricsReport& report, const std::vector<double>& scores,
                            const std::vector<std::uint8_t>& labels, double decision_threshold) {
  std::string out = "# model=" + report.model_id + " fraction=" + fmt(report.label_fraction) +
                    " threshold=" + fmt(decision_threshold) +
                    " precision=" + fmt(report.precision) + " recall=" + fmt(report.recall) +
                    " accuracy=" + fmt(report.accuracy) + " auc=" + fmt(report.auc) +
                    " tp=" + std::to_string(report.counts.tp) +
                    " fp=" + std::to_string(report.counts.fp) +
                    " tn=" + std::to_string(report.counts.tn) +
                    " fn=" + std::to_string(report.counts.fn) + "\n";
  out += "threshold,tp,fp,tn,fn,precision,recall,fpr\n";
  std::vector<double> thresholds = scores;
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  for (double t : thresholds) {
    Confusion c;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      bool positive = scores[i] >= t;
      if (labels[i] == 1)
        positive ? ++c.tp : ++c.fn;
      else
        positive ? ++c.fp : ++c.tn;
    }
    double fpr = c.fp + c.tn == 0 ? 0.0
                                  : static_cast<double>(c.fp) / static_cast<double>(c.fp + c.tn);
    out += fmt(t) + "," + std::to_string(c.tp) + "," + std::to_string(c.fp) + "," +
           std::to_string(c.tn) + "," + std::to_string(c.fn) + "," + fmt(precision(c)) + "," +
           fmt(recall(c)) + "," + fmt(fpr) + "\n";
  }
  return out;
}

struct CellReport {
  double precision = 0.0, recall = 0.0, accuracy = 0.0, auc = 0.0;
  // threshold,tp,fp,tn,fn,precision,recall,fpr
  std::vector<std::array<double, 8>> rows;
};

CellReport read_report_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  CellReport cell;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    std::string t = trimmed(line);
    if (t.empty()) continue;
    if (t[0] == '#') {
      for (const auto& token : split_fields(t.substr(1), ' ')) {
        auto eq = token.find('=');
        if (eq == std::string::npos) continue;
        std::string key = token.substr(0, eq), value = token.substr(eq + 1);
        if (key == "precision") parse_double_field(value, cell.precision);
        if (key == "recall") parse_double_field(value, cell.recall);
        if (key == "accuracy") parse_double_field(value, cell.accuracy);
        if (key == "auc") parse_double_field(value, cell.auc);
      }
      have_header = true;
      continue;
    }
    if (t.rfind("threshold,", 0) == 0) continue;
    auto fields = split_fields(t, ',');
    if (fields.size() != 8) throw FormatError("malformed report row in '" + path + "'");
    std::array<double, 8> row{};
    for (std::size_t i = 0; i < 8; ++i)
      if (!parse_double_field(fields[i], row[i]))
        throw FormatError("malformed report row in '" + path + "'");
    cell.rows.push_back(row);
  }
  if (!have_header || cell.rows.empty())
    throw FormatError("report file '" + path + "' has no summary/rows");
  return cell;
}

std::uint64_t probe_seed(const RunConfig& config, std::uint64_t model_index, double fraction) {
  return derive_seed(derive_seed(config.seed, kStreamProbe, model_index),
                     fraction_index(fraction));
}

std::vector<std::uint8_t> labels_of(const SnippetDataset& data) {
  std::vector<std::uint8_t> labels(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) labels[i] = *data.snippets[i].label;
  return labels;
}

std::string percent_label(double fraction) {
  return fmt(fraction * 100.0) + "%";
}

}  // namespace

// ---- paths ----

std::string manifest_path(const RunConfig& config) { return config.out_dir + "/manifest.txt"; }

std::string scenes_path(const RunConfig& config) { return config.out_dir + "/scenes.ssbn"; }

std::string split_path(const RunConfig& config, SplitTag tag) {
  return config.out_dir + "/data/" + split_tag_name(tag) + ".ssbn";
}

std::string pretrain_checkpoint_path(const RunConfig& config, ModelKind kind) {
  return config.out_dir + "/pretrain/" + model_kind_name(kind) + "/checkpoint.ssbn";
}

std::string pretrain_log_path(const RunConfig& config, ModelKind kind) {
  return config.out_dir + "/pretrain/" + model_kind_name(kind) + "/log.csv";
}

std::string fraction_token(double fraction) { return fmt(fraction); }

std::string cell_dir(const RunConfig& config, const std::string& model_id, double fraction) {
  return config.out_dir + "/probe/" + model_id + "_f" + fraction_token(fraction);
}

// ---- detection / chipping ----

std::vector<Detection> detect_scene(const MultibandImage& image, const RunConfig& config) {
  Image2D score;
  if (config.multilook_radius > 0) {
    MultibandImage smoothed;
    smoothed.lf = box_mean(image.lf, config.multilook_radius);
    smoothed.hf = box_mean(image.hf, config.multilook_radius);
    score = rx_score_map(smoothed, config.rx);
  } else {
    score = rx_score_map(image, config.rx);
  }
  return detect(score, config.rx);
}

std::vector<std::pair<Snippet, std::uint8_t>> chip_scene(const Scene& scene,
                                                         const RunConfig& config,
                                                         std::uint64_t scene_id) {
  auto detections = detect_scene(scene.image, config);
  auto labeled = label_detections(detections, scene.truth, config.match_radius);
  const std::size_t extent = config.source_extent == 0 ? config.snippet_size
                                                       : config.source_extent;
  std::vector<std::pair<Snippet, std::uint8_t>> chips;
  chips.reserve(labeled.size());
  for (const auto& [det, label] : labeled) {
    Snippet s = extract_snippet(scene.image, det.row, det.col, config.snippet_size, extent);
    s.label = label;
    s.scene_id = scene_id;
    chips.emplace_back(std::move(s), label);
  }
  return chips;
}

// ---- subcommands ----

std::string cmd_synth(const RunConfig& config) {
  config.validate();
  fs::create_directories(config.out_dir);
  if (config.n_scenes == 0) {
    update_manifest(config, {});
    return "no scenes requested; wrote empty manifest";
  }
  auto scenes = scene_corpus(config.scene, config.n_scenes, config.seed);
  save_scenes(scenes, scenes_path(config), config.seed);
  update_manifest(config, {"scenes.ssbn"});
  return "wrote " + std::to_string(scenes.size()) + " scenes -> " + scenes_path(config);
}

std::string cmd_build_data(const RunConfig& config) {
  config.validate();
  auto scenes = load_scenes(scenes_path(config));
  if (scenes.empty()) throw InputError("build-data: scene corpus '" + scenes_path(config) +
                                       "' is empty");

  const auto n_pretrain = static_cast<std::size_t>(
      std::llround(config.pretrain_scene_fraction * static_cast<double>(scenes.size())));
  std::vector<Snippet> unlabeled;
  std::vector<std::pair<Snippet, std::uint8_t>> labeled;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    auto chips = chip_scene(scenes[i], config, i);
    if (i < n_pretrain)
      for (auto& [snippet, label] : chips) unlabeled.push_back(std::move(snippet));
    else
      for (auto& chip : chips) labeled.push_back(std::move(chip));
  }

  Splits splits = build_splits(labeled, unlabeled, config.ratios,
                               derive_seed(config.seed, kStreamSplits, 0));
  const SnippetDataset* sets[4] = {&splits.pretrain, &splits.train, &splits.validation,
                                   &splits.test};
  const SplitTag tags[4] = {SplitTag::pretrain, SplitTag::train, SplitTag::validation,
                            SplitTag::test};
  std::vector<std::string> written;
  for (int i = 0; i < 4; ++i) {
    std::string path = split_path(config, tags[i]);
    fs::create_directories(fs::path(path).parent_path());
    save_dataset(*sets[i], path);
    written.push_back("data/" + std::string(split_tag_name(tags[i])) + ".ssbn");
  }
  update_manifest(config, written);
  return "splits: pretrain " + std::to_string(splits.pretrain.size()) + ", train " +
         std::to_string(splits.train.size()) + ", validation " +
         std::to_string(splits.validation.size()) + ", test " +
         std::to_string(splits.test.size()) + " -> " + config.out_dir + "/data";
}

std::string cmd_pretrain(const RunConfig& config, ModelKind kind) {
  config.validate();
  auto pretrain_set = load_dataset(split_path(config, SplitTag::pretrain));
  auto val_set = load_dataset(split_path(config, SplitTag::validation));
  if (val_set.size() == 0) throw InputError("pretrain: validation split is empty");

  SslHyper hyper = kind == ModelKind::moco ? config.moco : config.byol;
  hyper.augment = config.augment;
  hyper.validate();
  if (pretrain_set.size() < hyper.batch_size)
    throw ConfigError("pretrain: pretrain split (" + std::to_string(pretrain_set.size()) +
                      ") is smaller than batch_size (" + std::to_string(hyper.batch_size) + ")");

  const std::string name = model_kind_name(kind);
  const std::string ckpt_path = pretrain_checkpoint_path(config, kind);
  const std::string log_path = pretrain_log_path(config, kind);
  const std::size_t steps_per_epoch = pretrain_set.size() / hyper.batch_size;

  OptimConfig oc;
  oc.base_lr = hyper.lr;
  oc.min_lr = hyper.min_lr;
  oc.weight_decay = hyper.weight_decay;
  oc.total_steps = std::max<std::size_t>(1, hyper.epochs * steps_per_epoch);

  MoCoState moco_state;
  ByolState byol_state;
  std::unique_ptr<AdamW> optim;
  std::size_t start_epoch = 0;
  std::vector<PretrainLogRow> rows;
  const bool resuming = fs::exists(ckpt_path);
  if (resuming) {
    LoadedCheckpoint lc = load_checkpoint(ckpt_path);
    const auto want = kind == ModelKind::moco ? CheckpointKind::moco : CheckpointKind::byol;
    if (lc.kind != want)
      throw InputError("pretrain: '" + ckpt_path + "' holds a " +
                       checkpoint_kind_name(lc.kind) + " checkpoint, expected " + name);
    start_epoch = static_cast<std::size_t>(lc.epochs_completed);
    if (kind == ModelKind::moco) {
      moco_state = std::move(lc.moco);
      optim = std::make_unique<AdamW>(moco_state.query, oc);
    } else {
      byol_state = std::move(lc.byol);
      optim = std::make_unique<AdamW>(byol_state.online, oc);
    }
    optim->restore(lc.optim.step_count, std::move(lc.optim.m), std::move(lc.optim.v));
    rows = read_log_rows(log_path, start_epoch);
  } else if (kind == ModelKind::moco) {
    moco_state = moco_init(config.encoder, config.head, hyper,
                           derive_seed(config.seed, kStreamInit, 0));
    optim = std::make_unique<AdamW>(moco_state.query, oc);
  } else {
    byol_state = byol_init(config.encoder, config.head, hyper,
                           derive_seed(config.seed, kStreamInit, 1));
    optim = std::make_unique<AdamW>(byol_state.online, oc);
  }
  if (kind == ModelKind::moco && moco_state.queue.dim(0) % hyper.batch_size != 0)
    throw ConfigError("pretrain: batch_size must divide the queue size");

  auto save_state = [&](std::uint64_t epochs_completed) {
    if (kind == ModelKind::moco)
      save_checkpoint(ckpt_path, moco_state, snapshot_optim(*optim), epochs_completed);
    else
      save_checkpoint(ckpt_path, byol_state, snapshot_optim(*optim), epochs_completed);
  };
  auto flush_log = [&] { write_text_file(log_path, pretrain_log_text(kind, hyper, rows)); };

  fs::create_directories(fs::path(ckpt_path).parent_path());
  if (!resuming) save_state(0);
  flush_log();

  auto after_epoch = [&](const PretrainLogRow& row) {
    rows.push_back(row);
    save_state(row.epoch + 1);
    flush_log();
  };
  const std::uint64_t train_seed =
      derive_seed(config.seed, kStreamTrain, static_cast<std::uint64_t>(kind));
  PretrainResult result =
      kind == ModelKind::moco
          ? pretrain_moco(moco_state, *optim, pretrain_set, val_set, hyper, train_seed,
                          start_epoch, hyper.epochs, after_epoch)
          : pretrain_byol(byol_state, *optim, pretrain_set, val_set, hyper, train_seed,
                          start_epoch, hyper.epochs, after_epoch);

  update_manifest(config, {"pretrain/" + name + "/checkpoint.ssbn",
                           "pretrain/" + name + "/log.csv"});
  if (result.aborted)
    throw NumericError("pretrain: non-finite loss after epoch " +
                       std::to_string(start_epoch + result.log.size()) +
                       "; last good checkpoint kept at '" + ckpt_path + "'");
  if (result.log.empty())
    return name + " checkpoint already at epoch " + std::to_string(start_epoch) +
           "; nothing to train";
  return name + ": epochs [" + std::to_string(start_epoch) + ", " +
         std::to_string(start_epoch + result.log.size()) + "), final train loss " +
         fmt(result.log.back().train_loss) + ", val loss " + fmt(result.log.back().val_loss) +
         " -> " + ckpt_path;
}

namespace {

struct EvalOutput {
  MetricsReport report;
  std::vector<double> scores;
  std::vector<std::uint8_t> labels;
};

EvalOutput evaluate_cell(const std::vector<double>& scores, const SnippetDataset& test,
                         const ProbeConfig& pc, const std::string& model_id, double fraction) {
  EvalOutput out;
  out.scores = scores;
  out.labels = labels_of(test);
  out.report = evaluate_scores(out.scores, out.labels, pc.decision_threshold, model_id, fraction);
  return out;
}

}  // namespace

std::string cmd_probe(const RunConfig& config, ModelKind kind, double fraction) {
  config.validate();
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw ConfigError("probe: fraction must lie in (0,1]");
  const std::string name = model_kind_name(kind);
  LoadedCheckpoint lc = load_checkpoint(pretrain_checkpoint_path(config, kind));
  const auto want = kind == ModelKind::moco ? CheckpointKind::moco : CheckpointKind::byol;
  if (lc.kind != want)
    throw InputError("probe: checkpoint kind mismatch for model " + name);

  auto train = load_dataset(split_path(config, SplitTag::train));
  auto validation = load_dataset(split_path(config, SplitTag::validation));
  auto test = load_dataset(split_path(config, SplitTag::test));
  const EncoderConfig& enc = backbone_config(lc);
  if (enc.input_size != train.metadata.snippet_size)
    throw InputError("probe: encoder input size " + std::to_string(enc.input_size) +
                     " does not match snippet size " +
                     std::to_string(train.metadata.snippet_size));

  SnippetDataset sub = subsample_labels(
      train, fraction, derive_seed(config.seed, kStreamSubsample, fraction_index(fraction)));
  ProbeConfig pc = config.probe;
  pc.label_fraction = fraction;
  pc.seed = probe_seed(config, static_cast<std::uint64_t>(kind), fraction);

  const ParamSet& backbone = backbone_params(lc);
  ProbeResult result = train_probe(backbone, enc, sub, validation, pc);
  LinearProbeModel model{enc, backbone, result.head};
  EvalOutput eval = evaluate_cell(predict_probabilities(model, test, pc.batch_size), test, pc,
                                  name, fraction);

  const std::string dir = cell_dir(config, name, fraction);
  fs::create_directories(dir);
  ProbeHead head{enc, result.head, "pretrain/" + name + "/checkpoint.ssbn", fraction};
  save_checkpoint(dir + "/probe.ssbn", head);
  write_text_file(dir + "/log.csv", probe_log_text(name, fraction, pc, result.log));
  write_text_file(dir + "/report.csv",
                  report_csv_text(eval.report, eval.scores, eval.labels, pc.decision_threshold));
  const std::string rel = "probe/" + name + "_f" + fraction_token(fraction) + "/";
  update_manifest(config, {rel + "probe.ssbn", rel + "log.csv", rel + "report.csv"});
  return name + " probe @ " + percent_label(fraction) + " labels (" + std::to_string(sub.size()) +
         " train chips): accuracy " + fmt(eval.report.accuracy) + ", auc " +
         fmt(eval.report.auc) + " -> " + dir;
}

std::string cmd_supervised(const RunConfig& config, double fraction) {
  config.validate();
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw ConfigError("supervised: fraction must lie in (0,1]");
  auto train = load_dataset(split_path(config, SplitTag::train));
  auto validation = load_dataset(split_path(config, SplitTag::validation));
  auto test = load_dataset(split_path(config, SplitTag::test));
  if (config.encoder.input_size != train.metadata.snippet_size)
    throw InputError("supervised: encoder input size does not match snippet size");

  SnippetDataset sub = subsample_labels(
      train, fraction, derive_seed(config.seed, kStreamSubsample, fraction_index(fraction)));
  ProbeConfig pc = config.probe;
  pc.label_fraction = fraction;
  pc.seed = probe_seed(config, 2, fraction);

  SupervisedResult result = train_supervised_baseline(sub, validation, config.encoder, pc);
  EvalOutput eval = evaluate_cell(predict_probabilities(result.model, test, pc.batch_size), test,
                                  pc, "supervised", fraction);

  const std::string dir = cell_dir(config, "supervised", fraction);
  fs::create_directories(dir);
  save_checkpoint(dir + "/model.ssbn", result.model, OptimSnapshot{},
                  static_cast<std::uint64_t>(result.log.size()));
  write_text_file(dir + "/log.csv", probe_log_text("supervised", fraction, pc, result.log));
  write_text_file(dir + "/report.csv",
                  report_csv_text(eval.report, eval.scores, eval.labels, pc.decision_threshold));
  const std::string rel = "probe/supervised_f" + fraction_token(fraction) + "/";
  update_manifest(config, {rel + "model.ssbn", rel + "log.csv", rel + "report.csv"});
  return "supervised @ " + percent_label(fraction) + " labels (" + std::to_string(sub.size()) +
         " train chips): accuracy " + fmt(eval.report.accuracy) + ", auc " +
         fmt(eval.report.auc) + " -> " + dir;
}

std::string cmd_report(const RunConfig& config) {
  config.validate();
  std::vector<std::string> model_ids;
  for (ModelKind kind : config.models) model_ids.push_back(model_kind_name(kind));
  model_ids.push_back("supervised");

  std::map<std::string, CellReport> cells;
  std::vector<std::string> missing;
  for (const auto& model : model_ids)
    for (double f : config.fractions) {
      std::string cell_name = model + "_f" + fraction_token(f);
      std::string path = cell_dir(config, model, f) + "/report.csv";
      if (!fs::exists(path)) {
        missing.push_back(cell_name);
        continue;
      }
      cells.emplace(cell_name, read_report_csv(path));
    }
  if (!missing.empty()) {
    std::string joined;
    for (std::size_t i = 0; i < missing.size(); ++i)
      joined += (i ? ", " : "") + missing[i];
    throw InputError("report: missing cells: " + joined + " (run probe/supervised first)");
  }

  // Fig-style relative accuracy: baseline is supervised at the 1% fraction
  // (smallest configured fraction when 0.01 is not in the matrix).
  std::vector<double> fractions = config.fractions;
  std::sort(fractions.begin(), fractions.end());
  double baseline_fraction = fractions.front();
  for (double f : fractions)
    if (f == 0.01) baseline_fraction = f;
  const double baseline_accuracy =
      cells.at("supervised_f" + fraction_token(baseline_fraction)).accuracy;

  std::string summary = "# relative_accuracy baseline: supervised_f" +
                        fraction_token(baseline_fraction) + "\n";
  summary += "model,fraction,precision,recall,accuracy,auc,relative_accuracy\n";
  for (const auto& model : model_ids)
    for (double f : fractions) {
      const CellReport& cell = cells.at(model + "_f" + fraction_token(f));
      summary += model + "," + fmt(f) + "," + fmt(cell.precision) + "," + fmt(cell.recall) + "," +
                 fmt(cell.accuracy) + "," + fmt(cell.auc) + "," +
                 fmt(cell.accuracy - baseline_accuracy) + "\n";
    }
  write_text_file(config.out_dir + "/report/summary.csv", summary);
  std::vector<std::string> written = {"report/summary.csv"};

  for (double f : fractions) {
    std::vector<PlotSeries> pr, roc;
    for (const auto& model : model_ids) {
      const CellReport& cell = cells.at(model + "_f" + fraction_token(f));
      PlotSeries pr_series{model, {}, {}}, roc_series{model, {0.0}, {0.0}};
      for (const auto& row : cell.rows) {
        pr_series.x.push_back(row[6]);   // recall
        pr_series.y.push_back(row[5]);   // precision
        roc_series.x.push_back(row[7]);  // fpr
        roc_series.y.push_back(row[6]);  // tpr = recall
      }
      pr.push_back(std::move(pr_series));
      roc.push_back(std::move(roc_series));
    }
    PlotSpec pr_spec;
    pr_spec.title = "Precision-recall, " + percent_label(f) + " labels";
    pr_spec.x_label = "recall";
    pr_spec.y_label = "precision";
    PlotSpec roc_spec;
    roc_spec.title = "ROC, " + percent_label(f) + " labels";
    roc_spec.x_label = "false positive rate";
    roc_spec.y_label = "true positive rate";
    std::string pr_name = "report/pr_f" + fraction_token(f) + ".svg";
    std::string roc_name = "report/roc_f" + fraction_token(f) + ".svg";
    write_text_file(config.out_dir + "/" + pr_name, render_line_chart(pr_spec, pr));
    write_text_file(config.out_dir + "/" + roc_name, render_line_chart(roc_spec, roc));
    written.push_back(pr_name);
    written.push_back(roc_name);
  }

  std::vector<PlotSeries> rel_series;
  double y_lo = 0.0, y_hi = 0.0;
  for (const auto& model : model_ids) {
    PlotSeries series{model, {}, {}};
    for (double f : fractions) {
      double rel = cells.at(model + "_f" + fraction_token(f)).accuracy - baseline_accuracy;
      series.x.push_back(f);
      series.y.push_back(rel);
      y_lo = std::min(y_lo, rel);
      y_hi = std::max(y_hi, rel);
    }
    rel_series.push_back(std::move(series));
  }
  PlotSpec rel_spec;
  rel_spec.title = "Accuracy relative to supervised @ " + percent_label(baseline_fraction);
  rel_spec.x_label = "label fraction";
  rel_spec.y_label = "accuracy difference";
  rel_spec.x_log = true;
  rel_spec.draw_markers = true;
  rel_spec.x_min = fractions.front() * (fractions.size() > 1 ? 0.8 : 0.5);
  rel_spec.x_max = fractions.back() * (fractions.size() > 1 ? 1.25 : 2.0);
  rel_spec.y_min = y_lo - 0.05;
  rel_spec.y_max = y_hi + 0.05;
  write_text_file(config.out_dir + "/report/relative_accuracy.svg",
                  render_line_chart(rel_spec, rel_series));
  written.push_back("report/relative_accuracy.svg");

  update_manifest(config, written);
  return "report over " + std::to_string(cells.size()) + " cells -> " + config.out_dir +
         "/report";
}

std::string cmd_embed(const RunConfig& config) {
  config.validate();
  auto test = load_dataset(split_path(config, SplitTag::test));
  if (test.size() == 0) throw InputError("embed: test split is empty");

  // Balanced per-class prefix cap keeps the scatter comparable when the test
  // split is larger than the t-SNE budget.
  SnippetDataset subset = test;
  if (test.size() > config.tsne_max_points) {
    const std::size_t per_class = config.tsne_max_points / 2;
    std::size_t taken[2] = {0, 0};
    subset.snippets.clear();
    for (const auto& s : test.snippets) {
      std::uint8_t label = *s.label;
      if (taken[label] < per_class) {
        subset.snippets.push_back(s);
        ++taken[label];
      }
    }
  }

  std::vector<std::string> written;
  std::string note;
  for (ModelKind kind : config.models) {
    const std::string name = model_kind_name(kind);
    LoadedCheckpoint lc = load_checkpoint(pretrain_checkpoint_path(config, kind));
    Tensor feats = extract_features(backbone_params(lc), backbone_config(lc), subset,
                                    config.probe.batch_size);
    Embedding2D emb = tsne_embed(feats, config.tsne,
                                 derive_seed(config.seed, kStreamTsne,
                                             static_cast<std::uint64_t>(kind)));
    emb.labels = labels_of(subset);
    emb.model_id = name;

    std::string csv = "x,y,label,model\n";
    for (std::size_t i = 0; i < emb.size(); ++i)
      csv += fmt(emb.coords[2 * i]) + "," + fmt(emb.coords[2 * i + 1]) + "," +
             std::to_string(static_cast<int>(emb.labels[i])) + "," + name + "\n";
    write_text_file(config.out_dir + "/embed/" + name + ".csv", csv);

    PlotSeries object{"object", {}, {}}, other{"non-object", {}, {}};
    for (std::size_t i = 0; i < emb.size(); ++i) {
      PlotSeries& group = emb.labels[i] == 1 ? object : other;
      group.x.push_back(emb.coords[2 * i]);
      group.y.push_back(emb.coords[2 * i + 1]);
    }
    std::vector<PlotSeries> groups;
    if (!object.x.empty()) groups.push_back(std::move(object));
    if (!other.x.empty()) groups.push_back(std::move(other));
    write_text_file(config.out_dir + "/embed/" + name + ".svg",
                    render_scatter_chart("Feature embedding: " + name, "dim 1", "dim 2", groups));
    written.push_back("embed/" + name + ".csv");
    written.push_back("embed/" + name + ".svg");
    note += (note.empty() ? "" : ", ") + name;
  }
  update_manifest(config, written);
  return "embedded " + std::to_string(subset.size()) + " test chips for " + note + " -> " +
         config.out_dir + "/embed";
}

}  // namespace sonarssl
