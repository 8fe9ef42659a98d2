#include "sonarssl/config.hpp"

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sonarssl/error.hpp"

namespace sonarssl {

namespace {

std::string trim(std::string_view s) {
  const char* ws = " \t\r\n";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* want) {
  throw ConfigError("config: key '" + key + "': cannot parse '" + value + "' as " + want);
}

double parse_double(const std::string& key, const std::string& value) {
  double out = 0.0;
  auto res = std::from_chars(value.data(), value.data() + value.size(), out);
  if (res.ec != std::errc{} || res.ptr != value.data() + value.size())
    bad_value(key, value, "a number");
  return out;
}

std::uint64_t parse_uint(const std::string& key, const std::string& value) {
  std::uint64_t out = 0;
  auto res = std::from_chars(value.data(), value.data() + value.size(), out);
  if (res.ec != std::errc{} || res.ptr != value.data() + value.size())
    bad_value(key, value, "a nonnegative integer");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  bad_value(key, value, "a boolean (true/false)");
}

std::vector<std::string> split_list(const std::string& key, const std::string& value) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    auto comma = value.find(',', start);
    std::string item = trim(std::string_view(value).substr(
        start, comma == std::string::npos ? std::string::npos : comma - start));
    if (item.empty()) throw ConfigError("config: key '" + key + "': empty list element");
    parts.push_back(std::move(item));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return parts;
}

// Shortest decimal form that parses back to the same bits.
std::string fmt(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

template <class Seq, class Fmt>
std::string join(const Seq& seq, Fmt item_fmt) {
  std::string out;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (i != 0) out += ',';
    out += item_fmt(seq[i]);
  }
  return out;
}

// One config key: its parse action and its serialized form. The same table
// drives parse_run_config and dump_run_config, so the accepted and emitted
// key sets cannot drift apart.
struct KeySpec {
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <class Acc>
KeySpec double_key(std::string key, Acc acc) {
  return {key, [key, acc](RunConfig& c, const std::string& v) { acc(c) = parse_double(key, v); },
          [acc](const RunConfig& c) { return fmt(acc(c)); }};
}

template <class Acc>
KeySpec uint_key(std::string key, Acc acc) {
  return {key, [key, acc](RunConfig& c, const std::string& v) { acc(c) = parse_uint(key, v); },
          [acc](const RunConfig& c) { return std::to_string(acc(c)); }};
}

template <class Acc>
KeySpec bool_key(std::string key, Acc acc) {
  return {key, [key, acc](RunConfig& c, const std::string& v) { acc(c) = parse_bool(key, v); },
          [acc](const RunConfig& c) { return acc(c) ? "true" : "false"; }};
}

template <class Acc>
KeySpec string_key(std::string key, Acc acc) {
  return {key, [acc](RunConfig& c, const std::string& v) { acc(c) = v; },
          [acc](const RunConfig& c) { return acc(c); }};
}

template <class Acc>
KeySpec double_list_key(std::string key, Acc acc) {
  return {key,
          [key, acc](RunConfig& c, const std::string& v) {
            std::vector<double> items;
            for (const auto& part : split_list(key, v)) items.push_back(parse_double(key, part));
            acc(c) = std::move(items);
          },
          [acc](const RunConfig& c) { return join(acc(c), [](double d) { return fmt(d); }); }};
}

template <class Acc>
KeySpec uint_list_key(std::string key, Acc acc) {
  return {key,
          [key, acc](RunConfig& c, const std::string& v) {
            std::vector<std::size_t> items;
            for (const auto& part : split_list(key, v))
              items.push_back(static_cast<std::size_t>(parse_uint(key, part)));
            acc(c) = std::move(items);
          },
          [acc](const RunConfig& c) {
            return join(acc(c), [](std::size_t n) { return std::to_string(n); });
          }};
}

#define FIELD(expr) [](auto& c) -> auto& { return c.expr; }

const std::vector<KeySpec>& schema() {
  static const std::vector<KeySpec> specs = [] {
    std::vector<KeySpec> s;
    s.push_back(uint_key("seed", FIELD(seed)));
    s.push_back(string_key("out_dir", FIELD(out_dir)));

    s.push_back(uint_key("synth.width", FIELD(scene.width)));
    s.push_back(uint_key("synth.height", FIELD(scene.height)));
    s.push_back(double_key("synth.background_level", FIELD(scene.background_level)));
    s.push_back(uint_key("synth.n_objects", FIELD(scene.n_objects)));
    s.push_back(uint_key("synth.n_clutter", FIELD(scene.n_clutter)));
    s.push_back(double_key("synth.object_contrast", FIELD(scene.object_contrast)));
    s.push_back(double_key("synth.shadow_depth", FIELD(scene.shadow_depth)));
    s.push_back(double_key("synth.band_decorrelation", FIELD(scene.band_decorrelation)));
    s.push_back(
        double_key("synth.clutter_contrast_fraction", FIELD(scene.clutter_contrast_fraction)));
    s.push_back(double_key("synth.clutter_size_fraction", FIELD(scene.clutter_size_fraction)));
    s.push_back(uint_key("synth.n_scenes", FIELD(n_scenes)));
    s.push_back(double_key("synth.pretrain_scene_fraction", FIELD(pretrain_scene_fraction)));

    s.push_back(bool_key("rx.global_background", FIELD(rx.global_background)));
    s.push_back(uint_key("rx.guard_radius", FIELD(rx.guard_radius)));
    s.push_back(uint_key("rx.background_radius", FIELD(rx.background_radius)));
    s.push_back(double_key("rx.regularization_epsilon", FIELD(rx.regularization_epsilon)));
    s.push_back(double_key("rx.score_threshold", FIELD(rx.score_threshold)));
    s.push_back(uint_key("rx.nms_radius", FIELD(rx.nms_radius)));
    s.push_back(uint_key("rx.multilook_radius", FIELD(multilook_radius)));
    s.push_back(double_key("rx.match_radius", FIELD(match_radius)));
    s.push_back(uint_key("rx.source_extent", FIELD(source_extent)));

    s.push_back(uint_key("data.snippet_size", FIELD(snippet_size)));
    s.push_back(double_key("data.train_ratio", FIELD(ratios.train)));
    s.push_back(double_key("data.validation_ratio", FIELD(ratios.validation)));
    s.push_back(double_key("data.test_ratio", FIELD(ratios.test)));

    s.push_back(uint_list_key("model.stage_widths", FIELD(encoder.stage_widths)));
    s.push_back(uint_list_key("model.blocks_per_stage", FIELD(encoder.blocks_per_stage)));
    s.push_back(uint_key("model.feature_dim", FIELD(encoder.feature_dim)));
    s.push_back(uint_key("model.input_size", FIELD(encoder.input_size)));
    s.push_back(uint_key("model.stem_stride", FIELD(encoder.stem_stride)));
    s.push_back(uint_key("model.head_hidden_dim", FIELD(head.hidden_dim)));
    s.push_back(uint_key("model.head_output_dim", FIELD(head.output_dim)));
    s.push_back(uint_key("model.predictor_hidden_dim", FIELD(head.predictor_hidden_dim)));

    s.push_back(double_key("augment.speckle_lo", FIELD(augment.speckle_lo)));
    s.push_back(double_key("augment.speckle_hi", FIELD(augment.speckle_hi)));
    s.push_back(double_key("augment.flip_probability", FIELD(augment.flip_probability)));
    s.push_back(double_key("augment.crop_scale_lo", FIELD(augment.crop_scale_lo)));
    s.push_back(double_key("augment.crop_scale_hi", FIELD(augment.crop_scale_hi)));
    s.push_back(bool_key("augment.enable_crop", FIELD(augment.enable_crop)));

    s.push_back(double_key("ssl.moco.lr", FIELD(moco.lr)));
    s.push_back(double_key("ssl.moco.min_lr", FIELD(moco.min_lr)));
    s.push_back(double_key("ssl.moco.weight_decay", FIELD(moco.weight_decay)));
    s.push_back(uint_key("ssl.moco.epochs", FIELD(moco.epochs)));
    s.push_back(uint_key("ssl.moco.batch_size", FIELD(moco.batch_size)));
    s.push_back(uint_key("ssl.moco.queue_size", FIELD(moco.queue_size)));
    s.push_back(double_key("ssl.moco.temperature", FIELD(moco.temperature)));
    s.push_back(double_key("ssl.moco.momentum", FIELD(moco.momentum)));
    s.push_back(double_key("ssl.byol.lr", FIELD(byol.lr)));
    s.push_back(double_key("ssl.byol.min_lr", FIELD(byol.min_lr)));
    s.push_back(double_key("ssl.byol.weight_decay", FIELD(byol.weight_decay)));
    s.push_back(uint_key("ssl.byol.epochs", FIELD(byol.epochs)));
    s.push_back(uint_key("ssl.byol.batch_size", FIELD(byol.batch_size)));
    s.push_back(double_key("ssl.byol.ema_rate", FIELD(byol.ema_rate)));

    s.push_back(double_list_key("probe.fractions", FIELD(fractions)));
    s.push_back(double_key("probe.decision_threshold", FIELD(probe.decision_threshold)));
    s.push_back(uint_key("probe.patience", FIELD(probe.patience)));
    s.push_back(uint_key("probe.max_epochs", FIELD(probe.max_epochs)));
    s.push_back(double_key("probe.lr", FIELD(probe.lr)));
    s.push_back(double_key("probe.weight_decay", FIELD(probe.weight_decay)));
    s.push_back(uint_key("probe.batch_size", FIELD(probe.batch_size)));

    s.push_back(
        {"matrix.models",
         [](RunConfig& c, const std::string& v) {
           std::vector<ModelKind> kinds;
           for (const auto& part : split_list("matrix.models", v))
             kinds.push_back(parse_model_kind(part));
           c.models = std::move(kinds);
         },
         [](const RunConfig& c) {
           return join(c.models, [](ModelKind k) { return std::string(model_kind_name(k)); });
         }});

    s.push_back(double_key("tsne.perplexity", FIELD(tsne.perplexity)));
    s.push_back(uint_key("tsne.iterations", FIELD(tsne.iterations)));
    s.push_back(double_key("tsne.early_exaggeration", FIELD(tsne.early_exaggeration)));
    s.push_back(uint_key("tsne.exaggeration_iterations", FIELD(tsne.exaggeration_iterations)));
    s.push_back(double_key("tsne.learning_rate", FIELD(tsne.learning_rate)));
    s.push_back(uint_key("tsne.max_points", FIELD(tsne_max_points)));
    return s;
  }();
  return specs;
}

#undef FIELD

const std::map<std::string, const KeySpec*>& key_index() {
  static const std::map<std::string, const KeySpec*> index = [] {
    std::map<std::string, const KeySpec*> m;
    for (const auto& spec : schema()) m[spec.key] = &spec;
    return m;
  }();
  return index;
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
  RunConfig config;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: line " + std::to_string(line_no) + ": expected key=value, got '" +
                        stripped + "'");
    std::string key = trim(std::string_view(stripped).substr(0, eq));
    std::string value = trim(std::string_view(stripped).substr(eq + 1));
    auto it = key_index().find(key);
    if (it == key_index().end())
      throw ConfigError("config: line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    it->second->set(config, value);
  }
  config.moco.augment = config.augment;
  config.byol.augment = config.augment;
  return config;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("config: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str());
}

std::string dump_run_config(const RunConfig& config) {
  std::string out = "# flat key=value run configuration; '#' starts a comment line\n";
  std::string prev_section;
  bool first = true;
  for (const auto& spec : schema()) {
    auto dot = spec.key.find('.');
    std::string section = dot == std::string::npos ? std::string() : spec.key.substr(0, dot);
    if (!first && section != prev_section) out += '\n';
    first = false;
    prev_section = section;
    out += spec.key;
    out += '=';
    out += spec.get(config);
    out += '\n';
  }
  return out;
}

void RunConfig::validate() const {
  scene.validate();
  rx.validate();
  ratios.validate();
  encoder.validate();
  head.validate();
  augment.validate();
  moco.validate();
  byol.validate();
  probe.validate();
  tsne.validate();
  if (out_dir.empty()) throw ConfigError("config: out_dir must be nonempty");
  if (!(pretrain_scene_fraction >= 0.0 && pretrain_scene_fraction <= 1.0))
    throw ConfigError("config: synth.pretrain_scene_fraction must lie in [0,1]");
  if (!(match_radius > 0.0)) throw ConfigError("config: rx.match_radius must be positive");
  if (snippet_size < 8 || snippet_size % 2 != 0)
    throw ConfigError("config: data.snippet_size must be even and at least 8");
  if (source_extent != 0 && source_extent < 8)
    throw ConfigError("config: rx.source_extent must be 0 (= snippet size) or at least 8");
  if (encoder.input_size != snippet_size)
    throw ConfigError("config: model.input_size must equal data.snippet_size");
  if (scene.width < snippet_size || scene.height < snippet_size)
    throw ConfigError("config: scene dimensions must be at least data.snippet_size");
  if (fractions.empty()) throw ConfigError("config: probe.fractions must be nonempty");
  for (double f : fractions)
    if (!(f > 0.0 && f <= 1.0))
      throw ConfigError("config: probe.fractions entries must lie in (0,1]");
  if (models.empty()) throw ConfigError("config: matrix.models must be nonempty");
  for (std::size_t i = 0; i < models.size(); ++i)
    for (std::size_t j = i + 1; j < models.size(); ++j)
      if (models[i] == models[j]) throw ConfigError("config: matrix.models contains duplicates");
  if (tsne_max_points < 3) throw ConfigError("config: tsne.max_points must be at least 3");
}

}  // namespace sonarssl
