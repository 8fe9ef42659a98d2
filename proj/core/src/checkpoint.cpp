#include "sonarssl/checkpoint.hpp"

#include <fstream>
#include <string>
#include <vector>

#include "sonarssl/binary_io.hpp"
#include "sonarssl/error.hpp"

namespace sonarssl {

namespace {

// Sanity bounds for the load path; real files sit far below these, so
// exceeding one means a corrupt or hostile header, not a big model.
constexpr std::size_t kMaxEntries = 1u << 20;
constexpr std::size_t kMaxRank = 8;
constexpr std::size_t kMaxDim = 1u << 28;

void write_size_list(std::ostream& os, const std::vector<std::size_t>& v) {
  io::write_u32(os, static_cast<std::uint32_t>(v.size()));
  for (std::size_t x : v) io::write_u64(os, static_cast<std::uint64_t>(x));
}

std::vector<std::size_t> read_size_list(std::istream& is, const char* what) {
  const std::uint32_t n = io::read_u32(is, what);
  if (n > kMaxEntries) throw FormatError(std::string(what) + ": implausible count");
  std::vector<std::size_t> out(n);
  for (auto& x : out) {
    x = static_cast<std::size_t>(io::read_u64(is, what));
    if (x > kMaxDim) throw FormatError(std::string(what) + ": implausible value");
  }
  return out;
}

void write_encoder_config(std::ostream& os, const EncoderConfig& c) {
  io::write_u32(os, static_cast<std::uint32_t>(c.input_channels));
  write_size_list(os, c.stage_widths);
  write_size_list(os, c.blocks_per_stage);
  io::write_u32(os, static_cast<std::uint32_t>(c.feature_dim));
  io::write_u32(os, static_cast<std::uint32_t>(c.input_size));
  io::write_u32(os, static_cast<std::uint32_t>(c.stem_stride));
}

EncoderConfig read_encoder_config(std::istream& is) {
  EncoderConfig c;
  c.input_channels = io::read_u32(is, "encoder input channels");
  c.stage_widths = read_size_list(is, "encoder stage widths");
  c.blocks_per_stage = read_size_list(is, "encoder blocks per stage");
  c.feature_dim = io::read_u32(is, "encoder feature dim");
  c.input_size = io::read_u32(is, "encoder input size");
  c.stem_stride = io::read_u32(is, "encoder stem stride");
  c.validate();
  return c;
}

void write_head_config(std::ostream& os, const HeadConfig& c) {
  io::write_u32(os, static_cast<std::uint32_t>(c.hidden_dim));
  io::write_u32(os, static_cast<std::uint32_t>(c.output_dim));
  io::write_u32(os, static_cast<std::uint32_t>(c.predictor_hidden_dim));
}

HeadConfig read_head_config(std::istream& is) {
  HeadConfig c;
  c.hidden_dim = io::read_u32(is, "head hidden dim");
  c.output_dim = io::read_u32(is, "head output dim");
  c.predictor_hidden_dim = io::read_u32(is, "head predictor hidden dim");
  c.validate();
  return c;
}

void write_param_set(std::ostream& os, const std::string& set_name, const ParamSet& params) {
  io::write_string(os, set_name);
  io::write_u64(os, params.entries().size());
  for (const auto& e : params.entries()) {
    io::write_string(os, e.name);
    io::write_u8(os, static_cast<std::uint8_t>(e.kind));
    io::write_u32(os, static_cast<std::uint32_t>(e.value.rank()));
    for (std::size_t d : e.value.shape) io::write_u64(os, static_cast<std::uint64_t>(d));
    io::write_f32_block(os, e.value.data);
  }
}

ParamSet read_param_set(std::istream& is, const std::string& expected_name) {
  const std::string name = io::read_string(is, "parameter set name");
  if (name != expected_name)
    throw FormatError("parameter set: expected '" + expected_name + "', found '" + name + "'");
  const std::uint64_t n = io::read_u64(is, "parameter entry count");
  if (n > kMaxEntries) throw FormatError("parameter entry count: implausible");
  ParamSet params;
  for (std::uint64_t i = 0; i < n; ++i) {
    const std::string entry_name = io::read_string(is, "parameter name");
    const std::uint8_t kind = io::read_u8(is, "parameter kind");
    if (kind > 1) throw FormatError("parameter kind: unknown value");
    const std::uint32_t rank = io::read_u32(is, "parameter rank");
    if (rank > kMaxRank) throw FormatError("parameter rank: implausible");
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) {
      d = static_cast<std::size_t>(io::read_u64(is, "parameter dim"));
      if (d == 0 || d > kMaxDim) throw FormatError("parameter dim: implausible");
    }
    Tensor t(shape);
    io::read_f32_block(is, t.data, t.numel(), "parameter data");
    params.add(entry_name, static_cast<ParamKind>(kind), std::move(t));
  }
  return params;
}

void write_optim(std::ostream& os, const OptimSnapshot& optim) {
  if (optim.m.size() != optim.v.size())
    throw InputError("checkpoint: optimizer moment vectors differ in length");
  io::write_u64(os, optim.step_count);
  io::write_u64(os, optim.m.size());
  for (double x : optim.m) io::write_f64(os, x);
  for (double x : optim.v) io::write_f64(os, x);
}

OptimSnapshot read_optim(std::istream& is) {
  OptimSnapshot optim;
  optim.step_count = static_cast<std::size_t>(io::read_u64(is, "optimizer step count"));
  const std::uint64_t n = io::read_u64(is, "optimizer moment length");
  if (n > (std::uint64_t{1} << 32)) throw FormatError("optimizer moment length: implausible");
  optim.m.resize(n);
  optim.v.resize(n);
  for (auto& x : optim.m) x = io::read_f64(is, "optimizer first moment");
  for (auto& x : optim.v) x = io::read_f64(is, "optimizer second moment");
  return optim;
}

std::ofstream begin_checkpoint(const std::string& path, CheckpointKind kind,
                               std::uint64_t epochs_completed, const EncoderConfig& encoder,
                               const HeadConfig& head) {
  std::ofstream os = io::open_output(path);
  io::write_container_header(os, io::kContentCheckpoint);
  io::write_u8(os, static_cast<std::uint8_t>(kind));
  io::write_u8(os, io::kDtypeF32);
  io::write_u64(os, epochs_completed);
  write_encoder_config(os, encoder);
  write_head_config(os, head);
  return os;
}

void end_checkpoint(std::ofstream& os, CheckpointKind kind, const std::string& path) {
  io::write_string(os, std::string("kind=checkpoint\nmodel=") + checkpoint_kind_name(kind) + "\n");
  os.flush();
  if (!os) throw InputError("write failed: " + path);
}

}  // namespace

const char* checkpoint_kind_name(CheckpointKind kind) {
  switch (kind) {
    case CheckpointKind::moco:
      return "moco";
    case CheckpointKind::byol:
      return "byol";
    case CheckpointKind::supervised:
      return "supervised";
    case CheckpointKind::probe:
      return "probe";
  }
  throw InputError("unknown checkpoint kind");
}

OptimSnapshot snapshot_optim(const AdamW& optim) {
  OptimSnapshot snap;
  snap.step_count = optim.step_count();
  snap.m = optim.moment1();
  snap.v = optim.moment2();
  return snap;
}

void save_checkpoint(const std::string& path, const MoCoState& state, const OptimSnapshot& optim,
                     std::uint64_t epochs_completed) {
  state.validate();
  std::ofstream os =
      begin_checkpoint(path, CheckpointKind::moco, epochs_completed, state.encoder, state.head);
  io::write_u32(os, 2);
  write_param_set(os, "query", state.query);
  write_param_set(os, "key", state.key);
  io::write_f64(os, state.temperature);
  io::write_f64(os, state.momentum);
  io::write_u64(os, state.queue.dim(0));
  io::write_u64(os, state.queue.dim(1));
  io::write_f32_block(os, state.queue.data);
  io::write_u64(os, state.queue_ptr);
  write_optim(os, optim);
  end_checkpoint(os, CheckpointKind::moco, path);
}

void save_checkpoint(const std::string& path, const ByolState& state, const OptimSnapshot& optim,
                     std::uint64_t epochs_completed) {
  state.validate();
  std::ofstream os =
      begin_checkpoint(path, CheckpointKind::byol, epochs_completed, state.encoder, state.head);
  io::write_u32(os, 2);
  write_param_set(os, "online", state.online);
  write_param_set(os, "target", state.target);
  io::write_f64(os, state.ema_rate);
  write_optim(os, optim);
  end_checkpoint(os, CheckpointKind::byol, path);
}

void save_checkpoint(const std::string& path, const SupervisedModel& model,
                     const OptimSnapshot& optim, std::uint64_t epochs_completed) {
  model.encoder.validate();
  if (!model.params.has("classifier.weight"))
    throw InputError("supervised checkpoint: params lack a classifier");
  std::ofstream os = begin_checkpoint(path, CheckpointKind::supervised, epochs_completed,
                                      model.encoder, HeadConfig{});
  io::write_u32(os, 1);
  write_param_set(os, "model", model.params);
  write_optim(os, optim);
  end_checkpoint(os, CheckpointKind::supervised, path);
}

void save_checkpoint(const std::string& path, const ProbeHead& head) {
  head.encoder.validate();
  if (!head.params.has("probe.weight") || !head.params.has("probe.bias"))
    throw InputError("probe checkpoint: params lack the probe head");
  std::ofstream os = begin_checkpoint(path, CheckpointKind::probe, 0, head.encoder, HeadConfig{});
  io::write_u32(os, 1);
  write_param_set(os, "probe", head.params);
  io::write_string(os, head.source);
  io::write_f64(os, head.label_fraction);
  end_checkpoint(os, CheckpointKind::probe, path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream is = io::open_input(path);
  io::check_container_header(is, io::kContentCheckpoint, "checkpoint");
  const std::uint8_t kind_byte = io::read_u8(is, "model kind");
  if (kind_byte > static_cast<std::uint8_t>(CheckpointKind::probe))
    throw FormatError("model kind: unknown value");
  if (io::read_u8(is, "dtype") != io::kDtypeF32) throw FormatError("dtype: expected float32");

  LoadedCheckpoint out;
  out.kind = static_cast<CheckpointKind>(kind_byte);
  out.epochs_completed = io::read_u64(is, "epoch counter");
  out.encoder = read_encoder_config(is);
  out.head = read_head_config(is);

  const std::uint32_t n_sets = io::read_u32(is, "parameter set count");
  switch (out.kind) {
    case CheckpointKind::moco: {
      if (n_sets != 2) throw FormatError("moco checkpoint: expected 2 parameter sets");
      out.moco.encoder = out.encoder;
      out.moco.head = out.head;
      out.moco.query = read_param_set(is, "query");
      out.moco.key = read_param_set(is, "key");
      out.moco.temperature = io::read_f64(is, "temperature");
      out.moco.momentum = io::read_f64(is, "momentum");
      const std::uint64_t rows = io::read_u64(is, "queue rows");
      const std::uint64_t cols = io::read_u64(is, "queue cols");
      if (rows > kMaxDim || cols > kMaxDim) throw FormatError("queue shape: implausible");
      out.moco.queue = Tensor({static_cast<std::size_t>(rows), static_cast<std::size_t>(cols)});
      io::read_f32_block(is, out.moco.queue.data, out.moco.queue.numel(), "queue data");
      out.moco.queue_ptr = static_cast<std::size_t>(io::read_u64(is, "queue pointer"));
      out.optim = read_optim(is);
      out.moco.validate();
      break;
    }
    case CheckpointKind::byol: {
      if (n_sets != 2) throw FormatError("byol checkpoint: expected 2 parameter sets");
      out.byol.encoder = out.encoder;
      out.byol.head = out.head;
      out.byol.online = read_param_set(is, "online");
      out.byol.target = read_param_set(is, "target");
      out.byol.ema_rate = io::read_f64(is, "ema rate");
      out.optim = read_optim(is);
      out.byol.validate();
      break;
    }
    case CheckpointKind::supervised: {
      if (n_sets != 1) throw FormatError("supervised checkpoint: expected 1 parameter set");
      out.supervised.encoder = out.encoder;
      out.supervised.params = read_param_set(is, "model");
      if (!out.supervised.params.has("classifier.weight"))
        throw FormatError("supervised checkpoint: params lack a classifier");
      out.optim = read_optim(is);
      break;
    }
    case CheckpointKind::probe: {
      if (n_sets != 1) throw FormatError("probe checkpoint: expected 1 parameter set");
      out.probe.encoder = out.encoder;
      out.probe.params = read_param_set(is, "probe");
      out.probe.source = io::read_string(is, "probe source");
      out.probe.label_fraction = io::read_f64(is, "probe label fraction");
      if (!out.probe.params.has("probe.weight") || !out.probe.params.has("probe.bias"))
        throw FormatError("probe checkpoint: params lack the probe head");
      break;
    }
  }
  io::read_string(is, "metadata");
  io::check_no_trailing(is, path);
  return out;
}

const ParamSet& backbone_params(const LoadedCheckpoint& checkpoint) {
  switch (checkpoint.kind) {
    case CheckpointKind::moco:
      return checkpoint.moco.query;
    case CheckpointKind::byol:
      return checkpoint.byol.online;
    case CheckpointKind::supervised:
      return checkpoint.supervised.params;
    case CheckpointKind::probe:
      break;
  }
  throw InputError("probe checkpoint has no backbone");
}

const EncoderConfig& backbone_config(const LoadedCheckpoint& checkpoint) {
  if (checkpoint.kind == CheckpointKind::probe)
    throw InputError("probe checkpoint has no backbone");
  return checkpoint.encoder;
}

}  // namespace sonarssl
