#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sonarssl/model.hpp"
#include "sonarssl/optim.hpp"
#include "sonarssl/params.hpp"
#include "sonarssl/ssl.hpp"

namespace sonarssl {

// What a checkpoint file holds. The SSL kinds carry their full training state
// (both networks, queue, EMA bookkeeping); `supervised` is an end-to-end
// encoder + linear classifier; `probe` is just a trained linear head.
enum class CheckpointKind : std::uint8_t { moco = 0, byol = 1, supervised = 2, probe = 3 };

const char* checkpoint_kind_name(CheckpointKind kind);

// Optimizer state that survives a save/load cycle: flattened Adam moments
// (stored at full 64-bit precision) plus the schedule position.
struct OptimSnapshot {
  std::size_t step_count = 0;
  std::vector<double> m, v;
};

OptimSnapshot snapshot_optim(const AdamW& optim);

// End-to-end supervised model: encoder plus a single-logit linear classifier
// ("encoder.*" and "classifier.*" entries in one set).
struct SupervisedModel {
  EncoderConfig encoder;
  ParamSet params;
};

// Trained linear probe head on top of a frozen backbone; `source` names the
// checkpoint the features came from.
struct ProbeHead {
  EncoderConfig encoder;
  ParamSet params;  // "probe.weight" (1, d), "probe.bias" (1)
  std::string source;
  double label_fraction = 1.0;
};

// Parameters are stored as raw 32-bit floats (name + shape table), optimizer
// moments as 64-bit; a second save of a loaded checkpoint is byte-identical.
void save_checkpoint(const std::string& path, const MoCoState& state, const OptimSnapshot& optim,
                     std::uint64_t epochs_completed);
void save_checkpoint(const std::string& path, const ByolState& state, const OptimSnapshot& optim,
                     std::uint64_t epochs_completed);
void save_checkpoint(const std::string& path, const SupervisedModel& model,
                     const OptimSnapshot& optim, std::uint64_t epochs_completed);
void save_checkpoint(const std::string& path, const ProbeHead& head);

struct LoadedCheckpoint {
  CheckpointKind kind = CheckpointKind::moco;
  std::uint64_t epochs_completed = 0;
  EncoderConfig encoder;
  HeadConfig head;        // moco/byol only
  MoCoState moco;         // kind == moco
  ByolState byol;         // kind == byol
  SupervisedModel supervised;  // kind == supervised
  ProbeHead probe;        // kind == probe
  OptimSnapshot optim;    // empty for probe checkpoints
};

LoadedCheckpoint load_checkpoint(const std::string& path);

// The parameter set and config whose "encoder.*" entries embed snippets:
// query net for moco, online net for byol, the model itself for supervised.
// Probe checkpoints have no backbone -> InputError.
const ParamSet& backbone_params(const LoadedCheckpoint& checkpoint);
const EncoderConfig& backbone_config(const LoadedCheckpoint& checkpoint);

}  // namespace sonarssl
