#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sonarssl/layers.hpp"
#include "sonarssl/params.hpp"
#include "sonarssl/rng.hpp"
#include "sonarssl/snippet.hpp"
#include "sonarssl/tensor.hpp"

namespace sonarssl {

// Residual encoder: stem conv (stride 2) -> BN -> ReLU, then one group of
// basic blocks per stage (first block of every stage after the stem halves
// resolution), global average pool. Feature dimension = last stage width.
struct EncoderConfig {
  std::size_t input_channels = 2;
  std::vector<std::size_t> stage_widths = {16, 32, 64, 128};
  std::vector<std::size_t> blocks_per_stage = {2, 2, 2, 2};
  std::size_t feature_dim = 128;
  std::size_t input_size = 64;
  // Stem downsampling factor. 2 matches the reference topology; larger values
  // shrink compute for small-scale runs without touching the block structure.
  std::size_t stem_stride = 2;

  void validate() const;
};

struct HeadConfig {
  std::size_t hidden_dim = 256;
  std::size_t output_dim = 64;
  std::size_t predictor_hidden_dim = 256;

  void validate() const;
};

// ---- parameter registration (He fan-in weights, zero biases, BN scale 1 /
// shift 0 / running stats (0,1); draw order = creation order, so one seeded
// Rng makes the whole set deterministic) ----

void register_encoder(ParamSet& params, const EncoderConfig& config, const std::string& prefix,
                      Rng& rng);
// Two-layer MLP (linear -> ReLU -> linear) used for projector and predictor.
void register_mlp(ParamSet& params, const std::string& prefix, std::size_t in_dim,
                  std::size_t hidden_dim, std::size_t out_dim, Rng& rng);
void register_linear(ParamSet& params, const std::string& prefix, std::size_t in_dim,
                     std::size_t out_dim, Rng& rng);

// Standalone encoder ParamSet under prefix "encoder".
ParamSet init_params(const EncoderConfig& config, std::uint64_t seed);

// ---- forward/backward ----

struct BlockActs {
  ConvCache c1;
  BnCache b1;
  ReluCache r1;
  ConvCache c2;
  BnCache b2;
  bool has_skip = false;
  ConvCache cs;
  BnCache bs;
  ReluCache r2;
};

struct EncoderActs {
  ConvCache stem_c;
  BnCache stem_b;
  ReluCache stem_r;
  std::vector<BlockActs> blocks;
  GapCache gap;
};

// batch: (B, 2, S, S) -> features (B, d). Pass acts to keep what backward
// needs; mode selects normalization behavior (see BnMode).
Tensor encoder_forward(const ParamSet& params, const EncoderConfig& config,
                       const std::string& prefix, const Tensor& batch, BnMode mode,
                       EncoderActs* acts);
// Returns d(batch); accumulates parameter gradients.
Tensor encoder_backward(const ParamSet& params, const EncoderConfig& config,
                        const std::string& prefix, const EncoderActs& acts, const Tensor& dfeat,
                        Grads& grads);
// Applies every staged BN running-statistics update from a train-mode pass.
void encoder_commit_bn(ParamSet& params, const EncoderConfig& config, const std::string& prefix,
                       const EncoderActs& acts);

struct MlpActs {
  LinearCache l1;
  ReluCache r;
  LinearCache l2;
};

Tensor mlp_forward(const ParamSet& params, const std::string& prefix, const Tensor& x,
                   MlpActs* acts);
Tensor mlp_backward(const ParamSet& params, const std::string& prefix, const MlpActs& acts,
                    const Tensor& dy, Grads& grads);

// ---- batch assembly ----

// Stacks snippets into a (B, 2, S, S) tensor.
Tensor batch_to_tensor(const std::vector<const Snippet*>& batch);

}  // namespace sonarssl
