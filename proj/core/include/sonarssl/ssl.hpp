#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sonarssl/augment.hpp"
#include "sonarssl/dataset.hpp"
#include "sonarssl/model.hpp"
#include "sonarssl/optim.hpp"

namespace sonarssl {

enum class ModelKind : std::uint8_t { moco = 0, byol = 1 };

const char* model_kind_name(ModelKind kind);
ModelKind parse_model_kind(const std::string& name);

// Pretraining hyperparameters. The stock defaults are the reference values
// (lr 0.003, weight decay 0.001, 100 epochs, batch 768 for moco / 512 for
// byol); small-scale runs override them through the configuration file.
struct SslHyper {
  double lr = 0.003;
  double min_lr = 0.0;
  double weight_decay = 0.001;
  std::size_t epochs = 100;
  std::size_t batch_size = 768;
  std::size_t queue_size = 1024;
  double temperature = 0.2;
  double momentum = 0.999;  // key-encoder momentum (moco)
  double ema_rate = 0.99;   // target-network EMA (byol)
  AugmentPolicy augment;

  void validate() const;
};

// Momentum-contrast state: query net (encoder + projector), key net of the
// same shape, and a FIFO ring of past key projections used as negatives.
struct MoCoState {
  EncoderConfig encoder;
  HeadConfig head;
  ParamSet query;
  ParamSet key;
  Tensor queue;  // (K, p), unit-norm rows
  std::size_t queue_ptr = 0;
  double temperature = 0.2;
  double momentum = 0.999;

  void validate() const;
};

MoCoState moco_init(const EncoderConfig& encoder, const HeadConfig& head, const SslHyper& hyper,
                    std::uint64_t seed);

// BYOL state: online net (encoder + projector + predictor) and an EMA target
// (encoder + projector only).
struct ByolState {
  EncoderConfig encoder;
  HeadConfig head;
  ParamSet online;
  ParamSet target;
  double ema_rate = 0.99;

  void validate() const;
};

ByolState byol_init(const EncoderConfig& encoder, const HeadConfig& head, const SslHyper& hyper,
                    std::uint64_t seed);

// ---- losses ----

// InfoNCE over (B,p) queries against their positive keys plus K queue
// negatives; rows are L2-normalized internally, gradient flows to q only.
// loss = mean_i -log( exp(q_i.k_i/t) / (exp(q_i.k_i/t) + sum_j exp(q_i.n_j/t)) ).
double ntxent_loss(const Tensor& q, const Tensor& k_pos, const Tensor& queue, double temperature);
// Same value; also writes d(loss)/d(q) (through the normalization).
double ntxent_loss_grad(const Tensor& q, const Tensor& k_pos, const Tensor& queue,
                        double temperature, Tensor* dq);

// Symmetric negative-cosine: mean_i (2 - 2 cos(p1_i, z2t_i)) +
// mean_i (2 - 2 cos(p2_i, z1t_i)); range [0,8]; targets gradient-free.
double byol_loss(const Tensor& p1, const Tensor& p2, const Tensor& z1t, const Tensor& z2t);
double byol_loss_grad(const Tensor& p1, const Tensor& p2, const Tensor& z1t, const Tensor& z2t,
                      Tensor* dp1, Tensor* dp2);

// ---- state algebra ----

// key <- m*key + (1-m)*query elementwise over every entry (weights and
// buffers). m = 1 and m = 0 are exact no-op / copy.
void momentum_update(ParamSet& key, const ParamSet& query, double m);
// Same mixing restricted to the entries the target declares (the target has
// no predictor).
void ema_update(ParamSet& target, const ParamSet& online, double ema_rate);

// FIFO replacement of rows [ptr, ptr+B) (batch must divide the queue size);
// rows are re-normalized on insertion, so the unit-norm invariant survives
// any enqueue sequence.
void enqueue(Tensor& queue, std::size_t& queue_ptr, const Tensor& new_keys);

// ---- training ----

struct StepResult {
  double loss = 0.0;  // pre-update loss
  double lr = 0.0;
};

StepResult moco_train_step(MoCoState& state, AdamW& optim,
                           const std::vector<const Snippet*>& batch, const AugmentPolicy& policy,
                           std::uint64_t seed);
StepResult byol_train_step(ByolState& state, AdamW& optim,
                           const std::vector<const Snippet*>& batch, const AugmentPolicy& policy,
                           std::uint64_t seed);

// Objective value on a held-out set, no parameter updates. Both network
// branches run with frozen batch statistics so the number tracks the actual
// training objective rather than cold running averages.
double moco_validation_loss(const MoCoState& state, const SnippetDataset& val,
                            const SslHyper& hyper, std::uint64_t seed);
double byol_validation_loss(const ByolState& state, const SnippetDataset& val,
                            const SslHyper& hyper, std::uint64_t seed);

struct PretrainLogRow {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
};

struct PretrainResult {
  std::vector<PretrainLogRow> log;
  // True when a non-finite loss stopped training early; everything up to the
  // last completed epoch is valid.
  bool aborted = false;
};

// Runs epochs [start_epoch, end_epoch): per epoch, a fresh permutation of the
// pretrain set (full batches only), train steps, one validation pass, one log
// row, then after_epoch (checkpointing hook; may be empty).
PretrainResult pretrain_moco(MoCoState& state, AdamW& optim, const SnippetDataset& pretrain_set,
                             const SnippetDataset& val_set, const SslHyper& hyper,
                             std::uint64_t seed, std::size_t start_epoch, std::size_t end_epoch,
                             const std::function<void(const PretrainLogRow&)>& after_epoch = {});
PretrainResult pretrain_byol(ByolState& state, AdamW& optim, const SnippetDataset& pretrain_set,
                             const SnippetDataset& val_set, const SslHyper& hyper,
                             std::uint64_t seed, std::size_t start_epoch, std::size_t end_epoch,
                             const std::function<void(const PretrainLogRow&)>& after_epoch = {});

// ---- shared helpers (also used by probing and evaluation) ----

// Row-wise L2 normalization of a (B,p) tensor; zero rows -> NumericError.
Tensor normalize_rows(const Tensor& x);

}  // namespace sonarssl
