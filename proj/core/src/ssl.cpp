#include "sonarssl/ssl.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

#include "sonarssl/error.hpp"
#include "sonarssl/rng.hpp"

namespace sonarssl {
namespace {

using MatrixRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMapRM = Eigen::Map<const MatrixRM>;

// Seed streams inside the pretraining loop. Distinct constants keep epoch
// shuffles, per-step augmentations, and validation views independent.
constexpr std::uint64_t kStreamEpoch = 1;
constexpr std::uint64_t kStreamStep = 2;
constexpr std::uint64_t kStreamVal = 3;

void require_rows(const Tensor& t, const char* what) {
  if (t.rank() != 2) throw InputError(std::string(what) + ": expected a (rows, dim) tensor");
}

// Normalizes each row to unit length; optionally records the original norms
// (the gradient chain through the normalization needs them).
Tensor normalize_rows_impl(const Tensor& x, std::vector<double>* norms) {
  require_rows(x, "normalize_rows");
  const std::size_t n = x.dim(0), p = x.dim(1);
  Tensor out(x.shape);
  if (norms) norms->assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double ss = 0.0;
    for (std::size_t j = 0; j < p; ++j) ss += x.data[i * p + j] * x.data[i * p + j];
    const double norm = std::sqrt(ss);
    if (!std::isfinite(norm) || norm <= 0.0)
      throw NumericError("normalize_rows: zero or non-finite row norm");
    for (std::size_t j = 0; j < p; ++j) out.data[i * p + j] = x.data[i * p + j] / norm;
    if (norms) (*norms)[i] = norm;
  }
  return out;
}

void check_unit_fraction(double value, const char* what) {
  if (!(value >= 0.0 && value <= 1.0))
    throw ConfigError(std::string(what) + " must lie in [0, 1]");
}

// Elementwise dst <- m*dst + (1-m)*src with exact endpoints.
void mix_tensor(Tensor& dst, const Tensor& src, double m) {
  require_same_shape(dst, src, "momentum mix");
  if (m == 1.0) return;
  if (m == 0.0) {
    dst.data = src.data;
    return;
  }
  for (std::size_t i = 0; i < dst.numel(); ++i)
    dst.data[i] = m * dst.data[i] + (1.0 - m) * src.data[i];
}

Tensor views_to_tensor(const std::vector<Snippet>& views) {
  std::vector<const Snippet*> ptrs;
  ptrs.reserve(views.size());
  for (const auto& v : views) ptrs.push_back(&v);
  return batch_to_tensor(ptrs);
}

// Augments every snippet of the batch into its two views and stacks them into
// two (B, 2, S, S) tensors.
void make_view_tensors(const std::vector<const Snippet*>& batch, const AugmentPolicy& policy,
                       std::uint64_t seed, Tensor* batch1, Tensor* batch2) {
  if (batch.empty()) throw InputError("train step: empty batch");
  std::vector<Snippet> v1, v2;
  v1.reserve(batch.size());
  v2.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (batch[i] == nullptr) throw InputError("train step: null snippet in batch");
    auto views = two_views(*batch[i], policy, derive_seed(seed, i));
    v1.push_back(std::move(views.first));
    v2.push_back(std::move(views.second));
  }
  *batch1 = views_to_tensor(v1);
  *batch2 = views_to_tensor(v2);
}

void check_embedding_pair(const Tensor& q, const Tensor& k) {
  require_rows(q, "ntxent");
  require_rows(k, "ntxent");
  require_same_shape(q, k, "ntxent query/key");
  if (q.dim(0) == 0) throw InputError("ntxent: empty batch");
}

// Shared forward of the InfoNCE objective. Positive logit is q_i.k_i/t, the
// negatives come from the queue rows; the per-row log-sum-exp is stabilized
// by its max. When dq is non-null the gradient w.r.t. the raw (unnormalized)
// queries is written there.
double ntxent_impl(const Tensor& q, const Tensor& k_pos, const Tensor& queue, double temperature,
                   Tensor* dq) {
  if (!(temperature > 0.0)) throw ConfigError("ntxent: temperature must be positive");
  check_embedding_pair(q, k_pos);
  const std::size_t B = q.dim(0), p = q.dim(1);
  require_rows(queue, "ntxent queue");
  const std::size_t K = queue.dim(0);
  if (K > 0 && queue.dim(1) != p)
    throw InputError("ntxent: queue embedding dim does not match the queries");

  std::vector<double> q_norms;
  const Tensor qh = normalize_rows_impl(q, &q_norms);
  const Tensor kh = normalize_rows_impl(k_pos, nullptr);
  const Tensor nh = K > 0 ? normalize_rows_impl(queue, nullptr) : Tensor({0, p});

  ConstMapRM Q(qh.data.data(), static_cast<Eigen::Index>(B), static_cast<Eigen::Index>(p));
  ConstMapRM Kh(kh.data.data(), static_cast<Eigen::Index>(B), static_cast<Eigen::Index>(p));
  MatrixRM neg;  // (B, K) negative logits
  if (K > 0) {
    ConstMapRM N(nh.data.data(), static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(p));
    neg = (Q * N.transpose()) / temperature;
  }

  double loss = 0.0;
  MatrixRM dqh;
  if (dq) dqh = MatrixRM::Zero(static_cast<Eigen::Index>(B), static_cast<Eigen::Index>(p));
  for (std::size_t i = 0; i < B; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const double l_pos = Q.row(ii).dot(Kh.row(ii)) / temperature;
    double m = l_pos;
    for (std::size_t j = 0; j < K; ++j) m = std::max(m, neg(ii, static_cast<Eigen::Index>(j)));
    double z = std::exp(l_pos - m);
    for (std::size_t j = 0; j < K; ++j) z += std::exp(neg(ii, static_cast<Eigen::Index>(j)) - m);
    const double lse = m + std::log(z);
    loss += lse - l_pos;

    if (dq) {
      const double p_pos = std::exp(l_pos - lse);
      dqh.row(ii) = (p_pos - 1.0) * Kh.row(ii);
      if (K > 0) {
        ConstMapRM N(nh.data.data(), static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(p));
        for (std::size_t j = 0; j < K; ++j) {
          const auto jj = static_cast<Eigen::Index>(j);
          dqh.row(ii) += std::exp(neg(ii, jj) - lse) * N.row(jj);
        }
      }
      dqh.row(ii) /= temperature * static_cast<double>(B);
    }
  }
  loss /= static_cast<double>(B);

  if (dq) {
    *dq = Tensor(q.shape);
    // Chain through the normalization: d/dq = (I - qh qh^T)/|q| applied to dqh.
    for (std::size_t i = 0; i < B; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      const double dot = Q.row(ii).dot(dqh.row(ii));
      for (std::size_t j = 0; j < p; ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        dq->data[i * p + j] = (dqh(ii, jj) - dot * Q(ii, jj)) / q_norms[i];
      }
    }
  }
  return loss;
}

// One symmetric half of the BYOL objective: mean_i (2 - 2 cos(pred_i, tgt_i)).
// Writes d/d(pred) when dpred is non-null; the target side takes no gradient.
double byol_half(const Tensor& pred, const Tensor& tgt, Tensor* dpred) {
  check_embedding_pair(pred, tgt);
  const std::size_t B = pred.dim(0), p = pred.dim(1);
  std::vector<double> pred_norms;
  const Tensor ph = normalize_rows_impl(pred, &pred_norms);
  const Tensor th = normalize_rows_impl(tgt, nullptr);
  double loss = 0.0;
  if (dpred) *dpred = Tensor(pred.shape);
  for (std::size_t i = 0; i < B; ++i) {
    double cos = 0.0;
    for (std::size_t j = 0; j < p; ++j) cos += ph.data[i * p + j] * th.data[i * p + j];
    loss += 2.0 - 2.0 * cos;
    if (dpred) {
      const double scale = -2.0 / (static_cast<double>(B) * pred_norms[i]);
      for (std::size_t j = 0; j < p; ++j)
        dpred->data[i * p + j] =
            scale * (th.data[i * p + j] - cos * ph.data[i * p + j]);
    }
  }
  return loss / static_cast<double>(B);
}

// Forward through encoder + projector. Acts pointers may be null (inference/
// key side).
Tensor project_forward(const ParamSet& params, const EncoderConfig& config, const Tensor& batch,
                       BnMode mode, EncoderActs* enc_acts, MlpActs* mlp_acts) {
  Tensor feat = encoder_forward(params, config, "encoder", batch, mode, enc_acts);
  return mlp_forward(params, "projector", feat, mlp_acts);
}

std::size_t queue_rows(const MoCoState& state) { return state.queue.dim(0); }

}  // namespace

const char* model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::moco:
      return "moco";
    case ModelKind::byol:
      return "byol";
  }
  throw InputError("unknown model kind");
}

ModelKind parse_model_kind(const std::string& name) {
  if (name == "moco") return ModelKind::moco;
  if (name == "byol") return ModelKind::byol;
  throw ConfigError("unknown model kind '" + name + "' (expected moco or byol)");
}

void SslHyper::validate() const {
  if (!(lr > 0.0)) throw ConfigError("ssl: lr must be positive");
  if (!(min_lr >= 0.0) || min_lr > lr) throw ConfigError("ssl: min_lr must lie in [0, lr]");
  if (!(weight_decay >= 0.0)) throw ConfigError("ssl: weight_decay must be non-negative");
  if (batch_size == 0) throw ConfigError("ssl: batch_size must be positive");
  if (!(temperature > 0.0)) throw ConfigError("ssl: temperature must be positive");
  check_unit_fraction(momentum, "ssl: momentum");
  check_unit_fraction(ema_rate, "ssl: ema_rate");
  augment.validate();
}

void MoCoState::validate() const {
  encoder.validate();
  head.validate();
  ParamSet::check_compatible(query, key, "moco query/key");
  if (!(temperature > 0.0)) throw ConfigError("moco: temperature must be positive");
  check_unit_fraction(momentum, "moco: momentum");
  if (queue.rank() != 2 || queue.dim(1) != head.output_dim)
    throw InputError("moco: queue must be (K, output_dim)");
  const std::size_t K = queue.dim(0), p = queue.dim(1);
  if (K == 0) {
    if (queue_ptr != 0) throw InputError("moco: queue pointer out of range");
    return;
  }
  if (queue_ptr >= K) throw InputError("moco: queue pointer out of range");
  for (std::size_t i = 0; i < K; ++i) {
    double ss = 0.0;
    for (std::size_t j = 0; j < p; ++j) ss += queue.data[i * p + j] * queue.data[i * p + j];
    if (std::abs(std::sqrt(ss) - 1.0) > 1e-6)
      throw NumericError("moco: queue row is not unit length");
  }
}

MoCoState moco_init(const EncoderConfig& encoder, const HeadConfig& head, const SslHyper& hyper,
                    std::uint64_t seed) {
  encoder.validate();
  head.validate();
  hyper.validate();
  MoCoState state;
  state.encoder = encoder;
  state.head = head;
  state.temperature = hyper.temperature;
  state.momentum = hyper.momentum;

  Rng net_rng(derive_seed(seed, 0));
  register_encoder(state.query, encoder, "encoder", net_rng);
  register_mlp(state.query, "projector", encoder.feature_dim, head.hidden_dim, head.output_dim,
               net_rng);
  state.key = state.query;  // key starts as an exact copy

  state.queue = Tensor({hyper.queue_size, head.output_dim});
  if (hyper.queue_size > 0) {
    Rng queue_rng(derive_seed(seed, 1));
    for (auto& v : state.queue.data) v = queue_rng.normal();
    state.queue = normalize_rows_impl(state.queue, nullptr);
  }
  state.queue_ptr = 0;
  state.validate();
  return state;
}

void ByolState::validate() const {
  encoder.validate();
  head.validate();
  check_unit_fraction(ema_rate, "byol: ema_rate");
  if (!online.has("predictor.fc1.weight"))
    throw InputError("byol: online network is missing the predictor");
  if (target.has("predictor.fc1.weight"))
    throw InputError("byol: target network must not contain a predictor");
  // The target must mirror the online net minus the predictor, same order.
  std::size_t ti = 0;
  const auto& tgt = target.entries();
  for (const auto& e : online.entries()) {
    if (e.name.rfind("predictor.", 0) == 0) continue;
    if (ti >= tgt.size() || tgt[ti].name != e.name || tgt[ti].kind != e.kind ||
        tgt[ti].value.shape != e.value.shape)
      throw InputError("byol: target entries do not mirror the online network");
    ++ti;
  }
  if (ti != tgt.size()) throw InputError("byol: target has entries the online network lacks");
}

ByolState byol_init(const EncoderConfig& encoder, const HeadConfig& head, const SslHyper& hyper,
                    std::uint64_t seed) {
  encoder.validate();
  head.validate();
  hyper.validate();
  ByolState state;
  state.encoder = encoder;
  state.head = head;
  state.ema_rate = hyper.ema_rate;

  Rng net_rng(derive_seed(seed, 0));
  register_encoder(state.online, encoder, "encoder", net_rng);
  register_mlp(state.online, "projector", encoder.feature_dim, head.hidden_dim, head.output_dim,
               net_rng);
  register_mlp(state.online, "predictor", head.output_dim, head.predictor_hidden_dim,
               head.output_dim, net_rng);
  for (const auto& e : state.online.entries()) {
    if (e.name.rfind("predictor.", 0) == 0) continue;
    state.target.add(e.name, e.kind, e.value);
  }
  state.validate();
  return state;
}

double ntxent_loss(const Tensor& q, const Tensor& k_pos, const Tensor& queue, double temperature) {
  return ntxent_impl(q, k_pos, queue, temperature, nullptr);
}

double ntxent_loss_grad(const Tensor& q, const Tensor& k_pos, const Tensor& queue,
                        double temperature, Tensor* dq) {
  if (dq == nullptr) throw InputError("ntxent_loss_grad: dq must be non-null");
  return ntxent_impl(q, k_pos, queue, temperature, dq);
}

double byol_loss(const Tensor& p1, const Tensor& p2, const Tensor& z1t, const Tensor& z2t) {
  return byol_half(p1, z2t, nullptr) + byol_half(p2, z1t, nullptr);
}

double byol_loss_grad(const Tensor& p1, const Tensor& p2, const Tensor& z1t, const Tensor& z2t,
                      Tensor* dp1, Tensor* dp2) {
  if (dp1 == nullptr || dp2 == nullptr)
    throw InputError("byol_loss_grad: dp1/dp2 must be non-null");
  return byol_half(p1, z2t, dp1) + byol_half(p2, z1t, dp2);
}

void momentum_update(ParamSet& key, const ParamSet& query, double m) {
  check_unit_fraction(m, "momentum update: coefficient");
  ParamSet::check_compatible(key, query, "momentum update");
  const auto& src = query.entries();
  auto& dst = key.entries();
  for (std::size_t i = 0; i < dst.size(); ++i) mix_tensor(dst[i].value, src[i].value, m);
}

void ema_update(ParamSet& target, const ParamSet& online, double ema_rate) {
  check_unit_fraction(ema_rate, "ema update: rate");
  for (auto& e : target.entries()) {
    if (!online.has(e.name)) throw InputError("ema update: online network lacks " + e.name);
    mix_tensor(e.value, online.at(e.name), ema_rate);
  }
}

void enqueue(Tensor& queue, std::size_t& queue_ptr, const Tensor& new_keys) {
  require_rows(queue, "enqueue queue");
  require_rows(new_keys, "enqueue keys");
  const std::size_t K = queue.dim(0), p = queue.dim(1);
  if (K == 0) return;  // negative-free variant: nothing to store
  const std::size_t B = new_keys.dim(0);
  if (B == 0) throw InputError("enqueue: empty key batch");
  if (new_keys.dim(1) != p) throw InputError("enqueue: key dim does not match the queue");
  if (K % B != 0)
    throw ConfigError("enqueue: queue size must be a multiple of the batch size");
  if (queue_ptr >= K || queue_ptr % B != 0)
    throw InputError("enqueue: queue pointer misaligned");
  const Tensor normed = normalize_rows_impl(new_keys, nullptr);
  std::copy(normed.data.begin(), normed.data.end(), queue.data.begin() + queue_ptr * p);
  queue_ptr = (queue_ptr + B) % K;
}

StepResult moco_train_step(MoCoState& state, AdamW& optim,
                           const std::vector<const Snippet*>& batch, const AugmentPolicy& policy,
                           std::uint64_t seed) {
  Tensor batch1, batch2;
  make_view_tensors(batch, policy, seed, &batch1, &batch2);

  EncoderActs enc_acts;
  MlpActs mlp_acts;
  Tensor q = project_forward(state.query, state.encoder, batch1, BnMode::train, &enc_acts,
                             &mlp_acts);
  // The key side never trains, so its pass must not stage running-stat
  // updates; frozen batch statistics match the training-mode normalization.
  Tensor k = project_forward(state.key, state.encoder, batch2, BnMode::train_frozen_stats,
                             nullptr, nullptr);

  Tensor dq;
  const double loss = ntxent_loss_grad(q, k, state.queue, state.temperature, &dq);
  if (!std::isfinite(loss)) throw NumericError("moco: non-finite loss");

  Grads grads;
  Tensor dfeat = mlp_backward(state.query, "projector", mlp_acts, dq, grads);
  encoder_backward(state.query, state.encoder, "encoder", enc_acts, dfeat, grads);
  encoder_commit_bn(state.query, state.encoder, "encoder", enc_acts);
  const double lr = optim.step(state.query, grads);
  momentum_update(state.key, state.query, state.momentum);
  if (queue_rows(state) > 0) enqueue(state.queue, state.queue_ptr, k);
  return {loss, lr};
}

StepResult byol_train_step(ByolState& state, AdamW& optim,
                           const std::vector<const Snippet*>& batch, const AugmentPolicy& policy,
                           std::uint64_t seed) {
  Tensor batch1, batch2;
  make_view_tensors(batch, policy, seed, &batch1, &batch2);

  EncoderActs enc1, enc2;
  MlpActs proj1, proj2, pred1, pred2;
  Tensor z1 = project_forward(state.online, state.encoder, batch1, BnMode::train, &enc1, &proj1);
  Tensor p1 = mlp_forward(state.online, "predictor", z1, &pred1);
  Tensor z2 = project_forward(state.online, state.encoder, batch2, BnMode::train, &enc2, &proj2);
  Tensor p2 = mlp_forward(state.online, "predictor", z2, &pred2);

  Tensor z1t = project_forward(state.target, state.encoder, batch1, BnMode::train_frozen_stats,
                               nullptr, nullptr);
  Tensor z2t = project_forward(state.target, state.encoder, batch2, BnMode::train_frozen_stats,
                               nullptr, nullptr);

  Tensor dp1, dp2;
  const double loss = byol_loss_grad(p1, p2, z1t, z2t, &dp1, &dp2);
  if (!std::isfinite(loss)) throw NumericError("byol: non-finite loss");

  Grads grads;
  Tensor dz1 = mlp_backward(state.online, "predictor", pred1, dp1, grads);
  Tensor df1 = mlp_backward(state.online, "projector", proj1, dz1, grads);
  encoder_backward(state.online, state.encoder, "encoder", enc1, df1, grads);
  Tensor dz2 = mlp_backward(state.online, "predictor", pred2, dp2, grads);
  Tensor df2 = mlp_backward(state.online, "projector", proj2, dz2, grads);
  encoder_backward(state.online, state.encoder, "encoder", enc2, df2, grads);

  // Running statistics see the two view batches in order, as if they had been
  // two sequential training passes.
  encoder_commit_bn(state.online, state.encoder, "encoder", enc1);
  encoder_commit_bn(state.online, state.encoder, "encoder", enc2);
  const double lr = optim.step(state.online, grads);
  ema_update(state.target, state.online, state.ema_rate);
  return {loss, lr};
}

namespace {

// Shared chunked-validation driver: both branches run with frozen batch
// statistics, view seeds depend only on the item index, partial final chunk
// allowed, size-weighted mean.
template <typename LossFn>
double validation_loss_impl(const SnippetDataset& val, const SslHyper& hyper, std::uint64_t seed,
                            LossFn&& chunk_loss) {
  const std::size_t n = val.size();
  if (n == 0) throw InputError("validation loss: empty dataset");
  double total = 0.0;
  for (std::size_t start = 0; start < n; start += hyper.batch_size) {
    const std::size_t stop = std::min(n, start + hyper.batch_size);
    std::vector<Snippet> v1, v2;
    v1.reserve(stop - start);
    v2.reserve(stop - start);
    for (std::size_t i = start; i < stop; ++i) {
      auto views = two_views(val.snippets[i], hyper.augment, derive_seed(seed, i));
      v1.push_back(std::move(views.first));
      v2.push_back(std::move(views.second));
    }
    const Tensor batch1 = views_to_tensor(v1);
    const Tensor batch2 = views_to_tensor(v2);
    total += chunk_loss(batch1, batch2) * static_cast<double>(stop - start);
  }
  return total / static_cast<double>(n);
}

}  // namespace

double moco_validation_loss(const MoCoState& state, const SnippetDataset& val,
                            const SslHyper& hyper, std::uint64_t seed) {
  hyper.validate();
  return validation_loss_impl(val, hyper, seed, [&](const Tensor& b1, const Tensor& b2) {
    Tensor q = project_forward(state.query, state.encoder, b1, BnMode::train_frozen_stats,
                               nullptr, nullptr);
    Tensor k = project_forward(state.key, state.encoder, b2, BnMode::train_frozen_stats, nullptr,
                               nullptr);
    return ntxent_loss(q, k, state.queue, state.temperature);
  });
}

double byol_validation_loss(const ByolState& state, const SnippetDataset& val,
                            const SslHyper& hyper, std::uint64_t seed) {
  hyper.validate();
  return validation_loss_impl(val, hyper, seed, [&](const Tensor& b1, const Tensor& b2) {
    Tensor z1 = project_forward(state.online, state.encoder, b1, BnMode::train_frozen_stats,
                                nullptr, nullptr);
    Tensor p1 = mlp_forward(state.online, "predictor", z1, nullptr);
    Tensor z2 = project_forward(state.online, state.encoder, b2, BnMode::train_frozen_stats,
                                nullptr, nullptr);
    Tensor p2 = mlp_forward(state.online, "predictor", z2, nullptr);
    Tensor z1t = project_forward(state.target, state.encoder, b1, BnMode::train_frozen_stats,
                                 nullptr, nullptr);
    Tensor z2t = project_forward(state.target, state.encoder, b2, BnMode::train_frozen_stats,
                                 nullptr, nullptr);
    return byol_loss(p1, p2, z1t, z2t);
  });
}

namespace {

// Epoch/step scaffolding shared by both pretrainers. `train_step` runs one
// optimizer step on a batch of snippet pointers; `val_loss` scores the
// held-out set on the current state.
template <typename StepFn, typename ValFn>
PretrainResult pretrain_impl(const SnippetDataset& pretrain_set, const SslHyper& hyper,
                             std::uint64_t seed, std::size_t start_epoch, std::size_t end_epoch,
                             const std::function<void(const PretrainLogRow&)>& after_epoch,
                             StepFn&& train_step, ValFn&& val_loss) {
  hyper.validate();
  const std::size_t n = pretrain_set.size();
  if (n < hyper.batch_size)
    throw ConfigError("pretrain: dataset smaller than one batch");
  const std::size_t steps_per_epoch = n / hyper.batch_size;

  PretrainResult result;
  for (std::size_t epoch = start_epoch; epoch < end_epoch; ++epoch) {
    ShardSpec spec;
    spec.epoch_seed = derive_seed(seed, kStreamEpoch, epoch);
    const std::vector<std::size_t> order = shard_indices(n, spec);
    const std::uint64_t epoch_step_seed = derive_seed(seed, kStreamStep, epoch);

    double loss_sum = 0.0;
    double last_lr = 0.0;
    try {
      for (std::size_t b = 0; b < steps_per_epoch; ++b) {
        std::vector<const Snippet*> batch;
        batch.reserve(hyper.batch_size);
        for (std::size_t i = 0; i < hyper.batch_size; ++i)
          batch.push_back(&pretrain_set.snippets[order[b * hyper.batch_size + i]]);
        const StepResult step = train_step(batch, derive_seed(epoch_step_seed, b));
        loss_sum += step.loss;
        last_lr = step.lr;
      }
      PretrainLogRow row;
      row.epoch = epoch;
      row.train_loss = loss_sum / static_cast<double>(steps_per_epoch);
      row.val_loss = val_loss();
      row.lr = last_lr;
      result.log.push_back(row);
      if (after_epoch) after_epoch(row);
    } catch (const NumericError&) {
      result.aborted = true;
      return result;
    }
  }
  return result;
}

}  // namespace

PretrainResult pretrain_moco(MoCoState& state, AdamW& optim, const SnippetDataset& pretrain_set,
                             const SnippetDataset& val_set, const SslHyper& hyper,
                             std::uint64_t seed, std::size_t start_epoch, std::size_t end_epoch,
                             const std::function<void(const PretrainLogRow&)>& after_epoch) {
  state.validate();
  if (queue_rows(state) > 0 && queue_rows(state) % hyper.batch_size != 0)
    throw ConfigError("pretrain: queue size must be a multiple of the batch size");
  return pretrain_impl(
      pretrain_set, hyper, seed, start_epoch, end_epoch, after_epoch,
      [&](const std::vector<const Snippet*>& batch, std::uint64_t step_seed) {
        return moco_train_step(state, optim, batch, hyper.augment, step_seed);
      },
      [&] { return moco_validation_loss(state, val_set, hyper, derive_seed(seed, kStreamVal)); });
}

PretrainResult pretrain_byol(ByolState& state, AdamW& optim, const SnippetDataset& pretrain_set,
                             const SnippetDataset& val_set, const SslHyper& hyper,
                             std::uint64_t seed, std::size_t start_epoch, std::size_t end_epoch,
                             const std::function<void(const PretrainLogRow&)>& after_epoch) {
  state.validate();
  return pretrain_impl(
      pretrain_set, hyper, seed, start_epoch, end_epoch, after_epoch,
      [&](const std::vector<const Snippet*>& batch, std::uint64_t step_seed) {
        return byol_train_step(state, optim, batch, hyper.augment, step_seed);
      },
      [&] { return byol_validation_loss(state, val_set, hyper, derive_seed(seed, kStreamVal)); });
}

Tensor normalize_rows(const Tensor& x) { return normalize_rows_impl(x, nullptr); }

}  // namespace sonarssl
