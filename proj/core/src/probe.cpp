#include "sonarssl/probe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sonarssl/augment.hpp"
#include "sonarssl/error.hpp"
#include "sonarssl/layers.hpp"
#include "sonarssl/optim.hpp"
#include "sonarssl/rng.hpp"

namespace sonarssl {

namespace {

constexpr std::uint64_t kStreamEpoch = 1;
constexpr std::uint64_t kStreamAugment = 2;

void check_labeled(const SnippetDataset& data, const char* what) {
  if (data.size() == 0) throw InputError(std::string(what) + ": empty dataset");
  for (const Snippet& s : data.snippets)
    if (!s.label.has_value()) throw InputError(std::string(what) + ": unlabeled snippet");
}

std::vector<std::uint8_t> labels_of(const SnippetDataset& data) {
  std::vector<std::uint8_t> y;
  y.reserve(data.size());
  for (const Snippet& s : data.snippets) y.push_back(*s.label);
  return y;
}

// (B,1) logits -> probabilities.
std::vector<double> logits_to_probs(const Tensor& logits) {
  std::vector<double> p(logits.dim(0));
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = logistic(logits.data[i]);
  return p;
}

// d(mean BCE)/d(logit): (p - y) / B, the standard stable fused form.
Tensor bce_logit_grad(const std::vector<double>& probs, const std::vector<std::uint8_t>& y) {
  Tensor d({probs.size(), 1});
  for (std::size_t i = 0; i < probs.size(); ++i)
    d.data[i] = (probs[i] - static_cast<double>(y[i])) / static_cast<double>(probs.size());
  return d;
}

// Early-stopping bookkeeping shared by probe and baseline training.
struct BestTracker {
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;
  std::size_t since_best = 0;

  // Returns true when this epoch improved on the best validation loss.
  bool update(double val_loss, std::size_t epoch) {
    if (val_loss < best) {
      best = val_loss;
      best_epoch = epoch;
      since_best = 0;
      return true;
    }
    ++since_best;
    return false;
  }
};

}  // namespace

void ProbeConfig::validate() const {
  if (!(label_fraction > 0.0 && label_fraction <= 1.0))
    throw ConfigError("probe: label_fraction must lie in (0, 1]");
  if (!(decision_threshold > 0.0 && decision_threshold < 1.0))
    throw ConfigError("probe: decision_threshold must lie in (0, 1)");
  if (patience == 0) throw ConfigError("probe: patience must be >= 1");
  if (max_epochs == 0) throw ConfigError("probe: max_epochs must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("probe: lr must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("probe: weight_decay must be >= 0");
  if (batch_size == 0) throw ConfigError("probe: batch_size must be >= 1");
}

Tensor extract_features(const ParamSet& params, const EncoderConfig& config,
                        const SnippetDataset& data, std::size_t batch_size) {
  if (data.size() == 0) throw InputError("extract_features: empty dataset");
  if (batch_size == 0) throw ConfigError("extract_features: batch_size must be >= 1");
  Tensor out({data.size(), config.feature_dim});
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    const std::size_t stop = std::min(data.size(), start + batch_size);
    std::vector<const Snippet*> batch;
    batch.reserve(stop - start);
    for (std::size_t i = start; i < stop; ++i) batch.push_back(&data.snippets[i]);
    const Tensor feats = encoder_forward(params, config, "encoder", batch_to_tensor(batch),
                                         BnMode::eval, nullptr);
    std::copy(feats.data.begin(), feats.data.end(),
              out.data.begin() + start * config.feature_dim);
  }
  return out;
}

ProbeResult train_probe(const ParamSet& backbone, const EncoderConfig& encoder,
                        const SnippetDataset& train, const SnippetDataset& validation,
                        const ProbeConfig& config) {
  config.validate();
  encoder.validate();
  check_labeled(train, "train_probe");
  check_labeled(validation, "train_probe validation");
  const std::size_t n = train.size();
  const std::size_t d = encoder.feature_dim;

  // The backbone is frozen, so each sample has exactly two possible feature
  // vectors (original and flipped); precompute both and let the per-epoch
  // augmentation coin pick between them.
  const Tensor feats_orig = extract_features(backbone, encoder, train, config.batch_size);
  SnippetDataset flipped = train;
  for (Snippet& s : flipped.snippets) s = hflip(s);
  const Tensor feats_flip = extract_features(backbone, encoder, flipped, config.batch_size);
  const Tensor val_feats = extract_features(backbone, encoder, validation, config.batch_size);
  const std::vector<std::uint8_t> y_train = labels_of(train);
  const std::vector<std::uint8_t> y_val = labels_of(validation);

  Rng init_rng(derive_seed(config.seed, 0));
  ParamSet head;
  register_linear(head, "probe", d, 1, init_rng);

  const std::size_t steps_per_epoch = (n + config.batch_size - 1) / config.batch_size;
  OptimConfig optim_config;
  optim_config.base_lr = config.lr;
  optim_config.weight_decay = config.weight_decay;
  optim_config.total_steps = config.max_epochs * steps_per_epoch;
  AdamW optim(head, optim_config);

  ProbeResult result;
  ParamSet best_head = head;
  BestTracker tracker;
  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    ShardSpec spec;
    spec.epoch_seed = derive_seed(config.seed, kStreamEpoch, epoch);
    const std::vector<std::size_t> order = shard_indices(n, spec);
    const std::uint64_t aug_seed = derive_seed(config.seed, kStreamAugment, epoch);

    double loss_sum = 0.0;
    double last_lr = 0.0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t stop = std::min(n, start + config.batch_size);
      Tensor x({stop - start, d});
      std::vector<std::uint8_t> y(stop - start);
      for (std::size_t b = 0; b < stop - start; ++b) {
        const std::size_t idx = order[start + b];
        // Same coin probe_augment would flip for this sample.
        const bool flip = Rng(derive_seed(aug_seed, idx)).bernoulli(0.5);
        const Tensor& src = flip ? feats_flip : feats_orig;
        std::copy_n(src.data.begin() + idx * d, d, x.data.begin() + b * d);
        y[b] = y_train[idx];
      }
      LinearCache cache;
      const Tensor logits = linear_forward(head, "probe", x, &cache);
      const std::vector<double> probs = logits_to_probs(logits);
      loss_sum += bce_loss(probs, y) * static_cast<double>(stop - start);
      Grads grads;
      linear_backward(head, "probe", cache, bce_logit_grad(probs, y), grads);
      last_lr = optim.step(head, grads);
    }

    const Tensor val_logits = linear_forward(head, "probe", val_feats, nullptr);
    const double val_loss = bce_loss(logits_to_probs(val_logits), y_val);
    result.log.push_back(
        {epoch, loss_sum / static_cast<double>(n), val_loss, last_lr});
    if (tracker.update(val_loss, epoch)) best_head = head;
    if (tracker.since_best >= config.patience) break;
  }

  result.head = std::move(best_head);
  result.best_epoch = tracker.best_epoch;
  result.best_val_loss = tracker.best;
  return result;
}

SupervisedResult train_supervised_baseline(const SnippetDataset& train,
                                           const SnippetDataset& validation,
                                           const EncoderConfig& encoder,
                                           const ProbeConfig& config) {
  config.validate();
  encoder.validate();
  check_labeled(train, "train_supervised_baseline");
  check_labeled(validation, "train_supervised_baseline validation");
  const std::size_t n = train.size();

  Rng init_rng(derive_seed(config.seed, 0));
  ParamSet params;
  register_encoder(params, encoder, "encoder", init_rng);
  register_linear(params, "classifier", encoder.feature_dim, 1, init_rng);

  const std::size_t steps_per_epoch = (n + config.batch_size - 1) / config.batch_size;
  OptimConfig optim_config;
  optim_config.base_lr = config.lr;
  optim_config.weight_decay = config.weight_decay;
  optim_config.total_steps = config.max_epochs * steps_per_epoch;
  AdamW optim(params, optim_config);

  const std::vector<std::uint8_t> y_val = labels_of(validation);

  SupervisedResult result;
  ParamSet best_params = params;
  BestTracker tracker;
  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    ShardSpec spec;
    spec.epoch_seed = derive_seed(config.seed, kStreamEpoch, epoch);
    const std::vector<std::size_t> order = shard_indices(n, spec);
    const std::uint64_t aug_seed = derive_seed(config.seed, kStreamAugment, epoch);

    double loss_sum = 0.0;
    double last_lr = 0.0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t stop = std::min(n, start + config.batch_size);
      std::vector<Snippet> views;
      std::vector<std::uint8_t> y(stop - start);
      views.reserve(stop - start);
      for (std::size_t b = 0; b < stop - start; ++b) {
        const std::size_t idx = order[start + b];
        views.push_back(probe_augment(train.snippets[idx], derive_seed(aug_seed, idx)));
        y[b] = *train.snippets[idx].label;
      }
      std::vector<const Snippet*> ptrs;
      ptrs.reserve(views.size());
      for (const Snippet& v : views) ptrs.push_back(&v);

      EncoderActs acts;
      LinearCache cache;
      const Tensor feats = encoder_forward(params, encoder, "encoder", batch_to_tensor(ptrs),
                                           BnMode::train, &acts);
      const Tensor logits = linear_forward(params, "classifier", feats, &cache);
      const std::vector<double> probs = logits_to_probs(logits);
      loss_sum += bce_loss(probs, y) * static_cast<double>(stop - start);

      Grads grads;
      const Tensor dfeat =
          linear_backward(params, "classifier", cache, bce_logit_grad(probs, y), grads);
      encoder_backward(params, encoder, "encoder", acts, dfeat, grads);
      encoder_commit_bn(params, encoder, "encoder", acts);
      last_lr = optim.step(params, grads);
    }

    const Tensor val_feats = extract_features(params, encoder, validation, config.batch_size);
    const Tensor val_logits = linear_forward(params, "classifier", val_feats, nullptr);
    const double val_loss = bce_loss(logits_to_probs(val_logits), y_val);
    result.log.push_back(
        {epoch, loss_sum / static_cast<double>(n), val_loss, last_lr});
    if (tracker.update(val_loss, epoch)) best_params = params;
    if (tracker.since_best >= config.patience) break;
  }

  result.model.encoder = encoder;
  result.model.params = std::move(best_params);
  result.best_epoch = tracker.best_epoch;
  result.best_val_loss = tracker.best;
  return result;
}

std::vector<double> predict_probabilities(const LinearProbeModel& model,
                                          const SnippetDataset& data, std::size_t batch_size) {
  const Tensor feats = extract_features(model.backbone, model.encoder, data, batch_size);
  return logits_to_probs(linear_forward(model.head, "probe", feats, nullptr));
}

std::vector<double> predict_probabilities(const SupervisedModel& model,
                                          const SnippetDataset& data, std::size_t batch_size) {
  const Tensor feats = extract_features(model.params, model.encoder, data, batch_size);
  return logits_to_probs(linear_forward(model.params, "classifier", feats, nullptr));
}

namespace {

template <typename Model>
double predict_one(const Model& model, const Snippet& snippet) {
  SnippetDataset single;
  single.split_tag = SplitTag::test;
  single.metadata.snippet_size = snippet.size;
  single.snippets.push_back(snippet);
  single.snippets.back().label.reset();
  return predict_probabilities(model, single, 1)[0];
}

}  // namespace

double predict(const LinearProbeModel& model, const Snippet& snippet) {
  return predict_one(model, snippet);
}

double predict(const SupervisedModel& model, const Snippet& snippet) {
  return predict_one(model, snippet);
}

namespace {

template <typename Model>
MetricsReport evaluate_impl(const Model& model, const SnippetDataset& test,
                            const ProbeConfig& config, const std::string& model_id) {
  check_labeled(test, "evaluate_model");
  const std::vector<double> probs = predict_probabilities(model, test, config.batch_size);
  return evaluate_scores(probs, labels_of(test), config.decision_threshold, model_id,
                         config.label_fraction);
}

}  // namespace

MetricsReport evaluate_model(const LinearProbeModel& model, const SnippetDataset& test,
                             const ProbeConfig& config, const std::string& model_id) {
  return evaluate_impl(model, test, config, model_id);
}

MetricsReport evaluate_model(const SupervisedModel& model, const SnippetDataset& test,
                             const ProbeConfig& config, const std::string& model_id) {
  return evaluate_impl(model, test, config, model_id);
}

}  // namespace sonarssl
