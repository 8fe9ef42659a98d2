#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sonarssl/checkpoint.hpp"
#include "sonarssl/dataset.hpp"
#include "sonarssl/metrics.hpp"
#include "sonarssl/model.hpp"
#include "sonarssl/params.hpp"

namespace sonarssl {

// Linear-probe / supervised-baseline training knobs. Early stopping follows
// the validation loss: training stops once it has not strictly decreased for
// `patience` consecutive epochs, and the best-validation parameters win.
struct ProbeConfig {
  double label_fraction = 1.0;
  double decision_threshold = 0.5;
  std::size_t patience = 10;
  std::size_t max_epochs = 200;
  double lr = 0.003;
  double weight_decay = 0.001;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;

  void validate() const;
};

struct ProbeLogRow {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
};

// Evaluation-mode encoder features of every snippet, in dataset order: (N, d).
Tensor extract_features(const ParamSet& params, const EncoderConfig& config,
                        const SnippetDataset& data, std::size_t batch_size);

struct ProbeResult {
  ParamSet head;  // "probe.weight" / "probe.bias" from the best epoch
  std::vector<ProbeLogRow> log;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
};

// Trains a single-logit linear head on frozen backbone features under BCE,
// with flip-only augmentation on the training inputs. The backbone is never
// written to.
ProbeResult train_probe(const ParamSet& backbone, const EncoderConfig& encoder,
                        const SnippetDataset& train, const SnippetDataset& validation,
                        const ProbeConfig& config);

struct SupervisedResult {
  SupervisedModel model;  // best-epoch parameters
  std::vector<ProbeLogRow> log;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
};

// End-to-end training of the same encoder topology plus a linear classifier;
// identical augmentation and early-stopping rules as train_probe.
SupervisedResult train_supervised_baseline(const SnippetDataset& train,
                                           const SnippetDataset& validation,
                                           const EncoderConfig& encoder,
                                           const ProbeConfig& config);

// Frozen backbone plus trained probe head, bundled for prediction.
struct LinearProbeModel {
  EncoderConfig encoder;
  ParamSet backbone;
  ParamSet head;
};

std::vector<double> predict_probabilities(const LinearProbeModel& model,
                                          const SnippetDataset& data, std::size_t batch_size);
std::vector<double> predict_probabilities(const SupervisedModel& model,
                                          const SnippetDataset& data, std::size_t batch_size);
double predict(const LinearProbeModel& model, const Snippet& snippet);
double predict(const SupervisedModel& model, const Snippet& snippet);

MetricsReport evaluate_model(const LinearProbeModel& model, const SnippetDataset& test,
                             const ProbeConfig& config, const std::string& model_id);
MetricsReport evaluate_model(const SupervisedModel& model, const SnippetDataset& test,
                             const ProbeConfig& config, const std::string& model_id);

}  // namespace sonarssl
