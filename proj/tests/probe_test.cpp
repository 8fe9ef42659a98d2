#include <cmath>
#include <vector>

#include "doctest.h"
#include "sonarssl/probe.hpp"
#include "sonarssl/rng.hpp"
#include "testutil.hpp"

using namespace sonarssl;

namespace {

EncoderConfig tiny_encoder() {
  EncoderConfig cfg;
  cfg.stage_widths = {8};
  cfg.blocks_per_stage = {1};
  cfg.feature_dim = 8;
  cfg.input_size = 16;
  cfg.stem_stride = 2;
  return cfg;
}

ProbeConfig fast_probe() {
  ProbeConfig pc;
  pc.max_epochs = 40;
  pc.patience = 5;
  pc.batch_size = 16;
  pc.lr = 0.01;
  pc.seed = 11;
  return pc;
}

}  // namespace

TEST_CASE("extract_features: shape, order, and batch-size invariance") {
  Rng rng(171);
  const SnippetDataset data = testutil::balanced_dataset(10, 16, SplitTag::test, rng);
  const EncoderConfig cfg = tiny_encoder();
  const ParamSet backbone = init_params(cfg, 173);

  const Tensor a = extract_features(backbone, cfg, data, 4);
  REQUIRE(a.shape == std::vector<std::size_t>{20, 8});
  const Tensor b = extract_features(backbone, cfg, data, 7);
  CHECK(testutil::max_abs_diff(a.data, b.data) == 0.0);  // eval mode is per-sample

  SnippetDataset empty;
  CHECK_THROWS_AS(extract_features(backbone, cfg, empty, 4), InputError);
  CHECK_THROWS_AS(extract_features(backbone, cfg, data, 0), ConfigError);
}

TEST_CASE("train_probe never writes to the backbone") {
  Rng rng(175);
  const SnippetDataset train = testutil::balanced_dataset(12, 16, SplitTag::train, rng);
  const SnippetDataset val = testutil::balanced_dataset(4, 16, SplitTag::validation, rng);
  const EncoderConfig cfg = tiny_encoder();
  const ParamSet backbone = init_params(cfg, 177);

  const auto weights_before = backbone.flatten(ParamKind::weight);
  const auto buffers_before = backbone.flatten(ParamKind::buffer);
  const ProbeResult r = train_probe(backbone, cfg, train, val, fast_probe());
  CHECK(backbone.flatten(ParamKind::weight) == weights_before);
  CHECK(backbone.flatten(ParamKind::buffer) == buffers_before);
  CHECK(r.head.has("probe.weight"));
  CHECK(r.head.at("probe.weight").shape == std::vector<std::size_t>{1, 8});
  CHECK(r.head.has("probe.bias"));
}

TEST_CASE("probe training separates a strongly separable corpus") {
  Rng rng(179);
  const SnippetDataset train = testutil::balanced_dataset(40, 16, SplitTag::train, rng);
  const SnippetDataset val = testutil::balanced_dataset(10, 16, SplitTag::validation, rng);
  const SnippetDataset test = testutil::balanced_dataset(10, 16, SplitTag::test, rng);
  const EncoderConfig cfg = tiny_encoder();
  const ParamSet backbone = init_params(cfg, 181);

  const ProbeConfig pc = fast_probe();
  const ProbeResult r = train_probe(backbone, cfg, train, val, pc);

  LinearProbeModel model{cfg, backbone, r.head};
  const MetricsReport report = evaluate_model(model, test, pc, "probe-test");
  CHECK(report.accuracy >= 0.9);
  CHECK(report.auc >= 0.95);
  CHECK(report.counts.total() == test.size());

  // Probabilities really are probabilities.
  const std::vector<double> probs = predict_probabilities(model, test, pc.batch_size);
  REQUIRE(probs.size() == test.size());
  for (double p : probs) {
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
  }

  // Single-snippet prediction agrees with the batched path.
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(predict(model, test.snippets[i]) == doctest::Approx(probs[i]).epsilon(1e-12));
}

TEST_CASE("early stopping fires and reports the best epoch") {
  Rng rng(183);
  const SnippetDataset train = testutil::balanced_dataset(20, 16, SplitTag::train, rng);
  const SnippetDataset val = testutil::balanced_dataset(6, 16, SplitTag::validation, rng);
  const EncoderConfig cfg = tiny_encoder();
  const ParamSet backbone = init_params(cfg, 185);

  ProbeConfig pc = fast_probe();
  pc.max_epochs = 200;
  pc.patience = 3;
  const ProbeResult r = train_probe(backbone, cfg, train, val, pc);

  REQUIRE(!r.log.empty());
  CHECK(r.log.size() < 200);  // the patience rule stopped it

  double best = r.log[0].val_loss;
  std::size_t best_epoch = 0;
  for (const auto& row : r.log)
    if (row.val_loss < best) {
      best = row.val_loss;
      best_epoch = row.epoch;
    }
  CHECK(r.best_epoch == best_epoch);
  CHECK(r.best_val_loss == best);
  // The run extends exactly `patience` epochs past the best one.
  CHECK(r.log.back().epoch == best_epoch + pc.patience);
}

TEST_CASE("probe training is deterministic in the config seed") {
  Rng rng(187);
  const SnippetDataset train = testutil::balanced_dataset(10, 16, SplitTag::train, rng);
  const SnippetDataset val = testutil::balanced_dataset(4, 16, SplitTag::validation, rng);
  const EncoderConfig cfg = tiny_encoder();
  const ParamSet backbone = init_params(cfg, 189);

  ProbeConfig pc = fast_probe();
  pc.max_epochs = 5;
  const ProbeResult a = train_probe(backbone, cfg, train, val, pc);
  const ProbeResult b = train_probe(backbone, cfg, train, val, pc);
  CHECK(a.head.flatten(ParamKind::weight) == b.head.flatten(ParamKind::weight));
  REQUIRE(a.log.size() == b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    CHECK(a.log[i].train_loss == b.log[i].train_loss);
    CHECK(a.log[i].val_loss == b.log[i].val_loss);
  }

  pc.seed = 12;
  const ProbeResult c = train_probe(backbone, cfg, train, val, pc);
  CHECK(a.head.flatten(ParamKind::weight) != c.head.flatten(ParamKind::weight));
}

TEST_CASE("supervised baseline trains the encoder end to end") {
  Rng rng(191);
  const SnippetDataset train = testutil::balanced_dataset(24, 16, SplitTag::train, rng);
  const SnippetDataset val = testutil::balanced_dataset(6, 16, SplitTag::validation, rng);
  const SnippetDataset test = testutil::balanced_dataset(8, 16, SplitTag::test, rng);
  const EncoderConfig cfg = tiny_encoder();

  ProbeConfig pc = fast_probe();
  pc.max_epochs = 30;
  const SupervisedResult r = train_supervised_baseline(train, val, cfg, pc);

  CHECK(r.model.params.has("encoder.stem.weight"));
  CHECK(r.model.params.has("classifier.weight"));

  // The encoder genuinely moved away from its initialization.
  const ParamSet fresh = [&] {
    Rng init(derive_seed(pc.seed, 0));
    ParamSet p;
    register_encoder(p, cfg, "encoder", init);
    register_linear(p, "classifier", cfg.feature_dim, 1, init);
    return p;
  }();
  CHECK(r.model.params.at("encoder.stem.weight").data != fresh.at("encoder.stem.weight").data);

  const MetricsReport report = evaluate_model(r.model, test, pc, "supervised");
  CHECK(report.accuracy >= 0.9);

  const std::vector<double> probs = predict_probabilities(r.model, test, pc.batch_size);
  CHECK(predict(r.model, test.snippets[0]) == doctest::Approx(probs[0]).epsilon(1e-12));
}

TEST_CASE("probe config validation") {
  ProbeConfig pc;
  CHECK_NOTHROW(pc.validate());
  pc.label_fraction = 0.0;
  CHECK_THROWS_AS(pc.validate(), ConfigError);
  pc = ProbeConfig{};
  pc.decision_threshold = 1.0;
  CHECK_THROWS_AS(pc.validate(), ConfigError);
  pc = ProbeConfig{};
  pc.patience = 0;
  CHECK_THROWS_AS(pc.validate(), ConfigError);
  pc = ProbeConfig{};
  pc.lr = 0.0;
  CHECK_THROWS_AS(pc.validate(), ConfigError);

  // Unlabeled data is rejected up front.
  Rng rng(193);
  SnippetDataset pretrain = testutil::unlabeled_dataset(4, 16, rng);
  const SnippetDataset val = testutil::balanced_dataset(2, 16, SplitTag::validation, rng);
  const EncoderConfig cfg = tiny_encoder();
  const ParamSet backbone = init_params(cfg, 195);
  CHECK_THROWS_AS(train_probe(backbone, cfg, pretrain, val, ProbeConfig{}), InputError);
}
