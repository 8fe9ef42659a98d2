#include <cmath>
#include <cstdint>
#include <vector>

#include "doctest.h"
#include "sonarssl/ssl.hpp"
#include "testutil.hpp"

using namespace sonarssl;

namespace {

EncoderConfig tiny_encoder() {
  EncoderConfig cfg;
  cfg.stage_widths = {8};
  cfg.blocks_per_stage = {1};
  cfg.feature_dim = 8;
  cfg.input_size = 8;
  cfg.stem_stride = 2;
  return cfg;
}

HeadConfig tiny_head() {
  HeadConfig h;
  h.hidden_dim = 8;
  h.output_dim = 8;
  h.predictor_hidden_dim = 8;
  return h;
}

SslHyper tiny_hyper() {
  SslHyper h;
  h.epochs = 2;
  h.batch_size = 4;
  h.queue_size = 8;
  h.momentum = 0.9;
  h.ema_rate = 0.9;
  return h;
}

Tensor row(std::vector<double> v) {
  Tensor t({1, v.size()});
  t.data = std::move(v);
  return t;
}

Tensor rows(std::size_t n, std::size_t p, Rng& rng) {
  Tensor t({n, p});
  for (double& v : t.data) v = rng.normal();
  return t;
}

OptimConfig step_optim(double lr, std::size_t total) {
  OptimConfig cfg;
  cfg.base_lr = lr;
  cfg.min_lr = lr;  // constant schedule for unit tests
  cfg.weight_decay = 0.0;
  cfg.total_steps = total;
  return cfg;
}

double norm_gap(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("ntxent closed forms") {
  SUBCASE("lone positive, no negatives: exactly zero") {
    const Tensor q = row({3.0, 4.0});
    const Tensor k = row({-1.0, 2.0});
    CHECK(ntxent_loss(q, k, Tensor({0, 2}), 0.2) == doctest::Approx(0.0).epsilon(1e-12));
  }

  SUBCASE("aligned pair with two orthogonal negatives at t=1: ln(1 + 2/e)") {
    const Tensor q = row({2.0, 0.0, 0.0});
    const Tensor k = row({5.0, 0.0, 0.0});
    Tensor queue({2, 3});
    queue.data = {0.0, 1.0, 0.0, 0.0, 0.0, 1.0};
    const double expect = std::log(1.0 + 2.0 * std::exp(-1.0));
    CHECK(ntxent_loss(q, k, queue, 1.0) == doctest::Approx(expect).epsilon(1e-12));
  }

  SUBCASE("matches the softmax cross-entropy oracle on random batches") {
    Rng rng(61);
    for (int trial = 0; trial < 30; ++trial) {
      const std::size_t B = 1 + rng.uniform_index(6);
      const std::size_t p = 2 + rng.uniform_index(6);
      const std::size_t K = rng.uniform_index(10);
      const Tensor q = rows(B, p, rng);
      const Tensor k = rows(B, p, rng);
      const Tensor queue = K > 0 ? rows(K, p, rng) : Tensor({0, p});
      const double t = 0.05 + rng.uniform01();
      const double got = ntxent_loss(q, k, queue, t);
      const double want = testutil::ntxent_oracle(q, k, queue, t);
      CHECK(testutil::rel_err(got, want) < 1e-9);
    }
  }

  SUBCASE("input validation") {
    const Tensor q = row({1.0, 0.0});
    CHECK_THROWS_AS(ntxent_loss(q, row({1.0, 0.0}), Tensor({0, 2}), 0.0), ConfigError);
    CHECK_THROWS_AS(ntxent_loss(q, row({1.0, 0.0, 0.0}), Tensor({0, 2}), 1.0), InputError);
    CHECK_THROWS_AS(ntxent_loss(q, row({1.0, 0.0}), Tensor({2, 3}), 1.0), InputError);
    CHECK_THROWS_AS(ntxent_loss(Tensor({0, 2}), Tensor({0, 2}), Tensor({0, 2}), 1.0), InputError);
    CHECK_THROWS_AS(ntxent_loss(row({0.0, 0.0}), q, Tensor({0, 2}), 1.0), NumericError);
  }
}

TEST_CASE("ntxent gradient matches finite differences on the raw queries") {
  Rng rng(63);
  Tensor q = rows(3, 5, rng);
  const Tensor k = rows(3, 5, rng);
  const Tensor queue = rows(7, 5, rng);
  const double t = 0.3;

  Tensor dq;
  ntxent_loss_grad(q, k, queue, t, &dq);
  REQUIRE(dq.shape == q.shape);

  const double h = 1e-6;
  for (std::size_t i = 0; i < q.numel(); ++i) {
    const double keep = q.data[i];
    q.data[i] = keep + h;
    const double up = ntxent_loss(q, k, queue, t);
    q.data[i] = keep - h;
    const double dn = ntxent_loss(q, k, queue, t);
    q.data[i] = keep;
    const double fd = (up - dn) / (2.0 * h);
    CHECK(testutil::rel_err(dq.data[i], fd) < 1e-5);
  }
}

TEST_CASE("byol loss endpoints and gradient") {
  SUBCASE("aligned views: 0, orthogonal: 4, opposed: 8") {
    const Tensor a = row({2.0, 0.0});
    const Tensor b = row({0.0, 3.0});
    const Tensor na = row({-1.0, 0.0});
    CHECK(byol_loss(a, a, a, a) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(byol_loss(a, a, b, b) == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(byol_loss(a, a, na, na) == doctest::Approx(8.0).epsilon(1e-12));
  }

  SUBCASE("range [0, 8] on random batches") {
    Rng rng(65);
    for (int trial = 0; trial < 50; ++trial) {
      const Tensor p1 = rows(4, 6, rng), p2 = rows(4, 6, rng);
      const Tensor z1 = rows(4, 6, rng), z2 = rows(4, 6, rng);
      const double loss = byol_loss(p1, p2, z1, z2);
      CHECK(loss >= 0.0);
      CHECK(loss <= 8.0);
    }
  }

  SUBCASE("gradients on both predictor branches match finite differences") {
    Rng rng(67);
    Tensor p1 = rows(2, 4, rng), p2 = rows(2, 4, rng);
    const Tensor z1 = rows(2, 4, rng), z2 = rows(2, 4, rng);
    Tensor dp1, dp2;
    byol_loss_grad(p1, p2, z1, z2, &dp1, &dp2);

    const double h = 1e-6;
    for (std::size_t i = 0; i < p1.numel(); ++i) {
      double keep = p1.data[i];
      p1.data[i] = keep + h;
      const double up = byol_loss(p1, p2, z1, z2);
      p1.data[i] = keep - h;
      const double dn = byol_loss(p1, p2, z1, z2);
      p1.data[i] = keep;
      CHECK(testutil::rel_err(dp1.data[i], (up - dn) / (2.0 * h)) < 1e-5);

      keep = p2.data[i];
      p2.data[i] = keep + h;
      const double up2 = byol_loss(p1, p2, z1, z2);
      p2.data[i] = keep - h;
      const double dn2 = byol_loss(p1, p2, z1, z2);
      p2.data[i] = keep;
      CHECK(testutil::rel_err(dp2.data[i], (up2 - dn2) / (2.0 * h)) < 1e-5);
    }

    // The target side takes no gradient: moving z1/z2 changes the loss but
    // never the reported dp shapes; the API has no dz outputs at all.
    CHECK(dp1.shape == p1.shape);
    CHECK(dp2.shape == p2.shape);
  }
}

TEST_CASE("moco_init: key mirrors query, queue rows are unit length") {
  const MoCoState state = moco_init(tiny_encoder(), tiny_head(), tiny_hyper(), 71);
  CHECK(state.query.flatten(ParamKind::weight) == state.key.flatten(ParamKind::weight));
  CHECK(state.query.flatten(ParamKind::buffer) == state.key.flatten(ParamKind::buffer));
  CHECK(state.queue.shape == std::vector<std::size_t>{8, 8});
  for (std::size_t i = 0; i < 8; ++i) {
    double ss = 0.0;
    for (std::size_t j = 0; j < 8; ++j) ss += state.queue.data[i * 8 + j] * state.queue.data[i * 8 + j];
    CHECK(std::sqrt(ss) == doctest::Approx(1.0).epsilon(1e-9));
  }
  CHECK(state.queue_ptr == 0);
  CHECK(state.query.has("projector.fc1.weight"));
  CHECK_FALSE(state.query.has("predictor.fc1.weight"));
  CHECK_NOTHROW(state.validate());

  // Same seed, same state; different seed differs.
  const MoCoState again = moco_init(tiny_encoder(), tiny_head(), tiny_hyper(), 71);
  CHECK(state.query.flatten(ParamKind::weight) == again.query.flatten(ParamKind::weight));
  CHECK(state.queue.data == again.queue.data);
  const MoCoState other = moco_init(tiny_encoder(), tiny_head(), tiny_hyper(), 72);
  CHECK(state.query.flatten(ParamKind::weight) != other.query.flatten(ParamKind::weight));
}

TEST_CASE("byol_init: target mirrors the online network minus the predictor") {
  const ByolState state = byol_init(tiny_encoder(), tiny_head(), tiny_hyper(), 73);
  CHECK(state.online.has("predictor.fc1.weight"));
  CHECK_FALSE(state.target.has("predictor.fc1.weight"));
  for (const auto& e : state.target.entries()) {
    CHECK(state.online.at(e.name).data == e.value.data);
  }
  CHECK_NOTHROW(state.validate());

  ByolState broken = state;
  Rng rng(75);
  register_mlp(broken.target, "predictor", 8, 8, 8, rng);
  CHECK_THROWS_AS(broken.validate(), InputError);
}

TEST_CASE("momentum and ema updates") {
  const MoCoState base = moco_init(tiny_encoder(), tiny_head(), tiny_hyper(), 77);
  ParamSet query = base.query;
  // Make the two sets differ.
  for (auto& e : query.entries())
    for (double& v : e.value.data) v += 1.0;

  SUBCASE("m = 1 is an exact no-op") {
    ParamSet key = base.key;
    momentum_update(key, query, 1.0);
    CHECK(key.flatten(ParamKind::weight) == base.key.flatten(ParamKind::weight));
    CHECK(key.flatten(ParamKind::buffer) == base.key.flatten(ParamKind::buffer));
  }

  SUBCASE("m = 0 is an exact copy, buffers included") {
    ParamSet key = base.key;
    momentum_update(key, query, 0.0);
    CHECK(key.flatten(ParamKind::weight) == query.flatten(ParamKind::weight));
    CHECK(key.flatten(ParamKind::buffer) == query.flatten(ParamKind::buffer));
  }

  SUBCASE("interior m interpolates elementwise") {
    ParamSet key = base.key;
    momentum_update(key, query, 0.25);
    const auto k = key.flatten(ParamKind::weight);
    const auto a = base.key.flatten(ParamKind::weight);
    const auto b = query.flatten(ParamKind::weight);
    for (std::size_t i = 0; i < k.size(); ++i)
      CHECK(k[i] == doctest::Approx(0.25 * a[i] + 0.75 * b[i]).epsilon(1e-12));
    CHECK_THROWS_AS(momentum_update(key, query, 1.5), ConfigError);
  }

  SUBCASE("ema touches only the entries the target declares") {
    ByolState state = byol_init(tiny_encoder(), tiny_head(), tiny_hyper(), 79);
    ParamSet online = state.online;
    for (auto& e : online.entries())
      for (double& v : e.value.data) v += 2.0;
    const auto tgt_before = state.target.flatten(ParamKind::weight);
    ema_update(state.target, online, 0.5);
    const auto tgt_after = state.target.flatten(ParamKind::weight);
    for (std::size_t i = 0; i < tgt_after.size(); ++i)
      CHECK(tgt_after[i] == doctest::Approx(tgt_before[i] + 1.0).epsilon(1e-12));
  }
}

TEST_CASE("enqueue is a FIFO ring with renormalization") {
  Tensor queue({4, 3}, 0.0);
  for (std::size_t i = 0; i < 4; ++i) queue.data[i * 3] = 1.0;  // unit rows
  std::size_t ptr = 2;

  Tensor keys({2, 3});
  keys.data = {0.0, 2.0, 0.0, 0.0, 0.0, 5.0};
  enqueue(queue, ptr, keys);
  CHECK(ptr == 0);  // wrapped
  CHECK(queue.data[2 * 3 + 1] == doctest::Approx(1.0));  // row 2 <- e_y
  CHECK(queue.data[3 * 3 + 2] == doctest::Approx(1.0));  // row 3 <- e_z
  CHECK(queue.data[0] == 1.0);  // rows 0/1 untouched
  CHECK(queue.data[3] == 1.0);

  // Oldest rows are evicted next.
  Tensor keys2({2, 3});
  keys2.data = {3.0, 0.0, 0.0, 0.0, 4.0, 0.0};
  enqueue(queue, ptr, keys2);
  CHECK(ptr == 2);
  CHECK(queue.data[0] == doctest::Approx(1.0));
  CHECK(queue.data[1 * 3 + 1] == doctest::Approx(1.0));
  CHECK(queue.data[2 * 3 + 1] == doctest::Approx(1.0));  // still the previous insert

  SUBCASE("alignment and shape rules") {
    Tensor bad({3, 3}, 1.0);
    CHECK_THROWS_AS(enqueue(queue, ptr, bad), ConfigError);  // 4 % 3 != 0
    Tensor wrong_dim({2, 4}, 1.0);
    CHECK_THROWS_AS(enqueue(queue, ptr, wrong_dim), InputError);
    std::size_t off_ptr = 1;
    Tensor ok({2, 3}, 1.0);
    CHECK_THROWS_AS(enqueue(queue, off_ptr, ok), InputError);
  }
}

TEST_CASE("train steps preserve the contracts under degenerate settings") {
  Rng rng(81);
  std::vector<Snippet> chips;
  for (int i = 0; i < 4; ++i) chips.push_back(testutil::random_snippet(8, rng));
  std::vector<const Snippet*> batch;
  for (auto& c : chips) batch.push_back(&c);

  SUBCASE("momentum 1 freezes the key network through real train steps") {
    SslHyper hyper = tiny_hyper();
    hyper.momentum = 1.0;
    hyper.queue_size = 4;
    MoCoState state = moco_init(tiny_encoder(), tiny_head(), hyper, 83);
    const auto key_w = state.key.flatten(ParamKind::weight);
    const auto key_b = state.key.flatten(ParamKind::buffer);
    AdamW opt(state.query, step_optim(0.01, 10));
    for (int s = 0; s < 3; ++s) moco_train_step(state, opt, batch, hyper.augment, derive_seed(85, s));
    CHECK(state.key.flatten(ParamKind::weight) == key_w);
    CHECK(state.key.flatten(ParamKind::buffer) == key_b);
    CHECK(state.query.flatten(ParamKind::weight) != key_w);  // query trained away
  }

  SUBCASE("zero lr freezes the online weights; EMA still tracks buffer motion") {
    SslHyper hyper = tiny_hyper();
    ByolState state = byol_init(tiny_encoder(), tiny_head(), hyper, 87);
    const auto online_w = state.online.flatten(ParamKind::weight);
    const auto target_b = state.target.flatten(ParamKind::buffer);
    OptimConfig zero = step_optim(0.0, 10);
    zero.base_lr = 0.0;
    zero.min_lr = 0.0;
    AdamW opt(state.online, zero);
    for (int s = 0; s < 3; ++s) byol_train_step(state, opt, batch, hyper.augment, derive_seed(89, s));
    CHECK(state.online.flatten(ParamKind::weight) == online_w);
    // Online BN buffers moved through the commit, and the EMA pulled the
    // target buffers after them.
    CHECK(state.online.flatten(ParamKind::buffer) != state.target.flatten(ParamKind::buffer));
    CHECK(state.target.flatten(ParamKind::buffer) != target_b);
  }

  SUBCASE("moco step reports the pre-update loss and advances the queue") {
    SslHyper hyper = tiny_hyper();
    hyper.queue_size = 8;
    MoCoState state = moco_init(tiny_encoder(), tiny_head(), hyper, 91);
    AdamW opt(state.query, step_optim(0.003, 10));
    const std::size_t ptr0 = state.queue_ptr;
    const StepResult r = moco_train_step(state, opt, batch, hyper.augment, 93);
    CHECK(std::isfinite(r.loss));
    CHECK(r.loss > 0.0);
    CHECK(r.lr == 0.003);
    CHECK(state.queue_ptr == (ptr0 + batch.size()) % 8);
    CHECK_NOTHROW(state.validate());
  }
}

TEST_CASE("validation losses never mutate the state") {
  Rng rng(95);
  SnippetDataset val = testutil::unlabeled_dataset(6, 8, rng);
  SslHyper hyper = tiny_hyper();

  MoCoState moco = moco_init(tiny_encoder(), tiny_head(), hyper, 97);
  const auto mw = moco.query.flatten(ParamKind::weight);
  const auto mb = moco.query.flatten(ParamKind::buffer);
  const auto kw = moco.key.flatten(ParamKind::weight);
  const auto kb = moco.key.flatten(ParamKind::buffer);
  const auto qd = moco.queue.data;
  const double v1 = moco_validation_loss(moco, val, hyper, 99);
  const double v2 = moco_validation_loss(moco, val, hyper, 99);
  CHECK(v1 == v2);
  CHECK(std::isfinite(v1));
  CHECK(moco.query.flatten(ParamKind::weight) == mw);
  CHECK(moco.query.flatten(ParamKind::buffer) == mb);
  CHECK(moco.key.flatten(ParamKind::weight) == kw);
  CHECK(moco.key.flatten(ParamKind::buffer) == kb);
  CHECK(moco.queue.data == qd);

  ByolState byol = byol_init(tiny_encoder(), tiny_head(), hyper, 101);
  const auto ow = byol.online.flatten(ParamKind::weight);
  const auto ob = byol.online.flatten(ParamKind::buffer);
  const auto tw = byol.target.flatten(ParamKind::weight);
  const double b1 = byol_validation_loss(byol, val, hyper, 103);
  CHECK(std::isfinite(b1));
  CHECK(b1 >= 0.0);
  CHECK(b1 <= 8.0);
  CHECK(byol.online.flatten(ParamKind::weight) == ow);
  CHECK(byol.online.flatten(ParamKind::buffer) == ob);
  CHECK(byol.target.flatten(ParamKind::weight) == tw);

  SnippetDataset empty;
  CHECK_THROWS_AS(moco_validation_loss(moco, empty, hyper, 1), InputError);
}

TEST_CASE("repeated steps on one fixed batch drive both losses down") {
  Rng rng(105);
  std::vector<Snippet> chips;
  for (int i = 0; i < 8; ++i) chips.push_back(testutil::random_snippet(8, rng));
  std::vector<const Snippet*> batch;
  for (auto& c : chips) batch.push_back(&c);

  SslHyper hyper = tiny_hyper();
  hyper.queue_size = 8;
  hyper.momentum = 0.9;
  hyper.ema_rate = 0.9;
  // Keep the views mild so the objective on a fixed batch is learnable.
  hyper.augment.crop_scale_lo = 0.9;
  hyper.augment.speckle_lo = 0.95;
  hyper.augment.speckle_hi = 1.05;

  MoCoState moco = moco_init(tiny_encoder(), tiny_head(), hyper, 107);
  AdamW mopt(moco.query, step_optim(0.01, 200));
  double first = 0.0, last = 0.0;
  for (int s = 0; s < 200; ++s) {
    const StepResult r = moco_train_step(moco, mopt, batch, hyper.augment, derive_seed(109, s));
    if (s == 0) first = r.loss;
    last = r.loss;
  }
  CHECK(last < 0.5 * first);

  ByolState byol = byol_init(tiny_encoder(), tiny_head(), hyper, 111);
  AdamW bopt(byol.online, step_optim(0.01, 200));
  for (int s = 0; s < 200; ++s) {
    const StepResult r = byol_train_step(byol, bopt, batch, hyper.augment, derive_seed(113, s));
    if (s == 0) first = r.loss;
    last = r.loss;
  }
  CHECK(last < 0.5 * first);
}

TEST_CASE("pretrain loop: epoch windows, logging, and the checkpoint hook") {
  Rng rng(115);
  SnippetDataset pretrain = testutil::unlabeled_dataset(12, 8, rng);
  SnippetDataset val = testutil::unlabeled_dataset(4, 8, rng);
  SslHyper hyper = tiny_hyper();
  hyper.batch_size = 4;
  hyper.queue_size = 8;
  hyper.epochs = 3;

  MoCoState state = moco_init(tiny_encoder(), tiny_head(), hyper, 117);
  OptimConfig oc = step_optim(0.003, 9);
  AdamW opt(state.query, oc);

  std::vector<std::size_t> seen;
  const PretrainResult r =
      pretrain_moco(state, opt, pretrain, val, hyper, 119, 0, 3,
                    [&](const PretrainLogRow& row) { seen.push_back(row.epoch); });
  CHECK_FALSE(r.aborted);
  REQUIRE(r.log.size() == 3);
  CHECK(seen == std::vector<std::size_t>{0, 1, 2});
  for (const auto& row : r.log) {
    CHECK(std::isfinite(row.train_loss));
    CHECK(std::isfinite(row.val_loss));
    CHECK(row.lr > 0.0);
  }
  // 12 snippets / batch 4 = 3 steps per epoch, 9 steps total.
  CHECK(opt.step_count() == 9);

  SUBCASE("an empty epoch window trains nothing") {
    MoCoState s2 = moco_init(tiny_encoder(), tiny_head(), hyper, 117);
    AdamW o2(s2.query, oc);
    const PretrainResult none = pretrain_moco(s2, o2, pretrain, val, hyper, 119, 2, 2);
    CHECK(none.log.empty());
    CHECK(o2.step_count() == 0);
  }

  SUBCASE("a dataset smaller than one batch is rejected") {
    MoCoState s2 = moco_init(tiny_encoder(), tiny_head(), hyper, 117);
    AdamW o2(s2.query, oc);
    SnippetDataset small = testutil::unlabeled_dataset(3, 8, rng);
    CHECK_THROWS_AS(pretrain_moco(s2, o2, small, val, hyper, 119, 0, 1), ConfigError);
  }
}

TEST_CASE("model kind names round trip") {
  CHECK(model_kind_name(ModelKind::moco) == std::string("moco"));
  CHECK(model_kind_name(ModelKind::byol) == std::string("byol"));
  CHECK(parse_model_kind("moco") == ModelKind::moco);
  CHECK(parse_model_kind("byol") == ModelKind::byol);
  CHECK_THROWS_AS(parse_model_kind("simclr"), ConfigError);
}

TEST_CASE("normalize_rows: unit rows out, zero rows rejected") {
  Tensor x({2, 3});
  x.data = {3.0, 0.0, 4.0, 0.0, 2.0, 0.0};
  const Tensor n = normalize_rows(x);
  CHECK(n.data[0] == doctest::Approx(0.6));
  CHECK(n.data[2] == doctest::Approx(0.8));
  CHECK(n.data[4] == doctest::Approx(1.0));
  Tensor z({1, 2}, 0.0);
  CHECK_THROWS_AS(normalize_rows(z), NumericError);
}
