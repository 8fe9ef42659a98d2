#include <cmath>
#include <vector>

#include "doctest.h"
#include "sonarssl/optim.hpp"
#include "testutil.hpp"

using namespace sonarssl;

namespace {

ParamSet two_weights() {
  ParamSet p;
  Tensor w({2}, 0.0);
  w.data = {1.0, -2.0};
  p.add("w", ParamKind::weight, w);
  p.add("buf", ParamKind::buffer, Tensor({2}, 5.0));
  return p;
}

}  // namespace

TEST_CASE("cosine schedule endpoints, midpoint, and clamp") {
  CHECK(cosine_lr(0, 100, 0.3, 0.01) == 0.3);
  CHECK(cosine_lr(100, 100, 0.3, 0.01) == 0.01);
  CHECK(cosine_lr(150, 100, 0.3, 0.01) == 0.01);
  CHECK(cosine_lr(50, 100, 0.3, 0.01) == doctest::Approx(0.5 * (0.3 + 0.01)).epsilon(1e-12));
  CHECK(cosine_lr(25, 100, 1.0, 0.0) ==
        doctest::Approx(0.5 * (1.0 + std::cos(std::atan(1.0)))).epsilon(1e-12));
  CHECK_THROWS_AS(cosine_lr(0, 0, 0.3, 0.0), ConfigError);
}

TEST_CASE("optimizer config validation") {
  OptimConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.beta1 = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = OptimConfig{};
  cfg.epsilon = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = OptimConfig{};
  cfg.total_steps = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = OptimConfig{};
  cfg.base_lr = -0.1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("single step matches the update rule written out by hand") {
  ParamSet p = two_weights();
  OptimConfig cfg;
  cfg.base_lr = 0.1;
  cfg.min_lr = 0.0;
  cfg.weight_decay = 0.01;
  cfg.total_steps = 10;
  AdamW opt(p, cfg);

  Grads grads;
  Tensor g({2}, 0.0);
  g.data = {0.5, -1.5};
  grads.accumulate("w", g);

  const double lr = opt.step(p, grads);
  CHECK(lr == 0.1);  // step 0 of the schedule

  for (std::size_t i = 0; i < 2; ++i) {
    const double gi = g.data[i];
    const double m_hat = (0.1 * gi) / (1.0 - 0.9);          // first step bias correction
    const double v_hat = (0.001 * gi * gi) / (1.0 - 0.999);
    const double theta0 = (i == 0) ? 1.0 : -2.0;
    const double expect = theta0 * (1.0 - 0.1 * 0.01) - 0.1 * m_hat / (std::sqrt(v_hat) + 1e-8);
    CHECK(p.at("w").data[i] == doctest::Approx(expect).epsilon(1e-12));
  }

  // Buffers are never touched.
  CHECK(p.at("buf").data[0] == 5.0);
  CHECK(opt.step_count() == 1);
}

TEST_CASE("missing gradients decay the weights by exactly (1 - lr*wd)") {
  ParamSet p = two_weights();
  OptimConfig cfg;
  cfg.base_lr = 0.2;
  cfg.weight_decay = 0.05;
  cfg.total_steps = 100;
  AdamW opt(p, cfg);

  opt.step(p, Grads{});
  CHECK(p.at("w").data[0] == 1.0 * (1.0 - 0.2 * 0.05));
  CHECK(p.at("w").data[1] == -2.0 * (1.0 - 0.2 * 0.05));
}

TEST_CASE("zero learning rate leaves the weights untouched") {
  ParamSet p = two_weights();
  OptimConfig cfg;
  cfg.base_lr = 0.0;
  cfg.min_lr = 0.0;
  cfg.weight_decay = 0.5;
  cfg.total_steps = 4;
  AdamW opt(p, cfg);

  Grads grads;
  Tensor g({2}, 3.0);
  grads.accumulate("w", g);
  for (int i = 0; i < 4; ++i) opt.step(p, grads);
  CHECK(p.at("w").data[0] == 1.0);
  CHECK(p.at("w").data[1] == -2.0);
}

TEST_CASE("the returned lr sequence follows the cosine schedule") {
  ParamSet p = two_weights();
  OptimConfig cfg;
  cfg.base_lr = 0.4;
  cfg.min_lr = 0.02;
  cfg.total_steps = 7;
  AdamW opt(p, cfg);
  for (std::size_t t = 0; t < 9; ++t) {
    const double lr = opt.step(p, Grads{});
    CHECK(lr == cosine_lr(t, 7, 0.4, 0.02));
  }
}

TEST_CASE("moment restore round-trips the optimizer state") {
  ParamSet p = two_weights();
  OptimConfig cfg;
  cfg.total_steps = 50;
  AdamW opt(p, cfg);

  Grads grads;
  Tensor g({2}, 0.0);
  g.data = {0.3, 0.7};
  grads.accumulate("w", g);
  for (int i = 0; i < 5; ++i) opt.step(p, grads);

  const std::vector<double> m = opt.moment1();
  const std::vector<double> v = opt.moment2();
  const std::size_t steps = opt.step_count();
  const std::vector<double> weights = p.at("w").data;

  // A fresh optimizer restored to this state continues identically.
  ParamSet p2 = two_weights();
  p2.at("w").data = weights;
  AdamW opt2(p2, cfg);
  opt2.restore(steps, m, v);
  opt.step(p, grads);
  opt2.step(p2, grads);
  CHECK(p.at("w").data == p2.at("w").data);
  CHECK(opt.moment1() == opt2.moment1());

  CHECK_THROWS_AS(opt2.restore(1, {0.0}, {0.0, 0.0}), InputError);

  // An optimizer built for a different parameter set is rejected at step time.
  ParamSet bigger = two_weights();
  bigger.add("extra", ParamKind::weight, Tensor({3}, 0.0));
  CHECK_THROWS_AS(opt.step(bigger, grads), InputError);
}
