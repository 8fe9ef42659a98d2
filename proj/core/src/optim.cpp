#include "sonarssl/optim.hpp"

#include <cmath>
#include <numbers>

namespace sonarssl {

double cosine_lr(std::size_t step, std::size_t total_steps, double base_lr, double min_lr) {
  if (total_steps == 0) throw ConfigError("cosine_lr: total_steps must be positive");
  if (step == 0) return base_lr;
  if (step >= total_steps) return min_lr;
  const double frac = static_cast<double>(step) / static_cast<double>(total_steps);
  return min_lr + 0.5 * (base_lr - min_lr) * (1.0 + std::cos(std::numbers::pi * frac));
}

void OptimConfig::validate() const {
  if (base_lr < 0.0 || min_lr < 0.0) throw ConfigError("optim: learning rates must be >= 0");
  if (weight_decay < 0.0) throw ConfigError("optim: weight_decay must be >= 0");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
    throw ConfigError("optim: betas must lie in [0,1)");
  if (epsilon <= 0.0) throw ConfigError("optim: epsilon must be > 0");
  if (total_steps == 0) throw ConfigError("optim: total_steps must be positive");
}

AdamW::AdamW(const ParamSet& params, const OptimConfig& config) : config_(config) {
  config_.validate();
  weight_scalars_ = params.scalar_count(ParamKind::weight);
  m_.assign(weight_scalars_, 0.0);
  v_.assign(weight_scalars_, 0.0);
}

double AdamW::step(ParamSet& params, const Grads& grads) {
  if (params.scalar_count(ParamKind::weight) != weight_scalars_)
    throw InputError("optim: parameter set does not match the optimizer state");
  const double lr = cosine_lr(step_count_, config_.total_steps, config_.base_lr, config_.min_lr);
  ++step_count_;
  const auto t = static_cast<double>(step_count_);
  const double bias1 = 1.0 - std::pow(config_.beta1, t);
  const double bias2 = 1.0 - std::pow(config_.beta2, t);
  const double contraction = 1.0 - lr * config_.weight_decay;

  std::size_t pos = 0;
  for (ParamEntry& e : params.entries()) {
    if (e.kind != ParamKind::weight) continue;
    const Tensor* g = grads.find(e.name);
    if (g && !g->same_shape(e.value))
      throw InputError("optim: gradient shape mismatch for " + e.name);
    for (std::size_t i = 0; i < e.value.numel(); ++i, ++pos) {
      const double gi = g ? g->data[i] : 0.0;
      m_[pos] = config_.beta1 * m_[pos] + (1.0 - config_.beta1) * gi;
      v_[pos] = config_.beta2 * v_[pos] + (1.0 - config_.beta2) * gi * gi;
      const double m_hat = m_[pos] / bias1;
      const double v_hat = v_[pos] / bias2;
      e.value.data[i] =
          e.value.data[i] * contraction - lr * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
  }
  return lr;
}

void AdamW::restore(std::size_t step_count, std::vector<double> m, std::vector<double> v) {
  if (m.size() != weight_scalars_ || v.size() != weight_scalars_)
    throw InputError("optim: restored moment length does not match the parameter set");
  step_count_ = step_count;
  m_ = std::move(m);
  v_ = std::move(v);
}

}  // namespace sonarssl
