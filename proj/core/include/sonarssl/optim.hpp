#pragma once

#include <cstdint>
#include <vector>

#include "sonarssl/params.hpp"

namespace sonarssl {

// Cosine annealing: lr(t) = min + (base - min)/2 * (1 + cos(pi * t/T)).
// Endpoints are exact; steps past T clamp to min_lr.
double cosine_lr(std::size_t step, std::size_t total_steps, double base_lr, double min_lr);

struct OptimConfig {
  double base_lr = 0.003;
  double min_lr = 0.0;
  double weight_decay = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t total_steps = 1;  // cosine schedule length

  void validate() const;
};

// AdamW with decoupled decay. The decay is applied as a plain multiplication
// theta *= (1 - lr*wd) before the moment update, so a zero-gradient step
// contracts parameters by exactly that factor. Moments align with the weight
// entries of the parameter set given at construction, in creation order.
class AdamW {
 public:
  AdamW(const ParamSet& params, const OptimConfig& config);

  // One update over all weight entries. Missing gradients count as zero (the
  // decay still applies). Returns the learning rate used.
  double step(ParamSet& params, const Grads& grads);

  std::size_t step_count() const { return step_count_; }
  const OptimConfig& config() const { return config_; }

  // Checkpoint access: flattened first/second moments over weight scalars.
  const std::vector<double>& moment1() const { return m_; }
  const std::vector<double>& moment2() const { return v_; }
  void restore(std::size_t step_count, std::vector<double> m, std::vector<double> v);

 private:
  OptimConfig config_;
  std::size_t step_count_ = 0;
  std::size_t weight_scalars_ = 0;
  std::vector<double> m_, v_;
};

}  // namespace sonarssl
