#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sonarssl/params.hpp"
#include "sonarssl/tensor.hpp"

namespace sonarssl {

// Normalization behavior per forward pass:
//  - train: batch statistics; running-average update staged in the cache and
//    applied only by bn_commit (so a failed step leaves buffers untouched).
//  - train_frozen_stats: batch statistics, no staging. Used for momentum/EMA
//    branches and gradient checks, where buffers must never move.
//  - eval: running statistics; deterministic, batch-order equivariant.
enum class BnMode : std::uint8_t { train, train_frozen_stats, eval };

struct ConvSpec {
  std::size_t in_ch = 0, out_ch = 0;
  std::size_t kernel = 3, stride = 1, pad = 1;
};

struct ConvCache {
  std::vector<std::size_t> in_shape;
  std::size_t out_h = 0, out_w = 0;
  std::vector<double> cols;  // (in_ch*k*k) x (B*out_h*out_w), column-major
};

struct BnCache {
  BnMode mode = BnMode::train;
  std::vector<std::size_t> in_shape;
  std::vector<double> x_hat;
  std::vector<double> inv_std;                 // per channel
  std::vector<double> batch_mean, batch_var;   // staged for commit (train only)
};

struct ReluCache {
  std::vector<double> out;
};

struct GapCache {
  std::vector<std::size_t> in_shape;
};

struct LinearCache {
  std::vector<std::size_t> in_shape;
  std::vector<double> input;
};

// Parameters live under `name`: conv "<name>.weight" {O,C,K,K} and
// "<name>.bias" {O}; batchnorm "<name>.gamma"/"<name>.beta" plus buffers
// "<name>.running_mean"/"<name>.running_var"; linear "<name>.weight" {O,I} and
// "<name>.bias" {O}.

Tensor conv2d_forward(const ParamSet& params, const std::string& name, const ConvSpec& spec,
                      const Tensor& x, ConvCache* cache);
// Returns dx; accumulates weight/bias gradients.
Tensor conv2d_backward(const ParamSet& params, const std::string& name, const ConvSpec& spec,
                       const ConvCache& cache, const Tensor& dy, Grads& grads);

Tensor bn_forward(const ParamSet& params, const std::string& name, const Tensor& x, BnMode mode,
                  BnCache* cache);
Tensor bn_backward(const ParamSet& params, const std::string& name, const BnCache& cache,
                   const Tensor& dy, Grads& grads);
// Applies the staged running-statistics update: running <- 0.9*running +
// 0.1*batch. Only valid for a train-mode cache.
void bn_commit(ParamSet& params, const std::string& name, const BnCache& cache);

Tensor relu_forward(const Tensor& x, ReluCache* cache);
Tensor relu_backward(const ReluCache& cache, const Tensor& dy);

// Global average pool (B,C,H,W) -> (B,C).
Tensor gap_forward(const Tensor& x, GapCache* cache);
Tensor gap_backward(const GapCache& cache, const Tensor& dy);

Tensor linear_forward(const ParamSet& params, const std::string& name, const Tensor& x,
                      LinearCache* cache);
Tensor linear_backward(const ParamSet& params, const std::string& name, const LinearCache& cache,
                       const Tensor& dy, Grads& grads);

}  // namespace sonarssl
