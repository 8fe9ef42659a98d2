#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sonarssl/tensor.hpp"

namespace sonarssl {

// Exact (quadratic-cost) t-SNE. Defaults follow the standard reference
// implementation; learning_rate 0 means the N/12 heuristic.
struct TsneConfig {
  double perplexity = 30.0;
  std::size_t iterations = 1000;
  double early_exaggeration = 12.0;
  std::size_t exaggeration_iterations = 250;
  double learning_rate = 0.0;
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
  std::size_t momentum_switch = 250;

  void validate() const;
};

struct Embedding2D {
  std::vector<double> coords;  // (N, 2) row-major
  std::vector<std::uint8_t> labels;  // filled by callers that have labels
  std::string model_id;

  std::size_t size() const { return coords.size() / 2; }
};

// Row-stochastic conditional affinities (N, N), zero diagonal, each row's
// Gaussian bandwidth binary-searched until the row entropy equals
// log2(perplexity) bits. Exposed separately so calibration is testable.
Tensor tsne_conditional(const Tensor& features, double perplexity);

// Symmetrized joint affinities (P + P^T) / 2N; sums to 1.
Tensor tsne_affinities(const Tensor& features, double perplexity);

// Requires N >= 3 * perplexity. Deterministic in (features, config, seed).
Embedding2D tsne_embed(const Tensor& features, const TsneConfig& config, std::uint64_t seed);

}  // namespace sonarssl
