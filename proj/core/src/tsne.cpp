#include "sonarssl/tsne.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sonarssl/error.hpp"
#include "sonarssl/rng.hpp"

namespace sonarssl {

namespace {

// (N, N) squared Euclidean distances, computed by direct summation (no
// norm-expansion cancellation issues).
Tensor squared_distances(const Tensor& features) {
  const std::size_t n = features.dim(0), d = features.dim(1);
  Tensor dist({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        const double diff = features.data[i * d + k] - features.data[j * d + k];
        s += diff * diff;
      }
      dist.data[i * n + j] = s;
      dist.data[j * n + i] = s;
    }
  }
  return dist;
}

// Fills row i of `cond` with the Gaussian conditional for precision beta and
// returns the row's Shannon entropy in bits. Distances are shifted by the row
// minimum before exponentiation; the shift cancels in the normalization.
double fill_row(const Tensor& dist, std::size_t i, double beta, Tensor& cond) {
  const std::size_t n = dist.dim(0);
  double dmin = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < n; ++j)
    if (j != i) dmin = std::min(dmin, dist.data[i * n + j]);
  double z = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double w = j == i ? 0.0 : std::exp(-beta * (dist.data[i * n + j] - dmin));
    cond.data[i * n + j] = w;
    z += w;
  }
  double entropy = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double p = cond.data[i * n + j] / z;
    cond.data[i * n + j] = p;
    if (p > 0.0) entropy -= p * std::log2(p);
  }
  return entropy;
}

}  // namespace

void TsneConfig::validate() const {
  if (!(perplexity >= 2.0)) throw ConfigError("tsne: perplexity must be >= 2");
  if (iterations == 0) throw ConfigError("tsne: iterations must be >= 1");
  if (!(early_exaggeration >= 1.0)) throw ConfigError("tsne: early_exaggeration must be >= 1");
  if (!(learning_rate >= 0.0)) throw ConfigError("tsne: learning_rate must be >= 0");
  if (!(initial_momentum >= 0.0 && initial_momentum < 1.0) ||
      !(final_momentum >= 0.0 && final_momentum < 1.0))
    throw ConfigError("tsne: momenta must lie in [0, 1)");
}

Tensor tsne_conditional(const Tensor& features, double perplexity) {
  if (features.rank() != 2) throw InputError("tsne: features must be (N, d)");
  const std::size_t n = features.dim(0);
  if (!(perplexity >= 2.0)) throw ConfigError("tsne: perplexity must be >= 2");
  if (static_cast<double>(n) < 3.0 * perplexity)
    throw InputError("tsne: need at least 3 * perplexity points");
  for (double v : features.data)
    if (!std::isfinite(v)) throw InputError("tsne: non-finite feature value");

  const Tensor dist = squared_distances(features);
  const double target = std::log2(perplexity);
  Tensor cond({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    double beta = 1.0;
    double beta_lo = 0.0;
    double beta_hi = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < 200; ++iter) {
      const double entropy = fill_row(dist, i, beta, cond);
      const double diff = entropy - target;
      if (std::abs(diff) < 1e-7) break;
      if (diff > 0.0) {  // too flat: sharpen
        beta_lo = beta;
        beta = std::isinf(beta_hi) ? beta * 2.0 : (beta + beta_hi) / 2.0;
      } else {
        beta_hi = beta;
        beta = (beta + beta_lo) / 2.0;
      }
    }
  }
  return cond;
}

Tensor tsne_affinities(const Tensor& features, double perplexity) {
  Tensor cond = tsne_conditional(features, perplexity);
  const std::size_t n = cond.dim(0);
  Tensor joint({n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      joint.data[i * n + j] =
          (cond.data[i * n + j] + cond.data[j * n + i]) / (2.0 * static_cast<double>(n));
  return joint;
}

Embedding2D tsne_embed(const Tensor& features, const TsneConfig& config, std::uint64_t seed) {
  config.validate();
  const Tensor p = tsne_affinities(features, config.perplexity);
  const std::size_t n = p.dim(0);
  const double lr =
      config.learning_rate > 0.0 ? config.learning_rate : static_cast<double>(n) / 12.0;

  Rng rng(seed);
  std::vector<double> y(n * 2);
  for (auto& v : y) v = rng.normal() * 1e-4;
  std::vector<double> inc(n * 2, 0.0);
  std::vector<double> gain(n * 2, 1.0);
  std::vector<double> num(n * n);  // Student-t kernel values
  std::vector<double> grad(n * 2);

  for (std::size_t iter = 0; iter < config.iterations; ++iter) {
    const double exag = iter < config.exaggeration_iterations ? config.early_exaggeration : 1.0;
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      num[i * n + i] = 0.0;
      for (std::size_t j = i + 1; j < n; ++j) {
        const double dy0 = y[2 * i] - y[2 * j];
        const double dy1 = y[2 * i + 1] - y[2 * j + 1];
        const double k = 1.0 / (1.0 + dy0 * dy0 + dy1 * dy1);
        num[i * n + j] = k;
        num[j * n + i] = k;
        z += 2.0 * k;
      }
    }

    for (std::size_t i = 0; i < n; ++i) {
      double g0 = 0.0, g1 = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const double k = num[i * n + j];
        const double coeff = 4.0 * (exag * p.data[i * n + j] - k / z) * k;
        g0 += coeff * (y[2 * i] - y[2 * j]);
        g1 += coeff * (y[2 * i + 1] - y[2 * j + 1]);
      }
      grad[2 * i] = g0;
      grad[2 * i + 1] = g1;
    }

    const double momentum =
        iter < config.momentum_switch ? config.initial_momentum : config.final_momentum;
    double mean0 = 0.0, mean1 = 0.0;
    for (std::size_t c = 0; c < n * 2; ++c) {
      // Adaptive per-coordinate gains from the reference implementation.
      if ((grad[c] > 0.0) != (inc[c] > 0.0))
        gain[c] += 0.2;
      else
        gain[c] *= 0.8;
      gain[c] = std::max(gain[c], 0.01);
      inc[c] = momentum * inc[c] - lr * gain[c] * grad[c];
      y[c] += inc[c];
      (c % 2 == 0 ? mean0 : mean1) += y[c];
    }
    mean0 /= static_cast<double>(n);
    mean1 /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[2 * i] -= mean0;
      y[2 * i + 1] -= mean1;
    }
  }

  for (double v : y)
    if (!std::isfinite(v)) throw NumericError("tsne: embedding diverged to non-finite values");
  Embedding2D out;
  out.coords = std::move(y);
  return out;
}

}  // namespace sonarssl
