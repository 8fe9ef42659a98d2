#include "sonarssl/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "sonarssl/rng.hpp"

namespace sonarssl {

GradCheckResult grad_check(ParamSet& params, const std::function<double()>& loss,
                           const Grads& analytic, double epsilon, std::size_t max_coords,
                           std::uint64_t seed) {
  if (epsilon <= 0.0) throw ConfigError("grad_check: epsilon must be > 0");

  // Enumerate (entry, offset) pairs over weight coordinates.
  struct Coord {
    std::size_t entry;
    std::size_t offset;
  };
  std::vector<Coord> coords;
  for (std::size_t e = 0; e < params.entries().size(); ++e) {
    if (params.entries()[e].kind != ParamKind::weight) continue;
    for (std::size_t i = 0; i < params.entries()[e].value.numel(); ++i) coords.push_back({e, i});
  }
  if (coords.empty()) throw InputError("grad_check: parameter set has no weights");

  Rng rng(seed);
  if (coords.size() > max_coords) {
    // Partial Fisher-Yates: the first max_coords entries become the sample.
    for (std::size_t i = 0; i < max_coords; ++i) {
      const std::size_t j = i + rng.uniform_index(coords.size() - i);
      std::swap(coords[i], coords[j]);
    }
    coords.resize(max_coords);
  }

  GradCheckResult result;
  for (const Coord& c : coords) {
    ParamEntry& entry = params.entries()[c.entry];
    double& theta = entry.value.data[c.offset];
    const double saved = theta;
    const double h = epsilon * std::max(1.0, std::abs(saved));

    theta = saved + h;
    const double plus = loss();
    theta = saved - h;
    const double minus = loss();
    theta = saved;
    if (!std::isfinite(plus) || !std::isfinite(minus))
      throw NumericError("grad_check: loss is non-finite near the evaluation point");

    const double numeric = (plus - minus) / (2.0 * h);
    const Tensor* g = analytic.find(entry.name);
    const double analytic_value = g ? g->data[c.offset] : 0.0;
    const double rel = std::abs(analytic_value - numeric) /
                       std::max({std::abs(analytic_value), std::abs(numeric), 1e-4});
    result.max_rel_error = std::max(result.max_rel_error, rel);
    ++result.coords_checked;
  }
  return result;
}

}  // namespace sonarssl
