#pragma once

#include <cstdint>
#include <functional>

#include "sonarssl/params.hpp"

namespace sonarssl {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t coords_checked = 0;
};

// Compares analytic weight gradients against central finite differences of
// `loss` on up to `max_coords` randomly sampled weight coordinates (all
// coordinates when there are fewer). `loss` must be a pure function of
// `params`, which is restored exactly after every probe. Relative error per
// coordinate is |a - n| / max(|a|, |n|, 1e-4), so true-zero gradients are
// judged on absolute error. Throws NumericError on a non-finite loss.
GradCheckResult grad_check(ParamSet& params, const std::function<double()>& loss,
                           const Grads& analytic, double epsilon, std::size_t max_coords,
                           std::uint64_t seed);

}  // namespace sonarssl
