#pragma once

#include <functional>
#include <string>
#include <vector>

#include "partsum/tensor.hpp"

namespace partsum {

// Result of comparing analytic gradients against central finite differences.
// error = max over all coordinates of |analytic - numeric| / max(1, |analytic|, |numeric|).
struct GradCheckResult {
    double max_error = 0.0;
    std::size_t worst_input = 0;  // index into the inputs vector
    std::size_t worst_coord = 0;  // flat index within that input
    double analytic = 0.0;
    double numeric = 0.0;
};

// Checks the recorded gradient of a scalar-valued function of the given leaf
// inputs. `f` is re-run with perturbed input data for the numeric side, so it
// must be a pure function of the input values. Throws ContractError if f does
// not return a scalar.
GradCheckResult grad_check(const std::function<Tensor(const std::vector<Tensor>&)>& f,
                           const std::vector<Tensor>& inputs, double h = 1e-5);

}  // namespace partsum
