#include "partsum/grad_check.hpp"

#include <cmath>

namespace partsum {

GradCheckResult grad_check(const std::function<Tensor(const std::vector<Tensor>&)>& f,
                           const std::vector<Tensor>& inputs, double h) {
    for (const Tensor& in : inputs) {
        if (!in.requires_grad()) {
            throw ContractError("grad_check: all inputs must require gradients");
        }
    }

    Tensor out = f(inputs);
    if (out.numel() != 1) {
        throw ContractError("grad_check: function output must be scalar, got shape " + shape_str(out.shape()));
    }
    for (const Tensor& in : inputs) {
        // const_cast-free: zero via the handle (shared impl).
        Tensor t = in;
        t.zero_grad();
    }
    backward(out);

    std::vector<std::vector<double>> analytic;
    analytic.reserve(inputs.size());
    for (const Tensor& in : inputs) analytic.push_back(in.grad());

    GradCheckResult res;
    for (std::size_t p = 0; p < inputs.size(); ++p) {
        Tensor in = inputs[p];
        for (std::size_t i = 0; i < in.numel(); ++i) {
            const double orig = in.data()[i];
            in.mutable_data()[i] = orig + h;
            const double fp = f(inputs).item();
            in.mutable_data()[i] = orig - h;
            const double fm = f(inputs).item();
            in.mutable_data()[i] = orig;
            const double numeric = (fp - fm) / (2.0 * h);
            const double a = analytic[p][i];
            const double denom = std::max({1.0, std::fabs(a), std::fabs(numeric)});
            const double err = std::fabs(a - numeric) / denom;
            if (err > res.max_error) {
                res.max_error = err;
                res.worst_input = p;
                res.worst_coord = i;
                res.analytic = a;
                res.numeric = numeric;
            }
        }
    }
    return res;
}

}  // namespace partsum
