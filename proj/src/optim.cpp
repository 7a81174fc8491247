#include "partsum/optim.hpp"

#include <cmath>

namespace partsum {

void Sgd::step(ParameterStore& params) {
    const auto& entries = params.entries();
    if (velocity_.empty()) {
        velocity_.resize(entries.size());
        for (std::size_t p = 0; p < entries.size(); ++p)
            velocity_[p].assign(entries[p].second.numel(), 0.0);
    }
    if (velocity_.size() != entries.size()) {
        throw ContractError("Sgd::step: parameter set changed between steps");
    }
    for (std::size_t p = 0; p < entries.size(); ++p) {
        Tensor t = entries[p].second;
        const std::vector<double>& g = t.grad();
        std::vector<double>& x = t.mutable_data();
        std::vector<double>& v = velocity_[p];
        for (std::size_t i = 0; i < x.size(); ++i) {
            v[i] = momentum_ * v[i] + g[i];
            x[i] -= lr_ * v[i];
        }
    }
}

void Adam::step(ParameterStore& params) {
    const auto& entries = params.entries();
    if (m_.empty()) {
        m_.resize(entries.size());
        v_.resize(entries.size());
        for (std::size_t p = 0; p < entries.size(); ++p) {
            m_[p].assign(entries[p].second.numel(), 0.0);
            v_[p].assign(entries[p].second.numel(), 0.0);
        }
    }
    if (m_.size() != entries.size()) {
        throw ContractError("Adam::step: parameter set changed between steps");
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t p = 0; p < entries.size(); ++p) {
        Tensor t = entries[p].second;
        const std::vector<double>& g = t.grad();
        std::vector<double>& x = t.mutable_data();
        std::vector<double>& m = m_[p];
        std::vector<double>& v = v_[p];
        for (std::size_t i = 0; i < x.size(); ++i) {
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            x[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

}  // namespace partsum
