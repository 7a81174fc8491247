#pragma once

#include <vector>

#include "partsum/tensor.hpp"

namespace partsum {

// Plain SGD with optional momentum. Velocity slots are keyed by registration
// index, so the store's parameter set must not change between steps.
class Sgd {
  public:
    explicit Sgd(double lr, double momentum = 0.0) : lr_(lr), momentum_(momentum) {}

    void step(ParameterStore& params);

  private:
    double lr_;
    double momentum_;
    std::vector<std::vector<double>> velocity_;
};

// Adam (Kingma & Ba) with bias correction.
class Adam {
  public:
    explicit Adam(double lr = 1e-4, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(ParameterStore& params);

  private:
    double lr_, beta1_, beta2_, eps_;
    long long t_ = 0;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
};

}  // namespace partsum
