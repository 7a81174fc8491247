#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace partsum {

struct VerifyCheck {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct VerifyReport {
    std::vector<VerifyCheck> checks;

    bool all_pass() const;
    void merge(const VerifyReport& other);
};

// Deliberate defect injection so the verifier's failure path can be
// exercised: giou_grad_sign flips the sign of the giou box-term gradient
// while leaving its value untouched.
enum class FaultInjection { none, giou_grad_sign };

FaultInjection fault_injection_from_string(const std::string& s);

struct VerifyOptions {
    FaultInjection fault = FaultInjection::none;
    std::uint64_t seed = 7;
    int instances_per_op = 20;  // random instances per differentiable op
    int matching_cases = 200;   // random cost matrices per size in 2..7
    double grad_tolerance = 1e-4;
};

// Gradient checks: every differentiable tensor op on random instances, the
// attention/decoder blocks, and the end-to-end set loss on a toy model with
// the assignment held fixed.
VerifyReport verify_gradients(const VerifyOptions& opt);

// Assignment oracle equivalence: hungarian vs exhaustive search (permutation
// and total cost, exact equality) on random and tie-heavy matrices.
VerifyReport verify_matching(const VerifyOptions& opt);

// Hand-computed metric fixtures (recall 0.5 case, AP 0.5 case, perfect 1.0).
VerifyReport verify_metric_fixtures();

// Loss properties: ground-truth permutation invariance under re-matching,
// consistent query permutation invariance, exact zero on the perfect
// fixture, breakdown/total consistency, weight gating.
VerifyReport verify_loss_properties(const VerifyOptions& opt);

// All suites in order.
VerifyReport run_verification(const VerifyOptions& opt);

std::string to_json(const VerifyReport& report);

}  // namespace partsum
