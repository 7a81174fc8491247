#pragma once

#include <vector>

#include "partsum/heads.hpp"
#include "partsum/matching.hpp"

namespace partsum {

struct LossWeights {
    double lambda_cls = 1.0;
    double lambda_l1 = 5.0;
    double lambda_giou = 2.0;
    // Down-weighting of the ∅ class in classification NLL; without it the
    // padded class dominates whenever M >> N.
    double no_object_weight = 0.1;
    // Relative weight of the sum-stream terms against the part-stream terms.
    double sum_stream_weight = 1.0;
};

// Per-layer unweighted loss terms. Every value is a per-query mean: the
// head's summed contribution divided by the number of query slots M, so an
// all-∅ batch with uniform predictions yields exactly
// no_object_weight * log(n_classes) per classification head.
struct LayerLossBreakdown {
    double part_cls[4] = {0, 0, 0, 0};  // s, o, p, spo (NLL)
    double part_l1[3] = {0, 0, 0};      // s, o, p->union (L1)
    double part_giou[3] = {0, 0, 0};    // s, o, p->union (1 - giou)
    double sum_cls[3] = {0, 0, 0};      // G_s, G_o, G_p
    double sum_l1[3] = {0, 0, 0};
    double sum_giou[3] = {0, 0, 0};
};

struct LossReport {
    double total = 0.0;                       // == weighted breakdown sum within 1e-9
    std::vector<LayerLossBreakdown> layers;   // one per decoder layer
    Tensor total_tensor;                      // scalar; backward() entry point
};

// Eq.-style composite set loss over all decoder layers (auxiliary
// supervision): for each layer l, prediction i matched to target
// assignments[l].sigma[i] contributes classification NLL of the true class
// (∅ down-weighted, no box terms for ∅) plus L1 and (1-giou) box losses; the
// predicate and G_p boxes regress the subject-object union box. Assignments
// are constants of the forward pass (no gradient flows through matching).
LossReport set_loss(const std::vector<CompositePrediction>& preds_per_layer,
                    const std::vector<RelationTarget>& padded_targets,
                    const std::vector<Assignment>& assignments_per_layer, const Vocab& vocab,
                    const LossWeights& weights);

}  // namespace partsum
