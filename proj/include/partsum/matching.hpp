#pragma once

#include <vector>

#include "partsum/geometry.hpp"
#include "partsum/heads.hpp"

namespace partsum {

// One ground-truth relation resolved to labels and boxes, or an ∅ padding
// slot (all labels -1; a relation is ∅ as a whole).
struct RelationTarget {
    int s_label = -1;
    int p_label = -1;
    int o_label = -1;
    Box s_box, o_box;

    bool is_no_object() const { return s_label < 0; }
    // The predicate (and G_p) localization target.
    Box union_target() const { return union_box(s_box, o_box); }
};

// Pads N real targets with ∅ slots up to length M (order preserved).
// CapacityError when N > M.
std::vector<RelationTarget> pad_targets(std::vector<RelationTarget> targets, int n_queries);

struct CostWeights {
    double lambda_cls = 1.0;
    double lambda_l1 = 5.0;
    double lambda_giou = 2.0;
};

// Unweighted per-cell sums, kept for diagnostics; the weighted combination
// lives in CostMatrix::values.
struct CostTerms {
    double cls = 0.0;   // sum of -p̂(c) over the class terms
    double l1 = 0.0;    // sum of L1 box distances
    double giou = 0.0;  // sum of (1 - giou) box penalties
};

struct CostMatrix {
    int m = 0;
    std::vector<double> values;
    std::vector<CostTerms> terms;

    double at(int i, int j) const { return values[static_cast<std::size_t>(i) * m + j]; }
    const CostTerms& terms_at(int i, int j) const { return terms[static_cast<std::size_t>(i) * m + j]; }
};

// Pairwise assignment cost between prediction i and padded target j:
// classification reward -p̂(c) over every available class head (part s/p/o and
// triplet, sum G_s/G_p/G_o) plus lambda_l1 * L1 + lambda_giou * (1 - giou)
// over every available box head; ∅ targets cost exactly 0. Streams absent
// from the prediction (decoder variant) contribute nothing.
CostMatrix matching_cost(const CompositePrediction& pred, const std::vector<RelationTarget>& padded_targets,
                         const Vocab& vocab, const CostWeights& weights);

struct Assignment {
    std::vector<int> sigma;  // sigma[prediction index] = target index
    double total_cost = 0.0;
};

// Globally optimal assignment in O(M^3). Ties are broken toward the
// lexicographically smallest permutation via an infinitesimal index
// perturbation, making training runs bit-reproducible. ContractError on
// non-finite cost entries.
Assignment hungarian(const CostMatrix& cost);

// Exhaustive oracle over all M! permutations in lexicographic order with
// strict improvement, hence the same tie-break as hungarian. CapacityError
// when M > 8.
Assignment brute_force_assignment(const CostMatrix& cost);

}  // namespace partsum
