#pragma once

#include <string>
#include <vector>

#include "partsum/heads.hpp"
#include "partsum/matching.hpp"

namespace partsum {

// Relationship mode scores subject and object boxes separately; phrase mode
// evaluates one union box per triplet.
enum class EvalMode { relationship, phrase };

const char* to_string(EvalMode m);

// One scored triplet hypothesis. In phrase mode both boxes hold the union
// box, so the matching rule is uniform across modes.
struct RankedTriplet {
    double score = 0.0;  // p̂_s(s) * p̂_p(p) * p̂_o(o)
    int s_label = 0;
    int p_label = 0;
    int o_label = 0;
    Box s_box, o_box;
    int query_index = 0;
    int predicate_rank = 0;  // 0 = the query's best predicate
};

// Per-query candidates: subject/object labels by argmax over real classes,
// the k_pred best real predicates each emitted as one candidate. A query
// whose full-distribution argmax (∅ included) is ∅ for subject, object, or
// predicate is dropped. Sorted by descending score, ties broken by query
// index then predicate rank.
std::vector<RankedTriplet> rank_predictions(const std::vector<QueryOutput>& queries, EvalMode mode, int k_pred);

struct RecallResult {
    double recall = 0.0;
    bool vacuous = false;  // no ground truth; recall defined as 1.0
};

// Greedy top-K matching: a candidate hits the first unmatched ground-truth
// triplet with exactly equal labels and IoU > 0.5 on every required box
// pair; each ground-truth instance is matched at most once.
RecallResult recall_at_k(const std::vector<RankedTriplet>& ranked, const std::vector<RelationTarget>& ground_truth,
                         int top_k, EvalMode mode);

// Mean average precision over (predicate, object-class) categories present
// in the ground truth, with predictions pooled across images and
// precision-envelope AP per category. A true positive must match all three
// labels and both boxes (IoU > 0.5) of an unmatched ground-truth instance of
// its image.
double map_default(const std::vector<std::vector<RankedTriplet>>& ranked_per_image,
                   const std::vector<std::vector<RelationTarget>>& ground_truth_per_image);

// Aggregate metrics of one evaluation pass, serializable to the metrics JSON
// {"relationship":{"R@K,k=KP":recall,...},"phrase":{...},"map_default":m}.
struct MetricsReport {
    // keys like "R@50,k=1"; values are mean per-image recalls
    std::vector<std::pair<std::string, double>> relationship;
    std::vector<std::pair<std::string, double>> phrase;
    double map = 0.0;
    int n_images = 0;
    int n_vacuous = 0;
};

std::string to_json(const MetricsReport& report);

// Convenience wrapper: ranks every image's query outputs under both modes
// and fills a MetricsReport for the given top-K values and k settings
// (k_pred <= 0 selects k = all = n_predicate).
MetricsReport evaluate_outputs(const std::vector<std::vector<QueryOutput>>& outputs_per_image,
                               const std::vector<std::vector<RelationTarget>>& ground_truth_per_image,
                               const std::vector<int>& top_ks, const std::vector<int>& k_preds, int n_predicate);

}  // namespace partsum
