#include "partsum/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <json.hpp>

namespace partsum {

const char* to_string(EvalMode m) { return m == EvalMode::relationship ? "relationship" : "phrase"; }

namespace {

// Argmax over the full distribution (∅ last); ties resolve to the first index.
int full_argmax(const std::vector<double>& dist) {
    int best = 0;
    for (std::size_t i = 1; i < dist.size(); ++i)
        if (dist[i] > dist[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
    return best;
}

}  // namespace

std::vector<RankedTriplet> rank_predictions(const std::vector<QueryOutput>& queries, EvalMode mode, int k_pred) {
    if (k_pred < 1) throw ConfigError("rank_predictions: k_pred must be >= 1");
    std::vector<RankedTriplet> out;
    for (std::size_t qi = 0; qi < queries.size(); ++qi) {
        const QueryOutput& q = queries[qi];
        const int no_ent = static_cast<int>(q.s_prob.size()) - 1;
        const int no_pred = static_cast<int>(q.p_prob.size()) - 1;
        const int s_arg = full_argmax(q.s_prob);
        const int o_arg = full_argmax(q.o_prob);
        const int p_arg = full_argmax(q.p_prob);
        if (s_arg == no_ent || o_arg == no_ent || p_arg == no_pred) continue;  // ∅ query

        // Real predicates by descending probability, ties to the smaller label.
        std::vector<int> order(static_cast<std::size_t>(no_pred));
        for (int p = 0; p < no_pred; ++p) order[static_cast<std::size_t>(p)] = p;
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int b) { return q.p_prob[static_cast<std::size_t>(a)] > q.p_prob[static_cast<std::size_t>(b)]; });
        const int n_cand = std::min<int>(k_pred, no_pred);
        for (int r = 0; r < n_cand; ++r) {
            RankedTriplet t;
            t.s_label = s_arg;
            t.o_label = o_arg;
            t.p_label = order[static_cast<std::size_t>(r)];
            t.score = q.s_prob[static_cast<std::size_t>(s_arg)] * q.p_prob[static_cast<std::size_t>(t.p_label)] *
                      q.o_prob[static_cast<std::size_t>(o_arg)];
            if (mode == EvalMode::phrase) {
                const Box u = union_box(q.s_box, q.o_box);
                t.s_box = u;
                t.o_box = u;
            } else {
                t.s_box = q.s_box;
                t.o_box = q.o_box;
            }
            t.query_index = static_cast<int>(qi);
            t.predicate_rank = r;
            out.push_back(t);
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const RankedTriplet& a, const RankedTriplet& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.query_index != b.query_index) return a.query_index < b.query_index;
        return a.predicate_rank < b.predicate_rank;
    });
    return out;
}

namespace {

struct GtBoxes {
    Box s_box, o_box;
};

GtBoxes gt_boxes_for_mode(const RelationTarget& t, EvalMode mode) {
    if (mode == EvalMode::phrase) {
        const Box u = t.union_target();
        return {u, u};
    }
    return {t.s_box, t.o_box};
}

bool hit(const RankedTriplet& cand, const RelationTarget& gt, const GtBoxes& boxes) {
    return cand.s_label == gt.s_label && cand.p_label == gt.p_label && cand.o_label == gt.o_label &&
           iou(cand.s_box, boxes.s_box) > 0.5 && iou(cand.o_box, boxes.o_box) > 0.5;
}

}  // namespace

RecallResult recall_at_k(const std::vector<RankedTriplet>& ranked, const std::vector<RelationTarget>& ground_truth,
                         int top_k, EvalMode mode) {
    if (top_k < 1) throw ConfigError("recall_at_k: top_k must be >= 1");
    for (const RelationTarget& t : ground_truth) {
        if (t.is_no_object()) throw ContractError("recall_at_k: ground truth must not contain ∅ padding");
    }
    if (ground_truth.empty()) return {1.0, true};
    std::vector<GtBoxes> boxes;
    boxes.reserve(ground_truth.size());
    for (const RelationTarget& t : ground_truth) boxes.push_back(gt_boxes_for_mode(t, mode));
    std::vector<char> matched(ground_truth.size(), 0);
    int hits = 0;
    const int limit = std::min<int>(top_k, static_cast<int>(ranked.size()));
    for (int c = 0; c < limit; ++c) {
        for (std::size_t g = 0; g < ground_truth.size(); ++g) {
            if (matched[g]) continue;
            if (hit(ranked[static_cast<std::size_t>(c)], ground_truth[g], boxes[g])) {
                matched[g] = 1;
                ++hits;
                break;
            }
        }
    }
    return {static_cast<double>(hits) / static_cast<double>(ground_truth.size()), false};
}

double map_default(const std::vector<std::vector<RankedTriplet>>& ranked_per_image,
                   const std::vector<std::vector<RelationTarget>>& ground_truth_per_image) {
    if (ranked_per_image.size() != ground_truth_per_image.size()) {
        throw ContractError("map_default: " + std::to_string(ranked_per_image.size()) + " prediction lists vs " +
                            std::to_string(ground_truth_per_image.size()) + " ground-truth lists");
    }
    using Category = std::pair<int, int>;  // (predicate, object class)
    std::map<Category, int> gt_count;
    for (const auto& gts : ground_truth_per_image) {
        for (const RelationTarget& t : gts) {
            if (t.is_no_object()) throw ContractError("map_default: ground truth must not contain ∅ padding");
            ++gt_count[{t.p_label, t.o_label}];
        }
    }
    if (gt_count.empty()) return 0.0;

    struct PooledPrediction {
        double score;
        int image, query_index, predicate_rank;
        const RankedTriplet* triplet;
    };
    std::map<Category, std::vector<PooledPrediction>> pooled;
    for (std::size_t img = 0; img < ranked_per_image.size(); ++img) {
        for (const RankedTriplet& t : ranked_per_image[img]) {
            pooled[{t.p_label, t.o_label}].push_back(
                {t.score, static_cast<int>(img), t.query_index, t.predicate_rank, &t});
        }
    }

    double ap_sum = 0.0;
    for (const auto& [category, n_gt] : gt_count) {
        auto it = pooled.find(category);
        double ap = 0.0;
        if (it != pooled.end()) {
            std::vector<PooledPrediction>& preds = it->second;
            std::stable_sort(preds.begin(), preds.end(), [](const PooledPrediction& a, const PooledPrediction& b) {
                if (a.score != b.score) return a.score > b.score;
                if (a.image != b.image) return a.image < b.image;
                if (a.query_index != b.query_index) return a.query_index < b.query_index;
                return a.predicate_rank < b.predicate_rank;
            });
            std::vector<std::vector<char>> matched(ground_truth_per_image.size());
            for (std::size_t img = 0; img < ground_truth_per_image.size(); ++img)
                matched[img].assign(ground_truth_per_image[img].size(), 0);
            std::vector<char> is_tp(preds.size(), 0);
            for (std::size_t c = 0; c < preds.size(); ++c) {
                const auto& gts = ground_truth_per_image[static_cast<std::size_t>(preds[c].image)];
                for (std::size_t g = 0; g < gts.size(); ++g) {
                    const RelationTarget& gt = gts[g];
                    if (gt.p_label != category.first || gt.o_label != category.second) continue;
                    if (matched[static_cast<std::size_t>(preds[c].image)][g]) continue;
                    if (hit(*preds[c].triplet, gt, {gt.s_box, gt.o_box})) {
                        matched[static_cast<std::size_t>(preds[c].image)][g] = 1;
                        is_tp[c] = 1;
                        break;
                    }
                }
            }
            // Precision-envelope integration of the PR curve.
            std::vector<double> precision(preds.size()), recall(preds.size());
            int tp = 0;
            for (std::size_t c = 0; c < preds.size(); ++c) {
                if (is_tp[c]) ++tp;
                precision[c] = static_cast<double>(tp) / static_cast<double>(c + 1);
                recall[c] = static_cast<double>(tp) / static_cast<double>(n_gt);
            }
            for (std::size_t c = preds.size(); c-- > 1;) precision[c - 1] = std::max(precision[c - 1], precision[c]);
            double prev_recall = 0.0;
            for (std::size_t c = 0; c < preds.size(); ++c) {
                ap += (recall[c] - prev_recall) * precision[c];
                prev_recall = recall[c];
            }
        }
        ap_sum += ap;
    }
    return ap_sum / static_cast<double>(gt_count.size());
}

std::string to_json(const MetricsReport& report) {
    nlohmann::json j;
    for (const auto& [key, value] : report.relationship) j["relationship"][key] = value;
    for (const auto& [key, value] : report.phrase) j["phrase"][key] = value;
    j["map_default"] = report.map;
    j["n_images"] = report.n_images;
    j["n_vacuous"] = report.n_vacuous;
    return j.dump(2);
}

MetricsReport evaluate_outputs(const std::vector<std::vector<QueryOutput>>& outputs_per_image,
                               const std::vector<std::vector<RelationTarget>>& ground_truth_per_image,
                               const std::vector<int>& top_ks, const std::vector<int>& k_preds, int n_predicate) {
    if (outputs_per_image.size() != ground_truth_per_image.size()) {
        throw ContractError("evaluate_outputs: image count mismatch");
    }
    MetricsReport report;
    report.n_images = static_cast<int>(outputs_per_image.size());
    for (EvalMode mode : {EvalMode::relationship, EvalMode::phrase}) {
        auto& slot = mode == EvalMode::relationship ? report.relationship : report.phrase;
        for (int kp : k_preds) {
            const int k_pred = kp <= 0 ? n_predicate : kp;
            std::vector<std::vector<RankedTriplet>> ranked;
            ranked.reserve(outputs_per_image.size());
            for (const auto& outputs : outputs_per_image) ranked.push_back(rank_predictions(outputs, mode, k_pred));
            for (int top_k : top_ks) {
                double total = 0.0;
                int vacuous = 0;
                for (std::size_t img = 0; img < ranked.size(); ++img) {
                    const RecallResult r = recall_at_k(ranked[img], ground_truth_per_image[img], top_k, mode);
                    total += r.recall;
                    vacuous += r.vacuous ? 1 : 0;
                }
                if (mode == EvalMode::relationship && kp == k_preds.front() && top_k == top_ks.front()) {
                    report.n_vacuous = vacuous;
                }
                std::ostringstream key;
                key << "R@" << top_k << ",k=" << (kp <= 0 ? std::string("all") : std::to_string(kp));
                slot.emplace_back(key.str(), total / static_cast<double>(ranked.size()));
            }
        }
    }
    // Relationship-mode ranking with every predicate hypothesis feeds the mAP.
    std::vector<std::vector<RankedTriplet>> ranked_all;
    ranked_all.reserve(outputs_per_image.size());
    for (const auto& outputs : outputs_per_image)
        ranked_all.push_back(rank_predictions(outputs, EvalMode::relationship, n_predicate));
    report.map = map_default(ranked_all, ground_truth_per_image);
    return report;
}

}  // namespace partsum
