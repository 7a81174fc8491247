#include "partsum/loss.hpp"

#include <algorithm>

namespace partsum {

namespace {

void check_assignment(const Assignment& a, int m, std::size_t layer) {
    if (static_cast<int>(a.sigma.size()) != m) {
        throw ContractError("set_loss: layer " + std::to_string(layer) + " assignment has " +
                            std::to_string(a.sigma.size()) + " entries for " + std::to_string(m) + " queries");
    }
    std::vector<char> seen(static_cast<std::size_t>(m), 0);
    for (int t : a.sigma) {
        if (t < 0 || t >= m || seen[static_cast<std::size_t>(t)]) {
            throw ContractError("set_loss: layer " + std::to_string(layer) + " assignment is not a permutation");
        }
        seen[static_cast<std::size_t>(t)] = 1;
    }
}

// Weighted per-query-mean NLL of the assigned class per query.
Tensor cls_term(const Tensor& logits, const std::vector<int>& classes, const std::vector<double>& query_weights) {
    const int m = logits.dim(0);
    Tensor nll = scale(pick(log_softmax_rows(logits), classes), -1.0);
    Tensor w = Tensor::from_data({m, 1}, std::vector<double>(query_weights));
    return scale(sum_all(mul(nll, w)), 1.0 / m);
}

struct BoxTermInputs {
    std::vector<int> rows;           // matched real queries
    std::vector<double> target_data; // their target boxes, row-major [R x 4]
};

// Per-query-mean box penalties (L1 and 1-giou) over matched real queries.
std::pair<Tensor, Tensor> box_terms(const Tensor& pred_boxes, const BoxTermInputs& in, int m) {
    Tensor pred = take_rows(pred_boxes, in.rows);
    Tensor tgt = Tensor::from_data({static_cast<int>(in.rows.size()), 4}, std::vector<double>(in.target_data));
    Tensor l1 = scale(sum_all(box_l1_rows(pred, tgt)), 1.0 / m);
    Tensor one = Tensor::full({static_cast<int>(in.rows.size()), 1}, 1.0);
    Tensor gi = scale(sum_all(sub(one, box_giou_rows(pred, tgt))), 1.0 / m);
    return {l1, gi};
}

void push_box(std::vector<double>& data, const Box& b) {
    data.push_back(b.cx);
    data.push_back(b.cy);
    data.push_back(b.w);
    data.push_back(b.h);
}

}  // namespace

LossReport set_loss(const std::vector<CompositePrediction>& preds_per_layer,
                    const std::vector<RelationTarget>& padded_targets,
                    const std::vector<Assignment>& assignments_per_layer, const Vocab& vocab,
                    const LossWeights& weights) {
    if (preds_per_layer.empty()) throw ContractError("set_loss: no layers");
    if (preds_per_layer.size() != assignments_per_layer.size()) {
        throw ContractError("set_loss: " + std::to_string(preds_per_layer.size()) + " prediction layers vs " +
                            std::to_string(assignments_per_layer.size()) + " assignments");
    }
    const int m = preds_per_layer.front().n_queries;
    if (static_cast<int>(padded_targets.size()) != m) {
        throw ContractError("set_loss: expected " + std::to_string(m) + " padded targets, got " +
                            std::to_string(padded_targets.size()));
    }

    LossReport report;
    report.layers.resize(preds_per_layer.size());
    Tensor total = Tensor::scalar(0.0);

    for (std::size_t l = 0; l < preds_per_layer.size(); ++l) {
        const CompositePrediction& pred = preds_per_layer[l];
        const Assignment& assign = assignments_per_layer[l];
        if (pred.n_queries != m) {
            throw ContractError("set_loss: layer " + std::to_string(l) + " has " + std::to_string(pred.n_queries) +
                                " queries, expected " + std::to_string(m));
        }
        check_assignment(assign, m, l);
        LayerLossBreakdown& bd = report.layers[l];

        // Assigned class per head and per-query NLL weights; box inputs for
        // the queries matched to real targets.
        std::vector<int> cls_s(m), cls_o(m), cls_p(m), cls_spo(m);
        std::vector<double> qw(static_cast<std::size_t>(m));
        BoxTermInputs box_s, box_o, box_union;
        for (int i = 0; i < m; ++i) {
            const RelationTarget& t = padded_targets[static_cast<std::size_t>(assign.sigma[static_cast<std::size_t>(i)])];
            if (t.is_no_object()) {
                cls_s[i] = vocab.entity_no_object();
                cls_o[i] = vocab.entity_no_object();
                cls_p[i] = vocab.predicate_no_object();
                cls_spo[i] = vocab.triplet_no_object();
                qw[static_cast<std::size_t>(i)] = weights.no_object_weight;
                continue;
            }
            cls_s[i] = t.s_label;
            cls_o[i] = t.o_label;
            cls_p[i] = t.p_label;
            if (pred.has_part) {
                const int spo = vocab.triplet_index(t.s_label, t.p_label, t.o_label);
                if (spo < 0) {
                    throw DataError("set_loss: triplet (" + std::to_string(t.s_label) + "," +
                                    std::to_string(t.p_label) + "," + std::to_string(t.o_label) +
                                    ") missing from the triplet vocabulary");
                }
                cls_spo[i] = spo;
            }
            qw[static_cast<std::size_t>(i)] = 1.0;
            box_s.rows.push_back(i);
            push_box(box_s.target_data, t.s_box);
            box_o.rows.push_back(i);
            push_box(box_o.target_data, t.o_box);
            box_union.rows.push_back(i);
            push_box(box_union.target_data, t.union_target());
        }
        const bool any_real = !box_s.rows.empty();

        auto add_cls = [&](const Tensor& logits, const std::vector<int>& classes, double stream_w, double& slot) {
            Tensor term = cls_term(logits, classes, qw);
            slot = term.item();
            total = add(total, scale(term, weights.lambda_cls * stream_w));
        };
        auto add_box = [&](const Tensor& boxes, const BoxTermInputs& in, double stream_w, double& l1_slot,
                           double& giou_slot) {
            // Zero-weighted terms are gated out entirely: nothing in the
            // breakdown, nothing in the graph.
            if (!any_real || (weights.lambda_l1 == 0.0 && weights.lambda_giou == 0.0)) return;
            auto [l1, gi] = box_terms(boxes, in, m);
            if (weights.lambda_l1 != 0.0) {
                l1_slot = l1.item();
                total = add(total, scale(l1, weights.lambda_l1 * stream_w));
            }
            if (weights.lambda_giou != 0.0) {
                giou_slot = gi.item();
                total = add(total, scale(gi, weights.lambda_giou * stream_w));
            }
        };

        if (pred.has_part) {
            add_cls(pred.part_s_logit, cls_s, 1.0, bd.part_cls[0]);
            add_cls(pred.part_o_logit, cls_o, 1.0, bd.part_cls[1]);
            add_cls(pred.part_p_logit, cls_p, 1.0, bd.part_cls[2]);
            add_cls(pred.part_spo_logit, cls_spo, 1.0, bd.part_cls[3]);
            add_box(pred.part_s_box, box_s, 1.0, bd.part_l1[0], bd.part_giou[0]);
            add_box(pred.part_o_box, box_o, 1.0, bd.part_l1[1], bd.part_giou[1]);
            add_box(pred.part_p_box, box_union, 1.0, bd.part_l1[2], bd.part_giou[2]);
        }
        if (pred.has_sum) {
            const double sw = weights.sum_stream_weight;
            add_cls(pred.sum_s_logit, cls_s, sw, bd.sum_cls[0]);
            add_cls(pred.sum_o_logit, cls_o, sw, bd.sum_cls[1]);
            add_cls(pred.sum_p_logit, cls_p, sw, bd.sum_cls[2]);
            add_box(pred.sum_s_box, box_s, sw, bd.sum_l1[0], bd.sum_giou[0]);
            add_box(pred.sum_o_box, box_o, sw, bd.sum_l1[1], bd.sum_giou[1]);
            add_box(pred.sum_p_box, box_union, sw, bd.sum_l1[2], bd.sum_giou[2]);
        }
        if (!pred.has_part && !pred.has_sum) {
            throw ContractError("set_loss: layer " + std::to_string(l) + " prediction has no streams");
        }
    }

    report.total_tensor = total;
    report.total = total.item();
    return report;
}

}  // namespace partsum
