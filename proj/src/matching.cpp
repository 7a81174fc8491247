#include "partsum/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace partsum {

std::vector<RelationTarget> pad_targets(std::vector<RelationTarget> targets, int n_queries) {
    if (static_cast<int>(targets.size()) > n_queries) {
        throw CapacityError("pad_targets: " + std::to_string(targets.size()) + " targets exceed " +
                            std::to_string(n_queries) + " query slots; increase the query count");
    }
    targets.resize(static_cast<std::size_t>(n_queries));  // appended slots default to ∅
    return targets;
}

namespace {

double prob_at(const Tensor& dist, int row, int label) {
    return dist.at(static_cast<std::size_t>(row) * dist.cols() + label);
}

Box box_at(const Tensor& boxes, int row) {
    Box b;
    b.cx = boxes.at(static_cast<std::size_t>(row) * 4);
    b.cy = boxes.at(static_cast<std::size_t>(row) * 4 + 1);
    b.w = boxes.at(static_cast<std::size_t>(row) * 4 + 2);
    b.h = boxes.at(static_cast<std::size_t>(row) * 4 + 3);
    return b;
}

void check_labels(const RelationTarget& t, const Vocab& vocab, int j) {
    if (t.s_label < 0 || t.s_label >= vocab.n_entity || t.o_label < 0 || t.o_label >= vocab.n_entity ||
        t.p_label < 0 || t.p_label >= vocab.n_predicate) {
        throw DataError("matching_cost: target " + std::to_string(j) + " labels (" + std::to_string(t.s_label) +
                        "," + std::to_string(t.p_label) + "," + std::to_string(t.o_label) +
                        ") outside the vocabulary");
    }
}

}  // namespace

CostMatrix matching_cost(const CompositePrediction& pred, const std::vector<RelationTarget>& padded_targets,
                         const Vocab& vocab, const CostWeights& weights) {
    const int m = pred.n_queries;
    if (static_cast<int>(padded_targets.size()) != m) {
        throw ContractError("matching_cost: expected " + std::to_string(m) + " padded targets, got " +
                            std::to_string(padded_targets.size()));
    }
    if (!pred.has_part && !pred.has_sum) throw ContractError("matching_cost: prediction has no streams");
    CostMatrix cm;
    cm.m = m;
    cm.values.assign(static_cast<std::size_t>(m) * m, 0.0);
    cm.terms.assign(static_cast<std::size_t>(m) * m, CostTerms{});
    for (int j = 0; j < m; ++j) {
        const RelationTarget& t = padded_targets[static_cast<std::size_t>(j)];
        if (t.is_no_object()) continue;  // the indicator zeroes the whole column
        check_labels(t, vocab, j);
        int spo = -1;
        if (pred.has_part) {
            spo = vocab.triplet_index(t.s_label, t.p_label, t.o_label);
            if (spo < 0) {
                throw DataError("matching_cost: triplet (" + std::to_string(t.s_label) + "," +
                                std::to_string(t.p_label) + "," + std::to_string(t.o_label) +
                                ") missing from the triplet vocabulary");
            }
        }
        const Box union_tgt = t.union_target();
        for (int i = 0; i < m; ++i) {
            CostTerms& terms = cm.terms[static_cast<std::size_t>(i) * m + j];
            if (pred.has_part) {
                terms.cls -= prob_at(pred.part_s_prob, i, t.s_label);
                terms.cls -= prob_at(pred.part_p_prob, i, t.p_label);
                terms.cls -= prob_at(pred.part_o_prob, i, t.o_label);
                terms.cls -= prob_at(pred.part_spo_prob, i, spo);
                const Box bs = box_at(pred.part_s_box, i);
                const Box bo = box_at(pred.part_o_box, i);
                const Box bp = box_at(pred.part_p_box, i);
                terms.l1 += l1_box(bs, t.s_box) + l1_box(bo, t.o_box) + l1_box(bp, union_tgt);
                terms.giou += (1.0 - giou(bs, t.s_box)) + (1.0 - giou(bo, t.o_box)) + (1.0 - giou(bp, union_tgt));
            }
            if (pred.has_sum) {
                terms.cls -= prob_at(pred.sum_s_prob, i, t.s_label);
                terms.cls -= prob_at(pred.sum_p_prob, i, t.p_label);
                terms.cls -= prob_at(pred.sum_o_prob, i, t.o_label);
                const Box gs = box_at(pred.sum_s_box, i);
                const Box go = box_at(pred.sum_o_box, i);
                const Box gp = box_at(pred.sum_p_box, i);
                terms.l1 += l1_box(gs, t.s_box) + l1_box(go, t.o_box) + l1_box(gp, union_tgt);
                terms.giou += (1.0 - giou(gs, t.s_box)) + (1.0 - giou(go, t.o_box)) + (1.0 - giou(gp, union_tgt));
            }
            cm.values[static_cast<std::size_t>(i) * m + j] =
                weights.lambda_cls * terms.cls + weights.lambda_l1 * terms.l1 + weights.lambda_giou * terms.giou;
        }
    }
    return cm;
}

namespace {

void check_finite(const CostMatrix& cost, const char* op) {
    for (double v : cost.values) {
        if (!std::isfinite(v)) throw ContractError(std::string(op) + ": non-finite cost entry");
    }
}

double total_for(const CostMatrix& cost, const std::vector<int>& sigma) {
    double s = 0.0;
    for (int i = 0; i < cost.m; ++i) s += cost.at(i, sigma[static_cast<std::size_t>(i)]);
    return s;
}

// Jonker-Volgenant style shortest augmenting path assignment on a square
// matrix, O(n^3). Indices are 1-based internally; column 0 is the virtual
// source. Optionally exports the dual potentials (0-based).
std::vector<int> solve_lap(const std::vector<double>& a, int n, std::vector<double>* u_out = nullptr,
                           std::vector<double>* v_out = nullptr) {
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0), v(static_cast<std::size_t>(n) + 1, 0.0);
    std::vector<int> p(static_cast<std::size_t>(n) + 1, 0), way(static_cast<std::size_t>(n) + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(static_cast<std::size_t>(n) + 1, inf);
        std::vector<char> used(static_cast<std::size_t>(n) + 1, 0);
        do {
            used[static_cast<std::size_t>(j0)] = 1;
            const int i0 = p[static_cast<std::size_t>(j0)];
            int j1 = -1;
            double delta = inf;
            for (int j = 1; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) continue;
                const double cur =
                    a[static_cast<std::size_t>(i0 - 1) * n + (j - 1)] - u[static_cast<std::size_t>(i0)] -
                    v[static_cast<std::size_t>(j)];
                if (cur < minv[static_cast<std::size_t>(j)]) {
                    minv[static_cast<std::size_t>(j)] = cur;
                    way[static_cast<std::size_t>(j)] = j0;
                }
                if (minv[static_cast<std::size_t>(j)] < delta) {
                    delta = minv[static_cast<std::size_t>(j)];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) {
                    u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
                    v[static_cast<std::size_t>(j)] -= delta;
                } else {
                    minv[static_cast<std::size_t>(j)] -= delta;
                }
            }
            j0 = j1;
        } while (p[static_cast<std::size_t>(j0)] != 0);
        do {
            const int j1 = way[static_cast<std::size_t>(j0)];
            p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
            j0 = j1;
        } while (j0);
    }
    std::vector<int> sigma(static_cast<std::size_t>(n), -1);
    for (int j = 1; j <= n; ++j) {
        if (p[static_cast<std::size_t>(j)] > 0) sigma[static_cast<std::size_t>(p[static_cast<std::size_t>(j)]) - 1] = j - 1;
    }
    if (u_out) u_out->assign(u.begin() + 1, u.end());
    if (v_out) v_out->assign(v.begin() + 1, v.end());
    return sigma;
}

}  // namespace

Assignment hungarian(const CostMatrix& cost) {
    check_finite(cost, "hungarian");
    const int n = cost.m;
    if (n == 0) return Assignment{{}, 0.0};

    // One O(n^3) solve, exporting the dual potentials.
    std::vector<double> u, v;
    std::vector<int> sigma = solve_lap(cost.values, n, &u, &v);
    double total = total_for(cost, sigma);

    // Lexicographic tie-refinement. By complementary slackness every edge of
    // every optimal assignment has zero reduced cost against the optimal
    // duals, so for each row only the (usually empty) set of cheaper
    // near-tight columns can possibly tie; each such candidate is verified by
    // an exact sub-solve whose total is summed in the same row order as the
    // brute-force oracle. Unique-optimum inputs stay at one solve; cost
    // perturbations were not an option because they wash out in floating
    // point once they fall below one ulp of the entries.
    double max_abs = 0.0;
    for (double c : cost.values) max_abs = std::max(max_abs, std::fabs(c));
    const double tol = 1e-9 * std::max(1.0, max_abs);

    for (int i = 0; i < n - 1; ++i) {
        std::vector<int> free_cols(sigma.begin() + i, sigma.end());
        std::sort(free_cols.begin(), free_cols.end());
        for (const int j : free_cols) {
            if (j >= sigma[static_cast<std::size_t>(i)]) break;
            if (cost.at(i, j) - u[static_cast<std::size_t>(i)] - v[static_cast<std::size_t>(j)] > tol) continue;

            const int k = n - i - 1;
            std::vector<int> rest;
            rest.reserve(static_cast<std::size_t>(k));
            for (const int c : free_cols) {
                if (c != j) rest.push_back(c);
            }
            std::vector<double> sub(static_cast<std::size_t>(k) * k);
            for (int r = 0; r < k; ++r) {
                for (int c = 0; c < k; ++c) {
                    sub[static_cast<std::size_t>(r) * k + c] = cost.at(i + 1 + r, rest[static_cast<std::size_t>(c)]);
                }
            }
            const std::vector<int> sub_sigma = solve_lap(sub, k);
            std::vector<int> cand(sigma);
            cand[static_cast<std::size_t>(i)] = j;
            for (int r = 0; r < k; ++r) {
                cand[static_cast<std::size_t>(i + 1 + r)] = rest[static_cast<std::size_t>(sub_sigma[static_cast<std::size_t>(r)])];
            }
            const double cand_total = total_for(cost, cand);
            if (cand_total <= total) {
                sigma = std::move(cand);
                total = cand_total;
                break;
            }
        }
    }
    return Assignment{std::move(sigma), total};
}

Assignment brute_force_assignment(const CostMatrix& cost) {
    const int n = cost.m;
    if (n > 8) {
        throw CapacityError("brute_force_assignment: M = " + std::to_string(n) + " exceeds the M <= 8 limit");
    }
    check_finite(cost, "brute_force_assignment");
    if (n == 0) return Assignment{{}, 0.0};
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    Assignment best;
    best.sigma = perm;
    best.total_cost = total_for(cost, perm);
    while (std::next_permutation(perm.begin(), perm.end())) {
        const double c = total_for(cost, perm);
        if (c < best.total_cost) {
            best.total_cost = c;
            best.sigma = perm;
        }
    }
    return best;
}

}  // namespace partsum
