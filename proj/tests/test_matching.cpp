#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <vector>

#include "partsum/matching.hpp"
#include "partsum/rng.hpp"

using namespace partsum;

namespace {

Vocab small_vocab() {
    Vocab v;
    v.n_entity = 4;
    v.n_predicate = 3;
    v.triplet_vocab = {{0, 1, 2}, {1, 0, 3}};
    return v;
}

RelationTarget real_target(int s, int p, int o, Box s_box, Box o_box) {
    RelationTarget t;
    t.s_label = s;
    t.p_label = p;
    t.o_label = o;
    t.s_box = s_box;
    t.o_box = o_box;
    return t;
}

Tensor one_hot_rows(int rows, int cols, const std::vector<int>& hot) {
    std::vector<double> data(static_cast<std::size_t>(rows) * cols, 0.0);
    for (int r = 0; r < rows; ++r) data[static_cast<std::size_t>(r) * cols + hot[static_cast<std::size_t>(r)]] = 1.0;
    return Tensor::from_data({rows, cols}, std::move(data));
}

Tensor box_rows(const std::vector<Box>& boxes) {
    std::vector<double> data;
    for (const Box& b : boxes) {
        data.push_back(b.cx);
        data.push_back(b.cy);
        data.push_back(b.w);
        data.push_back(b.h);
    }
    return Tensor::from_data({static_cast<int>(boxes.size()), 4}, std::move(data));
}

// Both streams predict the given labels with probability one and the exact
// boxes; spo reads from the triplet vocabulary.
CompositePrediction exact_prediction(const Vocab& vocab, const std::vector<RelationTarget>& targets) {
    const int m = static_cast<int>(targets.size());
    std::vector<int> s, o, p, spo;
    std::vector<Box> sb, ob, ub;
    for (const RelationTarget& t : targets) {
        s.push_back(t.s_label);
        o.push_back(t.o_label);
        p.push_back(t.p_label);
        const int ti = vocab.triplet_index(t.s_label, t.p_label, t.o_label);
        REQUIRE(ti >= 0);
        spo.push_back(ti);
        sb.push_back(t.s_box);
        ob.push_back(t.o_box);
        ub.push_back(t.union_target());
    }
    CompositePrediction pred;
    pred.n_queries = m;
    pred.has_part = true;
    pred.has_sum = true;
    pred.part_s_prob = one_hot_rows(m, vocab.entity_classes(), s);
    pred.part_o_prob = one_hot_rows(m, vocab.entity_classes(), o);
    pred.part_p_prob = one_hot_rows(m, vocab.predicate_classes(), p);
    pred.part_spo_prob = one_hot_rows(m, vocab.triplet_classes(), spo);
    pred.sum_s_prob = pred.part_s_prob;
    pred.sum_o_prob = pred.part_o_prob;
    pred.sum_p_prob = pred.part_p_prob;
    pred.part_s_box = box_rows(sb);
    pred.part_o_box = box_rows(ob);
    pred.part_p_box = box_rows(ub);
    pred.sum_s_box = pred.part_s_box;
    pred.sum_o_box = pred.part_o_box;
    pred.sum_p_box = pred.part_p_box;
    return pred;
}

CostMatrix raw_cost(int m, std::vector<double> values) {
    CostMatrix c;
    c.m = m;
    c.values = std::move(values);
    c.terms.assign(static_cast<std::size_t>(m) * m, CostTerms{});
    return c;
}

CostMatrix random_cost(int m, Rng& rng, bool integer_ties = false) {
    std::vector<double> values(static_cast<std::size_t>(m) * m);
    for (double& v : values) v = integer_ties ? static_cast<double>(rng.uniform_int(0, 2)) : rng.uniform(-5.0, 5.0);
    return raw_cost(m, std::move(values));
}

}  // namespace

TEST_CASE("pad_targets preserves order and pads with no-object slots") {
    const Box b{0.5, 0.5, 0.2, 0.2};
    std::vector<RelationTarget> two = {real_target(0, 1, 2, b, b), real_target(1, 0, 3, b, b)};

    const auto all_null = pad_targets({}, 3);
    REQUIRE(all_null.size() == 3);
    for (const RelationTarget& t : all_null) CHECK(t.is_no_object());

    const auto unchanged = pad_targets(two, 2);
    REQUIRE(unchanged.size() == 2);
    CHECK(unchanged[0].s_label == 0);
    CHECK(unchanged[1].s_label == 1);

    const auto padded = pad_targets(two, 4);
    REQUIRE(padded.size() == 4);
    CHECK(padded[0].p_label == 1);
    CHECK(padded[1].p_label == 0);
    CHECK(padded[2].is_no_object());
    CHECK(padded[3].is_no_object());

    CHECK_THROWS_AS(pad_targets(two, 1), CapacityError);
}

TEST_CASE("no-object targets cost exactly zero") {
    const Vocab vocab = small_vocab();
    const Box b{0.5, 0.5, 0.2, 0.2};
    const auto real = real_target(0, 1, 2, b, b);
    CompositePrediction pred = exact_prediction(vocab, {real, real});

    const CostMatrix cost = matching_cost(pred, pad_targets({}, 2), vocab, CostWeights{});
    for (double v : cost.values) CHECK(v == 0.0);
}

TEST_CASE("a perfect prediction earns the full classification reward") {
    const Vocab vocab = small_vocab();
    const auto target = real_target(0, 1, 2, Box{0.3, 0.4, 0.2, 0.3}, Box{0.6, 0.5, 0.2, 0.2});
    const CompositePrediction pred = exact_prediction(vocab, {target});

    const CostMatrix cost = matching_cost(pred, {target}, vocab, CostWeights{});
    // Seven probability terms at probability one; box terms vanish exactly.
    CHECK(cost.at(0, 0) == -7.0);
    CHECK(cost.terms_at(0, 0).cls == -7.0);
    CHECK(cost.terms_at(0, 0).l1 == 0.0);
    CHECK(cost.terms_at(0, 0).giou == 0.0);

    CostWeights heavy;
    heavy.lambda_cls = 2.5;
    CHECK(matching_cost(pred, {target}, vocab, heavy).at(0, 0) == doctest::Approx(-17.5).epsilon(1e-12));
}

TEST_CASE("raising the subject probability strictly lowers the cost") {
    const Vocab vocab = small_vocab();
    const auto target = real_target(0, 1, 2, Box{0.3, 0.4, 0.2, 0.3}, Box{0.6, 0.5, 0.2, 0.2});
    CompositePrediction pred = exact_prediction(vocab, {target});

    pred.part_s_prob = Tensor::from_data({1, vocab.entity_classes()}, {0.2, 0.3, 0.3, 0.1, 0.1});
    const double before = matching_cost(pred, {target}, vocab, CostWeights{}).at(0, 0);
    pred.part_s_prob = Tensor::from_data({1, vocab.entity_classes()}, {0.5, 0.2, 0.2, 0.05, 0.05});
    const double after = matching_cost(pred, {target}, vocab, CostWeights{}).at(0, 0);
    CHECK(after < before);
}

TEST_CASE("matching_cost validates labels and layer alignment") {
    const Vocab vocab = small_vocab();
    const Box b{0.5, 0.5, 0.2, 0.2};
    const auto target = real_target(0, 1, 2, b, b);
    const CompositePrediction pred = exact_prediction(vocab, {target});

    CHECK_THROWS_AS(matching_cost(pred, {real_target(9, 1, 2, b, b)}, vocab, CostWeights{}), DataError);
    CHECK_THROWS_AS(matching_cost(pred, {target, target}, vocab, CostWeights{}), ContractError);
    // A real target whose triplet was never enumerated is a data problem too.
    CHECK_THROWS_AS(matching_cost(pred, {real_target(2, 2, 2, b, b)}, vocab, CostWeights{}), DataError);
}

TEST_CASE("hungarian picks the identity on a diagonal-favoring matrix") {
    const CostMatrix cost = raw_cost(3, {0, 1, 1, 1, 0, 1, 1, 1, 0});
    const Assignment a = hungarian(cost);
    CHECK(a.sigma == std::vector<int>{0, 1, 2});
    CHECK(a.total_cost == 0.0);
}

TEST_CASE("hungarian solves the anti-diagonal product matrix") {
    const CostMatrix cost = raw_cost(3, {1, 2, 3, 2, 4, 6, 3, 6, 9});
    const Assignment a = hungarian(cost);
    const Assignment b = brute_force_assignment(cost);
    CHECK(a.sigma == std::vector<int>{2, 1, 0});
    CHECK(a.total_cost == 10.0);
    CHECK(b.sigma == a.sigma);
    CHECK(b.total_cost == a.total_cost);
}

TEST_CASE("hungarian matches the exhaustive oracle on random matrices") {
    Rng rng(51);
    for (int m = 2; m <= 7; ++m) {
        for (int it = 0; it < 60; ++it) {
            const CostMatrix cost = random_cost(m, rng);
            const Assignment fast = hungarian(cost);
            const Assignment slow = brute_force_assignment(cost);
            REQUIRE(fast.sigma == slow.sigma);
            REQUIRE(fast.total_cost == slow.total_cost);
        }
    }
}

TEST_CASE("hungarian matches the oracle including ties") {
    Rng rng(53);
    for (int m = 2; m <= 6; ++m) {
        for (int it = 0; it < 60; ++it) {
            const CostMatrix cost = random_cost(m, rng, true);
            const Assignment fast = hungarian(cost);
            const Assignment slow = brute_force_assignment(cost);
            REQUIRE(fast.sigma == slow.sigma);
            REQUIRE(fast.total_cost == slow.total_cost);
        }
    }

    // All ties: the lexicographically smallest permutation wins.
    const Assignment flat = hungarian(raw_cost(4, std::vector<double>(16, 3.0)));
    CHECK(flat.sigma == std::vector<int>{0, 1, 2, 3});
}

TEST_CASE("permuting target columns permutes the assignment") {
    Rng rng(55);
    const int m = 5;
    const CostMatrix cost = random_cost(m, rng);
    const std::vector<int> pi = {3, 0, 4, 1, 2};

    CostMatrix permuted = raw_cost(m, std::vector<double>(static_cast<std::size_t>(m) * m, 0.0));
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            permuted.values[static_cast<std::size_t>(i) * m + pi[static_cast<std::size_t>(j)]] = cost.at(i, j);

    const Assignment base = hungarian(cost);
    const Assignment moved = hungarian(permuted);
    CHECK(moved.total_cost == doctest::Approx(base.total_cost).epsilon(1e-12));
    for (int i = 0; i < m; ++i) CHECK(moved.sigma[i] == pi[static_cast<std::size_t>(base.sigma[i])]);
}

TEST_CASE("adding a constant to one row keeps the optimum") {
    Rng rng(57);
    const int m = 5;
    const CostMatrix cost = random_cost(m, rng);
    CostMatrix shifted = cost;
    for (int j = 0; j < m; ++j) shifted.values[static_cast<std::size_t>(2) * m + j] += 11.5;

    const Assignment base = hungarian(cost);
    const Assignment moved = hungarian(shifted);
    CHECK(moved.sigma == base.sigma);
    CHECK(moved.total_cost == doctest::Approx(base.total_cost + 11.5).epsilon(1e-12));
}

TEST_CASE("capacity and contract errors") {
    CHECK_THROWS_AS(brute_force_assignment(raw_cost(9, std::vector<double>(81, 0.0))), CapacityError);

    CostMatrix bad = raw_cost(2, {0.0, 1.0, std::numeric_limits<double>::quiet_NaN(), 0.0});
    CHECK_THROWS_AS(hungarian(bad), ContractError);
    bad.values[2] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(hungarian(bad), ContractError);
}

TEST_CASE("hungarian scales like a cubic method") {
    Rng rng(59);
    auto time_solve = [&](int m) {
        const CostMatrix cost = random_cost(m, rng);
        const auto start = std::chrono::steady_clock::now();
        hungarian(cost);
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    };
    time_solve(64);  // warm-up
    const double t64 = std::max(time_solve(64), 1e-4);
    const double t128 = time_solve(128);
    // A cubic solver doubles M at ~8x cost; leave generous headroom for noise.
    CHECK(t128 / t64 < 30.0);
    CHECK(t128 < 1.0);
}
