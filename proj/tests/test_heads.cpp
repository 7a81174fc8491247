#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <sstream>
#include <vector>

#include "partsum/grad_check.hpp"
#include "partsum/heads.hpp"
#include "partsum/rng.hpp"

using namespace partsum;

namespace {

constexpr int kDim = 8;

Vocab small_vocab() {
    Vocab v;
    v.n_entity = 4;
    v.n_predicate = 3;
    v.triplet_vocab = {{0, 1, 2}, {1, 0, 3}, {2, 2, 2}};
    return v;
}

Tensor random_tensor(Shape shape, Rng& rng, bool requires_grad = false) {
    std::vector<double> data(shape_numel(shape));
    for (double& v : data) v = rng.normal();
    return Tensor::from_data(std::move(shape), std::move(data), requires_grad);
}

// Deterministic weighted reduction: the weights depend only on (seed, shape),
// so every call inside a grad_check sees identical coefficients.
Tensor weighted_sum(const Tensor& y, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> w(y.numel());
    for (double& v : w) v = rng.uniform(0.5, 1.5);
    return sum_all(mul(y, Tensor::from_data(y.shape(), std::move(w))));
}

void zero_all_params(ParameterStore& ps) {
    for (const auto& [name, t] : ps.entries()) {
        Tensor handle = t;
        for (double& v : handle.mutable_data()) v = 0.0;
    }
}

void check_rows_sum_to_one(const Tensor& prob) {
    const int cols = prob.cols();
    for (int r = 0; r < prob.rows(); ++r) {
        double s = 0.0;
        for (int c = 0; c < cols; ++c) s += prob.at(static_cast<std::size_t>(r) * cols + c);
        CHECK(std::abs(s - 1.0) < 1e-9);
    }
}

// A full two-stream prediction driven by random embeddings.
CompositePrediction random_prediction(int m, const Vocab& vocab, std::uint64_t seed) {
    ParameterStore ps;
    Rng rng(seed);
    PartHeads part(ps, "part", kDim, vocab, rng);
    SumHeads sum(ps, "sum", kDim, vocab, rng);
    CompositePrediction pred;
    Rng erng(seed + 1);
    part.predict(random_tensor({m, 3, kDim}, erng), pred);
    sum.predict(random_tensor({m, kDim}, erng), pred);
    return pred;
}

}  // namespace

TEST_CASE("vocab exposes class layouts with no-object last") {
    const Vocab v = small_vocab();
    CHECK_NOTHROW(v.validate());
    CHECK(v.entity_classes() == 5);
    CHECK(v.predicate_classes() == 4);
    CHECK(v.triplet_classes() == 4);
    CHECK(v.entity_no_object() == 4);
    CHECK(v.predicate_no_object() == 3);
    CHECK(v.triplet_no_object() == 3);
    CHECK(v.triplet_index(1, 0, 3) == 1);
    CHECK(v.triplet_index(3, 0, 1) == -1);

    Vocab bad = small_vocab();
    bad.n_entity = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = small_vocab();
    bad.triplet_vocab.push_back({0, 1, 2});  // duplicate
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = small_vocab();
    bad.triplet_vocab.push_back({0, 9, 0});  // predicate outside the space
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("zero heads on zero embeddings emit uniform classes and centered boxes") {
    const Vocab vocab = small_vocab();
    ParameterStore ps;
    Rng rng(1);
    PartHeads part(ps, "part", kDim, vocab, rng);
    SumHeads sum(ps, "sum", kDim, vocab, rng);
    zero_all_params(ps);

    CompositePrediction pred;
    part.predict(Tensor::zeros({2, 3, kDim}), pred);
    sum.predict(Tensor::zeros({2, kDim}), pred);

    for (const Tensor* prob : {&pred.part_s_prob, &pred.part_o_prob, &pred.part_p_prob, &pred.part_spo_prob,
                               &pred.sum_s_prob, &pred.sum_o_prob, &pred.sum_p_prob}) {
        const double uniform = 1.0 / prob->cols();
        for (std::size_t i = 0; i < prob->numel(); ++i) CHECK(prob->at(i) == doctest::Approx(uniform).epsilon(1e-15));
    }
    for (const Tensor* box : {&pred.part_s_box, &pred.part_o_box, &pred.part_p_box, &pred.sum_s_box, &pred.sum_o_box,
                              &pred.sum_p_box}) {
        for (std::size_t i = 0; i < box->numel(); ++i) CHECK(box->at(i) == 0.5);
    }
}

TEST_CASE("head outputs have the contract shapes and normalization") {
    const Vocab vocab = small_vocab();
    const int m = 3;
    const CompositePrediction pred = random_prediction(m, vocab, 2);

    CHECK(pred.n_queries == m);
    CHECK(pred.has_part);
    CHECK(pred.has_sum);
    CHECK(pred.part_s_prob.shape() == Shape{m, vocab.entity_classes()});
    CHECK(pred.part_o_prob.shape() == Shape{m, vocab.entity_classes()});
    CHECK(pred.part_p_prob.shape() == Shape{m, vocab.predicate_classes()});
    CHECK(pred.part_spo_prob.shape() == Shape{m, vocab.triplet_classes()});
    CHECK(pred.sum_s_prob.shape() == Shape{m, vocab.entity_classes()});
    CHECK(pred.sum_p_prob.shape() == Shape{m, vocab.predicate_classes()});
    CHECK(pred.part_s_logit.shape() == Shape{m, vocab.entity_classes()});
    for (const Tensor* box : {&pred.part_s_box, &pred.part_o_box, &pred.part_p_box, &pred.sum_s_box, &pred.sum_o_box,
                              &pred.sum_p_box}) {
        CHECK(box->shape() == Shape{m, 4});
        for (std::size_t i = 0; i < box->numel(); ++i) {
            CHECK(box->at(i) > 0.0);
            CHECK(box->at(i) < 1.0);
        }
    }
    for (const Tensor* prob : {&pred.part_s_prob, &pred.part_o_prob, &pred.part_p_prob, &pred.part_spo_prob,
                               &pred.sum_s_prob, &pred.sum_o_prob, &pred.sum_p_prob}) {
        check_rows_sum_to_one(*prob);
    }
}

TEST_CASE("heads validate embedding shapes") {
    const Vocab vocab = small_vocab();
    ParameterStore ps;
    Rng rng(3);
    PartHeads part(ps, "part", kDim, vocab, rng);
    SumHeads sum(ps, "sum", kDim, vocab, rng);
    CompositePrediction pred;
    CHECK_THROWS_AS(part.predict(Tensor::zeros({2, 2, kDim}), pred), ShapeError);
    CHECK_THROWS_AS(part.predict(Tensor::zeros({2, 3, kDim + 1}), pred), ShapeError);
    CHECK_THROWS_AS(sum.predict(Tensor::zeros({2, kDim + 1}), pred), ShapeError);
}

TEST_CASE("part and sum heads pass grad_check") {
    const Vocab vocab = small_vocab();
    ParameterStore ps;
    Rng rng(4);
    PartHeads part(ps, "part", kDim, vocab, rng);
    SumHeads sum(ps, "sum", kDim, vocab, rng);

    Rng erng(5);
    const Tensor part_emb = random_tensor({2, 3, kDim}, erng, true);
    const Tensor sum_emb = random_tensor({2, kDim}, erng, true);

    const GradCheckResult r = grad_check(
        [&](const std::vector<Tensor>& in) {
            CompositePrediction pred;
            part.predict(in[0], pred);
            sum.predict(in[1], pred);
            Tensor loss = Tensor::scalar(0.0);
            std::uint64_t salt = 906;
            for (const Tensor* t : {&pred.part_s_prob, &pred.part_o_prob, &pred.part_p_prob, &pred.part_spo_prob,
                                    &pred.part_s_box, &pred.part_o_box, &pred.part_p_box, &pred.sum_s_prob,
                                    &pred.sum_o_prob, &pred.sum_p_prob, &pred.sum_s_box, &pred.sum_o_box,
                                    &pred.sum_p_box}) {
                loss = add(loss, weighted_sum(*t, salt++));
            }
            return loss;
        },
        {part_emb, sum_emb});
    CHECK(r.max_error < 1e-4);
}

TEST_CASE("part-sum combination averages probabilities and corners") {
    const Vocab vocab = small_vocab();

    SUBCASE("identical streams are a fixed point") {
        CompositePrediction pred = random_prediction(2, vocab, 6);
        pred.sum_s_prob = pred.part_s_prob;
        pred.sum_o_prob = pred.part_o_prob;
        pred.sum_p_prob = pred.part_p_prob;
        pred.sum_s_box = pred.part_s_box;
        pred.sum_o_box = pred.part_o_box;
        pred.sum_p_box = pred.part_p_box;

        const auto part_only = combine_inference(pred, InferenceMode::part_only);
        const auto both = combine_inference(pred, InferenceMode::part_sum);
        REQUIRE(part_only.size() == both.size());
        for (std::size_t i = 0; i < both.size(); ++i) {
            CHECK(both[i].s_prob == part_only[i].s_prob);
            CHECK(both[i].p_prob == part_only[i].p_prob);
            CHECK(both[i].s_box.cx == doctest::Approx(part_only[i].s_box.cx).epsilon(1e-12));
            CHECK(both[i].o_box.w == doctest::Approx(part_only[i].o_box.w).epsilon(1e-12));
        }
    }

    SUBCASE("corner averaging fixture") {
        CompositePrediction pred = random_prediction(1, vocab, 7);
        // Part subject box corners (0,0,0.5,0.5); sum corners (0.5,0.5,1,1).
        pred.part_s_box = Tensor::from_data({1, 4}, {0.25, 0.25, 0.5, 0.5});
        pred.sum_s_box = Tensor::from_data({1, 4}, {0.75, 0.75, 0.5, 0.5});
        const auto out = combine_inference(pred, InferenceMode::part_sum);
        CHECK(out[0].s_box.x1() == doctest::Approx(0.25).epsilon(1e-12));
        CHECK(out[0].s_box.y1() == doctest::Approx(0.25).epsilon(1e-12));
        CHECK(out[0].s_box.x2() == doctest::Approx(0.75).epsilon(1e-12));
        CHECK(out[0].s_box.y2() == doctest::Approx(0.75).epsilon(1e-12));
    }

    SUBCASE("averaged distributions stay normalized and the blend is symmetric") {
        CompositePrediction pred = random_prediction(3, vocab, 8);
        const auto out = combine_inference(pred, InferenceMode::part_sum);
        for (const QueryOutput& q : out) {
            double s = 0.0, p = 0.0;
            for (double v : q.s_prob) s += v;
            for (double v : q.p_prob) p += v;
            CHECK(std::abs(s - 1.0) < 1e-9);
            CHECK(std::abs(p - 1.0) < 1e-9);
        }

        CompositePrediction swapped = pred;
        std::swap(swapped.part_s_prob, swapped.sum_s_prob);
        std::swap(swapped.part_o_prob, swapped.sum_o_prob);
        std::swap(swapped.part_p_prob, swapped.sum_p_prob);
        std::swap(swapped.part_s_box, swapped.sum_s_box);
        std::swap(swapped.part_o_box, swapped.sum_o_box);
        const auto mirrored = combine_inference(swapped, InferenceMode::part_sum);
        for (std::size_t i = 0; i < out.size(); ++i) {
            CHECK(out[i].s_prob == mirrored[i].s_prob);
            CHECK(out[i].s_box == mirrored[i].s_box);
            CHECK(out[i].o_box == mirrored[i].o_box);
        }
    }
}

TEST_CASE("modes demand the streams they read") {
    const Vocab vocab = small_vocab();
    CompositePrediction part_only_pred = random_prediction(2, vocab, 9);
    part_only_pred.has_sum = false;
    CHECK_NOTHROW(combine_inference(part_only_pred, InferenceMode::part_only));
    CHECK_THROWS_AS(combine_inference(part_only_pred, InferenceMode::sum_only), ConfigError);
    CHECK_THROWS_AS(combine_inference(part_only_pred, InferenceMode::part_sum), ConfigError);

    CHECK(inference_mode_from_string("part-sum") == InferenceMode::part_sum);
    CHECK(inference_mode_from_string(to_string(InferenceMode::sum_only)) == InferenceMode::sum_only);
    CHECK_THROWS_AS(inference_mode_from_string("both"), ConfigError);
}

TEST_CASE("prediction dump round-trips through JSON lines") {
    const Vocab vocab = small_vocab();
    const CompositePrediction pred = random_prediction(3, vocab, 10);
    const auto queries = combine_inference(pred, InferenceMode::part_sum);

    std::stringstream full;
    dump_predictions_jsonl(full, queries, vocab.entity_classes());
    const auto loaded = load_predictions_jsonl(full, vocab);
    REQUIRE(loaded.size() == queries.size());
    for (std::size_t i = 0; i < queries.size(); ++i) {
        for (std::size_t c = 0; c < queries[i].s_prob.size(); ++c)
            CHECK(loaded[i].s_prob[c] == doctest::Approx(queries[i].s_prob[c]).epsilon(1e-12));
        CHECK(loaded[i].s_box == queries[i].s_box);
        CHECK(loaded[i].o_box == queries[i].o_box);
    }

    // Truncated dumps keep the top-k mass and zero the rest.
    std::stringstream trunc;
    dump_predictions_jsonl(trunc, queries, 1);
    const auto sparse = load_predictions_jsonl(trunc, vocab);
    for (std::size_t i = 0; i < queries.size(); ++i) {
        int nonzero = 0;
        for (double v : sparse[i].s_prob) nonzero += v != 0.0;
        CHECK(nonzero == 1);
    }

    std::stringstream bad("{\"query\":0}\n");
    CHECK_THROWS_AS(load_predictions_jsonl(bad, vocab), DataError);
}

TEST_CASE("vocab persistence round-trips") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "partsum_test_vocab";
    fs::create_directories(dir);
    const std::string path = (dir / "vocab.json").string();

    const Vocab vocab = small_vocab();
    save_vocab(vocab, path);
    const Vocab loaded = load_vocab(path);
    CHECK(loaded.n_entity == vocab.n_entity);
    CHECK(loaded.n_predicate == vocab.n_predicate);
    CHECK(loaded.triplet_vocab == vocab.triplet_vocab);

    CHECK_THROWS_AS(load_vocab((dir / "missing.json").string()), DataError);
    fs::remove_all(dir);
}
