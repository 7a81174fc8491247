#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "partsum/checkpoint.hpp"
#include "partsum/loss.hpp"
#include "partsum/matching.hpp"
#include "partsum/rng.hpp"
#include "partsum/scenes.hpp"
#include "partsum/train.hpp"

using namespace partsum;

namespace {

namespace fs = std::filesystem;

Vocab small_vocab() {
    Vocab v;
    v.n_entity = 4;
    v.n_predicate = 3;
    v.triplet_vocab = {{0, 1, 2}, {1, 0, 3}, {2, 2, 1}};
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

Tensor box_rows(const std::vector<Box>& boxes, bool requires_grad = false) {
    std::vector<double> data;
    for (const Box& b : boxes) {
        data.push_back(b.cx);
        data.push_back(b.cy);
        data.push_back(b.w);
        data.push_back(b.h);
    }
    return Tensor::from_data({static_cast<int>(boxes.size()), 4}, std::move(data), requires_grad);
}

// Logits saturated to +-800: softmax underflows the off classes to exactly
// zero, so the chosen class has probability (and log-probability) exactly
// one (zero).
Tensor saturated_logits(int rows, int cols, const std::vector<int>& hot) {
    std::vector<double> data(static_cast<std::size_t>(rows) * cols, -800.0);
    for (int r = 0; r < rows; ++r) data[static_cast<std::size_t>(r) * cols + hot[static_cast<std::size_t>(r)]] = 800.0;
    return Tensor::from_data({rows, cols}, std::move(data));
}

// A prediction scoring the given padded targets perfectly on both streams.
CompositePrediction perfect_prediction(const Vocab& vocab, const std::vector<RelationTarget>& padded) {
    const int m = static_cast<int>(padded.size());
    std::vector<int> s, o, p, spo;
    std::vector<Box> sb, ob, ub;
    for (const RelationTarget& t : padded) {
        if (t.is_no_object()) {
            s.push_back(vocab.entity_no_object());
            o.push_back(vocab.entity_no_object());
            p.push_back(vocab.predicate_no_object());
            spo.push_back(vocab.triplet_no_object());
            sb.push_back(Box{0.5, 0.5, 0.2, 0.2});
            ob.push_back(Box{0.5, 0.5, 0.2, 0.2});
            ub.push_back(Box{0.5, 0.5, 0.2, 0.2});
        } else {
            s.push_back(t.s_label);
            o.push_back(t.o_label);
            p.push_back(t.p_label);
            spo.push_back(vocab.triplet_index(t.s_label, t.p_label, t.o_label));
            sb.push_back(t.s_box);
            ob.push_back(t.o_box);
            ub.push_back(t.union_target());
        }
    }
    CompositePrediction pred;
    pred.n_queries = m;
    pred.has_part = true;
    pred.has_sum = true;
    pred.part_s_logit = saturated_logits(m, vocab.entity_classes(), s);
    pred.part_o_logit = saturated_logits(m, vocab.entity_classes(), o);
    pred.part_p_logit = saturated_logits(m, vocab.predicate_classes(), p);
    pred.part_spo_logit = saturated_logits(m, vocab.triplet_classes(), spo);
    pred.sum_s_logit = pred.part_s_logit;
    pred.sum_o_logit = pred.part_o_logit;
    pred.sum_p_logit = pred.part_p_logit;
    pred.part_s_prob = softmax_rows(pred.part_s_logit);
    pred.part_o_prob = softmax_rows(pred.part_o_logit);
    pred.part_p_prob = softmax_rows(pred.part_p_logit);
    pred.part_spo_prob = softmax_rows(pred.part_spo_logit);
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

Tensor random_logits(int rows, int cols, Rng& rng, bool requires_grad = false) {
    std::vector<double> data(static_cast<std::size_t>(rows) * cols);
    for (double& v : data) v = rng.normal(0.0, 2.0);
    return Tensor::from_data({rows, cols}, std::move(data), requires_grad);
}

Box random_box(Rng& rng) {
    Box b;
    b.w = rng.uniform(0.1, 0.3);
    b.h = rng.uniform(0.1, 0.3);
    b.cx = rng.uniform(0.3, 0.7);
    b.cy = rng.uniform(0.3, 0.7);
    return b;
}

CompositePrediction random_prediction(int m, const Vocab& vocab, std::uint64_t seed, bool requires_grad = false) {
    Rng rng(seed);
    CompositePrediction pred;
    pred.n_queries = m;
    pred.has_part = true;
    pred.has_sum = true;
    pred.part_s_logit = random_logits(m, vocab.entity_classes(), rng, requires_grad);
    pred.part_o_logit = random_logits(m, vocab.entity_classes(), rng, requires_grad);
    pred.part_p_logit = random_logits(m, vocab.predicate_classes(), rng, requires_grad);
    pred.part_spo_logit = random_logits(m, vocab.triplet_classes(), rng, requires_grad);
    pred.sum_s_logit = random_logits(m, vocab.entity_classes(), rng, requires_grad);
    pred.sum_o_logit = random_logits(m, vocab.entity_classes(), rng, requires_grad);
    pred.sum_p_logit = random_logits(m, vocab.predicate_classes(), rng, requires_grad);
    pred.part_s_prob = softmax_rows(pred.part_s_logit);
    pred.part_o_prob = softmax_rows(pred.part_o_logit);
    pred.part_p_prob = softmax_rows(pred.part_p_logit);
    pred.part_spo_prob = softmax_rows(pred.part_spo_logit);
    pred.sum_s_prob = softmax_rows(pred.sum_s_logit);
    pred.sum_o_prob = softmax_rows(pred.sum_o_logit);
    pred.sum_p_prob = softmax_rows(pred.sum_p_logit);
    std::vector<Box> sb, ob, ub;
    for (int i = 0; i < m; ++i) {
        sb.push_back(random_box(rng));
        ob.push_back(random_box(rng));
        ub.push_back(random_box(rng));
    }
    pred.part_s_box = box_rows(sb, requires_grad);
    pred.part_o_box = box_rows(ob, requires_grad);
    pred.part_p_box = box_rows(ub, requires_grad);
    std::vector<Box> gsb, gob, gub;
    for (int i = 0; i < m; ++i) {
        gsb.push_back(random_box(rng));
        gob.push_back(random_box(rng));
        gub.push_back(random_box(rng));
    }
    pred.sum_s_box = box_rows(gsb, requires_grad);
    pred.sum_o_box = box_rows(gob, requires_grad);
    pred.sum_p_box = box_rows(gub, requires_grad);
    return pred;
}

std::vector<RelationTarget> random_targets(int n, const Vocab& vocab, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<RelationTarget> targets;
    for (int i = 0; i < n; ++i) {
        const auto& t = vocab.triplet_vocab[static_cast<std::size_t>(rng.uniform_int(
            0, static_cast<int>(vocab.triplet_vocab.size()) - 1))];
        targets.push_back(real_target(t[0], t[1], t[2], random_box(rng), random_box(rng)));
    }
    return targets;
}

Assignment match(const CompositePrediction& pred, const std::vector<RelationTarget>& padded, const Vocab& vocab) {
    return hungarian(matching_cost(pred, padded, vocab, CostWeights{}));
}

double loss_for(const CompositePrediction& pred, const std::vector<RelationTarget>& padded, const Vocab& vocab,
                const LossWeights& weights = LossWeights{}) {
    const Assignment a = match(pred, padded, vocab);
    return set_loss({pred}, padded, {a}, vocab, weights).total;
}

CompositePrediction permute_queries(const CompositePrediction& pred, const std::vector<int>& perm) {
    CompositePrediction out = pred;
    auto apply = [&](Tensor& t) { t = take_rows(t, perm); };
    apply(out.part_s_prob);
    apply(out.part_o_prob);
    apply(out.part_p_prob);
    apply(out.part_spo_prob);
    apply(out.part_s_logit);
    apply(out.part_o_logit);
    apply(out.part_p_logit);
    apply(out.part_spo_logit);
    apply(out.part_s_box);
    apply(out.part_o_box);
    apply(out.part_p_box);
    apply(out.sum_s_prob);
    apply(out.sum_o_prob);
    apply(out.sum_p_prob);
    apply(out.sum_s_logit);
    apply(out.sum_o_logit);
    apply(out.sum_p_logit);
    apply(out.sum_s_box);
    apply(out.sum_o_box);
    apply(out.sum_p_box);
    return out;
}

double reconstruct_total(const LossReport& report, const LossWeights& w) {
    double total = 0.0;
    for (const LayerLossBreakdown& l : report.layers) {
        double part = 0.0, sum = 0.0;
        for (double v : l.part_cls) part += w.lambda_cls * v;
        for (double v : l.part_l1) part += w.lambda_l1 * v;
        for (double v : l.part_giou) part += w.lambda_giou * v;
        for (double v : l.sum_cls) sum += w.lambda_cls * v;
        for (double v : l.sum_l1) sum += w.lambda_l1 * v;
        for (double v : l.sum_giou) sum += w.lambda_giou * v;
        total += part + w.sum_stream_weight * sum;
    }
    return total;
}

SceneGenConfig tiny_scene_config() {
    SceneGenConfig cfg;
    cfg.n_entity_labels = 4;
    cfg.n_predicate_labels = 3;
    cfg.min_entities = 3;
    cfg.max_entities = 4;
    cfg.min_relations = 2;
    cfg.max_relations = 3;
    cfg.seed = 5;
    return cfg;
}

ModelConfig tiny_model_config() {
    ModelConfig cfg;
    cfg.decoder.variant = DecoderVariant::part_and_sum;
    cfg.decoder.n_layers = 2;
    cfg.decoder.interaction = InteractionMode::summation;
    cfg.decoder.attention.model_dim = 16;
    cfg.decoder.attention.n_heads = 2;
    cfg.decoder.attention.ffn_dim = 32;
    cfg.decoder.attention.n_encoder_layers = 1;
    cfg.n_queries = 8;
    cfg.grid = 4;
    return cfg;
}

TrainConfig tiny_train_config(const std::string& out_dir, int steps) {
    TrainConfig cfg;
    cfg.steps = steps;
    cfg.batch_size = 1;
    cfg.learning_rate = 3e-3;
    cfg.seed = 3;
    cfg.out_dir = out_dir;
    return cfg;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string sub(const std::string& name) const { return (path / name).string(); }
};

std::string read_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    REQUIRE(is);
    return std::string(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("perfect predictions on real targets have exactly zero loss") {
    const Vocab vocab = small_vocab();
    const std::vector<RelationTarget> targets = {
        real_target(0, 1, 2, Box{0.3, 0.4, 0.2, 0.3}, Box{0.6, 0.5, 0.2, 0.2}),
        real_target(1, 0, 3, Box{0.2, 0.2, 0.1, 0.1}, Box{0.7, 0.7, 0.2, 0.2}),
    };
    const CompositePrediction pred = perfect_prediction(vocab, targets);
    const Assignment a = match(pred, targets, vocab);
    const LossReport report = set_loss({pred}, targets, {a}, vocab, LossWeights{});
    CHECK(report.total == 0.0);
    for (const LayerLossBreakdown& l : report.layers) {
        for (double v : l.part_cls) CHECK(v == 0.0);
        for (double v : l.part_l1) CHECK(v == 0.0);
        for (double v : l.part_giou) CHECK(v == 0.0);
        for (double v : l.sum_cls) CHECK(v == 0.0);
    }
}

TEST_CASE("all-null targets with uniform predictions give the closed-form loss") {
    const Vocab vocab = small_vocab();
    const int m = 2;
    CompositePrediction pred = random_prediction(m, vocab, 1);
    // Zero logits are exactly uniform.
    pred.part_s_logit = Tensor::zeros({m, vocab.entity_classes()});
    pred.part_o_logit = Tensor::zeros({m, vocab.entity_classes()});
    pred.part_p_logit = Tensor::zeros({m, vocab.predicate_classes()});
    pred.part_spo_logit = Tensor::zeros({m, vocab.triplet_classes()});
    pred.sum_s_logit = Tensor::zeros({m, vocab.entity_classes()});
    pred.sum_o_logit = Tensor::zeros({m, vocab.entity_classes()});
    pred.sum_p_logit = Tensor::zeros({m, vocab.predicate_classes()});

    const std::vector<RelationTarget> padded = pad_targets({}, m);
    LossWeights w;
    const LossReport report = set_loss({pred}, padded, {match(pred, padded, vocab)}, vocab, w);

    const double entity = w.no_object_weight * std::log(vocab.entity_classes());
    const double predicate = w.no_object_weight * std::log(vocab.predicate_classes());
    const double triplet = w.no_object_weight * std::log(vocab.triplet_classes());
    REQUIRE(report.layers.size() == 1);
    const LayerLossBreakdown& l = report.layers[0];
    CHECK(l.part_cls[0] == doctest::Approx(entity).epsilon(1e-12));
    CHECK(l.part_cls[1] == doctest::Approx(entity).epsilon(1e-12));
    CHECK(l.part_cls[2] == doctest::Approx(predicate).epsilon(1e-12));
    CHECK(l.part_cls[3] == doctest::Approx(triplet).epsilon(1e-12));
    CHECK(l.sum_cls[0] == doctest::Approx(entity).epsilon(1e-12));
    CHECK(l.sum_cls[2] == doctest::Approx(predicate).epsilon(1e-12));
    for (double v : l.part_l1) CHECK(v == 0.0);
    for (double v : l.part_giou) CHECK(v == 0.0);
    for (double v : l.sum_l1) CHECK(v == 0.0);
    for (double v : l.sum_giou) CHECK(v == 0.0);
}

TEST_CASE("loss is invariant to ground-truth permutation under re-matching") {
    const Vocab vocab = small_vocab();
    const int m = 5;
    const CompositePrediction pred = random_prediction(m, vocab, 2);
    const std::vector<RelationTarget> targets = random_targets(3, vocab, 3);

    const double base = loss_for(pred, pad_targets(targets, m), vocab);
    std::vector<RelationTarget> shuffled = {targets[2], targets[0], targets[1]};
    const double moved = loss_for(pred, pad_targets(shuffled, m), vocab);
    CHECK(std::abs(base - moved) <= 1e-9);
}

TEST_CASE("loss is invariant to a consistent query permutation") {
    const Vocab vocab = small_vocab();
    const int m = 5;
    const CompositePrediction pred = random_prediction(m, vocab, 4);
    const std::vector<RelationTarget> padded = pad_targets(random_targets(3, vocab, 5), m);

    const double base = loss_for(pred, padded, vocab);
    const double moved = loss_for(permute_queries(pred, {4, 2, 0, 3, 1}), padded, vocab);
    CHECK(std::abs(base - moved) <= 1e-9);
}

TEST_CASE("total equals the weighted breakdown and terms are non-negative") {
    const Vocab vocab = small_vocab();
    const int m = 4;
    const CompositePrediction pred = random_prediction(m, vocab, 6);
    const std::vector<RelationTarget> padded = pad_targets(random_targets(2, vocab, 7), m);
    LossWeights w;
    w.sum_stream_weight = 0.7;
    const Assignment a = match(pred, padded, vocab);

    const LossReport report = set_loss({pred, pred}, padded, {a, a}, vocab, w);
    REQUIRE(report.layers.size() == 2);
    CHECK(std::abs(report.total - reconstruct_total(report, w)) < 1e-9);
    CHECK(report.total == doctest::Approx(2.0 * set_loss({pred}, padded, {a}, vocab, w).total).epsilon(1e-12));
    for (const LayerLossBreakdown& l : report.layers) {
        for (double v : l.part_cls) CHECK(v >= 0.0);
        for (double v : l.part_l1) CHECK(v >= 0.0);
        for (double v : l.part_giou) CHECK(v >= 0.0);
        for (double v : l.sum_cls) CHECK(v >= 0.0);
        for (double v : l.sum_l1) CHECK(v >= 0.0);
        for (double v : l.sum_giou) CHECK(v >= 0.0);
    }
}

TEST_CASE("zero box weights gate the box terms out entirely") {
    const Vocab vocab = small_vocab();
    const int m = 4;
    const CompositePrediction pred = random_prediction(m, vocab, 8);
    const std::vector<RelationTarget> padded = pad_targets(random_targets(3, vocab, 9), m);
    const Assignment a = match(pred, padded, vocab);

    LossWeights gated;
    gated.lambda_l1 = 0.0;
    gated.lambda_giou = 0.0;
    const LossReport report = set_loss({pred}, padded, {a}, vocab, gated);
    for (const LayerLossBreakdown& l : report.layers) {
        for (double v : l.part_l1) CHECK(v == 0.0);
        for (double v : l.part_giou) CHECK(v == 0.0);
        for (double v : l.sum_l1) CHECK(v == 0.0);
        for (double v : l.sum_giou) CHECK(v == 0.0);
    }

    LossWeights l1_only;
    l1_only.lambda_giou = 0.0;
    const LossReport partial = set_loss({pred}, padded, {a}, vocab, l1_only);
    CHECK(partial.layers[0].part_l1[0] > 0.0);
    CHECK(partial.layers[0].part_giou[0] == 0.0);
}

TEST_CASE("set_loss validates layer alignment") {
    const Vocab vocab = small_vocab();
    const CompositePrediction pred = random_prediction(3, vocab, 10);
    const std::vector<RelationTarget> padded = pad_targets(random_targets(2, vocab, 11), 3);
    const Assignment a = match(pred, padded, vocab);
    CHECK_THROWS_AS(set_loss({pred, pred}, padded, {a}, vocab, LossWeights{}), ContractError);
}

TEST_CASE("loss gradients reach every leaf tensor") {
    const Vocab vocab = small_vocab();
    const int m = 3;
    const CompositePrediction pred = random_prediction(m, vocab, 12, true);
    const std::vector<RelationTarget> padded = pad_targets(random_targets(2, vocab, 13), m);
    const LossReport report = set_loss({pred}, padded, {match(pred, padded, vocab)}, vocab, LossWeights{});

    backward(report.total_tensor);
    auto grad_magnitude = [](const Tensor& t) {
        double s = 0.0;
        for (double v : t.grad()) {
            REQUIRE(std::isfinite(v));
            s += std::abs(v);
        }
        return s;
    };
    CHECK(grad_magnitude(pred.part_s_logit) > 0.0);
    CHECK(grad_magnitude(pred.part_spo_logit) > 0.0);
    CHECK(grad_magnitude(pred.sum_p_logit) > 0.0);
    CHECK(grad_magnitude(pred.part_s_box) > 0.0);
    CHECK(grad_magnitude(pred.sum_o_box) > 0.0);
}

TEST_CASE("training overfits a single scene") {
    TempDir dir("partsum_test_overfit");
    const Dataset data = generate_dataset(tiny_scene_config(), 1);
    const TrainResult res = train(data, tiny_model_config(), tiny_train_config(dir.sub("run"), 200));

    REQUIRE(res.steps_run == 200);
    REQUIRE(res.loss_curve.size() == 200);
    const double early = res.loss_curve[9];
    const double final = res.loss_curve.back();
    INFO("loss fell from " << early << " to " << final);
    CHECK(final <= 0.1 * early);
}

TEST_CASE("training is bit-deterministic in its seed") {
    TempDir dir("partsum_test_det");
    const Dataset data = generate_dataset(tiny_scene_config(), 3);
    const TrainResult a = train(data, tiny_model_config(), tiny_train_config(dir.sub("a"), 30));
    const TrainResult b = train(data, tiny_model_config(), tiny_train_config(dir.sub("b"), 30));

    CHECK(a.loss_curve == b.loss_curve);
    CHECK(read_file(dir.sub("a") + "/train_log.csv") == read_file(dir.sub("b") + "/train_log.csv"));
    CHECK(read_file(a.final_checkpoint) == read_file(b.final_checkpoint));

    // A different seed must actually change the run.
    TrainConfig other = tiny_train_config(dir.sub("c"), 30);
    other.seed = 4;
    const TrainResult c = train(data, tiny_model_config(), other);
    CHECK(a.loss_curve != c.loss_curve);
}

TEST_CASE("resume restores trained parameters") {
    TempDir dir("partsum_test_resume");
    const Dataset data = generate_dataset(tiny_scene_config(), 1);

    const TrainResult first = train(data, tiny_model_config(), tiny_train_config(dir.sub("first"), 150));
    TrainConfig resumed_cfg = tiny_train_config(dir.sub("resumed"), 20);
    resumed_cfg.resume_from = first.final_checkpoint;
    const TrainResult resumed = train(data, tiny_model_config(), resumed_cfg);

    // The resumed curve continues from the trained level instead of a fresh
    // initialization.
    CHECK(resumed.loss_curve.front() < 0.5 * first.loss_curve.front());
    CHECK(resumed.loss_curve.front() < 2.0 * first.loss_curve.back() + 1e-6);
}

TEST_CASE("non-finite loss aborts with diagnostics") {
    TempDir dir("partsum_test_diverge");
    const Dataset data = generate_dataset(tiny_scene_config(), 1);
    const ModelConfig model_cfg = tiny_model_config();

    // Build the same parameter set, poison one weight, and resume from it.
    ParameterStore ps;
    Rng rng(3);
    PstModel model(ps, model_cfg, data.make_vocab(), rng);
    {
        Tensor first = ps.entries().front().second;
        first.mutable_data()[0] = std::nan("");
    }
    const std::string poisoned = dir.sub("poisoned.ckpt");
    save_checkpoint(ps, poisoned);

    TrainConfig cfg = tiny_train_config(dir.sub("run"), 10);
    cfg.resume_from = poisoned;
    CHECK_THROWS_AS(train(data, model_cfg, cfg), DivergenceError);
    CHECK(fs::exists(fs::path(dir.sub("run")) / "divergence.json"));
}

TEST_CASE("periodic evaluation tracks the best checkpoint and can stop early") {
    TempDir dir("partsum_test_eval");
    const Dataset data = generate_dataset(tiny_scene_config(), 2);

    TrainConfig cfg = tiny_train_config(dir.sub("run"), 30);
    cfg.eval_every = 10;
    const TrainResult res = train(data, tiny_model_config(), cfg, &data);
    REQUIRE(!res.eval_curve.empty());
    CHECK(res.best_checkpoint == dir.sub("run") + "/best.ckpt");
    CHECK(fs::exists(res.best_checkpoint));
    double best = -1.0;
    for (const auto& [step, recall] : res.eval_curve) best = std::max(best, recall);
    CHECK(res.best_metric == best);

    TrainConfig stop = tiny_train_config(dir.sub("stop"), 50);
    stop.eval_every = 5;
    stop.stop_at_metric = 0.0;  // any recall satisfies this
    const TrainResult stopped = train(data, tiny_model_config(), stop, &data);
    CHECK(stopped.steps_run == 5);

    TrainConfig invalid = tiny_train_config(dir.sub("bad"), 10);
    invalid.eval_every = 5;
    CHECK_THROWS_AS(train(data, tiny_model_config(), invalid), ConfigError);
}

TEST_CASE("train validates its configuration") {
    const Dataset data = generate_dataset(tiny_scene_config(), 1);
    TrainConfig cfg = tiny_train_config("", 10);
    CHECK_THROWS_AS(train(data, tiny_model_config(), cfg), ConfigError);  // no out_dir
    TempDir dir("partsum_test_validate");
    cfg = tiny_train_config(dir.sub("run"), 0);
    CHECK_THROWS_AS(train(data, tiny_model_config(), cfg), ConfigError);  // steps
    cfg = tiny_train_config(dir.sub("run"), 10);
    cfg.learning_rate = 0.0;
    CHECK_THROWS_AS(train(data, tiny_model_config(), cfg), ConfigError);
}

TEST_CASE("train writes the logged artifacts") {
    TempDir dir("partsum_test_artifacts");
    const Dataset data = generate_dataset(tiny_scene_config(), 2);
    train(data, tiny_model_config(), tiny_train_config(dir.sub("run"), 5));

    CHECK(fs::exists(fs::path(dir.sub("run")) / "final.ckpt"));
    CHECK(fs::exists(fs::path(dir.sub("run")) / "vocab.json"));
    const std::string log = read_file(dir.sub("run") + "/train_log.csv");
    int lines = 0;
    for (char ch : log) lines += ch == '\n';
    CHECK(lines == 6);  // header + one row per step
    CHECK(log.rfind("step,total,part_cls_s", 0) == 0);
}
