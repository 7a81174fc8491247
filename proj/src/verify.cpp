#include "partsum/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>

#include <json.hpp>

#include "partsum/grad_check.hpp"
#include "partsum/loss.hpp"
#include "partsum/matching.hpp"
#include "partsum/model.hpp"
#include "partsum/train.hpp"

namespace partsum {

bool VerifyReport::all_pass() const {
    for (const VerifyCheck& c : checks)
        if (!c.pass) return false;
    return true;
}

void VerifyReport::merge(const VerifyReport& other) {
    checks.insert(checks.end(), other.checks.begin(), other.checks.end());
}

FaultInjection fault_injection_from_string(const std::string& s) {
    if (s == "none") return FaultInjection::none;
    if (s == "giou-grad-sign") return FaultInjection::giou_grad_sign;
    throw ConfigError("unknown fault injection '" + s + "' (expected none|giou-grad-sign)");
}

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.3g", v);
    return buf;
}

Tensor rand_tensor(Rng& rng, Shape shape, double lo, double hi, bool requires_grad = true) {
    std::vector<double> d(shape_numel(shape));
    for (double& v : d) v = rng.uniform(lo, hi);
    return Tensor::from_data(std::move(shape), std::move(d), requires_grad);
}

Tensor rand_normal_tensor(Rng& rng, Shape shape, bool requires_grad = true) {
    std::vector<double> d(shape_numel(shape));
    for (double& v : d) v = rng.normal();
    return Tensor::from_data(std::move(shape), std::move(d), requires_grad);
}

// Reduce y to a scalar through fixed random weights so row-normalized ops
// (softmax, layer_norm) keep a nontrivial gradient.
// Takes the generator by value: inside a grad_check closure every invocation
// must see identical coefficients, or the finite differences would measure a
// different function than the gradient.
Tensor weighted_sum(const Tensor& y, Rng rng) {
    Tensor c = rand_tensor(rng, y.shape(), 0.5, 1.5, false);
    return sum_all(mul(y, c));
}

// The giou box term with an optional planted gradient defect (value intact,
// gradient sign flipped) used to prove the verifier catches bad gradients.
Tensor giou_rows_verified(const Tensor& pred, const Tensor& target, FaultInjection fault) {
    Tensor g = box_giou_rows(pred, target);
    if (fault == FaultInjection::giou_grad_sign) {
        return custom_unary(
            g, [](double v) { return v; }, [](double) { return -1.0; }, "giou_sign_fault");
    }
    return g;
}

using OpCase = std::function<GradCheckResult(Rng&)>;

void run_grad_case(VerifyReport& rep, const std::string& name, const VerifyOptions& opt, Rng rng, int instances,
                   const OpCase& fn) {
    GradCheckResult worst;
    for (int i = 0; i < instances; ++i) {
        Rng inst = rng.child(static_cast<std::uint64_t>(i) + 1);
        GradCheckResult r = fn(inst);
        if (r.max_error > worst.max_error) worst = r;
    }
    VerifyCheck c;
    c.name = name;
    c.pass = worst.max_error < opt.grad_tolerance;
    c.detail = "max rel error " + fmt(worst.max_error) + " over " + std::to_string(instances) + " instance(s)";
    rep.checks.push_back(c);
}

BoolMask random_mask(Rng& rng, int rows, int cols) {
    BoolMask m;
    m.rows = rows;
    m.cols = cols;
    m.allow.assign(static_cast<std::size_t>(rows) * cols, 0);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) m.set(r, c, rng.uniform() < 0.6);
        m.set(r, rng.uniform_int(0, cols - 1), true);  // keep every row alive
    }
    return m;
}

// Boxes whose corners stay strictly inside (0,1): the clamp is in its linear
// region, so central differences see the same function the gradient does.
Tensor rand_boxes(Rng& rng, int n, bool requires_grad = true) {
    std::vector<double> d;
    d.reserve(static_cast<std::size_t>(n) * 4);
    for (int i = 0; i < n; ++i) {
        const double w = rng.uniform(0.08, 0.3);
        const double h = rng.uniform(0.08, 0.3);
        d.push_back(rng.uniform(0.25, 0.75));
        d.push_back(rng.uniform(0.25, 0.75));
        d.push_back(w);
        d.push_back(h);
    }
    return Tensor::from_data({n, 4}, std::move(d), requires_grad);
}

void op_gradient_checks(VerifyReport& rep, const VerifyOptions& opt, Rng& root) {
    const int n = opt.instances_per_op;
    auto dim = [](Rng& r) { return r.uniform_int(2, 5); };

    run_grad_case(rep, "grad.matmul", opt, root.child(101), n, [&](Rng& r) {
        const int a = dim(r), k = dim(r), b = dim(r);
        Tensor A = rand_normal_tensor(r, {a, k}), B = rand_normal_tensor(r, {k, b});
        return grad_check([&](const std::vector<Tensor>& in) { return mean_all(matmul(in[0], in[1])); }, {A, B});
    });
    run_grad_case(rep, "grad.add", opt, root.child(102), n, [&](Rng& r) {
        Tensor A = rand_normal_tensor(r, {dim(r), dim(r)});
        Tensor B = rand_normal_tensor(r, A.shape());
        return grad_check([&](const std::vector<Tensor>& in) { return mean_all(add(in[0], in[1])); }, {A, B});
    });
    run_grad_case(rep, "grad.sub", opt, root.child(103), n, [&](Rng& r) {
        Tensor A = rand_normal_tensor(r, {dim(r), dim(r)});
        Tensor B = rand_normal_tensor(r, A.shape());
        return grad_check([&](const std::vector<Tensor>& in) { return mean_all(sub(in[0], in[1])); }, {A, B});
    });
    run_grad_case(rep, "grad.mul", opt, root.child(104), n, [&](Rng& r) {
        Tensor A = rand_normal_tensor(r, {dim(r), dim(r)});
        Tensor B = rand_normal_tensor(r, A.shape());
        return grad_check([&](const std::vector<Tensor>& in) { return mean_all(mul(in[0], in[1])); }, {A, B});
    });
    run_grad_case(rep, "grad.div", opt, root.child(105), n, [&](Rng& r) {
        Tensor A = rand_normal_tensor(r, {dim(r), dim(r)});
        Tensor B = rand_tensor(r, A.shape(), 0.5, 2.0);
        return grad_check([&](const std::vector<Tensor>& in) { return mean_all(div(in[0], in[1])); }, {A, B});
    });
    run_grad_case(rep, "grad.minimum", opt, root.child(106), n, [&](Rng& r) {
        Tensor A = rand_normal_tensor(r, {dim(r), dim(r)});
        Tensor B = rand_normal_tensor(r, A.shape());
        return grad_check([&](const std::vector<Tensor>& in) { return mean_all(minimum(in[0], in[1])); }, {A, B});
    });
    run_grad_case(rep, "grad.maximum", opt, root.child(107), n, [&](Rng& r) {
        Tensor A = rand_normal_tensor(r, {dim(r), dim(r)});
        Tensor B = rand_normal_tensor(r, A.shape());
        return grad_check([&](const std::vector<Tensor>& in) { return mean_all(maximum(in[0], in[1])); }, {A, B});
    });
    run_grad_case(rep, "grad.scale", opt, root.child(108), n, [&](Rng& r) {
        Tensor A = rand_normal_tensor(r, {dim(r), dim(r)});
        const double s = r.uniform(-2.0, 2.0);
        return grad_check([&](const std::vector<Tensor>& in) { return mean_all(scale(in[0], s)); }, {A});
    });
    run_grad_case(rep, "grad.add_scalar", opt, root.child(109), n, [&](Rng& r) {
        Tensor A = rand_normal_tensor(r, {dim(r), dim(r)});
        const double s = r.uniform(-2.0, 2.0);
        return grad_check([&](const std::vector<Tensor>& in) { return mean_all(add_scalar(in[0], s)); }, {A});
    });
    run_grad_case(rep, "grad.add_rowwise", opt, root.child(110), n, [&](Rng& r) {
        const int rows = dim(r), cols = dim(r);
        Tensor A = rand_normal_tensor(r, {rows, cols});
        Tensor b = rand_normal_tensor(r, {cols});
        return grad_check([&](const std::vector<Tensor>& in) { return mean_all(add_rowwise(in[0], in[1])); }, {A, b});
    });
    run_grad_case(rep, "grad.relu", opt, root.child(111), n, [&](Rng& r) {
        Tensor A = rand_normal_tensor(r, {dim(r), dim(r)});
        return grad_check([&](const std::vector<Tensor>& in) { return mean_all(relu(in[0])); }, {A});
    });
    run_grad_case(rep, "grad.sigmoid", opt, root.child(112), n, [&](Rng& r) {
        Tensor A = rand_normal_tensor(r, {dim(r), dim(r)});
        return grad_check([&](const std::vector<Tensor>& in) { return mean_all(sigmoid(in[0])); }, {A});
    });
    run_grad_case(rep, "grad.log", opt, root.child(113), n, [&](Rng& r) {
        Tensor A = rand_tensor(r, {dim(r), dim(r)}, 0.1, 3.0);
        return grad_check([&](const std::vector<Tensor>& in) { return mean_all(partsum::log(in[0])); }, {A});
    });
    run_grad_case(rep, "grad.abs", opt, root.child(114), n, [&](Rng& r) {
        Tensor A = rand_normal_tensor(r, {dim(r), dim(r)});
        return grad_check([&](const std::vector<Tensor>& in) { return mean_all(partsum::abs(in[0])); }, {A});
    });
    run_grad_case(rep, "grad.clamp01_straight_through", opt, root.child(115), n, [&](Rng& r) {
        Tensor A = rand_tensor(r, {dim(r), dim(r)}, 0.05, 0.95);
        return grad_check(
            [&](const std::vector<Tensor>& in) { return mean_all(clamp01_straight_through(in[0])); }, {A});
    });
    run_grad_case(rep, "grad.softmax_rows", opt, root.child(116), n, [&](Rng& r) {
        Tensor A = rand_normal_tensor(r, {dim(r), dim(r)});
        return grad_check([&](const std::vector<Tensor>& in) { return weighted_sum(softmax_rows(in[0]), r); }, {A});
    });
    run_grad_case(rep, "grad.softmax_rows_masked", opt, root.child(117), n, [&](Rng& r) {
        const int rows = dim(r), cols = dim(r);
        Tensor A = rand_normal_tensor(r, {rows, cols});
        const BoolMask m = random_mask(r, rows, cols);
        return grad_check([&](const std::vector<Tensor>& in) { return weighted_sum(softmax_rows(in[0], m), r); },
                          {A});
    });
    run_grad_case(rep, "grad.log_softmax_rows", opt, root.child(118), n, [&](Rng& r) {
        Tensor A = rand_normal_tensor(r, {dim(r), dim(r)});
        return grad_check([&](const std::vector<Tensor>& in) { return weighted_sum(log_softmax_rows(in[0]), r); },
                          {A});
    });
    run_grad_case(rep, "grad.layer_norm", opt, root.child(119), n, [&](Rng& r) {
        const int rows = dim(r), cols = dim(r) + 1;
        Tensor A = rand_normal_tensor(r, {rows, cols});
        Tensor g = rand_tensor(r, {cols}, 0.5, 1.5);
        Tensor b = rand_normal_tensor(r, {cols});
        return grad_check(
            [&](const std::vector<Tensor>& in) { return weighted_sum(layer_norm(in[0], in[1], in[2]), r); },
            {A, g, b});
    });
    run_grad_case(rep, "grad.concat_cols", opt, root.child(120), n, [&](Rng& r) {
        const int rows = dim(r);
        Tensor A = rand_normal_tensor(r, {rows, dim(r)});
        Tensor B = rand_normal_tensor(r, {rows, dim(r)});
        Tensor C = rand_normal_tensor(r, {rows, dim(r)});
        return grad_check(
            [&](const std::vector<Tensor>& in) { return weighted_sum(concat_cols({in[0], in[1], in[2]}), r); },
            {A, B, C});
    });
    run_grad_case(rep, "grad.slice_cols", opt, root.child(121), n, [&](Rng& r) {
        const int rows = dim(r), cols = dim(r) + 2;
        Tensor A = rand_normal_tensor(r, {rows, cols});
        const int lo = r.uniform_int(0, cols - 2);
        const int hi = r.uniform_int(lo + 1, cols);
        return grad_check(
            [&](const std::vector<Tensor>& in) { return weighted_sum(slice_cols(in[0], lo, hi - lo), r); }, {A});
    });
    run_grad_case(rep, "grad.concat_rows", opt, root.child(122), n, [&](Rng& r) {
        const int cols = dim(r);
        Tensor A = rand_normal_tensor(r, {dim(r), cols});
        Tensor B = rand_normal_tensor(r, {dim(r), cols});
        return grad_check([&](const std::vector<Tensor>& in) { return weighted_sum(concat_rows({in[0], in[1]}), r); },
                          {A, B});
    });
    run_grad_case(rep, "grad.take_rows", opt, root.child(123), n, [&](Rng& r) {
        const int rows = dim(r), cols = dim(r);
        Tensor A = rand_normal_tensor(r, {rows, cols});
        std::vector<int> idx(static_cast<std::size_t>(rows) + 2);
        for (int& i : idx) i = r.uniform_int(0, rows - 1);  // repeats exercise scatter-add
        return grad_check([&](const std::vector<Tensor>& in) { return weighted_sum(take_rows(in[0], idx), r); }, {A});
    });
    run_grad_case(rep, "grad.pick", opt, root.child(124), n, [&](Rng& r) {
        const int rows = dim(r), cols = dim(r);
        Tensor A = rand_normal_tensor(r, {rows, cols});
        std::vector<int> idx(static_cast<std::size_t>(rows));
        for (int& i : idx) i = r.uniform_int(0, cols - 1);
        return grad_check([&](const std::vector<Tensor>& in) { return weighted_sum(pick(in[0], idx), r); }, {A});
    });
    run_grad_case(rep, "grad.transpose", opt, root.child(125), n, [&](Rng& r) {
        Tensor A = rand_normal_tensor(r, {dim(r), dim(r) + 1});
        return grad_check([&](const std::vector<Tensor>& in) { return weighted_sum(transpose(in[0]), r); }, {A});
    });
    run_grad_case(rep, "grad.reshape", opt, root.child(126), n, [&](Rng& r) {
        const int rows = dim(r), cols = 4;
        Tensor A = rand_normal_tensor(r, {rows, cols});
        return grad_check(
            [&](const std::vector<Tensor>& in) { return weighted_sum(reshape(in[0], {rows * 2, cols / 2}), r); }, {A});
    });
    run_grad_case(rep, "grad.sum_all", opt, root.child(127), n, [&](Rng& r) {
        Tensor A = rand_normal_tensor(r, {dim(r), dim(r)});
        return grad_check([&](const std::vector<Tensor>& in) { return sum_all(in[0]); }, {A});
    });
    run_grad_case(rep, "grad.mean_all", opt, root.child(128), n, [&](Rng& r) {
        Tensor A = rand_normal_tensor(r, {dim(r), dim(r)});
        return grad_check([&](const std::vector<Tensor>& in) { return mean_all(in[0]); }, {A});
    });
    run_grad_case(rep, "grad.custom_unary", opt, root.child(129), n, [&](Rng& r) {
        Tensor A = rand_normal_tensor(r, {dim(r), dim(r)});
        return grad_check(
            [&](const std::vector<Tensor>& in) {
                return mean_all(custom_unary(
                    in[0], [](double v) { return v * v; }, [](double v) { return 2.0 * v; }, "square"));
            },
            {A});
    });
    run_grad_case(rep, "grad.box_l1_rows", opt, root.child(130), n, [&](Rng& r) {
        const int rows = dim(r);
        Tensor P = rand_boxes(r, rows);
        Tensor T = rand_boxes(r, rows, false);
        return grad_check([&](const std::vector<Tensor>& in) { return weighted_sum(box_l1_rows(in[0], T), r); }, {P});
    });
}

std::vector<Tensor> store_tensors(const ParameterStore& ps) {
    std::vector<Tensor> out;
    out.reserve(ps.size());
    for (const auto& [name, t] : ps.entries()) out.push_back(t);
    return out;
}

// Moves every parameter off its initialization. Freshly built blocks sit at a
// degenerate point — zero biases and a zero query state make whole layer-norm
// rows exactly constant, where the Jacobian is eps-dominated and finite
// differences cannot converge — so gradients are checked at a generic point
// instead.
void jitter_params(const ParameterStore& ps, Rng& rng, double scale = 0.05) {
    for (const auto& [name, t] : ps.entries()) {
        Tensor handle = t;
        for (double& v : handle.mutable_data()) v += rng.uniform(-scale, scale);
    }
}

void block_gradient_checks(VerifyReport& rep, const VerifyOptions& opt, Rng& root, FaultInjection fault) {
    AttentionConfig toy;
    toy.model_dim = 8;
    toy.n_heads = 2;
    toy.ffn_dim = 16;
    toy.n_encoder_layers = 1;

    // The giou box term carries the fault-injection hook.
    run_grad_case(rep, "grad.box_giou_rows", opt, root.child(201), std::max(1, opt.instances_per_op / 4),
                  [&](Rng& r) {
                      const int rows = r.uniform_int(2, 4);
                      Tensor P = rand_boxes(r, rows);
                      Tensor T = rand_boxes(r, rows, false);
                      return grad_check(
                          [&](const std::vector<Tensor>& in) {
                              return weighted_sum(giou_rows_verified(in[0], T, fault), r);
                          },
                          {P});
                  });

    run_grad_case(rep, "grad.self_attention_block", opt, root.child(202), 3, [&](Rng& r) {
        ParameterStore ps;
        Rng init = r.child(1);
        SelfAttentionBlock block(ps, "sa", toy, init);
        Tensor x = rand_normal_tensor(r, {5, toy.model_dim});
        Tensor pos = rand_normal_tensor(r, {5, toy.model_dim});
        std::vector<Tensor> inputs = store_tensors(ps);
        inputs.push_back(x);
        inputs.push_back(pos);
        return grad_check(
            [&](const std::vector<Tensor>& in) {
                return weighted_sum(block.forward(in[in.size() - 2], &in[in.size() - 1]), r);
            },
            inputs);
    });

    run_grad_case(rep, "grad.cross_attention_block", opt, root.child(203), 3, [&](Rng& r) {
        ParameterStore ps;
        Rng init = r.child(1);
        CrossAttentionBlock block(ps, "ca", toy, init);
        Tensor x = rand_normal_tensor(r, {4, toy.model_dim});
        Tensor mem = rand_normal_tensor(r, {6, toy.model_dim});
        Tensor mem_pos = rand_normal_tensor(r, {6, toy.model_dim});
        std::vector<Tensor> inputs = store_tensors(ps);
        inputs.push_back(x);
        inputs.push_back(mem);
        inputs.push_back(mem_pos);
        return grad_check(
            [&](const std::vector<Tensor>& in) {
                const std::size_t k = in.size();
                return weighted_sum(block.forward(in[k - 3], in[k - 2], in[k - 1]), r);
            },
            inputs);
    });

    run_grad_case(rep, "grad.ffn_block", opt, root.child(204), 3, [&](Rng& r) {
        ParameterStore ps;
        Rng init = r.child(1);
        FfnBlock block(ps, "ffn", toy, init);
        Tensor x = rand_normal_tensor(r, {5, toy.model_dim});
        std::vector<Tensor> inputs = store_tensors(ps);
        inputs.push_back(x);
        return grad_check(
            [&](const std::vector<Tensor>& in) { return weighted_sum(block.forward(in[in.size() - 1]), r); }, inputs);
    });

    const struct {
        const char* name;
        DecoderVariant variant;
        InteractionMode interaction;
    } decoder_cases[] = {
        {"grad.decoder_vanilla_vector", DecoderVariant::vanilla_vector, InteractionMode::none},
        {"grad.decoder_vanilla_tensor", DecoderVariant::vanilla_tensor, InteractionMode::none},
        {"grad.decoder_part_factorized", DecoderVariant::part_factorized, InteractionMode::none},
        {"grad.decoder_vanilla_composite", DecoderVariant::vanilla_composite, InteractionMode::none},
        {"grad.decoder_part_and_sum_summation", DecoderVariant::part_and_sum, InteractionMode::summation},
        {"grad.decoder_part_and_sum_self_attention", DecoderVariant::part_and_sum, InteractionMode::self_attention},
    };
    int salt = 205;
    for (const auto& dc : decoder_cases) {
        run_grad_case(rep, dc.name, opt, root.child(static_cast<std::uint64_t>(salt++)), 2, [&](Rng& r) {
            DecoderConfig cfg;
            cfg.variant = dc.variant;
            cfg.interaction = dc.interaction;
            cfg.n_layers = 1;
            cfg.attention = toy;
            ParameterStore ps;
            Rng init = r.child(1);
            CompositeQuerySet queries = CompositeQuerySet::create(ps, "q", 2, toy.model_dim, init);
            CompositeDecoder dec(ps, "dec", cfg, init);
            jitter_params(ps, r);
            Tensor mem_tokens = rand_normal_tensor(r, {4, toy.model_dim});
            Tensor mem_pos = rand_normal_tensor(r, {4, toy.model_dim});
            std::vector<Tensor> inputs = store_tensors(ps);
            inputs.push_back(mem_tokens);
            inputs.push_back(mem_pos);
            return grad_check(
                [&](const std::vector<Tensor>& in) {
                    const std::size_t k = in.size();
                    const DecoderOutput out = dec.decode(queries, TokenMemory{in[k - 2], in[k - 1]});
                    Tensor s;
                    if (!out.part_layers.empty()) {
                        s = weighted_sum(reshape(out.part_layers.back(), {6, toy.model_dim}), r);
                    }
                    if (!out.sum_layers.empty()) {
                        Tensor s2 = weighted_sum(out.sum_layers.back(), r);
                        s = s.defined() ? add(s, s2) : s2;
                    }
                    return s;
                },
                inputs);
        });
    }

    run_grad_case(rep, "grad.prediction_heads", opt, root.child(220), 2, [&](Rng& r) {
        Vocab vocab;
        vocab.n_entity = 3;
        vocab.n_predicate = 2;
        vocab.triplet_vocab = {{0, 0, 1}, {1, 1, 2}};
        ParameterStore ps;
        Rng init = r.child(1);
        PartHeads ph(ps, "part", 8, vocab, init);
        SumHeads sh(ps, "sum", 8, vocab, init);
        Tensor part_emb = rand_normal_tensor(r, {2, 3, 8});
        Tensor sum_emb = rand_normal_tensor(r, {2, 8});
        std::vector<Tensor> inputs = store_tensors(ps);
        inputs.push_back(part_emb);
        inputs.push_back(sum_emb);
        return grad_check(
            [&](const std::vector<Tensor>& in) {
                const std::size_t k = in.size();
                CompositePrediction pred;
                ph.predict(in[k - 2], pred);
                sh.predict(in[k - 1], pred);
                Tensor s = weighted_sum(pred.part_s_logit, r);
                s = add(s, weighted_sum(pred.part_o_logit, r));
                s = add(s, weighted_sum(pred.part_p_logit, r));
                s = add(s, weighted_sum(pred.part_spo_logit, r));
                s = add(s, weighted_sum(pred.part_s_box, r));
                s = add(s, weighted_sum(pred.part_o_box, r));
                s = add(s, weighted_sum(pred.part_p_box, r));
                s = add(s, weighted_sum(pred.sum_s_logit, r));
                s = add(s, weighted_sum(pred.sum_o_logit, r));
                s = add(s, weighted_sum(pred.sum_p_logit, r));
                s = add(s, weighted_sum(pred.sum_s_box, r));
                s = add(s, weighted_sum(pred.sum_o_box, r));
                s = add(s, weighted_sum(pred.sum_p_box, r));
                return s;
            },
            inputs);
    });
}

// One tiny scene/model pair shared by the end-to-end checks.
struct ToySetup {
    Dataset dataset;
    Vocab vocab;
    ModelConfig model_cfg;
};

ToySetup make_toy_setup() {
    ToySetup t;
    Scene scene;
    scene.entities.push_back({0, Box{0.3, 0.3, 0.25, 0.25}});
    scene.entities.push_back({1, Box{0.7, 0.7, 0.25, 0.25}});
    scene.relations.push_back({0, 1, 0});
    scene.relations.push_back({1, 0, 1});
    t.dataset.n_entity_labels = 2;
    t.dataset.n_predicate_labels = 2;
    t.dataset.scenes.push_back(scene);
    t.vocab = t.dataset.make_vocab();
    t.model_cfg.grid = 2;
    t.model_cfg.n_queries = 2;
    t.model_cfg.decoder.variant = DecoderVariant::part_and_sum;
    t.model_cfg.decoder.n_layers = 1;
    t.model_cfg.decoder.interaction = InteractionMode::summation;
    t.model_cfg.decoder.attention.model_dim = 8;
    t.model_cfg.decoder.attention.n_heads = 2;
    t.model_cfg.decoder.attention.ffn_dim = 16;
    t.model_cfg.decoder.attention.n_encoder_layers = 1;
    return t;
}

void end_to_end_gradient_check(VerifyReport& rep, const VerifyOptions& opt, Rng& root) {
    const ToySetup toy = make_toy_setup();
    ParameterStore ps;
    Rng init = root.child(301);
    PstModel model(ps, toy.model_cfg, toy.vocab, init);
    Rng jitter = root.child(302);
    jitter_params(ps, jitter);
    const Tensor tokens = render_tokens(toy.dataset.scenes[0], toy.model_cfg.grid, toy.vocab.n_entity);
    const std::vector<RelationTarget> padded =
        pad_targets(scene_targets(toy.dataset.scenes[0]), toy.model_cfg.n_queries);

    // Matching is piecewise constant; freeze the assignment of the unperturbed
    // forward pass so the checked function is smooth.
    const ModelOutput out0 = model.forward(tokens);
    CostWeights cw;
    std::vector<Assignment> fixed;
    for (const CompositePrediction& pred : out0.layers) {
        fixed.push_back(hungarian(matching_cost(pred, padded, toy.vocab, cw)));
    }
    LossWeights lw;

    GradCheckResult r = grad_check(
        [&](const std::vector<Tensor>&) {
            const ModelOutput out = model.forward(tokens);
            return set_loss(out.layers, padded, fixed, toy.vocab, lw).total_tensor;
        },
        store_tensors(ps));

    VerifyCheck c;
    c.name = "grad.set_loss_end_to_end";
    c.pass = r.max_error < opt.grad_tolerance;
    c.detail = "max rel error " + fmt(r.max_error) + " across " + std::to_string(ps.total_scalars()) + " parameters";
    rep.checks.push_back(c);
}

CostMatrix random_cost_matrix(Rng& rng, int m, int flavor) {
    CostMatrix cm;
    cm.m = m;
    cm.values.resize(static_cast<std::size_t>(m) * m);
    switch (flavor) {
        case 0:  // generic
            for (double& v : cm.values) v = rng.uniform(-1.0, 1.0);
            break;
        case 1:  // heavy ties: few distinct integers
            for (double& v : cm.values) v = rng.uniform_int(0, 2);
            break;
        case 2: {  // duplicated rows
            for (double& v : cm.values) v = rng.uniform(0.0, 1.0);
            for (int j = 0; j < m; ++j) cm.values[static_cast<std::size_t>(m) + j] = cm.values[static_cast<std::size_t>(j)];
            break;
        }
        default:  // constant matrix: every permutation optimal
            std::fill(cm.values.begin(), cm.values.end(), 0.25);
            break;
    }
    return cm;
}

}  // namespace

VerifyReport verify_gradients(const VerifyOptions& opt) {
    VerifyReport rep;
    Rng root(opt.seed);
    op_gradient_checks(rep, opt, root);
    block_gradient_checks(rep, opt, root, opt.fault);
    end_to_end_gradient_check(rep, opt, root);
    return rep;
}

VerifyReport verify_matching(const VerifyOptions& opt) {
    VerifyReport rep;
    Rng root(opt.seed);
    for (int m = 2; m <= 7; ++m) {
        Rng rng = root.child(static_cast<std::uint64_t>(400 + m));
        int mismatches = 0;
        std::string first_failure;
        for (int i = 0; i < opt.matching_cases; ++i) {
            const CostMatrix cm = random_cost_matrix(rng, m, i % 4);
            const Assignment h = hungarian(cm);
            const Assignment b = brute_force_assignment(cm);
            if (h.sigma != b.sigma || h.total_cost != b.total_cost) {
                ++mismatches;
                if (first_failure.empty()) {
                    first_failure = " first at case " + std::to_string(i);
                }
            }
        }
        VerifyCheck c;
        c.name = "matching.oracle_m" + std::to_string(m);
        c.pass = mismatches == 0;
        c.detail = std::to_string(opt.matching_cases) + " matrices, " + std::to_string(mismatches) + " mismatch(es)" +
                   first_failure;
        rep.checks.push_back(c);
    }
    return rep;
}

VerifyReport verify_metric_fixtures() {
    VerifyReport rep;
    auto push = [&rep](const std::string& name, bool pass, const std::string& detail) {
        rep.checks.push_back({name, pass, detail});
    };

    // Two ground-truth triplets; the candidate list hits the first exactly
    // and reaches the second with an IoU of exactly 0.4 — recall 1/2.
    {
        std::vector<RelationTarget> gt(2);
        gt[0] = {0, 0, 1, Box{0.2, 0.2, 0.2, 0.2}, Box{0.6, 0.6, 0.2, 0.2}};
        gt[1] = {1, 1, 0, Box{0.2, 0.1, 0.4, 0.2}, Box{0.8, 0.3, 0.15, 0.15}};
        std::vector<RankedTriplet> ranked(2);
        ranked[0] = {0.9, 0, 0, 1, Box{0.2, 0.2, 0.2, 0.2}, Box{0.6, 0.6, 0.2, 0.2}, 0, 0};
        ranked[1] = {0.8, 1, 1, 0, Box{0.35, 0.1, 0.3, 0.2}, Box{0.8, 0.3, 0.15, 0.15}, 1, 0};
        const double subj_iou = iou(ranked[1].s_box, gt[1].s_box);
        const RecallResult r = recall_at_k(ranked, gt, 50, EvalMode::relationship);
        push("metrics.recall_half_fixture", r.recall == 0.5 && !r.vacuous && std::fabs(subj_iou - 0.4) < 1e-12,
             "recall " + fmt(r.recall) + ", miss IoU " + fmt(subj_iou));
    }

    // One (predicate, object) category, two ground-truth instances, a true
    // positive ranked above a false positive: AP = 1.0 * 0.5 = 0.5.
    {
        std::vector<std::vector<RelationTarget>> gt(1);
        gt[0].push_back({0, 0, 1, Box{0.2, 0.2, 0.2, 0.2}, Box{0.6, 0.6, 0.2, 0.2}});
        gt[0].push_back({0, 0, 1, Box{0.8, 0.8, 0.15, 0.15}, Box{0.4, 0.4, 0.1, 0.1}});
        std::vector<std::vector<RankedTriplet>> ranked(1);
        ranked[0].push_back({0.9, 0, 0, 1, Box{0.2, 0.2, 0.2, 0.2}, Box{0.6, 0.6, 0.2, 0.2}, 0, 0});
        ranked[0].push_back({0.5, 2, 0, 1, Box{0.05, 0.9, 0.05, 0.05}, Box{0.9, 0.05, 0.05, 0.05}, 1, 0});
        const double ap = map_default(ranked, gt);
        push("metrics.ap_half_fixture", ap == 0.5, "AP " + fmt(ap));
    }

    // Perfect predictions: recall 1.0 in both modes, mAP 1.0.
    {
        std::vector<RelationTarget> gt(2);
        gt[0] = {0, 0, 1, Box{0.2, 0.2, 0.2, 0.2}, Box{0.6, 0.6, 0.2, 0.2}};
        gt[1] = {2, 1, 0, Box{0.4, 0.7, 0.2, 0.2}, Box{0.75, 0.25, 0.2, 0.2}};
        std::vector<RankedTriplet> rel(2), phr(2);
        for (int i = 0; i < 2; ++i) {
            rel[i] = {0.9 - 0.1 * i, gt[i].s_label, gt[i].p_label, gt[i].o_label, gt[i].s_box, gt[i].o_box, i, 0};
            const Box u = gt[i].union_target();
            phr[i] = {0.9 - 0.1 * i, gt[i].s_label, gt[i].p_label, gt[i].o_label, u, u, i, 0};
        }
        const double r_rel = recall_at_k(rel, gt, 50, EvalMode::relationship).recall;
        const double r_phr = recall_at_k(phr, gt, 50, EvalMode::phrase).recall;
        const double ap = map_default({rel}, {gt});
        push("metrics.perfect_fixture", r_rel == 1.0 && r_phr == 1.0 && ap == 1.0,
             "relationship " + fmt(r_rel) + ", phrase " + fmt(r_phr) + ", mAP " + fmt(ap));
    }

    // Degenerate inputs: no candidates → recall 0; no ground truth → vacuous
    // 1.0; no predictions at all → mAP 0.
    {
        std::vector<RelationTarget> gt(1);
        gt[0] = {0, 0, 1, Box{0.2, 0.2, 0.2, 0.2}, Box{0.6, 0.6, 0.2, 0.2}};
        const RecallResult none = recall_at_k({}, gt, 50, EvalMode::relationship);
        const RecallResult vac = recall_at_k({}, {}, 50, EvalMode::relationship);
        const double ap = map_default({{}}, {gt});
        push("metrics.degenerate_cases", none.recall == 0.0 && !none.vacuous && vac.recall == 1.0 && vac.vacuous &&
                                             ap == 0.0,
             "empty-candidates recall " + fmt(none.recall) + ", empty-gt recall " + fmt(vac.recall) + ", mAP " +
                 fmt(ap));
    }
    return rep;
}

namespace {

// Random but internally consistent prediction (prob = softmax(logit)).
CompositePrediction random_prediction(Rng& rng, int m, const Vocab& vocab) {
    CompositePrediction p;
    p.n_queries = m;
    p.has_part = true;
    p.has_sum = true;
    auto cls = [&](Tensor& logit, Tensor& prob, int classes) {
        logit = rand_normal_tensor(rng, {m, classes});
        prob = softmax_rows(logit);
    };
    cls(p.part_s_logit, p.part_s_prob, vocab.entity_classes());
    cls(p.part_o_logit, p.part_o_prob, vocab.entity_classes());
    cls(p.part_p_logit, p.part_p_prob, vocab.predicate_classes());
    cls(p.part_spo_logit, p.part_spo_prob, vocab.triplet_classes());
    cls(p.sum_s_logit, p.sum_s_prob, vocab.entity_classes());
    cls(p.sum_o_logit, p.sum_o_prob, vocab.entity_classes());
    cls(p.sum_p_logit, p.sum_p_prob, vocab.predicate_classes());
    p.part_s_box = rand_boxes(rng, m);
    p.part_o_box = rand_boxes(rng, m);
    p.part_p_box = rand_boxes(rng, m);
    p.sum_s_box = rand_boxes(rng, m);
    p.sum_o_box = rand_boxes(rng, m);
    p.sum_p_box = rand_boxes(rng, m);
    return p;
}

std::vector<RelationTarget> random_targets(Rng& rng, int count, const Vocab& vocab) {
    std::vector<RelationTarget> t(static_cast<std::size_t>(count));
    for (auto& x : t) {
        const auto& trip = vocab.triplet_vocab[static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<int>(vocab.triplet_vocab.size()) - 1))];
        x.s_label = trip[0];
        x.p_label = trip[1];
        x.o_label = trip[2];
        const auto box = [&rng]() {
            return Box{rng.uniform(0.3, 0.7), rng.uniform(0.3, 0.7), rng.uniform(0.1, 0.3), rng.uniform(0.1, 0.3)};
        };
        x.s_box = box();
        x.o_box = box();
    }
    return t;
}

double loss_with_rematching(const std::vector<CompositePrediction>& layers,
                            const std::vector<RelationTarget>& targets, int m, const Vocab& vocab,
                            const LossWeights& lw) {
    const std::vector<RelationTarget> padded = pad_targets(targets, m);
    CostWeights cw{lw.lambda_cls, lw.lambda_l1, lw.lambda_giou};
    std::vector<Assignment> assignments;
    for (const CompositePrediction& pred : layers) {
        assignments.push_back(hungarian(matching_cost(pred, padded, vocab, cw)));
    }
    return set_loss(layers, padded, assignments, vocab, lw).total;
}

CompositePrediction permute_queries(const CompositePrediction& p, const std::vector<int>& perm) {
    CompositePrediction q = p;
    auto apply = [&perm](Tensor& t) {
        if (t.defined()) t = take_rows(t, perm);
    };
    apply(q.part_s_prob);
    apply(q.part_o_prob);
    apply(q.part_p_prob);
    apply(q.part_spo_prob);
    apply(q.part_s_logit);
    apply(q.part_o_logit);
    apply(q.part_p_logit);
    apply(q.part_spo_logit);
    apply(q.part_s_box);
    apply(q.part_o_box);
    apply(q.part_p_box);
    apply(q.sum_s_prob);
    apply(q.sum_o_prob);
    apply(q.sum_p_prob);
    apply(q.sum_s_logit);
    apply(q.sum_o_logit);
    apply(q.sum_p_logit);
    apply(q.sum_s_box);
    apply(q.sum_o_box);
    apply(q.sum_p_box);
    return q;
}

// Logit rows whose softmax underflows to an exact one-hot: the true class
// sits 1600 above the rest, far past the double-precision exp() floor.
Tensor saturated_logits(int m, int classes, const std::vector<int>& true_class) {
    std::vector<double> d(static_cast<std::size_t>(m) * classes, -800.0);
    for (int i = 0; i < m; ++i) d[static_cast<std::size_t>(i) * classes + true_class[static_cast<std::size_t>(i)]] = 800.0;
    return Tensor::from_data({m, classes}, std::move(d));
}

Tensor one_hot_rows(int m, int classes, const std::vector<int>& true_class) {
    std::vector<double> d(static_cast<std::size_t>(m) * classes, 0.0);
    for (int i = 0; i < m; ++i) d[static_cast<std::size_t>(i) * classes + true_class[static_cast<std::size_t>(i)]] = 1.0;
    return Tensor::from_data({m, classes}, std::move(d));
}

Tensor boxes_tensor(const std::vector<Box>& boxes) {
    std::vector<double> d;
    d.reserve(boxes.size() * 4);
    for (const Box& b : boxes) {
        d.push_back(b.cx);
        d.push_back(b.cy);
        d.push_back(b.w);
        d.push_back(b.h);
    }
    return Tensor::from_data({static_cast<int>(boxes.size()), 4}, std::move(d));
}

// Prediction that reproduces the targets exactly (probabilities one-hot,
// boxes equal), for the zero-loss fixture.
CompositePrediction perfect_prediction(const std::vector<RelationTarget>& targets, const Vocab& vocab) {
    const int m = static_cast<int>(targets.size());
    std::vector<int> cs(targets.size()), co(targets.size()), cp(targets.size()), cspo(targets.size());
    std::vector<Box> bs, bo, bu;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        cs[i] = targets[i].s_label;
        co[i] = targets[i].o_label;
        cp[i] = targets[i].p_label;
        cspo[i] = vocab.triplet_index(targets[i].s_label, targets[i].p_label, targets[i].o_label);
        bs.push_back(targets[i].s_box);
        bo.push_back(targets[i].o_box);
        bu.push_back(targets[i].union_target());
    }
    CompositePrediction p;
    p.n_queries = m;
    p.has_part = true;
    p.has_sum = true;
    p.part_s_logit = saturated_logits(m, vocab.entity_classes(), cs);
    p.part_o_logit = saturated_logits(m, vocab.entity_classes(), co);
    p.part_p_logit = saturated_logits(m, vocab.predicate_classes(), cp);
    p.part_spo_logit = saturated_logits(m, vocab.triplet_classes(), cspo);
    p.part_s_prob = one_hot_rows(m, vocab.entity_classes(), cs);
    p.part_o_prob = one_hot_rows(m, vocab.entity_classes(), co);
    p.part_p_prob = one_hot_rows(m, vocab.predicate_classes(), cp);
    p.part_spo_prob = one_hot_rows(m, vocab.triplet_classes(), cspo);
    p.part_s_box = boxes_tensor(bs);
    p.part_o_box = boxes_tensor(bo);
    p.part_p_box = boxes_tensor(bu);
    p.sum_s_logit = p.part_s_logit;
    p.sum_o_logit = p.part_o_logit;
    p.sum_p_logit = p.part_p_logit;
    p.sum_s_prob = p.part_s_prob;
    p.sum_o_prob = p.part_o_prob;
    p.sum_p_prob = p.part_p_prob;
    p.sum_s_box = p.part_s_box;
    p.sum_o_box = p.part_o_box;
    p.sum_p_box = p.part_p_box;
    return p;
}

}  // namespace

VerifyReport verify_loss_properties(const VerifyOptions& opt) {
    VerifyReport rep;
    Rng root(opt.seed);
    auto push = [&rep](const std::string& name, bool pass, const std::string& detail) {
        rep.checks.push_back({name, pass, detail});
    };

    Vocab vocab;
    vocab.n_entity = 4;
    vocab.n_predicate = 3;
    vocab.triplet_vocab = {{0, 0, 1}, {1, 1, 2}, {2, 2, 3}, {3, 0, 0}};
    const int m = 5;
    LossWeights lw;

    // Ground-truth permutation invariance under re-matching.
    {
        Rng rng = root.child(501);
        double worst = 0.0;
        for (int trial = 0; trial < 5; ++trial) {
            std::vector<CompositePrediction> layers = {random_prediction(rng, m, vocab),
                                                       random_prediction(rng, m, vocab)};
            std::vector<RelationTarget> targets = random_targets(rng, 3, vocab);
            const double base = loss_with_rematching(layers, targets, m, vocab, lw);
            std::vector<RelationTarget> shuffled = targets;
            std::rotate(shuffled.begin(), shuffled.begin() + 1, shuffled.end());
            std::swap(shuffled[0], shuffled[1]);
            const double permuted = loss_with_rematching(layers, shuffled, m, vocab, lw);
            worst = std::max(worst, std::fabs(base - permuted));
        }
        push("loss.gt_permutation_invariance", worst <= 1e-9, "max |diff| " + fmt(worst) + " over 5 trials");
    }

    // Consistent query permutation invariance under re-matching.
    {
        Rng rng = root.child(502);
        double worst = 0.0;
        for (int trial = 0; trial < 5; ++trial) {
            std::vector<CompositePrediction> layers = {random_prediction(rng, m, vocab),
                                                       random_prediction(rng, m, vocab)};
            std::vector<RelationTarget> targets = random_targets(rng, 3, vocab);
            const double base = loss_with_rematching(layers, targets, m, vocab, lw);
            std::vector<int> perm = {2, 0, 4, 1, 3};
            std::vector<CompositePrediction> permuted = {permute_queries(layers[0], perm),
                                                         permute_queries(layers[1], perm)};
            const double after = loss_with_rematching(permuted, targets, m, vocab, lw);
            worst = std::max(worst, std::fabs(base - after));
        }
        push("loss.query_permutation_invariance", worst <= 1e-9, "max |diff| " + fmt(worst) + " over 5 trials");
    }

    // Perfect prediction with every query matched to a real target: exact 0.
    {
        Rng rng = root.child(503);
        std::vector<RelationTarget> targets = random_targets(rng, 3, vocab);
        const std::vector<CompositePrediction> layers = {perfect_prediction(targets, vocab)};
        const double total = loss_with_rematching(layers, targets, 3, vocab, lw);
        push("loss.perfect_prediction_zero", total == 0.0, "total " + fmt(total));
    }

    // total == weighted breakdown sum.
    {
        Rng rng = root.child(504);
        std::vector<CompositePrediction> layers = {random_prediction(rng, m, vocab),
                                                   random_prediction(rng, m, vocab)};
        std::vector<RelationTarget> targets = random_targets(rng, 2, vocab);
        const std::vector<RelationTarget> padded = pad_targets(targets, m);
        CostWeights cw{lw.lambda_cls, lw.lambda_l1, lw.lambda_giou};
        std::vector<Assignment> assignments;
        for (const CompositePrediction& pred : layers)
            assignments.push_back(hungarian(matching_cost(pred, padded, vocab, cw)));
        const LossReport report = set_loss(layers, padded, assignments, vocab, lw);
        double reconstructed = 0.0;
        for (const LayerLossBreakdown& l : report.layers) {
            double part = 0.0, sum = 0.0;
            for (int i = 0; i < 4; ++i) part += lw.lambda_cls * l.part_cls[i];
            for (int i = 0; i < 3; ++i) part += lw.lambda_l1 * l.part_l1[i] + lw.lambda_giou * l.part_giou[i];
            for (int i = 0; i < 3; ++i)
                sum += lw.lambda_cls * l.sum_cls[i] + lw.lambda_l1 * l.sum_l1[i] + lw.lambda_giou * l.sum_giou[i];
            reconstructed += part + lw.sum_stream_weight * sum;
        }
        const double diff = std::fabs(report.total - reconstructed);
        push("loss.breakdown_total_consistency", diff <= 1e-9, "|total - reconstruction| " + fmt(diff));
    }

    // Box weights zeroed: box breakdown identically zero, total falls back to
    // the classification terms alone.
    {
        Rng rng = root.child(505);
        LossWeights gated = lw;
        gated.lambda_l1 = 0.0;
        gated.lambda_giou = 0.0;
        std::vector<CompositePrediction> layers = {random_prediction(rng, m, vocab)};
        std::vector<RelationTarget> targets = random_targets(rng, 3, vocab);
        const std::vector<RelationTarget> padded = pad_targets(targets, m);
        CostWeights cw{gated.lambda_cls, gated.lambda_l1, gated.lambda_giou};
        std::vector<Assignment> assignments = {hungarian(matching_cost(layers[0], padded, vocab, cw))};
        const LossReport report = set_loss(layers, padded, assignments, vocab, gated);
        double cls_only = 0.0;
        bool boxes_zero = true;
        for (const LayerLossBreakdown& l : report.layers) {
            for (int i = 0; i < 4; ++i) cls_only += gated.lambda_cls * l.part_cls[i];
            for (int i = 0; i < 3; ++i) {
                cls_only += gated.sum_stream_weight * gated.lambda_cls * l.sum_cls[i];
                boxes_zero = boxes_zero && l.part_l1[i] == 0.0 && l.part_giou[i] == 0.0 && l.sum_l1[i] == 0.0 &&
                             l.sum_giou[i] == 0.0;
            }
        }
        const double diff = std::fabs(report.total - cls_only);
        push("loss.box_weight_gating", diff <= 1e-9 && boxes_zero, "|total - cls reconstruction| " + fmt(diff));
    }

    // All-∅ targets with uniform logits: each classification head reads
    // exactly no_object_weight * log(C).
    {
        CompositePrediction p;
        p.n_queries = m;
        p.has_part = true;
        p.has_sum = true;
        auto uniform_cls = [&](Tensor& logit, Tensor& prob, int classes) {
            logit = Tensor::zeros({m, classes});
            prob = softmax_rows(logit);
        };
        uniform_cls(p.part_s_logit, p.part_s_prob, vocab.entity_classes());
        uniform_cls(p.part_o_logit, p.part_o_prob, vocab.entity_classes());
        uniform_cls(p.part_p_logit, p.part_p_prob, vocab.predicate_classes());
        uniform_cls(p.part_spo_logit, p.part_spo_prob, vocab.triplet_classes());
        uniform_cls(p.sum_s_logit, p.sum_s_prob, vocab.entity_classes());
        uniform_cls(p.sum_o_logit, p.sum_o_prob, vocab.entity_classes());
        uniform_cls(p.sum_p_logit, p.sum_p_prob, vocab.predicate_classes());
        Rng rng = root.child(506);
        p.part_s_box = rand_boxes(rng, m);
        p.part_o_box = rand_boxes(rng, m);
        p.part_p_box = rand_boxes(rng, m);
        p.sum_s_box = p.part_s_box;
        p.sum_o_box = p.part_o_box;
        p.sum_p_box = p.part_p_box;
        const std::vector<RelationTarget> padded = pad_targets({}, m);
        std::vector<Assignment> assignments = {hungarian(matching_cost(p, padded, vocab, CostWeights{}))};
        const LossReport report = set_loss({p}, padded, assignments, vocab, lw);
        const LayerLossBreakdown& l = report.layers[0];
        auto expect = [&](double actual, int classes) {
            return std::fabs(actual - lw.no_object_weight * std::log(static_cast<double>(classes))) <= 1e-12;
        };
        const bool ok = expect(l.part_cls[0], vocab.entity_classes()) && expect(l.part_cls[1], vocab.entity_classes()) &&
                        expect(l.part_cls[2], vocab.predicate_classes()) &&
                        expect(l.part_cls[3], vocab.triplet_classes()) && expect(l.sum_cls[0], vocab.entity_classes()) &&
                        expect(l.sum_cls[1], vocab.entity_classes()) && expect(l.sum_cls[2], vocab.predicate_classes()) &&
                        l.part_l1[0] == 0.0 && l.part_giou[0] == 0.0 && l.sum_l1[0] == 0.0;
        push("loss.uniform_null_closed_form", ok,
             "part_cls_s " + fmt(l.part_cls[0]) + " expected " +
                 fmt(lw.no_object_weight * std::log(static_cast<double>(vocab.entity_classes()))));
    }

    return rep;
}

VerifyReport run_verification(const VerifyOptions& opt) {
    VerifyReport rep;
    rep.merge(verify_gradients(opt));
    rep.merge(verify_matching(opt));
    rep.merge(verify_metric_fixtures());
    rep.merge(verify_loss_properties(opt));
    return rep;
}

std::string to_json(const VerifyReport& report) {
    nlohmann::json j;
    j["checks"] = nlohmann::json::array();
    for (const VerifyCheck& c : report.checks) {
        j["checks"].push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
    }
    j["all_pass"] = report.all_pass();
    return j.dump(2);
}

}  // namespace partsum
