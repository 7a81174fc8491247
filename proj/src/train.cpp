#include "partsum/train.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "partsum/checkpoint.hpp"
#include "partsum/error.hpp"
#include "partsum/matching.hpp"
#include "partsum/optim.hpp"

namespace partsum {

namespace {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct TermSums {
    double part_cls[4] = {0, 0, 0, 0};
    double part_l1[3] = {0, 0, 0};
    double part_giou[3] = {0, 0, 0};
    double sum_cls[3] = {0, 0, 0};
    double sum_l1[3] = {0, 0, 0};
    double sum_giou[3] = {0, 0, 0};

    void add(const LossReport& report, double scale) {
        for (const LayerLossBreakdown& l : report.layers) {
            for (int i = 0; i < 4; ++i) part_cls[i] += scale * l.part_cls[i];
            for (int i = 0; i < 3; ++i) {
                part_l1[i] += scale * l.part_l1[i];
                part_giou[i] += scale * l.part_giou[i];
                sum_cls[i] += scale * l.sum_cls[i];
                sum_l1[i] += scale * l.sum_l1[i];
                sum_giou[i] += scale * l.sum_giou[i];
            }
        }
    }
};

const char* kCsvHeader =
    "step,total,part_cls_s,part_cls_o,part_cls_p,part_cls_spo,part_l1_s,part_l1_o,part_l1_p,"
    "part_giou_s,part_giou_o,part_giou_p,sum_cls_s,sum_cls_o,sum_cls_p,sum_l1_s,sum_l1_o,sum_l1_p,"
    "sum_giou_s,sum_giou_o,sum_giou_p";

void write_csv_row(std::ostream& os, int step, double total, const TermSums& t) {
    os << step << ',' << fmt17(total);
    for (int i = 0; i < 4; ++i) os << ',' << fmt17(t.part_cls[i]);
    for (int i = 0; i < 3; ++i) os << ',' << fmt17(t.part_l1[i]);
    for (int i = 0; i < 3; ++i) os << ',' << fmt17(t.part_giou[i]);
    for (int i = 0; i < 3; ++i) os << ',' << fmt17(t.sum_cls[i]);
    for (int i = 0; i < 3; ++i) os << ',' << fmt17(t.sum_l1[i]);
    for (int i = 0; i < 3; ++i) os << ',' << fmt17(t.sum_giou[i]);
    os << '\n';
}

}  // namespace

void TrainConfig::validate() const {
    if (steps < 1) throw ConfigError("train: steps must be >= 1, got " + std::to_string(steps));
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1, got " + std::to_string(batch_size));
    if (!(learning_rate > 0.0)) throw ConfigError("train: learning_rate must be positive");
    if (log_every < 1) throw ConfigError("train: log_every must be >= 1");
    if (eval_every < 0) throw ConfigError("train: eval_every must be >= 0");
    if (recall_top_k < 1) throw ConfigError("train: recall_top_k must be >= 1");
    if (out_dir.empty()) throw ConfigError("train: out_dir must be set");
    if (loss.no_object_weight < 0.0) throw ConfigError("train: no_object_weight must be >= 0");
}

std::vector<std::vector<QueryOutput>> infer_dataset(const PstModel& model, const Dataset& data, InferenceMode mode) {
    std::vector<std::vector<QueryOutput>> out;
    out.reserve(data.scenes.size());
    const int grid = model.config().grid;
    for (const Scene& scene : data.scenes) {
        const Tensor tokens = render_tokens(scene, grid, model.vocab().n_entity);
        const ModelOutput mo = model.forward(tokens);
        out.push_back(combine_inference(mo.layers.back(), mode));
    }
    return out;
}

double dataset_recall(const PstModel& model, const Dataset& data, InferenceMode mode, int top_k, int k_pred) {
    const int kp = k_pred <= 0 ? data.n_predicate_labels : k_pred;
    double total = 0.0;
    const int grid = model.config().grid;
    for (const Scene& scene : data.scenes) {
        const Tensor tokens = render_tokens(scene, grid, model.vocab().n_entity);
        const ModelOutput mo = model.forward(tokens);
        const std::vector<QueryOutput> queries = combine_inference(mo.layers.back(), mode);
        const std::vector<RankedTriplet> ranked = rank_predictions(queries, EvalMode::relationship, kp);
        total += recall_at_k(ranked, scene_targets(scene), top_k, EvalMode::relationship).recall;
    }
    return total / static_cast<double>(data.scenes.size());
}

TrainResult train(const Dataset& train_data, const ModelConfig& model_cfg, const TrainConfig& cfg,
                  const Dataset* eval_data) {
    cfg.validate();
    model_cfg.validate();
    if (train_data.scenes.empty()) throw DataError("train: dataset has no scenes");
    if (cfg.eval_every > 0 && eval_data == nullptr) {
        throw ConfigError("train: eval_every > 0 requires an evaluation dataset");
    }

    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);
    const Vocab vocab = train_data.make_vocab();

    ParameterStore ps;
    Rng rng(cfg.seed);
    PstModel model(ps, model_cfg, vocab, rng);
    if (!cfg.resume_from.empty()) load_checkpoint(ps, cfg.resume_from);
    save_vocab(vocab, (fs::path(cfg.out_dir) / "vocab.json").string());

    // Token rendering and target padding are pure functions of the scene;
    // cache them once.
    const int n_scenes = static_cast<int>(train_data.scenes.size());
    std::vector<Tensor> tokens;
    std::vector<std::vector<RelationTarget>> padded;
    tokens.reserve(train_data.scenes.size());
    padded.reserve(train_data.scenes.size());
    for (const Scene& scene : train_data.scenes) {
        tokens.push_back(render_tokens(scene, model_cfg.grid, vocab.n_entity));
        padded.push_back(pad_targets(scene_targets(scene), model_cfg.n_queries));
    }

    Adam opt(cfg.learning_rate);

    std::ofstream train_log((fs::path(cfg.out_dir) / "train_log.csv").string());
    if (!train_log) throw DataError("train: cannot open train_log.csv under '" + cfg.out_dir + "'");
    train_log << kCsvHeader << '\n';
    std::ofstream eval_log;
    if (cfg.eval_every > 0) {
        eval_log.open((fs::path(cfg.out_dir) / "eval_log.csv").string());
        if (!eval_log) throw DataError("train: cannot open eval_log.csv under '" + cfg.out_dir + "'");
        eval_log << "step,recall\n";
    }

    TrainResult result;
    const std::string final_path = (fs::path(cfg.out_dir) / "final.ckpt").string();
    const std::string best_path = (fs::path(cfg.out_dir) / "best.ckpt").string();
    const double inv_batch = 1.0 / static_cast<double>(cfg.batch_size);
    bool stopped_early = false;

    auto abort_divergence = [&](int step, const std::string& reason, const nlohmann::json& extra) {
        nlohmann::json dump;
        dump["step"] = step;
        dump["reason"] = reason;
        for (const auto& [key, value] : extra.items()) dump[key] = value;
        nlohmann::json recent = nlohmann::json::array();
        const std::size_t n = result.loss_curve.size();
        for (std::size_t i = n > 20 ? n - 20 : 0; i < n; ++i) recent.push_back(result.loss_curve[i]);
        dump["recent_losses"] = recent;
        std::ofstream ds((fs::path(cfg.out_dir) / "divergence.json").string());
        ds << dump.dump(2) << '\n';
        throw DivergenceError("train: " + reason + " at step " + std::to_string(step) +
                              " (diagnostics in divergence.json)");
    };
    // Catches optimizer blow-ups and corrupt resume checkpoints before the
    // poisoned values can crash a forward pass mid-graph.
    auto check_params_finite = [&](int step) {
        for (const auto& [name, tensor] : ps.entries()) {
            for (const double v : tensor.data()) {
                if (!std::isfinite(v)) abort_divergence(step, "non-finite parameter", {{"parameter", name}});
            }
        }
    };
    check_params_finite(0);

    for (int step = 1; step <= cfg.steps && !stopped_early; ++step) {
        ps.zero_grad();
        Tensor batch_total;
        TermSums sums;
        for (int b = 0; b < cfg.batch_size; ++b) {
            const int idx = ((step - 1) * cfg.batch_size + b) % n_scenes;
            const ModelOutput out = model.forward(tokens[static_cast<std::size_t>(idx)]);
            std::vector<Assignment> assignments;
            assignments.reserve(out.layers.size());
            for (const CompositePrediction& pred : out.layers) {
                assignments.push_back(hungarian(matching_cost(pred, padded[static_cast<std::size_t>(idx)], vocab, cfg.match)));
            }
            const LossReport report =
                set_loss(out.layers, padded[static_cast<std::size_t>(idx)], assignments, vocab, cfg.loss);
            sums.add(report, inv_batch);
            batch_total = batch_total.defined() ? add(batch_total, report.total_tensor) : report.total_tensor;
        }
        const Tensor loss_tensor = scale(batch_total, inv_batch);
        const double loss_value = loss_tensor.item();
        if (!std::isfinite(loss_value)) {
            abort_divergence(step, "non-finite loss", {{"loss", fmt17(loss_value)}});
        }
        backward(loss_tensor);
        opt.step(ps);
        check_params_finite(step);

        write_csv_row(train_log, step, loss_value, sums);
        result.loss_curve.push_back(loss_value);
        result.steps_run = step;
        if (!cfg.quiet && (step % cfg.log_every == 0 || step == cfg.steps)) {
            std::cout << "step " << step << " loss " << fmt17(loss_value) << '\n';
        }

        if (cfg.eval_every > 0 && (step % cfg.eval_every == 0 || step == cfg.steps)) {
            const double recall =
                dataset_recall(model, *eval_data, cfg.inference, cfg.recall_top_k, cfg.recall_k_pred);
            eval_log << step << ',' << fmt17(recall) << '\n';
            result.eval_curve.emplace_back(step, recall);
            if (recall > result.best_metric) {
                result.best_metric = recall;
                result.best_step = step;
                save_checkpoint(ps, best_path);
                result.best_checkpoint = best_path;
            }
            if (!cfg.quiet) std::cout << "step " << step << " eval recall " << fmt17(recall) << '\n';
            if (cfg.stop_at_metric >= 0.0 && recall >= cfg.stop_at_metric) stopped_early = true;
        }
    }

    save_checkpoint(ps, final_path);
    result.final_checkpoint = final_path;
    return result;
}

}  // namespace partsum
