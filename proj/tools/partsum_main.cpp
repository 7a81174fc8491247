#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "partsum/checkpoint.hpp"
#include "partsum/evaluation.hpp"
#include "partsum/runconfig.hpp"
#include "partsum/train.hpp"
#include "partsum/verify.hpp"

namespace fs = std::filesystem;
using namespace partsum;

namespace {

// A trained run directory: resolved config, label spaces, parameters.
struct LoadedRun {
    FullConfig config;
    Vocab vocab;
    ParameterStore params;
    PstModel model;
};

LoadedRun load_run(const std::string& run_dir, const std::string& checkpoint, bool capture_attention) {
    LoadedRun run;
    RunConfig raw = RunConfig::from_file((fs::path(run_dir) / "config.txt").string());
    run.config = parse_full_config(raw);
    run.config.model.decoder.capture_attention = capture_attention;
    run.vocab = load_vocab((fs::path(run_dir) / "vocab.json").string());
    Rng rng(run.config.train.seed);
    run.model = PstModel(run.params, run.config.model, run.vocab, rng);
    std::string ck = checkpoint;
    if (ck.empty() || ck == "final") ck = (fs::path(run_dir) / "final.ckpt").string();
    else if (ck == "best") ck = (fs::path(run_dir) / "best.ckpt").string();
    load_checkpoint(run.params, ck);
    return run;
}

Dataset load_dataset_for(const Vocab& vocab, const std::string& path) {
    Dataset data = load_dataset(path);
    if (data.n_entity_labels != vocab.n_entity || data.n_predicate_labels != vocab.n_predicate) {
        throw DataError("dataset '" + path + "' has label spaces " + std::to_string(data.n_entity_labels) + "/" +
                        std::to_string(data.n_predicate_labels) + " but the run was trained with " +
                        std::to_string(vocab.n_entity) + "/" + std::to_string(vocab.n_predicate));
    }
    return data;
}

nlohmann::json matrix_json(const Tensor& t) {
    nlohmann::json rows = nlohmann::json::array();
    const int r = t.dim(0), c = t.dim(1);
    for (int i = 0; i < r; ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (int j = 0; j < c; ++j) row.push_back(t.data()[static_cast<std::size_t>(i) * c + j]);
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Part-and-sum transformer workbench: synthetic relational scenes, set-prediction training, "
                 "recall/mAP evaluation"};
    app.require_subcommand(1);
    int rc = 0;

    // --- gen-data ------------------------------------------------------
    auto* gen = app.add_subcommand("gen-data", "Generate a synthetic scene dataset (JSON)");
    SceneGenConfig scene_cfg;
    int gen_scenes = 200;
    std::string gen_out;
    gen->add_option("--out", gen_out, "Output dataset file")->required();
    gen->add_option("--scenes", gen_scenes, "Number of scenes");
    gen->add_option("--seed", scene_cfg.seed, "Generation seed");
    gen->add_option("--entity-labels", scene_cfg.n_entity_labels, "Entity label count");
    gen->add_option("--predicate-labels", scene_cfg.n_predicate_labels, "Predicate label count");
    gen->add_option("--min-entities", scene_cfg.min_entities, "Minimum entities per scene");
    gen->add_option("--max-entities", scene_cfg.max_entities, "Maximum entities per scene");
    gen->add_option("--min-relations", scene_cfg.min_relations, "Minimum relations per scene");
    gen->add_option("--max-relations", scene_cfg.max_relations, "Maximum relations per scene");
    gen->callback([&] {
        const Dataset data = generate_dataset(scene_cfg, gen_scenes);
        save_dataset(data, gen_out);
        std::size_t entities = 0, relations = 0;
        for (const Scene& s : data.scenes) {
            entities += s.entities.size();
            relations += s.relations.size();
        }
        nlohmann::json stats;
        stats["path"] = gen_out;
        stats["scenes"] = data.scenes.size();
        stats["entities"] = entities;
        stats["relations"] = relations;
        stats["distinct_triplets"] = data.make_vocab().triplet_vocab.size();
        std::cout << stats.dump(2) << '\n';
    });

    // --- train -----------------------------------------------------------
    auto* tr = app.add_subcommand("train", "Train a model from a config file (flags override file values)");
    std::string tr_config, tr_data, tr_eval_data, tr_out, tr_variant, tr_seed, tr_steps;
    std::vector<std::string> tr_sets;
    tr->add_option("--config", tr_config, "key = value config file");
    tr->add_option("--set", tr_sets, "Override a config key (key=value, repeatable)");
    tr->add_option("--data", tr_data, "Training dataset (overrides experiment.train_data)");
    tr->add_option("--eval-data", tr_eval_data, "Held-out dataset (overrides experiment.eval_data)");
    tr->add_option("--out", tr_out, "Run directory (overrides experiment.out_dir)");
    tr->add_option("--variant", tr_variant, "Decoder variant (overrides model.variant)");
    tr->add_option("--seed", tr_seed, "Training seed (overrides train.seed)");
    tr->add_option("--steps", tr_steps, "Step count (overrides train.steps)");
    tr->callback([&] {
        RunConfig raw = tr_config.empty() ? RunConfig() : RunConfig::from_file(tr_config);
        raw.apply_overrides(tr_sets);
        if (!tr_data.empty()) raw.set("experiment.train_data", tr_data);
        if (!tr_eval_data.empty()) raw.set("experiment.eval_data", tr_eval_data);
        if (!tr_out.empty()) raw.set("experiment.out_dir", tr_out);
        if (!tr_variant.empty()) raw.set("model.variant", tr_variant);
        if (!tr_seed.empty()) raw.set("train.seed", tr_seed);
        if (!tr_steps.empty()) raw.set("train.steps", tr_steps);
        FullConfig cfg = parse_full_config(raw);
        if (cfg.experiment.train_data.empty()) {
            throw ConfigError("train: experiment.train_data (or --data) is required");
        }
        const Dataset train_data = load_dataset(cfg.experiment.train_data);
        std::optional<Dataset> eval_data;
        if (!cfg.experiment.eval_data.empty()) eval_data = load_dataset(cfg.experiment.eval_data);
        fs::create_directories(cfg.experiment.out_dir);
        save_config(cfg, (fs::path(cfg.experiment.out_dir) / "config.txt").string());
        const TrainResult res = train(train_data, cfg.model, cfg.train, eval_data ? &*eval_data : nullptr);
        nlohmann::json summary;
        summary["out_dir"] = cfg.experiment.out_dir;
        summary["steps_run"] = res.steps_run;
        summary["final_loss"] = res.loss_curve.back();
        summary["final_checkpoint"] = res.final_checkpoint;
        if (!res.best_checkpoint.empty()) {
            summary["best_checkpoint"] = res.best_checkpoint;
            summary["best_metric"] = res.best_metric;
            summary["best_step"] = res.best_step;
        }
        std::cout << summary.dump(2) << '\n';
    });

    // --- eval ------------------------------------------------------------
    auto* ev = app.add_subcommand("eval", "Evaluate a trained run on a dataset (metrics JSON to stdout)");
    std::string ev_run, ev_data, ev_checkpoint = "final", ev_mode = "auto", ev_dump;
    int ev_dump_top_k = 5;
    ev->add_option("--run", ev_run, "Run directory (config.txt, vocab.json, checkpoints)")->required();
    ev->add_option("--data", ev_data, "Dataset to evaluate")->required();
    ev->add_option("--checkpoint", ev_checkpoint, "'final', 'best', or an explicit checkpoint path");
    ev->add_option("--mode", ev_mode, "Inference mode: auto|part-only|sum-only|part-sum");
    ev->add_option("--dump-predictions", ev_dump, "Directory for per-image prediction JSONL dumps");
    ev->add_option("--dump-top-k", ev_dump_top_k, "Class entries kept per head in dumps");
    ev->callback([&] {
        LoadedRun run = load_run(ev_run, ev_checkpoint, false);
        const Dataset data = load_dataset_for(run.vocab, ev_data);
        const InferenceMode mode = ev_mode == "auto"
                                       ? resolve_inference_mode(run.config.eval_mode, run.config.model.decoder.variant)
                                       : inference_mode_from_string(ev_mode);
        const auto outputs = infer_dataset(run.model, data, mode);
        std::vector<std::vector<RelationTarget>> gt;
        gt.reserve(data.scenes.size());
        for (const Scene& s : data.scenes) gt.push_back(scene_targets(s));
        const MetricsReport report = evaluate_outputs(outputs, gt, {50, 100}, {1, 0}, data.n_predicate_labels);
        std::cout << to_json(report) << '\n';
        if (!ev_dump.empty()) {
            fs::create_directories(ev_dump);
            for (std::size_t i = 0; i < outputs.size(); ++i) {
                std::ofstream os((fs::path(ev_dump) / ("pred_" + std::to_string(i) + ".jsonl")).string());
                if (!os) throw DataError("cannot write prediction dump under '" + ev_dump + "'");
                dump_predictions_jsonl(os, outputs[i], ev_dump_top_k);
            }
        }
    });

    // --- verify ----------------------------------------------------------
    auto* vf = app.add_subcommand("verify", "Run the numeric self-checks (report JSON to stdout)");
    VerifyOptions vopt;
    std::string vf_fault = "none";
    vf->add_option("--seed", vopt.seed, "Verification seed");
    vf->add_option("--instances", vopt.instances_per_op, "Random instances per gradient-checked op");
    vf->add_option("--matching-cases", vopt.matching_cases, "Cost matrices per size in the assignment sweep");
    vf->add_option("--inject-fault", vf_fault, "Plant a known defect (testing the verifier)")->group("");
    vf->callback([&] {
        vopt.fault = fault_injection_from_string(vf_fault);
        const VerifyReport report = run_verification(vopt);
        std::cout << to_json(report) << '\n';
        rc = report.all_pass() ? 0 : 1;
    });

    // --- dump-attn ---------------------------------------------------------
    auto* da = app.add_subcommand("dump-attn", "Dump decoder cross-attention maps for one scene (JSON)");
    std::string da_run, da_data, da_out, da_checkpoint = "final";
    int da_scene = 0;
    da->add_option("--run", da_run, "Run directory")->required();
    da->add_option("--data", da_data, "Dataset file")->required();
    da->add_option("--scene", da_scene, "Scene index");
    da->add_option("--out", da_out, "Output JSON file")->required();
    da->add_option("--checkpoint", da_checkpoint, "'final', 'best', or an explicit checkpoint path");
    da->callback([&] {
        LoadedRun run = load_run(da_run, da_checkpoint, true);
        const Dataset data = load_dataset_for(run.vocab, da_data);
        if (da_scene < 0 || da_scene >= static_cast<int>(data.scenes.size())) {
            throw DataError("scene index " + std::to_string(da_scene) + " out of range (dataset has " +
                            std::to_string(data.scenes.size()) + " scenes)");
        }
        const Tensor tokens =
            render_tokens(data.scenes[static_cast<std::size_t>(da_scene)], run.config.model.grid, run.vocab.n_entity);
        const ModelOutput out = run.model.forward(tokens);
        nlohmann::json j;
        j["scene"] = da_scene;
        j["n_queries"] = run.config.model.n_queries;
        j["n_tokens"] = run.config.model.grid * run.config.model.grid;
        j["layers"] = nlohmann::json::array();
        const std::size_t n_layers = static_cast<std::size_t>(run.config.model.decoder.n_layers);
        for (std::size_t l = 0; l < n_layers; ++l) {
            nlohmann::json layer;
            layer["part"] = l < out.decoder.part_attention.size() ? matrix_json(out.decoder.part_attention[l])
                                                                  : nlohmann::json();
            layer["sum"] =
                l < out.decoder.sum_attention.size() ? matrix_json(out.decoder.sum_attention[l]) : nlohmann::json();
            j["layers"].push_back(std::move(layer));
        }
        std::ofstream os(da_out);
        if (!os) throw DataError("cannot open '" + da_out + "' for writing");
        os << j.dump() << '\n';
        std::cout << "wrote " << da_out << '\n';
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;  // bad flags are configuration errors
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 3;
    } catch (const DivergenceError& e) {
        std::cerr << "divergence: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return rc;
}
