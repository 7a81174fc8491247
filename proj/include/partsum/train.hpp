#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "partsum/evaluation.hpp"
#include "partsum/loss.hpp"
#include "partsum/model.hpp"
#include "partsum/scenes.hpp"

namespace partsum {

struct TrainConfig {
    int steps = 600;
    int batch_size = 2;
    double learning_rate = 1e-4;
    std::uint64_t seed = 1;
    LossWeights loss;
    CostWeights match;  // matching-cost lambdas; defaults mirror the loss lambdas
    int eval_every = 0;   // 0 disables periodic evaluation
    int log_every = 50;   // stdout echo cadence; the CSV always logs every step
    std::string out_dir;  // artifacts land here (created if missing)
    int recall_top_k = 50;
    int recall_k_pred = 1;
    InferenceMode inference = InferenceMode::part_sum;
    double stop_at_metric = -1.0;  // early stop once eval recall reaches this
    std::string resume_from;       // optional checkpoint to load before step 0
    bool quiet = true;             // suppress stdout progress echo

    void validate() const;
};

struct TrainResult {
    std::string final_checkpoint;
    std::string best_checkpoint;  // empty when never evaluated
    double best_metric = -1.0;
    int best_step = -1;
    int steps_run = 0;
    std::vector<double> loss_curve;                  // total loss per step
    std::vector<std::pair<int, double>> eval_curve;  // (step, eval recall)
};

// Deterministic given (dataset, configs): scenes cycle in order, every step
// processes batch_size scenes with per-layer Hungarian matching, the
// batch-mean loss backpropagates once, Adam updates. Artifacts in out_dir:
// train_log.csv (per-step loss breakdown), eval_log.csv, vocab.json,
// final.ckpt and best.ckpt. Non-finite loss raises DivergenceError after
// writing divergence.json. eval_data drives the periodic held-out recall
// (required when eval_every > 0).
TrainResult train(const Dataset& train_data, const ModelConfig& model_cfg, const TrainConfig& cfg,
                  const Dataset* eval_data = nullptr);

// Last-layer inference outputs of every scene.
std::vector<std::vector<QueryOutput>> infer_dataset(const PstModel& model, const Dataset& data, InferenceMode mode);

// Mean per-scene Recall@top_k on a dataset (relationship mode).
double dataset_recall(const PstModel& model, const Dataset& data, InferenceMode mode, int top_k, int k_pred);

}  // namespace partsum
