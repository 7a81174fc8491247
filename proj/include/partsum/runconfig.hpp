#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "partsum/model.hpp"
#include "partsum/scenes.hpp"
#include "partsum/train.hpp"

namespace partsum {

// Flat key=value configuration text: one "section.key = value" per line, '#'
// starts a comment. Typed getters consume keys; check_all_consumed rejects
// anything the schema never asked for.
class RunConfig {
  public:
    RunConfig() = default;
    static RunConfig from_file(const std::string& path);  // DataError on IO
    static RunConfig from_string(const std::string& text, const std::string& origin = "<config>");

    // Flag-style override; replaces any file value.
    void set(const std::string& key, const std::string& value);
    // Each element "key=value"; ConfigError on malformed input.
    void apply_overrides(const std::vector<std::string>& assignments);

    bool has(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback);
    int get_int(const std::string& key, int fallback);
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback);
    double get_double(const std::string& key, double fallback);
    bool get_bool(const std::string& key, bool fallback);

    void check_all_consumed() const;  // ConfigError naming unknown keys

  private:
    std::map<std::string, std::string> values_;
    std::set<std::string> consumed_;
};

struct ExperimentConfig {
    std::string name = "run";
    std::string out_dir;     // defaults to runs/<name>
    std::string train_data;  // dataset path (train/eval subcommands)
    std::string eval_data;   // optional held-out dataset path
};

// Every module's configuration resolved from one file; defaults are the
// desk-scale setup.
struct FullConfig {
    ExperimentConfig experiment;
    SceneGenConfig scene;
    int scene_n_train = 200;
    int scene_n_test = 50;
    ModelConfig model;
    TrainConfig train;
    std::string eval_mode = "auto";  // inference mode name or "auto"
};

// Consumes all known keys, applies defaults, validates each sub-config, and
// rejects unknown keys.
FullConfig parse_full_config(RunConfig& raw);

// "auto" resolves to the variant's default inference mode.
InferenceMode resolve_inference_mode(const std::string& eval_mode, DecoderVariant variant);

// Canonical fully-resolved config text (stable key order, reparsable).
std::string serialize_config(const FullConfig& config);
void save_config(const FullConfig& config, const std::string& path);

}  // namespace partsum
