#include "partsum/runconfig.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "partsum/error.hpp"

namespace partsum {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open config file '" + path + "'");
    std::ostringstream text;
    text << is.rdbuf();
    return from_string(text.str(), path);
}

RunConfig RunConfig::from_string(const std::string& text, const std::string& origin) {
    RunConfig cfg;
    std::istringstream is(text);
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected 'key = value', got '" + line + "'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key");
        if (cfg.values_.count(key)) {
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
        }
        cfg.values_[key] = value;
    }
    return cfg;
}

void RunConfig::set(const std::string& key, const std::string& value) { values_[key] = value; }

void RunConfig::apply_overrides(const std::vector<std::string>& assignments) {
    for (const std::string& a : assignments) {
        const std::size_t eq = a.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw ConfigError("override '" + a + "' is not of the form key=value");
        }
        set(trim(a.substr(0, eq)), trim(a.substr(eq + 1)));
    }
}

bool RunConfig::has(const std::string& key) const { return values_.count(key) != 0; }

std::string RunConfig::get_string(const std::string& key, const std::string& fallback) {
    consumed_.insert(key);
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

int RunConfig::get_int(const std::string& key, int fallback) {
    consumed_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        std::size_t pos = 0;
        const int v = std::stoi(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected an integer, got '" + it->second + "'");
    }
}

std::uint64_t RunConfig::get_u64(const std::string& key, std::uint64_t fallback) {
    consumed_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        std::size_t pos = 0;
        const std::uint64_t v = std::stoull(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected an unsigned integer, got '" + it->second + "'");
    }
}

double RunConfig::get_double(const std::string& key, double fallback) {
    consumed_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        std::size_t pos = 0;
        const double v = std::stod(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected a number, got '" + it->second + "'");
    }
}

bool RunConfig::get_bool(const std::string& key, bool fallback) {
    consumed_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const std::string& v = it->second;
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("config key '" + key + "': expected a boolean (true/false), got '" + v + "'");
}

void RunConfig::check_all_consumed() const {
    std::string unknown;
    for (const auto& [key, value] : values_) {
        if (!consumed_.count(key)) unknown += (unknown.empty() ? "" : ", ") + key;
    }
    if (!unknown.empty()) throw ConfigError("unknown config key(s): " + unknown);
}

InferenceMode resolve_inference_mode(const std::string& eval_mode, DecoderVariant variant) {
    if (eval_mode == "auto") return default_inference_mode(variant);
    return inference_mode_from_string(eval_mode);
}

FullConfig parse_full_config(RunConfig& raw) {
    FullConfig cfg;

    cfg.experiment.name = raw.get_string("experiment.name", cfg.experiment.name);
    cfg.experiment.out_dir = raw.get_string("experiment.out_dir", "runs/" + cfg.experiment.name);
    cfg.experiment.train_data = raw.get_string("experiment.train_data", "");
    cfg.experiment.eval_data = raw.get_string("experiment.eval_data", "");

    cfg.scene.n_entity_labels = raw.get_int("scene.n_entity_labels", cfg.scene.n_entity_labels);
    cfg.scene.n_predicate_labels = raw.get_int("scene.n_predicate_labels", cfg.scene.n_predicate_labels);
    cfg.scene.min_entities = raw.get_int("scene.min_entities", cfg.scene.min_entities);
    cfg.scene.max_entities = raw.get_int("scene.max_entities", cfg.scene.max_entities);
    cfg.scene.min_relations = raw.get_int("scene.min_relations", cfg.scene.min_relations);
    cfg.scene.max_relations = raw.get_int("scene.max_relations", cfg.scene.max_relations);
    cfg.scene.seed = raw.get_u64("scene.seed", cfg.scene.seed);
    cfg.scene_n_train = raw.get_int("scene.n_train", cfg.scene_n_train);
    cfg.scene_n_test = raw.get_int("scene.n_test", cfg.scene_n_test);

    cfg.model.decoder.variant =
        decoder_variant_from_string(raw.get_string("model.variant", to_string(cfg.model.decoder.variant)));
    cfg.model.decoder.streams =
        stream_mode_from_string(raw.get_string("model.streams", to_string(cfg.model.decoder.streams)));
    // Interaction only applies to the part-and-sum variant; default to none
    // elsewhere so variant sweeps need not clear it explicitly.
    const char* interaction_default = cfg.model.decoder.variant == DecoderVariant::part_and_sum
                                          ? to_string(cfg.model.decoder.interaction)
                                          : "none";
    cfg.model.decoder.interaction =
        interaction_mode_from_string(raw.get_string("model.interaction", interaction_default));
    cfg.model.decoder.factorized_part_sa =
        raw.get_bool("model.factorized_part_sa", cfg.model.decoder.factorized_part_sa);
    cfg.model.decoder.factorized_stage2 = raw.get_bool("model.factorized_stage2", cfg.model.decoder.factorized_stage2);
    cfg.model.decoder.n_layers = raw.get_int("model.n_layers", cfg.model.decoder.n_layers);
    cfg.model.n_queries = raw.get_int("model.n_queries", cfg.model.n_queries);
    cfg.model.grid = raw.get_int("model.grid", cfg.model.grid);
    cfg.model.decoder.attention.model_dim = raw.get_int("model.dim", cfg.model.decoder.attention.model_dim);
    cfg.model.decoder.attention.n_heads = raw.get_int("model.n_heads", cfg.model.decoder.attention.n_heads);
    cfg.model.decoder.attention.ffn_dim = raw.get_int("model.ffn_dim", cfg.model.decoder.attention.ffn_dim);
    cfg.model.decoder.attention.n_encoder_layers =
        raw.get_int("model.n_encoder_layers", cfg.model.decoder.attention.n_encoder_layers);

    cfg.train.steps = raw.get_int("train.steps", cfg.train.steps);
    cfg.train.batch_size = raw.get_int("train.batch_size", cfg.train.batch_size);
    cfg.train.learning_rate = raw.get_double("train.learning_rate", cfg.train.learning_rate);
    cfg.train.seed = raw.get_u64("train.seed", cfg.train.seed);
    cfg.train.loss.lambda_cls = raw.get_double("train.lambda_cls", cfg.train.loss.lambda_cls);
    cfg.train.loss.lambda_l1 = raw.get_double("train.lambda_l1", cfg.train.loss.lambda_l1);
    cfg.train.loss.lambda_giou = raw.get_double("train.lambda_giou", cfg.train.loss.lambda_giou);
    cfg.train.loss.no_object_weight = raw.get_double("train.no_object_weight", cfg.train.loss.no_object_weight);
    cfg.train.loss.sum_stream_weight = raw.get_double("train.sum_stream_weight", cfg.train.loss.sum_stream_weight);
    // Matching shares the loss lambdas (one source of truth in the file).
    cfg.train.match.lambda_cls = cfg.train.loss.lambda_cls;
    cfg.train.match.lambda_l1 = cfg.train.loss.lambda_l1;
    cfg.train.match.lambda_giou = cfg.train.loss.lambda_giou;
    cfg.train.eval_every = raw.get_int("train.eval_every", cfg.train.eval_every);
    cfg.train.log_every = raw.get_int("train.log_every", cfg.train.log_every);
    cfg.train.stop_at_metric = raw.get_double("train.stop_at_metric", cfg.train.stop_at_metric);
    cfg.train.resume_from = raw.get_string("train.resume_from", cfg.train.resume_from);
    cfg.train.quiet = raw.get_bool("train.quiet", cfg.train.quiet);
    cfg.train.out_dir = cfg.experiment.out_dir;

    cfg.eval_mode = raw.get_string("eval.mode", cfg.eval_mode);
    cfg.train.recall_top_k = raw.get_int("eval.top_k", cfg.train.recall_top_k);
    cfg.train.recall_k_pred = raw.get_int("eval.k_pred", cfg.train.recall_k_pred);
    cfg.train.inference = resolve_inference_mode(cfg.eval_mode, cfg.model.decoder.variant);

    raw.check_all_consumed();
    cfg.scene.validate();
    if (cfg.scene_n_train < 1) throw ConfigError("scene.n_train must be >= 1");
    if (cfg.scene_n_test < 0) throw ConfigError("scene.n_test must be >= 0");
    cfg.model.validate();
    cfg.train.validate();
    return cfg;
}

std::string serialize_config(const FullConfig& cfg) {
    std::ostringstream os;
    os << "experiment.name = " << cfg.experiment.name << '\n';
    os << "experiment.out_dir = " << cfg.experiment.out_dir << '\n';
    os << "experiment.train_data = " << cfg.experiment.train_data << '\n';
    os << "experiment.eval_data = " << cfg.experiment.eval_data << '\n';
    os << "scene.n_entity_labels = " << cfg.scene.n_entity_labels << '\n';
    os << "scene.n_predicate_labels = " << cfg.scene.n_predicate_labels << '\n';
    os << "scene.min_entities = " << cfg.scene.min_entities << '\n';
    os << "scene.max_entities = " << cfg.scene.max_entities << '\n';
    os << "scene.min_relations = " << cfg.scene.min_relations << '\n';
    os << "scene.max_relations = " << cfg.scene.max_relations << '\n';
    os << "scene.seed = " << cfg.scene.seed << '\n';
    os << "scene.n_train = " << cfg.scene_n_train << '\n';
    os << "scene.n_test = " << cfg.scene_n_test << '\n';
    os << "model.variant = " << to_string(cfg.model.decoder.variant) << '\n';
    os << "model.streams = " << to_string(cfg.model.decoder.streams) << '\n';
    os << "model.interaction = " << to_string(cfg.model.decoder.interaction) << '\n';
    os << "model.factorized_part_sa = " << (cfg.model.decoder.factorized_part_sa ? "true" : "false") << '\n';
    os << "model.factorized_stage2 = " << (cfg.model.decoder.factorized_stage2 ? "true" : "false") << '\n';
    os << "model.n_layers = " << cfg.model.decoder.n_layers << '\n';
    os << "model.n_queries = " << cfg.model.n_queries << '\n';
    os << "model.grid = " << cfg.model.grid << '\n';
    os << "model.dim = " << cfg.model.decoder.attention.model_dim << '\n';
    os << "model.n_heads = " << cfg.model.decoder.attention.n_heads << '\n';
    os << "model.ffn_dim = " << cfg.model.decoder.attention.ffn_dim << '\n';
    os << "model.n_encoder_layers = " << cfg.model.decoder.attention.n_encoder_layers << '\n';
    os << "train.steps = " << cfg.train.steps << '\n';
    os << "train.batch_size = " << cfg.train.batch_size << '\n';
    os << "train.learning_rate = " << fmt17(cfg.train.learning_rate) << '\n';
    os << "train.seed = " << cfg.train.seed << '\n';
    os << "train.lambda_cls = " << fmt17(cfg.train.loss.lambda_cls) << '\n';
    os << "train.lambda_l1 = " << fmt17(cfg.train.loss.lambda_l1) << '\n';
    os << "train.lambda_giou = " << fmt17(cfg.train.loss.lambda_giou) << '\n';
    os << "train.no_object_weight = " << fmt17(cfg.train.loss.no_object_weight) << '\n';
    os << "train.sum_stream_weight = " << fmt17(cfg.train.loss.sum_stream_weight) << '\n';
    os << "train.eval_every = " << cfg.train.eval_every << '\n';
    os << "train.log_every = " << cfg.train.log_every << '\n';
    os << "train.stop_at_metric = " << fmt17(cfg.train.stop_at_metric) << '\n';
    os << "train.resume_from = " << cfg.train.resume_from << '\n';
    os << "train.quiet = " << (cfg.train.quiet ? "true" : "false") << '\n';
    os << "eval.mode = " << cfg.eval_mode << '\n';
    os << "eval.top_k = " << cfg.train.recall_top_k << '\n';
    os << "eval.k_pred = " << cfg.train.recall_k_pred << '\n';
    return os.str();
}

void save_config(const FullConfig& cfg, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot open '" + path + "' for writing");
    os << serialize_config(cfg);
    if (!os) throw DataError("failed to write '" + path + "'");
}

}  // namespace partsum
