#include "partsum/scenes.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <json.hpp>

namespace partsum {

const char* to_string(SpatialKind k) {
    switch (k) {
        case SpatialKind::above: return "above";
        case SpatialKind::below: return "below";
        case SpatialKind::left_of: return "left-of";
        case SpatialKind::right_of: return "right-of";
        case SpatialKind::inside: return "inside";
        case SpatialKind::overlapping: return "overlapping";
    }
    return "?";
}

SpatialKind spatial_kind_from_string(const std::string& s) {
    if (s == "above") return SpatialKind::above;
    if (s == "below") return SpatialKind::below;
    if (s == "left-of") return SpatialKind::left_of;
    if (s == "right-of") return SpatialKind::right_of;
    if (s == "inside") return SpatialKind::inside;
    if (s == "overlapping") return SpatialKind::overlapping;
    throw ConfigError("unknown spatial kind '" + s +
                      "' (expected above|below|left-of|right-of|inside|overlapping)");
}

bool spatial_holds(SpatialKind kind, const Box& subject, const Box& object) {
    switch (kind) {
        case SpatialKind::above: return subject.cy < object.cy;
        case SpatialKind::below: return subject.cy > object.cy;
        case SpatialKind::left_of: return subject.cx < object.cx;
        case SpatialKind::right_of: return subject.cx > object.cx;
        case SpatialKind::inside:
            return subject.x1() >= object.x1() && subject.x2() <= object.x2() && subject.y1() >= object.y1() &&
                   subject.y2() <= object.y2();
        case SpatialKind::overlapping: {
            const double iw = std::min(subject.x2(), object.x2()) - std::max(subject.x1(), object.x1());
            const double ih = std::min(subject.y2(), object.y2()) - std::max(subject.y1(), object.y1());
            return iw > 0.0 && ih > 0.0;
        }
    }
    return false;
}

std::vector<PredicateRule> SceneGenConfig::default_rules(int n_predicate_labels) {
    auto pred = [n_predicate_labels](int i) { return i % n_predicate_labels; };
    return {
        {SpatialKind::inside, -1, -1, pred(0)},      {SpatialKind::overlapping, -1, -1, pred(1)},
        {SpatialKind::above, -1, -1, pred(2)},       {SpatialKind::below, -1, -1, pred(3)},
        {SpatialKind::left_of, -1, -1, pred(4)},     {SpatialKind::right_of, -1, -1, pred(4)},
    };
}

namespace {

constexpr SpatialKind kAllSpatial[] = {SpatialKind::above,    SpatialKind::below,  SpatialKind::left_of,
                                       SpatialKind::right_of, SpatialKind::inside, SpatialKind::overlapping};

// First matching rule, or -1.
int rule_predicate(const std::vector<PredicateRule>& rules, SpatialKind kind, int s_label, int o_label) {
    for (const PredicateRule& r : rules) {
        if (r.spatial != kind) continue;
        if (r.subject_label >= 0 && r.subject_label != s_label) continue;
        if (r.object_label >= 0 && r.object_label != o_label) continue;
        return r.predicate;
    }
    return -1;
}

}  // namespace

void SceneGenConfig::validate() const {
    if (n_entity_labels < 1) throw ConfigError("scene config: n_entity_labels must be >= 1");
    if (n_predicate_labels < 1) throw ConfigError("scene config: n_predicate_labels must be >= 1");
    if (min_entities < 2 || max_entities < min_entities) {
        throw ConfigError("scene config: need 2 <= min_entities <= max_entities, got [" +
                          std::to_string(min_entities) + "," + std::to_string(max_entities) + "]");
    }
    if (min_relations < 1 || max_relations < min_relations) {
        throw ConfigError("scene config: need 1 <= min_relations <= max_relations, got [" +
                          std::to_string(min_relations) + "," + std::to_string(max_relations) + "]");
    }
    const int min_pairs = min_entities * (min_entities - 1);
    if (max_relations > min_pairs) {
        throw ConfigError("scene config: max_relations " + std::to_string(max_relations) +
                          " can exceed the ordered pairs of a " + std::to_string(min_entities) +
                          "-entity scene (" + std::to_string(min_pairs) + ")");
    }
    const std::vector<PredicateRule>& table = rules.empty() ? default_rules(n_predicate_labels) : rules;
    for (const PredicateRule& r : table) {
        if (r.predicate < 0 || r.predicate >= n_predicate_labels) {
            throw ConfigError("scene config: rule predicate " + std::to_string(r.predicate) +
                              " outside the predicate vocabulary");
        }
        if (r.subject_label >= n_entity_labels || r.object_label >= n_entity_labels) {
            throw ConfigError("scene config: rule label condition outside the entity vocabulary");
        }
    }
    // Totality: every label pair must be able to produce a predicate through
    // at least one spatial kind; kinds without a rule are simply skipped by
    // the generator.
    for (int s = 0; s < n_entity_labels; ++s) {
        for (int o = 0; o < n_entity_labels; ++o) {
            bool any = false;
            for (SpatialKind k : kAllSpatial) any = any || rule_predicate(table, k, s, o) >= 0;
            if (!any) {
                throw ConfigError("scene config: rule table leaves label pair (" + std::to_string(s) + "," +
                                  std::to_string(o) + ") without any predicate");
            }
        }
    }
}

namespace {

struct Candidate {
    int subject, object, predicate;
};

Scene generate_scene(const SceneGenConfig& cfg, const std::vector<PredicateRule>& rules, Rng rng) {
    for (int attempt = 0; attempt < 100; ++attempt) {
        Scene scene;
        const int n_entities = rng.uniform_int(cfg.min_entities, cfg.max_entities);
        for (int e = 0; e < n_entities; ++e) {
            SceneEntity ent;
            ent.label = rng.uniform_int(0, cfg.n_entity_labels - 1);
            ent.box.w = rng.uniform(0.08, 0.35);
            ent.box.h = rng.uniform(0.08, 0.35);
            ent.box.cx = rng.uniform(ent.box.w / 2, 1.0 - ent.box.w / 2);
            ent.box.cy = rng.uniform(ent.box.h / 2, 1.0 - ent.box.h / 2);
            scene.entities.push_back(ent);
        }
        // Distinct realizable triplets in deterministic order.
        std::vector<Candidate> candidates;
        for (int i = 0; i < n_entities; ++i) {
            for (int j = 0; j < n_entities; ++j) {
                if (i == j) continue;
                std::set<int> preds;
                for (SpatialKind k : kAllSpatial) {
                    if (!spatial_holds(k, scene.entities[i].box, scene.entities[j].box)) continue;
                    const int p = rule_predicate(rules, k, scene.entities[i].label, scene.entities[j].label);
                    if (p >= 0) preds.insert(p);
                }
                for (int p : preds) candidates.push_back({i, j, p});
            }
        }
        const int want = rng.uniform_int(cfg.min_relations, cfg.max_relations);
        if (static_cast<int>(candidates.size()) < want) continue;  // resample boxes
        // Partial Fisher-Yates draw of `want` distinct candidates, then
        // restore deterministic (subject, object, predicate) order.
        for (int t = 0; t < want; ++t) {
            const int pick = rng.uniform_int(t, static_cast<int>(candidates.size()) - 1);
            std::swap(candidates[t], candidates[pick]);
        }
        candidates.resize(static_cast<std::size_t>(want));
        std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
            return std::tie(a.subject, a.object, a.predicate) < std::tie(b.subject, b.object, b.predicate);
        });
        for (const Candidate& c : candidates) scene.relations.push_back({c.subject, c.object, c.predicate});
        return scene;
    }
    throw ConfigError("scene generation: no realizable scene after 100 attempts; relax the relation range");
}

void replay_check(const Scene& scene, const std::vector<PredicateRule>& rules) {
    for (std::size_t r = 0; r < scene.relations.size(); ++r) {
        const RelationInstance& rel = scene.relations[r];
        const SceneEntity& s = scene.entities[static_cast<std::size_t>(rel.subject)];
        const SceneEntity& o = scene.entities[static_cast<std::size_t>(rel.object)];
        bool derivable = false;
        for (SpatialKind k : kAllSpatial) {
            if (spatial_holds(k, s.box, o.box) && rule_predicate(rules, k, s.label, o.label) == rel.predicate) {
                derivable = true;
                break;
            }
        }
        if (!derivable) {
            throw ContractError("scene generation: relation " + std::to_string(r) +
                                " is not recoverable from geometry via the rule table");
        }
    }
}

}  // namespace

Dataset generate_dataset(const SceneGenConfig& config, int n_scenes) {
    config.validate();
    if (n_scenes < 1) throw ConfigError("generate_dataset: n_scenes must be >= 1");
    const std::vector<PredicateRule> rules =
        config.rules.empty() ? SceneGenConfig::default_rules(config.n_predicate_labels) : config.rules;
    Dataset d;
    d.n_entity_labels = config.n_entity_labels;
    d.n_predicate_labels = config.n_predicate_labels;
    Rng root(config.seed);
    for (int s = 0; s < n_scenes; ++s) {
        Scene scene = generate_scene(config, rules, root.child(static_cast<std::uint64_t>(s)));
        replay_check(scene, rules);
        d.scenes.push_back(std::move(scene));
    }
    return d;
}

Vocab Dataset::make_vocab() const {
    Vocab v;
    v.n_entity = n_entity_labels;
    v.n_predicate = n_predicate_labels;
    for (const Scene& scene : scenes) {
        for (const RelationInstance& rel : scene.relations) {
            const int s = scene.entities[static_cast<std::size_t>(rel.subject)].label;
            const int o = scene.entities[static_cast<std::size_t>(rel.object)].label;
            if (v.triplet_index(s, rel.predicate, o) < 0) v.triplet_vocab.push_back({s, rel.predicate, o});
        }
    }
    return v;
}

int token_feature_channels(int n_entity_labels) { return n_entity_labels + 4; }

Tensor render_tokens(const Scene& scene, int grid, int n_entity_labels) {
    if (grid < 2) throw ConfigError("render_tokens: grid must be >= 2");
    const int f = token_feature_channels(n_entity_labels);
    std::vector<double> data(static_cast<std::size_t>(grid) * grid * f, 0.0);
    const double cell = 1.0 / grid;
    for (const SceneEntity& ent : scene.entities) {
        if (ent.label < 0 || ent.label >= n_entity_labels) {
            throw DataError("render_tokens: entity label " + std::to_string(ent.label) + " outside vocabulary");
        }
        const double x1 = ent.box.x1(), y1 = ent.box.y1(), x2 = ent.box.x2(), y2 = ent.box.y2();
        for (int gy = 0; gy < grid; ++gy) {
            for (int gx = 0; gx < grid; ++gx) {
                const double cx1 = gx * cell, cx2 = (gx + 1) * cell;
                const double cy1 = gy * cell, cy2 = (gy + 1) * cell;
                const double ow = std::max(0.0, std::min(x2, cx2) - std::max(x1, cx1));
                const double oh = std::max(0.0, std::min(y2, cy2) - std::max(y1, cy1));
                double* tok = data.data() + (static_cast<std::size_t>(gy) * grid + gx) * f;
                if (ow > 0.0 && oh > 0.0) {
                    tok[ent.label] = std::min(1.0, tok[ent.label] + (ow * oh) / (cell * cell));
                }
                const bool y_overlap = y1 < cy2 && y2 > cy1;
                const bool x_overlap = x1 < cx2 && x2 > cx1;
                if (x1 >= cx1 && x1 < cx2 && y_overlap) tok[n_entity_labels + 0] = 1.0;
                if (x2 > cx1 && x2 <= cx2 && y_overlap) tok[n_entity_labels + 1] = 1.0;
                if (y1 >= cy1 && y1 < cy2 && x_overlap) tok[n_entity_labels + 2] = 1.0;
                if (y2 > cy1 && y2 <= cy2 && x_overlap) tok[n_entity_labels + 3] = 1.0;
            }
        }
    }
    return Tensor::from_data({grid * grid, f}, std::move(data));
}

namespace {

nlohmann::json box_to_json(const Box& b) { return nlohmann::json::array({b.cx, b.cy, b.w, b.h}); }

Box box_from_json(const nlohmann::json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 4) throw DataError(where + ": box must be [cx,cy,w,h]");
    Box b;
    b.cx = j[0].get<double>();
    b.cy = j[1].get<double>();
    b.w = j[2].get<double>();
    b.h = j[3].get<double>();
    if (b.w < 0.0 || b.h < 0.0) throw DataError(where + ": negative box extent");
    return b;
}

}  // namespace

void save_dataset(const Dataset& dataset, const std::string& path) {
    if (dataset.scenes.empty()) throw DataError("save_dataset: refusing to write an empty dataset");
    nlohmann::json j;
    j["format"] = "partsum-scenes";
    j["version"] = 1;
    j["n_entity_labels"] = dataset.n_entity_labels;
    j["n_predicate_labels"] = dataset.n_predicate_labels;
    nlohmann::json scenes = nlohmann::json::array();
    for (const Scene& scene : dataset.scenes) {
        nlohmann::json s;
        s["entities"] = nlohmann::json::array();
        for (const SceneEntity& e : scene.entities) {
            s["entities"].push_back({{"label", e.label}, {"box", box_to_json(e.box)}});
        }
        s["relations"] = nlohmann::json::array();
        for (const RelationInstance& r : scene.relations) {
            s["relations"].push_back({{"subject", r.subject}, {"predicate", r.predicate}, {"object", r.object}});
        }
        scenes.push_back(std::move(s));
    }
    j["scenes"] = std::move(scenes);
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw DataError("save_dataset: cannot open " + path + " for writing");
    os << j.dump(2) << "\n";
    if (!os) throw DataError("save_dataset: write to " + path + " failed");
}

Dataset load_dataset(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DataError("load_dataset: cannot open " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(is);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("load_dataset: " + path + ": " + e.what());
    }
    Dataset d;
    try {
        if (j.at("format").get<std::string>() != "partsum-scenes") {
            throw DataError("load_dataset: " + path + ": unknown format field");
        }
        if (j.at("version").get<int>() != 1) {
            throw DataError("load_dataset: " + path + ": unsupported version " +
                            std::to_string(j.at("version").get<int>()));
        }
        d.n_entity_labels = j.at("n_entity_labels").get<int>();
        d.n_predicate_labels = j.at("n_predicate_labels").get<int>();
        if (d.n_entity_labels < 1 || d.n_predicate_labels < 1) {
            throw DataError("load_dataset: " + path + ": label space sizes must be >= 1");
        }
        int scene_no = 0;
        for (const auto& s : j.at("scenes")) {
            const std::string where = path + ": scene " + std::to_string(scene_no);
            Scene scene;
            int ent_no = 0;
            for (const auto& e : s.at("entities")) {
                SceneEntity ent;
                ent.label = e.at("label").get<int>();
                if (ent.label < 0 || ent.label >= d.n_entity_labels) {
                    throw DataError(where + " entity " + std::to_string(ent_no) + ": label out of range");
                }
                ent.box = box_from_json(e.at("box"), where + " entity " + std::to_string(ent_no));
                scene.entities.push_back(ent);
                ++ent_no;
            }
            int rel_no = 0;
            for (const auto& r : s.at("relations")) {
                RelationInstance rel;
                rel.subject = r.at("subject").get<int>();
                rel.predicate = r.at("predicate").get<int>();
                rel.object = r.at("object").get<int>();
                const int n = static_cast<int>(scene.entities.size());
                if (rel.subject < 0 || rel.subject >= n || rel.object < 0 || rel.object >= n) {
                    throw DataError(where + " relation " + std::to_string(rel_no) + ": entity index out of range");
                }
                if (rel.predicate < 0 || rel.predicate >= d.n_predicate_labels) {
                    throw DataError(where + " relation " + std::to_string(rel_no) + ": predicate out of range");
                }
                scene.relations.push_back(rel);
                ++rel_no;
            }
            if (scene.relations.empty()) throw DataError(where + ": scene has no relations");
            if (scene.entities.empty()) throw DataError(where + ": scene has no entities");
            d.scenes.push_back(std::move(scene));
            ++scene_no;
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError("load_dataset: " + path + ": " + e.what());
    }
    if (d.scenes.empty()) throw DataError("load_dataset: " + path + ": dataset has no scenes");
    return d;
}

std::vector<RelationTarget> scene_targets(const Scene& scene) {
    std::vector<RelationTarget> out;
    out.reserve(scene.relations.size());
    for (const RelationInstance& rel : scene.relations) {
        RelationTarget t;
        t.s_label = scene.entities[static_cast<std::size_t>(rel.subject)].label;
        t.o_label = scene.entities[static_cast<std::size_t>(rel.object)].label;
        t.p_label = rel.predicate;
        t.s_box = scene.entities[static_cast<std::size_t>(rel.subject)].box;
        t.o_box = scene.entities[static_cast<std::size_t>(rel.object)].box;
        out.push_back(t);
    }
    return out;
}

}  // namespace partsum
