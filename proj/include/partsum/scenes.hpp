#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "partsum/geometry.hpp"
#include "partsum/heads.hpp"
#include "partsum/matching.hpp"
#include "partsum/rng.hpp"
#include "partsum/tensor.hpp"

namespace partsum {

struct SceneEntity {
    int label = 0;
    Box box;

    bool operator==(const SceneEntity&) const = default;
};

// One ground-truth triplet, referencing entity slots of its scene.
struct RelationInstance {
    int subject = 0;
    int object = 0;
    int predicate = 0;

    bool operator==(const RelationInstance&) const = default;
};

struct Scene {
    std::vector<SceneEntity> entities;
    std::vector<RelationInstance> relations;

    bool operator==(const Scene&) const = default;
};

// Geometric relations between two boxes; above/below/left/right compare
// centers (y grows downward), inside tests full containment of the subject
// in the object, overlapping tests positive intersection area.
enum class SpatialKind { above, below, left_of, right_of, inside, overlapping };

const char* to_string(SpatialKind k);
SpatialKind spatial_kind_from_string(const std::string& s);
bool spatial_holds(SpatialKind kind, const Box& subject, const Box& object);

// Predicate assignment rule: subject/object label conditions (-1 = any
// label) plus a spatial kind map to a predicate. First matching rule wins.
struct PredicateRule {
    SpatialKind spatial = SpatialKind::above;
    int subject_label = -1;
    int object_label = -1;
    int predicate = 0;
};

struct SceneGenConfig {
    int n_entity_labels = 6;
    int n_predicate_labels = 5;
    int min_entities = 3;
    int max_entities = 6;
    int min_relations = 2;
    int max_relations = 5;
    std::vector<PredicateRule> rules;  // empty selects default_rules()
    std::uint64_t seed = 0;

    // Catch-all spatial rules covering every pair deterministically.
    static std::vector<PredicateRule> default_rules(int n_predicate_labels);
    // ConfigError on invalid ranges, non-total rule tables, or predicate
    // labels outside the vocabulary.
    void validate() const;
};

struct Dataset {
    int n_entity_labels = 0;
    int n_predicate_labels = 0;
    std::vector<Scene> scenes;

    bool operator==(const Dataset&) const = default;

    // Entity/predicate spaces plus the triplet vocabulary enumerated in
    // first-appearance order over the scenes.
    Vocab make_vocab() const;
};

// Deterministic in (config, n_scenes): each scene is drawn from an
// independent child stream of the config seed. Every relation is derived
// from box geometry through the rule table (replay-checked).
Dataset generate_dataset(const SceneGenConfig& config, int n_scenes);

// The per-label occupancy/edge feature width of rendered tokens.
int token_feature_channels(int n_entity_labels);

// Rasterizes entity boxes onto a grid x grid map: per entity label one
// occupancy-fraction channel, plus four box-edge indicator channels
// (left/right/top/bottom edge crossing the cell). Relations do not affect
// the rendering. Returns [grid^2 x token_feature_channels].
Tensor render_tokens(const Scene& scene, int grid, int n_entity_labels);

// JSON persistence; load(save(d)) == d exactly. Malformed input raises
// DataError naming the offending scene/record.
void save_dataset(const Dataset& dataset, const std::string& path);
Dataset load_dataset(const std::string& path);

// Resolves a scene's relations to label+box targets for matching/loss/eval.
std::vector<RelationTarget> scene_targets(const Scene& scene);

}  // namespace partsum
