#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "partsum/scenes.hpp"

using namespace partsum;

namespace {

namespace fs = std::filesystem;

SceneGenConfig small_config() {
    SceneGenConfig cfg;
    cfg.n_entity_labels = 4;
    cfg.n_predicate_labels = 3;
    cfg.min_entities = 3;
    cfg.max_entities = 5;
    cfg.min_relations = 2;
    cfg.max_relations = 4;
    cfg.seed = 11;
    return cfg;
}

struct TempFile {
    fs::path path;
    explicit TempFile(const std::string& name) : path(fs::temp_directory_path() / name) { fs::remove(path); }
    ~TempFile() { fs::remove(path); }
};

constexpr SpatialKind kKinds[] = {SpatialKind::above,    SpatialKind::below,  SpatialKind::left_of,
                                  SpatialKind::right_of, SpatialKind::inside, SpatialKind::overlapping};

// First rule matching (kind, labels), mirroring the generator's lookup.
int rule_predicate(const std::vector<PredicateRule>& rules, SpatialKind kind, int s_label, int o_label) {
    for (const PredicateRule& r : rules) {
        if (r.spatial != kind) continue;
        if (r.subject_label >= 0 && r.subject_label != s_label) continue;
        if (r.object_label >= 0 && r.object_label != o_label) continue;
        return r.predicate;
    }
    return -1;
}

// True when some holding spatial kind maps to the relation's predicate.
bool derivable(const std::vector<PredicateRule>& rules, const SceneEntity& s, const SceneEntity& o, int predicate) {
    for (SpatialKind k : kKinds) {
        if (spatial_holds(k, s.box, o.box) && rule_predicate(rules, k, s.label, o.label) == predicate) return true;
    }
    return false;
}

}  // namespace

TEST_CASE("spatial predicates follow box geometry") {
    const Box upper{0.3, 0.2, 0.2, 0.2};
    const Box lower{0.3, 0.8, 0.2, 0.2};
    CHECK(spatial_holds(SpatialKind::above, upper, lower));
    CHECK_FALSE(spatial_holds(SpatialKind::above, lower, upper));
    CHECK(spatial_holds(SpatialKind::below, lower, upper));

    const Box left{0.2, 0.5, 0.2, 0.2};
    const Box right{0.8, 0.5, 0.2, 0.2};
    CHECK(spatial_holds(SpatialKind::left_of, left, right));
    CHECK(spatial_holds(SpatialKind::right_of, right, left));
    CHECK_FALSE(spatial_holds(SpatialKind::left_of, right, left));

    const Box inner{0.5, 0.5, 0.2, 0.2};
    const Box outer{0.5, 0.5, 0.6, 0.6};
    CHECK(spatial_holds(SpatialKind::inside, inner, outer));
    CHECK_FALSE(spatial_holds(SpatialKind::inside, outer, inner));
    CHECK(spatial_holds(SpatialKind::overlapping, inner, outer));
    CHECK_FALSE(spatial_holds(SpatialKind::overlapping, left, right));

    for (SpatialKind k : {SpatialKind::above, SpatialKind::below, SpatialKind::left_of, SpatialKind::right_of,
                          SpatialKind::inside, SpatialKind::overlapping}) {
        CHECK(spatial_kind_from_string(to_string(k)) == k);
    }
    CHECK_THROWS_AS(spatial_kind_from_string("sideways"), ConfigError);
}

TEST_CASE("generation is deterministic in the seed") {
    const SceneGenConfig cfg = small_config();
    const Dataset a = generate_dataset(cfg, 12);
    const Dataset b = generate_dataset(cfg, 12);
    CHECK(a == b);

    SceneGenConfig other = cfg;
    other.seed = 12;
    CHECK_FALSE(a == generate_dataset(other, 12));

    // A prefix of a longer run matches the shorter run: scenes draw from
    // independent child streams.
    const Dataset longer = generate_dataset(cfg, 20);
    for (int i = 0; i < 12; ++i) CHECK(longer.scenes[static_cast<std::size_t>(i)] == a.scenes[static_cast<std::size_t>(i)]);
}

TEST_CASE("generated scenes respect the configured ranges") {
    const SceneGenConfig cfg = small_config();
    const Dataset data = generate_dataset(cfg, 40);
    REQUIRE(data.scenes.size() == 40);
    CHECK(data.n_entity_labels == cfg.n_entity_labels);
    CHECK(data.n_predicate_labels == cfg.n_predicate_labels);
    for (const Scene& s : data.scenes) {
        const int n = static_cast<int>(s.entities.size());
        const int r = static_cast<int>(s.relations.size());
        CHECK(n >= cfg.min_entities);
        CHECK(n <= cfg.max_entities);
        CHECK(r >= cfg.min_relations);
        CHECK(r <= cfg.max_relations);
        std::set<std::tuple<int, int, int>> triplets;
        for (const RelationInstance& rel : s.relations) {
            CHECK(rel.subject >= 0);
            CHECK(rel.subject < n);
            CHECK(rel.object >= 0);
            CHECK(rel.object < n);
            CHECK(rel.subject != rel.object);
            CHECK(rel.predicate >= 0);
            CHECK(rel.predicate < cfg.n_predicate_labels);
            // Relations are distinct as (subject, object, predicate) triplets.
            CHECK(triplets.insert({rel.subject, rel.object, rel.predicate}).second);
        }
        for (const SceneEntity& e : s.entities) {
            CHECK(e.label >= 0);
            CHECK(e.label < cfg.n_entity_labels);
            CHECK(e.box.x1() >= 0.0);
            CHECK(e.box.y1() >= 0.0);
            CHECK(e.box.x2() <= 1.0);
            CHECK(e.box.y2() <= 1.0);
            CHECK(e.box.w > 0.0);
            CHECK(e.box.h > 0.0);
        }
    }
}

TEST_CASE("exact-count configuration pins entity and relation counts") {
    SceneGenConfig cfg = small_config();
    cfg.min_entities = cfg.max_entities = 4;
    cfg.min_relations = cfg.max_relations = 3;
    const Dataset data = generate_dataset(cfg, 10);
    for (const Scene& s : data.scenes) {
        CHECK(s.entities.size() == 4);
        CHECK(s.relations.size() == 3);
    }
}

TEST_CASE("every relation replays from the rule table") {
    SceneGenConfig cfg = small_config();
    const std::vector<PredicateRule> rules = SceneGenConfig::default_rules(cfg.n_predicate_labels);
    const Dataset data = generate_dataset(cfg, 25);
    for (const Scene& s : data.scenes) {
        for (const RelationInstance& rel : s.relations) {
            const SceneEntity& subj = s.entities[static_cast<std::size_t>(rel.subject)];
            const SceneEntity& obj = s.entities[static_cast<std::size_t>(rel.object)];
            CHECK(derivable(rules, subj, obj, rel.predicate));
        }
    }
}

TEST_CASE("custom rule tables drive predicate assignment") {
    SceneGenConfig cfg = small_config();
    cfg.n_predicate_labels = 2;
    // Everything left_of is predicate 1; anything else falls through to 0.
    cfg.rules = {
        PredicateRule{SpatialKind::left_of, -1, -1, 1},
        PredicateRule{SpatialKind::above, -1, -1, 0},
        PredicateRule{SpatialKind::below, -1, -1, 0},
        PredicateRule{SpatialKind::right_of, -1, -1, 0},
    };
    const Dataset data = generate_dataset(cfg, 15);
    int left_count = 0;
    for (const Scene& s : data.scenes) {
        for (const RelationInstance& rel : s.relations) {
            const SceneEntity& subj = s.entities[static_cast<std::size_t>(rel.subject)];
            const SceneEntity& obj = s.entities[static_cast<std::size_t>(rel.object)];
            if (rel.predicate == 1) {
                ++left_count;
                CHECK(spatial_holds(SpatialKind::left_of, subj.box, obj.box));
            } else {
                // Predicate 0 only arises from the above/below/right-of rules.
                const bool reachable = spatial_holds(SpatialKind::above, subj.box, obj.box) ||
                                       spatial_holds(SpatialKind::below, subj.box, obj.box) ||
                                       spatial_holds(SpatialKind::right_of, subj.box, obj.box);
                CHECK(reachable);
            }
        }
    }
    CHECK(left_count > 0);  // the predicate actually occurs
}

TEST_CASE("config validation rejects impossible setups") {
    SceneGenConfig cfg = small_config();
    cfg.min_entities = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    cfg = small_config();
    cfg.max_entities = cfg.min_entities - 1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    cfg = small_config();
    cfg.n_entity_labels = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    cfg = small_config();
    cfg.min_relations = -1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    // More required relations than ordered entity pairs.
    cfg = small_config();
    cfg.min_entities = cfg.max_entities = 2;
    cfg.min_relations = cfg.max_relations = 3;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    // Rule table referencing a predicate outside the vocabulary.
    cfg = small_config();
    cfg.rules = SceneGenConfig::default_rules(cfg.n_predicate_labels);
    cfg.rules[0].predicate = cfg.n_predicate_labels;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    // A sparse table is fine as long as every label pair stays reachable
    // through at least one spatial kind...
    cfg = small_config();
    cfg.rules = {PredicateRule{SpatialKind::inside, -1, -1, 0}};
    CHECK_NOTHROW(cfg.validate());

    // ...but a pair no rule can ever cover must be named.
    cfg = small_config();
    cfg.rules = {PredicateRule{SpatialKind::inside, 0, -1, 0}};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("rendered tokens expose occupancy and edges") {
    const int grid = 4;
    const int labels = 3;
    const int channels = token_feature_channels(labels);
    REQUIRE(channels == labels + 4);

    SUBCASE("empty scene renders to zero") {
        Scene empty;
        const Tensor t = render_tokens(empty, grid, labels);
        REQUIRE(t.shape() == Shape{grid * grid, channels});
        for (double v : t.data()) CHECK(v == 0.0);
    }

    SUBCASE("a full-image box saturates its occupancy channel") {
        Scene s;
        s.entities.push_back(SceneEntity{2, Box{0.5, 0.5, 1.0, 1.0}});
        const Tensor t = render_tokens(s, grid, labels);
        for (int cell = 0; cell < grid * grid; ++cell) {
            CHECK(t.at(static_cast<std::size_t>(cell) * channels + 2) == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(t.at(static_cast<std::size_t>(cell) * channels + 0) == 0.0);
            CHECK(t.at(static_cast<std::size_t>(cell) * channels + 1) == 0.0);
        }
    }

    SUBCASE("a quadrant box fills exactly its cells") {
        Scene s;
        // Top-left quadrant of a 4x4 grid: cells (0..1) x (0..1).
        s.entities.push_back(SceneEntity{0, Box{0.25, 0.25, 0.5, 0.5}});
        const Tensor t = render_tokens(s, grid, labels);
        double total = 0.0;
        for (int cell = 0; cell < grid * grid; ++cell) total += t.at(static_cast<std::size_t>(cell) * channels);
        // Occupancy fractions over all cells sum to area / cell_area.
        CHECK(total == doctest::Approx(0.25 * grid * grid).epsilon(1e-9));
    }

    SUBCASE("relations do not affect the rendering") {
        SceneGenConfig cfg = small_config();
        Dataset data = generate_dataset(cfg, 1);
        Scene with = data.scenes[0];
        Scene without = with;
        without.relations.clear();
        const Tensor a = render_tokens(with, grid, cfg.n_entity_labels);
        const Tensor b = render_tokens(without, grid, cfg.n_entity_labels);
        CHECK(a.data() == b.data());
    }

    SUBCASE("invalid arguments throw") {
        Scene s;
        s.entities.push_back(SceneEntity{5, Box{0.5, 0.5, 0.2, 0.2}});
        CHECK_THROWS_AS(render_tokens(s, grid, labels), DataError);   // label outside vocab
        Scene ok;
        ok.entities.push_back(SceneEntity{0, Box{0.5, 0.5, 0.2, 0.2}});
        CHECK_THROWS_AS(render_tokens(ok, 1, labels), ConfigError);  // grid too small
    }
}

TEST_CASE("scene targets resolve labels and union boxes") {
    Scene s;
    s.entities = {
        SceneEntity{1, Box{0.3, 0.3, 0.2, 0.2}},
        SceneEntity{2, Box{0.7, 0.7, 0.2, 0.2}},
        SceneEntity{0, Box{0.5, 0.5, 0.1, 0.1}},
    };
    s.relations = {RelationInstance{0, 1, 2}, RelationInstance{2, 0, 1}};

    const std::vector<RelationTarget> targets = scene_targets(s);
    REQUIRE(targets.size() == 2);
    CHECK(targets[0].s_label == 1);
    CHECK(targets[0].o_label == 2);
    CHECK(targets[0].p_label == 2);
    CHECK(targets[0].s_box == s.entities[0].box);
    CHECK(targets[0].o_box == s.entities[1].box);
    CHECK(targets[0].union_target() == union_box(s.entities[0].box, s.entities[1].box));
    CHECK(targets[1].s_label == 0);
    CHECK(targets[1].o_label == 1);
    CHECK(targets[1].p_label == 1);
    CHECK_FALSE(targets[0].is_no_object());
}

TEST_CASE("vocabulary enumerates triplets in first-appearance order") {
    Scene first;
    first.entities = {SceneEntity{0, Box{0.3, 0.3, 0.2, 0.2}}, SceneEntity{1, Box{0.7, 0.7, 0.2, 0.2}}};
    first.relations = {RelationInstance{0, 1, 0}, RelationInstance{1, 0, 1}};
    Scene second;
    second.entities = {SceneEntity{1, Box{0.4, 0.4, 0.2, 0.2}}, SceneEntity{0, Box{0.6, 0.6, 0.2, 0.2}}};
    // Repeats the (1, 1, 0) triple of scene one, then adds a new one.
    second.relations = {RelationInstance{0, 1, 1}, RelationInstance{0, 1, 2}};

    Dataset data;
    data.n_entity_labels = 2;
    data.n_predicate_labels = 3;
    data.scenes = {first, second};

    const Vocab v = data.make_vocab();
    CHECK(v.n_entity == 2);
    CHECK(v.n_predicate == 3);
    REQUIRE(v.triplet_vocab.size() == 3);
    CHECK(v.triplet_vocab[0] == std::array<int, 3>{0, 0, 1});  // scene 1, relation 0 (s, p, o)
    CHECK(v.triplet_vocab[1] == std::array<int, 3>{1, 1, 0});
    CHECK(v.triplet_vocab[2] == std::array<int, 3>{1, 2, 0});
    CHECK(v.triplet_index(0, 0, 1) == 0);
    CHECK(v.triplet_index(1, 2, 0) == 2);
    CHECK(v.triplet_index(0, 2, 1) == -1);
}

TEST_CASE("datasets round-trip through JSON") {
    const Dataset data = generate_dataset(small_config(), 8);
    TempFile file("partsum_test_scenes.json");
    save_dataset(data, file.path.string());
    const Dataset loaded = load_dataset(file.path.string());
    CHECK(loaded == data);

    SUBCASE("saving is deterministic byte-for-byte") {
        TempFile again("partsum_test_scenes2.json");
        save_dataset(data, again.path.string());
        std::ifstream a(file.path, std::ios::binary), b(again.path, std::ios::binary);
        const std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
        const std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
        CHECK(sa == sb);
    }
}

TEST_CASE("dataset persistence rejects bad input") {
    TempFile file("partsum_test_scenes_bad.json");

    SUBCASE("empty dataset refuses to save") {
        Dataset empty;
        empty.n_entity_labels = 2;
        empty.n_predicate_labels = 2;
        CHECK_THROWS_AS(save_dataset(empty, file.path.string()), DataError);
    }

    SUBCASE("missing file") { CHECK_THROWS_AS(load_dataset(file.path.string()), DataError); }

    auto write_file = [&](const std::string& text) {
        std::ofstream os(file.path);
        os << text;
    };

    SUBCASE("malformed JSON") {
        write_file("{not json");
        CHECK_THROWS_AS(load_dataset(file.path.string()), DataError);
    }

    SUBCASE("unsupported version") {
        write_file(R"({"format": "partsum-scenes", "version": 7, "n_entity_labels": 2, "n_predicate_labels": 2, "scenes": []})");
        CHECK_THROWS_AS(load_dataset(file.path.string()), DataError);
    }

    SUBCASE("entity label outside the vocabulary") {
        write_file(R"({"format": "partsum-scenes", "version": 1, "n_entity_labels": 2, "n_predicate_labels": 2, "scenes": [
            {"entities": [{"label": 5, "box": [0.5, 0.5, 0.2, 0.2]}], "relations": []}]})");
        CHECK_THROWS_AS(load_dataset(file.path.string()), DataError);
    }

    SUBCASE("relation referencing a missing entity") {
        write_file(R"({"format": "partsum-scenes", "version": 1, "n_entity_labels": 2, "n_predicate_labels": 2, "scenes": [
            {"entities": [{"label": 0, "box": [0.5, 0.5, 0.2, 0.2]}],
             "relations": [{"subject": 0, "predicate": 0, "object": 3}]}]})");
        CHECK_THROWS_AS(load_dataset(file.path.string()), DataError);
    }
}

TEST_CASE("hand-written JSON loads exactly") {
    TempFile file("partsum_test_scenes_fixture.json");
    {
        std::ofstream os(file.path);
        os << R"({"format": "partsum-scenes", "version": 1, "n_entity_labels": 3, "n_predicate_labels": 2, "scenes": [
            {"entities": [{"label": 0, "box": [0.25, 0.25, 0.5, 0.5]},
                           {"label": 2, "box": [0.75, 0.75, 0.25, 0.25]}],
             "relations": [{"subject": 0, "predicate": 1, "object": 1}]}]})";
    }
    const Dataset data = load_dataset(file.path.string());
    CHECK(data.n_entity_labels == 3);
    CHECK(data.n_predicate_labels == 2);
    REQUIRE(data.scenes.size() == 1);
    const Scene& s = data.scenes[0];
    REQUIRE(s.entities.size() == 2);
    CHECK(s.entities[0].label == 0);
    CHECK(s.entities[0].box == Box{0.25, 0.25, 0.5, 0.5});
    CHECK(s.entities[1].label == 2);
    REQUIRE(s.relations.size() == 1);
    CHECK(s.relations[0] == RelationInstance{0, 1, 1});
}
