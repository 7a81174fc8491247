#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include "partsum/attention.hpp"
#include "partsum/geometry.hpp"
#include "partsum/tensor.hpp"

namespace partsum {

// Label spaces. Every class head carries a no-object class "∅" as its LAST
// index: entity heads span n_entity+1 columns, predicate heads n_predicate+1,
// the triplet head |triplet_vocab|+1.
struct Vocab {
    int n_entity = 0;
    int n_predicate = 0;
    std::vector<std::array<int, 3>> triplet_vocab;  // distinct (s,p,o) from training data

    int entity_classes() const { return n_entity + 1; }
    int predicate_classes() const { return n_predicate + 1; }
    int triplet_classes() const { return static_cast<int>(triplet_vocab.size()) + 1; }
    int entity_no_object() const { return n_entity; }
    int predicate_no_object() const { return n_predicate; }
    int triplet_no_object() const { return static_cast<int>(triplet_vocab.size()); }
    // Index into triplet_vocab, or -1 when the triple was never observed.
    int triplet_index(int s, int p, int o) const;

    void validate() const;
};

// Per-query head outputs for one decoder layer. Class heads provide both the
// softmax distribution (matching cost, inference) and the raw logits (the
// loss path goes through log-softmax for stability). Boxes are center-form
// [M x 4] in [0,1] via sigmoid. Streams are present according to the decoder
// variant: parts, sums, or both.
struct CompositePrediction {
    int n_queries = 0;
    bool has_part = false;
    bool has_sum = false;

    // Part heads. The predicate box regresses the union of subject and
    // object boxes.
    Tensor part_s_prob, part_o_prob, part_p_prob, part_spo_prob;
    Tensor part_s_logit, part_o_logit, part_p_logit, part_spo_logit;
    Tensor part_s_box, part_o_box, part_p_box;

    // Sum heads (G_s, G_o, G_p); the G_p box also targets the union box.
    Tensor sum_s_prob, sum_o_prob, sum_p_prob;
    Tensor sum_s_logit, sum_o_logit, sum_p_logit;
    Tensor sum_s_box, sum_o_box, sum_p_box;
};

// Three-layer MLP with relu activations and a sigmoid output layer.
class BoxMlp {
  public:
    BoxMlp() = default;
    BoxMlp(ParameterStore& ps, const std::string& name, int in_dim, int hidden_dim, Rng& rng);
    Tensor forward(const Tensor& x) const;  // [N x in] -> [N x 4] in (0,1)

  private:
    Linear fc1_, fc2_, fc3_;
};

// Classification (one linear layer + softmax) and box (BoxMlp) heads over the
// three part embeddings of each query; the triplet head reads the
// concatenation [q_s, q_o, q_p]. Heads are shared across decoder layers.
class PartHeads {
  public:
    PartHeads() = default;
    PartHeads(ParameterStore& ps, const std::string& name, int model_dim, const Vocab& vocab, Rng& rng);

    // part_emb: [M x 3 x D], rows ordered (subject, object, predicate).
    void predict(const Tensor& part_emb, CompositePrediction& out) const;

  private:
    Linear cls_s_, cls_o_, cls_p_, cls_spo_;
    BoxMlp box_s_, box_o_, box_p_;
};

class SumHeads {
  public:
    SumHeads() = default;
    SumHeads(ParameterStore& ps, const std::string& name, int model_dim, const Vocab& vocab, Rng& rng);

    void predict(const Tensor& sum_emb, CompositePrediction& out) const;  // [M x D]

  private:
    Linear cls_s_, cls_o_, cls_p_;
    BoxMlp box_s_, box_o_, box_p_;
};

enum class InferenceMode { part_only, sum_only, part_sum };

const char* to_string(InferenceMode m);
InferenceMode inference_mode_from_string(const std::string& s);

// Inference-side view of one query: dense class distributions (∅ last) and
// center-form boxes, detached from the graph.
struct QueryOutput {
    std::vector<double> s_prob, o_prob, p_prob;
    Box s_box, o_box;
};

// Collapses a prediction to per-query outputs. part_sum averages the class
// distributions elementwise and averages the two boxes corner-by-corner.
std::vector<QueryOutput> combine_inference(const CompositePrediction& pred, InferenceMode mode);

// JSON-lines prediction dump: one object per query,
//   {"query":i,"s":[[label,prob],...],"o":[...],"p":[...],
//    "s_box":[cx,cy,w,h],"o_box":[cx,cy,w,h]}
// Class lists hold the top_k highest-probability labels (∅ = class count - 1
// included) in descending probability order; omitted labels read as 0.
void dump_predictions_jsonl(std::ostream& os, const std::vector<QueryOutput>& queries, int top_k);
std::vector<QueryOutput> load_predictions_jsonl(std::istream& is, const Vocab& vocab);

// Vocab persistence: training writes the label spaces it sized its heads
// with; evaluation reloads them so head shapes match the checkpoint.
void save_vocab(const Vocab& vocab, const std::string& path);
Vocab load_vocab(const std::string& path);

}  // namespace partsum
