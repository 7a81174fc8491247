#pragma once

#include <vector>

#include "partsum/decoder.hpp"
#include "partsum/heads.hpp"
#include "partsum/scenes.hpp"

namespace partsum {

struct ModelConfig {
    DecoderConfig decoder;
    int n_queries = 16;
    int grid = 8;  // scene tokens form a grid x grid sequence

    void validate() const;
};

// Default evaluation mode per decoder design: single-stream designs expose
// only the heads they have, two-headed designs combine both streams.
InferenceMode default_inference_mode(DecoderVariant variant);

struct ModelOutput {
    std::vector<CompositePrediction> layers;  // one per decoder layer
    DecoderOutput decoder;  // raw embeddings + attention maps (when captured)
};

// Scene-token encoder + composite queries + decoder + prediction heads. The
// heads are shared across decoder layers; every layer yields a full
// prediction so each can be supervised.
class PstModel {
  public:
    PstModel() = default;
    PstModel(ParameterStore& ps, const ModelConfig& cfg, const Vocab& vocab, Rng& rng);

    ModelOutput forward(const Tensor& raw_tokens) const;  // [grid^2 x F]

    const ModelConfig& config() const { return cfg_; }
    const Vocab& vocab() const { return vocab_; }
    int token_features() const { return encoder_in_features_; }

  private:
    ModelConfig cfg_;
    Vocab vocab_;
    int encoder_in_features_ = 0;
    TokenEncoder encoder_;
    CompositeQuerySet queries_;
    CompositeDecoder decoder_;
    PartHeads part_heads_;
    SumHeads sum_heads_;
};

}  // namespace partsum
