#include "partsum/model.hpp"

#include "partsum/error.hpp"

namespace partsum {

void ModelConfig::validate() const {
    if (n_queries < 1) throw ConfigError("model: n_queries must be >= 1, got " + std::to_string(n_queries));
    if (grid < 1) throw ConfigError("model: grid must be >= 1, got " + std::to_string(grid));
    decoder.validate();
}

InferenceMode default_inference_mode(DecoderVariant variant) {
    switch (variant) {
        case DecoderVariant::vanilla_vector:
            return InferenceMode::sum_only;
        case DecoderVariant::vanilla_tensor:
        case DecoderVariant::part_factorized:
            return InferenceMode::part_only;
        case DecoderVariant::vanilla_composite:
        case DecoderVariant::part_and_sum:
            return InferenceMode::part_sum;
    }
    throw ConfigError("default_inference_mode: unknown decoder variant");
}

PstModel::PstModel(ParameterStore& ps, const ModelConfig& cfg, const Vocab& vocab, Rng& rng)
    : cfg_(cfg), vocab_(vocab) {
    cfg_.validate();
    vocab_.validate();
    encoder_in_features_ = token_feature_channels(vocab_.n_entity);
    const int n_tokens = cfg_.grid * cfg_.grid;
    const int d = cfg_.decoder.attention.model_dim;
    encoder_ = TokenEncoder(ps, "encoder", encoder_in_features_, n_tokens, cfg_.decoder.attention, rng);
    queries_ = CompositeQuerySet::create(ps, "queries", cfg_.n_queries, d, rng);
    decoder_ = CompositeDecoder(ps, "decoder", cfg_.decoder, rng);
    if (cfg_.decoder.has_part_stream()) part_heads_ = PartHeads(ps, "part_heads", d, vocab_, rng);
    if (cfg_.decoder.has_sum_stream()) sum_heads_ = SumHeads(ps, "sum_heads", d, vocab_, rng);
}

ModelOutput PstModel::forward(const Tensor& raw_tokens) const {
    if (raw_tokens.ndim() != 2 || raw_tokens.dim(0) != cfg_.grid * cfg_.grid ||
        raw_tokens.dim(1) != encoder_in_features_) {
        throw ShapeError("model forward: expected [" + std::to_string(cfg_.grid * cfg_.grid) + " x " +
                         std::to_string(encoder_in_features_) + "] tokens, got " + shape_str(raw_tokens.shape()));
    }
    ModelOutput out;
    const TokenMemory memory = encoder_.encode(raw_tokens);
    out.decoder = decoder_.decode(queries_, memory);
    out.layers.reserve(static_cast<std::size_t>(cfg_.decoder.n_layers));
    for (int l = 0; l < cfg_.decoder.n_layers; ++l) {
        CompositePrediction pred;
        if (cfg_.decoder.has_part_stream()) part_heads_.predict(out.decoder.part_layers[static_cast<std::size_t>(l)], pred);
        if (cfg_.decoder.has_sum_stream()) sum_heads_.predict(out.decoder.sum_layers[static_cast<std::size_t>(l)], pred);
        out.layers.push_back(std::move(pred));
    }
    return out;
}

}  // namespace partsum
