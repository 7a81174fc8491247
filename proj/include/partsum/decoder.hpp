#pragma once

#include <string>
#include <utility>
#include <vector>

#include "partsum/attention.hpp"

namespace partsum {

// Decoder designs, one per ablation row: (a) vector queries in one stream,
// (b) part-token stream with plain self-attention, (c) part-token stream with
// factorized self-attention, (d) part and sum tokens mixed in one plain
// stream, (e) two-stream part-and-sum decoding with composite queries.
enum class DecoderVariant {
    vanilla_vector,
    vanilla_tensor,
    part_factorized,
    vanilla_composite,
    part_and_sum,
};

enum class StreamMode { shared, independent };
enum class InteractionMode { none, summation, self_attention };

const char* to_string(DecoderVariant v);
const char* to_string(StreamMode m);
const char* to_string(InteractionMode m);
DecoderVariant decoder_variant_from_string(const std::string& s);
StreamMode stream_mode_from_string(const std::string& s);
InteractionMode interaction_mode_from_string(const std::string& s);

struct DecoderConfig {
    DecoderVariant variant = DecoderVariant::part_and_sum;
    int n_layers = 3;
    StreamMode streams = StreamMode::independent;       // part_and_sum only
    InteractionMode interaction = InteractionMode::summation;  // part_and_sum only
    // Factorized self-attention in the part stream of the part_and_sum
    // variant (the part_factorized variant always factorizes, vanilla_tensor
    // never does).
    bool factorized_part_sa = true;
    // Ablation hook: drop the inter-relation stage of factorized
    // self-attention, leaving relations fully isolated in the part stream.
    bool factorized_stage2 = true;
    bool capture_attention = false;
    AttentionConfig attention;

    void validate() const;
    bool has_part_stream() const { return variant != DecoderVariant::vanilla_vector; }
    bool has_sum_stream() const {
        return variant == DecoderVariant::vanilla_vector || variant == DecoderVariant::vanilla_composite ||
               variant == DecoderVariant::part_and_sum;
    }
};

// M learnable composite queries: per relation slot, three part vectors in
// fixed order (subject, object, predicate) plus one sum vector. The queries
// act as positional embeddings; decoder content embeddings start at zero.
struct CompositeQuerySet {
    Tensor part_queries;  // [M x 3 x D]
    Tensor sum_queries;   // [M x D]

    int n_queries() const { return sum_queries.dim(0); }
    int model_dim() const { return sum_queries.dim(1); }

    static CompositeQuerySet create(ParameterStore& ps, const std::string& name, int n_queries, int model_dim,
                                    Rng& rng);
};

struct DecoderOutput {
    std::vector<Tensor> part_layers;  // [M x 3 x D] per layer; empty if no part stream
    std::vector<Tensor> sum_layers;   // [M x D] per layer; empty if no sum stream
    // Head-averaged cross-attention weights per layer when capture_attention
    // is set; rows are part tokens (s0,o0,p0,s1,...) / sum tokens.
    std::vector<Tensor> part_attention;
    std::vector<Tensor> sum_attention;
};

// Mask allowing attention only within each consecutive group of group_size
// tokens (token t belongs to group t / group_size).
BoolMask group_block_mask(int n_groups, int group_size);

// Eq.-style groupwise residual exchange: every part embedding of relation i
// receives that relation's sum embedding, the sum embedding receives the sum
// of its three part embeddings; both sides read pre-update values
// (simultaneous), each followed by layer_norm with the given learned affine.
std::pair<Tensor, Tensor> part_sum_interaction(const Tensor& part_flat, const Tensor& sum, const Tensor& part_ln_gain,
                                               const Tensor& part_ln_bias, const Tensor& sum_ln_gain,
                                               const Tensor& sum_ln_bias);

class CompositeDecoder {
  public:
    CompositeDecoder() = default;
    CompositeDecoder(ParameterStore& ps, const std::string& name, const DecoderConfig& cfg, Rng& rng);

    DecoderOutput decode(const CompositeQuerySet& queries, const TokenMemory& memory) const;
    const DecoderConfig& config() const { return cfg_; }

  private:
    struct StreamBlocks {
        SelfAttentionBlock intra;  // factorized stage 1 (part streams only)
        bool has_intra = false;
        SelfAttentionBlock sa;
        CrossAttentionBlock ca;
        FfnBlock ffn;
    };
    struct InteractionBlocks {
        Tensor part_ln_gain, part_ln_bias, sum_ln_gain, sum_ln_bias;  // summation mode
        SelfAttentionBlock sa;                                        // self-attention mode
    };

    DecoderConfig cfg_;
    std::vector<StreamBlocks> part_blocks_;  // also the single stream of variants a, b, c, d
    std::vector<StreamBlocks> sum_blocks_;   // part_and_sum only (shares tensors when streams=shared)
    std::vector<InteractionBlocks> interaction_;
};

}  // namespace partsum
