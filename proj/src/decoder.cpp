#include "partsum/decoder.hpp"

namespace partsum {

const char* to_string(DecoderVariant v) {
    switch (v) {
        case DecoderVariant::vanilla_vector: return "vanilla-vector";
        case DecoderVariant::vanilla_tensor: return "vanilla-tensor";
        case DecoderVariant::part_factorized: return "part-factorized";
        case DecoderVariant::vanilla_composite: return "vanilla-composite";
        case DecoderVariant::part_and_sum: return "part-and-sum";
    }
    return "?";
}

const char* to_string(StreamMode m) { return m == StreamMode::shared ? "shared" : "independent"; }

const char* to_string(InteractionMode m) {
    switch (m) {
        case InteractionMode::none: return "none";
        case InteractionMode::summation: return "summation";
        case InteractionMode::self_attention: return "self-attention";
    }
    return "?";
}

DecoderVariant decoder_variant_from_string(const std::string& s) {
    if (s == "vanilla-vector") return DecoderVariant::vanilla_vector;
    if (s == "vanilla-tensor") return DecoderVariant::vanilla_tensor;
    if (s == "part-factorized") return DecoderVariant::part_factorized;
    if (s == "vanilla-composite") return DecoderVariant::vanilla_composite;
    if (s == "part-and-sum") return DecoderVariant::part_and_sum;
    throw ConfigError("unknown decoder variant '" + s +
                      "' (expected vanilla-vector|vanilla-tensor|part-factorized|vanilla-composite|part-and-sum)");
}

StreamMode stream_mode_from_string(const std::string& s) {
    if (s == "shared") return StreamMode::shared;
    if (s == "independent") return StreamMode::independent;
    throw ConfigError("unknown stream mode '" + s + "' (expected shared|independent)");
}

InteractionMode interaction_mode_from_string(const std::string& s) {
    if (s == "none") return InteractionMode::none;
    if (s == "summation") return InteractionMode::summation;
    if (s == "self-attention") return InteractionMode::self_attention;
    throw ConfigError("unknown interaction mode '" + s + "' (expected none|summation|self-attention)");
}

void DecoderConfig::validate() const {
    attention.validate();
    if (n_layers < 1) throw ConfigError("decoder: n_layers must be >= 1");
    if (variant != DecoderVariant::part_and_sum && interaction != InteractionMode::none) {
        throw ConfigError(std::string("decoder: interaction '") + to_string(interaction) +
                          "' requires the part-and-sum variant, got '" + to_string(variant) + "'");
    }
}

CompositeQuerySet CompositeQuerySet::create(ParameterStore& ps, const std::string& name, int n_queries,
                                            int model_dim, Rng& rng) {
    if (n_queries < 1) throw ConfigError("queries: n_queries must be >= 1");
    CompositeQuerySet q;
    q.part_queries = ps.create_normal(name + ".part", {n_queries, 3, model_dim}, 0.0, 0.02, rng);
    q.sum_queries = ps.create_normal(name + ".sum", {n_queries, model_dim}, 0.0, 0.02, rng);
    return q;
}

BoolMask group_block_mask(int n_groups, int group_size) {
    const int n = n_groups * group_size;
    BoolMask m;
    m.rows = n;
    m.cols = n;
    m.allow.assign(static_cast<std::size_t>(n) * n, 0);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c)
            if (r / group_size == c / group_size) m.set(r, c, true);
    return m;
}

std::pair<Tensor, Tensor> part_sum_interaction(const Tensor& part_flat, const Tensor& sum,
                                               const Tensor& part_ln_gain, const Tensor& part_ln_bias,
                                               const Tensor& sum_ln_gain, const Tensor& sum_ln_bias) {
    const int m = sum.dim(0);
    if (part_flat.ndim() != 2 || part_flat.dim(0) != 3 * m || part_flat.dim(1) != sum.dim(1)) {
        throw ShapeError("part_sum_interaction: part " + shape_str(part_flat.shape()) + " does not align with sum " +
                         shape_str(sum.shape()));
    }
    std::vector<int> rep(static_cast<std::size_t>(3) * m);
    std::vector<int> s_idx(m), o_idx(m), p_idx(m);
    for (int i = 0; i < m; ++i) {
        rep[3 * i] = rep[3 * i + 1] = rep[3 * i + 2] = i;
        s_idx[i] = 3 * i;
        o_idx[i] = 3 * i + 1;
        p_idx[i] = 3 * i + 2;
    }
    Tensor new_part = layer_norm(add(part_flat, take_rows(sum, rep)), part_ln_gain, part_ln_bias);
    Tensor part_total =
        add(add(take_rows(part_flat, s_idx), take_rows(part_flat, o_idx)), take_rows(part_flat, p_idx));
    Tensor new_sum = layer_norm(add(sum, part_total), sum_ln_gain, sum_ln_bias);
    return {new_part, new_sum};
}

CompositeDecoder::CompositeDecoder(ParameterStore& ps, const std::string& name, const DecoderConfig& cfg, Rng& rng)
    : cfg_(cfg) {
    cfg_.validate();
    const AttentionConfig& ac = cfg_.attention;
    const int d = ac.model_dim;
    for (int l = 0; l < cfg_.n_layers; ++l) {
        const std::string base = name + ".layer" + std::to_string(l);
        if (cfg_.variant == DecoderVariant::part_and_sum) {
            const bool shared = cfg_.streams == StreamMode::shared;
            const std::string part_name = base + (shared ? ".main" : ".part");
            StreamBlocks pb;
            pb.has_intra = cfg_.factorized_part_sa;
            if (pb.has_intra) pb.intra = SelfAttentionBlock(ps, part_name + ".intra", ac, rng);
            pb.sa = SelfAttentionBlock(ps, part_name + ".sa", ac, rng);
            pb.ca = CrossAttentionBlock(ps, part_name + ".ca", ac, rng);
            pb.ffn = FfnBlock(ps, part_name + ".ffn", ac, rng);
            part_blocks_.push_back(pb);
            if (shared) {
                StreamBlocks sb = pb;  // copies share the underlying parameter tensors
                sb.has_intra = false;
                sum_blocks_.push_back(sb);
            } else {
                StreamBlocks sb;
                sb.sa = SelfAttentionBlock(ps, base + ".sum.sa", ac, rng);
                sb.ca = CrossAttentionBlock(ps, base + ".sum.ca", ac, rng);
                sb.ffn = FfnBlock(ps, base + ".sum.ffn", ac, rng);
                sum_blocks_.push_back(sb);
            }
            InteractionBlocks ib;
            if (cfg_.interaction == InteractionMode::summation) {
                ib.part_ln_gain = ps.create_full(base + ".interaction.part_ln.g", {d}, 1.0);
                ib.part_ln_bias = ps.create_zeros(base + ".interaction.part_ln.b", {d});
                ib.sum_ln_gain = ps.create_full(base + ".interaction.sum_ln.g", {d}, 1.0);
                ib.sum_ln_bias = ps.create_zeros(base + ".interaction.sum_ln.b", {d});
            } else if (cfg_.interaction == InteractionMode::self_attention) {
                ib.sa = SelfAttentionBlock(ps, base + ".interaction.sa", ac, rng);
            }
            interaction_.push_back(ib);
        } else {
            StreamBlocks mb;
            mb.has_intra = cfg_.variant == DecoderVariant::part_factorized;
            if (mb.has_intra) mb.intra = SelfAttentionBlock(ps, base + ".main.intra", ac, rng);
            mb.sa = SelfAttentionBlock(ps, base + ".main.sa", ac, rng);
            mb.ca = CrossAttentionBlock(ps, base + ".main.ca", ac, rng);
            mb.ffn = FfnBlock(ps, base + ".main.ffn", ac, rng);
            part_blocks_.push_back(mb);
        }
    }
}

DecoderOutput CompositeDecoder::decode(const CompositeQuerySet& queries, const TokenMemory& memory) const {
    const int m = queries.n_queries();
    const int d = queries.model_dim();
    if (d != cfg_.attention.model_dim) {
        throw ShapeError("decode: query dim " + std::to_string(d) + " does not match model_dim " +
                         std::to_string(cfg_.attention.model_dim));
    }
    if (memory.tokens.cols() != d) {
        throw ShapeError("decode: memory dim " + std::to_string(memory.tokens.cols()) +
                         " does not match model_dim " + std::to_string(d));
    }
    const bool cap = cfg_.capture_attention;
    Tensor part_pos = reshape(queries.part_queries, {3 * m, d});
    Tensor sum_pos = queries.sum_queries;
    DecoderOutput out;

    auto run_part_sa = [&](const StreamBlocks& blocks, Tensor x, const Tensor& pos, const BoolMask& intra_mask) {
        if (blocks.has_intra) {
            x = blocks.intra.forward(x, &pos, &intra_mask);
            if (cfg_.factorized_stage2) x = blocks.sa.forward(x, &pos);
        } else {
            x = blocks.sa.forward(x, &pos);
        }
        return x;
    };

    switch (cfg_.variant) {
        case DecoderVariant::vanilla_vector: {
            Tensor x = Tensor::zeros({m, d});
            for (int l = 0; l < cfg_.n_layers; ++l) {
                const StreamBlocks& b = part_blocks_[l];
                Tensor attn;
                x = b.sa.forward(x, &sum_pos);
                x = b.ca.forward(x, memory.tokens, memory.pos_emb, &sum_pos, cap ? &attn : nullptr);
                x = b.ffn.forward(x);
                out.sum_layers.push_back(x);
                if (cap) out.sum_attention.push_back(attn);
            }
            break;
        }
        case DecoderVariant::vanilla_tensor:
        case DecoderVariant::part_factorized: {
            Tensor x = Tensor::zeros({3 * m, d});
            const BoolMask intra_mask = group_block_mask(m, 3);
            for (int l = 0; l < cfg_.n_layers; ++l) {
                const StreamBlocks& b = part_blocks_[l];
                Tensor attn;
                x = run_part_sa(b, x, part_pos, intra_mask);
                x = b.ca.forward(x, memory.tokens, memory.pos_emb, &part_pos, cap ? &attn : nullptr);
                x = b.ffn.forward(x);
                out.part_layers.push_back(reshape(x, {m, 3, d}));
                if (cap) out.part_attention.push_back(attn);
            }
            break;
        }
        case DecoderVariant::vanilla_composite: {
            Tensor pos = concat_rows({part_pos, sum_pos});
            Tensor x = Tensor::zeros({4 * m, d});
            std::vector<int> part_rows(static_cast<std::size_t>(3) * m);
            std::vector<int> sum_rows(static_cast<std::size_t>(m));
            for (int i = 0; i < 3 * m; ++i) part_rows[i] = i;
            for (int i = 0; i < m; ++i) sum_rows[i] = 3 * m + i;
            for (int l = 0; l < cfg_.n_layers; ++l) {
                const StreamBlocks& b = part_blocks_[l];
                Tensor attn;
                x = b.sa.forward(x, &pos);
                x = b.ca.forward(x, memory.tokens, memory.pos_emb, &pos, cap ? &attn : nullptr);
                x = b.ffn.forward(x);
                out.part_layers.push_back(reshape(take_rows(x, part_rows), {m, 3, d}));
                out.sum_layers.push_back(take_rows(x, sum_rows));
                if (cap) {
                    out.part_attention.push_back(take_rows(attn, part_rows));
                    out.sum_attention.push_back(take_rows(attn, sum_rows));
                }
            }
            break;
        }
        case DecoderVariant::part_and_sum: {
            Tensor px = Tensor::zeros({3 * m, d});
            Tensor sx = Tensor::zeros({m, d});
            const BoolMask intra_mask = group_block_mask(m, 3);
            const BoolMask quad_mask = group_block_mask(m, 4);
            // Interleaved layout (s_i, o_i, p_i, G_i) for the self-attention
            // interaction, and the inverse gather back to the two streams.
            std::vector<int> to_quad(static_cast<std::size_t>(4) * m);
            std::vector<int> quad_part(static_cast<std::size_t>(3) * m);
            std::vector<int> quad_sum(static_cast<std::size_t>(m));
            for (int i = 0; i < m; ++i) {
                for (int k = 0; k < 3; ++k) {
                    to_quad[4 * i + k] = 3 * i + k;
                    quad_part[3 * i + k] = 4 * i + k;
                }
                to_quad[4 * i + 3] = 3 * m + i;
                quad_sum[i] = 4 * i + 3;
            }
            for (int l = 0; l < cfg_.n_layers; ++l) {
                const StreamBlocks& pb = part_blocks_[l];
                const StreamBlocks& sb = sum_blocks_[l];
                Tensor pattn, sattn;
                px = run_part_sa(pb, px, part_pos, intra_mask);
                px = pb.ca.forward(px, memory.tokens, memory.pos_emb, &part_pos, cap ? &pattn : nullptr);
                px = pb.ffn.forward(px);
                sx = sb.sa.forward(sx, &sum_pos);
                sx = sb.ca.forward(sx, memory.tokens, memory.pos_emb, &sum_pos, cap ? &sattn : nullptr);
                sx = sb.ffn.forward(sx);
                const InteractionBlocks& ib = interaction_[l];
                if (cfg_.interaction == InteractionMode::summation) {
                    std::tie(px, sx) =
                        part_sum_interaction(px, sx, ib.part_ln_gain, ib.part_ln_bias, ib.sum_ln_gain, ib.sum_ln_bias);
                } else if (cfg_.interaction == InteractionMode::self_attention) {
                    Tensor quad = take_rows(concat_rows({px, sx}), to_quad);
                    Tensor quad_pos = take_rows(concat_rows({part_pos, sum_pos}), to_quad);
                    quad = ib.sa.forward(quad, &quad_pos, &quad_mask);
                    px = take_rows(quad, quad_part);
                    sx = take_rows(quad, quad_sum);
                }
                out.part_layers.push_back(reshape(px, {m, 3, d}));
                out.sum_layers.push_back(sx);
                if (cap) {
                    out.part_attention.push_back(pattn);
                    out.sum_attention.push_back(sattn);
                }
            }
            break;
        }
    }
    return out;
}

}  // namespace partsum
