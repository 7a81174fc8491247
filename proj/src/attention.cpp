#include "partsum/attention.hpp"

#include <cmath>

namespace partsum {

void AttentionConfig::validate() const {
    if (model_dim < 1) throw ConfigError("attention: model_dim must be positive");
    if (n_heads < 1) throw ConfigError("attention: n_heads must be positive");
    if (ffn_dim < 1) throw ConfigError("attention: ffn_dim must be positive");
    if (n_encoder_layers < 0) throw ConfigError("attention: n_encoder_layers must be non-negative");
    if (model_dim % n_heads != 0) {
        throw ConfigError("attention: model_dim " + std::to_string(model_dim) + " not divisible by n_heads " +
                          std::to_string(n_heads));
    }
}

Linear::Linear(ParameterStore& ps, const std::string& name, int in_dim, int out_dim, Rng& rng) {
    const double bound = fan_in_bound(in_dim);
    w_ = ps.create_uniform(name + ".w", {in_dim, out_dim}, -bound, bound, rng);
    b_ = ps.create_zeros(name + ".b", {out_dim});
}

Tensor Linear::forward(const Tensor& x) const { return add_rowwise(matmul(x, w_), b_); }

MultiHeadAttention::MultiHeadAttention(ParameterStore& ps, const std::string& name, const AttentionConfig& cfg,
                                       Rng& rng)
    : wq_(ps, name + ".wq", cfg.model_dim, cfg.model_dim, rng),
      wk_(ps, name + ".wk", cfg.model_dim, cfg.model_dim, rng),
      wv_(ps, name + ".wv", cfg.model_dim, cfg.model_dim, rng),
      wo_(ps, name + ".wo", cfg.model_dim, cfg.model_dim, rng),
      n_heads_(cfg.n_heads) {}

Tensor MultiHeadAttention::forward(const Tensor& queries, const Tensor& keys, const Tensor& values,
                                   const BoolMask* mask, Tensor* attn_weights) const {
    const int d = wq_.in_dim();
    if (queries.cols() != d || keys.cols() != d || values.cols() != d) {
        throw ShapeError("multi_head_attention: inputs must have model_dim " + std::to_string(d) + " columns");
    }
    if (keys.rows() != values.rows()) {
        throw ShapeError("multi_head_attention: keys/values row mismatch: " + shape_str(keys.shape()) + " vs " +
                         shape_str(values.shape()));
    }
    const int nq = queries.rows();
    const int nk = keys.rows();
    if (mask && (mask->rows != nq || mask->cols != nk)) {
        throw ShapeError("multi_head_attention: mask " + std::to_string(mask->rows) + "x" +
                         std::to_string(mask->cols) + " does not match " + std::to_string(nq) + "x" +
                         std::to_string(nk));
    }
    Tensor q = wq_.forward(queries);
    Tensor k = wk_.forward(keys);
    Tensor v = wv_.forward(values);

    const int dh = d / n_heads_;
    const double scl = 1.0 / std::sqrt(static_cast<double>(dh));
    std::vector<Tensor> head_outputs;
    head_outputs.reserve(n_heads_);
    Tensor weight_sum;
    for (int h = 0; h < n_heads_; ++h) {
        Tensor qh = slice_cols(q, h * dh, dh);
        Tensor kh = slice_cols(k, h * dh, dh);
        Tensor vh = slice_cols(v, h * dh, dh);
        Tensor logits = scale(matmul(qh, transpose(kh)), scl);
        Tensor attn = mask ? softmax_rows(logits, *mask) : softmax_rows(logits);
        if (attn_weights) weight_sum = h == 0 ? attn : add(weight_sum, attn);
        head_outputs.push_back(matmul(attn, vh));
    }
    if (attn_weights) *attn_weights = scale(weight_sum, 1.0 / n_heads_);
    return wo_.forward(concat_cols(head_outputs));
}

namespace {

std::pair<Tensor, Tensor> make_ln(ParameterStore& ps, const std::string& name, int d) {
    return {ps.create_full(name + ".ln.g", {d}, 1.0), ps.create_zeros(name + ".ln.b", {d})};
}

}  // namespace

SelfAttentionBlock::SelfAttentionBlock(ParameterStore& ps, const std::string& name, const AttentionConfig& cfg,
                                       Rng& rng)
    : mha_(ps, name + ".mha", cfg, rng) {
    std::tie(ln_gain_, ln_bias_) = make_ln(ps, name, cfg.model_dim);
}

Tensor SelfAttentionBlock::forward(const Tensor& x, const Tensor* pos, const BoolMask* mask,
                                   Tensor* attn_weights) const {
    Tensor qk = pos ? add(x, *pos) : x;
    Tensor attended = mha_.forward(qk, qk, x, mask, attn_weights);
    return layer_norm(add(x, attended), ln_gain_, ln_bias_);
}

CrossAttentionBlock::CrossAttentionBlock(ParameterStore& ps, const std::string& name, const AttentionConfig& cfg,
                                         Rng& rng)
    : mha_(ps, name + ".mha", cfg, rng) {
    std::tie(ln_gain_, ln_bias_) = make_ln(ps, name, cfg.model_dim);
}

Tensor CrossAttentionBlock::forward(const Tensor& x, const Tensor& memory, const Tensor& memory_pos,
                                    const Tensor* query_pos, Tensor* attn_weights) const {
    Tensor q = query_pos ? add(x, *query_pos) : x;
    Tensor k = add(memory, memory_pos);
    Tensor attended = mha_.forward(q, k, memory, nullptr, attn_weights);
    return layer_norm(add(x, attended), ln_gain_, ln_bias_);
}

FfnBlock::FfnBlock(ParameterStore& ps, const std::string& name, const AttentionConfig& cfg, Rng& rng)
    : fc1_(ps, name + ".fc1", cfg.model_dim, cfg.ffn_dim, rng),
      fc2_(ps, name + ".fc2", cfg.ffn_dim, cfg.model_dim, rng) {
    std::tie(ln_gain_, ln_bias_) = make_ln(ps, name, cfg.model_dim);
}

Tensor FfnBlock::forward(const Tensor& x) const {
    Tensor inner = fc2_.forward(relu(fc1_.forward(x)));
    return layer_norm(add(x, inner), ln_gain_, ln_bias_);
}

TokenEncoder::TokenEncoder(ParameterStore& ps, const std::string& name, int in_features, int n_tokens,
                           const AttentionConfig& cfg, Rng& rng)
    : input_proj_(ps, name + ".proj", in_features, cfg.model_dim, rng) {
    cfg.validate();
    if (n_tokens < 1) throw ConfigError("encoder: n_tokens must be >= 1");
    pos_emb_ = ps.create_normal(name + ".pos_emb", {n_tokens, cfg.model_dim}, 0.0, 0.02, rng);
    sa_.reserve(cfg.n_encoder_layers);
    ffn_.reserve(cfg.n_encoder_layers);
    for (int l = 0; l < cfg.n_encoder_layers; ++l) {
        const std::string ln = name + ".layer" + std::to_string(l);
        sa_.emplace_back(ps, ln + ".sa", cfg, rng);
        ffn_.emplace_back(ps, ln + ".ffn", cfg, rng);
    }
}

TokenMemory TokenEncoder::encode(const Tensor& raw_tokens) const {
    if (raw_tokens.ndim() != 2 || raw_tokens.dim(1) != input_proj_.in_dim()) {
        throw ShapeError("encode: expected [T x " + std::to_string(input_proj_.in_dim()) + "] raw tokens, got " +
                         shape_str(raw_tokens.shape()));
    }
    if (raw_tokens.dim(0) != pos_emb_.dim(0)) {
        throw ShapeError("encode: token count " + std::to_string(raw_tokens.dim(0)) +
                         " does not match positional embedding length " + std::to_string(pos_emb_.dim(0)));
    }
    Tensor x = input_proj_.forward(raw_tokens);
    for (std::size_t l = 0; l < sa_.size(); ++l) {
        x = sa_[l].forward(x, &pos_emb_);
        x = ffn_[l].forward(x);
    }
    return TokenMemory{x, pos_emb_};
}

}  // namespace partsum
