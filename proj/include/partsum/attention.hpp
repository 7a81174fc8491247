#pragma once

#include <string>
#include <vector>

#include "partsum/tensor.hpp"

namespace partsum {

struct AttentionConfig {
    int model_dim = 64;
    int n_heads = 4;
    int ffn_dim = 128;
    int n_encoder_layers = 2;

    int head_dim() const { return model_dim / n_heads; }
    void validate() const;  // ConfigError on bad fields
};

// y = x W + b with W[in x out]; init uniform(+-1/sqrt(in)), zero bias.
class Linear {
  public:
    Linear() = default;
    Linear(ParameterStore& ps, const std::string& name, int in_dim, int out_dim, Rng& rng);

    Tensor forward(const Tensor& x) const;
    int in_dim() const { return w_.dim(0); }
    int out_dim() const { return w_.dim(1); }

  private:
    Tensor w_, b_;
};

// Scaled dot-product attention with n_heads heads, per-head scale
// 1/sqrt(head_dim), concatenated heads, output projection. The optional mask
// blocks (query,key) pairs; softmax renormalizes over allowed keys. If
// attn_weights is non-null it receives the head-averaged [Nq x Nk] weights.
class MultiHeadAttention {
  public:
    MultiHeadAttention() = default;
    MultiHeadAttention(ParameterStore& ps, const std::string& name, const AttentionConfig& cfg, Rng& rng);

    Tensor forward(const Tensor& queries, const Tensor& keys, const Tensor& values,
                   const BoolMask* mask = nullptr, Tensor* attn_weights = nullptr) const;

  private:
    Linear wq_, wk_, wv_, wo_;
    int n_heads_ = 0;
};

// Post-norm residual self-attention: layer_norm(x + MHA(x+pos, x+pos, x)).
// pos (optional) follows the DETR convention: added to queries and keys only.
class SelfAttentionBlock {
  public:
    SelfAttentionBlock() = default;
    SelfAttentionBlock(ParameterStore& ps, const std::string& name, const AttentionConfig& cfg, Rng& rng);

    Tensor forward(const Tensor& x, const Tensor* pos = nullptr, const BoolMask* mask = nullptr,
                   Tensor* attn_weights = nullptr) const;

  private:
    MultiHeadAttention mha_;
    Tensor ln_gain_, ln_bias_;
};

// Post-norm residual cross-attention: layer_norm(x + MHA(x+query_pos,
// memory+memory_pos, memory)). Positional embeddings enter queries and keys,
// never values.
class CrossAttentionBlock {
  public:
    CrossAttentionBlock() = default;
    CrossAttentionBlock(ParameterStore& ps, const std::string& name, const AttentionConfig& cfg, Rng& rng);

    Tensor forward(const Tensor& x, const Tensor& memory, const Tensor& memory_pos,
                   const Tensor* query_pos = nullptr, Tensor* attn_weights = nullptr) const;

  private:
    MultiHeadAttention mha_;
    Tensor ln_gain_, ln_bias_;
};

// Post-norm residual feed-forward: layer_norm(x + W2 relu(W1 x + b1) + b2).
class FfnBlock {
  public:
    FfnBlock() = default;
    FfnBlock(ParameterStore& ps, const std::string& name, const AttentionConfig& cfg, Rng& rng);

    Tensor forward(const Tensor& x) const;

  private:
    Linear fc1_, fc2_;
    Tensor ln_gain_, ln_bias_;
};

// Encoded scene tokens plus their learnable positional embeddings. pos_emb is
// added to attention keys (and encoder queries); it is never baked into the
// token values themselves.
struct TokenMemory {
    Tensor tokens;   // [T x D]
    Tensor pos_emb;  // [T x D]
};

// Linear projection F -> D followed by n_encoder_layers (self-attention +
// FFN) blocks over a fixed-length token sequence.
class TokenEncoder {
  public:
    TokenEncoder() = default;
    TokenEncoder(ParameterStore& ps, const std::string& name, int in_features, int n_tokens,
                 const AttentionConfig& cfg, Rng& rng);

    TokenMemory encode(const Tensor& raw_tokens) const;  // [T x F] -> memory
    int n_tokens() const { return pos_emb_.dim(0); }

  private:
    Linear input_proj_;
    Tensor pos_emb_;
    std::vector<SelfAttentionBlock> sa_;
    std::vector<FfnBlock> ffn_;
};

}  // namespace partsum
