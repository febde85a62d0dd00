#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gqe/autodiff.hpp"

namespace gqe {

/// Single-qubit data re-uploading activation. Circuit per repetition l:
/// Ry(theta_l) Rz(w_l * x + b_l), acting on |0>, measured in Z. Output is a
/// bounded expectation value in [-1, 1].
struct DaruanActivation {
    std::vector<double> w, b, theta;  // one entry per repetition

    std::size_t depth() const { return w.size(); }
    double eval(double x) const;
};

enum class FfnVariant { Gpt2, Hqkan };

FfnVariant ffn_variant_from_string(const std::string& name);
std::string to_string(FfnVariant v);

struct ModelConfig {
    int vocab_size = 0;  // |G| + 1, includes the start token
    int context = 20;    // generated sequence length L
    int d_model = 128;
    int n_heads = 4;
    int n_layers = 4;
    FfnVariant ffn = FfnVariant::Hqkan;
    int d_latent = 12;
    int qkan_layers = 1;
    int daruan_depth = 3;

    void validate() const;
};

struct TokenSequence {
    std::vector<int> tokens;
    std::vector<double> log_probs;  // under the sampling (penalized) distribution
};

struct ParameterReport {
    struct Item {
        std::string component;
        long count = 0;
    };
    std::vector<Item> items;
    long total = 0;
    double bytes_f64() const { return static_cast<double>(total) * 8.0; }
    double bytes_f32() const { return static_cast<double>(total) * 4.0; }
};

/// Analytic counts from the config alone (no instantiation).
ParameterReport analytic_parameter_report(const ModelConfig& config);

/// Decoder-only autoregressive policy over operator tokens. Pre-LN GPT-2
/// block order, learned positional embeddings, no weight tying; the
/// position-wise FFN is either the dense block or the encoder-QKAN-decoder
/// module with DARUAN edge activations.
class PolicyModel {
  public:
    PolicyModel(ModelConfig config, std::uint64_t seed);

    /// Logits at every position; prefix includes the start token at position 0.
    ad::Tensor forward_logits(std::span<const int> prefix);

    /// log p(token_k | start, tokens_<k) for every k, under the repetition-
    /// penalized policy (penalty 1 = raw softmax). Differentiable.
    ad::Tensor sequence_log_probs(const std::vector<int>& tokens, double repetition_penalty);

    std::vector<TokenSequence> sample_sequences(int n_sequences, int length,
                                                double repetition_penalty, std::uint64_t seed,
                                                bool greedy = false);

    /// Position-wise FFN of one block (dense or encoder-QKAN-decoder), without
    /// the residual addition. Exposed for direct testing of the variants.
    ad::Tensor ffn_block(std::size_t layer, const ad::Tensor& x);

    ParameterReport parameter_report() const;
    long instantiated_parameter_count() const { return params_.total_count(); }

    ad::ParameterSet& parameters() { return params_; }
    const ModelConfig& config() const { return config_; }

  private:
    struct Block {
        ad::Tensor ln1_g, ln1_b, ln2_g, ln2_b;
        ad::Tensor wq, bq, wk, bk, wv, bv, wo, bo;
        // gpt2 ffn
        ad::Tensor w1, b1, w2, b2;
        // hqkan ffn
        ad::Tensor enc_w, enc_b, dec_w, dec_b;
        std::vector<std::array<ad::Tensor, 3>> daruan;  // per qkan layer: {w, b, theta}
    };

    ad::Tensor attention(const Block& blk, const ad::Tensor& x);
    ad::Tensor ffn(const Block& blk, const ad::Tensor& x);
    ad::Tensor qkan_apply(const std::array<ad::Tensor, 3>& daruan, const ad::Tensor& z);

    ModelConfig config_;
    ad::ParameterSet params_;
    ad::Tensor tok_embed_, pos_embed_;
    std::vector<Block> blocks_;
    ad::Tensor final_g_, final_b_, head_w_, head_b_;
    ad::Tensor edge_expand_, node_sum_;  // constant 0/1 matrices for the QKAN layer
};

}  // namespace gqe
