#include "gqe/model.hpp"

#include <array>
#include <cmath>
#include <random>
#include <stdexcept>

namespace gqe {

using ad::Tensor;

double DaruanActivation::eval(double x) const {
    // state (a0, a1) on |0>, tracked as real pairs
    double re0 = 1.0, im0 = 0.0, re1 = 0.0, im1 = 0.0;
    for (std::size_t l = 0; l < depth(); ++l) {
        const double half = 0.5 * (w[l] * x + b[l]);
        const double c = std::cos(half), s = std::sin(half);
        double nre0 = re0 * c + im0 * s, nim0 = im0 * c - re0 * s;
        double nre1 = re1 * c - im1 * s, nim1 = im1 * c + re1 * s;
        const double ct = std::cos(0.5 * theta[l]), st = std::sin(0.5 * theta[l]);
        re0 = ct * nre0 - st * nre1;
        im0 = ct * nim0 - st * nim1;
        re1 = st * nre0 + ct * nre1;
        im1 = st * nim0 + ct * nim1;
    }
    return re0 * re0 + im0 * im0 - re1 * re1 - im1 * im1;
}

FfnVariant ffn_variant_from_string(const std::string& name) {
    if (name == "gpt2") return FfnVariant::Gpt2;
    if (name == "hqkan") return FfnVariant::Hqkan;
    throw std::invalid_argument("unknown ffn_variant: " + name);
}

std::string to_string(FfnVariant v) { return v == FfnVariant::Gpt2 ? "gpt2" : "hqkan"; }

void ModelConfig::validate() const {
    if (vocab_size < 2) throw std::invalid_argument("vocab_size must be >= 2");
    if (context < 1) throw std::invalid_argument("context must be >= 1");
    if (d_model <= 0 || n_heads <= 0 || d_model % n_heads != 0)
        throw std::invalid_argument("d_model must be divisible by n_heads");
    if (ffn == FfnVariant::Hqkan) {
        if (d_latent <= 0 || d_latent >= d_model)
            throw std::invalid_argument("hqkan requires 0 < d_latent < d_model");
        if (qkan_layers < 1 || daruan_depth < 1)
            throw std::invalid_argument("hqkan requires qkan_layers >= 1 and daruan_depth >= 1");
    }
}

ParameterReport analytic_parameter_report(const ModelConfig& cfg) {
    const long v = cfg.vocab_size, d = cfg.d_model, nl = cfg.n_layers;
    const long dz = cfg.d_latent, r = cfg.daruan_depth, ql = cfg.qkan_layers;
    ParameterReport rep;
    rep.items.push_back({"embeddings", v * d + (cfg.context + 1) * d});
    rep.items.push_back({"attention", nl * (4 * d * d + 4 * d)});
    rep.items.push_back({"layer_norm", nl * 4 * d + 2 * d});
    long ffn = 0;
    if (cfg.ffn == FfnVariant::Gpt2) {
        ffn = nl * (8 * d * d + 5 * d);
    } else {
        ffn = nl * (d * dz + dz + 3 * r * dz * dz * ql + dz * d + d);
    }
    rep.items.push_back({"ffn", ffn});
    rep.items.push_back({"head", d * v + v});
    for (const auto& it : rep.items) rep.total += it.count;
    return rep;
}

namespace {

std::vector<double> normal_values(std::mt19937_64& rng, std::size_t n, double stddev) {
    std::normal_distribution<double> g(0.0, stddev);
    std::vector<double> out(n);
    for (auto& x : out) x = g(rng);
    return out;
}

std::vector<double> uniform_values(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> out(n);
    for (auto& x : out) x = u(rng);
    return out;
}

constexpr double kInitStd = 0.02;
constexpr double kMaskFill = -1e30;

}  // namespace

PolicyModel::PolicyModel(ModelConfig config, std::uint64_t seed) : config_(config) {
    config_.validate();
    std::mt19937_64 rng(seed);
    const std::size_t v = config_.vocab_size, d = config_.d_model;
    const std::size_t dz = config_.d_latent, r = config_.daruan_depth;

    auto weight = [&](const std::string& name, std::size_t rows, std::size_t cols) {
        return params_.create(name, {rows, cols}, normal_values(rng, rows * cols, kInitStd),
                              true);
    };
    auto bias = [&](const std::string& name, std::size_t n, double fill = 0.0) {
        return params_.create(name, {n}, std::vector<double>(n, fill), false);
    };

    tok_embed_ = weight("embed.token", v, d);
    pos_embed_ = weight("embed.pos", config_.context + 1, d);

    blocks_.resize(config_.n_layers);
    for (int l = 0; l < config_.n_layers; ++l) {
        auto& blk = blocks_[l];
        const std::string p = "block" + std::to_string(l) + ".";
        blk.ln1_g = bias(p + "ln1.gain", d, 1.0);
        blk.ln1_b = bias(p + "ln1.bias", d);
        blk.wq = weight(p + "attn.wq", d, d);
        blk.bq = bias(p + "attn.bq", d);
        blk.wk = weight(p + "attn.wk", d, d);
        blk.bk = bias(p + "attn.bk", d);
        blk.wv = weight(p + "attn.wv", d, d);
        blk.bv = bias(p + "attn.bv", d);
        blk.wo = weight(p + "attn.wo", d, d);
        blk.bo = bias(p + "attn.bo", d);
        blk.ln2_g = bias(p + "ln2.gain", d, 1.0);
        blk.ln2_b = bias(p + "ln2.bias", d);
        if (config_.ffn == FfnVariant::Gpt2) {
            blk.w1 = weight(p + "ffn.w1", d, 4 * d);
            blk.b1 = bias(p + "ffn.b1", 4 * d);
            blk.w2 = weight(p + "ffn.w2", 4 * d, d);
            blk.b2 = bias(p + "ffn.b2", d);
        } else {
            blk.enc_w = weight(p + "ffn.enc.w", d, dz);
            blk.enc_b = bias(p + "ffn.enc.b", dz);
            for (int q = 0; q < config_.qkan_layers; ++q) {
                const std::string qp = p + "ffn.qkan" + std::to_string(q) + ".";
                const std::size_t edges = dz * dz * r;
                // DARUAN parameters stay out of the weight-decay set
                Tensor wt = params_.create(qp + "w", {r, dz * dz},
                                           uniform_values(rng, edges, 0.5, 1.5), false);
                Tensor bt = params_.create(qp + "b", {r, dz * dz},
                                           uniform_values(rng, edges, -M_PI, M_PI), false);
                Tensor tt = params_.create(qp + "theta", {r, dz * dz},
                                           uniform_values(rng, edges, -0.1, 0.1), false);
                blk.daruan.push_back({wt, bt, tt});
            }
            blk.dec_w = weight(p + "ffn.dec.w", dz, d);
            blk.dec_b = bias(p + "ffn.dec.b", d);
        }
    }
    final_g_ = bias("final_ln.gain", d, 1.0);
    final_b_ = bias("final_ln.bias", d);
    head_w_ = weight("head.w", d, v);
    head_b_ = bias("head.b", v);

    if (config_.ffn == FfnVariant::Hqkan) {
        // constant 0/1 matrices: row expansion x -> per-edge copies, and the
        // node summation over incoming edges
        std::vector<double> expand(dz * dz * dz, 0.0);
        for (std::size_t j = 0; j < dz; ++j)
            for (std::size_t i = 0; i < dz; ++i) expand[i * dz * dz + j * dz + i] = 1.0;
        edge_expand_ = Tensor::from_values({dz, dz * dz}, std::move(expand), false);
        std::vector<double> nodesum(dz * dz * dz, 0.0);
        for (std::size_t j = 0; j < dz; ++j)
            for (std::size_t i = 0; i < dz; ++i) nodesum[(j * dz + i) * dz + j] = 1.0;
        node_sum_ = Tensor::from_values({dz * dz, dz}, std::move(nodesum), false);
    }
}

Tensor PolicyModel::attention(const Block& blk, const Tensor& x) {
    const std::size_t d = config_.d_model;
    const std::size_t nh = config_.n_heads, dh = d / nh;
    Tensor q = ad::add_rowwise(ad::matmul(x, blk.wq), blk.bq);
    Tensor k = ad::add_rowwise(ad::matmul(x, blk.wk), blk.bk);
    Tensor vv = ad::add_rowwise(ad::matmul(x, blk.wv), blk.bv);
    std::vector<Tensor> heads;
    heads.reserve(nh);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    for (std::size_t h = 0; h < nh; ++h) {
        Tensor qh = ad::slice_cols(q, h * dh, (h + 1) * dh);
        Tensor kh = ad::slice_cols(k, h * dh, (h + 1) * dh);
        Tensor vh = ad::slice_cols(vv, h * dh, (h + 1) * dh);
        Tensor scores = ad::scalar_mul(ad::matmul(qh, ad::transpose(kh)), scale);
        Tensor masked = ad::causal_mask_fill(scores, kMaskFill);
        Tensor attn = ad::softmax_rows(masked);
        heads.push_back(ad::matmul(attn, vh));
    }
    Tensor merged = nh == 1 ? heads[0] : ad::concat_cols(heads);
    return ad::add_rowwise(ad::matmul(merged, blk.wo), blk.bo);
}

Tensor PolicyModel::qkan_apply(const std::array<Tensor, 3>& daruan, const Tensor& z) {
    const std::size_t t = z.rows(), n = static_cast<std::size_t>(config_.d_latent) *
                                        config_.d_latent;
    Tensor x = ad::matmul(z, edge_expand_);  // [T, dz^2], per-edge input copies
    Tensor re0 = Tensor::full({t, n}, 1.0);
    Tensor im0 = Tensor::zeros({t, n});
    Tensor re1 = Tensor::zeros({t, n});
    Tensor im1 = Tensor::zeros({t, n});
    for (int l = 0; l < config_.daruan_depth; ++l) {
        // repetition l of the [R, dz^2] parameter blocks
        Tensor w_l = ad::slice_rows(daruan[0], l, l + 1);
        Tensor b_l = ad::slice_rows(daruan[1], l, l + 1);
        Tensor t_l = ad::slice_rows(daruan[2], l, l + 1);

        Tensor half = ad::scalar_mul(ad::add_rowwise(ad::mul_rowwise(x, w_l), b_l), 0.5);
        Tensor c = ad::cos_values(half), s = ad::sin_values(half);
        Tensor nre0 = ad::add(ad::mul(re0, c), ad::mul(im0, s));
        Tensor nim0 = ad::sub(ad::mul(im0, c), ad::mul(re0, s));
        Tensor nre1 = ad::sub(ad::mul(re1, c), ad::mul(im1, s));
        Tensor nim1 = ad::add(ad::mul(im1, c), ad::mul(re1, s));
        Tensor ct = ad::cos_values(ad::scalar_mul(t_l, 0.5));
        Tensor st = ad::sin_values(ad::scalar_mul(t_l, 0.5));
        re0 = ad::sub(ad::mul_rowwise(nre0, ct), ad::mul_rowwise(nre1, st));
        im0 = ad::sub(ad::mul_rowwise(nim0, ct), ad::mul_rowwise(nim1, st));
        re1 = ad::add(ad::mul_rowwise(nre0, st), ad::mul_rowwise(nre1, ct));
        im1 = ad::add(ad::mul_rowwise(nim0, st), ad::mul_rowwise(nim1, ct));
    }
    Tensor phi = ad::sub(ad::add(ad::mul(re0, re0), ad::mul(im0, im0)),
                         ad::add(ad::mul(re1, re1), ad::mul(im1, im1)));
    return ad::matmul(phi, node_sum_);  // [T, dz]
}

Tensor PolicyModel::ffn_block(std::size_t layer, const Tensor& x) {
    return ffn(blocks_.at(layer), x);
}

Tensor PolicyModel::ffn(const Block& blk, const Tensor& x) {
    if (config_.ffn == FfnVariant::Gpt2) {
        Tensor h = ad::gelu(ad::add_rowwise(ad::matmul(x, blk.w1), blk.b1));
        return ad::add_rowwise(ad::matmul(h, blk.w2), blk.b2);
    }
    Tensor z = ad::add_rowwise(ad::matmul(x, blk.enc_w), blk.enc_b);
    for (const auto& daruan : blk.daruan) z = qkan_apply(daruan, z);
    return ad::add_rowwise(ad::matmul(z, blk.dec_w), blk.dec_b);
}

Tensor PolicyModel::forward_logits(std::span<const int> prefix) {
    if (prefix.empty()) throw std::invalid_argument("forward_logits: empty prefix");
    if (prefix.size() > static_cast<std::size_t>(config_.context) + 1)
        throw std::invalid_argument("forward_logits: prefix longer than context");
    std::vector<int> ids(prefix.begin(), prefix.end());
    for (int t : ids)
        if (t < 0 || t >= config_.vocab_size)
            throw std::invalid_argument("forward_logits: unknown token " + std::to_string(t));
    std::vector<int> positions(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) positions[i] = static_cast<int>(i);

    Tensor h = ad::add(ad::embedding_lookup(tok_embed_, ids),
                       ad::embedding_lookup(pos_embed_, positions));
    for (auto& blk : blocks_) {
        h = ad::add(h, attention(blk, ad::layer_norm_rows(h, blk.ln1_g, blk.ln1_b)));
        h = ad::add(h, ffn(blk, ad::layer_norm_rows(h, blk.ln2_g, blk.ln2_b)));
    }
    h = ad::layer_norm_rows(h, final_g_, final_b_);
    return ad::add_rowwise(ad::matmul(h, head_w_), head_b_);
}

namespace {

// CTRL-style repetition penalty on already-emitted tokens:
// positive logits divided by the penalty, negative multiplied.
Tensor penalize_logits(const Tensor& logits, const std::vector<std::vector<int>>& emitted,
                       double penalty) {
    if (penalty == 1.0) return logits;
    const std::size_t rows = logits.rows(), cols = logits.cols();
    std::vector<double> mask(rows * cols, 0.0), inv(rows * cols, 1.0);
    for (std::size_t i = 0; i < rows; ++i)
        for (int tok : emitted[i]) {
            mask[i * cols + tok] = 1.0;
            inv[i * cols + tok] = 0.0;
        }
    Tensor mask_t = Tensor::from_values({rows, cols}, std::move(mask), false);
    Tensor inv_t = Tensor::from_values({rows, cols}, std::move(inv), false);
    const double big = 1e300;
    Tensor pos = ad::clamp(logits, 0.0, big);
    Tensor neg = ad::clamp(logits, -big, 0.0);
    Tensor penalized =
        ad::add(ad::scalar_mul(pos, 1.0 / penalty), ad::scalar_mul(neg, penalty));
    return ad::add(ad::mul(logits, inv_t), ad::mul(penalized, mask_t));
}

}  // namespace

Tensor PolicyModel::sequence_log_probs(const std::vector<int>& tokens,
                                       double repetition_penalty) {
    if (tokens.empty()) throw std::invalid_argument("sequence_log_probs: empty sequence");
    std::vector<int> prefix;
    prefix.reserve(tokens.size());
    prefix.push_back(config_.vocab_size - 1);  // start token
    for (std::size_t i = 0; i + 1 < tokens.size(); ++i) prefix.push_back(tokens[i]);

    Tensor logits = forward_logits(prefix);  // row k predicts tokens[k]
    std::vector<std::vector<int>> emitted(tokens.size());
    for (std::size_t k = 1; k < tokens.size(); ++k) {
        emitted[k] = emitted[k - 1];
        emitted[k].push_back(tokens[k - 1]);
    }
    Tensor penalized = penalize_logits(logits, emitted, repetition_penalty);
    // the start token is never generated, so it is excluded from normalization
    Tensor active = ad::slice_cols(penalized, 0, config_.vocab_size - 1);
    return ad::gather_cols(ad::log_softmax_rows(active), tokens);
}

std::vector<TokenSequence> PolicyModel::sample_sequences(int n_sequences, int length,
                                                         double repetition_penalty,
                                                         std::uint64_t seed, bool greedy) {
    if (n_sequences < 1) throw std::invalid_argument("sample_sequences: need n >= 1");
    if (length < 1 || length > config_.context)
        throw std::invalid_argument("sample_sequences: bad length");
    ad::NoGradGuard no_grad;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const int start = config_.vocab_size - 1;
    const int n_tokens = config_.vocab_size - 1;  // start token never emitted

    std::vector<TokenSequence> out;
    out.reserve(n_sequences);
    for (int m = 0; m < n_sequences; ++m) {
        TokenSequence seq;
        std::vector<int> prefix{start};
        for (int k = 0; k < length; ++k) {
            Tensor logits = forward_logits(prefix);
            std::vector<double> row(logits.values().end() - config_.vocab_size,
                                    logits.values().end());
            // penalize emitted tokens, CTRL convention (once per distinct token)
            if (repetition_penalty != 1.0) {
                std::vector<char> hit(n_tokens, 0);
                for (int tok : seq.tokens) {
                    if (hit[tok]) continue;
                    hit[tok] = 1;
                    row[tok] = row[tok] > 0 ? row[tok] / repetition_penalty
                                            : row[tok] * repetition_penalty;
                }
            }
            // the start token is never generated
            std::vector<double> logp(n_tokens);
            double mx = -1e308;
            for (int t = 0; t < n_tokens; ++t) mx = std::max(mx, row[t]);
            double sum = 0.0;
            for (int t = 0; t < n_tokens; ++t) sum += std::exp(row[t] - mx);
            const double lse = mx + std::log(sum);
            for (int t = 0; t < n_tokens; ++t) logp[t] = row[t] - lse;

            int chosen = 0;
            if (greedy) {
                for (int t = 1; t < n_tokens; ++t)
                    if (logp[t] > logp[chosen]) chosen = t;
            } else {
                double u = uni(rng), acc = 0.0;
                chosen = n_tokens - 1;
                for (int t = 0; t < n_tokens; ++t) {
                    acc += std::exp(logp[t]);
                    if (u <= acc) {
                        chosen = t;
                        break;
                    }
                }
            }
            seq.tokens.push_back(chosen);
            seq.log_probs.push_back(logp[chosen]);
            prefix.push_back(chosen);
        }
        out.push_back(std::move(seq));
    }
    return out;
}

ParameterReport PolicyModel::parameter_report() const {
    return analytic_parameter_report(config_);
}

}  // namespace gqe
