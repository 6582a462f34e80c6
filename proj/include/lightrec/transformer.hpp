#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "lightrec/util.hpp"
#include "lightrec/vocab.hpp"

namespace lightrec {

/// Deep-and-narrow encoder-decoder configuration. The feed-forward inner
/// dimension `ff_inner` (w) is the narrow axis; everything else follows the
/// usual encoder-decoder shape.
struct ModelConfig {
    int d_model = 512;
    int ff_inner = 16;  // w
    int enc_layers = 6;
    int dec_layers = 6;
    int heads = 8;
    int vocab_size = 0;
    int max_len = 24;  // T
    double dropout = 0.1;
    std::uint64_t seed = 42;

    void validate() const {
        if (d_model % heads != 0) throw error("ModelConfig: d_model must be divisible by heads");
        if (ff_inner < 1) throw error("ModelConfig: ff_inner must be >= 1");
        if (vocab_size < 1) throw error("ModelConfig: vocab_size must be set");
    }
};

struct LayerNormParams {
    Eigen::VectorXd gain, bias;
};
struct AttentionParams {
    Eigen::MatrixXd wq, wk, wv, wo;  // d x d each
};
struct FfParams {
    Eigen::MatrixXd w1;  // d x w
    Eigen::MatrixXd w2;  // w x d
};
struct EncoderLayerParams {
    LayerNormParams ln1, ln2;
    AttentionParams attn;
    FfParams ff;
};
struct DecoderLayerParams {
    LayerNormParams ln1, ln2, ln3;
    AttentionParams self_attn, cross_attn;
    FfParams ff;
};

/// Pre-norm Transformer with a shared token embedding tied to the output
/// projection and learned absolute positions.
struct Seq2SeqModel {
    ModelConfig config;
    Eigen::MatrixXd embedding;  // vocab x d, tied to the output projection
    Eigen::MatrixXd pos_enc;    // T x d
    Eigen::MatrixXd pos_dec;    // T x d
    std::vector<EncoderLayerParams> enc;
    std::vector<DecoderLayerParams> dec;
    LayerNormParams enc_final, dec_final;
};

namespace detail {

// Stable iteration over every parameter tensor; also defines checkpoint order.
template <typename ModelT, typename F>
void visit_params(ModelT& m, F&& f) {
    f("embedding", m.embedding);
    f("pos_enc", m.pos_enc);
    f("pos_dec", m.pos_dec);
    auto visit_ln = [&](const std::string& name, auto& ln) {
        f(name + ".gain", ln.gain);
        f(name + ".bias", ln.bias);
    };
    auto visit_attn = [&](const std::string& name, auto& a) {
        f(name + ".wq", a.wq);
        f(name + ".wk", a.wk);
        f(name + ".wv", a.wv);
        f(name + ".wo", a.wo);
    };
    auto visit_ff = [&](const std::string& name, auto& ff) {
        f(name + ".w1", ff.w1);
        f(name + ".w2", ff.w2);
    };
    for (std::size_t l = 0; l < m.enc.size(); ++l) {
        std::string p = "enc." + std::to_string(l);
        visit_ln(p + ".ln1", m.enc[l].ln1);
        visit_attn(p + ".attn", m.enc[l].attn);
        visit_ln(p + ".ln2", m.enc[l].ln2);
        visit_ff(p + ".ff", m.enc[l].ff);
    }
    visit_ln("enc_final", m.enc_final);
    for (std::size_t l = 0; l < m.dec.size(); ++l) {
        std::string p = "dec." + std::to_string(l);
        visit_ln(p + ".ln1", m.dec[l].ln1);
        visit_attn(p + ".self_attn", m.dec[l].self_attn);
        visit_ln(p + ".ln2", m.dec[l].ln2);
        visit_attn(p + ".cross_attn", m.dec[l].cross_attn);
        visit_ln(p + ".ln3", m.dec[l].ln3);
        visit_ff(p + ".ff", m.dec[l].ff);
    }
    visit_ln("dec_final", m.dec_final);
}

// Lockstep visit of two models with identical shape (model + gradients).
template <typename ModelT, typename F>
void visit_params_pair(ModelT& a, ModelT& b, F&& f) {
    std::vector<std::pair<Eigen::MatrixXd*, Eigen::VectorXd*>> lhs, rhs;
    auto collect = [](auto& v) {
        return [&v](const std::string&, auto& t) {
            if constexpr (std::is_same_v<std::decay_t<decltype(t)>, Eigen::MatrixXd>)
                v.push_back({&t, nullptr});
            else
                v.push_back({nullptr, &t});
        };
    };
    visit_params(a, collect(lhs));
    visit_params(b, collect(rhs));
    for (std::size_t k = 0; k < lhs.size(); ++k) {
        if (lhs[k].first)
            f(*lhs[k].first, *rhs[k].first);
        else
            f(*lhs[k].second, *rhs[k].second);
    }
}

}  // namespace detail

inline Seq2SeqModel model_init(const ModelConfig& cfg) {
    cfg.validate();
    Seq2SeqModel m;
    m.config = cfg;
    Rng rng = make_rng(cfg.seed, "model-init");
    std::normal_distribution<double> gauss(0.0, 1.0);
    auto randn = [&](int r, int c, double scale) {
        Eigen::MatrixXd w(r, c);
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) w(i, j) = gauss(rng) * scale;
        return w;
    };
    const double proj_scale = 1.0 / std::sqrt(static_cast<double>(cfg.d_model));
    m.embedding = randn(cfg.vocab_size, cfg.d_model, 0.02);
    m.pos_enc = randn(cfg.max_len, cfg.d_model, 0.02);
    m.pos_dec = randn(cfg.max_len, cfg.d_model, 0.02);
    auto init_ln = [&](LayerNormParams& ln) {
        ln.gain = Eigen::VectorXd::Ones(cfg.d_model);
        ln.bias = Eigen::VectorXd::Zero(cfg.d_model);
    };
    auto init_attn = [&](AttentionParams& a) {
        a.wq = randn(cfg.d_model, cfg.d_model, proj_scale);
        a.wk = randn(cfg.d_model, cfg.d_model, proj_scale);
        a.wv = randn(cfg.d_model, cfg.d_model, proj_scale);
        a.wo = randn(cfg.d_model, cfg.d_model, proj_scale);
    };
    auto init_ff = [&](FfParams& ff) {
        ff.w1 = randn(cfg.d_model, cfg.ff_inner, proj_scale);
        ff.w2 = randn(cfg.ff_inner, cfg.d_model, 1.0 / std::sqrt(static_cast<double>(cfg.ff_inner)));
    };
    m.enc.resize(cfg.enc_layers);
    for (auto& l : m.enc) {
        init_ln(l.ln1);
        init_ln(l.ln2);
        init_attn(l.attn);
        init_ff(l.ff);
    }
    m.dec.resize(cfg.dec_layers);
    for (auto& l : m.dec) {
        init_ln(l.ln1);
        init_ln(l.ln2);
        init_ln(l.ln3);
        init_attn(l.self_attn);
        init_attn(l.cross_attn);
        init_ff(l.ff);
    }
    init_ln(m.enc_final);
    init_ln(m.dec_final);
    return m;
}

/// Gradients share the parameter layout with the model itself.
using Seq2SeqGradients = Seq2SeqModel;

inline Seq2SeqGradients zero_gradients(const Seq2SeqModel& m) {
    Seq2SeqGradients g = m;
    detail::visit_params(g, [](const std::string&, auto& t) { t.setZero(); });
    return g;
}

namespace detail {

constexpr double kLnEps = 1e-6;
constexpr double kMaskValue = -1e30;

struct LnCache {
    Eigen::MatrixXd x, xhat;
    Eigen::VectorXd inv_std;
};

inline Eigen::MatrixXd layernorm_forward(const Eigen::MatrixXd& x, const LayerNormParams& p, LnCache& cache) {
    cache.x = x;
    cache.xhat.resizeLike(x);
    cache.inv_std.resize(x.rows());
    Eigen::MatrixXd y(x.rows(), x.cols());
    for (int r = 0; r < x.rows(); ++r) {
        double mu = x.row(r).mean();
        double var = (x.row(r).array() - mu).square().mean();
        double inv = 1.0 / std::sqrt(var + kLnEps);
        cache.inv_std(r) = inv;
        cache.xhat.row(r) = (x.row(r).array() - mu) * inv;
        y.row(r) = cache.xhat.row(r).cwiseProduct(p.gain.transpose()) + p.bias.transpose();
    }
    return y;
}

inline Eigen::MatrixXd layernorm_backward(const Eigen::MatrixXd& dy, const LayerNormParams& p,
                                          const LnCache& cache, LayerNormParams& dp) {
    Eigen::MatrixXd dx(dy.rows(), dy.cols());
    for (int r = 0; r < dy.rows(); ++r) {
        dp.gain += dy.row(r).cwiseProduct(cache.xhat.row(r)).transpose();
        dp.bias += dy.row(r).transpose();
        Eigen::RowVectorXd dxhat = dy.row(r).cwiseProduct(p.gain.transpose());
        double m1 = dxhat.mean();
        double m2 = dxhat.cwiseProduct(cache.xhat.row(r)).mean();
        dx.row(r) = cache.inv_std(r) * (dxhat.array() - m1 - cache.xhat.row(r).array() * m2);
    }
    return dx;
}

struct AttnCache {
    Eigen::MatrixXd xq, xkv;              // inputs
    Eigen::MatrixXd q, k, v;              // Lq x d / Lk x d
    std::vector<Eigen::MatrixXd> probs;   // per head, Lq x Lk
    Eigen::MatrixXd concat;               // Lq x d, heads concatenated, before wo
};

// mask: nullptr or additive Lq x Lk matrix (0 allowed, kMaskValue blocked).
inline Eigen::MatrixXd attention_forward(const Eigen::MatrixXd& xq, const Eigen::MatrixXd& xkv,
                                         const AttentionParams& p, int heads, const Eigen::MatrixXd* mask,
                                         AttnCache& cache) {
    const int d = static_cast<int>(p.wq.rows());
    const int dh = d / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    cache.xq = xq;
    cache.xkv = xkv;
    cache.q = xq * p.wq;
    cache.k = xkv * p.wk;
    cache.v = xkv * p.wv;
    cache.probs.resize(heads);
    cache.concat.resize(xq.rows(), d);

    for (int h = 0; h < heads; ++h) {
        auto qh = cache.q.middleCols(h * dh, dh);
        auto kh = cache.k.middleCols(h * dh, dh);
        auto vh = cache.v.middleCols(h * dh, dh);
        Eigen::MatrixXd scores = qh * kh.transpose() * scale;
        if (mask) scores += *mask;
        Eigen::MatrixXd& probs = cache.probs[h];
        probs.resizeLike(scores);
        for (int r = 0; r < scores.rows(); ++r) {
            double mx = scores.row(r).maxCoeff();
            Eigen::RowVectorXd e = (scores.row(r).array() - mx).exp();
            probs.row(r) = e / e.sum();
        }
        cache.concat.middleCols(h * dh, dh) = probs * vh;
    }
    return cache.concat * p.wo;
}

inline void attention_backward(const Eigen::MatrixXd& dout, const AttentionParams& p, int heads,
                               const AttnCache& cache, AttentionParams& dp, Eigen::MatrixXd& dxq,
                               Eigen::MatrixXd& dxkv) {
    const int d = static_cast<int>(p.wq.rows());
    const int dh = d / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    dp.wo += cache.concat.transpose() * dout;
    Eigen::MatrixXd dconcat = dout * p.wo.transpose();

    Eigen::MatrixXd dq = Eigen::MatrixXd::Zero(cache.q.rows(), d);
    Eigen::MatrixXd dk = Eigen::MatrixXd::Zero(cache.k.rows(), d);
    Eigen::MatrixXd dv = Eigen::MatrixXd::Zero(cache.v.rows(), d);

    for (int h = 0; h < heads; ++h) {
        auto vh = cache.v.middleCols(h * dh, dh);
        const Eigen::MatrixXd& probs = cache.probs[h];
        Eigen::MatrixXd dhead = dconcat.middleCols(h * dh, dh);
        Eigen::MatrixXd dprobs = dhead * vh.transpose();
        dv.middleCols(h * dh, dh) = probs.transpose() * dhead;

        Eigen::MatrixXd dscores(probs.rows(), probs.cols());
        for (int r = 0; r < probs.rows(); ++r) {
            double dot = dprobs.row(r).dot(probs.row(r));
            dscores.row(r) = probs.row(r).cwiseProduct((dprobs.row(r).array() - dot).matrix());
        }
        dq.middleCols(h * dh, dh) = dscores * cache.k.middleCols(h * dh, dh) * scale;
        dk.middleCols(h * dh, dh) = dscores.transpose() * cache.q.middleCols(h * dh, dh) * scale;
    }

    dp.wq += cache.xq.transpose() * dq;
    dp.wk += cache.xkv.transpose() * dk;
    dp.wv += cache.xkv.transpose() * dv;
    dxq += dq * p.wq.transpose();
    dxkv += dk * p.wk.transpose() + dv * p.wv.transpose();
}

struct FfCache {
    Eigen::MatrixXd x, pre, z;  // pre = x w1, z = relu(pre)
};

inline Eigen::MatrixXd ff_forward(const Eigen::MatrixXd& x, const FfParams& p, FfCache& cache) {
    cache.x = x;
    cache.pre = x * p.w1;
    cache.z = cache.pre.cwiseMax(0.0);
    return cache.z * p.w2;
}

inline Eigen::MatrixXd ff_backward(const Eigen::MatrixXd& dout, const FfParams& p, const FfCache& cache,
                                   FfParams& dp) {
    dp.w2 += cache.z.transpose() * dout;
    Eigen::MatrixXd dz = dout * p.w2.transpose();
    Eigen::MatrixXd dpre = dz.cwiseProduct((cache.pre.array() > 0.0).cast<double>().matrix());
    dp.w1 += cache.x.transpose() * dpre;
    return dpre * p.w1.transpose();
}

struct EncLayerCache {
    LnCache ln1, ln2;
    AttnCache attn;
    FfCache ff;
    Eigen::MatrixXd drop1, drop2;  // inverted-dropout masks, empty when inactive
};
struct DecLayerCache {
    LnCache ln1, ln2, ln3;
    AttnCache self_attn, cross_attn;
    FfCache ff;
    Eigen::MatrixXd drop1, drop2, drop3;
};

struct ForwardCache {
    std::vector<int> src, tgt_in;
    Eigen::MatrixXd src_mask;  // additive key-pad mask, 1 x Ls broadcast rows
    std::vector<EncLayerCache> enc;
    LnCache enc_final;
    Eigen::MatrixXd memory;
    std::vector<DecLayerCache> dec;
    LnCache dec_final;
    Eigen::MatrixXd dec_out;  // Lt x d
    Eigen::MatrixXd probs;    // Lt x vocab, row-wise softmax of logits
};

inline Eigen::MatrixXd dropout_mask(int rows, int cols, double p, Rng* rng) {
    Eigen::MatrixXd mask(rows, cols);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double keep = 1.0 - p;
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) mask(r, c) = u(*rng) < keep ? 1.0 / keep : 0.0;
    return mask;
}

// Full teacher-forced forward pass for one (src, tgt_in) pair.
// rng != nullptr enables dropout (training mode).
inline void model_forward(const Seq2SeqModel& m, const std::vector<int>& src, const std::vector<int>& tgt_in,
                          ForwardCache& cache, Rng* rng = nullptr) {
    const ModelConfig& cfg = m.config;
    if (static_cast<int>(src.size()) > cfg.max_len)
        throw error("input length " + std::to_string(src.size()) + " exceeds max_len " +
                    std::to_string(cfg.max_len));
    if (static_cast<int>(tgt_in.size()) > cfg.max_len)
        throw error("target length " + std::to_string(tgt_in.size()) + " exceeds max_len " +
                    std::to_string(cfg.max_len));
    if (src.empty() || tgt_in.empty()) throw error("empty sequence");

    const int ls = static_cast<int>(src.size());
    const int lt = static_cast<int>(tgt_in.size());
    const bool drop = rng != nullptr && cfg.dropout > 0.0;

    cache.src = src;
    cache.tgt_in = tgt_in;

    // Encoder keys at PAD positions are masked out everywhere they serve as keys.
    Eigen::RowVectorXd key_mask = Eigen::RowVectorXd::Zero(ls);
    for (int j = 0; j < ls; ++j)
        if (src[j] == Vocabulary::PAD) key_mask(j) = kMaskValue;
    cache.src_mask = key_mask.replicate(ls, 1);
    Eigen::MatrixXd cross_mask = key_mask.replicate(lt, 1);

    Eigen::MatrixXd x(ls, cfg.d_model);
    for (int t = 0; t < ls; ++t) x.row(t) = m.embedding.row(src[t]) + m.pos_enc.row(t);

    cache.enc.resize(m.enc.size());
    for (std::size_t l = 0; l < m.enc.size(); ++l) {
        auto& lc = cache.enc[l];
        const auto& lp = m.enc[l];
        Eigen::MatrixXd h = layernorm_forward(x, lp.ln1, lc.ln1);
        Eigen::MatrixXd a = attention_forward(h, h, lp.attn, cfg.heads, &cache.src_mask, lc.attn);
        if (drop) {
            lc.drop1 = dropout_mask(ls, cfg.d_model, cfg.dropout, rng);
            a = a.cwiseProduct(lc.drop1);
        }
        x += a;
        Eigen::MatrixXd h2 = layernorm_forward(x, lp.ln2, lc.ln2);
        Eigen::MatrixXd f = ff_forward(h2, lp.ff, lc.ff);
        if (drop) {
            lc.drop2 = dropout_mask(ls, cfg.d_model, cfg.dropout, rng);
            f = f.cwiseProduct(lc.drop2);
        }
        x += f;
    }
    cache.memory = layernorm_forward(x, m.enc_final, cache.enc_final);

    Eigen::MatrixXd causal = Eigen::MatrixXd::Zero(lt, lt);
    for (int r = 0; r < lt; ++r)
        for (int c = r + 1; c < lt; ++c) causal(r, c) = kMaskValue;

    Eigen::MatrixXd y(lt, cfg.d_model);
    for (int t = 0; t < lt; ++t) y.row(t) = m.embedding.row(tgt_in[t]) + m.pos_dec.row(t);

    cache.dec.resize(m.dec.size());
    for (std::size_t l = 0; l < m.dec.size(); ++l) {
        auto& lc = cache.dec[l];
        const auto& lp = m.dec[l];
        Eigen::MatrixXd h = layernorm_forward(y, lp.ln1, lc.ln1);
        Eigen::MatrixXd a = attention_forward(h, h, lp.self_attn, cfg.heads, &causal, lc.self_attn);
        if (drop) {
            lc.drop1 = dropout_mask(lt, cfg.d_model, cfg.dropout, rng);
            a = a.cwiseProduct(lc.drop1);
        }
        y += a;
        Eigen::MatrixXd h2 = layernorm_forward(y, lp.ln2, lc.ln2);
        Eigen::MatrixXd c = attention_forward(h2, cache.memory, lp.cross_attn, cfg.heads, &cross_mask, lc.cross_attn);
        if (drop) {
            lc.drop2 = dropout_mask(lt, cfg.d_model, cfg.dropout, rng);
            c = c.cwiseProduct(lc.drop2);
        }
        y += c;
        Eigen::MatrixXd h3 = layernorm_forward(y, lp.ln3, lc.ln3);
        Eigen::MatrixXd f = ff_forward(h3, lp.ff, lc.ff);
        if (drop) {
            lc.drop3 = dropout_mask(lt, cfg.d_model, cfg.dropout, rng);
            f = f.cwiseProduct(lc.drop3);
        }
        y += f;
    }
    cache.dec_out = layernorm_forward(y, m.dec_final, cache.dec_final);

    // Tied output projection, then row-wise softmax.
    Eigen::MatrixXd logits = cache.dec_out * m.embedding.transpose();
    cache.probs.resizeLike(logits);
    for (int r = 0; r < logits.rows(); ++r) {
        double mx = logits.row(r).maxCoeff();
        Eigen::RowVectorXd e = (logits.row(r).array() - mx).exp();
        cache.probs.row(r) = e / e.sum();
    }
}

// Backprop from dlogits (Lt x vocab) through the whole network.
inline void model_backward(const Seq2SeqModel& m, const ForwardCache& cache, const Eigen::MatrixXd& dlogits,
                           Seq2SeqGradients& g) {
    const ModelConfig& cfg = m.config;
    const int ls = static_cast<int>(cache.src.size());
    const int lt = static_cast<int>(cache.tgt_in.size());

    g.embedding += dlogits.transpose() * cache.dec_out;  // output-projection half of the tie
    Eigen::MatrixXd dy = dlogits * m.embedding;

    dy = detail::layernorm_backward(dy, m.dec_final, cache.dec_final, g.dec_final);
    Eigen::MatrixXd dmemory = Eigen::MatrixXd::Zero(ls, cfg.d_model);

    for (int l = static_cast<int>(m.dec.size()) - 1; l >= 0; --l) {
        const auto& lp = m.dec[l];
        const auto& lc = cache.dec[l];
        auto& gl = g.dec[l];

        Eigen::MatrixXd dbranch = lc.drop3.size() ? dy.cwiseProduct(lc.drop3) : dy;
        Eigen::MatrixXd dh3 = ff_backward(dbranch, lp.ff, lc.ff, gl.ff);
        dy += layernorm_backward(dh3, lp.ln3, lc.ln3, gl.ln3);

        dbranch = lc.drop2.size() ? dy.cwiseProduct(lc.drop2) : dy;
        Eigen::MatrixXd dh2 = Eigen::MatrixXd::Zero(lt, cfg.d_model);
        attention_backward(dbranch, lp.cross_attn, cfg.heads, lc.cross_attn, gl.cross_attn, dh2, dmemory);
        dy += layernorm_backward(dh2, lp.ln2, lc.ln2, gl.ln2);

        dbranch = lc.drop1.size() ? dy.cwiseProduct(lc.drop1) : dy;
        Eigen::MatrixXd dh = Eigen::MatrixXd::Zero(lt, cfg.d_model);
        attention_backward(dbranch, lp.self_attn, cfg.heads, lc.self_attn, gl.self_attn, dh, dh);
        dy += layernorm_backward(dh, lp.ln1, lc.ln1, gl.ln1);
    }
    for (int t = 0; t < lt; ++t) {
        g.embedding.row(cache.tgt_in[t]) += dy.row(t);
        g.pos_dec.row(t) += dy.row(t);
    }

    Eigen::MatrixXd dx = layernorm_backward(dmemory, m.enc_final, cache.enc_final, g.enc_final);
    for (int l = static_cast<int>(m.enc.size()) - 1; l >= 0; --l) {
        const auto& lp = m.enc[l];
        const auto& lc = cache.enc[l];
        auto& gl = g.enc[l];

        Eigen::MatrixXd dbranch = lc.drop2.size() ? dx.cwiseProduct(lc.drop2) : dx;
        Eigen::MatrixXd dh2 = ff_backward(dbranch, lp.ff, lc.ff, gl.ff);
        dx += layernorm_backward(dh2, lp.ln2, lc.ln2, gl.ln2);

        dbranch = lc.drop1.size() ? dx.cwiseProduct(lc.drop1) : dx;
        Eigen::MatrixXd dh = Eigen::MatrixXd::Zero(ls, cfg.d_model);
        attention_backward(dbranch, lp.attn, cfg.heads, lc.attn, gl.attn, dh, dh);
        dx += layernorm_backward(dh, lp.ln1, lc.ln1, gl.ln1);
    }
    for (int t = 0; t < ls; ++t) {
        g.embedding.row(cache.src[t]) += dx.row(t);
        g.pos_enc.row(t) += dx.row(t);
    }
}

}  // namespace detail

/// Next-token distribution: encode `input`, decode `target_prefix` behind a
/// PAD start token, return the softmax at the last position.
inline Eigen::VectorXd forward(const Seq2SeqModel& m, const std::vector<int>& input,
                               const std::vector<int>& target_prefix) {
    std::vector<int> tgt_in;
    tgt_in.push_back(Vocabulary::PAD);  // decoder start token
    tgt_in.insert(tgt_in.end(), target_prefix.begin(), target_prefix.end());
    detail::ForwardCache cache;
    detail::model_forward(m, input, tgt_in, cache);
    return cache.probs.row(cache.probs.rows() - 1).transpose();
}

struct TrainPair {
    std::vector<int> prompt;
    std::vector<int> target;  // ends with EOS
};

/// Mean per-token cross entropy over a set of pairs (no dropout).
inline double batch_loss(const Seq2SeqModel& m, const std::vector<TrainPair>& pairs) {
    double loss = 0.0;
    long tokens = 0;
    for (const auto& pr : pairs) {
        std::vector<int> tgt_in;
        tgt_in.push_back(Vocabulary::PAD);
        tgt_in.insert(tgt_in.end(), pr.target.begin(), pr.target.end() - 1);
        detail::ForwardCache cache;
        detail::model_forward(m, pr.prompt, tgt_in, cache);
        for (std::size_t t = 0; t < pr.target.size(); ++t)
            loss -= std::log(std::max(cache.probs(static_cast<int>(t), pr.target[t]), 1e-300));
        tokens += static_cast<long>(pr.target.size());
    }
    return tokens > 0 ? loss / tokens : 0.0;
}

/// Gradients of batch_loss at the current parameters (no dropout).
inline Seq2SeqGradients batch_gradients(const Seq2SeqModel& m, const std::vector<TrainPair>& pairs,
                                        double* loss_out = nullptr, Rng* dropout_rng = nullptr) {
    Seq2SeqGradients g = zero_gradients(m);
    long tokens = 0;
    for (const auto& pr : pairs) tokens += static_cast<long>(pr.target.size());
    double loss = 0.0;
    for (const auto& pr : pairs) {
        std::vector<int> tgt_in;
        tgt_in.push_back(Vocabulary::PAD);
        tgt_in.insert(tgt_in.end(), pr.target.begin(), pr.target.end() - 1);
        detail::ForwardCache cache;
        detail::model_forward(m, pr.prompt, tgt_in, cache, dropout_rng);
        Eigen::MatrixXd dlogits = cache.probs / static_cast<double>(tokens);
        for (std::size_t t = 0; t < pr.target.size(); ++t) {
            loss -= std::log(std::max(cache.probs(static_cast<int>(t), pr.target[t]), 1e-300));
            dlogits(static_cast<int>(t), pr.target[t]) -= 1.0 / static_cast<double>(tokens);
        }
        detail::model_backward(m, cache, dlogits, g);
    }
    if (loss_out) *loss_out = tokens > 0 ? loss / tokens : 0.0;
    return g;
}

struct TrainConfig {
    double lr = 0.5;
    int batch = 64;
    int epochs = 8;
    std::uint64_t seed = 42;
};

/// Teacher-forced SGD; returns the per-epoch mean loss curve.
inline std::vector<double> train(Seq2SeqModel& m, const std::vector<TrainPair>& pairs, const TrainConfig& cfg) {
    std::vector<double> curve;
    Rng shuffle_rng = make_rng(cfg.seed, "train-shuffle");
    Rng dropout_rng = make_rng(cfg.seed, "train-dropout");
    std::vector<int> order(pairs.size());
    for (std::size_t k = 0; k < pairs.size(); ++k) order[k] = static_cast<int>(k);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double epoch_loss = 0.0;
        long epoch_tokens = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
            std::vector<TrainPair> batch;
            for (std::size_t k = start; k < std::min(order.size(), start + cfg.batch); ++k)
                batch.push_back(pairs[order[k]]);
            double loss = 0.0;
            Rng* drop = m.config.dropout > 0.0 ? &dropout_rng : nullptr;
            Seq2SeqGradients g = batch_gradients(m, batch, &loss, drop);
            if (!std::isfinite(loss))
                throw error("train: non-finite loss at epoch " + std::to_string(epoch));
            detail::visit_params_pair(m, g, [&](auto& t, auto& gt) { t -= cfg.lr * gt; });
            long batch_tokens = 0;
            for (const auto& pr : batch) batch_tokens += static_cast<long>(pr.target.size());
            epoch_loss += loss * batch_tokens;
            epoch_tokens += batch_tokens;
        }
        curve.push_back(epoch_tokens > 0 ? epoch_loss / epoch_tokens : 0.0);
    }
    return curve;
}

enum class ParamAccounting { Actual, T5Compatible };

/// Closed-form parameter count for a configuration.
inline long long param_count(const ModelConfig& cfg, ParamAccounting mode) {
    const long long v = cfg.vocab_size, d = cfg.d_model, w = cfg.ff_inner;
    const long long e = cfg.enc_layers, dl = cfg.dec_layers, h = cfg.heads;
    if (mode == ParamAccounting::Actual) {
        long long per_enc = 4 * d * d + 2 * d * w + 2 * 2 * d;
        long long per_dec = 8 * d * d + 2 * d * w + 3 * 2 * d;
        return v * d + 2 * cfg.max_len * d + e * per_enc + dl * per_dec + 2 * 2 * d;
    }
    // Reference pretrained shape: RMS-norm scales only, relative-position bias
    // (32 buckets per head) in the first layer of each stack, no absolute
    // positions, no biases.
    long long per_enc = 4 * d * d + 2 * d * w + 2 * d;
    long long per_dec = 8 * d * d + 2 * d * w + 3 * d;
    return v * d + e * per_enc + dl * per_dec + 2 * 32 * h + 2 * d;
}

/// Count of an instantiated model's tensors; matches Actual mode exactly.
inline long long param_count(const Seq2SeqModel& m) {
    long long total = 0;
    detail::visit_params(const_cast<Seq2SeqModel&>(m),
                         [&](const std::string&, auto& t) { total += static_cast<long long>(t.size()); });
    return total;
}

/// Text checkpoint: config header, then every tensor in visit order, values
/// printed at full double precision.
inline void save_checkpoint(const Seq2SeqModel& m, const std::string& path, const std::string& config_hash = "") {
    std::ofstream out(path);
    if (!out) throw error("cannot write " + path);
    out.precision(17);
    const ModelConfig& c = m.config;
    out << "lightrec-checkpoint 1\n";
    out << "config " << c.d_model << ' ' << c.ff_inner << ' ' << c.enc_layers << ' ' << c.dec_layers << ' '
        << c.heads << ' ' << c.vocab_size << ' ' << c.max_len << ' ' << c.dropout << ' ' << c.seed << '\n';
    if (!config_hash.empty()) out << "config_hash " << config_hash << '\n';
    detail::visit_params(const_cast<Seq2SeqModel&>(m), [&](const std::string& name, auto& t) {
        out << "tensor " << name << ' ' << t.rows() << ' ' << t.cols() << '\n';
        for (int r = 0; r < t.rows(); ++r) {
            for (int cc = 0; cc < t.cols(); ++cc) {
                if (cc) out << ' ';
                out << t(r, cc);
            }
            out << '\n';
        }
    });
}

inline Seq2SeqModel load_checkpoint(const std::string& path, std::string* config_hash = nullptr) {
    std::ifstream in(path);
    if (!in) throw error("missing checkpoint file: " + path);
    std::string magic;
    int version = 0;
    in >> magic >> version;
    if (magic != "lightrec-checkpoint" || version != 1) throw error("not a checkpoint file: " + path);
    std::string key;
    in >> key;
    if (key != "config") throw error("malformed checkpoint: " + path);
    ModelConfig c;
    in >> c.d_model >> c.ff_inner >> c.enc_layers >> c.dec_layers >> c.heads >> c.vocab_size >> c.max_len >>
        c.dropout >> c.seed;
    Seq2SeqModel m = model_init(c);
    in >> key;
    if (key == "config_hash") {
        std::string h;
        in >> h;
        if (config_hash) *config_hash = h;
        in >> key;
    }
    detail::visit_params(m, [&](const std::string& name, auto& t) {
        if (key != "tensor") throw error("malformed checkpoint near tensor " + name);
        std::string tname;
        long rows, cols;
        in >> tname >> rows >> cols;
        if (tname != name || rows != t.rows() || cols != t.cols())
            throw error("checkpoint tensor mismatch: expected " + name + ", got " + tname);
        for (int r = 0; r < t.rows(); ++r)
            for (int cc = 0; cc < t.cols(); ++cc) in >> t(r, cc);
        if (!(in >> key)) key = "";
    });
    return m;
}

}  // namespace lightrec
