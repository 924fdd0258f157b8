#include "vcrg/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "binio.hpp"

namespace vcrg {

namespace {

constexpr double kLnEps = 1e-5;
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double gelu_fn(double x) { return 0.5 * x * std::erfc(-x * kInvSqrt2); }

double gelu_grad(double x) {
    double cdf = 0.5 * std::erfc(-x * kInvSqrt2);
    double pdf = std::exp(-0.5 * x * x) * kInvSqrt2Pi;
    return cdf + x * pdf;
}

// y = x w + b; x: R x I, w: I x O.
template <typename T>
void linear(const Mat<T>& x, const Mat<T>& w, const std::vector<T>& b, Mat<T>& y) {
    y = Mat<T>(x.rows, w.cols);
    for (std::size_t r = 0; r < x.rows; ++r) {
        T* dst = y.row(r);
        if (!b.empty())
            for (std::size_t o = 0; o < w.cols; ++o) dst[o] = b[o];
        const T* src = x.row(r);
        for (std::size_t i = 0; i < x.cols; ++i) {
            T a = src[i];
            if (a == T(0)) continue;
            const T* wrow = w.row(i);
            for (std::size_t o = 0; o < w.cols; ++o) dst[o] += a * wrow[o];
        }
    }
}

// dw += x^T dy.
template <typename T>
void acc_at_b(const Mat<T>& x, const Mat<T>& dy, Mat<T>& dw) {
    for (std::size_t r = 0; r < x.rows; ++r) {
        const T* xr = x.row(r);
        const T* dyr = dy.row(r);
        for (std::size_t i = 0; i < x.cols; ++i) {
            T a = xr[i];
            if (a == T(0)) continue;
            T* dwr = dw.row(i);
            for (std::size_t o = 0; o < dy.cols; ++o) dwr[o] += a * dyr[o];
        }
    }
}

// dx += dy w^T.
template <typename T>
void acc_a_bt(const Mat<T>& dy, const Mat<T>& w, Mat<T>& dx) {
    for (std::size_t r = 0; r < dy.rows; ++r) {
        const T* dyr = dy.row(r);
        T* dxr = dx.row(r);
        for (std::size_t i = 0; i < w.rows; ++i) {
            const T* wr = w.row(i);
            T acc = T(0);
            for (std::size_t o = 0; o < w.cols; ++o) acc += dyr[o] * wr[o];
            dxr[i] += acc;
        }
    }
}

template <typename T>
void acc_colsum(const Mat<T>& dy, std::vector<T>& db) {
    for (std::size_t r = 0; r < dy.rows; ++r) {
        const T* dyr = dy.row(r);
        for (std::size_t o = 0; o < dy.cols; ++o) db[o] += dyr[o];
    }
}

template <typename T>
void ln_forward_row(const T* x, std::size_t d, const T* g, const T* b, T* y, T& mean_out,
                    T& inv_out) {
    T mu = T(0);
    for (std::size_t j = 0; j < d; ++j) mu += x[j];
    mu /= static_cast<T>(d);
    T var = T(0);
    for (std::size_t j = 0; j < d; ++j) {
        T diff = x[j] - mu;
        var += diff * diff;
    }
    var /= static_cast<T>(d);
    T inv = T(1) / std::sqrt(var + static_cast<T>(kLnEps));
    for (std::size_t j = 0; j < d; ++j) y[j] = (x[j] - mu) * inv * g[j] + b[j];
    mean_out = mu;
    inv_out = inv;
}

// dx += backward of y = xhat*g + b; dg/dbias accumulate.
template <typename T>
void ln_backward_row(const T* x, const T* dy, std::size_t d, const T* g, T mean, T inv, T* dx,
                     T* dg, T* dbias) {
    T mean_dxhat = T(0), mean_dxhat_xhat = T(0);
    for (std::size_t j = 0; j < d; ++j) {
        T xhat = (x[j] - mean) * inv;
        T dxhat = dy[j] * g[j];
        dg[j] += dy[j] * xhat;
        dbias[j] += dy[j];
        mean_dxhat += dxhat;
        mean_dxhat_xhat += dxhat * xhat;
    }
    mean_dxhat /= static_cast<T>(d);
    mean_dxhat_xhat /= static_cast<T>(d);
    for (std::size_t j = 0; j < d; ++j) {
        T xhat = (x[j] - mean) * inv;
        T dxhat = dy[j] * g[j];
        dx[j] += inv * (dxhat - mean_dxhat - xhat * mean_dxhat_xhat);
    }
}

template <typename T>
struct LayerCache {
    Mat<T> input;
    std::vector<T> ln1_mean, ln1_inv, ln2_mean, ln2_inv;
    Mat<T> ln1_out;
    Mat<T> q, k, v;
    std::vector<Mat<T>> probs;  // one R x R matrix per head
    Mat<T> concat;
    Mat<T> after_attn;
    Mat<T> ln2_out;
    Mat<T> ffn_pre, ffn_act;
};

template <typename T>
struct SampleCache {
    Mat<T> tokens;
    std::vector<std::uint8_t> mask;
    std::vector<std::size_t> valid;
    Mat<T> embed;
    std::vector<LayerCache<T>> layers;
    Mat<T> encoded;
    std::vector<T> read_scores;
    std::vector<T> pooled;
    std::vector<T> logits;
};

// Multi-head attention core: fills probs (zero rows for masked queries, zero
// columns for masked keys) and concat, returns concat * wo.
template <typename T>
Mat<T> mha_core(const Mat<T>& a, const Mat<T>& wq, const Mat<T>& wk, const Mat<T>& wv,
                const Mat<T>& wo, std::size_t heads, const std::vector<std::size_t>& valid,
                Mat<T>& q, Mat<T>& k, Mat<T>& v, std::vector<Mat<T>>& probs, Mat<T>& concat) {
    std::size_t rows = a.rows, width = wq.cols;
    std::size_t dh = width / heads;
    T inv_sqrt = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));

    linear(a, wq, {}, q);
    linear(a, wk, {}, k);
    linear(a, wv, {}, v);

    probs.assign(heads, Mat<T>(rows, rows));
    concat = Mat<T>(rows, width);
    std::vector<T> logits(rows);
    for (std::size_t h = 0; h < heads; ++h) {
        std::size_t off = h * dh;
        Mat<T>& p = probs[h];
        for (std::size_t i : valid) {
            const T* qi = q.row(i) + off;
            T best = std::numeric_limits<T>::lowest();
            for (std::size_t j : valid) {
                const T* kj = k.row(j) + off;
                T acc = T(0);
                for (std::size_t t = 0; t < dh; ++t) acc += qi[t] * kj[t];
                acc *= inv_sqrt;
                logits[j] = acc;
                best = std::max(best, acc);
            }
            T denom = T(0);
            for (std::size_t j : valid) {
                T e = std::exp(logits[j] - best);
                p(i, j) = e;
                denom += e;
            }
            T inv_denom = T(1) / denom;
            T* ci = concat.row(i) + off;
            for (std::size_t j : valid) {
                T w = p(i, j) * inv_denom;
                p(i, j) = w;
                const T* vj = v.row(j) + off;
                for (std::size_t t = 0; t < dh; ++t) ci[t] += w * vj[t];
            }
        }
    }
    Mat<T> out;
    linear(concat, wo, {}, out);
    // A fully masked query row never enters `valid`, so its probs row, concat
    // row, and therefore its output row are exactly zero.
    return out;
}

template <typename T>
Mat<T> layer_forward(const LayerParams<T>& lp, std::size_t heads, const Mat<T>& h_in,
                     const std::vector<std::size_t>& valid, LayerCache<T>& lc) {
    std::size_t rows = h_in.rows, width = h_in.cols;
    lc.input = h_in;

    lc.ln1_out = Mat<T>(rows, width);
    lc.ln1_mean.resize(rows);
    lc.ln1_inv.resize(rows);
    for (std::size_t r = 0; r < rows; ++r)
        ln_forward_row(h_in.row(r), width, lp.ln1_g.data(), lp.ln1_b.data(), lc.ln1_out.row(r),
                       lc.ln1_mean[r], lc.ln1_inv[r]);

    Mat<T> attn = mha_core(lc.ln1_out, lp.wq, lp.wk, lp.wv, lp.wo, heads, valid, lc.q, lc.k, lc.v,
                           lc.probs, lc.concat);

    lc.after_attn = Mat<T>(rows, width);
    for (std::size_t i = 0; i < h_in.size(); ++i) lc.after_attn.v[i] = h_in.v[i] + attn.v[i];

    lc.ln2_out = Mat<T>(rows, width);
    lc.ln2_mean.resize(rows);
    lc.ln2_inv.resize(rows);
    for (std::size_t r = 0; r < rows; ++r)
        ln_forward_row(lc.after_attn.row(r), width, lp.ln2_g.data(), lp.ln2_b.data(),
                       lc.ln2_out.row(r), lc.ln2_mean[r], lc.ln2_inv[r]);

    linear(lc.ln2_out, lp.w1, lp.b1, lc.ffn_pre);
    lc.ffn_act = Mat<T>(rows, lc.ffn_pre.cols);
    for (std::size_t i = 0; i < lc.ffn_pre.size(); ++i)
        lc.ffn_act.v[i] = static_cast<T>(gelu_fn(static_cast<double>(lc.ffn_pre.v[i])));

    Mat<T> ffn_out;
    linear(lc.ffn_act, lp.w2, lp.b2, ffn_out);
    Mat<T> out(rows, width);
    for (std::size_t i = 0; i < out.size(); ++i) out.v[i] = lc.after_attn.v[i] + ffn_out.v[i];
    return out;
}

template <typename T>
void forward_sample(const ModelParams<T>& params, const Mat<T>& tokens,
                    const std::vector<std::uint8_t>& mask, SampleCache<T>& sc) {
    const ModelConfig& cfg = params.cfg;
    if (tokens.cols != cfg.token_dim)
        throw ValidationError("encoder: token dimension " + std::to_string(tokens.cols) +
                              " does not match configured " + std::to_string(cfg.token_dim));
    if (mask.size() != tokens.rows) throw ValidationError("encoder: mask length mismatch");

    sc.tokens = tokens;
    sc.mask = mask;
    sc.valid.clear();
    for (std::size_t r = 0; r < mask.size(); ++r)
        if (mask[r]) sc.valid.push_back(r);
    if (sc.valid.empty()) throw ValidationError("encoder: every token row is masked");

    linear(tokens, params.w_in, params.b_in, sc.embed);
    sc.layers.resize(cfg.layers);
    Mat<T> h = sc.embed;
    for (std::size_t l = 0; l < cfg.layers; ++l)
        h = layer_forward(params.layers[l], cfg.heads, h, sc.valid, sc.layers[l]);
    sc.encoded = std::move(h);

    std::size_t width = cfg.width;
    sc.pooled.assign(width, T(0));
    sc.read_scores.assign(tokens.rows, T(0));
    switch (cfg.readout) {
        case Readout::mean: {
            for (std::size_t i : sc.valid) {
                const T* row = sc.encoded.row(i);
                for (std::size_t j = 0; j < width; ++j) sc.pooled[j] += row[j];
            }
            T inv = T(1) / static_cast<T>(sc.valid.size());
            for (std::size_t j = 0; j < width; ++j) sc.pooled[j] *= inv;
            break;
        }
        case Readout::sum: {
            for (std::size_t i : sc.valid) {
                const T* row = sc.encoded.row(i);
                for (std::size_t j = 0; j < width; ++j) sc.pooled[j] += row[j];
            }
            break;
        }
        case Readout::attention: {
            T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(width)));
            T best = std::numeric_limits<T>::lowest();
            for (std::size_t i : sc.valid) {
                const T* row = sc.encoded.row(i);
                T acc = T(0);
                for (std::size_t j = 0; j < width; ++j) acc += params.readout_q[j] * row[j];
                sc.read_scores[i] = acc * scale;
                best = std::max(best, sc.read_scores[i]);
            }
            T denom = T(0);
            for (std::size_t i : sc.valid) {
                sc.read_scores[i] = std::exp(sc.read_scores[i] - best);
                denom += sc.read_scores[i];
            }
            T inv = T(1) / denom;
            for (std::size_t i : sc.valid) {
                sc.read_scores[i] *= inv;
                const T* row = sc.encoded.row(i);
                for (std::size_t j = 0; j < width; ++j) sc.pooled[j] += sc.read_scores[i] * row[j];
            }
            break;
        }
    }

    sc.logits.assign(cfg.classes, T(0));
    for (std::size_t j = 0; j < cfg.classes; ++j) sc.logits[j] = params.b_cls[j];
    for (std::size_t dd = 0; dd < width; ++dd) {
        T a = sc.pooled[dd];
        if (a == T(0)) continue;
        const T* wrow = params.w_cls.row(dd);
        for (std::size_t j = 0; j < cfg.classes; ++j) sc.logits[j] += a * wrow[j];
    }
}

template <typename T>
Mat<T> layer_backward(const LayerParams<T>& lp, std::size_t heads, const LayerCache<T>& lc,
                      const Mat<T>& d_out, const std::vector<std::size_t>& valid,
                      LayerParams<T>& gl) {
    std::size_t rows = lc.input.rows, width = lc.input.cols;
    std::size_t dh = width / heads;
    T inv_sqrt = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));

    // FFN branch: out = after_attn + w2(gelu(w1 ln2(after_attn) + b1)) + b2.
    Mat<T> d_after = d_out;
    acc_colsum(d_out, gl.b2);
    acc_at_b(lc.ffn_act, d_out, gl.w2);
    Mat<T> d_act(rows, lc.ffn_act.cols);
    acc_a_bt(d_out, lp.w2, d_act);
    Mat<T> d_pre(rows, lc.ffn_pre.cols);
    for (std::size_t i = 0; i < d_pre.size(); ++i)
        d_pre.v[i] = d_act.v[i] * static_cast<T>(gelu_grad(static_cast<double>(lc.ffn_pre.v[i])));
    acc_colsum(d_pre, gl.b1);
    acc_at_b(lc.ln2_out, d_pre, gl.w1);
    Mat<T> d_ln2(rows, width);
    acc_a_bt(d_pre, lp.w1, d_ln2);
    for (std::size_t r = 0; r < rows; ++r)
        ln_backward_row(lc.after_attn.row(r), d_ln2.row(r), width, lp.ln2_g.data(), lc.ln2_mean[r],
                        lc.ln2_inv[r], d_after.row(r), gl.ln2_g.data(), gl.ln2_b.data());

    // Attention branch: after_attn = input + wo(concat(heads)).
    Mat<T> d_in = d_after;
    acc_at_b(lc.concat, d_after, gl.wo);
    Mat<T> d_concat(rows, width);
    acc_a_bt(d_after, lp.wo, d_concat);

    Mat<T> d_q(rows, width), d_k(rows, width), d_v(rows, width);
    std::vector<T> d_s(rows);
    for (std::size_t h = 0; h < heads; ++h) {
        std::size_t off = h * dh;
        const Mat<T>& p = lc.probs[h];
        for (std::size_t i : valid) {
            const T* dci = d_concat.row(i) + off;
            // d_probs(i,j) = dot(d_concat_i, v_j); v grad via probs.
            T dot_pd = T(0);
            for (std::size_t j : valid) {
                const T* vj = lc.v.row(j) + off;
                T dp = T(0);
                for (std::size_t t = 0; t < dh; ++t) dp += dci[t] * vj[t];
                T* dvj = d_v.row(j) + off;
                T w = p(i, j);
                for (std::size_t t = 0; t < dh; ++t) dvj[t] += w * dci[t];
                d_s[j] = dp;
                dot_pd += w * dp;
            }
            // Softmax backward restricted to valid keys.
            for (std::size_t j : valid) d_s[j] = p(i, j) * (d_s[j] - dot_pd);
            T* dqi = d_q.row(i) + off;
            const T* qi = lc.q.row(i) + off;
            for (std::size_t j : valid) {
                T ds = d_s[j] * inv_sqrt;
                const T* kj = lc.k.row(j) + off;
                T* dkj = d_k.row(j) + off;
                for (std::size_t t = 0; t < dh; ++t) {
                    dqi[t] += ds * kj[t];
                    dkj[t] += ds * qi[t];
                }
            }
        }
    }

    acc_at_b(lc.ln1_out, d_q, gl.wq);
    acc_at_b(lc.ln1_out, d_k, gl.wk);
    acc_at_b(lc.ln1_out, d_v, gl.wv);
    Mat<T> d_ln1(rows, width);
    acc_a_bt(d_q, lp.wq, d_ln1);
    acc_a_bt(d_k, lp.wk, d_ln1);
    acc_a_bt(d_v, lp.wv, d_ln1);
    for (std::size_t r = 0; r < rows; ++r)
        ln_backward_row(lc.input.row(r), d_ln1.row(r), width, lp.ln1_g.data(), lc.ln1_mean[r],
                        lc.ln1_inv[r], d_in.row(r), gl.ln1_g.data(), gl.ln1_b.data());
    return d_in;
}

template <typename T>
void backward_sample(const ModelParams<T>& params, const SampleCache<T>& sc,
                     const std::vector<T>& d_logits, ModelParams<T>& grads) {
    const ModelConfig& cfg = params.cfg;
    std::size_t width = cfg.width;

    std::vector<T> d_pooled(width, T(0));
    for (std::size_t dd = 0; dd < width; ++dd) {
        T* gw = grads.w_cls.row(dd);
        const T* wrow = params.w_cls.row(dd);
        T p = sc.pooled[dd];
        T acc = T(0);
        for (std::size_t j = 0; j < cfg.classes; ++j) {
            gw[j] += p * d_logits[j];
            acc += wrow[j] * d_logits[j];
        }
        d_pooled[dd] = acc;
    }
    for (std::size_t j = 0; j < cfg.classes; ++j) grads.b_cls[j] += d_logits[j];

    Mat<T> d_h(sc.encoded.rows, width);
    switch (cfg.readout) {
        case Readout::mean: {
            T inv = T(1) / static_cast<T>(sc.valid.size());
            for (std::size_t i : sc.valid) {
                T* row = d_h.row(i);
                for (std::size_t j = 0; j < width; ++j) row[j] += d_pooled[j] * inv;
            }
            break;
        }
        case Readout::sum: {
            for (std::size_t i : sc.valid) {
                T* row = d_h.row(i);
                for (std::size_t j = 0; j < width; ++j) row[j] += d_pooled[j];
            }
            break;
        }
        case Readout::attention: {
            T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(width)));
            std::vector<T> d_a(sc.encoded.rows, T(0));
            T dot = T(0);
            for (std::size_t i : sc.valid) {
                const T* row = sc.encoded.row(i);
                T acc = T(0);
                for (std::size_t j = 0; j < width; ++j) acc += d_pooled[j] * row[j];
                d_a[i] = acc;
                dot += sc.read_scores[i] * acc;
            }
            for (std::size_t i : sc.valid) {
                T ds = sc.read_scores[i] * (d_a[i] - dot);  // grad of pre-softmax score
                const T* row = sc.encoded.row(i);
                T* drow = d_h.row(i);
                for (std::size_t j = 0; j < width; ++j) {
                    grads.readout_q[j] += ds * row[j] * scale;
                    drow[j] += sc.read_scores[i] * d_pooled[j] + ds * params.readout_q[j] * scale;
                }
            }
            break;
        }
    }

    for (std::size_t l = cfg.layers; l-- > 0;)
        d_h = layer_backward(params.layers[l], cfg.heads, sc.layers[l], d_h, sc.valid,
                             grads.layers[l]);

    acc_at_b(sc.tokens, d_h, grads.w_in);
    acc_colsum(d_h, grads.b_in);
}

template <typename T>
Mat<T> tokens_to_mat(const TokenList& list) {
    Mat<T> m(list.t.rows, list.t.cols);
    for (std::size_t i = 0; i < m.size(); ++i) m.v[i] = static_cast<T>(list.t.v[i]);
    return m;
}

/// Cross-entropy from logits; fills d_logits with softmax - onehot.
template <typename T>
double cross_entropy(const std::vector<T>& logits, std::int32_t label, std::vector<T>* d_logits) {
    std::size_t c = logits.size();
    if (label < 0 || static_cast<std::size_t>(label) >= c)
        throw ValidationError("loss: label " + std::to_string(label) + " out of range for " +
                              std::to_string(c) + " classes");
    double best = -std::numeric_limits<double>::infinity();
    for (T z : logits) best = std::max(best, static_cast<double>(z));
    double denom = 0.0;
    for (T z : logits) denom += std::exp(static_cast<double>(z) - best);
    double lse = best + std::log(denom);
    if (d_logits) {
        d_logits->assign(c, T(0));
        for (std::size_t j = 0; j < c; ++j)
            (*d_logits)[j] =
                static_cast<T>(std::exp(static_cast<double>(logits[j]) - best) / denom);
        (*d_logits)[static_cast<std::size_t>(label)] -= T(1);
    }
    return lse - static_cast<double>(logits[static_cast<std::size_t>(label)]);
}

}  // namespace

Readout readout_from_string(const std::string& s) {
    if (s == "mean") return Readout::mean;
    if (s == "sum") return Readout::sum;
    if (s == "attention") return Readout::attention;
    throw ValidationError("unknown readout: " + s);
}

std::string to_string(Readout r) {
    switch (r) {
        case Readout::mean: return "mean";
        case Readout::sum: return "sum";
        case Readout::attention: return "attention";
    }
    return "?";
}

void ModelConfig::validate() const {
    if (width == 0 || heads == 0 || token_dim == 0 || classes == 0)
        throw ValidationError("model config: width, heads, token_dim, and classes must be positive");
    if (width % heads != 0)
        throw ValidationError("model config: width " + std::to_string(width) +
                              " not divisible by heads " + std::to_string(heads));
}

void TrainConfig::validate() const {
    model.validate();
    if (lr < 0.0 || beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0 || adam_eps <= 0.0 ||
        weight_decay < 0.0)
        throw ValidationError("train config: bad optimizer hyperparameters");
    if (batch_size == 0 || epochs == 0)
        throw ValidationError("train config: batch_size and epochs must be positive");
    if (precision != "f32" && precision != "f64")
        throw ValidationError("train config: precision must be f32 or f64");
}

template <typename T>
ModelParams<T> ModelParams<T>::zeros(const ModelConfig& cfg) {
    cfg.validate();
    ModelParams<T> p;
    p.cfg = cfg;
    std::size_t width = cfg.width, hidden = 4 * width;
    p.w_in = Mat<T>(cfg.token_dim, width);
    p.b_in.assign(width, T(0));
    p.layers.resize(cfg.layers);
    for (auto& lp : p.layers) {
        lp.ln1_g.assign(width, T(0));
        lp.ln1_b.assign(width, T(0));
        lp.ln2_g.assign(width, T(0));
        lp.ln2_b.assign(width, T(0));
        lp.wq = Mat<T>(width, width);
        lp.wk = Mat<T>(width, width);
        lp.wv = Mat<T>(width, width);
        lp.wo = Mat<T>(width, width);
        lp.w1 = Mat<T>(width, hidden);
        lp.b1.assign(hidden, T(0));
        lp.w2 = Mat<T>(hidden, width);
        lp.b2.assign(width, T(0));
    }
    if (cfg.readout == Readout::attention) p.readout_q.assign(width, T(0));
    p.w_cls = Mat<T>(width, cfg.classes);
    p.b_cls.assign(cfg.classes, T(0));
    return p;
}

template <typename T>
ModelParams<T> ModelParams<T>::init(const ModelConfig& cfg, std::uint64_t seed) {
    ModelParams<T> p = zeros(cfg);
    Rng rng(splitmix64(seed ^ 0x696e6974ULL));
    auto fan_init = [&](Mat<T>& w) {
        double limit = std::sqrt(6.0 / static_cast<double>(w.rows + w.cols));
        for (auto& x : w.v) x = static_cast<T>((2.0 * rng.unit() - 1.0) * limit);
    };
    fan_init(p.w_in);
    for (auto& lp : p.layers) {
        lp.ln1_g.assign(lp.ln1_g.size(), T(1));
        lp.ln2_g.assign(lp.ln2_g.size(), T(1));
        fan_init(lp.wq);
        fan_init(lp.wk);
        fan_init(lp.wv);
        fan_init(lp.wo);
        fan_init(lp.w1);
        fan_init(lp.w2);
    }
    if (!p.readout_q.empty()) {
        double limit = std::sqrt(6.0 / static_cast<double>(cfg.width + 1));
        for (auto& x : p.readout_q) x = static_cast<T>((2.0 * rng.unit() - 1.0) * limit);
    }
    fan_init(p.w_cls);
    return p;
}

namespace {

template <typename T, typename Self, typename Ref>
std::vector<Ref> collect_blocks(Self& p) {
    std::vector<Ref> out;
    auto add_vec = [&](const std::string& name, auto& v) {
        out.push_back({name, v.data(), v.size(), v.size(), 1});
    };
    auto add_mat = [&](const std::string& name, auto& m) {
        out.push_back({name, m.v.data(), m.size(), m.rows, m.cols});
    };
    add_mat("w_in", p.w_in);
    add_vec("b_in", p.b_in);
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        std::string prefix = "layer" + std::to_string(l) + ".";
        auto& lp = p.layers[l];
        add_vec(prefix + "ln1_g", lp.ln1_g);
        add_vec(prefix + "ln1_b", lp.ln1_b);
        add_mat(prefix + "wq", lp.wq);
        add_mat(prefix + "wk", lp.wk);
        add_mat(prefix + "wv", lp.wv);
        add_mat(prefix + "wo", lp.wo);
        add_vec(prefix + "ln2_g", lp.ln2_g);
        add_vec(prefix + "ln2_b", lp.ln2_b);
        add_mat(prefix + "ffn_w1", lp.w1);
        add_vec(prefix + "ffn_b1", lp.b1);
        add_mat(prefix + "ffn_w2", lp.w2);
        add_vec(prefix + "ffn_b2", lp.b2);
    }
    if (!p.readout_q.empty()) add_vec("readout_q", p.readout_q);
    add_mat("w_cls", p.w_cls);
    add_vec("b_cls", p.b_cls);
    return out;
}

}  // namespace

template <typename T>
std::vector<BlockRef<T>> ModelParams<T>::blocks() {
    return collect_blocks<T, ModelParams<T>, BlockRef<T>>(*this);
}

template <typename T>
std::vector<BlockRef<const T>> ModelParams<T>::blocks() const {
    return collect_blocks<T, const ModelParams<T>, BlockRef<const T>>(*this);
}

template <typename T>
std::size_t ModelParams<T>::num_params() const {
    std::size_t total = 0;
    for (const auto& b : blocks()) total += b.len;
    return total;
}

template <typename T>
void ModelParams<T>::fill_zero() {
    for (auto& b : blocks()) std::fill_n(b.data, b.len, T(0));
}

template <typename T>
Mat<T> attention_forward(const Mat<T>& z, const Mat<T>& wq, const Mat<T>& wk, const Mat<T>& wv,
                         const Mat<T>& wo, std::size_t heads,
                         const std::vector<std::uint8_t>& mask) {
    if (heads == 0 || wq.cols % heads != 0)
        throw ValidationError("attention: width not divisible by head count");
    if (z.cols != wq.rows) throw ValidationError("attention: input width mismatch");
    if (mask.size() != z.rows) throw ValidationError("attention: mask length mismatch");
    std::vector<std::size_t> valid;
    for (std::size_t r = 0; r < mask.size(); ++r)
        if (mask[r]) valid.push_back(r);
    if (valid.empty()) throw ValidationError("attention: every row is masked");
    Mat<T> q, k, v, concat;
    std::vector<Mat<T>> probs;
    return mha_core(z, wq, wk, wv, wo, heads, valid, q, k, v, probs, concat);
}

template <typename T>
ForwardResult<T> encoder_forward(const ModelParams<T>& params, const Mat<T>& tokens,
                                 const std::vector<std::uint8_t>& mask) {
    SampleCache<T> sc;
    forward_sample(params, tokens, mask, sc);
    return {sc.logits, sc.pooled};
}

template <typename T>
ForwardResult<T> encoder_forward(const ModelParams<T>& params, const TokenList& list) {
    return encoder_forward(params, tokens_to_mat<T>(list), list.mask);
}

template <typename T>
T loss_and_backward(const ModelParams<T>& params, const std::vector<const TokenList*>& batch,
                    const std::vector<std::int32_t>& labels, ModelParams<T>& grads) {
    if (batch.empty()) throw ValidationError("loss: empty batch");
    if (batch.size() != labels.size()) throw ValidationError("loss: batch/label size mismatch");
    grads.fill_zero();
    double total = 0.0;
    T inv_b = T(1) / static_cast<T>(batch.size());
    SampleCache<T> sc;
    std::vector<T> d_logits;
    for (std::size_t s = 0; s < batch.size(); ++s) {
        forward_sample(params, tokens_to_mat<T>(*batch[s]), batch[s]->mask, sc);
        total += cross_entropy(sc.logits, labels[s], &d_logits);
        for (auto& g : d_logits) g *= inv_b;
        backward_sample(params, sc, d_logits, grads);
    }
    return static_cast<T>(total / static_cast<double>(batch.size()));
}

template <typename T>
T batch_loss(const ModelParams<T>& params, const std::vector<const TokenList*>& batch,
             const std::vector<std::int32_t>& labels) {
    if (batch.empty()) throw ValidationError("loss: empty batch");
    if (batch.size() != labels.size()) throw ValidationError("loss: batch/label size mismatch");
    double total = 0.0;
    SampleCache<T> sc;
    for (std::size_t s = 0; s < batch.size(); ++s) {
        forward_sample(params, tokens_to_mat<T>(*batch[s]), batch[s]->mask, sc);
        total += cross_entropy(sc.logits, labels[s], static_cast<std::vector<T>*>(nullptr));
    }
    return static_cast<T>(total / static_cast<double>(batch.size()));
}

template <typename T>
Adam<T>::Adam(const TrainConfig& cfg, ModelParams<T>& params)
    : lr_(cfg.lr), b1_(cfg.beta1), b2_(cfg.beta2), eps_(cfg.adam_eps), wd_(cfg.weight_decay) {
    for (const auto& b : params.blocks()) {
        m_.emplace_back(b.len, 0.0);
        v_.emplace_back(b.len, 0.0);
    }
}

template <typename T>
void Adam<T>::step(ModelParams<T>& params, ModelParams<T>& grads) {
    ++t_;
    double bc1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    auto pb = params.blocks();
    auto gb = grads.blocks();
    for (std::size_t i = 0; i < pb.size(); ++i) {
        std::vector<double>& m = m_[i];
        std::vector<double>& v = v_[i];
        T* p = pb[i].data;
        const T* g = gb[i].data;
        for (std::size_t j = 0; j < pb[i].len; ++j) {
            double gj = static_cast<double>(g[j]);
            m[j] = b1_ * m[j] + (1.0 - b1_) * gj;
            v[j] = b2_ * v[j] + (1.0 - b2_) * gj * gj;
            double mhat = m[j] / bc1;
            double vhat = v[j] / bc2;
            double pj = static_cast<double>(p[j]);
            pj -= lr_ * (mhat / (std::sqrt(vhat) + eps_)) + lr_ * wd_ * pj;
            p[j] = static_cast<T>(pj);
        }
    }
}

std::string metrics_to_jsonl(const std::vector<EpochMetrics>& metrics) {
    std::string out;
    char buf[256];
    for (const auto& m : metrics) {
        std::snprintf(buf, sizeof buf,
                      "{\"epoch\": %zu, \"train_loss\": %.17g, \"val_acc\": %.17g, "
                      "\"test_acc\": %.17g}\n",
                      m.epoch, m.train_loss, m.val_acc, m.test_acc);
        out += buf;
    }
    return out;
}

template <typename T>
double evaluate_accuracy(const ModelParams<T>& params, const TokenStore& store,
                         const LabelVector& labels, const std::vector<NodeId>& ids) {
    if (ids.empty()) return 0.0;
    std::size_t correct = 0;
    SampleCache<T> sc;
    for (NodeId id : ids) {
        if (id >= store.lists.size()) throw ValidationError("evaluate: node id out of range");
        if (id >= labels.y.size() || labels.y[id] < 0)
            throw ValidationError("evaluate: node " + std::to_string(id) + " has no label");
        forward_sample(params, tokens_to_mat<T>(store.lists[id]), store.lists[id].mask, sc);
        std::size_t arg = 0;
        for (std::size_t j = 1; j < sc.logits.size(); ++j)
            if (sc.logits[j] > sc.logits[arg]) arg = j;
        if (static_cast<std::int32_t>(arg) == labels.y[id]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(ids.size());
}

namespace {

template <typename T>
TrainResult train_impl(const TokenStore& store, const LabelVector& labels, const Splits& splits,
                       TrainConfig cfg) {
    std::size_t n = store.lists.size();
    if (labels.y.size() != n)
        throw ValidationError("train: labels cover " + std::to_string(labels.y.size()) +
                              " nodes, store holds " + std::to_string(n));
    validate_splits(splits, n);
    if (splits.train.empty()) throw ValidationError("train: empty train split");

    if (cfg.model.token_dim == 0) cfg.model.token_dim = store.header.d + 1;
    if (cfg.model.token_dim != store.header.d + 1)
        throw ValidationError("train: configured token_dim " + std::to_string(cfg.model.token_dim) +
                              " does not match store dimension " +
                              std::to_string(store.header.d + 1));
    if (cfg.model.classes == 0) cfg.model.classes = static_cast<std::size_t>(labels.num_classes);
    cfg.validate();

    ModelParams<T> params =
        ModelParams<T>::init(cfg.model, splitmix64(cfg.seed ^ 0x6d6f64656cULL));
    ModelParams<T> grads = ModelParams<T>::zeros(cfg.model);
    Adam<T> opt(cfg, params);
    Rng root(splitmix64(cfg.seed ^ 0x747261696eULL));

    TrainResult result;
    ModelParams<T> best = params;
    bool have_val = !splits.val.empty();

    std::vector<NodeId> order = splits.train;
    std::vector<const TokenList*> batch;
    std::vector<std::int32_t> batch_labels;
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        Rng rng(root.fork(epoch));
        rng.shuffle(order);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            std::size_t end = std::min(order.size(), start + cfg.batch_size);
            batch.clear();
            batch_labels.clear();
            for (std::size_t i = start; i < end; ++i) {
                NodeId id = order[i];
                batch.push_back(&store.lists[id]);
                batch_labels.push_back(labels.y[id]);
            }
            T loss = loss_and_backward(params, batch, batch_labels, grads);
            opt.step(params, grads);
            loss_sum += static_cast<double>(loss) * static_cast<double>(end - start);
        }

        EpochMetrics em;
        em.epoch = epoch;
        em.train_loss = loss_sum / static_cast<double>(order.size());
        em.val_acc = have_val ? evaluate_accuracy(params, store, labels, splits.val) : 0.0;
        em.test_acc = splits.test.empty() ? 0.0 : evaluate_accuracy(params, store, labels, splits.test);
        result.metrics.push_back(em);

        if (!have_val || em.val_acc > result.best_val_acc ||
            (result.best_epoch == 0 && epoch == 1)) {
            result.best_val_acc = em.val_acc;
            result.best_epoch = epoch;
            best = params;
        }
    }
    result.best = best.template cast<double>();
    return result;
}

}  // namespace

TrainResult train_model(const TokenStore& store, const LabelVector& labels, const Splits& splits,
                        const TrainConfig& cfg) {
    if (cfg.precision == "f64") return train_impl<double>(store, labels, splits, cfg);
    if (cfg.precision == "f32") return train_impl<float>(store, labels, splits, cfg);
    throw ValidationError("train: precision must be f32 or f64");
}

std::vector<std::string> GradCheckReport::failing_blocks(double tol) const {
    std::vector<std::string> out;
    for (const auto& b : blocks)
        if (!(b.max_rel_err < tol)) out.push_back(b.name);
    return out;
}

GradCheckReport gradient_check_against(const ModelParamsD& params,
                                       const std::vector<const TokenList*>& batch,
                                       const std::vector<std::int32_t>& labels,
                                       const ModelParamsD& grads, double h) {
    ModelParamsD work = params;
    auto wb = work.blocks();
    auto gb = grads.blocks();
    GradCheckReport report;
    for (std::size_t i = 0; i < wb.size(); ++i) {
        BlockCheck check;
        check.name = wb[i].name;
        for (std::size_t j = 0; j < wb[i].len; ++j) {
            double orig = wb[i].data[j];
            wb[i].data[j] = orig + h;
            double up = batch_loss(work, batch, labels);
            wb[i].data[j] = orig - h;
            double down = batch_loss(work, batch, labels);
            wb[i].data[j] = orig;
            double numeric = (up - down) / (2.0 * h);
            double analytic = gb[i].data[j];
            double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-4});
            double rel = std::abs(analytic - numeric) / denom;
            check.max_rel_err = std::max(check.max_rel_err, rel);
            check.max_abs_analytic = std::max(check.max_abs_analytic, std::abs(analytic));
            check.max_abs_numeric = std::max(check.max_abs_numeric, std::abs(numeric));
        }
        report.max_rel_err = std::max(report.max_rel_err, check.max_rel_err);
        report.blocks.push_back(std::move(check));
    }
    return report;
}

GradCheckReport gradient_check(const ModelParamsD& params,
                               const std::vector<const TokenList*>& batch,
                               const std::vector<std::int32_t>& labels, double h) {
    ModelParamsD grads = ModelParamsD::zeros(params.cfg);
    loss_and_backward(params, batch, labels, grads);
    return gradient_check_against(params, batch, labels, grads, h);
}

namespace {

constexpr char kCkptMagic[4] = {'V', 'C', 'R', 'C'};

nlohmann::json metrics_json(const std::vector<EpochMetrics>& metrics) {
    auto arr = nlohmann::json::array();
    for (const auto& m : metrics)
        arr.push_back({{"epoch", m.epoch},
                       {"train_loss", m.train_loss},
                       {"val_acc", m.val_acc},
                       {"test_acc", m.test_acc}});
    return arr;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    nlohmann::json header;
    header["version"] = 1;
    header["epoch"] = ckpt.epoch;
    header["model"] = {{"layers", ckpt.cfg.model.layers},     {"width", ckpt.cfg.model.width},
                       {"heads", ckpt.cfg.model.heads},       {"readout", to_string(ckpt.cfg.model.readout)},
                       {"token_dim", ckpt.cfg.model.token_dim}, {"classes", ckpt.cfg.model.classes}};
    header["train"] = {{"lr", ckpt.cfg.lr},
                       {"beta1", ckpt.cfg.beta1},
                       {"beta2", ckpt.cfg.beta2},
                       {"adam_eps", ckpt.cfg.adam_eps},
                       {"weight_decay", ckpt.cfg.weight_decay},
                       {"batch_size", ckpt.cfg.batch_size},
                       {"epochs", ckpt.cfg.epochs},
                       {"seed", ckpt.cfg.seed},
                       {"precision", ckpt.cfg.precision}};
    header["metrics"] = metrics_json(ckpt.metrics);
    auto blocks_json = nlohmann::json::array();
    auto blocks = ckpt.params.blocks();
    for (const auto& b : blocks)
        blocks_json.push_back({{"name", b.name}, {"rows", b.rows}, {"cols", b.cols}});
    header["blocks"] = blocks_json;
    std::string header_text = header.dump();

    std::string buf;
    buf.append(kCkptMagic, 4);
    binio::put_u32(buf, 1);
    binio::put_u64(buf, header_text.size());
    buf += header_text;
    for (const auto& b : blocks)
        for (std::size_t j = 0; j < b.len; ++j) binio::put_f32(buf, b.data[j]);
    binio::put_u32(buf, crc32_of(buf.data(), buf.size()));

    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("checkpoint: cannot write " + path.string());
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw ValidationError("checkpoint: write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::string buf = read_text_file(path);
    if (buf.size() < 20) throw ValidationError("checkpoint: truncated file " + path.string());
    {
        binio::Reader tail(buf, "checkpoint");
        tail.bytes(buf.size() - 4);
        if (tail.u32() != crc32_of(buf.data(), buf.size() - 4))
            throw ValidationError("checkpoint: checksum mismatch in " + path.string());
    }
    binio::Reader rd(buf, "checkpoint");
    if (std::memcmp(rd.bytes(4), kCkptMagic, 4) != 0)
        throw ValidationError("checkpoint: bad magic in " + path.string());
    if (rd.u32() != 1) throw ValidationError("checkpoint: unsupported version");
    std::uint64_t header_len = rd.u64();
    nlohmann::json header;
    try {
        const char* p = rd.bytes(header_len);
        header = nlohmann::json::parse(std::string_view(p, header_len));
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(std::string("checkpoint: bad header: ") + e.what());
    }

    Checkpoint ckpt;
    try {
        ckpt.epoch = header.at("epoch").get<std::size_t>();
        const auto& m = header.at("model");
        ckpt.cfg.model.layers = m.at("layers").get<std::size_t>();
        ckpt.cfg.model.width = m.at("width").get<std::size_t>();
        ckpt.cfg.model.heads = m.at("heads").get<std::size_t>();
        ckpt.cfg.model.readout = readout_from_string(m.at("readout").get<std::string>());
        ckpt.cfg.model.token_dim = m.at("token_dim").get<std::size_t>();
        ckpt.cfg.model.classes = m.at("classes").get<std::size_t>();
        const auto& t = header.at("train");
        ckpt.cfg.lr = t.at("lr").get<double>();
        ckpt.cfg.beta1 = t.at("beta1").get<double>();
        ckpt.cfg.beta2 = t.at("beta2").get<double>();
        ckpt.cfg.adam_eps = t.at("adam_eps").get<double>();
        ckpt.cfg.weight_decay = t.at("weight_decay").get<double>();
        ckpt.cfg.batch_size = t.at("batch_size").get<std::size_t>();
        ckpt.cfg.epochs = t.at("epochs").get<std::size_t>();
        ckpt.cfg.seed = t.at("seed").get<std::uint64_t>();
        ckpt.cfg.precision = t.at("precision").get<std::string>();
        for (const auto& em : header.at("metrics")) {
            EpochMetrics e;
            e.epoch = em.at("epoch").get<std::size_t>();
            e.train_loss = em.at("train_loss").get<double>();
            e.val_acc = em.at("val_acc").get<double>();
            e.test_acc = em.at("test_acc").get<double>();
            ckpt.metrics.push_back(e);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("checkpoint: bad header field: ") + e.what());
    }

    ckpt.params = ModelParamsF::zeros(ckpt.cfg.model);
    auto blocks = ckpt.params.blocks();
    const auto& blocks_json = header.at("blocks");
    if (blocks_json.size() != blocks.size())
        throw ValidationError("checkpoint: block table size mismatch");
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        const auto& bj = blocks_json[static_cast<int>(i)];
        if (bj.at("name").get<std::string>() != blocks[i].name ||
            bj.at("rows").get<std::size_t>() != blocks[i].rows ||
            bj.at("cols").get<std::size_t>() != blocks[i].cols)
            throw ValidationError("checkpoint: block " + blocks[i].name +
                                  " does not match the configured shape");
        for (std::size_t j = 0; j < blocks[i].len; ++j) blocks[i].data[j] = rd.f32();
    }
    if (rd.remaining() != 4)
        throw ValidationError("checkpoint: trailing garbage in " + path.string());
    return ckpt;
}

template struct ModelParams<float>;
template struct ModelParams<double>;
template class Adam<float>;
template class Adam<double>;

template Mat<float> attention_forward(const Mat<float>&, const Mat<float>&, const Mat<float>&,
                                      const Mat<float>&, const Mat<float>&, std::size_t,
                                      const std::vector<std::uint8_t>&);
template Mat<double> attention_forward(const Mat<double>&, const Mat<double>&, const Mat<double>&,
                                       const Mat<double>&, const Mat<double>&, std::size_t,
                                       const std::vector<std::uint8_t>&);
template ForwardResult<float> encoder_forward(const ModelParams<float>&, const Mat<float>&,
                                              const std::vector<std::uint8_t>&);
template ForwardResult<double> encoder_forward(const ModelParams<double>&, const Mat<double>&,
                                               const std::vector<std::uint8_t>&);
template ForwardResult<float> encoder_forward(const ModelParams<float>&, const TokenList&);
template ForwardResult<double> encoder_forward(const ModelParams<double>&, const TokenList&);
template float loss_and_backward(const ModelParams<float>&, const std::vector<const TokenList*>&,
                                 const std::vector<std::int32_t>&, ModelParams<float>&);
template double loss_and_backward(const ModelParams<double>&, const std::vector<const TokenList*>&,
                                  const std::vector<std::int32_t>&, ModelParams<double>&);
template float batch_loss(const ModelParams<float>&, const std::vector<const TokenList*>&,
                          const std::vector<std::int32_t>&);
template double batch_loss(const ModelParams<double>&, const std::vector<const TokenList*>&,
                           const std::vector<std::int32_t>&);
template double evaluate_accuracy(const ModelParams<float>&, const TokenStore&, const LabelVector&,
                                  const std::vector<NodeId>&);
template double evaluate_accuracy(const ModelParams<double>&, const TokenStore&, const LabelVector&,
                                  const std::vector<NodeId>&);

}  // namespace vcrg
