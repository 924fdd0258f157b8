#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vcrg/common.hpp"
#include "vcrg/data.hpp"
#include "vcrg/tokens.hpp"

namespace vcrg {

enum class Readout { mean, sum, attention };

Readout readout_from_string(const std::string& s);
std::string to_string(Readout r);

struct ModelConfig {
    std::size_t layers = 1;     // encoder depth
    std::size_t width = 64;     // model dimension D
    std::size_t heads = 4;      // attention heads (width % heads == 0)
    Readout readout = Readout::mean;
    std::size_t token_dim = 0;  // input dimension d+1
    std::size_t classes = 0;

    void validate() const;
};

template <typename T>
struct LayerParams {
    std::vector<T> ln1_g, ln1_b, ln2_g, ln2_b;
    Mat<T> wq, wk, wv, wo;
    Mat<T> w1;
    std::vector<T> b1;
    Mat<T> w2;
    std::vector<T> b2;
};

/// Mutable view of one named parameter block (matrices row-major, vectors as
/// len x 1).
template <typename T>
struct BlockRef {
    std::string name;
    T* data;
    std::size_t len;
    std::size_t rows, cols;
};

template <typename T>
struct ModelParams {
    ModelConfig cfg;
    Mat<T> w_in;
    std::vector<T> b_in;
    std::vector<LayerParams<T>> layers;
    std::vector<T> readout_q;  // attention readout only, else empty
    Mat<T> w_cls;
    std::vector<T> b_cls;

    static ModelParams zeros(const ModelConfig& cfg);
    /// Fan-based uniform init (limit sqrt(6/(fan_in+fan_out))) for matrices,
    /// ones/zeros for layer-norm scale/shift, zeros for biases; seeded.
    static ModelParams init(const ModelConfig& cfg, std::uint64_t seed);

    /// Stable-ordered list of every trainable block.
    std::vector<BlockRef<T>> blocks();
    std::vector<BlockRef<const T>> blocks() const;
    std::size_t num_params() const;
    void fill_zero();

    template <typename U>
    ModelParams<U> cast() const;
};

using ModelParamsF = ModelParams<float>;
using ModelParamsD = ModelParams<double>;

/// Multi-head scaled dot-product attention including the output projection,
/// without residual or normalization. Masked rows are invisible as keys and
/// produce zero output rows as queries.
template <typename T>
Mat<T> attention_forward(const Mat<T>& z, const Mat<T>& wq, const Mat<T>& wk, const Mat<T>& wv,
                         const Mat<T>& wo, std::size_t heads,
                         const std::vector<std::uint8_t>& mask);

template <typename T>
struct ForwardResult {
    std::vector<T> logits;
    std::vector<T> pooled;
};

/// Pre-LN encoder: per layer Z~ = MHA(LN(Z)) + Z, Z' = FFN(LN(Z~)) + Z~, then
/// readout over valid rows and the classifier.
template <typename T>
ForwardResult<T> encoder_forward(const ModelParams<T>& params, const Mat<T>& tokens,
                                 const std::vector<std::uint8_t>& mask);

template <typename T>
ForwardResult<T> encoder_forward(const ModelParams<T>& params, const TokenList& list);

/// Mean cross-entropy over the batch; fills `grads` (zeroed first) with exact
/// analytic gradients. Returns the loss.
template <typename T>
T loss_and_backward(const ModelParams<T>& params, const std::vector<const TokenList*>& batch,
                    const std::vector<std::int32_t>& labels, ModelParams<T>& grads);

/// Forward-only batch loss (used by the finite-difference checker).
template <typename T>
T batch_loss(const ModelParams<T>& params, const std::vector<const TokenList*>& batch,
             const std::vector<std::int32_t>& labels);

struct TrainConfig {
    ModelConfig model;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double weight_decay = 1e-5;
    std::size_t batch_size = 32;
    std::size_t epochs = 100;
    std::uint64_t seed = 0;
    std::string precision = "f32";  // "f32" or "f64"

    void validate() const;
};

/// Adam with decoupled weight decay; moments kept in double.
template <typename T>
class Adam {
public:
    Adam(const TrainConfig& cfg, ModelParams<T>& params);
    void step(ModelParams<T>& params, ModelParams<T>& grads);

private:
    double lr_, b1_, b2_, eps_, wd_;
    std::size_t t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

struct EpochMetrics {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_acc = 0.0;
    double test_acc = 0.0;
};

std::string metrics_to_jsonl(const std::vector<EpochMetrics>& metrics);

struct TrainResult {
    ModelParamsD best;  // parameters at the best validation epoch
    std::vector<EpochMetrics> metrics;
    std::size_t best_epoch = 0;
    double best_val_acc = 0.0;
};

/// Seeded shuffled mini-batches, Adam updates, per-epoch metrics, best-val
/// parameter retention. Deterministic (single-threaded).
TrainResult train_model(const TokenStore& store, const LabelVector& labels, const Splits& splits,
                        const TrainConfig& cfg);

template <typename T>
double evaluate_accuracy(const ModelParams<T>& params, const TokenStore& store,
                         const LabelVector& labels, const std::vector<NodeId>& ids);

struct BlockCheck {
    std::string name;
    double max_rel_err = 0.0;
    double max_abs_analytic = 0.0;
    double max_abs_numeric = 0.0;
};

struct GradCheckReport {
    std::vector<BlockCheck> blocks;
    double max_rel_err = 0.0;

    bool pass(double tol) const { return max_rel_err < tol; }
    std::vector<std::string> failing_blocks(double tol) const;
};

/// Central finite differences against the analytic gradients, f64 only.
/// Relative error uses denominator max(|analytic|, |numeric|, 1e-4).
GradCheckReport gradient_check(const ModelParamsD& params,
                               const std::vector<const TokenList*>& batch,
                               const std::vector<std::int32_t>& labels, double h = 1e-5);

/// Same comparison against externally supplied gradients (fault injection).
GradCheckReport gradient_check_against(const ModelParamsD& params,
                                       const std::vector<const TokenList*>& batch,
                                       const std::vector<std::int32_t>& labels,
                                       const ModelParamsD& grads, double h = 1e-5);

struct Checkpoint {
    ModelParamsF params;
    TrainConfig cfg;
    std::size_t epoch = 0;
    std::vector<EpochMetrics> metrics;
};

/// Binary format documented in docs/formats.md (JSON header + f32 blocks).
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

template <typename T>
template <typename U>
ModelParams<U> ModelParams<T>::cast() const {
    auto vec = [](const std::vector<T>& v) {
        std::vector<U> o(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) o[i] = static_cast<U>(v[i]);
        return o;
    };
    auto mat = [](const Mat<T>& m) {
        Mat<U> o(m.rows, m.cols);
        for (std::size_t i = 0; i < m.size(); ++i) o.v[i] = static_cast<U>(m.v[i]);
        return o;
    };
    ModelParams<U> out;
    out.cfg = cfg;
    out.w_in = mat(w_in);
    out.b_in = vec(b_in);
    for (const auto& lp : layers) {
        LayerParams<U> ol;
        ol.ln1_g = vec(lp.ln1_g);
        ol.ln1_b = vec(lp.ln1_b);
        ol.ln2_g = vec(lp.ln2_g);
        ol.ln2_b = vec(lp.ln2_b);
        ol.wq = mat(lp.wq);
        ol.wk = mat(lp.wk);
        ol.wv = mat(lp.wv);
        ol.wo = mat(lp.wo);
        ol.w1 = mat(lp.w1);
        ol.b1 = vec(lp.b1);
        ol.w2 = mat(lp.w2);
        ol.b2 = vec(lp.b2);
        out.layers.push_back(std::move(ol));
    }
    out.readout_q = vec(readout_q);
    out.w_cls = mat(w_cls);
    out.b_cls = vec(b_cls);
    return out;
}

}  // namespace vcrg
