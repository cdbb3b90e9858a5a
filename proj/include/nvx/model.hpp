// Attention regression network, no-attention baseline, and the direct /
// two-step prediction pipelines.

#pragma once

#include "nvx/signal.hpp"
#include "nvx/tensorgrad.hpp"

#include <cstdint>
#include <vector>

namespace nvx {

inline constexpr double kAttentionDropout = 0.2;

struct ModelDims {
    int d_in = 0;
    int enc_hidden = 256;
    int dec_hidden = 128;
    int d_out = 0;
};

struct ModelParams {
    GruParams encoder;  // input d_in, hidden enc_hidden
    Mat attention_w;    // enc_hidden x dec_hidden
    GruParams decoder;  // input enc_hidden, hidden dec_hidden
    Mat head_w;         // d_out x dec_hidden
    Vec head_b;

    ModelDims dims() const;
    void validate() const;
};

struct BaselineParams {
    GruParams encoder;  // input d_in, hidden enc_hidden
    Mat head_w;         // d_out x enc_hidden
    Vec head_b;

    ModelDims dims() const;  // dec_hidden reported as 0
    void validate() const;
};

struct AttentionTrace {
    Mat weights;  // T x T, row k = alpha over encoder steps at decoder step k
};

struct ForwardTrace {
    Mat encoder_states;  // T x enc_hidden
    Mat decoder_states;  // T x dec_hidden
    Mat contexts;        // T x enc_hidden, pre-dropout convex combinations
    Mat prediction;      // T x d_out
    AttentionTrace attention;
};

// ---------------------------------------------------------------------------
// Initialization
// ---------------------------------------------------------------------------

// Glorot-uniform weights, zero biases. The published head widths are the only
// legal d_out values here.
ModelParams init_attention_model(int d_in, int d_out, std::uint64_t seed);

// Unrestricted-dims variant for desk-scale gradient checks.
ModelParams init_attention_model_dims(const ModelDims& dims, std::uint64_t seed);

BaselineParams init_baseline_model(int d_in, int d_out, std::uint64_t seed);
BaselineParams init_baseline_model_dims(const ModelDims& dims, std::uint64_t seed);

long long param_count(const ModelParams& m);
long long param_count(const BaselineParams& b);

// ---------------------------------------------------------------------------
// Single-sequence forward passes
// ---------------------------------------------------------------------------

// Encoder GRU over T steps (h0 = 0), then per decoder step k: attention over
// all encoder states using decoder h_{k-1}, dropout on the context in train
// mode, decoder GRU step, linear head.
ForwardTrace forward(const ModelParams& m, const FeatureSequence& x, bool train_mode, Rng& rng);

// Encoder states mapped one-to-one through the linear head.
Mat forward_baseline(const BaselineParams& b, const FeatureSequence& x);

FeatureSequence predict_direct(const ModelParams& m, const FeatureSequence& eeg);

// Stage 1 to articulatory (D = 6), stage 2 to acoustic.
FeatureSequence predict_two_step(const ModelParams& m1, const ModelParams& m2,
                                 const FeatureSequence& eeg);

// ---------------------------------------------------------------------------
// Batched training graph (step-major layout)
// ---------------------------------------------------------------------------

struct ModelGrads {
    GruGrads encoder, decoder;
    Mat attention_w, head_w;
    Vec head_b;

    void init_zero(const ModelDims& d);
    void scale(double s);
};

struct BaselineGrads {
    GruGrads encoder;
    Mat head_w;
    Vec head_b;

    void init_zero(const ModelDims& d);
};

// One zero-padded batch. x[t] and target[t] are B x D matrices for encoder
// step t; step_mask(b, t) = 1 while t is a real frame of sequence b.
struct Batch {
    std::vector<Mat> x;
    std::vector<Mat> target;
    Mat step_mask;  // B x T_max

    int steps() const { return static_cast<int>(x.size()); }
    int batch_size() const { return static_cast<int>(step_mask.rows()); }
    double frames() const { return step_mask.sum(); }
};

// Pads to the longest sequence (plus pad_extra additional all-padding steps).
Batch pack_batch(const std::vector<const Mat*>& xs, const std::vector<const Mat*>& ys,
                 int pad_extra = 0);

// Masked-MSE loss over the batch, normalized by unmasked frames x d_out.
// dropout_rng enables train-mode dropout when non-null. Gradients accumulate
// into g.
double attention_batch_grad(const ModelParams& m, const Batch& batch, Rng* dropout_rng,
                            ModelGrads& g);
double attention_batch_loss(const ModelParams& m, const Batch& batch);

double baseline_batch_grad(const BaselineParams& b, const Batch& batch, BaselineGrads& g);
double baseline_batch_loss(const BaselineParams& b, const Batch& batch);

// Flat tensor views pairing parameters with gradient storage, fixed order.
std::vector<TensorRef> param_refs(ModelParams& m, ModelGrads& g);
std::vector<TensorRef> param_refs(BaselineParams& b, BaselineGrads& g);

}  // namespace nvx
