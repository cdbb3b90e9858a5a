// Differentiable-operation kernel: dense, GRU cell, bilinear attention,
// dropout, masked MSE and Adam, each with hand-derived backward passes.
// Batch forms operate on B x dim matrices (one row per sequence).

#pragma once

#include "nvx/common.hpp"

#include <functional>
#include <vector>

namespace nvx {

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// ---------------------------------------------------------------------------
// GRU
// ---------------------------------------------------------------------------

struct GruParams {
    int input_dim = 0;
    int hidden_dim = 0;
    Mat wz, wr, wh;  // hidden x input
    Mat uz, ur, uh;  // hidden x hidden
    Vec bz, br, bh;  // hidden

    void init_zero(int input, int hidden);
    void validate() const;
};

// Gradient accumulators with GruParams shapes.
struct GruGrads {
    Mat wz, wr, wh, uz, ur, uh;
    Vec bz, br, bh;

    void init_zero(int input, int hidden);
};

// Gate activations cached by the forward pass for reuse in backward.
struct GruCache {
    Mat z, r, c;  // B x hidden each
};

// z = sigmoid(Wz x + Uz h + bz); r likewise; c = tanh(Wh x + Uh (r.h) + bh);
// h_t = (1-z).h_prev + z.c
Vec gru_cell(const GruParams& p, const Vec& x, const Vec& h_prev);

// Batch form: x is B x input, h_prev is B x hidden; returns B x hidden.
Mat gru_forward(const GruParams& p, const Mat& x, const Mat& h_prev, GruCache* cache);

// Overwrites dx and dh_prev; accumulates into grads.
void gru_backward(const GruParams& p, const Mat& x, const Mat& h_prev, const GruCache& cache,
                  const Mat& dh, GruGrads& grads, Mat& dx, Mat& dh_prev);

// ---------------------------------------------------------------------------
// Attention (Luong general score, single sequence form)
// ---------------------------------------------------------------------------

// score_t = h_t' W q; alpha = softmax(score); context = sum_t alpha_t h_t.
// h_enc is T x enc_dim, w is enc_dim x dec_dim, q is the previous decoder
// hidden state (dec_dim).
void attention_step(const Mat& h_enc, const Vec& h_dec_prev, const Mat& w, Vec& context,
                    Vec& alpha);

// Accumulates into dh_enc, dh_dec_prev, dw given d loss / d context.
void attention_backward(const Mat& h_enc, const Vec& h_dec_prev, const Mat& w, const Vec& alpha,
                        const Vec& dcontext, Mat& dh_enc, Vec& dh_dec_prev, Mat& dw);

// ---------------------------------------------------------------------------
// Dense
// ---------------------------------------------------------------------------

Vec dense(const Mat& wd, const Vec& b, const Vec& x);

// Batch form: y = x wd' + 1 b'.
Mat dense_forward(const Mat& wd, const Vec& b, const Mat& x);

void dense_backward(const Mat& wd, const Mat& x, const Mat& dy, Mat& dwd, Vec& db, Mat& dx);

// ---------------------------------------------------------------------------
// Dropout
// ---------------------------------------------------------------------------

// Inverted dropout scale matrix: entries are 0 with probability rate, else
// 1/(1-rate). Drawn row-major for a platform-stable stream.
Mat dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng);

Vec dropout(const Vec& x, double rate, bool train_mode, Rng& rng);

// ---------------------------------------------------------------------------
// Masked MSE
// ---------------------------------------------------------------------------

// Mean squared difference over rows with mask = 1, all columns.
double masked_mse(const Mat& pred, const Mat& target, const Vec& mask);

Mat masked_mse_grad(const Mat& pred, const Mat& target, const Vec& mask);

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

// A parameter tensor paired with its gradient, viewed as flat storage.
struct TensorRef {
    double* values = nullptr;
    const double* grad = nullptr;
    Eigen::Index size = 0;
};

inline TensorRef tensor_ref(Mat& x, const Mat& g) { return {x.data(), g.data(), x.size()}; }
inline TensorRef tensor_ref(Vec& x, const Vec& g) { return {x.data(), g.data(), x.size()}; }

struct AdamHyper {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    AdamHyper hyper;
    long long step_count = 0;
    std::vector<Vec> m, v;  // flat accumulators, parallel to the tensor list

    void init(const std::vector<TensorRef>& tensors);
};

// One bias-corrected update over the whole tensor list; increments step_count
// exactly once.
void adam_step(const std::vector<TensorRef>& tensors, AdamState& state);

// ---------------------------------------------------------------------------
// Finite-difference harness
// ---------------------------------------------------------------------------

// Central differences per scalar of every referenced tensor. `loss` must read
// the live tensor storage. Returns the worst relative error
// |a - n| / max(|a|, |n|, 1e-8).
double grad_check(const std::vector<TensorRef>& tensors, const std::function<double()>& loss,
                  double eps);

}  // namespace nvx
