#include "nvx/model.hpp"

#include <cmath>
#include <string>

namespace nvx {

// ---------------------------------------------------------------------------
// Shapes and validation
// ---------------------------------------------------------------------------

ModelDims ModelParams::dims() const {
    return {encoder.input_dim, encoder.hidden_dim, decoder.hidden_dim,
            static_cast<int>(head_w.rows())};
}

void ModelParams::validate() const {
    encoder.validate();
    decoder.validate();
    if (decoder.input_dim != encoder.hidden_dim)
        throw DimError("ModelParams: decoder input must equal encoder hidden size");
    if (attention_w.rows() != encoder.hidden_dim || attention_w.cols() != decoder.hidden_dim)
        throw DimError("ModelParams: attention_w shape mismatch");
    if (head_w.cols() != decoder.hidden_dim || head_b.size() != head_w.rows())
        throw DimError("ModelParams: head shape mismatch");
    auto finite = [](const Mat& m) { return all_finite(m); };
    if (!finite(encoder.wz) || !finite(encoder.wr) || !finite(encoder.wh) ||
        !finite(encoder.uz) || !finite(encoder.ur) || !finite(encoder.uh) ||
        !finite(decoder.wz) || !finite(decoder.wr) || !finite(decoder.wh) ||
        !finite(decoder.uz) || !finite(decoder.ur) || !finite(decoder.uh) ||
        !finite(attention_w) || !finite(head_w) || !all_finite(head_b) ||
        !all_finite(encoder.bz) || !all_finite(encoder.br) || !all_finite(encoder.bh) ||
        !all_finite(decoder.bz) || !all_finite(decoder.br) || !all_finite(decoder.bh))
        throw DimError("ModelParams: non-finite parameters");
}

ModelDims BaselineParams::dims() const {
    return {encoder.input_dim, encoder.hidden_dim, 0, static_cast<int>(head_w.rows())};
}

void BaselineParams::validate() const {
    encoder.validate();
    if (head_w.cols() != encoder.hidden_dim || head_b.size() != head_w.rows())
        throw DimError("BaselineParams: head shape mismatch");
}

// ---------------------------------------------------------------------------
// Initialization
// ---------------------------------------------------------------------------

namespace {

// Row-major fill keeps the draw sequence independent of Eigen's storage order.
void glorot_fill(Mat& m, double fan_in, double fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rng.uniform(-limit, limit);
}

// Orthogonal recurrent weights keep hidden-state norms stable across long
// unrolls; without them the attention scores h_encᵀ W h_dec start near zero
// and the softmax sits in a flat uniform regime that is slow to leave.
void orthogonal_fill(Mat& m, Rng& rng) {
    Mat g(m.rows(), m.cols());
    for (Eigen::Index i = 0; i < g.rows(); ++i)
        for (Eigen::Index j = 0; j < g.cols(); ++j) g(i, j) = rng.gaussian();
    Eigen::HouseholderQR<Mat> qr(g);
    Mat q = qr.householderQ() * Mat::Identity(g.rows(), g.cols());
    const Mat r = qr.matrixQR().topRows(g.cols()).triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < q.cols(); ++j)
        if (r(j, j) < 0.0) q.col(j) = -q.col(j);
    m = q;
}

void glorot_gru(GruParams& p, Rng& rng) {
    const double in = p.input_dim, hid = p.hidden_dim;
    glorot_fill(p.wz, in, hid, rng);
    glorot_fill(p.wr, in, hid, rng);
    glorot_fill(p.wh, in, hid, rng);
    orthogonal_fill(p.uz, rng);
    orthogonal_fill(p.ur, rng);
    orthogonal_fill(p.uh, rng);
}

void check_head_width(int d_out) {
    if (d_out != 6 && d_out != 13 && d_out != 128)
        throw DimError("head width must be 6, 13 or 128; got " + std::to_string(d_out));
}

}  // namespace

ModelParams init_attention_model_dims(const ModelDims& dims, std::uint64_t seed) {
    if (dims.d_in < 1 || dims.enc_hidden < 1 || dims.dec_hidden < 1 || dims.d_out < 1)
        throw DimError("init_attention_model: dims must be positive");
    Rng rng(seed);
    ModelParams m;
    m.encoder.init_zero(dims.d_in, dims.enc_hidden);
    m.decoder.init_zero(dims.enc_hidden, dims.dec_hidden);
    m.attention_w = Mat::Zero(dims.enc_hidden, dims.dec_hidden);
    m.head_w = Mat::Zero(dims.d_out, dims.dec_hidden);
    m.head_b = Vec::Zero(dims.d_out);
    glorot_gru(m.encoder, rng);
    glorot_fill(m.attention_w, dims.enc_hidden, dims.dec_hidden, rng);
    glorot_gru(m.decoder, rng);
    glorot_fill(m.head_w, dims.dec_hidden, dims.d_out, rng);
    return m;
}

ModelParams init_attention_model(int d_in, int d_out, std::uint64_t seed) {
    check_head_width(d_out);
    return init_attention_model_dims({d_in, 256, 128, d_out}, seed);
}

BaselineParams init_baseline_model_dims(const ModelDims& dims, std::uint64_t seed) {
    if (dims.d_in < 1 || dims.enc_hidden < 1 || dims.d_out < 1)
        throw DimError("init_baseline_model: dims must be positive");
    Rng rng(seed);
    BaselineParams b;
    b.encoder.init_zero(dims.d_in, dims.enc_hidden);
    b.head_w = Mat::Zero(dims.d_out, dims.enc_hidden);
    b.head_b = Vec::Zero(dims.d_out);
    glorot_gru(b.encoder, rng);
    glorot_fill(b.head_w, dims.enc_hidden, dims.d_out, rng);
    return b;
}

BaselineParams init_baseline_model(int d_in, int d_out, std::uint64_t seed) {
    check_head_width(d_out);
    return init_baseline_model_dims({d_in, 256, 0, d_out}, seed);
}

namespace {

long long gru_count(const GruParams& p) {
    return 3ll * (p.wz.size() + p.uz.size() + p.bz.size());
}

}  // namespace

long long param_count(const ModelParams& m) {
    return gru_count(m.encoder) + gru_count(m.decoder) + m.attention_w.size() +
           m.head_w.size() + m.head_b.size();
}

long long param_count(const BaselineParams& b) {
    return gru_count(b.encoder) + b.head_w.size() + b.head_b.size();
}

// ---------------------------------------------------------------------------
// Single-sequence forward
// ---------------------------------------------------------------------------

ForwardTrace forward(const ModelParams& m, const FeatureSequence& x, bool train_mode, Rng& rng) {
    if (x.dims() != m.encoder.input_dim) throw DimError("forward: input dimension mismatch");
    const int t_len = x.frames();
    const ModelDims d = m.dims();

    ForwardTrace trace;
    trace.encoder_states.resize(t_len, d.enc_hidden);
    trace.decoder_states.resize(t_len, d.dec_hidden);
    trace.contexts.resize(t_len, d.enc_hidden);
    trace.prediction.resize(t_len, d.d_out);
    trace.attention.weights.resize(t_len, t_len);

    Vec h = Vec::Zero(d.enc_hidden);
    for (int t = 0; t < t_len; ++t) {
        h = gru_cell(m.encoder, x.data.row(t), h);
        trace.encoder_states.row(t) = h;
    }

    Vec hd = Vec::Zero(d.dec_hidden);
    Vec context, alpha;
    for (int k = 0; k < t_len; ++k) {
        attention_step(trace.encoder_states, hd, m.attention_w, context, alpha);
        trace.attention.weights.row(k) = alpha;
        trace.contexts.row(k) = context;
        const Vec fed = train_mode ? dropout(context, kAttentionDropout, true, rng) : context;
        hd = gru_cell(m.decoder, fed, hd);
        trace.decoder_states.row(k) = hd;
        trace.prediction.row(k) = dense(m.head_w, m.head_b, hd);
    }
    return trace;
}

Mat forward_baseline(const BaselineParams& b, const FeatureSequence& x) {
    if (x.dims() != b.encoder.input_dim)
        throw DimError("forward_baseline: input dimension mismatch");
    const int t_len = x.frames();
    Mat out(t_len, b.head_w.rows());
    Vec h = Vec::Zero(b.encoder.hidden_dim);
    for (int t = 0; t < t_len; ++t) {
        h = gru_cell(b.encoder, x.data.row(t), h);
        out.row(t) = dense(b.head_w, b.head_b, h);
    }
    return out;
}

FeatureSequence predict_direct(const ModelParams& m, const FeatureSequence& eeg) {
    Rng rng(0);
    FeatureSequence out;
    out.data = forward(m, eeg, false, rng).prediction;
    out.rate_hz = eeg.rate_hz;
    // A 6-wide head is the articulatory stage; the acoustic heads are 13/128.
    out.kind = m.head_w.rows() == 6 ? FeatureKind::articulatory : FeatureKind::mfcc;
    out.validate();
    return out;
}

FeatureSequence predict_two_step(const ModelParams& m1, const ModelParams& m2,
                                 const FeatureSequence& eeg) {
    if (m1.head_w.rows() != 6)
        throw DimError("predict_two_step: stage-1 head must be 6-dimensional");
    if (m2.encoder.input_dim != 6)
        throw DimError("predict_two_step: stage-2 encoder must take 6-dimensional input");
    Rng rng(0);
    FeatureSequence mid;
    mid.data = forward(m1, eeg, false, rng).prediction;
    mid.rate_hz = eeg.rate_hz;
    mid.kind = FeatureKind::articulatory;
    mid.validate();
    return predict_direct(m2, mid);
}

}  // namespace nvx
