// Batched step-major forward/backward graphs for the attention model and the
// baseline. Padded steps carry exact-zero gradients: padded encoder positions
// are masked out of every attention softmax and padded decoder steps are
// masked out of the loss, so appending padding never changes the math.

#include "nvx/model.hpp"

#include <limits>

namespace nvx {

void ModelGrads::init_zero(const ModelDims& d) {
    encoder.init_zero(d.d_in, d.enc_hidden);
    decoder.init_zero(d.enc_hidden, d.dec_hidden);
    attention_w = Mat::Zero(d.enc_hidden, d.dec_hidden);
    head_w = Mat::Zero(d.d_out, d.dec_hidden);
    head_b = Vec::Zero(d.d_out);
}

void ModelGrads::scale(double s) {
    for (Mat* m : {&encoder.wz, &encoder.wr, &encoder.wh, &encoder.uz, &encoder.ur, &encoder.uh,
                   &decoder.wz, &decoder.wr, &decoder.wh, &decoder.uz, &decoder.ur, &decoder.uh,
                   &attention_w, &head_w})
        *m *= s;
    for (Vec* v : {&encoder.bz, &encoder.br, &encoder.bh, &decoder.bz, &decoder.br, &decoder.bh,
                   &head_b})
        *v *= s;
}

void BaselineGrads::init_zero(const ModelDims& d) {
    encoder.init_zero(d.d_in, d.enc_hidden);
    head_w = Mat::Zero(d.d_out, d.enc_hidden);
    head_b = Vec::Zero(d.d_out);
}

Batch pack_batch(const std::vector<const Mat*>& xs, const std::vector<const Mat*>& ys,
                 int pad_extra) {
    if (xs.empty() || xs.size() != ys.size()) throw DimError("pack_batch: sequence list mismatch");
    const int b_size = static_cast<int>(xs.size());
    const int d_in = static_cast<int>(xs[0]->cols());
    const int d_out = static_cast<int>(ys[0]->cols());
    int t_max = 0;
    for (int b = 0; b < b_size; ++b) {
        if (xs[b]->rows() != ys[b]->rows())
            throw DimError("pack_batch: input/target length mismatch");
        if (xs[b]->cols() != d_in || ys[b]->cols() != d_out)
            throw DimError("pack_batch: inconsistent dimensions across batch");
        if (xs[b]->rows() < 1) throw DimError("pack_batch: empty sequence");
        t_max = std::max(t_max, static_cast<int>(xs[b]->rows()));
    }
    t_max += pad_extra;

    Batch batch;
    batch.step_mask = Mat::Zero(b_size, t_max);
    batch.x.assign(t_max, Mat::Zero(b_size, d_in));
    batch.target.assign(t_max, Mat::Zero(b_size, d_out));
    for (int b = 0; b < b_size; ++b) {
        const int len = static_cast<int>(xs[b]->rows());
        for (int t = 0; t < len; ++t) {
            batch.x[t].row(b) = xs[b]->row(t);
            batch.target[t].row(b) = ys[b]->row(t);
            batch.step_mask(b, t) = 1.0;
        }
    }
    return batch;
}

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Everything backward needs from one attention forward pass.
struct AttnTape {
    std::vector<Mat> henc;       // per enc step, B x enc
    std::vector<GruCache> ecache;
    std::vector<Mat> hdec;       // per dec step, B x dec
    std::vector<GruCache> dcache;
    std::vector<Mat> alpha;      // per dec step, B x T
    std::vector<Mat> p;          // per dec step, B x enc (Hdec_prev * W')
    std::vector<Mat> fed;        // context after dropout, B x enc
    std::vector<Mat> drop_mask;  // empty when dropout off
    std::vector<Mat> diff;       // loss-masked (pred - target), B x d_out
};

double attention_forward_batch(const ModelParams& m, const Batch& batch, Rng* dropout_rng,
                               AttnTape* tape) {
    const ModelDims d = m.dims();
    const int t_len = batch.steps();
    const int b_size = batch.batch_size();
    if (t_len < 1) throw DimError("attention_forward_batch: empty batch");
    if (batch.x[0].cols() != d.d_in || batch.target[0].cols() != d.d_out)
        throw DimError("attention_forward_batch: dimension mismatch");
    const double denom = batch.frames() * static_cast<double>(d.d_out);
    if (denom <= 0.0) throw DimError("attention_forward_batch: empty mask");

    if (tape) {
        tape->henc.resize(t_len);
        tape->ecache.resize(t_len);
        tape->hdec.resize(t_len);
        tape->dcache.resize(t_len);
        tape->alpha.resize(t_len);
        tape->p.resize(t_len);
        tape->fed.resize(t_len);
        tape->drop_mask.resize(dropout_rng ? t_len : 0);
        tape->diff.resize(t_len);
    }

    std::vector<Mat> henc(t_len);
    Mat h = Mat::Zero(b_size, d.enc_hidden);
    for (int t = 0; t < t_len; ++t) {
        h = gru_forward(m.encoder, batch.x[t], h, tape ? &tape->ecache[t] : nullptr);
        henc[t] = h;
        if (tape) tape->henc[t] = h;
    }

    double loss = 0.0;
    Mat hd = Mat::Zero(b_size, d.dec_hidden);
    Mat score(b_size, t_len), ctx(b_size, d.enc_hidden);
    for (int k = 0; k < t_len; ++k) {
        Mat p(b_size, d.enc_hidden);
        p.noalias() = hd * m.attention_w.transpose();
        for (int t = 0; t < t_len; ++t)
            score.col(t) = (henc[t].array() * p.array()).rowwise().sum();
        for (int b = 0; b < b_size; ++b)
            for (int t = 0; t < t_len; ++t)
                if (batch.step_mask(b, t) == 0.0) score(b, t) = kNegInf;

        const Vec rowmax = score.rowwise().maxCoeff();
        Mat alpha = (score.colwise() - rowmax).array().exp();
        const Vec rowsum = alpha.rowwise().sum();
        alpha.array().colwise() /= rowsum.array();

        ctx.setZero();
        for (int t = 0; t < t_len; ++t) ctx.noalias() += alpha.col(t).asDiagonal() * henc[t];

        Mat fed = ctx;
        if (dropout_rng) {
            Mat mask =
                dropout_mask(b_size, d.enc_hidden, kAttentionDropout, *dropout_rng);
            fed = ctx.cwiseProduct(mask);
            if (tape) tape->drop_mask[k] = std::move(mask);
        }

        const Mat hd_prev = hd;
        hd = gru_forward(m.decoder, fed, hd_prev, tape ? &tape->dcache[k] : nullptr);
        Mat diff = dense_forward(m.head_w, m.head_b, hd) - batch.target[k];
        for (int b = 0; b < b_size; ++b)
            if (batch.step_mask(b, k) == 0.0) diff.row(b).setZero();
        loss += diff.squaredNorm();

        if (tape) {
            tape->p[k] = std::move(p);
            tape->alpha[k] = std::move(alpha);
            tape->fed[k] = std::move(fed);
            tape->hdec[k] = hd;
            tape->diff[k] = std::move(diff);
        }
    }
    return loss / denom;
}

}  // namespace

double attention_batch_loss(const ModelParams& m, const Batch& batch) {
    return attention_forward_batch(m, batch, nullptr, nullptr);
}

double attention_batch_grad(const ModelParams& m, const Batch& batch, Rng* dropout_rng,
                            ModelGrads& g) {
    const ModelDims d = m.dims();
    const int t_len = batch.steps();
    const int b_size = batch.batch_size();

    AttnTape tape;
    const double loss = attention_forward_batch(m, batch, dropout_rng, &tape);
    const double denom = batch.frames() * static_cast<double>(d.d_out);

    std::vector<Mat> dhenc(t_len, Mat::Zero(b_size, d.enc_hidden));
    const Mat dec_zero = Mat::Zero(b_size, d.dec_hidden);
    const Mat enc_zero = Mat::Zero(b_size, d.enc_hidden);
    Mat dhd_next = dec_zero;
    Mat dfed, dhd_prev_gru;
    for (int k = t_len - 1; k >= 0; --k) {
        const Mat dpred = (2.0 / denom) * tape.diff[k];
        Mat dhd = dpred * m.head_w + dhd_next;
        g.head_w.noalias() += dpred.transpose() * tape.hdec[k];
        g.head_b += dpred.colwise().sum();

        const Mat& hd_prev = (k == 0) ? dec_zero : tape.hdec[k - 1];
        gru_backward(m.decoder, tape.fed[k], hd_prev, tape.dcache[k], dhd, g.decoder, dfed,
                     dhd_prev_gru);

        Mat dctx = dropout_rng ? dfed.cwiseProduct(tape.drop_mask[k]).eval() : dfed;

        const Mat& alpha = tape.alpha[k];
        Mat dalpha(b_size, t_len);
        for (int t = 0; t < t_len; ++t) {
            dalpha.col(t) = (dctx.array() * tape.henc[t].array()).rowwise().sum();
            dhenc[t].noalias() += alpha.col(t).asDiagonal() * dctx;
        }
        const Vec rowdot = (alpha.array() * dalpha.array()).rowwise().sum();
        const Mat dscore = (alpha.array() * (dalpha.colwise() - rowdot).array()).matrix();

        Mat dp = Mat::Zero(b_size, d.enc_hidden);
        for (int t = 0; t < t_len; ++t) {
            dp.noalias() += dscore.col(t).asDiagonal() * tape.henc[t];
            dhenc[t].noalias() += dscore.col(t).asDiagonal() * tape.p[k];
        }
        g.attention_w.noalias() += dp.transpose() * hd_prev;
        dhd_next = dhd_prev_gru + dp * m.attention_w;
    }

    Mat dx;
    Mat dh_next = enc_zero;
    for (int t = t_len - 1; t >= 0; --t) {
        const Mat dh = dhenc[t] + dh_next;
        const Mat& h_prev = (t == 0) ? enc_zero : tape.henc[t - 1];
        gru_backward(m.encoder, batch.x[t], h_prev, tape.ecache[t], dh, g.encoder, dx, dh_next);
    }
    return loss;
}

namespace {

struct BaseTape {
    std::vector<Mat> henc;
    std::vector<GruCache> cache;
    std::vector<Mat> diff;
};

double baseline_forward_batch(const BaselineParams& bp, const Batch& batch, BaseTape* tape) {
    const int t_len = batch.steps();
    const int b_size = batch.batch_size();
    if (t_len < 1) throw DimError("baseline_forward_batch: empty batch");
    if (batch.x[0].cols() != bp.encoder.input_dim ||
        batch.target[0].cols() != bp.head_w.rows())
        throw DimError("baseline_forward_batch: dimension mismatch");
    const double denom = batch.frames() * static_cast<double>(bp.head_w.rows());

    if (tape) {
        tape->henc.resize(t_len);
        tape->cache.resize(t_len);
        tape->diff.resize(t_len);
    }
    double loss = 0.0;
    Mat h = Mat::Zero(b_size, bp.encoder.hidden_dim);
    for (int t = 0; t < t_len; ++t) {
        h = gru_forward(bp.encoder, batch.x[t], h, tape ? &tape->cache[t] : nullptr);
        Mat diff = dense_forward(bp.head_w, bp.head_b, h) - batch.target[t];
        for (int b = 0; b < b_size; ++b)
            if (batch.step_mask(b, t) == 0.0) diff.row(b).setZero();
        loss += diff.squaredNorm();
        if (tape) {
            tape->henc[t] = h;
            tape->diff[t] = std::move(diff);
        }
    }
    return loss / denom;
}

}  // namespace

double baseline_batch_loss(const BaselineParams& b, const Batch& batch) {
    return baseline_forward_batch(b, batch, nullptr);
}

double baseline_batch_grad(const BaselineParams& bp, const Batch& batch, BaselineGrads& g) {
    const int t_len = batch.steps();
    const int b_size = batch.batch_size();
    BaseTape tape;
    const double loss = baseline_forward_batch(bp, batch, &tape);
    const double denom = batch.frames() * static_cast<double>(bp.head_w.rows());

    Mat dx;
    const Mat zero = Mat::Zero(b_size, bp.encoder.hidden_dim);
    Mat dh_next = zero;
    for (int t = t_len - 1; t >= 0; --t) {
        const Mat dpred = (2.0 / denom) * tape.diff[t];
        const Mat dh = dpred * bp.head_w + dh_next;
        g.head_w.noalias() += dpred.transpose() * tape.henc[t];
        g.head_b += dpred.colwise().sum();
        const Mat& h_prev = (t == 0) ? zero : tape.henc[t - 1];
        gru_backward(bp.encoder, batch.x[t], h_prev, tape.cache[t], dh, g.encoder, dx, dh_next);
    }
    return loss;
}

std::vector<TensorRef> param_refs(ModelParams& m, ModelGrads& g) {
    return {tensor_ref(m.encoder.wz, g.encoder.wz), tensor_ref(m.encoder.wr, g.encoder.wr),
            tensor_ref(m.encoder.wh, g.encoder.wh), tensor_ref(m.encoder.uz, g.encoder.uz),
            tensor_ref(m.encoder.ur, g.encoder.ur), tensor_ref(m.encoder.uh, g.encoder.uh),
            tensor_ref(m.encoder.bz, g.encoder.bz), tensor_ref(m.encoder.br, g.encoder.br),
            tensor_ref(m.encoder.bh, g.encoder.bh), tensor_ref(m.attention_w, g.attention_w),
            tensor_ref(m.decoder.wz, g.decoder.wz), tensor_ref(m.decoder.wr, g.decoder.wr),
            tensor_ref(m.decoder.wh, g.decoder.wh), tensor_ref(m.decoder.uz, g.decoder.uz),
            tensor_ref(m.decoder.ur, g.decoder.ur), tensor_ref(m.decoder.uh, g.decoder.uh),
            tensor_ref(m.decoder.bz, g.decoder.bz), tensor_ref(m.decoder.br, g.decoder.br),
            tensor_ref(m.decoder.bh, g.decoder.bh), tensor_ref(m.head_w, g.head_w),
            tensor_ref(m.head_b, g.head_b)};
}

std::vector<TensorRef> param_refs(BaselineParams& b, BaselineGrads& g) {
    return {tensor_ref(b.encoder.wz, g.encoder.wz), tensor_ref(b.encoder.wr, g.encoder.wr),
            tensor_ref(b.encoder.wh, g.encoder.wh), tensor_ref(b.encoder.uz, g.encoder.uz),
            tensor_ref(b.encoder.ur, g.encoder.ur), tensor_ref(b.encoder.uh, g.encoder.uh),
            tensor_ref(b.encoder.bz, g.encoder.bz), tensor_ref(b.encoder.br, g.encoder.br),
            tensor_ref(b.encoder.bh, g.encoder.bh), tensor_ref(b.head_w, g.head_w),
            tensor_ref(b.head_b, g.head_b)};
}

}  // namespace nvx
