#include "nvx/tensorgrad.hpp"

#include <cmath>
#include <limits>

namespace nvx {

// ---------------------------------------------------------------------------
// GRU
// ---------------------------------------------------------------------------

void GruParams::init_zero(int input, int hidden) {
    input_dim = input;
    hidden_dim = hidden;
    wz = Mat::Zero(hidden, input);
    wr = Mat::Zero(hidden, input);
    wh = Mat::Zero(hidden, input);
    uz = Mat::Zero(hidden, hidden);
    ur = Mat::Zero(hidden, hidden);
    uh = Mat::Zero(hidden, hidden);
    bz = Vec::Zero(hidden);
    br = Vec::Zero(hidden);
    bh = Vec::Zero(hidden);
}

void GruParams::validate() const {
    auto bad = [&](const Mat& m, int r, int c) { return m.rows() != r || m.cols() != c; };
    if (input_dim < 1 || hidden_dim < 1 || bad(wz, hidden_dim, input_dim) ||
        bad(wr, hidden_dim, input_dim) || bad(wh, hidden_dim, input_dim) ||
        bad(uz, hidden_dim, hidden_dim) || bad(ur, hidden_dim, hidden_dim) ||
        bad(uh, hidden_dim, hidden_dim) || bz.size() != hidden_dim || br.size() != hidden_dim ||
        bh.size() != hidden_dim)
        throw DimError("GruParams: inconsistent shapes");
}

void GruGrads::init_zero(int input, int hidden) {
    wz = Mat::Zero(hidden, input);
    wr = Mat::Zero(hidden, input);
    wh = Mat::Zero(hidden, input);
    uz = Mat::Zero(hidden, hidden);
    ur = Mat::Zero(hidden, hidden);
    uh = Mat::Zero(hidden, hidden);
    bz = Vec::Zero(hidden);
    br = Vec::Zero(hidden);
    bh = Vec::Zero(hidden);
}

Mat gru_forward(const GruParams& p, const Mat& x, const Mat& h_prev, GruCache* cache) {
    if (x.cols() != p.input_dim || h_prev.cols() != p.hidden_dim || x.rows() != h_prev.rows())
        throw DimError("gru_forward: dimension mismatch");
    const Mat z =
        ((x * p.wz.transpose() + h_prev * p.uz.transpose()).rowwise() + p.bz.transpose())
            .unaryExpr([](double v) { return sigmoid(v); });
    const Mat r =
        ((x * p.wr.transpose() + h_prev * p.ur.transpose()).rowwise() + p.br.transpose())
            .unaryExpr([](double v) { return sigmoid(v); });
    const Mat c = ((x * p.wh.transpose() + (r.cwiseProduct(h_prev)) * p.uh.transpose()).rowwise() +
                   p.bh.transpose())
                      .array()
                      .tanh();
    if (cache) {
        cache->z = z;
        cache->r = r;
        cache->c = c;
    }
    return (1.0 - z.array()) * h_prev.array() + z.array() * c.array();
}

Vec gru_cell(const GruParams& p, const Vec& x, const Vec& h_prev) {
    if (x.size() != p.input_dim || h_prev.size() != p.hidden_dim)
        throw DimError("gru_cell: dimension mismatch");
    return gru_forward(p, x.transpose(), h_prev.transpose(), nullptr).row(0);
}

void gru_backward(const GruParams& p, const Mat& x, const Mat& h_prev, const GruCache& cache,
                  const Mat& dh, GruGrads& grads, Mat& dx, Mat& dh_prev) {
    const Mat& z = cache.z;
    const Mat& r = cache.r;
    const Mat& c = cache.c;

    const Mat dz_pre =
        (dh.array() * (c.array() - h_prev.array()) * z.array() * (1.0 - z.array())).matrix();
    const Mat dc_pre = (dh.array() * z.array() * (1.0 - c.array().square())).matrix();

    const Mat rh = r.cwiseProduct(h_prev);
    const Mat drh = dc_pre * p.uh;
    const Mat dr_pre =
        (drh.array() * h_prev.array() * r.array() * (1.0 - r.array())).matrix();

    grads.wh += dc_pre.transpose() * x;
    grads.uh += dc_pre.transpose() * rh;
    grads.bh += dc_pre.colwise().sum();
    grads.wr += dr_pre.transpose() * x;
    grads.ur += dr_pre.transpose() * h_prev;
    grads.br += dr_pre.colwise().sum();
    grads.wz += dz_pre.transpose() * x;
    grads.uz += dz_pre.transpose() * h_prev;
    grads.bz += dz_pre.colwise().sum();

    dx = dc_pre * p.wh + dr_pre * p.wr + dz_pre * p.wz;
    dh_prev = (dh.array() * (1.0 - z.array())).matrix() + drh.cwiseProduct(r) +
              dr_pre * p.ur + dz_pre * p.uz;
}

// ---------------------------------------------------------------------------
// Attention
// ---------------------------------------------------------------------------

void attention_step(const Mat& h_enc, const Vec& h_dec_prev, const Mat& w, Vec& context,
                    Vec& alpha) {
    if (h_enc.rows() < 1 || h_enc.cols() != w.rows() || w.cols() != h_dec_prev.size())
        throw DimError("attention_step: shape mismatch");
    const Vec wq = w * h_dec_prev;          // enc_dim
    Vec score = h_enc * wq;                 // T
    const double top = score.maxCoeff();
    alpha = (score.array() - top).exp();
    alpha /= alpha.sum();
    context = h_enc.transpose() * alpha;    // enc_dim
}

void attention_backward(const Mat& h_enc, const Vec& h_dec_prev, const Mat& w, const Vec& alpha,
                        const Vec& dcontext, Mat& dh_enc, Vec& dh_dec_prev, Mat& dw) {
    const Vec dalpha = h_enc * dcontext;
    dh_enc += alpha * dcontext.transpose();

    const double dot = alpha.dot(dalpha);
    const Vec dscore = (alpha.array() * (dalpha.array() - dot)).matrix();

    const Vec wq = w * h_dec_prev;
    dh_enc += dscore * wq.transpose();
    const Vec dwq = h_enc.transpose() * dscore;
    dw += dwq * h_dec_prev.transpose();
    dh_dec_prev += w.transpose() * dwq;
}

// ---------------------------------------------------------------------------
// Dense
// ---------------------------------------------------------------------------

Vec dense(const Mat& wd, const Vec& b, const Vec& x) {
    if (wd.cols() != x.size() || wd.rows() != b.size())
        throw DimError("dense: shape mismatch");
    return wd * x + b;
}

Mat dense_forward(const Mat& wd, const Vec& b, const Mat& x) {
    if (wd.cols() != x.cols() || wd.rows() != b.size())
        throw DimError("dense_forward: shape mismatch");
    return (x * wd.transpose()).rowwise() + b.transpose();
}

void dense_backward(const Mat& wd, const Mat& x, const Mat& dy, Mat& dwd, Vec& db, Mat& dx) {
    dwd += dy.transpose() * x;
    db += dy.colwise().sum();
    dx = dy * wd;
}

// ---------------------------------------------------------------------------
// Dropout
// ---------------------------------------------------------------------------

Mat dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng) {
    if (rate < 0.0 || rate >= 1.0) throw DimError("dropout: rate must be in [0, 1)");
    Mat mask(rows, cols);
    const double scale = 1.0 / (1.0 - rate);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j)
            mask(i, j) = rng.uniform() < rate ? 0.0 : scale;
    return mask;
}

Vec dropout(const Vec& x, double rate, bool train_mode, Rng& rng) {
    if (rate < 0.0 || rate >= 1.0) throw DimError("dropout: rate must be in [0, 1)");
    if (!train_mode || rate == 0.0) return x;
    return x.cwiseProduct(dropout_mask(x.size(), 1, rate, rng).col(0));
}

// ---------------------------------------------------------------------------
// Masked MSE
// ---------------------------------------------------------------------------

static double mask_count(const Mat& pred, const Mat& target, const Vec& mask) {
    if (pred.rows() != target.rows() || pred.cols() != target.cols() ||
        mask.size() != pred.rows())
        throw DimError("masked_mse: shape mismatch");
    const double n = mask.sum();
    if (n <= 0.0) throw DimError("masked_mse: empty mask");
    return n * static_cast<double>(pred.cols());
}

double masked_mse(const Mat& pred, const Mat& target, const Vec& mask) {
    const double denom = mask_count(pred, target, mask);
    const Mat diff = pred - target;
    double acc = 0.0;
    for (Eigen::Index t = 0; t < pred.rows(); ++t)
        if (mask(t) != 0.0) acc += diff.row(t).squaredNorm();
    return acc / denom;
}

Mat masked_mse_grad(const Mat& pred, const Mat& target, const Vec& mask) {
    const double denom = mask_count(pred, target, mask);
    Mat g = 2.0 * (pred - target) / denom;
    for (Eigen::Index t = 0; t < pred.rows(); ++t)
        if (mask(t) == 0.0) g.row(t).setZero();
    return g;
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

void AdamState::init(const std::vector<TensorRef>& tensors) {
    step_count = 0;
    m.clear();
    v.clear();
    for (const TensorRef& t : tensors) {
        m.push_back(Vec::Zero(t.size));
        v.push_back(Vec::Zero(t.size));
    }
}

void adam_step(const std::vector<TensorRef>& tensors, AdamState& state) {
    if (tensors.size() != state.m.size()) throw DimError("adam_step: tensor list mismatch");
    state.step_count += 1;
    const double t = static_cast<double>(state.step_count);
    const double bc1 = 1.0 - std::pow(state.hyper.beta1, t);
    const double bc2 = 1.0 - std::pow(state.hyper.beta2, t);
    const AdamHyper& h = state.hyper;
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        if (tensors[i].size != state.m[i].size())
            throw DimError("adam_step: gradient shape mismatch");
        double* p = tensors[i].values;
        const double* g = tensors[i].grad;
        double* mi = state.m[i].data();
        double* vi = state.v[i].data();
        for (Eigen::Index k = 0; k < tensors[i].size; ++k) {
            mi[k] = h.beta1 * mi[k] + (1.0 - h.beta1) * g[k];
            vi[k] = h.beta2 * vi[k] + (1.0 - h.beta2) * g[k] * g[k];
            p[k] -= h.lr * (mi[k] / bc1) / (std::sqrt(vi[k] / bc2) + h.epsilon);
        }
    }
}

// ---------------------------------------------------------------------------
// Finite differences
// ---------------------------------------------------------------------------

double grad_check(const std::vector<TensorRef>& tensors, const std::function<double()>& loss,
                  double eps) {
    if (eps <= 0.0) throw DimError("grad_check: eps must be positive");
    double worst = 0.0;
    for (const TensorRef& t : tensors) {
        for (Eigen::Index k = 0; k < t.size; ++k) {
            const double saved = t.values[k];
            t.values[k] = saved + eps;
            const double up = loss();
            t.values[k] = saved - eps;
            const double down = loss();
            t.values[k] = saved;
            const double numeric = (up - down) / (2.0 * eps);
            const double exact = t.grad[k];
            const double rel = std::abs(exact - numeric) /
                               std::max({std::abs(exact), std::abs(numeric), 1e-8});
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

}  // namespace nvx
