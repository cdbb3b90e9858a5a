#include "nvx/data.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <string>

namespace nvx {

namespace {

void fill_gaussian(Mat& m, Rng& rng, double scale) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = scale * rng.gaussian();
}

constexpr int kLatentDim = 6;
constexpr int kMapHidden = 16;

// Frames the acoustic map sees: half current latent, half near-future latent.
// The lookahead is what separates the attention model (which can consult
// future encoder states) from the strictly causal baseline.
constexpr int kLookahead = 3;

// Smoothed-jitter component of the latent: uniform innovations convolved with
// a short unit-energy kernel, so var(jitter) = amp^2 / 3 and the correlation
// at the lookahead distance is 1/6.
constexpr int kJitterHalf = 2;
constexpr double kJitterAmp = 1.2;
constexpr double kJitterKernel[5] = {0.25 / 1.5, 0.75 / 1.5, 1.0 / 1.5, 0.75 / 1.5,
                                     0.25 / 1.5};

struct AcousticMap {
    Mat w1;  // hidden x latent
    Vec b1;
    Mat w2;  // mfcc x hidden
    Vec b2;

    Mat apply(const Mat& u) const {
        const Mat h =
            (((u * w1.transpose()).rowwise() + b1.transpose()).array().tanh()).matrix();
        return (h * w2.transpose()).rowwise() + b2.transpose();
    }
};

}  // namespace

Mat lag_window(const Mat& x, int radius) {
    const int t_len = static_cast<int>(x.rows());
    const int d = static_cast<int>(x.cols());
    const int width = 2 * radius + 1;
    Mat out(t_len, width * d);
    for (int t = 0; t < t_len; ++t)
        for (int o = -radius; o <= radius; ++o) {
            const int src = std::clamp(t + o, 0, t_len - 1);
            out.block(t, (o + radius) * d, 1, d) = x.row(src);
        }
    return out;
}

Corpus gen_synthetic_corpus(const SynthConfig& cfg) {
    cfg.validate();

    // Fixed cross-utterance maps drawn from a dedicated stream.
    Rng map_rng(Rng::derive(cfg.seed, 0xA));
    AcousticMap g;
    g.w1 = Mat(kMapHidden, kLatentDim);
    g.w2 = Mat(cfg.mfcc_dim, kMapHidden);
    g.b1 = Vec(kMapHidden);
    g.b2 = Vec(cfg.mfcc_dim);
    fill_gaussian(g.w1, map_rng, 0.3);
    for (int i = 0; i < kMapHidden; ++i) g.b1(i) = 0.2 * map_rng.gaussian();
    fill_gaussian(g.w2, map_rng, 0.5);
    for (int i = 0; i < cfg.mfcc_dim; ++i) g.b2(i) = 0.3 * map_rng.gaussian();

    Mat eeg_map(cfg.eeg_dim, kLatentDim);
    fill_gaussian(eeg_map, map_rng, 0.49);

    Corpus corpus;
    corpus.utterances.reserve(static_cast<std::size_t>(cfg.n_utterances));
    for (int u = 0; u < cfg.n_utterances; ++u) {
        Rng rng(Rng::derive(cfg.seed, 0x100 + static_cast<std::uint64_t>(u)));
        const int t_len =
            cfg.t_min + static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.t_max - cfg.t_min + 1)));

        // Latent: three random sinusoids per dimension plus a smoothed bounded
        // jitter. Component 0 is a near-quarter-cycle ramp, monotone across the
        // utterance, so every frame's encoder state carries its position. The
        // jitter's innovations are the part of the lookahead blend below that
        // no causal model can recover; the sinusoids alone would be
        // extrapolatable. Per-frame delta stays below
        // sum(a_i * w_i) + amp * sum|dk| <= 0.65 + 1.6 = 2.25.
        Mat z(t_len, kLatentDim);
        std::vector<double> eps(static_cast<std::size_t>(t_len) + 2 * kJitterHalf);
        for (int d = 0; d < kLatentDim; ++d) {
            double a[3], w[3], phi[3];
            a[0] = rng.uniform(0.6, 1.0);
            w[0] = rng.uniform(0.02, 0.05);
            phi[0] = rng.uniform(-1.75, -1.40);
            for (int i = 1; i < 3; ++i) {
                a[i] = rng.uniform(0.3, 1.0);
                w[i] = rng.uniform(0.08, 0.30);
                phi[i] = rng.uniform(0.0, 2.0 * M_PI);
            }
            for (double& e : eps) e = rng.uniform(-kJitterAmp, kJitterAmp);
            for (int t = 0; t < t_len; ++t) {
                double v = 0.0;
                for (int i = 0; i < 3; ++i) v += a[i] * std::sin(w[i] * t + phi[i]);
                for (int j = -kJitterHalf; j <= kJitterHalf; ++j)
                    v += kJitterKernel[j + kJitterHalf] *
                         eps[static_cast<std::size_t>(t + j + kJitterHalf)];
                z(t, d) = v;
            }
        }

        Mat blend(t_len, kLatentDim);
        for (int t = 0; t < t_len; ++t) {
            const int ahead = std::min(t + kLookahead, t_len - 1);
            blend.row(t) = 0.5 * z.row(t) + 0.5 * z.row(ahead);
        }

        Utterance utt;
        utt.id = "utt" + std::to_string(u);

        utt.articulatory.data = z;
        utt.articulatory.rate_hz = cfg.rate_hz;
        utt.articulatory.kind = FeatureKind::articulatory;

        utt.mfcc.data = g.apply(blend);
        for (int t = 0; t < t_len; ++t)
            for (int d = 0; d < cfg.mfcc_dim; ++d)
                utt.mfcc.data(t, d) += cfg.noise_std * rng.gaussian();
        utt.mfcc.rate_hz = cfg.rate_hz;
        utt.mfcc.kind = FeatureKind::mfcc;

        utt.eeg.data = z * eeg_map.transpose();
        for (int t = 0; t < t_len; ++t)
            for (int d = 0; d < cfg.eeg_dim; ++d)
                utt.eeg.data(t, d) += cfg.noise_std * rng.gaussian();
        utt.eeg.rate_hz = cfg.rate_hz;
        utt.eeg.kind = FeatureKind::eeg;

        if (cfg.with_waveform) {
            const MfccConfig mfcc_cfg =
                MfccConfig::for_rate(cfg.mfcc_dim, static_cast<int>(cfg.rate_hz));
            utt.waveform = griffin_lim(invert_mfcc(utt.mfcc, mfcc_cfg), 30, cfg.seed);
        }

        corpus.utterances.push_back(std::move(utt));
    }
    corpus.validate();
    return corpus;
}

// ---------------------------------------------------------------------------
// Ridge oracle
// ---------------------------------------------------------------------------

Mat RidgeFit::predict(const Mat& x) const {
    if (x.cols() != weights.rows()) throw DimError("RidgeFit: dimension mismatch");
    return (x * weights).rowwise() + intercept.transpose();
}

RidgeFit ridge_oracle(const Mat& x, const Mat& y, double lambda) {
    if (x.rows() != y.rows() || x.rows() < 1) throw DimError("ridge_oracle: frame mismatch");
    if (lambda < 0.0) throw DimError("ridge_oracle: negative lambda");

    const Vec mx = x.colwise().mean();
    const Vec my = y.colwise().mean();
    const Mat xc = x.rowwise() - mx.transpose();
    const Mat yc = y.rowwise() - my.transpose();

    const Mat gram = xc.transpose() * xc;
    Eigen::SelfAdjointEigenSolver<Mat> eig(gram);
    const Vec& evals = eig.eigenvalues();
    const double tol = 1e-12 * std::max(evals(evals.size() - 1), 0.0);
    if (lambda == 0.0 && evals(0) <= tol)
        throw DimError("ridge_oracle: singular system with lambda = 0");

    const Vec inv = (evals.array() + lambda).inverse();
    RidgeFit fit;
    fit.weights = eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose() *
                  (xc.transpose() * yc);
    fit.intercept = my - fit.weights.transpose() * mx;
    const Mat resid = yc - xc * fit.weights;
    fit.residual = resid.squaredNorm() / static_cast<double>(y.rows() * y.cols());
    return fit;
}

}  // namespace nvx
