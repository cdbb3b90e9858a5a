#include "nvx/fft.hpp"
#include "nvx/signal.hpp"

#include <cmath>
#include <sstream>

namespace nvx {

namespace {

double hz_to_mel(double hz) {
    return 2595.0 * std::log10(1.0 + hz / 700.0);
}

double mel_to_hz(double mel) {
    return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

std::vector<double> hann_window(int n) {
    std::vector<double> w(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        w[static_cast<std::size_t>(i)] =
            0.5 - 0.5 * std::cos(2.0 * M_PI * i / static_cast<double>(n));
    return w;
}

}  // namespace

const char* feature_kind_name(FeatureKind k) {
    switch (k) {
        case FeatureKind::eeg: return "eeg";
        case FeatureKind::mfcc: return "mfcc";
        case FeatureKind::articulatory: return "articulatory";
    }
    return "?";
}

void FeatureSequence::validate() const {
    if (frames() < 1)
        throw DimError("FeatureSequence: need at least one frame");
    if (!all_finite(data))
        throw DimError("FeatureSequence: non-finite entries");
    if (kind == FeatureKind::mfcc && dims() != 13 && dims() != 128) {
        std::ostringstream os;
        os << "FeatureSequence: mfcc dimension must be 13 or 128, got " << dims();
        throw DimError(os.str());
    }
    if (kind == FeatureKind::articulatory && dims() != 6) {
        std::ostringstream os;
        os << "FeatureSequence: articulatory dimension must be 6, got " << dims();
        throw DimError(os.str());
    }
}

MfccConfig MfccConfig::for_rate(int n_coeffs, int frame_rate_hz) {
    MfccConfig cfg;
    cfg.n_coeffs = n_coeffs;
    cfg.frame_rate_hz = frame_rate_hz;
    if (frame_rate_hz == 100) {
        cfg.window_samples = 400;  // 25 ms at 16 kHz
        cfg.hop_samples = 160;
        cfg.fft_size = 512;
        cfg.n_mel_bands = (n_coeffs <= 40) ? 40 : n_coeffs;
    } else if (frame_rate_hz == 32) {
        cfg.window_samples = 1024;
        cfg.hop_samples = 500;
        cfg.fft_size = 1024;
        cfg.n_mel_bands = (n_coeffs <= 40) ? 40 : n_coeffs;
    } else {
        throw DimError("MfccConfig: frame rate must be 100 or 32");
    }
    cfg.validate();
    return cfg;
}

void MfccConfig::validate() const {
    if (hop_samples * frame_rate_hz != 16000)
        throw DimError("MfccConfig: hop must equal 16000 / frame_rate exactly");
    if (n_coeffs > n_mel_bands)
        throw DimError("MfccConfig: n_coeffs must not exceed n_mel_bands");
    if (fft_size < window_samples)
        throw DimError("MfccConfig: fft_size must cover the window");
    if (fft_size <= 0 || (fft_size & (fft_size - 1)) != 0)
        throw DimError("MfccConfig: fft_size must be a power of two");
    if (!(log_floor > 0.0))
        throw DimError("MfccConfig: log_floor must be positive");
}

Mat mel_filterbank(int n_mels, int fft_size, double fs_hz) {
    const int n_bins = fft_size / 2 + 1;
    Mat bank = Mat::Zero(n_mels, n_bins);

    const double mel_lo = hz_to_mel(0.0);
    const double mel_hi = hz_to_mel(fs_hz / 2.0);
    std::vector<double> edges(static_cast<std::size_t>(n_mels) + 2);
    for (int i = 0; i < n_mels + 2; ++i)
        edges[static_cast<std::size_t>(i)] =
            mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / static_cast<double>(n_mels + 1));

    for (int m = 0; m < n_mels; ++m) {
        const double f0 = edges[static_cast<std::size_t>(m)];
        const double f1 = edges[static_cast<std::size_t>(m) + 1];
        const double f2 = edges[static_cast<std::size_t>(m) + 2];
        for (int k = 0; k < n_bins; ++k) {
            const double fk = fs_hz * k / static_cast<double>(fft_size);
            if (fk > f0 && fk < f1)
                bank(m, k) = (fk - f0) / (f1 - f0);
            else if (fk >= f1 && fk < f2)
                bank(m, k) = (f2 - fk) / (f2 - f1);
        }
    }
    return bank;
}

Mat dct_matrix(int n) {
    Mat d(n, n);
    const double s0 = std::sqrt(1.0 / n);
    const double sk = std::sqrt(2.0 / n);
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i)
            d(k, i) = (k == 0 ? s0 : sk) *
                      std::cos(M_PI * k * (2.0 * i + 1.0) / (2.0 * n));
    return d;
}

Spectrogram stft_magnitude(const Waveform& w, const MfccConfig& cfg) {
    cfg.validate();
    if (w.rate_hz != 16000.0)
        throw DimError("stft_magnitude: waveform must be 16 kHz");
    const int n = static_cast<int>(w.samples.size());
    if (n < cfg.window_samples)
        throw DimError("stft_magnitude: audio shorter than one analysis window");
    for (double v : w.samples)
        if (!std::isfinite(v))
            throw DimError("stft_magnitude: non-finite sample");

    const int t_frames = 1 + (n - cfg.window_samples) / cfg.hop_samples;
    const int n_bins = cfg.fft_size / 2 + 1;
    const std::vector<double> window = hann_window(cfg.window_samples);

    Spectrogram s;
    s.frames = Mat::Zero(t_frames, n_bins);
    s.fft_size = cfg.fft_size;
    s.hop_samples = cfg.hop_samples;
    s.window_samples = cfg.window_samples;

    std::vector<std::complex<double>> buf(static_cast<std::size_t>(cfg.fft_size));
    for (int t = 0; t < t_frames; ++t) {
        const int off = t * cfg.hop_samples;
        for (int i = 0; i < cfg.fft_size; ++i) {
            double v = (i < cfg.window_samples)
                           ? w.samples[static_cast<std::size_t>(off + i)] *
                                 window[static_cast<std::size_t>(i)]
                           : 0.0;
            buf[static_cast<std::size_t>(i)] = std::complex<double>(v, 0.0);
        }
        fft_radix2(buf, false);
        for (int k = 0; k < n_bins; ++k)
            s.frames(t, k) = std::abs(buf[static_cast<std::size_t>(k)]);
    }
    return s;
}

FeatureSequence extract_mfcc(const Waveform& w, const MfccConfig& cfg) {
    const Spectrogram spec = stft_magnitude(w, cfg);
    const Mat bank = mel_filterbank(cfg.n_mel_bands, cfg.fft_size, w.rate_hz);
    const Mat dct = dct_matrix(cfg.n_mel_bands);

    // T x n_mel mel energies, floored and logged.
    Mat logmel = (spec.frames * bank.transpose()).cwiseMax(cfg.log_floor).array().log();
    // Orthonormal DCT-II per frame, keep the first n_coeffs.
    Mat cepstra = logmel * dct.transpose();

    FeatureSequence out;
    out.data = cepstra.leftCols(cfg.n_coeffs);
    out.rate_hz = cfg.frame_rate_hz;
    out.kind = FeatureKind::mfcc;
    return out;
}

Spectrogram invert_mfcc(const FeatureSequence& m, const MfccConfig& cfg) {
    cfg.validate();
    if (m.kind != FeatureKind::mfcc)
        throw DimError("invert_mfcc: input must be mfcc");
    if (m.dims() != cfg.n_coeffs)
        throw DimError("invert_mfcc: dimension does not match config");

    const Mat dct = dct_matrix(cfg.n_mel_bands);
    const Mat bank = mel_filterbank(cfg.n_mel_bands, cfg.fft_size, 16000.0);

    // Zero-pad cepstra to the full band count, invert the DCT, undo the log.
    Mat cepstra = Mat::Zero(m.frames(), cfg.n_mel_bands);
    cepstra.leftCols(cfg.n_coeffs) = m.data;
    Mat mel = (cepstra * dct).array().exp();  // DCT orthonormal: inverse = transpose

    // Least-squares unmixing of the filterbank, clipped to nonnegative
    // magnitudes. bank is n_mel x F with full row rank.
    Mat gram = bank * bank.transpose();
    Mat pinv = bank.transpose() * gram.ldlt().solve(Mat::Identity(cfg.n_mel_bands, cfg.n_mel_bands));

    Spectrogram s;
    s.frames = (mel * pinv.transpose()).cwiseMax(0.0);
    s.fft_size = cfg.fft_size;
    s.hop_samples = cfg.hop_samples;
    s.window_samples = cfg.window_samples;
    return s;
}

}  // namespace nvx
