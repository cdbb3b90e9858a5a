// Audio/EEG signal processing: IIR filtering, MFCC analysis and inversion,
// Griffin-Lim reconstruction, mel cepstral distortion.

#pragma once

#include "nvx/common.hpp"

#include <complex>
#include <cstdint>
#include <vector>

namespace nvx {

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

enum class FeatureKind : std::uint8_t { eeg = 0, mfcc = 1, articulatory = 2 };

const char* feature_kind_name(FeatureKind k);

// T x D frame matrix with a frame rate and a kind tag.
struct FeatureSequence {
    Mat data;  // T x D
    double rate_hz = 0.0;
    FeatureKind kind = FeatureKind::eeg;

    int frames() const { return static_cast<int>(data.rows()); }
    int dims() const { return static_cast<int>(data.cols()); }

    // Enforces T >= 1, finiteness and the per-kind dimension rules
    // (mfcc: D in {13,128}; articulatory: D = 6).
    void validate() const;
};

struct Waveform {
    std::vector<double> samples;  // nominal range [-1, 1]
    double rate_hz = 16000.0;
};

// Feed-forward (b) and feedback (a) coefficients with a[0] = 1.
struct IirFilter {
    std::vector<double> b;
    std::vector<double> a;

    // Poles of the transfer function, found as eigenvalues of the
    // companion matrix of a(z).
    std::vector<std::complex<double>> poles() const;
    bool stable() const;
};

struct MfccConfig {
    int n_coeffs = 13;
    int frame_rate_hz = 100;
    int window_samples = 400;
    int hop_samples = 160;
    int fft_size = 512;
    int n_mel_bands = 40;
    double log_floor = 1e-10;

    // The two feature-rate regimes: (13, 100) and (128, 32).
    static MfccConfig for_rate(int n_coeffs, int frame_rate_hz);
    void validate() const;
};

// Linear magnitude frames, F = fft_size/2 + 1 columns.
struct Spectrogram {
    Mat frames;  // T x F, nonnegative
    int fft_size = 0;
    int hop_samples = 0;
    int window_samples = 0;

    int n_frames() const { return static_cast<int>(frames.rows()); }
    int n_bins() const { return static_cast<int>(frames.cols()); }
};

// ---------------------------------------------------------------------------
// IIR design and application
// ---------------------------------------------------------------------------

// Butterworth band-pass via the bilinear transform. `order` is the overall
// digital filter order (even; the analog low-pass prototype has order/2).
IirFilter design_bandpass(double low_hz, double high_hz, int order, double fs_hz);

// Second-order notch (biquad) at center_hz with quality factor q.
IirFilter design_notch(double center_hz, double q, double fs_hz);

// Linear filtering with zero initial state (direct form II transposed).
std::vector<double> iir_filter(const IirFilter& f, const std::vector<double>& x);

// Column-wise application, one channel per column.
Mat iir_filter_columns(const IirFilter& f, const Mat& x);

// |H(e^{j 2 pi f / fs})| evaluated from the coefficients.
double filter_response(const IirFilter& f, double freq_hz, double fs_hz);

// ---------------------------------------------------------------------------
// MFCC analysis / inversion
// ---------------------------------------------------------------------------

// Triangular mel filterbank, n_mels x (fft_size/2 + 1), peak-1 triangles on
// the HTK mel scale covering 0 .. fs/2.
Mat mel_filterbank(int n_mels, int fft_size, double fs_hz);

// Orthonormal DCT-II basis; coefficients = matrix * input.
Mat dct_matrix(int n);

// Hann window -> magnitude spectrum per frame. No padding: frames that do
// not fully fit are dropped, T = 1 + floor((len - window) / hop).
Spectrogram stft_magnitude(const Waveform& w, const MfccConfig& cfg);

FeatureSequence extract_mfcc(const Waveform& w, const MfccConfig& cfg);

// Cepstra -> log-mel (inverse DCT, zero-padded) -> mel energies ->
// nonnegative-clipped filterbank pseudo-inverse -> magnitude spectrogram.
Spectrogram invert_mfcc(const FeatureSequence& m, const MfccConfig& cfg);

// ---------------------------------------------------------------------------
// Griffin-Lim
// ---------------------------------------------------------------------------

// Iterative phase recovery from a magnitude spectrogram. Starts from zero
// phase; `seed` is kept in the signature for alternative inits but is not
// consumed by the zero-phase start. Output length = (T-1)*hop + window.
Waveform griffin_lim(const Spectrogram& s, int iterations, std::uint64_t seed);

struct GriffinLimTrace {
    Waveform waveform;
    // ||  |STFT(x_k)| - s  ||_F after each iteration; non-increasing.
    std::vector<double> consistency;
};

GriffinLimTrace griffin_lim_trace(const Spectrogram& s, int iterations, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Scoring
// ---------------------------------------------------------------------------

// Per-dimension normalization statistics. Zero-variance dimensions get
// stddev 1 so they normalize to zero.
struct NormStats {
    Vec mean;
    Vec stddev;

    static NormStats fit(const Mat& frames);
    static NormStats fit_pooled(const std::vector<const Mat*>& frame_blocks);
};

FeatureSequence znormalize(const FeatureSequence& x, const NormStats& stats);

// Mean over frames of (10/ln 10) * sqrt(2 * sum_{d=1}^{D-1} diff^2);
// coefficient 0 is excluded. Inputs are expected to be normalized already.
double mcd(const FeatureSequence& pred, const FeatureSequence& truth);

// ---------------------------------------------------------------------------
// Waveform I/O and figure data
// ---------------------------------------------------------------------------

// RIFF/WAVE, PCM 16-bit little-endian, mono, 16 kHz.
void write_wav(const std::string& path, const Waveform& w);
Waveform read_wav(const std::string& path);

// CSV `index,actual,predicted`; the predicted column is peak-normalized.
// Rows cover the shorter of the two inputs.
void write_waveform_comparison_csv(const std::string& path, const Waveform& actual,
                                   const Waveform& predicted);

}  // namespace nvx
