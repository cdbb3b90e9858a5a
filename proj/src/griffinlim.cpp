#include "nvx/fft.hpp"
#include "nvx/signal.hpp"

#include <cmath>

namespace nvx {

namespace {

using Cplx = std::complex<double>;
using CplxMat = Eigen::Matrix<Cplx, Eigen::Dynamic, Eigen::Dynamic>;

std::vector<double> hann_window(int n) {
    std::vector<double> w(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        w[static_cast<std::size_t>(i)] =
            0.5 - 0.5 * std::cos(2.0 * M_PI * i / static_cast<double>(n));
    return w;
}

CplxMat complex_stft(const std::vector<double>& x, const Spectrogram& like,
                     const std::vector<double>& window) {
    const int n_bins = like.fft_size / 2 + 1;
    CplxMat out(like.n_frames(), n_bins);
    std::vector<Cplx> buf(static_cast<std::size_t>(like.fft_size));
    for (int t = 0; t < like.n_frames(); ++t) {
        const int off = t * like.hop_samples;
        for (int i = 0; i < like.fft_size; ++i) {
            double v = 0.0;
            if (i < like.window_samples) {
                const std::size_t idx = static_cast<std::size_t>(off + i);
                if (idx < x.size())
                    v = x[idx] * window[static_cast<std::size_t>(i)];
            }
            buf[static_cast<std::size_t>(i)] = Cplx(v, 0.0);
        }
        fft_radix2(buf, false);
        for (int k = 0; k < n_bins; ++k)
            out(t, k) = buf[static_cast<std::size_t>(k)];
    }
    return out;
}

// Least-squares inverse: windowed overlap-add normalized by the summed
// squared window. This makes STFT(istft(.)) a projection, which is what
// gives Griffin-Lim its monotone consistency error.
std::vector<double> istft_ls(const CplxMat& spec, const Spectrogram& like,
                             const std::vector<double>& window) {
    const int n_out = (like.n_frames() - 1) * like.hop_samples + like.window_samples;
    std::vector<double> acc(static_cast<std::size_t>(n_out), 0.0);
    std::vector<double> denom(static_cast<std::size_t>(n_out), 0.0);

    std::vector<Cplx> buf(static_cast<std::size_t>(like.fft_size));
    const int n_bins = like.fft_size / 2 + 1;
    for (int t = 0; t < like.n_frames(); ++t) {
        for (int k = 0; k < n_bins; ++k)
            buf[static_cast<std::size_t>(k)] = spec(t, k);
        for (int k = n_bins; k < like.fft_size; ++k)
            buf[static_cast<std::size_t>(k)] = std::conj(spec(t, like.fft_size - k));
        fft_radix2(buf, true);

        const int off = t * like.hop_samples;
        for (int i = 0; i < like.window_samples; ++i) {
            const double w = window[static_cast<std::size_t>(i)];
            acc[static_cast<std::size_t>(off + i)] +=
                w * buf[static_cast<std::size_t>(i)].real();
            denom[static_cast<std::size_t>(off + i)] += w * w;
        }
    }
    for (std::size_t i = 0; i < acc.size(); ++i)
        acc[i] = (denom[i] > 1e-12) ? acc[i] / denom[i] : 0.0;
    return acc;
}

}  // namespace

GriffinLimTrace griffin_lim_trace(const Spectrogram& s, int iterations, std::uint64_t) {
    if (s.n_frames() < 1 || s.n_bins() < 1)
        throw DimError("griffin_lim: empty spectrogram");
    if (s.n_bins() != s.fft_size / 2 + 1)
        throw DimError("griffin_lim: bin count inconsistent with fft_size");
    if (iterations < 1)
        throw DimError("griffin_lim: need at least one iteration");

    const std::vector<double> window = hann_window(s.window_samples);

    // Zero-phase start: the spectrogram itself, taken as real.
    CplxMat current = s.frames.cast<Cplx>();

    GriffinLimTrace trace;
    trace.consistency.reserve(static_cast<std::size_t>(iterations));

    std::vector<double> x;
    for (int it = 0; it < iterations; ++it) {
        x = istft_ls(current, s, window);
        CplxMat y = complex_stft(x, s, window);

        double err2 = 0.0;
        for (int t = 0; t < s.n_frames(); ++t) {
            for (int k = 0; k < s.n_bins(); ++k) {
                const double mag = std::abs(y(t, k));
                const double d = mag - s.frames(t, k);
                err2 += d * d;
                // Keep the phase, impose the target magnitude.
                current(t, k) = (mag > 1e-300) ? Cplx(s.frames(t, k) / mag) * y(t, k)
                                               : Cplx(s.frames(t, k), 0.0);
            }
        }
        trace.consistency.push_back(std::sqrt(err2));
    }

    trace.waveform.samples = istft_ls(current, s, window);
    trace.waveform.rate_hz = 16000.0;
    return trace;
}

Waveform griffin_lim(const Spectrogram& s, int iterations, std::uint64_t seed) {
    return griffin_lim_trace(s, iterations, seed).waveform;
}

}  // namespace nvx
