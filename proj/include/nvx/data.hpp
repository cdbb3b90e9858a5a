// Feature-file I/O and the deterministic synthetic corpus generator.

#pragma once

#include "nvx/signal.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace nvx {

struct Utterance {
    std::string id;
    FeatureSequence eeg;
    FeatureSequence articulatory;
    FeatureSequence mfcc;
    std::optional<Waveform> waveform;
};

struct Corpus {
    std::vector<Utterance> utterances;

    int size() const { return static_cast<int>(utterances.size()); }
    // Unique ids; within an utterance all sequences share T and rate.
    void validate() const;
};

struct SynthConfig {
    int n_utterances = 10;
    int t_min = 14;
    int t_max = 24;
    int eeg_dim = 30;    // 30, 50 or 93
    int mfcc_dim = 13;   // 13 or 128
    double rate_hz = 100.0;
    double noise_std = 0.05;
    std::uint64_t seed = 1;
    bool with_waveform = false;

    void validate() const;
};

// ---------------------------------------------------------------------------
// FMAT container
// ---------------------------------------------------------------------------

// Layout: "FMAT" | version u32 | kind u8 | T u32 | D u32 | rate f64 |
// T*D f32 row-major | CRC32 of all preceding bytes. Little-endian throughout.
void write_features(const std::string& path, const FeatureSequence& f);
FeatureSequence read_features(const std::string& path);

// ---------------------------------------------------------------------------
// Synthetic corpus
// ---------------------------------------------------------------------------

// Seeded triples tied by a shared 6-dim latent trajectory: EEG is a noisy
// linear view of the latent; acoustics are a noisy nonlinear map of a blend
// of the current and a near-future latent frame, so causal one-to-one
// decoders face irreducible error that attention over the whole input can
// remove.
Corpus gen_synthetic_corpus(const SynthConfig& cfg);

// ---------------------------------------------------------------------------
// Ridge oracle
// ---------------------------------------------------------------------------

struct RidgeFit {
    Mat weights;    // Dx x Dy
    Vec intercept;  // Dy
    double residual = 0.0;  // mean squared residual per element

    Mat predict(const Mat& x) const;
};

// Closed-form ridge regression used to certify that generated corpora carry
// signal. lambda = 0 on a singular system is an error.
RidgeFit ridge_oracle(const Mat& x, const Mat& y, double lambda);

// Stacks per-frame lag windows of x (offsets in [-radius, radius], edge
// clamped) so the oracle can see the same temporal context attention does.
Mat lag_window(const Mat& x, int radius);

}  // namespace nvx
