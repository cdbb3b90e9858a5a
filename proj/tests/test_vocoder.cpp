#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "nvx/common.hpp"
#include "nvx/signal.hpp"

using namespace nvx;

namespace {

// Frequency-averaged magnitude peak of a waveform under the given analysis
// config; returns the FFT bin index of the strongest non-DC bin.
int dominant_bin(const Waveform& w, const MfccConfig& cfg) {
  const Spectrogram s = stft_magnitude(w, cfg);
  Vec mean = s.frames.colwise().mean();
  int best = 1;
  for (int k = 2; k < mean.size(); ++k)
    if (mean(k) > mean(best)) best = k;
  return best;
}

}  // namespace

TEST_CASE("zero spectrogram reconstructs to silence") {
  Spectrogram s;
  s.fft_size = 512;
  s.hop_samples = 160;
  s.window_samples = 400;
  s.frames = Mat::Zero(10, 257);
  const Waveform w = griffin_lim(s, 5, 0);
  REQUIRE(w.samples.size() == static_cast<std::size_t>(9 * 160 + 400));
  for (double v : w.samples) CHECK(v == 0.0);
}

TEST_CASE("griffin_lim rejects bad input") {
  Spectrogram empty;
  empty.fft_size = 512;
  empty.hop_samples = 160;
  empty.window_samples = 400;
  empty.frames = Mat(0, 257);
  CHECK_THROWS_AS(griffin_lim(empty, 5, 0), DimError);

  Spectrogram wrong = empty;
  wrong.frames = Mat::Ones(4, 100);
  CHECK_THROWS_AS(griffin_lim(wrong, 5, 0), DimError);

  Spectrogram ok = empty;
  ok.frames = Mat::Ones(4, 257);
  CHECK_THROWS_AS(griffin_lim(ok, 0, 0), DimError);
}

TEST_CASE("440 Hz tone round trip keeps its spectral peak") {
  const MfccConfig cfg = MfccConfig::for_rate(13, 100.0);
  const Waveform tone = testing::pure_tone(440.0, 1.0);
  const Spectrogram s = stft_magnitude(tone, cfg);
  const int bin_in = dominant_bin(tone, cfg);

  const Waveform rec = griffin_lim(s, 60, 0);
  CHECK(rec.samples.size() == static_cast<std::size_t>((s.n_frames() - 1) * 160 + 400));
  const int bin_out = dominant_bin(rec, cfg);
  CHECK(std::abs(bin_out - bin_in) <= 1);
  // 440 Hz sits at bin 440/(16000/512) = 14.08.
  CHECK(std::abs(bin_in - 14) <= 1);
}

TEST_CASE("consistency error is non-increasing") {
  const MfccConfig cfg = MfccConfig::for_rate(13, 100.0);
  const Waveform w = testing::speech_like(1.0, 77);
  const Spectrogram s = stft_magnitude(w, cfg);
  const GriffinLimTrace trace = griffin_lim_trace(s, 60, 0);
  REQUIRE(trace.consistency.size() == 60);
  for (std::size_t k = 1; k < trace.consistency.size(); ++k)
    CHECK(trace.consistency[k] <= trace.consistency[k - 1] + 1e-9);
  CHECK(trace.consistency.back() < trace.consistency.front());
}

TEST_CASE("griffin_lim is deterministic") {
  const MfccConfig cfg = MfccConfig::for_rate(13, 100.0);
  const Spectrogram s = stft_magnitude(testing::speech_like(0.5, 5), cfg);
  const Waveform a = griffin_lim(s, 20, 123);
  const Waveform b = griffin_lim(s, 20, 123);
  REQUIRE(a.samples.size() == b.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i) CHECK(a.samples[i] == b.samples[i]);
}

TEST_CASE("analysis-synthesis round trip stays under the frozen MCD ceiling") {
  // Ceiling frozen from an oracle run of this exact chain on seeds 40..44:
  // measured max 20.45 at 60 iterations (z-scoring inflates the score; even a
  // consistent-magnitude round trip measures ~22 because small-variance
  // coefficients are divided by their tiny stddev). Threshold adds ~17%
  // margin and guards the mel pseudo-inverse plus phase recovery jointly.
  const MfccConfig cfg = MfccConfig::for_rate(13, 100.0);
  double worst = 0.0;
  for (std::uint64_t seed = 40; seed < 45; ++seed) {
    const Waveform w = testing::speech_like(1.0, seed);
    const FeatureSequence truth = extract_mfcc(w, cfg);
    const Spectrogram inv = invert_mfcc(truth, cfg);
    const Waveform rec = griffin_lim(inv, 60, 0);
    const FeatureSequence pred = extract_mfcc(rec, cfg);

    const int t = std::min(pred.frames(), truth.frames());
    FeatureSequence a = truth, b = pred;
    a.data = truth.data.topRows(t);
    b.data = pred.data.topRows(t);
    const NormStats stats = NormStats::fit(a.data);
    const double score = mcd(znormalize(b, stats), znormalize(a, stats));
    worst = std::max(worst, score);
  }
  CHECK(worst <= 24.0);
}
