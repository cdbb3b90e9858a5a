#pragma once

#include <cmath>
#include <vector>

#include "nvx/common.hpp"
#include "nvx/signal.hpp"

namespace nvx::testing {

// Harmonic stack with a slow amplitude envelope and a drifting fundamental.
// Deterministic in the seed; spectrally rich enough to exercise the mel bank.
inline Waveform speech_like(double seconds, std::uint64_t seed) {
  Rng rng(seed);
  const double fs = 16000.0;
  const std::size_t n = static_cast<std::size_t>(seconds * fs);
  const double f0 = rng.uniform(110.0, 150.0);
  const double drift = rng.uniform(-8.0, 8.0);
  std::vector<double> amp(12), phase(12);
  for (std::size_t h = 0; h < amp.size(); ++h) {
    amp[h] = std::pow(0.72, static_cast<double>(h)) * rng.uniform(0.6, 1.0);
    phase[h] = rng.uniform(0.0, 2.0 * M_PI);
  }
  Waveform w;
  w.rate_hz = fs;
  w.samples.resize(n);
  double inst_phase = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / fs;
    const double f = f0 + drift * t;
    inst_phase += 2.0 * M_PI * f / fs;
    const double env = 0.55 + 0.45 * std::sin(2.0 * M_PI * 2.3 * t);
    double s = 0.0;
    for (std::size_t h = 0; h < amp.size(); ++h)
      s += amp[h] * std::sin(static_cast<double>(h + 1) * inst_phase + phase[h]);
    w.samples[i] = 0.12 * env * s;
  }
  return w;
}

inline Waveform pure_tone(double freq_hz, double seconds, double gain = 0.5) {
  Waveform w;
  w.rate_hz = 16000.0;
  const std::size_t n = static_cast<std::size_t>(seconds * w.rate_hz);
  w.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    w.samples[i] = gain * std::sin(2.0 * M_PI * freq_hz * static_cast<double>(i) / w.rate_hz);
  return w;
}

}  // namespace nvx::testing
