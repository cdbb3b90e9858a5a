#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "nvx/common.hpp"
#include "nvx/signal.hpp"

using namespace nvx;

namespace {

double rms(const std::vector<double>& x, std::size_t from = 0) {
  double s = 0.0;
  for (std::size_t i = from; i < x.size(); ++i) s += x[i] * x[i];
  return std::sqrt(s / static_cast<double>(x.size() - from));
}

// Direct-form difference equation, the textbook recurrence the DF2T loop must match.
std::vector<double> filter_reference(const IirFilter& f, const std::vector<double>& x) {
  std::vector<double> y(x.size(), 0.0);
  for (std::size_t n = 0; n < x.size(); ++n) {
    double acc = 0.0;
    for (std::size_t k = 0; k < f.b.size(); ++k)
      if (n >= k) acc += f.b[k] * x[n - k];
    for (std::size_t k = 1; k < f.a.size(); ++k)
      if (n >= k) acc -= f.a[k] * y[n - k];
    y[n] = acc;
  }
  return y;
}

}  // namespace

TEST_CASE("bandpass design meets the response template") {
  const IirFilter f = design_bandpass(0.1, 70.0, 4, 1000.0);
  CHECK(f.stable());
  CHECK(f.a[0] == 1.0);
  CHECK(std::abs(filter_response(f, 0.0, 1000.0)) <= 1e-3);
  const double mid = std::abs(filter_response(f, std::sqrt(0.1 * 70.0), 1000.0));
  CHECK(mid >= 0.7);
  CHECK(mid <= 1.1);
  CHECK(std::abs(filter_response(f, 500.0, 1000.0)) <= 1e-3);
}

TEST_CASE("bandpass rejects bad arguments") {
  CHECK_THROWS_AS(design_bandpass(0.1, 70.0, 3, 1000.0), DimError);
  CHECK_THROWS_AS(design_bandpass(70.0, 0.1, 4, 1000.0), DimError);
  CHECK_THROWS_AS(design_bandpass(0.1, 600.0, 4, 1000.0), DimError);
  CHECK_THROWS_AS(design_bandpass(0.0, 70.0, 4, 1000.0), DimError);
}

TEST_CASE("notch kills its center and passes the band edges") {
  const IirFilter f = design_notch(60.0, 30.0, 1000.0);
  CHECK(f.stable());
  CHECK(std::abs(filter_response(f, 60.0, 1000.0)) <= 0.03);
  CHECK(std::abs(filter_response(f, 5.0, 1000.0)) == doctest::Approx(1.0).epsilon(0.05));
  CHECK(std::abs(filter_response(f, 300.0, 1000.0)) == doctest::Approx(1.0).epsilon(0.05));

  // 2 s of mains hum; after the transient the residual must be tiny.
  std::vector<double> hum(2000);
  for (std::size_t i = 0; i < hum.size(); ++i)
    hum[i] = std::sin(2.0 * M_PI * 60.0 * static_cast<double>(i) / 1000.0);
  const std::vector<double> out = iir_filter(f, hum);
  const double in_rms = rms(hum, 500);
  CHECK(rms(out, 500) <= 0.05 * in_rms);
}

TEST_CASE("iir_filter matches the direct recurrence") {
  const IirFilter f = design_bandpass(0.1, 70.0, 4, 1000.0);
  Rng rng(11);
  std::vector<double> x(256);
  for (double& v : x) v = rng.gaussian();
  const std::vector<double> got = iir_filter(f, x);
  const std::vector<double> want = filter_reference(f, x);
  for (std::size_t i = 0; i < x.size(); ++i)
    CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-10));
}

TEST_CASE("iir_filter identity and zero behavior") {
  IirFilter ident;
  ident.b = {1.0};
  ident.a = {1.0};
  std::vector<double> x = {0.5, -1.25, 3.0};
  CHECK(iir_filter(ident, x) == x);

  const IirFilter f = design_notch(60.0, 30.0, 1000.0);
  const std::vector<double> zeros(64, 0.0);
  for (double v : iir_filter(f, zeros)) CHECK(v == 0.0);

  std::vector<double> bad = {1.0, std::nan(""), 0.0};
  CHECK_THROWS_AS(iir_filter(f, bad), DimError);
}

TEST_CASE("iir_filter_columns applies the filter per channel") {
  const IirFilter bp = design_bandpass(0.1, 70.0, 4, 1000.0);
  const IirFilter nt = design_notch(60.0, 30.0, 1000.0);
  Rng rng(7);
  Mat x(128, 3);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.gaussian();
  const Mat y = iir_filter_columns(nt, iir_filter_columns(bp, x));
  REQUIRE(y.rows() == x.rows());
  REQUIRE(y.cols() == x.cols());
  for (int c = 0; c < 3; ++c) {
    std::vector<double> col(static_cast<std::size_t>(x.rows()));
    for (int i = 0; i < x.rows(); ++i) col[static_cast<std::size_t>(i)] = x(i, c);
    const std::vector<double> want = iir_filter(nt, iir_filter(bp, col));
    for (int i = 0; i < x.rows(); ++i)
      CHECK(y(i, c) == doctest::Approx(want[static_cast<std::size_t>(i)]).epsilon(1e-12));
  }
}

TEST_CASE("mfcc configs pin the published frame geometry") {
  const MfccConfig fast = MfccConfig::for_rate(13, 100.0);
  CHECK(fast.window_samples == 400);
  CHECK(fast.hop_samples == 160);
  CHECK(fast.fft_size == 512);
  CHECK(fast.n_mel_bands == 40);

  const MfccConfig slow = MfccConfig::for_rate(128, 32.0);
  CHECK(slow.window_samples == 1024);
  CHECK(slow.hop_samples == 500);
  CHECK(slow.fft_size == 1024);
  CHECK(slow.n_mel_bands == 128);

  MfccConfig bad = fast;
  bad.hop_samples = 161;
  CHECK_THROWS_AS(bad.validate(), DimError);
  bad = fast;
  bad.fft_size = 300;
  CHECK_THROWS_AS(bad.validate(), DimError);
}

TEST_CASE("extract_mfcc frame count and dimensions") {
  const Waveform w = testing::speech_like(1.0, 3);
  const MfccConfig cfg = MfccConfig::for_rate(13, 100.0);
  const FeatureSequence seq = extract_mfcc(w, cfg);
  CHECK(seq.frames() == 98);  // 1 + (16000 - 400) / 160
  CHECK(seq.dims() == 13);
  CHECK(seq.kind == FeatureKind::mfcc);
  CHECK(seq.rate_hz == doctest::Approx(100.0));
  seq.validate();

  const MfccConfig cfg128 = MfccConfig::for_rate(128, 32.0);
  const FeatureSequence seq128 = extract_mfcc(testing::speech_like(2.0, 3), cfg128);
  CHECK(seq128.dims() == 128);
  CHECK(seq128.frames() == 1 + (32000 - 1024) / 500);
}

TEST_CASE("silence maps to the log-floor cepstrum") {
  Waveform w;
  w.samples.assign(16000, 0.0);
  const MfccConfig cfg = MfccConfig::for_rate(13, 100.0);
  const FeatureSequence seq = extract_mfcc(w, cfg);
  // All mel energies sit on the floor, so only the DC cepstral term survives:
  // c0 = sqrt(1/40) * 40 * ln(1e-10) = sqrt(40) * ln(1e-10).
  const double c0 = std::sqrt(40.0) * std::log(1e-10);
  for (int t = 0; t < seq.data.rows(); ++t) {
    CHECK(seq.data(t, 0) == doctest::Approx(c0).epsilon(1e-9));
    for (int d = 1; d < 13; ++d) CHECK(std::abs(seq.data(t, d)) <= 1e-9);
  }
}

TEST_CASE("extract_mfcc is deterministic") {
  const Waveform w = testing::speech_like(0.5, 9);
  const MfccConfig cfg = MfccConfig::for_rate(13, 100.0);
  const FeatureSequence a = extract_mfcc(w, cfg);
  const FeatureSequence b = extract_mfcc(w, cfg);
  CHECK(a.data == b.data);
}

TEST_CASE("dct matrix is orthonormal") {
  const Mat d = dct_matrix(40);
  const Mat eye = d * d.transpose();
  CHECK((eye - Mat::Identity(40, 40)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("mel filterbank shape and coverage") {
  const Mat bank = mel_filterbank(40, 512, 16000.0);
  REQUIRE(bank.rows() == 40);
  REQUIRE(bank.cols() == 257);
  CHECK(bank.minCoeff() >= 0.0);
  CHECK(bank.maxCoeff() <= 1.0 + 1e-12);
  // Triangles are unit-peak in continuous frequency; the discrete grid samples
  // near but not exactly at the apex.
  for (int m = 0; m < bank.rows(); ++m) {
    CHECK(bank.row(m).maxCoeff() > 0.2);
  }
  // Interior bins are covered by at least one triangle.
  for (int k = 8; k < 250; ++k) CHECK(bank.col(k).maxCoeff() > 0.0);
}

TEST_CASE("invert_mfcc basics") {
  const MfccConfig cfg = MfccConfig::for_rate(13, 100.0);
  FeatureSequence zeros;
  zeros.data = Mat::Zero(5, 13);
  zeros.rate_hz = 100.0;
  zeros.kind = FeatureKind::mfcc;
  const Spectrogram s = invert_mfcc(zeros, cfg);
  REQUIRE(s.frames.rows() == 5);
  REQUIRE(s.frames.cols() == 257);
  CHECK(s.frames.minCoeff() >= 0.0);
  for (int t = 1; t < 5; ++t)
    CHECK((s.frames.row(t) - s.frames.row(0)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("full-resolution cepstra survive the mel round trip") {
  // With as many cepstral coefficients as mel bands the DCT truncation is the
  // identity, so log-mel energies recomputed from the inverted spectrogram
  // should track the originals closely.
  const MfccConfig cfg = MfccConfig::for_rate(128, 32.0);
  const Waveform w = testing::speech_like(2.0, 21);
  const FeatureSequence seq = extract_mfcc(w, cfg);
  const Spectrogram inv = invert_mfcc(seq, cfg);

  const Mat bank = mel_filterbank(cfg.n_mel_bands, cfg.fft_size, 16000.0);
  const Mat logmel_rt =
      (inv.frames * bank.transpose()).cwiseMax(cfg.log_floor).array().log();
  const Mat dct = dct_matrix(cfg.n_mel_bands);
  const Mat logmel_src = seq.data * dct;  // full-width cepstra, inverse is transpose
  const double rel = (logmel_rt - logmel_src).norm() / logmel_src.norm();
  CHECK(rel <= 0.15);
}

TEST_CASE("znormalize and NormStats") {
  Rng rng(5);
  FeatureSequence x;
  x.data.resize(200, 4);
  x.rate_hz = 100.0;
  for (Eigen::Index i = 0; i < x.data.size(); ++i) x.data.data()[i] = 2.0 + 3.0 * rng.gaussian();
  x.data.col(2).setConstant(7.0);

  const NormStats stats = NormStats::fit(x.data);
  CHECK(stats.stddev(2) == 1.0);  // constant dim degrades to identity scaling
  const Mat z = znormalize(x, stats).data;
  for (int d = 0; d < 4; ++d) {
    const double mu = z.col(d).mean();
    CHECK(std::abs(mu) <= 1e-10);
    if (d != 2) {
      const double var = (z.col(d).array() - mu).square().sum() / static_cast<double>(z.rows());
      CHECK(var == doctest::Approx(1.0).epsilon(1e-9));
    } else {
      CHECK(z.col(d).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }

  NormStats wrong = stats;
  wrong.mean = Vec::Zero(3);
  wrong.stddev = Vec::Ones(3);
  CHECK_THROWS_AS(znormalize(x, wrong), DimError);
}

TEST_CASE("pooled stats match concatenation") {
  Rng rng(17);
  Mat a(30, 3), b(50, 3);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = rng.gaussian();
  for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = 1.0 + 0.5 * rng.gaussian();
  const NormStats pooled = NormStats::fit_pooled({&a, &b});
  Mat cat(80, 3);
  cat << a, b;
  const NormStats direct = NormStats::fit(cat);
  CHECK((pooled.mean - direct.mean).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((pooled.stddev - direct.stddev).cwiseAbs().maxCoeff() <= 1e-12);
}

namespace {

FeatureSequence mfcc_seq(const Mat& m) {
  FeatureSequence f;
  f.data = m;
  f.rate_hz = 100.0;
  f.kind = FeatureKind::mfcc;
  return f;
}

}  // namespace

TEST_CASE("mcd closed forms") {
  const FeatureSequence a = mfcc_seq(Mat::Zero(10, 13));
  CHECK(mcd(a, a) == 0.0);

  FeatureSequence b = a;
  b.data.col(3).setConstant(0.5);
  const double expect = (10.0 / std::log(10.0)) * std::sqrt(2.0) * 0.5;
  CHECK(std::abs(mcd(a, b) - expect) <= 1e-12);
  CHECK(std::abs(mcd(b, a) - expect) <= 1e-12);

  // Coefficient 0 is excluded by construction.
  FeatureSequence c = a;
  c.data.col(0).setConstant(123.0);
  CHECK(mcd(a, c) == 0.0);

  const FeatureSequence wrong = mfcc_seq(Mat::Zero(10, 12));
  CHECK_THROWS_AS(mcd(a, wrong), DimError);
  const FeatureSequence one_col = mfcc_seq(Mat::Zero(10, 1));
  CHECK_THROWS_AS(mcd(one_col, one_col), DimError);
}

TEST_CASE("mcd is nonnegative and symmetric") {
  Rng rng(23);
  Mat am(6, 13), bm(6, 13);
  for (Eigen::Index i = 0; i < am.size(); ++i) {
    am.data()[i] = rng.gaussian();
    bm.data()[i] = rng.gaussian();
  }
  const FeatureSequence a = mfcc_seq(am), b = mfcc_seq(bm);
  const double ab = mcd(a, b);
  CHECK(ab >= 0.0);
  CHECK(std::abs(ab - mcd(b, a)) <= 1e-12);
}

TEST_CASE("wav round trip at int16 precision") {
  const Waveform w = testing::speech_like(0.25, 31);
  const std::filesystem::path path = std::filesystem::temp_directory_path() / "nvx_rt.wav";
  write_wav(path.string(), w);
  const Waveform back = read_wav(path.string());
  REQUIRE(back.samples.size() == w.samples.size());
  CHECK(back.rate_hz == doctest::Approx(16000.0));
  for (std::size_t i = 0; i < w.samples.size(); ++i)
    CHECK(std::abs(back.samples[i] - w.samples[i]) <= 1.0 / 32767.0 + 1e-12);
  std::filesystem::remove(path);
}

TEST_CASE("wav reader rejects foreign bytes") {
  const std::filesystem::path path = std::filesystem::temp_directory_path() / "nvx_bad.wav";
  {
    std::ofstream out(path, std::ios::binary);
    out << "MIFF----this is not audio";
  }
  CHECK_THROWS_AS(read_wav(path.string()), BadMagicError);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(read_wav(path.string()), IoError);
}

TEST_CASE("comparison csv is rectangular") {
  Waveform actual = testing::pure_tone(440.0, 0.05);
  Waveform pred = testing::pure_tone(440.0, 0.04, 0.1);
  const std::filesystem::path path = std::filesystem::temp_directory_path() / "nvx_cmp.csv";
  write_waveform_comparison_csv(path.string(), actual, pred);
  std::ifstream in(path);
  std::string line;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    CHECK(std::count(line.begin(), line.end(), ',') == 2);
    ++rows;
  }
  CHECK(rows == pred.samples.size() + 1);  // header + min-length rows
  std::filesystem::remove(path);
}
