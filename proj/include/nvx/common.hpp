// Shared basics: matrix aliases, error taxonomy, CRC32, portable RNG.

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace nvx {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

// Shape/precondition violations on in-memory values.
struct DimError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// File/container problems. Subclasses let callers (and tests) tell the
// failure modes apart.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct BadMagicError : IoError {
    using IoError::IoError;
};
struct BadVersionError : IoError {
    using IoError::IoError;
};
struct TruncatedError : IoError {
    using IoError::IoError;
};
struct CrcError : IoError {
    using IoError::IoError;
};

// ---------------------------------------------------------------------------
// CRC32 (IEEE 802.3, reflected, as in zlib)
// ---------------------------------------------------------------------------

std::uint32_t crc32(const void* data, std::size_t len, std::uint32_t seed = 0);

// ---------------------------------------------------------------------------
// Rng: SplitMix64 core with explicitly coded distributions.
//
// Every draw is a fixed sequence of IEEE-754 double ops on SplitMix64
// outputs, so a seed reproduces the same stream on any platform. Standard
// library distributions are avoided on purpose: their output is
// implementation-defined.
// ---------------------------------------------------------------------------

class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1) with 53 bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // next_u64() % n without modulo bias is overkill here; n is tiny
    // relative to 2^64 in every call site.
    std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

    // Box-Muller; the spare value is cached so draws come in a fixed order.
    double gaussian();

    bool bernoulli(double p) { return uniform() < p; }

    // Independent substream derived from a parent seed and a tag.
    static std::uint64_t derive(std::uint64_t seed, std::uint64_t tag);

  private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// Fisher-Yates shuffle driven by this module's Rng (std::shuffle is
// implementation-defined).
template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng.below(i));
        std::swap(v[i - 1], v[j]);
    }
}

// ---------------------------------------------------------------------------
// Atomic file writes: write to <path>.tmp, rename into place on success.
// ---------------------------------------------------------------------------

void write_file_atomic(const std::string& path, const void* data, std::size_t len);
void write_file_atomic(const std::string& path, const std::string& text);
std::vector<std::uint8_t> read_file(const std::string& path);

bool all_finite(const Mat& m);

}  // namespace nvx
