#include "nvx/data.hpp"

#include <bit>
#include <cstring>
#include <set>

namespace nvx {

void Corpus::validate() const {
    std::set<std::string> ids;
    for (const Utterance& u : utterances) {
        if (!ids.insert(u.id).second) throw DimError("Corpus: duplicate utterance id " + u.id);
        u.eeg.validate();
        u.articulatory.validate();
        u.mfcc.validate();
        if (u.eeg.kind != FeatureKind::eeg || u.articulatory.kind != FeatureKind::articulatory ||
            u.mfcc.kind != FeatureKind::mfcc)
            throw DimError("Corpus: wrong feature kind in utterance " + u.id);
        if (u.eeg.frames() != u.mfcc.frames() || u.eeg.frames() != u.articulatory.frames())
            throw DimError("Corpus: frame counts differ within utterance " + u.id);
        if (u.eeg.rate_hz != u.mfcc.rate_hz || u.eeg.rate_hz != u.articulatory.rate_hz)
            throw DimError("Corpus: rates differ within utterance " + u.id);
    }
}

void SynthConfig::validate() const {
    if (n_utterances < 1 || t_min < 1 || t_max < t_min) throw DimError("SynthConfig: bad counts");
    if (eeg_dim != 30 && eeg_dim != 50 && eeg_dim != 93)
        throw DimError("SynthConfig: eeg_dim must be 30, 50 or 93");
    if (mfcc_dim != 13 && mfcc_dim != 128)
        throw DimError("SynthConfig: mfcc_dim must be 13 or 128");
    if (rate_hz != 100.0 && rate_hz != 32.0)
        throw DimError("SynthConfig: rate must be 100 or 32 Hz");
    if (noise_std < 0.0) throw DimError("SynthConfig: negative noise_std");
}

// ---------------------------------------------------------------------------
// FMAT serialization
// ---------------------------------------------------------------------------

namespace {

constexpr std::uint32_t kFmatVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::string& out, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(const std::vector<std::uint8_t>& s, std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(s[at + i]) << (8 * i);
    return v;
}

double get_f64(const std::vector<std::uint8_t>& s, std::size_t at) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(s[at + i]) << (8 * i);
    return std::bit_cast<double>(v);
}

}  // namespace

void write_features(const std::string& path, const FeatureSequence& f) {
    f.validate();
    std::string out;
    out.reserve(25 + static_cast<std::size_t>(f.data.size()) * 4 + 4);
    out += "FMAT";
    put_u32(out, kFmatVersion);
    out.push_back(static_cast<char>(f.kind));
    put_u32(out, static_cast<std::uint32_t>(f.frames()));
    put_u32(out, static_cast<std::uint32_t>(f.dims()));
    put_f64(out, f.rate_hz);
    for (int t = 0; t < f.frames(); ++t)
        for (int d = 0; d < f.dims(); ++d)
            put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(f.data(t, d))));
    put_u32(out, crc32(out.data(), out.size()));
    write_file_atomic(path, out);
}

FeatureSequence read_features(const std::string& path) {
    const std::vector<std::uint8_t> s = read_file(path);
    if (s.size() < 4 || std::memcmp(s.data(), "FMAT", 4) != 0)
        throw BadMagicError("not a feature file: " + path);
    if (s.size() < 25 + 4) throw TruncatedError("feature file header truncated: " + path);
    const std::uint32_t version = get_u32(s, 4);
    if (version != kFmatVersion)
        throw BadVersionError("unsupported feature file version " + std::to_string(version));
    const auto kind_byte = static_cast<unsigned char>(s[8]);
    if (kind_byte > 2) throw IoError("unknown feature kind tag in " + path);
    const std::uint32_t t_len = get_u32(s, 9);
    const std::uint32_t d_len = get_u32(s, 13);
    const double rate = get_f64(s, 17);

    const std::size_t payload = static_cast<std::size_t>(t_len) * d_len * 4;
    const std::size_t expected = 25 + payload + 4;
    if (s.size() != expected) throw TruncatedError("feature file length mismatch: " + path);
    const std::uint32_t want_crc = get_u32(s, s.size() - 4);
    if (crc32(s.data(), s.size() - 4) != want_crc)
        throw CrcError("feature file checksum mismatch: " + path);

    FeatureSequence f;
    f.kind = static_cast<FeatureKind>(kind_byte);
    f.rate_hz = rate;
    f.data.resize(t_len, d_len);
    std::size_t at = 25;
    for (std::uint32_t t = 0; t < t_len; ++t)
        for (std::uint32_t d = 0; d < d_len; ++d, at += 4)
            f.data(t, d) = static_cast<double>(std::bit_cast<float>(get_u32(s, at)));
    f.validate();
    return f;
}

}  // namespace nvx
