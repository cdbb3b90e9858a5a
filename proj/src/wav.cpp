#include "nvx/signal.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

namespace nvx {

namespace {

void put_u32(std::string& s, std::uint32_t v) {
    for (int i = 0; i < 4; ++i)
        s.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u16(std::string& s, std::uint16_t v) {
    for (int i = 0; i < 2; ++i)
        s.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(const std::vector<std::uint8_t>& b, std::size_t off) {
    return static_cast<std::uint32_t>(b[off]) | (static_cast<std::uint32_t>(b[off + 1]) << 8) |
           (static_cast<std::uint32_t>(b[off + 2]) << 16) |
           (static_cast<std::uint32_t>(b[off + 3]) << 24);
}

std::uint16_t get_u16(const std::vector<std::uint8_t>& b, std::size_t off) {
    return static_cast<std::uint16_t>(b[off] | (b[off + 1] << 8));
}

}  // namespace

void write_wav(const std::string& path, const Waveform& w) {
    if (w.rate_hz != 16000.0)
        throw DimError("write_wav: only 16 kHz supported");

    const std::uint32_t n = static_cast<std::uint32_t>(w.samples.size());
    const std::uint32_t data_bytes = n * 2;

    std::string out;
    out.reserve(44 + data_bytes);
    out += "RIFF";
    put_u32(out, 36 + data_bytes);
    out += "WAVE";
    out += "fmt ";
    put_u32(out, 16);
    put_u16(out, 1);       // PCM
    put_u16(out, 1);       // mono
    put_u32(out, 16000);   // sample rate
    put_u32(out, 32000);   // byte rate
    put_u16(out, 2);       // block align
    put_u16(out, 16);      // bits per sample
    out += "data";
    put_u32(out, data_bytes);

    for (double v : w.samples) {
        double scaled = std::round(v * 32767.0);
        scaled = std::clamp(scaled, -32768.0, 32767.0);
        const auto s = static_cast<std::int16_t>(scaled);
        out.push_back(static_cast<char>(s & 0xFF));
        out.push_back(static_cast<char>((s >> 8) & 0xFF));
    }
    write_file_atomic(path, out);
}

Waveform read_wav(const std::string& path) {
    const std::vector<std::uint8_t> b = read_file(path);
    if (b.size() < 12)
        throw TruncatedError("read_wav: file too short: " + path);
    if (std::memcmp(b.data(), "RIFF", 4) != 0 || std::memcmp(b.data() + 8, "WAVE", 4) != 0)
        throw BadMagicError("read_wav: not a RIFF/WAVE file: " + path);

    // Walk the chunk list for fmt and data.
    bool have_fmt = false;
    std::size_t data_off = 0, data_len = 0;
    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    std::size_t off = 12;
    while (off + 8 <= b.size()) {
        const std::uint32_t chunk_len = get_u32(b, off + 4);
        const std::size_t body = off + 8;
        if (std::memcmp(b.data() + off, "fmt ", 4) == 0) {
            if (body + 16 > b.size())
                throw TruncatedError("read_wav: fmt chunk truncated");
            format = get_u16(b, body);
            channels = get_u16(b, body + 2);
            rate = get_u32(b, body + 4);
            bits = get_u16(b, body + 14);
            have_fmt = true;
        } else if (std::memcmp(b.data() + off, "data", 4) == 0) {
            data_off = body;
            data_len = chunk_len;
        }
        off = body + chunk_len + (chunk_len & 1);
    }
    if (!have_fmt || data_off == 0)
        throw TruncatedError("read_wav: missing fmt or data chunk");
    if (format != 1 || channels != 1 || bits != 16 || rate != 16000)
        throw BadVersionError("read_wav: need PCM16 mono 16 kHz");
    if (data_off + data_len > b.size())
        throw TruncatedError("read_wav: data chunk exceeds file");

    Waveform w;
    w.samples.resize(data_len / 2);
    for (std::size_t i = 0; i < w.samples.size(); ++i) {
        const auto s = static_cast<std::int16_t>(
            static_cast<std::uint16_t>(b[data_off + 2 * i] | (b[data_off + 2 * i + 1] << 8)));
        w.samples[i] = static_cast<double>(s) / 32767.0;
    }
    return w;
}

void write_waveform_comparison_csv(const std::string& path, const Waveform& actual,
                                   const Waveform& predicted) {
    const std::size_t n = std::min(actual.samples.size(), predicted.samples.size());

    double peak = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        peak = std::max(peak, std::abs(predicted.samples[i]));
    const double scale = (peak > 0.0) ? 1.0 / peak : 1.0;

    std::ostringstream os;
    os << "index,actual,predicted\n";
    os.precision(8);
    for (std::size_t i = 0; i < n; ++i)
        os << i << ',' << actual.samples[i] << ',' << predicted.samples[i] * scale << '\n';
    write_file_atomic(path, os.str());
}

}  // namespace nvx
