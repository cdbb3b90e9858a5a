#include "nvx/train.hpp"

#include "json.hpp"

#include <bit>
#include <cstring>
#include <map>

namespace nvx {

namespace {

constexpr std::uint32_t kCkptVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::string& out, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

void put_tensor(std::string& out, const std::string& name, const Mat& m) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put_u32(out, static_cast<std::uint32_t>(m.rows()));
    put_u32(out, static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) put_f64(out, m(i, j));
}

void put_tensor(std::string& out, const std::string& name, const Vec& v) {
    put_tensor(out, name, Mat(v));
}

void put_model(std::string& out, const std::string& prefix, const ModelParams& m) {
    put_tensor(out, prefix + ".encoder.wz", m.encoder.wz);
    put_tensor(out, prefix + ".encoder.wr", m.encoder.wr);
    put_tensor(out, prefix + ".encoder.wh", m.encoder.wh);
    put_tensor(out, prefix + ".encoder.uz", m.encoder.uz);
    put_tensor(out, prefix + ".encoder.ur", m.encoder.ur);
    put_tensor(out, prefix + ".encoder.uh", m.encoder.uh);
    put_tensor(out, prefix + ".encoder.bz", m.encoder.bz);
    put_tensor(out, prefix + ".encoder.br", m.encoder.br);
    put_tensor(out, prefix + ".encoder.bh", m.encoder.bh);
    put_tensor(out, prefix + ".attention_w", m.attention_w);
    put_tensor(out, prefix + ".decoder.wz", m.decoder.wz);
    put_tensor(out, prefix + ".decoder.wr", m.decoder.wr);
    put_tensor(out, prefix + ".decoder.wh", m.decoder.wh);
    put_tensor(out, prefix + ".decoder.uz", m.decoder.uz);
    put_tensor(out, prefix + ".decoder.ur", m.decoder.ur);
    put_tensor(out, prefix + ".decoder.uh", m.decoder.uh);
    put_tensor(out, prefix + ".decoder.bz", m.decoder.bz);
    put_tensor(out, prefix + ".decoder.br", m.decoder.br);
    put_tensor(out, prefix + ".decoder.bh", m.decoder.bh);
    put_tensor(out, prefix + ".head_w", m.head_w);
    put_tensor(out, prefix + ".head_b", m.head_b);
}

struct Reader {
    const std::vector<std::uint8_t>& b;
    std::size_t at = 0;
    std::size_t end = 0;  // first CRC byte

    void need(std::size_t n) const {
        if (at + n > end) throw TruncatedError("checkpoint record runs past the payload");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[at + i]) << (8 * i);
        at += 4;
        return v;
    }
    double f64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[at + i]) << (8 * i);
        at += 8;
        return std::bit_cast<double>(v);
    }
    std::string text(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(b.data() + at), n);
        at += n;
        return s;
    }
};

Kernel kernel_from_name(const std::string& name) {
    if (name == kernel_name(Kernel::rbf)) return Kernel::rbf;
    if (name == kernel_name(Kernel::linear)) return Kernel::linear;
    throw IoError("checkpoint: unknown kernel name " + name);
}

Approach approach_from_name(const std::string& name) {
    if (name == approach_name(Approach::direct)) return Approach::direct;
    if (name == approach_name(Approach::two_step)) return Approach::two_step;
    throw IoError("checkpoint: unknown approach " + name);
}

using TensorMap = std::map<std::string, Mat>;

Mat take(TensorMap& tensors, const std::string& name) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw IoError("checkpoint: missing tensor " + name);
    Mat m = std::move(it->second);
    tensors.erase(it);
    return m;
}

Vec take_vec(TensorMap& tensors, const std::string& name) {
    Mat m = take(tensors, name);
    if (m.cols() != 1) throw IoError("checkpoint: tensor " + name + " is not a vector");
    return Vec(m.col(0));
}

ModelParams take_model(TensorMap& tensors, const std::string& prefix) {
    ModelParams m;
    m.encoder.wz = take(tensors, prefix + ".encoder.wz");
    m.encoder.wr = take(tensors, prefix + ".encoder.wr");
    m.encoder.wh = take(tensors, prefix + ".encoder.wh");
    m.encoder.uz = take(tensors, prefix + ".encoder.uz");
    m.encoder.ur = take(tensors, prefix + ".encoder.ur");
    m.encoder.uh = take(tensors, prefix + ".encoder.uh");
    m.encoder.bz = take_vec(tensors, prefix + ".encoder.bz");
    m.encoder.br = take_vec(tensors, prefix + ".encoder.br");
    m.encoder.bh = take_vec(tensors, prefix + ".encoder.bh");
    m.encoder.input_dim = static_cast<int>(m.encoder.wz.cols());
    m.encoder.hidden_dim = static_cast<int>(m.encoder.wz.rows());
    m.attention_w = take(tensors, prefix + ".attention_w");
    m.decoder.wz = take(tensors, prefix + ".decoder.wz");
    m.decoder.wr = take(tensors, prefix + ".decoder.wr");
    m.decoder.wh = take(tensors, prefix + ".decoder.wh");
    m.decoder.uz = take(tensors, prefix + ".decoder.uz");
    m.decoder.ur = take(tensors, prefix + ".decoder.ur");
    m.decoder.uh = take(tensors, prefix + ".decoder.uh");
    m.decoder.bz = take_vec(tensors, prefix + ".decoder.bz");
    m.decoder.br = take_vec(tensors, prefix + ".decoder.br");
    m.decoder.bh = take_vec(tensors, prefix + ".decoder.bh");
    m.decoder.input_dim = static_cast<int>(m.decoder.wz.cols());
    m.decoder.hidden_dim = static_cast<int>(m.decoder.wz.rows());
    m.head_w = take(tensors, prefix + ".head_w");
    m.head_b = take_vec(tensors, prefix + ".head_b");
    m.validate();
    return m;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    ck.config.validate();
    ck.first.validate();
    if (ck.second) ck.second->validate();

    nlohmann::ordered_json cfg;
    cfg["epochs"] = ck.config.epochs;
    cfg["batch_size"] = ck.config.batch_size;
    cfg["seed"] = ck.config.seed;
    cfg["approach"] = approach_name(ck.config.approach);
    cfg["feature_set"] = ck.config.feature_set;
    cfg["mfcc_dim"] = ck.config.mfcc_dim;
    cfg["rate_hz"] = ck.config.rate_hz;
    cfg["stage2_ground_truth"] = ck.config.stage2_ground_truth;
    cfg["models"] = ck.second ? 2 : 1;
    if (ck.reduction) {
        cfg["kpca"] = {{"kernel", kernel_name(ck.reduction->kernel)},
                       {"gamma", ck.reduction->gamma},
                       {"n_components", ck.reduction->n_components}};
    }
    const std::string cfg_text = cfg.dump();

    std::string out;
    out += "NVXC";
    put_u32(out, kCkptVersion);
    put_u32(out, static_cast<std::uint32_t>(cfg_text.size()));
    out += cfg_text;
    put_model(out, "m1", ck.first);
    if (ck.second) put_model(out, "m2", *ck.second);
    if (ck.reduction) {
        put_tensor(out, "kpca.training_frames", ck.reduction->training_frames);
        put_tensor(out, "kpca.centered_eigenvectors", ck.reduction->centered_eigenvectors);
        put_tensor(out, "kpca.eigenvalues", ck.reduction->eigenvalues);
        put_tensor(out, "kpca.kernel_row_mean", ck.reduction->kernel_row_mean);
        Mat mean(1, 1);
        mean(0, 0) = ck.reduction->kernel_mean;
        put_tensor(out, "kpca.kernel_mean", mean);
    }
    put_u32(out, crc32(out.data(), out.size()));
    write_file_atomic(path, out);
}

Checkpoint load_checkpoint(const std::string& path) {
    const std::vector<std::uint8_t> b = read_file(path);
    if (b.size() < 4 || std::memcmp(b.data(), "NVXC", 4) != 0)
        throw BadMagicError("not a checkpoint file: " + path);
    if (b.size() < 16) throw TruncatedError("checkpoint header truncated: " + path);

    Reader header{b, 4, b.size()};
    const std::uint32_t version = header.u32();
    if (version != kCkptVersion)
        throw BadVersionError("unsupported checkpoint version " + std::to_string(version));

    // The whole-file checksum is verified before any record parsing, so a
    // file cut off mid-tensor surfaces here.
    std::uint32_t want = 0;
    for (int i = 0; i < 4; ++i)
        want |= static_cast<std::uint32_t>(b[b.size() - 4 + i]) << (8 * i);
    if (crc32(b.data(), b.size() - 4) != want)
        throw CrcError("checkpoint checksum mismatch: " + path);

    Reader r{b, 8, b.size() - 4};
    const std::uint32_t cfg_len = r.u32();
    const std::string cfg_text = r.text(cfg_len);
    nlohmann::json cfg;
    try {
        cfg = nlohmann::json::parse(cfg_text);
    } catch (const nlohmann::json::parse_error&) {
        throw IoError("checkpoint config block is not valid JSON: " + path);
    }

    Checkpoint ck;
    ck.config.epochs = cfg.at("epochs").get<int>();
    ck.config.batch_size = cfg.at("batch_size").get<int>();
    ck.config.seed = cfg.at("seed").get<std::uint64_t>();
    ck.config.approach = approach_from_name(cfg.at("approach").get<std::string>());
    ck.config.feature_set = cfg.at("feature_set").get<int>();
    ck.config.mfcc_dim = cfg.at("mfcc_dim").get<int>();
    ck.config.rate_hz = cfg.at("rate_hz").get<double>();
    ck.config.stage2_ground_truth = cfg.at("stage2_ground_truth").get<bool>();
    ck.config.validate();

    TensorMap tensors;
    while (r.at < r.end) {
        const std::uint32_t name_len = r.u32();
        const std::string name = r.text(name_len);
        const std::uint32_t rows = r.u32();
        const std::uint32_t cols = r.u32();
        Mat m(rows, cols);
        for (std::uint32_t i = 0; i < rows; ++i)
            for (std::uint32_t j = 0; j < cols; ++j) m(i, j) = r.f64();
        if (!tensors.emplace(name, std::move(m)).second)
            throw IoError("checkpoint: duplicate tensor " + name);
    }

    ck.first = take_model(tensors, "m1");
    if (cfg.at("models").get<int>() == 2) ck.second = take_model(tensors, "m2");
    if (cfg.contains("kpca")) {
        KpcaModel k;
        k.kernel = kernel_from_name(cfg["kpca"].at("kernel").get<std::string>());
        k.gamma = cfg["kpca"].at("gamma").get<double>();
        k.n_components = cfg["kpca"].at("n_components").get<int>();
        k.training_frames = take(tensors, "kpca.training_frames");
        k.centered_eigenvectors = take(tensors, "kpca.centered_eigenvectors");
        k.eigenvalues = take_vec(tensors, "kpca.eigenvalues");
        k.kernel_row_mean = take_vec(tensors, "kpca.kernel_row_mean");
        k.kernel_mean = take(tensors, "kpca.kernel_mean")(0, 0);
        ck.reduction = std::move(k);
    }
    if (!tensors.empty())
        throw IoError("checkpoint: unexpected tensor " + tensors.begin()->first);
    return ck;
}

}  // namespace nvx
