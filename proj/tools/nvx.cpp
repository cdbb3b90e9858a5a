// nvx: synthetic-corpus generation, training, evaluation, waveform synthesis
// and gradient certification for the EEG-to-speech attention pipeline.

#include "CLI11.hpp"
#include "json.hpp"

#include "nvx/gradcheck.hpp"
#include "nvx/train.hpp"

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using nvx::Mat;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitTolerance = 4;
constexpr int kVocoderIterations = 60;

// KPCA cost is cubic in the fitted frame count; training corpora are larger
// than the fit needs, so the fit sees an evenly strided subsample.
constexpr int kKpcaFitCap = 2000;

std::uint32_t file_crc(const std::string& path) {
    const std::vector<std::uint8_t> bytes = nvx::read_file(path);
    return nvx::crc32(bytes.data(), bytes.size());
}

// ---------------------------------------------------------------------------
// Corpus directory layout: manifest.json + one FMAT file per sequence.
// ---------------------------------------------------------------------------

struct GenArgs {
    std::string out_dir;
    int n = 10;
    int eeg_dim = 30;
    int mfcc_dim = 13;
    double rate_hz = 100.0;
    double noise_std = 0.05;
    std::uint64_t seed = 1;
};

void run_gen(const GenArgs& a) {
    nvx::SynthConfig cfg;
    cfg.n_utterances = a.n;
    cfg.eeg_dim = a.eeg_dim;
    cfg.mfcc_dim = a.mfcc_dim;
    cfg.rate_hz = a.rate_hz;
    cfg.noise_std = a.noise_std;
    cfg.seed = a.seed;
    const nvx::Corpus corpus = nvx::gen_synthetic_corpus(cfg);

    fs::create_directories(a.out_dir);
    ordered_json manifest;
    manifest["n_utterances"] = cfg.n_utterances;
    manifest["eeg_dim"] = cfg.eeg_dim;
    manifest["mfcc_dim"] = cfg.mfcc_dim;
    manifest["rate_hz"] = cfg.rate_hz;
    manifest["noise_std"] = cfg.noise_std;
    manifest["seed"] = cfg.seed;
    manifest["utterances"] = ordered_json::array();
    for (const nvx::Utterance& u : corpus.utterances) {
        ordered_json entry;
        entry["id"] = u.id;
        entry["frames"] = u.eeg.frames();
        const struct {
            const char* key;
            const char* suffix;
            const nvx::FeatureSequence& seq;
        } parts[] = {{"eeg", "_eeg.fmat", u.eeg},
                     {"articulatory", "_art.fmat", u.articulatory},
                     {"mfcc", "_mfcc.fmat", u.mfcc}};
        for (const auto& part : parts) {
            const std::string name = u.id + part.suffix;
            const std::string path = (fs::path(a.out_dir) / name).string();
            nvx::write_features(path, part.seq);
            entry[part.key] = {{"file", name}, {"crc32", file_crc(path)}};
        }
        manifest["utterances"].push_back(std::move(entry));
    }
    nvx::write_file_atomic((fs::path(a.out_dir) / "manifest.json").string(),
                           manifest.dump(2) + "\n");
    std::cout << "wrote " << corpus.size() << " utterances to " << a.out_dir << "\n";
}

struct LoadedCorpus {
    nvx::Corpus corpus;
    int mfcc_dim = 0;
    double rate_hz = 0.0;
};

LoadedCorpus load_corpus(const std::string& dir) {
    const std::string manifest_path = (fs::path(dir) / "manifest.json").string();
    const std::vector<std::uint8_t> bytes = nvx::read_file(manifest_path);
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(bytes.begin(), bytes.end());
    } catch (const nlohmann::json::parse_error&) {
        throw nvx::IoError("manifest is not valid JSON: " + manifest_path);
    }

    LoadedCorpus out;
    out.mfcc_dim = manifest.at("mfcc_dim").get<int>();
    out.rate_hz = manifest.at("rate_hz").get<double>();
    for (const auto& entry : manifest.at("utterances")) {
        nvx::Utterance u;
        u.id = entry.at("id").get<std::string>();
        auto read_part = [&dir, &entry](const char* key) {
            const std::string name = entry.at(key).at("file").get<std::string>();
            return nvx::read_features((fs::path(dir) / name).string());
        };
        u.eeg = read_part("eeg");
        u.articulatory = read_part("articulatory");
        u.mfcc = read_part("mfcc");
        out.corpus.utterances.push_back(std::move(u));
    }
    out.corpus.validate();
    return out;
}

// ---------------------------------------------------------------------------
// EEG reduction
// ---------------------------------------------------------------------------

Mat stack_eeg(const std::vector<const nvx::Utterance*>& utts) {
    int total = 0;
    for (const nvx::Utterance* u : utts) total += u->eeg.frames();
    Mat x(total, utts.front()->eeg.dims());
    int at = 0;
    for (const nvx::Utterance* u : utts) {
        x.middleRows(at, u->eeg.frames()) = u->eeg.data;
        at += u->eeg.frames();
    }
    return x;
}

Mat strided_subsample(const Mat& x, int cap) {
    if (x.rows() <= cap) return x;
    Mat out(cap, x.cols());
    const double stride = static_cast<double>(x.rows()) / cap;
    for (int i = 0; i < cap; ++i)
        out.row(i) = x.row(static_cast<Eigen::Index>(i * stride));
    return out;
}

nvx::KpcaModel fit_reduction(const nvx::Corpus& c, const nvx::SplitIndex& split,
                             int n_components) {
    std::vector<const nvx::Utterance*> train;
    for (const nvx::Utterance& u : c.utterances)
        for (const std::string& id : split.train_ids)
            if (u.id == id) train.push_back(&u);
    const Mat pooled = strided_subsample(stack_eeg(train), kKpcaFitCap);
    return nvx::kpca_fit(pooled, nvx::Kernel::rbf, n_components);
}

nvx::Corpus apply_reduction(const nvx::KpcaModel& model, const nvx::Corpus& c) {
    nvx::Corpus reduced = c;
    for (nvx::Utterance& u : reduced.utterances)
        u.eeg.data = nvx::kpca_transform(model, u.eeg.data);
    return reduced;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
    std::string data_dir;
    std::string out_ckpt;
    std::string history_path;
    std::string approach = "direct";
    int feature_set = 1;
    int mfcc_dim = 13;
    double rate_hz = 100.0;
    bool mfcc_set = false;
    bool rate_set = false;
    std::uint64_t seed = 1;
    int epochs = 2500;
    int batch = 100;
    bool no_reduce = false;
};

void run_train(const TrainArgs& a) {
    const LoadedCorpus loaded = load_corpus(a.data_dir);
    if (a.mfcc_set && a.mfcc_dim != loaded.mfcc_dim)
        throw nvx::DimError("--mfcc " + std::to_string(a.mfcc_dim) + " but the corpus holds " +
                            std::to_string(loaded.mfcc_dim) + "-dim MFCC");
    if (a.rate_set && a.rate_hz != loaded.rate_hz)
        throw nvx::DimError("--rate does not match the corpus rate");

    nvx::TrainConfig cfg;
    cfg.epochs = a.epochs;
    cfg.batch_size = a.batch;
    cfg.seed = a.seed;
    cfg.approach = a.approach == "two-step" ? nvx::Approach::two_step : nvx::Approach::direct;
    cfg.feature_set = a.feature_set;
    cfg.mfcc_dim = loaded.mfcc_dim;
    cfg.rate_hz = loaded.rate_hz;
    cfg.validate();

    const nvx::SplitIndex split = nvx::split_corpus(loaded.corpus, cfg.seed);

    nvx::Checkpoint ck;
    ck.config = cfg;
    const nvx::Corpus* training_corpus = &loaded.corpus;
    nvx::Corpus reduced;
    if (!a.no_reduce) {
        ck.reduction = fit_reduction(loaded.corpus, split, nvx::feature_set_dim(a.feature_set));
        reduced = apply_reduction(*ck.reduction, loaded.corpus);
        training_corpus = &reduced;
    }

    const nvx::TrainedModels models = nvx::train_model(*training_corpus, split, cfg);
    ck.first = models.first;
    ck.second = models.second;
    nvx::save_checkpoint(a.out_ckpt, ck);

    const std::string history_path =
        a.history_path.empty() ? a.out_ckpt + ".history.json" : a.history_path;
    nvx::write_file_atomic(history_path, nvx::history_to_json(models));
    std::cout << "checkpoint: " << a.out_ckpt << "\nhistory: " << history_path
              << "\nfinal train loss: " << models.history.train_loss.back() << "\n";
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalArgs {
    std::string ckpt;
    std::string data_dir;
    std::string report_path;
    std::string paper_ref;
};

nvx::TrainedModels checkpoint_models(const nvx::Checkpoint& ck) {
    nvx::TrainedModels models;
    models.first = ck.first;
    if (ck.second) models.second = *ck.second;
    return models;
}

void run_eval(const EvalArgs& a) {
    const nvx::Checkpoint ck = nvx::load_checkpoint(a.ckpt);
    const LoadedCorpus loaded = load_corpus(a.data_dir);
    if (loaded.mfcc_dim != ck.config.mfcc_dim)
        throw nvx::DimError("checkpoint expects " + std::to_string(ck.config.mfcc_dim) +
                            "-dim MFCC but the corpus holds " + std::to_string(loaded.mfcc_dim));

    const nvx::SplitIndex split = nvx::split_corpus(loaded.corpus, ck.config.seed);
    const nvx::Corpus evaluated =
        ck.reduction ? apply_reduction(*ck.reduction, loaded.corpus) : loaded.corpus;
    const nvx::TrainedModels models = checkpoint_models(ck);
    const nvx::MetricsReport report = nvx::evaluate(models, evaluated, split, ck.config);

    nvx::write_file_atomic(a.report_path, nvx::metrics_to_json(report, ck.config));
    std::cout << nvx::render_report_table(report, ck.config, a.paper_ref);
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

struct SynthArgs {
    std::string ckpt;
    std::string input;
    std::string out_wav;
    std::string compare_csv;
    std::string actual_path;
};

// Griffin-Lim output inherits the inverse-mel magnitude scale, which can sit
// far outside [-1, 1]; peak-normalize so the PCM encoding does not clip.
nvx::Waveform vocode(const nvx::FeatureSequence& mfcc, const nvx::TrainConfig& cfg) {
    const nvx::MfccConfig mc =
        nvx::MfccConfig::for_rate(cfg.mfcc_dim, static_cast<int>(cfg.rate_hz));
    nvx::Waveform w = nvx::griffin_lim(nvx::invert_mfcc(mfcc, mc), kVocoderIterations, cfg.seed);
    double peak = 0.0;
    for (double s : w.samples) peak = std::max(peak, std::abs(s));
    if (peak > 0.0)
        for (double& s : w.samples) s *= 0.9 / peak;
    return w;
}

void run_synth(const SynthArgs& a) {
    const nvx::Checkpoint ck = nvx::load_checkpoint(a.ckpt);
    const nvx::FeatureSequence input = nvx::read_features(a.input);

    nvx::FeatureSequence mfcc;
    if (input.kind == nvx::FeatureKind::mfcc) {
        // Ground-truth acoustics go straight to the vocoder.
        if (input.dims() != ck.config.mfcc_dim)
            throw nvx::DimError("input MFCC dimension does not match the checkpoint");
        mfcc = input;
    } else if (input.kind == nvx::FeatureKind::articulatory) {
        throw nvx::DimError("synth input must be an EEG or MFCC feature file");
    } else {
        nvx::FeatureSequence eeg = input;
        if (ck.reduction) eeg.data = nvx::kpca_transform(*ck.reduction, eeg.data);
        mfcc = checkpoint_models(ck).predict(eeg);
    }

    const nvx::Waveform predicted = vocode(mfcc, ck.config);
    nvx::write_wav(a.out_wav, predicted);
    std::cout << "wrote " << predicted.samples.size() << " samples to " << a.out_wav << "\n";

    if (!a.compare_csv.empty()) {
        const nvx::FeatureSequence actual_mfcc = nvx::read_features(a.actual_path);
        if (actual_mfcc.kind != nvx::FeatureKind::mfcc)
            throw nvx::DimError("--actual must point at an MFCC feature file");
        const nvx::Waveform actual = vocode(actual_mfcc, ck.config);
        nvx::write_waveform_comparison_csv(a.compare_csv, actual, predicted);
        std::cout << "wrote comparison to " << a.compare_csv << "\n";
    }
}

// ---------------------------------------------------------------------------
// gradcheck
// ---------------------------------------------------------------------------

int run_gradcheck(std::uint64_t seed, bool perturb) {
    const nvx::GradCheckReport report = nvx::run_gradcheck_suite(seed, perturb);
    std::cout << nvx::gradcheck_to_json(report);
    if (!report.all_pass) {
        for (const nvx::GradCheckEntry& e : report.entries)
            if (!e.pass)
                std::cerr << "gradient check failed: " << e.op << " worst relative error "
                          << e.worst_rel_error << " > " << e.tolerance << "\n";
        return kExitTolerance;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Attention-based EEG-to-speech regression pipeline"};
    app.require_subcommand(1);

    GenArgs gen;
    CLI::App* cmd_gen = app.add_subcommand("gen", "Generate a synthetic corpus directory");
    cmd_gen->add_option("--out", gen.out_dir, "Output directory")->required();
    cmd_gen->add_option("--n", gen.n, "Utterance count");
    cmd_gen->add_option("--eeg-dim", gen.eeg_dim)->check(CLI::IsMember({30, 50, 93}));
    cmd_gen->add_option("--mfcc", gen.mfcc_dim)->check(CLI::IsMember({13, 128}));
    cmd_gen->add_option("--rate", gen.rate_hz)->check(CLI::IsMember({100.0, 32.0}));
    cmd_gen->add_option("--noise", gen.noise_std)->check(CLI::NonNegativeNumber);
    cmd_gen->add_option("--seed", gen.seed)->envname("NVX_SEED");

    TrainArgs train;
    CLI::App* cmd_train = app.add_subcommand("train", "Train on a corpus directory");
    cmd_train->add_option("--data", train.data_dir, "Corpus directory")->required();
    cmd_train->add_option("--out", train.out_ckpt, "Checkpoint path")->required();
    cmd_train->add_option("--history", train.history_path,
                          "History JSON path (default: <out>.history.json)");
    cmd_train->add_option("--approach", train.approach)
        ->check(CLI::IsMember({"direct", "two-step"}));
    cmd_train->add_option("--feature-set", train.feature_set)->check(CLI::IsMember({1, 2, 3}));
    auto* mfcc_opt = cmd_train->add_option("--mfcc", train.mfcc_dim)
                         ->check(CLI::IsMember({13, 128}));
    auto* rate_opt = cmd_train->add_option("--rate", train.rate_hz)
                         ->check(CLI::IsMember({100.0, 32.0}));
    cmd_train->add_option("--seed", train.seed)->envname("NVX_SEED");
    cmd_train->add_option("--epochs", train.epochs)->check(CLI::PositiveNumber);
    cmd_train->add_option("--batch", train.batch)->check(CLI::PositiveNumber);
    cmd_train->add_flag("--no-reduce", train.no_reduce,
                        "Feed raw EEG features without the KPCA stage");

    EvalArgs eval;
    CLI::App* cmd_eval = app.add_subcommand("eval", "Score a checkpoint on the test split");
    cmd_eval->add_option("--ckpt", eval.ckpt)->required();
    cmd_eval->add_option("--data", eval.data_dir)->required();
    cmd_eval->add_option("--report", eval.report_path, "Metrics JSON path")->required();
    cmd_eval->add_option("--paper-ref", eval.paper_ref,
                         "Reference column: subject1 or subject1-mfcc128");

    SynthArgs synth;
    CLI::App* cmd_synth = app.add_subcommand("synth", "Synthesize a waveform");
    cmd_synth->add_option("--ckpt", synth.ckpt)->required();
    cmd_synth->add_option("--input", synth.input, "EEG or MFCC feature file")->required();
    cmd_synth->add_option("--out", synth.out_wav, "Output WAV path")->required();
    auto* cmp_opt = cmd_synth->add_option("--compare", synth.compare_csv,
                                          "Actual-vs-predicted CSV path");
    cmd_synth->add_option("--actual", synth.actual_path, "Ground-truth MFCC feature file")
        ->needs(cmp_opt);

    std::uint64_t gc_seed = 1;
    bool gc_perturb = false;
    CLI::App* cmd_gc = app.add_subcommand("gradcheck", "Finite-difference gradient certification");
    cmd_gc->add_option("--seed", gc_seed)->envname("NVX_SEED");
    cmd_gc->add_flag("--perturb", gc_perturb,
                     "Corrupt one analytic gradient to demonstrate harness sensitivity");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (cmd_gen->parsed()) {
            run_gen(gen);
        } else if (cmd_train->parsed()) {
            train.mfcc_set = mfcc_opt->count() > 0;
            train.rate_set = rate_opt->count() > 0;
            run_train(train);
        } else if (cmd_eval->parsed()) {
            run_eval(eval);
        } else if (cmd_synth->parsed()) {
            if (!synth.compare_csv.empty() && synth.actual_path.empty()) {
                std::cerr << "--compare requires --actual\n";
                return kExitUsage;
            }
            run_synth(synth);
        } else if (cmd_gc->parsed()) {
            return run_gradcheck(gc_seed, gc_perturb);
        }
    } catch (const nvx::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const nvx::DimError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return 0;
}
