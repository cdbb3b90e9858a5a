// Corpus splitting, the mini-batch training loop, MCD evaluation reports and
// model checkpointing.

#pragma once

#include "nvx/data.hpp"
#include "nvx/kpca.hpp"
#include "nvx/model.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace nvx {

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

struct SplitIndex {
    std::vector<std::string> train_ids;
    std::vector<std::string> val_ids;
    std::vector<std::string> test_ids;
    std::uint64_t seed = 0;

    // Disjoint, nonempty, and exhaustive over the corpus ids.
    void validate(const Corpus& c) const;
};

// Seeded shuffle, then 80/10/10: |train| = round(0.8 N), the rest split
// between val and test with test taking the odd utterance. N >= 10 so every
// part is nonempty.
SplitIndex split_corpus(const Corpus& c, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

enum class Approach { direct = 1, two_step = 2 };

const char* approach_name(Approach a);

struct TrainConfig {
    int epochs = 2500;
    int batch_size = 100;
    std::uint64_t seed = 1;
    Approach approach = Approach::direct;
    int feature_set = 1;  // selects the reduced EEG dimension: 30, 50 or 93
    int mfcc_dim = 13;    // 13 or 128
    double rate_hz = 100.0;
    // Ablation switch: stage 2 of two_step consumes ground-truth articulatory
    // features instead of stage-1 predictions.
    bool stage2_ground_truth = false;

    void validate() const;
};

int feature_set_dim(int feature_set);

struct FitHistory {
    std::vector<double> train_loss;  // one entry per epoch, finite
    std::vector<double> val_loss;
};

struct TrainedModels {
    ModelParams first;                  // direct: EEG->MFCC; two_step: EEG->articulatory
    std::optional<ModelParams> second;  // two_step stage 2: articulatory->MFCC
    FitHistory history;
    std::optional<FitHistory> history2;

    FeatureSequence predict(const FeatureSequence& eeg) const;
};

// Mini-batches of up to batch_size sequences, zero-padded to the longest in
// the batch with masks; Adam on masked MSE; batch order reshuffled from the
// run seed every epoch. two_step trains EEG->articulatory to completion and
// then a second model on the stage-1 training-split predictions.
TrainedModels train_model(const Corpus& c, const SplitIndex& split, const TrainConfig& cfg);

struct TrainedBaseline {
    BaselineParams model;
    FitHistory history;
};

// Same data, loss and optimizer, but the attention-free encoder+head model.
TrainedBaseline train_baseline(const Corpus& c, const SplitIndex& split, const TrainConfig& cfg);

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

struct UtteranceScore {
    std::string id;
    double mcd = 0.0;
};

struct MetricsReport {
    std::vector<UtteranceScore> per_utterance;  // test split, split order
    double average_mcd = 0.0;
    double baseline_mean_predictor_mcd = 0.0;
};

using Predictor = std::function<FeatureSequence(const Utterance&)>;

// For each test utterance: predict, z-normalize prediction and truth (each
// side against stats pooled over the test set), MCD. The floor is the
// per-coefficient training-mean predictor scored against the same truth
// normalization.
MetricsReport evaluate_predictor(const Corpus& c, const SplitIndex& split,
                                 const Predictor& predict);

MetricsReport evaluate(const TrainedModels& models, const Corpus& c, const SplitIndex& split,
                       const TrainConfig& cfg);

// Stable key order: config, per_utterance, average_mcd,
// baseline_mean_predictor_mcd.
std::string metrics_to_json(const MetricsReport& r, const TrainConfig& cfg);

std::string history_to_json(const TrainedModels& models);

// Text table in the published layout: one row per evaluated feature set with
// the mean-predictor floor and the approach averages. reference selects an
// optional display-only column of reported numbers ("subject1" or
// "subject1-mfcc128"; empty = none).
std::string render_report_table(const MetricsReport& r, const TrainConfig& cfg,
                                const std::string& reference);

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

struct Checkpoint {
    TrainConfig config;
    ModelParams first;
    std::optional<ModelParams> second;
    std::optional<KpcaModel> reduction;
};

// Layout: "NVXC" | version u32 | config-JSON length u32 + bytes | named
// tensor records {name length u32, name, rows u32, cols u32, f64
// little-endian values} | CRC32 of all preceding bytes.
void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace nvx
