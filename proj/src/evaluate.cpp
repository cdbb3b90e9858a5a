#include "nvx/train.hpp"

#include "json.hpp"

#include <iomanip>
#include <map>
#include <sstream>

namespace nvx {

namespace {

using ordered_json = nlohmann::ordered_json;

const Utterance* find_utterance(const Corpus& c, const std::string& id) {
    for (const Utterance& u : c.utterances)
        if (u.id == id) return &u;
    throw DimError("evaluate: unknown utterance id " + id);
}

}  // namespace

MetricsReport evaluate_predictor(const Corpus& c, const SplitIndex& split,
                                 const Predictor& predict) {
    if (split.test_ids.empty()) throw DimError("evaluate: empty test split");
    if (split.train_ids.empty()) throw DimError("evaluate: empty training split");

    std::vector<const Utterance*> test;
    for (const std::string& id : split.test_ids) test.push_back(find_utterance(c, id));

    std::vector<FeatureSequence> preds;
    preds.reserve(test.size());
    std::vector<const Mat*> truth_blocks, pred_blocks;
    for (const Utterance* u : test) {
        FeatureSequence p = predict(*u);
        if (p.frames() != u->mfcc.frames() || p.dims() != u->mfcc.dims())
            throw DimError("evaluate: prediction shape mismatch for " + u->id);
        preds.push_back(std::move(p));
        truth_blocks.push_back(&u->mfcc.data);
    }
    for (const FeatureSequence& p : preds) pred_blocks.push_back(&p.data);

    const NormStats truth_stats = NormStats::fit_pooled(truth_blocks);
    const NormStats pred_stats = NormStats::fit_pooled(pred_blocks);

    MetricsReport report;
    double total = 0.0;
    for (std::size_t i = 0; i < test.size(); ++i) {
        const double score =
            mcd(znormalize(preds[i], pred_stats), znormalize(test[i]->mfcc, truth_stats));
        report.per_utterance.push_back({test[i]->id, score});
        total += score;
    }
    report.average_mcd = total / static_cast<double>(test.size());

    // Floor: predict the per-coefficient training mean everywhere. The
    // constant has no variance of its own, so it is normalized with the
    // truth statistics.
    Vec train_mean;
    {
        std::vector<const Mat*> train_blocks;
        for (const std::string& id : split.train_ids)
            train_blocks.push_back(&find_utterance(c, id)->mfcc.data);
        const NormStats train_stats = NormStats::fit_pooled(train_blocks);
        train_mean = train_stats.mean;
    }
    double floor_total = 0.0;
    for (const Utterance* u : test) {
        FeatureSequence constant;
        constant.kind = u->mfcc.kind;
        constant.rate_hz = u->mfcc.rate_hz;
        constant.data = train_mean.transpose().replicate(u->mfcc.frames(), 1);
        floor_total +=
            mcd(znormalize(constant, truth_stats), znormalize(u->mfcc, truth_stats));
    }
    report.baseline_mean_predictor_mcd = floor_total / static_cast<double>(test.size());
    return report;
}

MetricsReport evaluate(const TrainedModels& models, const Corpus& c, const SplitIndex& split,
                       const TrainConfig& cfg) {
    cfg.validate();
    return evaluate_predictor(c, split,
                              [&models](const Utterance& u) { return models.predict(u.eeg); });
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

namespace {

ordered_json config_json(const TrainConfig& cfg) {
    ordered_json j;
    j["epochs"] = cfg.epochs;
    j["batch_size"] = cfg.batch_size;
    j["seed"] = cfg.seed;
    j["approach"] = approach_name(cfg.approach);
    j["feature_set"] = cfg.feature_set;
    j["mfcc_dim"] = cfg.mfcc_dim;
    j["rate_hz"] = cfg.rate_hz;
    j["stage2_ground_truth"] = cfg.stage2_ground_truth;
    return j;
}

}  // namespace

std::string metrics_to_json(const MetricsReport& r, const TrainConfig& cfg) {
    ordered_json j;
    j["config"] = config_json(cfg);
    j["per_utterance"] = ordered_json::array();
    for (const UtteranceScore& s : r.per_utterance)
        j["per_utterance"].push_back(ordered_json{{"id", s.id}, {"mcd", s.mcd}});
    j["average_mcd"] = r.average_mcd;
    j["baseline_mean_predictor_mcd"] = r.baseline_mean_predictor_mcd;
    return j.dump(2) + "\n";
}

std::string history_to_json(const TrainedModels& models) {
    ordered_json j;
    j["stage1"] = {{"train_loss", models.history.train_loss},
                   {"val_loss", models.history.val_loss}};
    if (models.history2)
        j["stage2"] = {{"train_loss", models.history2->train_loss},
                       {"val_loss", models.history2->val_loss}};
    return j.dump(2) + "\n";
}

namespace {

std::string cell(double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(3) << v;
    return os.str();
}

// Reference averages reported for subject 1, keyed by the flag value. The
// 13-dim table carries one reference number per feature set; the 128-dim
// table reports the two approach averages for set 1 only.
std::string reference_cell(const std::string& reference, const TrainConfig& cfg) {
    if (reference == "subject1") {
        if (cfg.mfcc_dim != 13)
            throw DimError("reference subject1 applies to mfcc_dim 13");
        switch (cfg.feature_set) {
            case 1: return "0.433";
            case 2: return "0.435";
            case 3: return "0.435";
        }
    }
    if (reference == "subject1-mfcc128") {
        if (cfg.mfcc_dim != 128)
            throw DimError("reference subject1-mfcc128 applies to mfcc_dim 128");
        if (cfg.feature_set != 1) return "-";
        return "1.211 / 1.14";
    }
    throw DimError("unknown reference: " + reference);
}

}  // namespace

std::string render_report_table(const MetricsReport& r, const TrainConfig& cfg,
                                const std::string& reference) {
    std::vector<std::string> headers = {"EEG Feature Set", "Average MCD floor",
                                        "Average MCD 1st Approach", "Average MCD 2nd Approach"};
    std::vector<std::string> row = {"Set " + std::to_string(cfg.feature_set),
                                    cell(r.baseline_mean_predictor_mcd),
                                    cfg.approach == Approach::direct ? cell(r.average_mcd) : "-",
                                    cfg.approach == Approach::two_step ? cell(r.average_mcd) : "-"};
    if (!reference.empty()) {
        headers.push_back("Reference");
        row.push_back(reference_cell(reference, cfg));
    }

    std::vector<std::size_t> widths;
    for (std::size_t i = 0; i < headers.size(); ++i)
        widths.push_back(std::max(headers[i].size(), row[i].size()));

    std::ostringstream os;
    auto emit = [&os, &widths](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            os << "| " << cells[i] << std::string(widths[i] - cells[i].size() + 1, ' ');
        }
        os << "|\n";
    };
    emit(headers);
    for (std::size_t i = 0; i < widths.size(); ++i)
        os << "|" << std::string(widths[i] + 2, '-');
    os << "|\n";
    emit(row);
    return os.str();
}

}  // namespace nvx
