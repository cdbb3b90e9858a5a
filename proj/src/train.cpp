#include "nvx/train.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace nvx {

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

void SplitIndex::validate(const Corpus& c) const {
    if (train_ids.empty() || val_ids.empty() || test_ids.empty())
        throw DimError("SplitIndex: empty part");
    std::set<std::string> seen;
    auto take = [&seen](const std::vector<std::string>& ids) {
        for (const std::string& id : ids)
            if (!seen.insert(id).second) throw DimError("SplitIndex: id appears twice: " + id);
    };
    take(train_ids);
    take(val_ids);
    take(test_ids);
    if (seen.size() != static_cast<std::size_t>(c.size()))
        throw DimError("SplitIndex: split does not cover the corpus");
    for (const Utterance& u : c.utterances)
        if (!seen.count(u.id)) throw DimError("SplitIndex: corpus id missing from split: " + u.id);
}

SplitIndex split_corpus(const Corpus& c, std::uint64_t seed) {
    const int n = c.size();
    if (n < 10) throw DimError("split_corpus: need at least 10 utterances, got " + std::to_string(n));

    std::vector<std::string> ids;
    ids.reserve(static_cast<std::size_t>(n));
    for (const Utterance& u : c.utterances) ids.push_back(u.id);
    Rng rng(Rng::derive(seed, 0x5B17));
    shuffle(ids, rng);

    const int n_train = static_cast<int>(std::lround(0.8 * n));
    const int rest = n - n_train;
    const int n_val = rest / 2;  // test takes the odd utterance

    SplitIndex s;
    s.seed = seed;
    s.train_ids.assign(ids.begin(), ids.begin() + n_train);
    s.val_ids.assign(ids.begin() + n_train, ids.begin() + n_train + n_val);
    s.test_ids.assign(ids.begin() + n_train + n_val, ids.end());
    s.validate(c);
    return s;
}

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

const char* approach_name(Approach a) {
    return a == Approach::direct ? "direct" : "two_step";
}

int feature_set_dim(int feature_set) {
    switch (feature_set) {
        case 1: return 30;
        case 2: return 50;
        case 3: return 93;
        default: throw DimError("feature_set must be 1, 2 or 3");
    }
}

void TrainConfig::validate() const {
    if (epochs < 1) throw DimError("TrainConfig: epochs must be >= 1");
    if (batch_size < 1) throw DimError("TrainConfig: batch_size must be >= 1");
    feature_set_dim(feature_set);
    if (mfcc_dim != 13 && mfcc_dim != 128) throw DimError("TrainConfig: mfcc_dim must be 13 or 128");
    if (rate_hz != 100.0 && rate_hz != 32.0) throw DimError("TrainConfig: rate must be 100 or 32 Hz");
}

// ---------------------------------------------------------------------------
// Fitting
// ---------------------------------------------------------------------------

namespace {

struct Problem {
    std::vector<const Mat*> train_x, train_y;
    std::vector<const Mat*> val_x, val_y;
};

// Frame-weighted mean of per-batch masked-MSE values, so an epoch entry is
// the MSE over every unmasked frame seen during that pass.
struct LossMeter {
    double weighted = 0.0;
    double frames = 0.0;

    void add(double loss, double n) {
        weighted += loss * n;
        frames += n;
    }
    double mean() const { return frames > 0.0 ? weighted / frames : 0.0; }
};

std::vector<std::vector<int>> epoch_batches(int n, int batch_size, Rng& rng) {
    std::vector<int> order(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    shuffle(order, rng);
    std::vector<std::vector<int>> batches;
    for (int at = 0; at < n; at += batch_size) {
        const int take = std::min(batch_size, n - at);
        batches.emplace_back(order.begin() + at, order.begin() + at + take);
    }
    return batches;
}

Batch gather_batch(const std::vector<const Mat*>& xs, const std::vector<const Mat*>& ys,
                   const std::vector<int>& idx) {
    std::vector<const Mat*> bx, by;
    bx.reserve(idx.size());
    by.reserve(idx.size());
    for (int i : idx) {
        bx.push_back(xs[static_cast<std::size_t>(i)]);
        by.push_back(ys[static_cast<std::size_t>(i)]);
    }
    return pack_batch(bx, by);
}

template <typename Params, typename Grads, typename StepFn, typename ValFn>
FitHistory fit_loop(Params& params, Grads& grads, const Problem& pb, const TrainConfig& cfg,
                    std::uint64_t shuffle_tag, StepFn step, ValFn val_loss) {
    if (pb.train_x.empty()) throw DimError("train_model: empty training split");

    Rng shuffle_rng(Rng::derive(cfg.seed, shuffle_tag));
    AdamState adam;
    std::vector<TensorRef> refs = param_refs(params, grads);
    adam.init(refs);

    FitHistory hist;
    hist.train_loss.reserve(static_cast<std::size_t>(cfg.epochs));
    hist.val_loss.reserve(static_cast<std::size_t>(cfg.epochs));
    const int n = static_cast<int>(pb.train_x.size());
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        LossMeter meter;
        for (const std::vector<int>& idx : epoch_batches(n, cfg.batch_size, shuffle_rng)) {
            const Batch batch = gather_batch(pb.train_x, pb.train_y, idx);
            const double loss = step(batch);
            adam_step(refs, adam);
            meter.add(loss, batch.frames());
        }
        hist.train_loss.push_back(meter.mean());

        LossMeter vmeter;
        for (std::size_t at = 0; at < pb.val_x.size();
             at += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t take =
                std::min(static_cast<std::size_t>(cfg.batch_size), pb.val_x.size() - at);
            std::vector<const Mat*> vx(pb.val_x.begin() + static_cast<long>(at),
                                       pb.val_x.begin() + static_cast<long>(at + take));
            std::vector<const Mat*> vy(pb.val_y.begin() + static_cast<long>(at),
                                       pb.val_y.begin() + static_cast<long>(at + take));
            const Batch batch = pack_batch(vx, vy);
            vmeter.add(val_loss(batch), batch.frames());
        }
        hist.val_loss.push_back(vmeter.mean());
    }
    return hist;
}

FitHistory fit_attention(ModelParams& params, const Problem& pb, const TrainConfig& cfg,
                         std::uint64_t shuffle_tag, std::uint64_t dropout_tag) {
    ModelGrads grads;
    grads.init_zero(params.dims());
    Rng dropout_rng(Rng::derive(cfg.seed, dropout_tag));
    return fit_loop(
        params, grads, pb, cfg, shuffle_tag,
        [&](const Batch& batch) {
            grads.init_zero(params.dims());
            return attention_batch_grad(params, batch, &dropout_rng, grads);
        },
        [&](const Batch& batch) { return attention_batch_loss(params, batch); });
}

FitHistory fit_baseline(BaselineParams& params, const Problem& pb, const TrainConfig& cfg,
                        std::uint64_t shuffle_tag) {
    BaselineGrads grads;
    grads.init_zero(params.dims());
    return fit_loop(
        params, grads, pb, cfg, shuffle_tag,
        [&](const Batch& batch) {
            grads.init_zero(params.dims());
            return baseline_batch_grad(params, batch, grads);
        },
        [&](const Batch& batch) { return baseline_batch_loss(params, batch); });
}

struct CorpusView {
    std::vector<const Utterance*> train, val;
};

// Training tolerates partial splits (probe fixtures put every utterance in
// train), so the full SplitIndex invariant is not required here: ids must
// resolve, be pairwise distinct, and the training part must be nonempty.
CorpusView resolve_split(const Corpus& c, const SplitIndex& split) {
    if (split.train_ids.empty()) throw DimError("train_model: empty training split");
    std::set<std::string> seen;
    for (const auto* ids : {&split.train_ids, &split.val_ids, &split.test_ids})
        for (const std::string& id : *ids)
            if (!seen.insert(id).second) throw DimError("SplitIndex: id appears twice: " + id);

    std::map<std::string, const Utterance*> by_id;
    for (const Utterance& u : c.utterances) by_id[u.id] = &u;
    auto lookup = [&by_id](const std::string& id) {
        auto it = by_id.find(id);
        if (it == by_id.end()) throw DimError("split references unknown utterance " + id);
        return it->second;
    };
    CorpusView v;
    for (const std::string& id : split.train_ids) v.train.push_back(lookup(id));
    for (const std::string& id : split.val_ids) v.val.push_back(lookup(id));
    return v;
}

int common_eeg_dim(const CorpusView& v) {
    const int d = v.train.front()->eeg.dims();
    for (const Utterance* u : v.train)
        if (u->eeg.dims() != d) throw DimError("train_model: EEG dimensions differ across corpus");
    for (const Utterance* u : v.val)
        if (u->eeg.dims() != d) throw DimError("train_model: EEG dimensions differ across corpus");
    return d;
}

constexpr std::uint64_t kInit1 = 0x1A, kShuffle1 = 0x51, kDropout1 = 0xD1;
constexpr std::uint64_t kInit2 = 0x2A, kShuffle2 = 0x52, kDropout2 = 0xD2;
constexpr std::uint64_t kInitBase = 0xBA, kShuffleBase = 0x5B;

}  // namespace

TrainedModels train_model(const Corpus& c, const SplitIndex& split, const TrainConfig& cfg) {
    cfg.validate();
    const CorpusView view = resolve_split(c, split);
    const int d_in = common_eeg_dim(view);

    Problem stage1;
    const bool two_step = cfg.approach == Approach::two_step;
    const int d_out1 = two_step ? 6 : cfg.mfcc_dim;
    for (const Utterance* u : view.train) {
        stage1.train_x.push_back(&u->eeg.data);
        stage1.train_y.push_back(two_step ? &u->articulatory.data : &u->mfcc.data);
    }
    for (const Utterance* u : view.val) {
        stage1.val_x.push_back(&u->eeg.data);
        stage1.val_y.push_back(two_step ? &u->articulatory.data : &u->mfcc.data);
    }

    TrainedModels out;
    out.first = init_attention_model(d_in, d_out1, Rng::derive(cfg.seed, kInit1));
    out.history = fit_attention(out.first, stage1, cfg, kShuffle1, kDropout1);
    if (!two_step) return out;

    // Stage 2 learns from what stage 1 actually produces, so its training
    // inputs are stage-1 predictions over the training split.
    std::vector<Mat> pred_train, pred_val;
    Problem stage2;
    for (const Utterance* u : view.train) {
        pred_train.push_back(cfg.stage2_ground_truth
                                 ? u->articulatory.data
                                 : predict_direct(out.first, u->eeg).data);
    }
    for (const Utterance* u : view.val) {
        pred_val.push_back(cfg.stage2_ground_truth ? u->articulatory.data
                                                   : predict_direct(out.first, u->eeg).data);
    }
    for (std::size_t i = 0; i < view.train.size(); ++i) {
        stage2.train_x.push_back(&pred_train[i]);
        stage2.train_y.push_back(&view.train[i]->mfcc.data);
    }
    for (std::size_t i = 0; i < view.val.size(); ++i) {
        stage2.val_x.push_back(&pred_val[i]);
        stage2.val_y.push_back(&view.val[i]->mfcc.data);
    }

    out.second = init_attention_model(6, cfg.mfcc_dim, Rng::derive(cfg.seed, kInit2));
    out.history2 = fit_attention(*out.second, stage2, cfg, kShuffle2, kDropout2);
    return out;
}

TrainedBaseline train_baseline(const Corpus& c, const SplitIndex& split, const TrainConfig& cfg) {
    cfg.validate();
    const CorpusView view = resolve_split(c, split);
    const int d_in = common_eeg_dim(view);

    Problem pb;
    for (const Utterance* u : view.train) {
        pb.train_x.push_back(&u->eeg.data);
        pb.train_y.push_back(&u->mfcc.data);
    }
    for (const Utterance* u : view.val) {
        pb.val_x.push_back(&u->eeg.data);
        pb.val_y.push_back(&u->mfcc.data);
    }

    TrainedBaseline out;
    out.model = init_baseline_model(d_in, cfg.mfcc_dim, Rng::derive(cfg.seed, kInitBase));
    out.history = fit_baseline(out.model, pb, cfg, kShuffleBase);
    return out;
}

FeatureSequence TrainedModels::predict(const FeatureSequence& eeg) const {
    if (second) return predict_two_step(first, *second, eeg);
    return predict_direct(first, eeg);
}

}  // namespace nvx
