#include "nvx/signal.hpp"

#include <cmath>

namespace nvx {

NormStats NormStats::fit(const Mat& frames) {
    std::vector<const Mat*> one{&frames};
    return fit_pooled(one);
}

NormStats NormStats::fit_pooled(const std::vector<const Mat*>& frame_blocks) {
    if (frame_blocks.empty())
        throw DimError("NormStats: no data");
    const int d = static_cast<int>(frame_blocks.front()->cols());
    long n = 0;
    Vec sum = Vec::Zero(d);
    Vec sumsq = Vec::Zero(d);
    for (const Mat* block : frame_blocks) {
        if (block->cols() != d)
            throw DimError("NormStats: inconsistent dimensions across blocks");
        n += block->rows();
        sum += block->colwise().sum().transpose();
        sumsq += block->array().square().colwise().sum().matrix().transpose();
    }
    if (n < 1)
        throw DimError("NormStats: no frames");

    NormStats st;
    st.mean = sum / static_cast<double>(n);
    // Population variance; dimensions with no spread get stddev 1 so they
    // map to zero instead of dividing by zero.
    Vec var = sumsq / static_cast<double>(n) - st.mean.cwiseProduct(st.mean);
    st.stddev = var.cwiseMax(0.0).cwiseSqrt();
    for (int i = 0; i < d; ++i)
        if (st.stddev(i) <= 0.0)
            st.stddev(i) = 1.0;
    return st;
}

FeatureSequence znormalize(const FeatureSequence& x, const NormStats& stats) {
    if (stats.mean.size() != x.dims() || stats.stddev.size() != x.dims())
        throw DimError("znormalize: stats dimension mismatch");
    for (int i = 0; i < x.dims(); ++i)
        if (!(stats.stddev(i) > 0.0))
            throw DimError("znormalize: nonpositive stddev");

    FeatureSequence out = x;
    out.data = (x.data.rowwise() - stats.mean.transpose()).array().rowwise() /
               stats.stddev.transpose().array();
    return out;
}

double mcd(const FeatureSequence& pred, const FeatureSequence& truth) {
    if (pred.frames() != truth.frames() || pred.dims() != truth.dims())
        throw DimError("mcd: shape mismatch");
    const int t_frames = pred.frames();
    const int d = pred.dims();
    if (d < 2)
        throw DimError("mcd: need at least two coefficients");

    const double scale = 10.0 / std::log(10.0);
    double total = 0.0;
    for (int t = 0; t < t_frames; ++t) {
        double ss = 0.0;
        for (int k = 1; k < d; ++k) {  // coefficient 0 excluded
            const double diff = pred.data(t, k) - truth.data(t, k);
            ss += diff * diff;
        }
        total += scale * std::sqrt(2.0 * ss);
    }
    return total / static_cast<double>(t_frames);
}

}  // namespace nvx
