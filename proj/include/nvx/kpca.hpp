// Kernel PCA reduction of EEG feature frames.

#pragma once

#include "nvx/common.hpp"

#include <cstdint>

namespace nvx {

enum class Kernel : std::uint8_t { rbf = 0, linear = 1 };

const char* kernel_name(Kernel k);

// Mean per-dimension variance heuristic: gamma = 1 / (D * mean_d var_d).
double kpca_auto_gamma(const Mat& x);

// Pairwise kernel evaluations, rows(a) x rows(b). gamma is ignored for the
// linear kernel.
Mat kernel_matrix(const Mat& a, const Mat& b, Kernel k, double gamma);

struct KpcaModel {
    Mat training_frames;  // N x D
    Kernel kernel = Kernel::rbf;
    double gamma = 0.0;
    Mat centered_eigenvectors;  // N x m, column k = v_k / sqrt(lambda_k)
    Vec eigenvalues;            // m entries, strictly positive, descending
    int n_components = 0;

    // Cached centering terms of the training Gram matrix.
    Vec kernel_row_mean;  // (1/N) K 1
    double kernel_mean = 0.0;

    // Fit-time projections of the training frames, N x m.
    Mat training_scores() const;
};

// Double-centered Gram eigendecomposition. Components with eigenvalue
// <= 1e-12 * max are discarded. Requesting more than the achievable rank is
// an error naming that rank, except for the maximal request n_components = N
// which retains every positive component (centering always costs one).
// gamma = 0 selects kpca_auto_gamma for the rbf kernel.
KpcaModel kpca_fit(const Mat& x, Kernel kernel, int n_components, double gamma = 0.0);

// Out-of-sample projection with kernel centering against the training frames.
Mat kpca_transform(const KpcaModel& m, const Mat& y);

}  // namespace nvx
