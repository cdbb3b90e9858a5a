#include "nvx/kpca.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <string>

namespace nvx {

const char* kernel_name(Kernel k) {
    switch (k) {
        case Kernel::rbf: return "rbf";
        case Kernel::linear: return "linear";
    }
    throw DimError("unknown kernel tag");
}

double kpca_auto_gamma(const Mat& x) {
    if (x.rows() < 1 || x.cols() < 1) throw DimError("kpca_auto_gamma: empty matrix");
    const double n = static_cast<double>(x.rows());
    const Vec mean = x.colwise().mean();
    double var_sum = 0.0;
    for (Eigen::Index d = 0; d < x.cols(); ++d)
        var_sum += (x.col(d).array() - mean(d)).square().sum() / n;
    const double mean_var = var_sum / static_cast<double>(x.cols());
    if (mean_var <= 0.0) return 1.0 / static_cast<double>(x.cols());
    return 1.0 / (static_cast<double>(x.cols()) * mean_var);
}

Mat kernel_matrix(const Mat& a, const Mat& b, Kernel k, double gamma) {
    if (a.cols() != b.cols()) throw DimError("kernel_matrix: dimension mismatch");
    if (k == Kernel::linear) return a * b.transpose();
    const Vec na = a.rowwise().squaredNorm();
    const Vec nb = b.rowwise().squaredNorm();
    Mat d2 = (-2.0 * (a * b.transpose())).colwise() + na;
    d2.rowwise() += nb.transpose();
    return (-gamma * d2.cwiseMax(0.0)).array().exp();
}

KpcaModel kpca_fit(const Mat& x, Kernel kernel, int n_components, double gamma) {
    const int n = static_cast<int>(x.rows());
    if (n < 1) throw DimError("kpca_fit: empty training matrix");
    if (n_components < 1 || n_components > n)
        throw DimError("kpca_fit: n_components must be in [1, N]");
    if (!all_finite(x)) throw DimError("kpca_fit: non-finite training data");

    KpcaModel model;
    model.training_frames = x;
    model.kernel = kernel;
    model.gamma = (kernel == Kernel::rbf && gamma == 0.0) ? kpca_auto_gamma(x) : gamma;

    const Mat k = kernel_matrix(x, x, kernel, model.gamma);
    model.kernel_row_mean = k.rowwise().mean();
    model.kernel_mean = model.kernel_row_mean.mean();

    Mat kc = k;
    kc.colwise() -= model.kernel_row_mean;
    kc.rowwise() -= model.kernel_row_mean.transpose();
    kc.array() += model.kernel_mean;
    kc = 0.5 * (kc + kc.transpose()).eval();

    Eigen::SelfAdjointEigenSolver<Mat> eig(kc);
    if (eig.info() != Eigen::Success) throw DimError("kpca_fit: eigendecomposition failed");

    // Ascending from Eigen; walk from the back for descending order.
    const Vec& vals = eig.eigenvalues();
    const double cutoff = 1e-12 * std::max(vals(n - 1), 0.0);
    int achievable = 0;
    while (achievable < n && vals(n - 1 - achievable) > cutoff) ++achievable;

    int m = n_components;
    if (achievable < n_components) {
        if (n_components == n) {
            m = achievable;  // maximal request keeps every positive component
        } else {
            throw DimError("kpca_fit: requested " + std::to_string(n_components) +
                           " components but achievable rank is " + std::to_string(achievable));
        }
    }
    if (m < 1) throw DimError("kpca_fit: centered Gram matrix has rank 0");

    model.n_components = m;
    model.eigenvalues.resize(m);
    model.centered_eigenvectors.resize(n, m);
    for (int j = 0; j < m; ++j) {
        const double lambda = vals(n - 1 - j);
        model.eigenvalues(j) = lambda;
        model.centered_eigenvectors.col(j) = eig.eigenvectors().col(n - 1 - j) / std::sqrt(lambda);
    }
    return model;
}

Mat KpcaModel::training_scores() const {
    // A = V / sqrt(lambda), so A * diag(lambda) = V * sqrt(lambda).
    return centered_eigenvectors * eigenvalues.asDiagonal();
}

Mat kpca_transform(const KpcaModel& m, const Mat& y) {
    if (y.cols() != m.training_frames.cols())
        throw DimError("kpca_transform: query dimension mismatch");
    if (!all_finite(y)) throw DimError("kpca_transform: non-finite query");
    Mat k = kernel_matrix(y, m.training_frames, m.kernel, m.gamma);  // M x N
    const Vec query_mean = k.rowwise().mean();
    k.rowwise() -= m.kernel_row_mean.transpose();
    k.colwise() -= query_mean;
    k.array() += m.kernel_mean;
    return k * m.centered_eigenvectors;
}

}  // namespace nvx
