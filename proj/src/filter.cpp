#include "nvx/signal.hpp"

#include <cmath>

namespace nvx {

namespace {

using Cplx = std::complex<double>;

// Polynomial coefficients (descending powers absent; index k multiplies
// z^-k after normalization) from a root list.
std::vector<double> poly_from_roots(const std::vector<Cplx>& roots) {
    std::vector<Cplx> c(roots.size() + 1, Cplx(0.0, 0.0));
    c[0] = 1.0;
    for (std::size_t i = 0; i < roots.size(); ++i)
        for (std::size_t j = i + 1; j > 0; --j)
            c[j] -= roots[i] * c[j - 1];
    std::vector<double> out(c.size());
    for (std::size_t i = 0; i < c.size(); ++i)
        out[i] = c[i].real();  // conjugate-paired roots leave ~0 imaginary parts
    return out;
}

Cplx eval_response(const IirFilter& f, double omega) {
    Cplx num(0.0, 0.0), den(0.0, 0.0);
    for (std::size_t k = 0; k < f.b.size(); ++k)
        num += f.b[k] * std::exp(Cplx(0.0, -omega * static_cast<double>(k)));
    for (std::size_t k = 0; k < f.a.size(); ++k)
        den += f.a[k] * std::exp(Cplx(0.0, -omega * static_cast<double>(k)));
    return num / den;
}

}  // namespace

std::vector<std::complex<double>> IirFilter::poles() const {
    const int n = static_cast<int>(a.size()) - 1;
    if (n <= 0)
        return {};
    // Companion matrix of a(z) normalized to a[0] = 1.
    Mat comp = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i)
        comp(0, i) = -a[i + 1] / a[0];
    for (int i = 1; i < n; ++i)
        comp(i, i - 1) = 1.0;
    Eigen::EigenSolver<Mat> es(comp);
    std::vector<Cplx> out(n);
    for (int i = 0; i < n; ++i)
        out[i] = es.eigenvalues()(i);
    return out;
}

bool IirFilter::stable() const {
    for (const auto& p : poles())
        if (std::abs(p) >= 1.0)
            return false;
    return true;
}

IirFilter design_bandpass(double low_hz, double high_hz, int order, double fs_hz) {
    if (!(0.0 < low_hz && low_hz < high_hz && high_hz < fs_hz / 2.0))
        throw DimError("design_bandpass: need 0 < low < high < fs/2");
    if (order < 2 || order % 2 != 0)
        throw DimError("design_bandpass: order must be even and >= 2");

    const int proto_order = order / 2;
    const double fs2 = 2.0 * fs_hz;

    // Pre-warped analog band edges.
    const double w1 = fs2 * std::tan(M_PI * low_hz / fs_hz);
    const double w2 = fs2 * std::tan(M_PI * high_hz / fs_hz);
    const double w0 = std::sqrt(w1 * w2);
    const double bw = w2 - w1;

    // Analog Butterworth low-pass prototype poles (unit cutoff, no zeros).
    std::vector<Cplx> proto(proto_order);
    for (int k = 0; k < proto_order; ++k) {
        double angle = M_PI * (2.0 * k + proto_order + 1.0) / (2.0 * proto_order);
        proto[k] = std::exp(Cplx(0.0, angle));
    }

    // Low-pass -> band-pass: each pole splits into a conjugate pair; the
    // prototype's zeros at infinity land half at s=0, half at infinity.
    std::vector<Cplx> apoles, azeros;
    for (const Cplx& p : proto) {
        Cplx t = 0.5 * bw * p;
        Cplx r = std::sqrt(t * t - Cplx(w0 * w0, 0.0));
        apoles.push_back(t + r);
        apoles.push_back(t - r);
    }
    for (int i = 0; i < proto_order; ++i)
        azeros.push_back(Cplx(0.0, 0.0));

    // Bilinear transform to the z-plane; zeros at infinity map to z = -1.
    std::vector<Cplx> zpoles, zzeros;
    for (const Cplx& p : apoles)
        zpoles.push_back((fs2 + p) / (fs2 - p));
    for (const Cplx& z : azeros)
        zzeros.push_back((fs2 + z) / (fs2 - z));
    while (zzeros.size() < zpoles.size())
        zzeros.push_back(Cplx(-1.0, 0.0));

    IirFilter f;
    f.b = poly_from_roots(zzeros);
    f.a = poly_from_roots(zpoles);

    const double a0 = f.a[0];
    for (double& v : f.b)
        v /= a0;
    for (double& v : f.a)
        v /= a0;

    // Unity gain at the (warped) center frequency.
    const double fc = std::atan(w0 / fs2) * fs_hz / M_PI;
    const double g = std::abs(eval_response(f, 2.0 * M_PI * fc / fs_hz));
    if (!(g > 0.0) || !std::isfinite(g))
        throw std::runtime_error("design_bandpass: degenerate design");
    for (double& v : f.b)
        v /= g;

    if (!f.stable())
        throw std::runtime_error("design_bandpass: unstable design");
    return f;
}

IirFilter design_notch(double center_hz, double q, double fs_hz) {
    if (!(0.0 < center_hz && center_hz < fs_hz / 2.0))
        throw DimError("design_notch: need 0 < center < fs/2");
    if (!(q > 0.0))
        throw DimError("design_notch: q must be positive");

    // RBJ cookbook notch biquad.
    const double w0 = 2.0 * M_PI * center_hz / fs_hz;
    const double alpha = std::sin(w0) / (2.0 * q);
    const double c = std::cos(w0);

    IirFilter f;
    const double a0 = 1.0 + alpha;
    f.b = {1.0 / a0, -2.0 * c / a0, 1.0 / a0};
    f.a = {1.0, -2.0 * c / a0, (1.0 - alpha) / a0};

    if (!f.stable())
        throw std::runtime_error("design_notch: unstable design");
    return f;
}

std::vector<double> iir_filter(const IirFilter& f, const std::vector<double>& x) {
    if (f.a.empty() || f.b.empty())
        throw DimError("iir_filter: empty coefficients");
    for (double v : x)
        if (!std::isfinite(v))
            throw DimError("iir_filter: non-finite input sample");

    const std::size_t nb = f.b.size(), na = f.a.size();
    const std::size_t order = std::max(nb, na) - 1;
    std::vector<double> b(f.b), a(f.a);
    b.resize(order + 1, 0.0);
    a.resize(order + 1, 0.0);

    std::vector<double> z(order, 0.0);  // zero initial state
    std::vector<double> y(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double xi = x[k];
        const double yi = b[0] * xi + (order > 0 ? z[0] : 0.0);
        y[k] = yi;
        for (std::size_t i = 0; i + 1 < order; ++i)
            z[i] = z[i + 1] + b[i + 1] * xi - a[i + 1] * yi;
        if (order > 0)
            z[order - 1] = b[order] * xi - a[order] * yi;
    }
    return y;
}

Mat iir_filter_columns(const IirFilter& f, const Mat& x) {
    Mat out(x.rows(), x.cols());
    std::vector<double> col(static_cast<std::size_t>(x.rows()));
    for (int c = 0; c < x.cols(); ++c) {
        for (int r = 0; r < x.rows(); ++r)
            col[static_cast<std::size_t>(r)] = x(r, c);
        std::vector<double> y = iir_filter(f, col);
        for (int r = 0; r < x.rows(); ++r)
            out(r, c) = y[static_cast<std::size_t>(r)];
    }
    return out;
}

double filter_response(const IirFilter& f, double freq_hz, double fs_hz) {
    return std::abs(eval_response(f, 2.0 * M_PI * freq_hz / fs_hz));
}

}  // namespace nvx
