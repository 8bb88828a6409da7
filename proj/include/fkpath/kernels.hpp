#pragma once

#include "core.hpp"

#include <numbers>

namespace fkpath {

using KernelFn = std::function<double(double t, const Vec& x, const Vec& y)>;

namespace detail {

inline void check_t(double t, const char* who) {
    if (!(t > 0.0) || !std::isfinite(t)) throw DomainError(std::string(who) + ": t must be positive");
}

inline constexpr double kTaylorGuard = 1e-6;

// log(sinh z / z), z >= 0
inline double log_sinhc(double z) {
    if (z < kTaylorGuard) return z * z / 6.0;
    if (z > 20.0) return z - std::log(2.0 * z) + std::log1p(-std::exp(-2.0 * z));
    return std::log(std::sinh(z) / z);
}

// z coth z
inline double z_coth(double z) {
    if (z < kTaylorGuard) return 1.0 + z * z / 3.0;
    return z / std::tanh(z);
}

// z / sinh z
inline double z_csch(double z) {
    if (z < kTaylorGuard) return 1.0 - z * z / 6.0;
    if (z > 700.0) return 0.0;
    return z / std::sinh(z);
}

}  // namespace detail

inline double heat_kernel(int M, double t, const Vec& x, const Vec& y) {
    detail::check_t(t, "heat_kernel");
    if (x.size() != M || y.size() != M) throw DomainError("heat_kernel: dimension mismatch");
    return std::pow(2.0 * std::numbers::pi * t, -0.5 * M) * std::exp(-(x - y).squaredNorm() / (2.0 * t));
}

// drift -theta x, unit noise
inline double ou_kernel_1d(double theta, double t, double x, double y) {
    detail::check_t(t, "ou_kernel_1d");
    if (!(theta > 0.0)) throw DomainError("ou_kernel_1d: theta must be positive");
    const double v = -std::expm1(-2.0 * theta * t);
    const double m = y - x * std::exp(-theta * t);
    return std::sqrt(theta / (std::numbers::pi * v)) * std::exp(-theta * m * m / v);
}

struct OUParams {
    Mat theta;      // symmetric
    Mat theta_hat;  // potential matrix
    Mat omega2;     // theta^T theta + theta_hat^T theta_hat
    Vec omega;      // eigenvalues of the principal root
    Mat basis;      // orthonormal eigenvectors of omega2

    int dim() const { return static_cast<int>(theta.rows()); }
};

inline OUParams make_ou_params(const Mat& theta, const Mat& theta_hat) {
    const auto M = theta.rows();
    if (theta.cols() != M || theta_hat.rows() != M || theta_hat.cols() != M)
        throw DomainError("OUParams: theta and theta_hat must be square and the same size");
    const double asym = (theta - theta.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-12 * std::max(1.0, theta.cwiseAbs().maxCoeff()))
        throw UnsupportedParameter("OUParams: theta must be symmetric (antisymmetric part not supported)");
    OUParams p;
    p.theta = 0.5 * (theta + theta.transpose());
    p.theta_hat = theta_hat;
    p.omega2 = p.theta.transpose() * p.theta + theta_hat.transpose() * theta_hat;
    p.omega2 = 0.5 * (p.omega2 + p.omega2.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> es(p.omega2);
    p.omega = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    p.basis = es.eigenvectors();
    return p;
}

// general OU propagator in the principal-root eigenbasis of omega2
inline double ou_kernel_multi(const OUParams& p, double t, const Vec& x0, const Vec& xf) {
    detail::check_t(t, "ou_kernel_multi");
    const int M = p.dim();
    if (x0.size() != M || xf.size() != M) throw DomainError("ou_kernel_multi: dimension mismatch");
    const Vec a = p.basis.transpose() * x0;
    const Vec b = p.basis.transpose() * xf;
    double logk = -0.5 * M * std::log(2.0 * std::numbers::pi * t);
    double ex = -0.5 * (xf.dot(p.theta * xf) - x0.dot(p.theta * x0)) + 0.5 * t * p.theta.trace();
    for (int k = 0; k < M; ++k) {
        const double z = t * p.omega[k];
        logk -= 0.5 * detail::log_sinhc(z);
        ex += (-0.5 * (a[k] * a[k] + b[k] * b[k]) * detail::z_coth(z) + a[k] * b[k] * detail::z_csch(z)) / t;
    }
    return std::exp(logk + ex);
}

inline double mehler_1d(double omega, double t, double x, double y) {
    detail::check_t(t, "mehler_1d");
    if (!(omega >= 0.0)) throw DomainError("mehler_1d: omega must be non-negative");
    const double z = omega * t;
    const double logk = -0.5 * std::log(2.0 * std::numbers::pi * t) - 0.5 * detail::log_sinhc(z);
    const double ex = (-0.5 * (x * x + y * y) * detail::z_coth(z) + x * y * detail::z_csch(z)) / t;
    return std::exp(logk + ex);
}

inline double mehler_multi(const Vec& omega, double t, const Vec& x, const Vec& y) {
    if (x.size() != omega.size() || y.size() != omega.size()) throw DomainError("mehler_multi: dimension mismatch");
    double k = 1.0;
    for (Eigen::Index j = 0; j < omega.size(); ++j) k *= mehler_1d(omega[j], t, x[j], y[j]);
    return k;
}

// log-coordinates; g = S S^T
inline double gbm_kernel(const Vec& btilde, const Mat& S, double t, const Vec& y0, const Vec& yt) {
    detail::check_t(t, "gbm_kernel");
    const auto M = S.rows();
    if (S.cols() != M || btilde.size() != M || y0.size() != M || yt.size() != M)
        throw DomainError("gbm_kernel: dimension mismatch");
    Eigen::FullPivLU<Mat> lu(S);
    if (!lu.isInvertible()) throw SingularDiffusion("gbm_kernel: S is singular", std::numeric_limits<double>::infinity());
    const double det = std::abs(lu.determinant());
    const Vec r = yt - y0 - btilde * t;
    const Vec z = lu.solve(r);  // r^T g^{-1} r = |S^{-1} r|^2
    return std::exp(-z.squaredNorm() / (2.0 * t)) / (det * std::pow(2.0 * std::numbers::pi * t, 0.5 * static_cast<double>(M)));
}

enum class Side { forward, backward };

// forward:  dK/dt - (L0^dagger_y + u(y)) K
// backward: dK/dt - (L0_x + u(x)) K   (t is the elapsed time)
inline double kernel_pde_residual(const KernelFn& K, const DiffusionSpec& spec, const Vec& x, const Vec& y, double t,
                                  double h, Side side) {
    if (!(h > 0.0)) throw DomainError("kernel_pde_residual: h must be positive");
    if (!(t > 2.0 * h)) throw DomainError("kernel_pde_residual: need t > 2h");
    const double dt = (K(t + h, x, y) - K(t - h, x, y)) / (2.0 * h);
    if (side == Side::forward) {
        ScalarField f = [&](const Vec& z) { return K(t, x, z); };
        return dt - adjoint_generator_apply(spec, f, y, h) - spec.potential_at(y) * K(t, x, y);
    }
    ScalarField f = [&](const Vec& z) { return K(t, z, y); };
    return dt - generator_apply(spec, f, x, h) - spec.potential_at(x) * K(t, x, y);
}

}  // namespace fkpath
