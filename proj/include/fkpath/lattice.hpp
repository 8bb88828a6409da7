#pragma once

#include "core.hpp"

#include <numbers>

namespace fkpath {

struct PoleError : NumericalError { using NumericalError::NumericalError; };

namespace detail {
inline int wrap(int j, int M) { return ((j % M) + M) % M; }
}  // namespace detail

// ---- pivoted factorization -----------------------------------------------------

struct PivotedFactor {
    Mat sigma;  // M x M with sigma sigma^T = g (zero columns past the rank)
    int rank = 0;
    bool ok = false;
};

// Symmetric pivoted Cholesky. Stops once the largest remaining pivot is below
// tol * |g|; the leftover Schur block must then be negligible or g is not PSD.
inline PivotedFactor pivoted_cholesky(const Mat& g, double rel_tol = 1e-12) {
    const auto M = g.rows();
    PivotedFactor out;
    out.sigma = Mat::Zero(M, M);
    const double gn = g.norm();
    if (gn == 0.0) {
        out.ok = true;
        return out;
    }
    const double tol = rel_tol * gn;
    Mat A = 0.5 * (g + g.transpose());
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(M));
    for (Eigen::Index i = 0; i < M; ++i) perm[static_cast<std::size_t>(i)] = i;
    Mat L = Mat::Zero(M, M);
    Eigen::Index k = 0;
    for (; k < M; ++k) {
        Eigen::Index piv = k;
        for (Eigen::Index i = k + 1; i < M; ++i)
            if (A(i, i) > A(piv, piv)) piv = i;
        if (A(piv, piv) <= tol) break;
        if (piv != k) {
            A.row(k).swap(A.row(piv));
            A.col(k).swap(A.col(piv));
            L.row(k).swap(L.row(piv));
            std::swap(perm[static_cast<std::size_t>(k)], perm[static_cast<std::size_t>(piv)]);
        }
        const double d = std::sqrt(A(k, k));
        L(k, k) = d;
        for (Eigen::Index i = k + 1; i < M; ++i) L(i, k) = A(i, k) / d;
        for (Eigen::Index i = k + 1; i < M; ++i)
            for (Eigen::Index j = k + 1; j < M; ++j) A(i, j) -= L(i, k) * L(j, k);
    }
    out.rank = static_cast<int>(k);
    if (k < M) {
        const double rest = A.bottomRightCorner(M - k, M - k).cwiseAbs().maxCoeff();
        if (rest > 1e-10 * gn) return out;
    }
    for (Eigen::Index i = 0; i < M; ++i) out.sigma.row(perm[static_cast<std::size_t>(i)]) = L.row(i);
    out.ok = true;
    return out;
}

inline double min_eigenvalue(const Mat& g) {
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (g + g.transpose()), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

// sigma from g or NonFactorizable with the most negative eigenvalue
inline void factor_or_throw(const Mat& g, const Vec& x, Mat& sigma, const char* who) {
    auto f = pivoted_cholesky(g);
    if (!f.ok) {
        const double lam = min_eigenvalue(g);
        throw NonFactorizable(std::string(who) + ": diffusion matrix not positive semidefinite at " +
                                  detail::fmt_vec(x) + " (min eigenvalue " + std::to_string(lam) + ")",
                              lam);
    }
    sigma = std::move(f.sigma);
}

// ---- DST -----------------------------------------------------------------------

inline DiffusionSpec dst_spec(int M, const Vec& c) {
    if (M < 2) throw ConfigError("dst_spec: need M >= 2");
    if (c.size() != M) throw ConfigError("dst_spec: c must have M entries");
    DiffusionSpec s;
    s.dim = M;
    s.name = "dst";
    s.drift = [M, c](const Vec& x, Vec& b) {
        b.resize(M);
        for (int j = 0; j < M; ++j) b[j] = c[j] * x[j] - x[detail::wrap(j + 1, M)];
    };
    s.sigma = [M](const Vec& x, Mat& sg) {
        sg.setZero(M, M);
        sg.diagonal() = x;
    };
    s.sigma_partials = [M](const Vec&, std::vector<Mat>& d) {
        d.assign(static_cast<std::size_t>(M), Mat::Zero(M, M));
        for (int l = 0; l < M; ++l) d[static_cast<std::size_t>(l)](l, l) = 1.0;
    };
    return s;
}

// y = log x chart of the DST
inline DiffusionSpec dst_transformed_spec(int M, const Vec& C, const Vec& B) {
    if (M < 2) throw ConfigError("dst_transformed_spec: need M >= 2");
    if (C.size() != M || B.size() != M) throw ConfigError("dst_transformed_spec: C and B must have M entries");
    DiffusionSpec s;
    s.dim = M;
    s.name = "dst-transformed";
    s.drift = [M, C, B](const Vec& y, Vec& b) {
        b.resize(M);
        for (int j = 0; j < M; ++j) b[j] = C[j] + B[j] * std::exp(y[detail::wrap(j + 1, M)] - y[j]);
    };
    s.sigma = [M](const Vec&, Mat& sg) { sg.setIdentity(M, M); };
    return s;
}

// Symmetric part of the transformed DST generator is
//   1/2 Laplacian + sum_j (B_j / 2) exp(y_{j+1} - y_j):
// only b_j depends on y_j through its own exponential, so -1/2 div b gives B_j / 2.
inline Vec toda_coupling(const Vec& B) { return 0.5 * B; }

inline double toda_check(int M, const Vec& B, const Vec& y, const ScalarField& f, double h) {
    if (y.size() != M || B.size() != M) throw DomainError("toda_check: dimension mismatch");
    const DiffusionSpec H = dst_transformed_spec(M, Vec::Zero(M), B);
    const double sym = 0.5 * (generator_apply(H, f, y, h) + adjoint_generator_apply(H, f, y, h));
    DiffusionSpec lap;
    lap.dim = M;
    lap.drift = [M](const Vec&, Vec& b) { b.setZero(M); };
    lap.sigma = [M](const Vec&, Mat& sg) { sg.setIdentity(M, M); };
    const Vec beta = toda_coupling(B);
    double pot = 0.0;
    for (int j = 0; j < M; ++j) pot += beta[j] * std::exp(y[detail::wrap(j + 1, M)] - y[j]);
    const double toda = generator_apply(lap, f, y, h) + pot * f(y);
    return std::abs(sym - toda);
}

// ---- DNLS ----------------------------------------------------------------------

inline Mat dnls_diffusion(const Vec& x) {
    const int M = static_cast<int>(x.size());
    Mat g = Mat::Zero(M, M);
    for (int j = 0; j < M; ++j) {
        const int n = detail::wrap(j + 1, M);
        g(j, j) += x[j] * (x[n] - x[j]);
        g(j, n) += x[n] * x[n];
        g(n, j) += x[n] * x[n];
    }
    return g;
}

inline DiffusionSpec dnls_spec(int M) {
    if (M < 3) throw ConfigError("dnls_spec: need M >= 3");
    DiffusionSpec s;
    s.dim = M;
    s.name = "dnls";
    s.drift = [M](const Vec& x, Vec& b) {
        b.resize(M);
        for (int j = 0; j < M; ++j)
            b[j] = -0.5 * (x[j] - 2.0 * x[detail::wrap(j + 1, M)] + x[detail::wrap(j + 2, M)]);
    };
    s.diffusion = [](const Vec& x, Mat& g) { g = dnls_diffusion(x); };
    s.sigma = [](const Vec& x, Mat& sg) { factor_or_throw(dnls_diffusion(x), x, sg, "dnls_spec"); };
    return s;
}

// ---- XXZ / Ising -----------------------------------------------------------------

namespace detail {
inline void check_no_pole(const Vec& x, const char* who) {
    for (Eigen::Index j = 0; j < x.size(); ++j)
        if (x[j] == 0.0) throw PoleError(std::string(who) + ": x_" + std::to_string(j) + " = 0 hits a pole");
}
}  // namespace detail

// bonds (j, j+1) summed literally over j = 0..M-1 with wrap
inline Mat xxz_diffusion(const Vec& x, double Delta, double xi) {
    const int M = static_cast<int>(x.size());
    Mat g = Mat::Zero(M, M);
    for (int j = 0; j < M; ++j) {
        const int n = detail::wrap(j + 1, M);
        const double c = 0.5 * (x[n] * x[n] + x[j] * x[j] - 2.0 * Delta * x[j] * x[n]);
        g(j, n) += c;
        g(n, j) += c;
        g(j, j) += xi * x[j] * x[j];
    }
    return g;
}

inline DiffusionSpec xxz_spec(int M, double Delta, double xi) {
    if (M < 2) throw ConfigError("xxz_spec: need M >= 2");
    DiffusionSpec s;
    s.dim = M;
    s.name = "xxz";
    s.drift = [M, xi](const Vec& x, Vec& b) {
        detail::check_no_pole(x, "xxz drift");
        b.resize(M);
        for (int j = 0; j < M; ++j) {
            const double r = x[detail::wrap(j + 1, M)], l = x[detail::wrap(j - 1, M)];
            b[j] = 0.25 * (x[j] * x[j] * (1.0 / r + 1.0 / l) - (r + l)) + 0.5 * xi * x[j];
        }
    };
    s.diffusion = [Delta, xi](const Vec& x, Mat& g) { g = xxz_diffusion(x, Delta, xi); };
    s.sigma = [Delta, xi](const Vec& x, Mat& sg) { factor_or_throw(xxz_diffusion(x, Delta, xi), x, sg, "xxz_spec"); };
    s.potential = [M](const Vec& x) {
        detail::check_no_pole(x, "xxz potential");
        double u = 0.0;
        for (int j = 0; j < M; ++j) {
            const double r = x[detail::wrap(j + 1, M)];
            u += x[j] / r + r / x[j];
        }
        return -u / 8.0;
    };
    return s;
}

inline double ising_xi_hat(double a) { return (a * a + 1.0) / a; }

inline Mat ising_sigma(int M, double a) {
    Mat s = a * Mat::Identity(M, M);
    for (int j = 0; j + 1 < M; ++j) s(j, j + 1) = 1.0;
    return s / std::sqrt(a);
}

// open chain, constant coefficients
inline DiffusionSpec ising_spec(int M, double a) {
    if (M < 2) throw ConfigError("ising_spec: need M >= 2");
    if (!(a > 0.0)) throw DomainError("ising_spec: a must be positive");
    const Mat sg = ising_sigma(M, a);
    const double half = 0.5 * ising_xi_hat(a);
    DiffusionSpec s;
    s.dim = M;
    s.name = "ising";
    s.drift = [M, half](const Vec&, Vec& b) { b.setConstant(M, half); };
    s.sigma = [sg](const Vec&, Mat& out) { out = sg; };
    s.sigma_partials = [M](const Vec&, std::vector<Mat>& d) { d.assign(static_cast<std::size_t>(M), Mat::Zero(M, M)); };
    return s;
}

// exact solution given the Wiener value w_s
inline Vec ising_solution(int M, double a, const Vec& y0, const Vec& ws, double s) {
    if (!(a > 0.0)) throw DomainError("ising_solution: a must be positive");
    if (y0.size() != M || ws.size() != M) throw DomainError("ising_solution: dimension mismatch");
    const double half = 0.5 * ising_xi_hat(a), ra = std::sqrt(a);
    Vec y(M);
    for (int j = 0; j + 1 < M; ++j) y[j] = y0[j] + half * s + (a * ws[j] + ws[j + 1]) / ra;
    y[M - 1] = y0[M - 1] + half * s + ra * ws[M - 1];
    return y;
}

// ---- defect DST --------------------------------------------------------------------

enum class DefectVariant { lax, algebraic };

inline DefectVariant parse_defect_variant(const std::string& s) {
    if (s == "lax") return DefectVariant::lax;
    if (s == "algebraic") return DefectVariant::algebraic;
    throw ConfigError("unknown defect variant '" + s + "'");
}

// m is the 0-based defect site, 1 <= m <= M-2; site m-1 carries the modified coupling
inline DiffusionSpec defect_dst_spec(int M, int m, DefectVariant variant, double S, const Vec& c) {
    if (M < 3) throw ConfigError("defect_dst_spec: need M >= 3");
    if (m < 1 || m > M - 2) throw ConfigError("defect_dst_spec: defect site out of range");
    if (c.size() != M) throw ConfigError("defect_dst_spec: c must have M entries");
    DiffusionSpec s;
    s.dim = M;
    if (variant == DefectVariant::lax) {
        s.name = "defect-dst/lax";
        s.drift = [M, m, c](const Vec& x, Vec& b) {
            b.resize(M);
            for (int j = 0; j < M; ++j) b[j] = c[j] * x[j] - x[detail::wrap(j + 1, M)];
            b[m - 1] = c[m - 1] * x[m - 1] + 0.5 * (x[m + 1] - x[m]);
            b[m] = -0.5 * (x[m + 1] + x[m]);
        };
        s.sigma = [M, m](const Vec& x, Mat& sg) {
            sg.setZero(M, M);
            sg.diagonal() = x;
            sg(m, m) = 0.0;
        };
    } else {
        s.name = "defect-dst/algebraic";
        s.drift = [M, m, S, c](const Vec& x, Vec& b) {
            b.resize(M);
            for (int j = 0; j < M; ++j) b[j] = c[j] * x[j] - x[detail::wrap(j + 1, M)];
            b[m - 1] = c[m - 1] * x[m - 1] - x[m + 1] - S * x[m];
            b[m] = 0.5 * x[m] - x[m + 1];
        };
        s.sigma = [M, m](const Vec& x, Mat& sg) {
            sg.setZero(M, M);
            sg.diagonal() = x;
            const double r2 = std::numbers::sqrt2;
            sg(m - 1, m - 1) = x[m - 1];
            sg(m - 1, m) = r2 * x[m];
            sg(m, m - 1) = r2 * x[m];
            sg(m, m) = x[m];
        };
    }
    return s;
}

struct DarbouxEntries {
    double beta, gamma, alpha2;
};

inline DarbouxEntries darboux_defect_entries(double z, double zt, double Z, double Zt, double zeta) {
    const double beta = z - zt, gamma = Zt - Z;
    return {beta, gamma, zeta - beta * gamma};
}

// ---- parameter bundle used by the front end -------------------------------------------

enum class LatticeVariant { dst, dst_transformed, dnls, xxz, ising, defect_dst };

inline LatticeVariant parse_lattice_variant(const std::string& s) {
    if (s == "dst") return LatticeVariant::dst;
    if (s == "dst-transformed") return LatticeVariant::dst_transformed;
    if (s == "dnls") return LatticeVariant::dnls;
    if (s == "xxz") return LatticeVariant::xxz;
    if (s == "ising") return LatticeVariant::ising;
    if (s == "defect-dst") return LatticeVariant::defect_dst;
    throw ConfigError("unknown lattice variant '" + s + "'");
}

struct LatticeParams {
    LatticeVariant variant = LatticeVariant::dst;
    int sites = 4;
    Vec c, C, B;  // empty => defaults (c = 1, C = 1/2, B = -1)
    double Delta = 1.0;
    double xi = 0.0;
    double a = 1.0;
    int defect_site = 1;
    DefectVariant defect = DefectVariant::lax;
    double S = 0.0;
};

inline DiffusionSpec make_lattice_spec(const LatticeParams& p) {
    const int M = p.sites;
    auto or_const = [M](const Vec& v, double d) { return v.size() ? v : Vec::Constant(M, d); };
    switch (p.variant) {
        case LatticeVariant::dst: return dst_spec(M, or_const(p.c, 1.0));
        case LatticeVariant::dst_transformed: return dst_transformed_spec(M, or_const(p.C, 0.5), or_const(p.B, -1.0));
        case LatticeVariant::dnls: return dnls_spec(M);
        case LatticeVariant::xxz: return xxz_spec(M, p.Delta, p.xi);
        case LatticeVariant::ising: return ising_spec(M, p.a);
        case LatticeVariant::defect_dst: return defect_dst_spec(M, p.defect_site, p.defect, p.S, or_const(p.c, 1.0));
    }
    throw ConfigError("unhandled lattice variant");
}

}  // namespace fkpath
