#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace fkpath {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Callbacks write into caller-owned storage so hot loops can reuse buffers.
using DriftFn = std::function<void(const Vec&, Vec&)>;
using SigmaFn = std::function<void(const Vec&, Mat&)>;
using PotentialFn = std::function<double(const Vec&)>;
// out[l](k, j) = d sigma_kj / d x_l
using SigmaPartialsFn = std::function<void(const Vec&, std::vector<Mat>&)>;
using DiffusionMatrixFn = std::function<void(const Vec&, Mat&)>;
using ScalarField = std::function<double(const Vec&)>;

// ---- errors ---------------------------------------------------------------

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// bad input: exit code 2 territory
struct DomainError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct PreconditionError : Error { using Error::Error; };
struct StructureError : Error { using Error::Error; };
struct UnsupportedParameter : Error { using Error::Error; };

// numerical failure: exit code 3 territory
struct NumericalError : Error { using Error::Error; };

struct EvaluationError : NumericalError {
    Vec point;
    EvaluationError(const std::string& what, Vec at) : NumericalError(what), point(std::move(at)) {}
};

struct SingularDiffusion : NumericalError {
    double condition;
    SingularDiffusion(const std::string& what, double cond) : NumericalError(what), condition(cond) {}
};

struct NonFactorizable : NumericalError {
    double min_eigenvalue;
    NonFactorizable(const std::string& what, double lam) : NumericalError(what), min_eigenvalue(lam) {}
};

struct BlowUp : NumericalError {
    std::size_t step;
    BlowUp(const std::string& what, std::size_t n) : NumericalError(what), step(n) {}
};

struct InversionError : NumericalError { using NumericalError::NumericalError; };
struct DegenerateWeight : NumericalError { using NumericalError::NumericalError; };

namespace detail {

inline std::string fmt_vec(const Vec& x) {
    std::ostringstream os;
    os.precision(17);
    os << '(';
    for (Eigen::Index i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
    os << ')';
    return os.str();
}

inline bool all_finite(const Vec& x) { return x.allFinite(); }

}  // namespace detail

// ---- spec -----------------------------------------------------------------

struct DiffusionSpec {
    int dim = 1;
    DriftFn drift;
    SigmaFn sigma;
    PotentialFn potential;            // empty => u = 0
    SigmaPartialsFn sigma_partials;   // empty => finite differences
    // Only for models defined through g (DNLS, XXZ); sigma is then a factor of it.
    DiffusionMatrixFn diffusion;
    std::string name;

    Vec drift_at(const Vec& x) const {
        Vec b(dim);
        drift(x, b);
        return b;
    }
    Mat sigma_at(const Vec& x) const {
        Mat s(dim, dim);
        sigma(x, s);
        return s;
    }
    double potential_at(const Vec& x) const { return potential ? potential(x) : 0.0; }
    bool has_potential() const { return static_cast<bool>(potential); }

    void g_into(const Vec& x, Mat& g) const {
        if (diffusion) {
            g.resize(dim, dim);
            diffusion(x, g);
            return;
        }
        Mat s(dim, dim);
        sigma(x, s);
        g.noalias() = s * s.transpose();
    }
    Mat g_at(const Vec& x) const {
        Mat g(dim, dim);
        g_into(x, g);
        return g;
    }
};

inline double default_fd_step(const Vec& x) {
    return 1e-4 * (1.0 + (x.size() ? x.cwiseAbs().maxCoeff() : 0.0));
}

// ---- time grid / path -----------------------------------------------------

class TimeGrid {
public:
    TimeGrid() = default;
    TimeGrid(double horizon, std::size_t steps) : t_(horizon), n_(steps) {
        if (!(horizon > 0.0) || !std::isfinite(horizon))
            throw DomainError("TimeGrid: horizon must be positive and finite");
        if (steps < 1) throw DomainError("TimeGrid: need at least one step");
        d_ = horizon / static_cast<double>(steps);
    }
    double horizon() const { return t_; }
    std::size_t steps() const { return n_; }
    double delta() const { return d_; }
    // last node pinned to the horizon so no drift accumulates
    double time(std::size_t n) const { return n == n_ ? t_ : static_cast<double>(n) * d_; }

private:
    double t_ = 1.0;
    std::size_t n_ = 1;
    double d_ = 1.0;
};

struct Path {
    TimeGrid grid;
    Mat values;  // (N+1) x M

    Vec at(std::size_t n) const { return values.row(static_cast<Eigen::Index>(n)).transpose(); }
};

// ---- generator ------------------------------------------------------------

namespace detail {

inline double checked_eval(const ScalarField& f, const Vec& z) {
    double v = f(z);
    if (!std::isfinite(v))
        throw EvaluationError("non-finite field value at " + fmt_vec(z), z);
    return v;
}

inline double resolve_step(const Vec& x, std::optional<double> h) {
    double s = h ? *h : default_fd_step(x);
    if (!(s > 0.0)) throw DomainError("finite-difference step must be positive");
    return s;
}

}  // namespace detail

// L0 f = 1/2 g_ij d_ij f + b_j d_j f
inline double generator_apply(const DiffusionSpec& spec, const ScalarField& f, const Vec& x,
                              std::optional<double> step = std::nullopt) {
    const int M = spec.dim;
    const double h = detail::resolve_step(x, step);
    Mat g = spec.g_at(x);
    Vec b = spec.drift_at(x);

    Vec z = x;
    const double f0 = detail::checked_eval(f, x);
    double acc = 0.0;
    for (int i = 0; i < M; ++i) {
        z[i] = x[i] + h;
        const double fp = detail::checked_eval(f, z);
        z[i] = x[i] - h;
        const double fm = detail::checked_eval(f, z);
        z[i] = x[i];
        acc += b[i] * (fp - fm) / (2 * h);
        acc += 0.5 * g(i, i) * (fp - 2 * f0 + fm) / (h * h);
    }
    for (int i = 0; i < M; ++i) {
        for (int j = i + 1; j < M; ++j) {
            if (g(i, j) == 0.0 && g(j, i) == 0.0) continue;
            double s = 0.0;
            for (int si = -1; si <= 1; si += 2)
                for (int sj = -1; sj <= 1; sj += 2) {
                    z[i] = x[i] + si * h;
                    z[j] = x[j] + sj * h;
                    s += si * sj * detail::checked_eval(f, z);
                }
            z[i] = x[i];
            z[j] = x[j];
            // g symmetric: both (i,j) and (j,i) terms
            acc += 0.5 * (g(i, j) + g(j, i)) * s / (4 * h * h);
        }
    }
    return acc;
}

// L0^dagger f = 1/2 d_ij (g_ij f) - d_j (b_j f)
inline double adjoint_generator_apply(const DiffusionSpec& spec, const ScalarField& f, const Vec& x,
                                      std::optional<double> step = std::nullopt) {
    const int M = spec.dim;
    const double h = detail::resolve_step(x, step);
    Mat g(M, M);
    Vec b(M);
    Vec z = x;

    auto gf = [&](int i, int j) {
        spec.g_into(z, g);
        return g(i, j) * detail::checked_eval(f, z);
    };
    auto bf = [&](int j) {
        spec.drift(z, b);
        return b[j] * detail::checked_eval(f, z);
    };

    double acc = 0.0;
    for (int i = 0; i < M; ++i) {
        const double c0 = gf(i, i);
        z[i] = x[i] + h;
        const double cp = gf(i, i);
        const double bp = bf(i);
        z[i] = x[i] - h;
        const double cm = gf(i, i);
        const double bm = bf(i);
        z[i] = x[i];
        acc += 0.5 * (cp - 2 * c0 + cm) / (h * h);
        acc -= (bp - bm) / (2 * h);
    }
    for (int i = 0; i < M; ++i) {
        for (int j = i + 1; j < M; ++j) {
            double s = 0.0;
            for (int si = -1; si <= 1; si += 2)
                for (int sj = -1; sj <= 1; sj += 2) {
                    z[i] = x[i] + si * h;
                    z[j] = x[j] + sj * h;
                    spec.g_into(z, g);
                    s += si * sj * 0.5 * (g(i, j) + g(j, i)) * detail::checked_eval(f, z);
                }
            z[i] = x[i];
            z[j] = x[j];
            acc += 0.5 * 2.0 * s / (4 * h * h);
        }
    }
    return acc;
}

// ---- validation -----------------------------------------------------------

struct ProbeReport {
    Vec point;
    double min_eigenvalue = std::numeric_limits<double>::quiet_NaN();
    double norm = 0.0;  // spectral norm of g
    bool psd = false;
    bool singular = false;
    bool shape_ok = true;
    std::string message;
};

struct SpecReport {
    std::vector<ProbeReport> probes;

    bool all_psd() const {
        for (const auto& p : probes)
            if (!p.psd || !p.shape_ok) return false;
        return true;
    }
    bool any_singular() const {
        for (const auto& p : probes)
            if (p.singular) return true;
        return false;
    }
    double most_negative_eigenvalue() const {
        double m = std::numeric_limits<double>::infinity();
        for (const auto& p : probes)
            if (p.shape_ok && p.min_eigenvalue < m) m = p.min_eigenvalue;
        return m;
    }
};

inline constexpr double kPsdTolerance = 1e-10;

inline SpecReport validate_spec(const DiffusionSpec& spec, const std::vector<Vec>& probes) {
    SpecReport rep;
    const int M = spec.dim;
    for (const Vec& x : probes) {
        ProbeReport pr;
        pr.point = x;
        try {
            if (x.size() != M) {
                pr.shape_ok = false;
                pr.message = "probe has length " + std::to_string(x.size());
                rep.probes.push_back(std::move(pr));
                continue;
            }
            Vec b(M);
            spec.drift(x, b);
            if (b.size() != M) {
                pr.shape_ok = false;
                pr.message = "drift returned length " + std::to_string(b.size());
            }
            Mat g(M, M);
            if (spec.diffusion) {
                spec.diffusion(x, g);
            } else {
                Mat s(M, M);
                spec.sigma(x, s);
                if (s.rows() != M || s.cols() != M) {
                    pr.shape_ok = false;
                    pr.message = "sigma returned " + std::to_string(s.rows()) + "x" +
                                 std::to_string(s.cols());
                    rep.probes.push_back(std::move(pr));
                    continue;
                }
                g = s * s.transpose();
            }
            if (g.rows() != M || g.cols() != M) {
                pr.shape_ok = false;
                pr.message = "diffusion matrix has wrong shape";
                rep.probes.push_back(std::move(pr));
                continue;
            }
            if (spec.potential) {
                double u = spec.potential(x);
                if (!std::isfinite(u)) pr.message = "potential not finite";
            }
            Mat gs = 0.5 * (g + g.transpose());
            Eigen::SelfAdjointEigenSolver<Mat> es(gs, Eigen::EigenvaluesOnly);
            const Vec& lam = es.eigenvalues();
            pr.min_eigenvalue = lam.minCoeff();
            pr.norm = lam.cwiseAbs().maxCoeff();
            const double tol = kPsdTolerance * pr.norm;
            pr.psd = pr.min_eigenvalue >= -tol;
            pr.singular = pr.norm == 0.0 || std::abs(pr.min_eigenvalue) <= tol;
            if (!pr.psd && pr.message.empty()) pr.message = "g not positive semidefinite";
            if (pr.psd && pr.singular && pr.message.empty()) pr.message = "g singular";
        } catch (const std::exception& e) {
            pr.shape_ok = false;
            pr.message = e.what();
        }
        rep.probes.push_back(std::move(pr));
    }
    return rep;
}

}  // namespace fkpath
