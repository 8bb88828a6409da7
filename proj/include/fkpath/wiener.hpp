#pragma once

#include "core.hpp"
#include "rng.hpp"

#include <fftw3.h>

#include <mutex>
#include <numbers>

namespace fkpath {

// N x M increments, each N(0, delta)
inline Mat sample_increments(Stream& rng, const TimeGrid& grid, int M) {
    const auto N = static_cast<Eigen::Index>(grid.steps());
    Mat dw(N, M);
    const double sd = std::sqrt(grid.delta());
    std::normal_distribution<double> nd(0.0, 1.0);
    for (Eigen::Index n = 0; n < N; ++n)
        for (int j = 0; j < M; ++j) dw(n, j) = sd * nd(rng);
    return dw;
}

// cumulative sum with a zero first row
inline Mat increments_to_path(const Mat& dw) {
    Mat w(dw.rows() + 1, dw.cols());
    w.row(0).setZero();
    for (Eigen::Index n = 0; n < dw.rows(); ++n) w.row(n + 1) = w.row(n) + dw.row(n);
    return w;
}

inline Mat path_to_increments(const Mat& w) {
    return w.bottomRows(w.rows() - 1) - w.topRows(w.rows() - 1);
}

struct WienerSeries {
    double horizon = 1.0;
    int dim = 1;
    int modes = 1;
    Vec f0;
    Mat coeffs;  // modes x dim
};

inline WienerSeries sample_series(Stream& rng, double t, int M, int K) {
    if (K < 1) throw DomainError("sample_series: need at least one mode");
    if (!(t > 0.0)) throw DomainError("sample_series: horizon must be positive");
    WienerSeries s;
    s.horizon = t;
    s.dim = M;
    s.modes = K;
    s.f0.resize(M);
    s.coeffs.resize(K, M);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (int j = 0; j < M; ++j) s.f0[j] = nd(rng);
    for (int k = 0; k < K; ++k)
        for (int j = 0; j < M; ++j) s.coeffs(k, j) = nd(rng);
    return s;
}

namespace detail {
inline void check_time(double s, double t, const char* who) {
    if (!(s >= 0.0 && s <= t)) throw DomainError(std::string(who) + ": time outside [0, t]");
}
}  // namespace detail

// w_s = f0 s / sqrt(t) + sqrt(2/t) sum_k f_k sin(w_k s) / w_k
// The sine family needs w_k = k pi / t for E[w_s w_s'] = min(s, s'); with
// 2 pi k / t the sum misses half the modes and the covariance comes out wrong.
inline double series_frequency(int k, double t) { return k * std::numbers::pi / t; }

inline Vec eval_series(const WienerSeries& ws, double s) {
    const double t = ws.horizon;
    detail::check_time(s, t, "eval_series");
    if (s == 0.0) return Vec::Zero(ws.dim);
    if (s == t) return std::sqrt(t) * ws.f0;
    Vec w = ws.f0 * (s / std::sqrt(t));
    const double pre = std::sqrt(2.0 / t);
    for (int k = 1; k <= ws.modes; ++k) {
        const double om = series_frequency(k, t);
        w += (pre * std::sin(om * s) / om) * ws.coeffs.row(k - 1).transpose();
    }
    return w;
}

// pinned x -> y, modes sin(k pi s / t)
inline Vec bridge_eval(const Vec& x, const Vec& y, const WienerSeries& ws, double s) {
    const double t = ws.horizon;
    detail::check_time(s, t, "bridge_eval");
    if (s == 0.0) return x;
    if (s == t) return y;
    Vec b = x + (s / t) * (y - x);
    const double pre = std::sqrt(2.0 * t) / std::numbers::pi;
    for (int k = 1; k <= ws.modes; ++k)
        b += (pre * std::sin(k * std::numbers::pi * s / t) / k) * ws.coeffs.row(k - 1).transpose();
    return b;
}

namespace detail {
inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}
}  // namespace detail

// X_n = sum_r c_r sin(pi r n / N) at n = 0..N, any mode index r.
// Modes above N alias back onto 1..N-1, then a DST-I does the rest.
class SineSynth {
public:
    explicit SineSynth(std::size_t N) : N_(N) {
        if (N_ < 1) throw DomainError("SineSynth: need N >= 1");
        if (N_ > 1) {
            const int n = static_cast<int>(N_ - 1);
            in_ = fftw_alloc_real(N_ - 1);
            out_ = fftw_alloc_real(N_ - 1);
            std::lock_guard lk(detail::fftw_planner_mutex());
            plan_ = fftw_plan_r2r_1d(n, in_, out_, FFTW_RODFT00, FFTW_ESTIMATE);
        }
        clear();
    }
    SineSynth(const SineSynth&) = delete;
    SineSynth& operator=(const SineSynth&) = delete;
    ~SineSynth() {
        if (plan_) {
            std::lock_guard lk(detail::fftw_planner_mutex());
            fftw_destroy_plan(plan_);
        }
        if (in_) fftw_free(in_);
        if (out_) fftw_free(out_);
    }

    std::size_t nodes() const { return N_; }

    void clear() {
        for (std::size_t i = 0; i + 1 < N_; ++i) in_[i] = 0.0;
    }

    void add(std::size_t mode, double c) {
        const std::size_t r = mode % (2 * N_);
        if (r == 0 || r == N_) return;
        if (r < N_)
            in_[r - 1] += c;
        else
            in_[2 * N_ - r - 1] -= c;
    }

    // out(0..N) with stride
    void synth(double* out, std::ptrdiff_t stride) {
        out[0] = 0.0;
        out[static_cast<std::ptrdiff_t>(N_) * stride] = 0.0;
        if (N_ == 1) return;
        fftw_execute(plan_);
        for (std::size_t n = 1; n < N_; ++n) out[static_cast<std::ptrdiff_t>(n) * stride] = 0.5 * out_[n - 1];
    }

private:
    std::size_t N_;
    double* in_ = nullptr;
    double* out_ = nullptr;
    fftw_plan plan_ = nullptr;
};

// zero-pinned bridge fluctuation at the N+1 nodes; out is (N+1) x M
inline void bridge_noise_on_grid(const WienerSeries& ws, SineSynth& syn, Mat& out) {
    const auto N = syn.nodes();
    out.resize(static_cast<Eigen::Index>(N + 1), ws.dim);
    const double pre = std::sqrt(2.0 * ws.horizon) / std::numbers::pi;
    for (int j = 0; j < ws.dim; ++j) {
        syn.clear();
        for (int k = 1; k <= ws.modes; ++k) syn.add(static_cast<std::size_t>(k), pre * ws.coeffs(k - 1, j) / k);
        syn.synth(out.col(j).data(), 1);
    }
}

inline Path bridge_on_grid(const Vec& x, const Vec& y, const WienerSeries& ws, const TimeGrid& grid) {
    if (std::abs(grid.horizon() - ws.horizon) > 1e-12 * ws.horizon)
        throw DomainError("bridge_on_grid: grid and series horizons differ");
    SineSynth syn(grid.steps());
    Path p{grid, Mat()};
    bridge_noise_on_grid(ws, syn, p.values);
    const auto N = grid.steps();
    for (std::size_t n = 0; n <= N; ++n) {
        const double a = grid.time(n) / grid.horizon();
        p.values.row(static_cast<Eigen::Index>(n)) += (x + a * (y - x)).transpose();
    }
    p.values.row(0) = x.transpose();
    p.values.row(static_cast<Eigen::Index>(N)) = y.transpose();
    return p;
}

// free series at the nodes
inline Mat series_on_grid(const WienerSeries& ws, const TimeGrid& grid) {
    if (std::abs(grid.horizon() - ws.horizon) > 1e-12 * ws.horizon)
        throw DomainError("series_on_grid: grid and series horizons differ");
    const auto N = grid.steps();
    const double t = ws.horizon;
    SineSynth syn(N);
    Mat w(static_cast<Eigen::Index>(N + 1), ws.dim);
    const double pre = std::sqrt(2.0 / t);
    for (int j = 0; j < ws.dim; ++j) {
        syn.clear();
        for (int k = 1; k <= ws.modes; ++k) {
            const double om = series_frequency(k, t);
            syn.add(static_cast<std::size_t>(k), pre * ws.coeffs(k - 1, j) / om);
        }
        syn.synth(w.col(j).data(), 1);
        for (std::size_t n = 0; n <= N; ++n)
            w(static_cast<Eigen::Index>(n), j) += ws.f0[j] * grid.time(n) / std::sqrt(t);
    }
    w.row(static_cast<Eigen::Index>(N)) = std::sqrt(t) * ws.f0.transpose();
    return w;
}

// analytic covariance of the K-mode free series: s s'/t + (2/t) sum sin sin / w^2
inline double series_covariance(double t, int K, double s, double sp) {
    double c = s * sp / t;
    for (int k = 1; k <= K; ++k) {
        const double om = series_frequency(k, t);
        c += 2.0 / t * std::sin(om * s) * std::sin(om * sp) / (om * om);
    }
    return c;
}

}  // namespace fkpath
