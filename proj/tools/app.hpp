#pragma once

// Command-line front end. Kept in a header so the tests can drive it in-process.

#include <fkpath/fkpath.hpp>
#include <fkpath/verify.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <sstream>
#include <variant>

#ifndef FKPATH_VERSION
#define FKPATH_VERSION "unknown"
#endif

namespace fkpath::app {

using json = nlohmann::json;

enum ExitCode { kOk = 0, kCheckFailed = 1, kValidation = 2, kNumerical = 3 };

// ---- config access ---------------------------------------------------------------

inline void expect_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || it.key() == a;
        if (!ok) throw ConfigError("unknown key '" + where + "." + it.key() + "'");
    }
}

inline const json& section(const json& cfg, const char* name) {
    if (!cfg.contains(name)) throw ConfigError(std::string("missing section '") + name + "'");
    return cfg.at(name);
}

inline double get_num(const json& j, const char* key, double def) {
    if (!j.contains(key)) return def;
    if (!j.at(key).is_number()) throw ConfigError(std::string("'") + key + "' must be a number");
    return j.at(key).get<double>();
}

inline long long get_int(const json& j, const char* key, long long def) {
    if (!j.contains(key)) return def;
    const json& v = j.at(key);
    if (!v.is_number_integer() && !v.is_number_unsigned())
        throw ConfigError(std::string("'") + key + "' must be an integer");
    return v.get<long long>();
}

inline std::string get_str(const json& j, const char* key, const std::string& def) {
    if (!j.contains(key)) return def;
    if (!j.at(key).is_string()) throw ConfigError(std::string("'") + key + "' must be a string");
    return j.at(key).get<std::string>();
}

inline Vec to_vec(const json& v, const std::string& what) {
    if (v.is_number()) return Vec::Constant(1, v.get<double>());
    if (!v.is_array()) throw ConfigError(what + " must be a number or an array of numbers");
    Vec out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number()) throw ConfigError(what + " must contain only numbers");
        out[static_cast<Eigen::Index>(i)] = v[i].get<double>();
    }
    return out;
}

inline Vec get_vec(const json& j, const char* key, int M, double fill) {
    if (!j.contains(key)) return Vec::Constant(M, fill);
    Vec v = to_vec(j.at(key), std::string("'") + key + "'");
    if (v.size() == 1 && M > 1) return Vec::Constant(M, v[0]);
    if (v.size() != M) throw ConfigError(std::string("'") + key + "' needs " + std::to_string(M) + " entries");
    return v;
}

// number -> multiple of I, flat list -> diagonal, nested list -> matrix
inline Mat get_mat(const json& j, const char* key, int M, double fill) {
    const std::string what = std::string("'") + key + "'";
    if (!j.contains(key)) return fill * Mat::Identity(M, M);
    const json& v = j.at(key);
    if (v.is_number()) return v.get<double>() * Mat::Identity(M, M);
    if (!v.is_array() || v.size() != static_cast<std::size_t>(M)) throw ConfigError(what + " needs " + std::to_string(M) + " rows");
    if (v[0].is_number()) return to_vec(v, what).asDiagonal();
    Mat out(M, M);
    for (int r = 0; r < M; ++r) {
        Vec row = to_vec(v[static_cast<std::size_t>(r)], what);
        if (row.size() != M) throw ConfigError(what + " must be square");
        out.row(r) = row.transpose();
    }
    return out;
}

struct GridCfg {
    double t = 1.0;
    std::size_t N = 64;
};

inline GridCfg read_grid(const json& cfg) {
    GridCfg g;
    if (!cfg.contains("grid")) return g;
    const json& j = cfg.at("grid");
    expect_keys(j, {"t", "N"}, "grid");
    g.t = get_num(j, "t", g.t);
    const long long N = get_int(j, "N", 64);
    if (N < 1) throw ConfigError("grid.N must be >= 1");
    g.N = static_cast<std::size_t>(N);
    if (!(g.t > 0.0)) throw ConfigError("grid.t must be positive");
    return g;
}

struct SamplingCfg {
    std::size_t n_paths = 100000;
    int modes = 512;
    std::uint64_t seed = 0;
    StochasticIntegral integral = StochasticIntegral::ito_left;
    Scheme scheme = Scheme::ito_euler;
};

inline SamplingCfg read_sampling(const json& cfg, std::size_t default_paths) {
    SamplingCfg s;
    s.n_paths = default_paths;
    if (!cfg.contains("sampling")) return s;
    const json& j = cfg.at("sampling");
    expect_keys(j, {"n_paths", "modes", "seed", "integral", "scheme"}, "sampling");
    const long long n = get_int(j, "n_paths", static_cast<long long>(default_paths));
    if (n < 2) throw ConfigError("sampling.n_paths must be >= 2");
    s.n_paths = static_cast<std::size_t>(n);
    const long long k = get_int(j, "modes", 512);
    if (k < 1) throw ConfigError("sampling.modes must be >= 1");
    s.modes = static_cast<int>(k);
    if (j.contains("seed")) {
        const json& v = j.at("seed");
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
            throw ConfigError("sampling.seed must be a non-negative integer");
        s.seed = v.get<std::uint64_t>();
    }
    s.integral = parse_integral(get_str(j, "integral", "ito-left"));
    s.scheme = parse_scheme(get_str(j, "scheme", "ito-euler"));
    return s;
}

inline std::uint64_t echo_seed(const json& cfg) {
    if (cfg.contains("sampling") && cfg.at("sampling").contains("seed")) return cfg.at("sampling").at("seed").get<std::uint64_t>();
    return 0;
}

// ---- models ---------------------------------------------------------------------

inline LatticeParams read_lattice_params(const json& j) {
    LatticeParams p;
    p.variant = parse_lattice_variant(get_str(j, "variant", "dst"));
    const long long M = get_int(j, "sites", 4);
    if (M < 2 || M > 100000) throw ConfigError("lattice.sites out of range");
    p.sites = static_cast<int>(M);
    if (j.contains("c")) p.c = get_vec(j, "c", p.sites, 1.0);
    if (j.contains("C")) p.C = get_vec(j, "C", p.sites, 0.5);
    if (j.contains("B")) p.B = get_vec(j, "B", p.sites, -1.0);
    p.Delta = get_num(j, "Delta", p.Delta);
    p.xi = get_num(j, "xi", p.xi);
    p.a = get_num(j, "a", p.a);
    p.defect_site = static_cast<int>(get_int(j, "defect_site", p.defect_site));
    p.defect = parse_defect_variant(get_str(j, "defect", "lax"));
    p.S = get_num(j, "S", p.S);
    return p;
}

#define FKPATH_LATTICE_KEYS "variant", "sites", "c", "C", "B", "Delta", "xi", "a", "defect_site", "defect", "S"

inline DiffusionSpec unit_model(const json& m) {
    expect_keys(m, {"kind", "dim", "drift", "potential"}, "model");
    const long long Ml = get_int(m, "dim", 1);
    if (Ml < 1 || Ml > 64) throw ConfigError("model.dim out of range");
    const int M = static_cast<int>(Ml);
    DiffusionSpec s;
    s.dim = M;
    s.name = "unit";
    s.sigma = [M](const Vec&, Mat& o) { o.setIdentity(M, M); };
    s.sigma_partials = [M](const Vec&, std::vector<Mat>& d) { d.assign(static_cast<std::size_t>(M), Mat::Zero(M, M)); };

    const json d = m.value("drift", json{{"type", "zero"}});
    expect_keys(d, {"type", "value", "theta"}, "model.drift");
    const std::string dt = get_str(d, "type", "zero");
    if (dt == "zero") {
        s.drift = [M](const Vec&, Vec& b) { b.setZero(M); };
    } else if (dt == "constant") {
        const Vec c = get_vec(d, "value", M, 0.0);
        s.drift = [c](const Vec&, Vec& b) { b = c; };
    } else if (dt == "linear") {
        const Mat th = get_mat(d, "theta", M, 1.0);
        s.drift = [th](const Vec& x, Vec& b) { b = -th * x; };
    } else {
        throw ConfigError("unknown model.drift.type '" + dt + "'");
    }

    const json u = m.value("potential", json{{"type", "zero"}});
    expect_keys(u, {"type", "value", "omega"}, "model.potential");
    const std::string ut = get_str(u, "type", "zero");
    if (ut == "constant") {
        const double c = get_num(u, "value", 0.0);
        s.potential = [c](const Vec&) { return c; };
    } else if (ut == "harmonic") {
        const Vec w = get_vec(u, "omega", M, 1.0);
        s.potential = [w](const Vec& x) { return -0.5 * (w.array() * w.array() * x.array() * x.array()).sum(); };
    } else if (ut != "zero") {
        throw ConfigError("unknown model.potential.type '" + ut + "'");
    }
    return s;
}

// dx_j = b_j x_j dt + s_j x_j dw_j
inline DiffusionSpec gbm_model(const json& m) {
    expect_keys(m, {"kind", "dim", "b", "s"}, "model");
    const long long Ml = get_int(m, "dim", 1);
    if (Ml < 1 || Ml > 64) throw ConfigError("model.dim out of range");
    const int M = static_cast<int>(Ml);
    const Vec b = get_vec(m, "b", M, 0.0), sc = get_vec(m, "s", M, 1.0);
    DiffusionSpec s;
    s.dim = M;
    s.name = "gbm";
    s.drift = [b](const Vec& x, Vec& o) { o = b.cwiseProduct(x); };
    s.sigma = [sc, M](const Vec& x, Mat& o) {
        o.setZero(M, M);
        o.diagonal() = sc.cwiseProduct(x);
    };
    s.sigma_partials = [sc, M](const Vec&, std::vector<Mat>& d) {
        d.assign(static_cast<std::size_t>(M), Mat::Zero(M, M));
        for (int l = 0; l < M; ++l) d[static_cast<std::size_t>(l)](l, l) = sc[l];
    };
    return s;
}

inline DiffusionSpec build_model(const json& cfg) {
    const json& m = section(cfg, "model");
    const std::string kind = get_str(m, "kind", "unit");
    if (kind == "unit") return unit_model(m);
    if (kind == "gbm") return gbm_model(m);
    if (kind == "lattice") {
        expect_keys(m, {"kind", "lattice"}, "model");
        const json& l = section(m, "lattice");
        expect_keys(l, {FKPATH_LATTICE_KEYS}, "model.lattice");
        return make_lattice_spec(read_lattice_params(l));
    }
    throw ConfigError("unknown model.kind '" + kind + "'");
}

// ---- result tables ----------------------------------------------------------------

using Cell = std::variant<double, long long, std::string, Vec, bool>;

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;
    std::vector<std::string> notes;
    bool all_pass = true;  // only meaningful for verify
};

inline std::string fmt17(double v) {
    char b[40];
    std::snprintf(b, sizeof b, "%.17g", v);
    return b;
}

inline std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string o = "\"";
    for (char c : s) o += c == '"' ? std::string("\"\"") : std::string(1, c);
    return o + "\"";
}

inline std::string csv_cell(const Cell& c) {
    struct V {
        std::string operator()(double d) const { return fmt17(d); }
        std::string operator()(long long i) const { return std::to_string(i); }
        std::string operator()(const std::string& s) const { return csv_quote(s); }
        std::string operator()(bool b) const { return b ? "true" : "false"; }
        std::string operator()(const Vec& v) const {
            std::string s;
            for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? ";" : "") + fmt17(v[i]);
            return s;
        }
    };
    return std::visit(V{}, c);
}

inline json json_cell(const Cell& c) {
    struct V {
        json operator()(double d) const { return std::isfinite(d) ? json(d) : json(nullptr); }
        json operator()(long long i) const { return json(i); }
        json operator()(const std::string& s) const { return json(s); }
        json operator()(bool b) const { return json(b); }
        json operator()(const Vec& v) const {
            json a = json::array();
            for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
            return a;
        }
    };
    return std::visit(V{}, c);
}

inline std::string render_csv(const Table& t) {
    std::string s;
    for (std::size_t i = 0; i < t.columns.size(); ++i) s += (i ? "," : "") + t.columns[i];
    s += "\n";
    for (const auto& r : t.rows) {
        for (std::size_t i = 0; i < r.size(); ++i) s += (i ? "," : "") + csv_cell(r[i]);
        s += "\n";
    }
    return s;
}

inline std::string render_json(const Table& t, const json& cfg, const std::string& command) {
    json doc;
    doc["version"] = FKPATH_VERSION;
    doc["command"] = command;
    doc["seed"] = echo_seed(cfg);
    doc["config"] = cfg;
    doc["columns"] = t.columns;
    json rows = json::array();
    for (const auto& r : t.rows) {
        json o;
        for (std::size_t i = 0; i < r.size(); ++i) o[t.columns[i]] = json_cell(r[i]);
        rows.push_back(std::move(o));
    }
    doc["results"] = std::move(rows);
    doc["notes"] = t.notes;
    return doc.dump(2) + "\n";
}

// ---- commands ---------------------------------------------------------------------

inline Table cmd_kernel(const json& cfg) {
    const json& k = section(cfg, "kernel");
    expect_keys(k, {"type", "dim", "theta", "theta_hat", "omega", "btilde", "S", "x", "y", "axis", "y_grid", "times"}, "kernel");
    const std::string type = get_str(k, "type", "heat");
    const long long Ml = get_int(k, "dim", 1);
    if (Ml < 1 || Ml > 64) throw ConfigError("kernel.dim out of range");
    const int M = static_cast<int>(Ml);

    KernelFn f;
    if (type == "heat") {
        f = [M](double t, const Vec& x, const Vec& y) { return heat_kernel(M, t, x, y); };
    } else if (type == "ou") {
        if (M != 1) throw ConfigError("kernel type 'ou' is one-dimensional; use 'ou-multi'");
        const double th = get_num(k, "theta", 1.0);
        f = [th](double t, const Vec& x, const Vec& y) { return ou_kernel_1d(th, t, x[0], y[0]); };
    } else if (type == "ou-multi") {
        const OUParams p = make_ou_params(get_mat(k, "theta", M, 1.0), get_mat(k, "theta_hat", M, 0.0));
        f = [p](double t, const Vec& x, const Vec& y) { return ou_kernel_multi(p, t, x, y); };
    } else if (type == "mehler") {
        if (M != 1) throw ConfigError("kernel type 'mehler' is one-dimensional; use 'mehler-multi'");
        const double w = get_num(k, "omega", 1.0);
        f = [w](double t, const Vec& x, const Vec& y) { return mehler_1d(w, t, x[0], y[0]); };
    } else if (type == "mehler-multi") {
        const Vec w = get_vec(k, "omega", M, 1.0);
        f = [w](double t, const Vec& x, const Vec& y) { return mehler_multi(w, t, x, y); };
    } else if (type == "gbm") {
        const Vec bt = get_vec(k, "btilde", M, 0.0);
        const Mat S = get_mat(k, "S", M, 1.0);
        f = [bt, S](double t, const Vec& x, const Vec& y) { return gbm_kernel(bt, S, t, x, y); };
    } else {
        throw ConfigError("unknown kernel.type '" + type + "'");
    }

    const Vec x = get_vec(k, "x", M, 0.0);
    Vec y = get_vec(k, "y", M, 0.0);
    const long long axis = get_int(k, "axis", 0);
    if (axis < 0 || axis >= M) throw ConfigError("kernel.axis out of range");
    double lo = -2.0, hi = 2.0;
    long long P = 41;
    if (k.contains("y_grid")) {
        const json& g = k.at("y_grid");
        expect_keys(g, {"lo", "hi", "points"}, "kernel.y_grid");
        lo = get_num(g, "lo", lo);
        hi = get_num(g, "hi", hi);
        P = get_int(g, "points", P);
    }
    if (P < 1 || P > 10000000) throw ConfigError("kernel.y_grid.points out of range");
    std::vector<double> times;
    if (k.contains("times")) {
        const Vec tv = to_vec(k.at("times"), "'times'");
        times.assign(tv.data(), tv.data() + tv.size());
    } else {
        times.push_back(read_grid(cfg).t);
    }

    Table tab;
    tab.columns = {"t", "x", "y", "value"};
    for (double t : times)
        for (long long i = 0; i < P; ++i) {
            y[axis] = P == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(P - 1);
            tab.rows.push_back({t, x, y, f(t, x, y)});
        }
    return tab;
}

inline Table cmd_mc(const json& cfg, int threads) {
    const json& mc = section(cfg, "mc");
    expect_keys(mc, {"estimator", "pairs", "x0", "observable"}, "mc");
    const DiffusionSpec spec = build_model(cfg);
    const GridCfg g = read_grid(cfg);
    const SamplingCfg smp = read_sampling(cfg, 100000);
    const std::string est = get_str(mc, "estimator", "bridge");
    const int M = spec.dim;

    Table tab;
    if (est == "bridge" || est == "girsanov") {
        if (!mc.contains("pairs") || !mc.at("pairs").is_array() || mc.at("pairs").empty())
            throw ConfigError("mc.pairs must be a non-empty array of {x, y}");
        std::vector<EndpointPair> panel;
        for (const json& p : mc.at("pairs")) {
            expect_keys(p, {"x", "y"}, "mc.pairs[]");
            panel.push_back({get_vec(p, "x", M, 0.0), get_vec(p, "y", M, 0.0)});
        }
        MCConfig c;
        c.n_paths = smp.n_paths;
        c.modes = smp.modes;
        c.quad_steps = static_cast<int>(g.N);
        c.seed = smp.seed;
        c.threads = threads;
        c.integral = smp.integral;
        const auto res = est == "bridge" ? estimate_propagator_bridge(spec, g.t, panel, c)
                                         : estimate_propagator_girsanov(spec, g.t, panel, c);
        tab.columns = {"x", "y", "mean", "std_error", "n_paths", "quad_steps", "modes", "seed"};
        for (std::size_t i = 0; i < res.size(); ++i)
            tab.rows.push_back({panel[i].x, panel[i].y, res[i].mean, res[i].std_error,
                                static_cast<long long>(res[i].n_paths), static_cast<long long>(res[i].quad_steps),
                                static_cast<long long>(res[i].modes), std::to_string(res[i].seed)});
        return tab;
    }
    if (est == "expectation") {
        const Vec x0 = get_vec(mc, "x0", M, 1.0);
        const json ob = mc.value("observable", json::object());
        expect_keys(ob, {"components", "time"}, "mc.observable");
        std::vector<int> comps;
        if (ob.contains("components")) {
            for (const json& c : ob.at("components")) {
                if (!c.is_number_integer() || c.get<int>() < 0 || c.get<int>() >= M)
                    throw ConfigError("mc.observable.components must be indices below the model dimension");
                comps.push_back(c.get<int>());
            }
        }
        const double s = get_num(ob, "time", g.t);
        Observable obs{{s}, [comps](const std::vector<Vec>& at) {
                           double v = 1.0;
                           for (int c : comps) v *= at[0][c];
                           return v;
                       }};
        SimulationConfig sc{SchemeConfig{smp.scheme, TimeGrid(g.t, g.N)}, smp.n_paths, smp.seed, threads};
        const RatioEstimate r = expectation_ratio(spec, x0, obs, sc);
        Vec cv(static_cast<Eigen::Index>(comps.size()));
        for (std::size_t i = 0; i < comps.size(); ++i) cv[static_cast<Eigen::Index>(i)] = comps[i];
        tab.columns = {"time", "components", "value", "std_error", "n_paths", "seed"};
        tab.rows.push_back({s, cv, r.value, r.std_error, static_cast<long long>(r.n_paths), std::to_string(r.seed)});
        return tab;
    }
    throw ConfigError("unknown mc.estimator '" + est + "'");
}

inline Table cmd_lattice(const json& cfg, int threads) {
    const json& l = section(cfg, "lattice");
    expect_keys(l, {FKPATH_LATTICE_KEYS, "x0", "method", "emit"}, "lattice");
    const LatticeParams p = read_lattice_params(l);
    const DiffusionSpec spec = make_lattice_spec(p);
    const int M = spec.dim;
    const Vec x0 = get_vec(l, "x0", M, 1.0);
    const GridCfg g = read_grid(cfg);
    const SamplingCfg smp = read_sampling(cfg, 1000);
    const std::string method = get_str(l, "method", "euler");
    const std::string emit = get_str(l, "emit", "moments");
    if (emit != "moments" && emit != "paths") throw ConfigError("lattice.emit must be 'moments' or 'paths'");
    const bool itf = method == "integrating-factor";
    if (!itf && method != "euler") throw ConfigError("lattice.method must be 'euler' or 'integrating-factor'");
    if (itf && (p.variant != LatticeVariant::dst || (p.c.size() && (p.c.array() != 1.0).any())))
        throw ConfigError("integrating-factor method needs the dst variant with c = 1");

    // surfaces NonFactorizable / poles before any work is spread out
    (void)spec.sigma_at(x0);
    (void)spec.drift_at(x0);

    const TimeGrid grid(g.t, g.N);
    const SchemeConfig sch{smp.scheme, grid};
    const auto rows = static_cast<Eigen::Index>(g.N + 1);
    const std::size_t n = smp.n_paths;
    Mat all(rows * M, static_cast<Eigen::Index>(n));
    RngPolicy pol(smp.seed);
    parallel_chunks(n, threads, [&](std::size_t, std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            Stream rng = pol.stream(i);
            const Mat dw = sample_increments(rng, grid, M);
            const Path path = itf ? dst_integrating_factor(x0, increments_to_path(dw), grid) : simulate(spec, x0, sch, dw);
            for (Eigen::Index r = 0; r < rows; ++r)
                all.col(static_cast<Eigen::Index>(i)).segment(r * M, M) = path.values.row(r).transpose();
        }
    });

    Table tab;
    if (emit == "paths") {
        tab.columns = {"path", "t", "j", "value"};
        for (std::size_t i = 0; i < n; ++i)
            for (Eigen::Index r = 0; r < rows; ++r)
                for (int j = 0; j < M; ++j)
                    tab.rows.push_back({static_cast<long long>(i), grid.time(static_cast<std::size_t>(r)), static_cast<long long>(j),
                                        all(r * M + j, static_cast<Eigen::Index>(i))});
        return tab;
    }
    tab.columns = {"t", "j", "mean", "std_error", "second_moment"};
    std::vector<double> v(n), v2(n);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (int j = 0; j < M; ++j) {
            for (std::size_t i = 0; i < n; ++i) {
                v[i] = all(r * M + j, static_cast<Eigen::Index>(i));
                v2[i] = v[i] * v[i];
            }
            auto [m, se] = sample_mean(v);
            tab.rows.push_back({grid.time(static_cast<std::size_t>(r)), static_cast<long long>(j), m, se,
                                pairwise_sum(v2) / static_cast<double>(n)});
        }
    return tab;
}

inline Table cmd_quench(const json& cfg) {
    const json& q = section(cfg, "quench");
    expect_keys(q, {"m", "omega", "times", "y", "axis", "y_grid", "method", "window", "points"}, "quench");
    if (!q.contains("omega")) throw ConfigError("quench.omega is required");
    const Vec omega = to_vec(q.at("omega"), "'omega'");
    const int M = static_cast<int>(omega.size());
    const int m = static_cast<int>(get_int(q, "m", 1));
    const std::string method = get_str(q, "method", "closed-form");
    if (method != "closed-form" && method != "quadrature") throw ConfigError("quench.method must be 'closed-form' or 'quadrature'");
    std::vector<double> times;
    if (q.contains("times")) {
        const Vec tv = to_vec(q.at("times"), "'times'");
        times.assign(tv.data(), tv.data() + tv.size());
    } else {
        times.push_back(read_grid(cfg).t);
    }
    Vec y = get_vec(q, "y", M, 0.0);
    const long long axis = get_int(q, "axis", 0);
    if (axis < 0 || axis >= M) throw ConfigError("quench.axis out of range");
    double lo = -2.0, hi = 2.0;
    long long P = 41;
    if (q.contains("y_grid")) {
        const json& g = q.at("y_grid");
        expect_keys(g, {"lo", "hi", "points"}, "quench.y_grid");
        lo = get_num(g, "lo", lo);
        hi = get_num(g, "hi", hi);
        P = get_int(g, "points", P);
    }
    if (P < 1 || P > 1000000) throw ConfigError("quench.y_grid.points out of range");
    std::vector<Vec> targets;
    for (long long i = 0; i < P; ++i) {
        y[axis] = P == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(P - 1);
        targets.push_back(y);
    }

    Table tab;
    tab.columns = {"t", "y", "value"};
    for (double t : times) {
        std::vector<double> vals;
        if (method == "closed-form") {
            for (const Vec& z : targets) vals.push_back(quench_harmonic(m, omega, t, z));
        } else {
            if (m < 1 || m > M) throw DomainError("quench: need 1 <= m <= M");
            const double W = get_num(q, "window", 8.0);
            const long long pts = get_int(q, "points", 201);
            if (!(W > 0.0) || pts < 2) throw ConfigError("quench.window must be positive and quench.points >= 2");
            ProfileGrid pg{Vec::Constant(M, -W), Vec::Constant(M, W), static_cast<int>(pts)};
            const auto res = evolve_profile([omega](double s, const Vec& a, const Vec& b) { return mehler_multi(omega, s, a, b); },
                                            quench_initial_profile(m, omega), t, pg, targets);
            vals = res.values;
            if (res.truncated)
                tab.notes.push_back("t = " + fmt17(t) + ": boundary mass " + fmt17(res.boundary_mass) +
                                    " exceeds the truncation limit; widen quench.window");
        }
        for (std::size_t i = 0; i < targets.size(); ++i) tab.rows.push_back({t, targets[i], vals[i]});
    }
    return tab;
}

inline Table cmd_spde(const json& cfg) {
    const json& s = section(cfg, "spde");
    expect_keys(s, {"kind", "L", "nodes", "modes", "sign", "initial", "stride", "field"}, "spde");
    const std::string kind = get_str(s, "kind", "heat");
    if (kind != "heat" && kind != "transport") throw ConfigError("spde.kind must be 'heat' or 'transport'");
    const double L = get_num(s, "L", 1.0);
    const long long nodes = get_int(s, "nodes", 64);
    const long long modes = get_int(s, "modes", 16);
    const long long stride = get_int(s, "stride", 1);
    if (!(L > 0.0) || nodes < 3 || modes < 1 || stride < 1) throw ConfigError("spde: need L > 0, nodes >= 3, modes >= 1, stride >= 1");
    const std::string sign = get_str(s, "sign", "wellposed");
    if (sign != "wellposed" && sign != "reversed") throw ConfigError("spde.sign must be 'wellposed' or 'reversed'");
    const std::string field = get_str(s, "field", "phi");
    if (field != "phi" && field != "h" && field != "u") throw ConfigError("spde.field must be 'phi', 'h' or 'u'");

    const double dx = 2.0 * L / static_cast<double>(nodes);
    Vec xs(nodes);
    for (long long i = 0; i < nodes; ++i) xs[i] = -L + static_cast<double>(i) * dx;
    const json ini = s.value("initial", json{{"type", "gaussian"}});
    expect_keys(ini, {"type", "center", "width", "amplitude", "offset"}, "spde.initial");
    const std::string it = get_str(ini, "type", "gaussian");
    const double c = get_num(ini, "center", 0.0), w = get_num(ini, "width", 0.2), a = get_num(ini, "amplitude", 1.0),
                 off = get_num(ini, "offset", 0.0);
    Vec phi0(nodes);
    if (it == "gaussian") {
        if (!(w > 0.0)) throw ConfigError("spde.initial.width must be positive");
        for (long long i = 0; i < nodes; ++i) phi0[i] = off + a * std::exp(-(xs[i] - c) * (xs[i] - c) / (2 * w * w));
    } else if (it == "constant") {
        phi0.setConstant(off + a);
    } else {
        throw ConfigError("unknown spde.initial.type '" + it + "'");
    }

    const GridCfg g = read_grid(cfg);
    const SamplingCfg smp = read_sampling(cfg, 2);  // only the seed matters here
    const TimeGrid grid(g.t, g.N);
    Stream rng = RngPolicy(smp.seed).stream(0);
    const QWienerField W = sample_q_wiener(rng, L, grid, static_cast<int>(modes));
    const Mat snaps = evolve_spde(kind == "heat" ? SpdeKind::heat : SpdeKind::transport, phi0, xs, dx, W,
                                  static_cast<std::size_t>(stride), sign == "reversed" ? HeatSign::reversed : HeatSign::wellposed);
    Mat out = snaps;
    if (field != "phi") {
        const HopfCole hc = hopf_cole(snaps, dx, true);
        out = field == "h" ? hc.h : hc.u;
    }
    Table tab;
    tab.columns = {"t", "x", "value"};
    for (Eigen::Index r = 0; r < out.rows(); ++r)
        for (long long i = 0; i < nodes; ++i)
            tab.rows.push_back({grid.time(static_cast<std::size_t>(r) * static_cast<std::size_t>(stride)), xs[i], out(r, i)});
    return tab;
}

inline Table cmd_verify(const json& cfg, int threads, const std::string& suite_flag) {
    json v = cfg.value("verify", json::object());
    expect_keys(v, {"suite", "seed"}, "verify");
    verify::Options o;
    o.threads = threads;
    if (v.contains("seed")) o.seed = v.at("seed").get<std::uint64_t>();
    const std::string suite = suite_flag.empty() ? get_str(v, "suite", "all") : suite_flag;
    const auto ids = verify::suite_members(suite);
    Table tab;
    tab.columns = {"criterion", "pass", "title", "detail"};
    for (int id : ids) {
        const auto r = verify::run_criterion(id, o);
        tab.all_pass = tab.all_pass && r.pass;
        tab.rows.push_back({static_cast<long long>(r.id), r.pass, r.title, r.detail});
    }
    return tab;
}

// ---- driver ---------------------------------------------------------------------------

inline const char* kColumnsHelp =
    "CSV columns (vectors are ';'-joined, numbers use 17 significant digits):\n"
    "  kernel            t,x,y,value\n"
    "  mc bridge|girsanov x,y,mean,std_error,n_paths,quad_steps,modes,seed\n"
    "  mc expectation    time,components,value,std_error,n_paths,seed\n"
    "  lattice moments   t,j,mean,std_error,second_moment\n"
    "  lattice paths     path,t,j,value\n"
    "  quench            t,y,value\n"
    "  spde              t,x,value\n"
    "  verify            criterion,pass,title,detail\n"
    "Exit codes: 0 ok, 1 verify found a failing criterion, 2 invalid input, 3 numerical failure.\n"
    "Any leaf of the config can be overridden with --section.key=value (value parsed as JSON when it can be).";

inline void apply_override(json& cfg, const std::string& path, const std::string& raw) {
    json val;
    try {
        val = json::parse(raw);
    } catch (const json::parse_error&) {
        val = raw;
    }
    json* node = &cfg;
    std::size_t pos = 0;
    while (true) {
        const auto dot = path.find('.', pos);
        const std::string key = path.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
        if (key.empty()) throw ConfigError("malformed override '--" + path + "'");
        if (!node->is_object()) throw ConfigError("override '--" + path + "' descends into a non-object");
        if (dot == std::string::npos) {
            (*node)[key] = val;
            return;
        }
        node = &(*node)[key];
        if (node->is_null()) *node = json::object();
        pos = dot + 1;
    }
}

inline void apply_overrides(json& cfg, const std::vector<std::string>& extra) {
    for (std::size_t i = 0; i < extra.size(); ++i) {
        const std::string& a = extra[i];
        if (a.rfind("--", 0) != 0 || a.size() < 3) throw ConfigError("unexpected argument '" + a + "'");
        const auto eq = a.find('=');
        if (eq != std::string::npos) {
            apply_override(cfg, a.substr(2, eq - 2), a.substr(eq + 1));
        } else {
            if (i + 1 >= extra.size()) throw ConfigError("override '" + a + "' has no value");
            apply_override(cfg, a.substr(2), extra[++i]);
        }
    }
}

struct RunResult {
    int code = kOk;
    std::string output;
};

inline RunResult execute(json cfg, int threads, const std::string& suite_flag, const std::string& format_flag) {
    expect_keys(cfg, {"command", "kernel", "model", "mc", "lattice", "quench", "spde", "verify", "grid", "sampling", "output"}, "config");
    const std::string command = get_str(cfg, "command", "");
    if (command.empty()) throw ConfigError("config needs a 'command'");
    std::string format = "csv";
    if (cfg.contains("output")) {
        expect_keys(cfg.at("output"), {"path", "format"}, "output");
        format = get_str(cfg.at("output"), "format", format);
    }
    if (!format_flag.empty()) format = format_flag;
    if (format != "csv" && format != "json") throw ConfigError("output format must be 'csv' or 'json'");
    // sections are read lazily; validate shared ones up front so typos fail before work starts
    (void)read_grid(cfg);
    (void)read_sampling(cfg, 2);

    Table t;
    if (command == "kernel")
        t = cmd_kernel(cfg);
    else if (command == "mc")
        t = cmd_mc(cfg, threads);
    else if (command == "lattice")
        t = cmd_lattice(cfg, threads);
    else if (command == "quench")
        t = cmd_quench(cfg);
    else if (command == "spde")
        t = cmd_spde(cfg);
    else if (command == "verify")
        t = cmd_verify(cfg, threads, suite_flag);
    else
        throw ConfigError("unknown command '" + command + "'");

    RunResult r;
    r.output = format == "csv" ? render_csv(t) : render_json(t, cfg, command);
    r.code = t.all_pass ? kOk : kCheckFailed;
    return r;
}

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Feynman-Kac path sampling and closed-form propagators"};
    app.allow_extras();
    app.footer(kColumnsHelp);
    std::string config_path, out_path, format, suite;
    int threads = 0;
    app.add_option("--config", config_path, "experiment config (JSON)")->required();
    app.add_option("--out", out_path, "write results here instead of stdout");
    app.add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    app.add_option("--threads", threads, "worker count (default: FKPATH_THREADS or 1); never changes results");
    app.add_option("--suite", suite, "verify suite: all, kernels, mc, wiener, transform, integrate, lattice, quench, determinism");
    app.add_flag_callback("--version", [&] { throw CLI::Success(); });
    try {
        app.parse(argc, argv);
    } catch (const CLI::Success&) {
        if (app.count("--version")) {
            out << "fkpath " << FKPATH_VERSION << "\n";
            return kOk;
        }
        out << app.help();
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "fkpath: " << e.what() << "\n";
        return kValidation;
    }
    threads = resolve_threads(threads);

    try {
        std::ifstream in(config_path);
        if (!in) throw ConfigError("cannot read config '" + config_path + "'");
        json cfg = json::parse(in);
        apply_overrides(cfg, app.remaining());
        std::string path = out_path;
        if (path.empty() && cfg.contains("output") && cfg.at("output").contains("path"))
            path = cfg.at("output").at("path").get<std::string>();
        RunResult r = execute(std::move(cfg), threads, suite, format);
        if (path.empty()) {
            out << r.output;
        } else {
            std::ofstream f(path, std::ios::binary);
            if (!f) throw ConfigError("cannot write '" + path + "'");
            f << r.output;
        }
        return r.code;
    } catch (const NumericalError& e) {
        err << "fkpath: numerical failure: " << e.what() << "\n";
        return kNumerical;
    } catch (const Error& e) {
        err << "fkpath: invalid input: " << e.what() << "\n";
        return kValidation;
    } catch (const json::exception& e) {
        err << "fkpath: invalid config: " << e.what() << "\n";
        return kValidation;
    }
}

}  // namespace fkpath::app
