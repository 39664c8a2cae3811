#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

#include "oupinball/analytic_bounds.hpp"
#include "oupinball/error.hpp"
#include "oupinball/isoperimetry.hpp"
#include "oupinball/simulator.hpp"
#include "oupinball/special_functions.hpp"
#include "oupinball/spectral.hpp"

namespace oupinball::cli {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

constexpr const char* kVersion = "0.1.0";

// ---------------------------------------------------------------- strict config reading

// Reads keys from one JSON object and rejects whatever was not asked for.
class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw InputError(path_ + ": expected an object");
    }

    bool has(const std::string& k) const { return j_.contains(k); }

    template <class T>
    T get(const std::string& k, T fallback) {
        used_.insert(k);
        if (!j_.contains(k)) return fallback;
        return as<T>(j_.at(k), k);
    }

    template <class T>
    T need(const std::string& k) {
        used_.insert(k);
        if (!j_.contains(k)) throw InputError(path_ + ": missing key '" + k + "'");
        return as<T>(j_.at(k), k);
    }

    Reader child(const std::string& k) {
        used_.insert(k);
        static const json empty = json::object();
        return Reader(j_.contains(k) ? j_.at(k) : empty, path_ + "." + k);
    }

    const json& raw(const std::string& k) {
        used_.insert(k);
        return j_.at(k);
    }

    std::string path() const { return path_; }

    void finish() const {
        for (const auto& [k, v] : j_.items())
            if (!used_.count(k)) throw InputError(path_ + ": unknown key '" + k + "'");
    }

private:
    template <class T>
    T as(const json& v, const std::string& k) const {
        try {
            if constexpr (std::is_same_v<T, double>) {
                if (!v.is_number()) throw InputError("");
            } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
                if (!v.is_number_integer() || (std::is_unsigned_v<T> && v.get<long long>() < 0)) throw InputError("");
            } else if constexpr (std::is_same_v<T, bool>) {
                if (!v.is_boolean()) throw InputError("");
            } else if constexpr (std::is_same_v<T, std::string>) {
                if (!v.is_string()) throw InputError("");
            } else if constexpr (std::is_same_v<T, std::vector<double>>) {
                if (!v.is_array()) throw InputError("");
                for (const auto& e : v)
                    if (!e.is_number()) throw InputError("");
            }
            return v.get<T>();
        } catch (const std::exception&) {
            throw InputError(path_ + "." + k + ": wrong type");
        }
    }

    const json& j_;
    std::string path_;
    std::set<std::string> used_;
};

DomainSpec read_spec(Reader r) {
    DomainSpec s;
    s.dim = r.need<int>("dim");
    s.lambda = r.get<double>("lambda", 1.0);
    Reader o = r.child("obstacle");
    const std::string kind = o.get<std::string>("kind", "none");
    auto center = [&] {
        Point c = o.get<std::vector<double>>("center", Point(s.dim, 0.0));
        return c;
    };
    if (kind == "none") {
        s.obstacle = NoObstacle{};
    } else if (kind == "ball") {
        s.obstacle = BallObstacle{center(), o.need<double>("r")};
    } else if (kind == "hypercube") {
        s.obstacle = CubeObstacle{center(), o.need<double>("r")};
    } else if (kind == "shell") {
        const Point c = center();
        const double rr = o.need<double>("r");
        s.obstacle = ShellDomain{c, rr, o.need<double>("R")};
    } else if (kind == "trap") {
        const double y = o.need<double>("y");
        s.obstacle = TrapObstacle{y, o.need<double>("alpha")};
    } else {
        throw InputError(o.path() + ".kind: unknown obstacle kind '" + kind + "'");
    }
    o.finish();
    r.finish();
    s.validate();
    return s;
}

json spec_json(const DomainSpec& s) {
    json o;
    o["kind"] = obstacle_kind(s.obstacle);
    std::visit(
        [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, BallObstacle> || std::is_same_v<T, CubeObstacle>) {
                o["center"] = v.center;
                o["r"] = v.r;
            } else if constexpr (std::is_same_v<T, ShellDomain>) {
                o["center"] = v.center;
                o["r"] = v.r;
                o["R"] = v.R;
            } else if constexpr (std::is_same_v<T, TrapObstacle>) {
                o["y"] = v.y;
                o["alpha"] = v.alpha;
            }
        },
        s.obstacle);
    return json{{"dim", s.dim}, {"lambda", s.lambda}, {"obstacle", o}};
}

// ---------------------------------------------------------------- output helpers

json num(double x) {
    if (std::isfinite(x)) return x;
    if (std::isnan(x)) return "nan";
    return x > 0 ? "inf" : "-inf";
}

std::string fmt(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
        if (c == '"') q += '"';
        q += c;
    }
    return q + '"';
}

class Csv {
public:
    explicit Csv(std::vector<std::string> header) : cols_(header.size()) { row(header); }

    void row(const std::vector<std::string>& fields) {
        if (fields.size() != cols_) throw Error("csv row width mismatch");
        for (std::size_t i = 0; i < fields.size(); ++i) text_ += (i ? "," : "") + csv_field(fields[i]);
        text_ += "\r\n";
    }

    const std::string& text() const { return text_; }

private:
    std::size_t cols_;
    std::string text_;
};

std::string b01(bool b) { return b ? "true" : "false"; }

struct Output {
    fs::path dir;
    std::vector<std::string> written;

    void put(const std::string& name, const std::string& body) {
        fs::create_directories(dir);
        std::ofstream f(dir / name, std::ios::binary);
        if (!f) throw InputError("cannot write " + (dir / name).string());
        f << body;
        written.push_back((dir / name).string());
    }

    void put_json(const std::string& name, const json& j) { put(name, j.dump(2) + "\n"); }
};

json report_json(const BoundReport& b) {
    return json{{"anchor", b.anchor},
                {"side", to_string(b.side)},
                {"quantity", to_string(b.quantity)},
                {"value", num(b.value)},
                {"applicable", b.applicable},
                {"explicit", b.is_explicit},
                {"disputed", b.disputed},
                {"certified", b.certified()},
                {"free_constant", b.free_constant},
                {"coefficient", num(b.coefficient)},
                {"condition", b.condition},
                {"note", b.note}};
}

std::string catalogue_csv(const BoundCatalogue& c) {
    Csv csv({"anchor", "side", "quantity", "value", "applicable", "explicit", "disputed", "certified", "free_constant",
             "coefficient", "condition", "note"});
    for (const auto& b : c.reports)
        csv.row({b.anchor, to_string(b.side), to_string(b.quantity), fmt(b.value), b01(b.applicable),
                 b01(b.is_explicit), b01(b.disputed), b01(b.certified()), b.free_constant, fmt(b.coefficient),
                 b.condition, b.note});
    return csv.text();
}

json catalogue_json(const BoundCatalogue& c) {
    json reps = json::array();
    for (const auto& b : c.reports) reps.push_back(report_json(b));
    return json{{"spec", spec_json(c.spec)},
                {"best_explicit_lower", num(c.best_explicit_lower)},
                {"best_lower_anchor", c.best_lower_anchor},
                {"best_explicit_upper", num(c.best_explicit_upper)},
                {"best_upper_anchor", c.best_upper_anchor},
                {"ordered", c.ordered},
                {"findings", c.findings},
                {"reports", reps}};
}

AggregateOptions read_bound_options(Reader r) {
    AggregateOptions o;
    o.universal_constant = r.get("universal_constant", o.universal_constant);
    o.eps = r.get("eps", o.eps);
    o.c_min = r.get("c_min", o.c_min);
    o.shell_q_factor = r.get("shell_q_factor", o.shell_q_factor);
    o.shell_s_factor = r.get("shell_s_factor", o.shell_s_factor);
    o.cap_ratio_max = r.get("cap_ratio_max", o.cap_ratio_max);
    r.finish();
    return o;
}

struct SpectralOptions {
    std::vector<double> h{0.2, 0.1, 0.05};
    GridOptions grid;
    EigenOptions eigen;
    int radial_cells = 2000;
    std::string dump;
};

SpectralOptions read_spectral_options(Reader r) {
    SpectralOptions o;
    o.h = r.get("h", o.h);
    o.grid.box_factor = r.get("box_factor", o.grid.box_factor);
    o.grid.max_cells = r.get<std::size_t>("max_cells", o.grid.max_cells);
    o.eigen.tol = r.get("tol", o.eigen.tol);
    o.eigen.max_iterations = r.get("max_iterations", o.eigen.max_iterations);
    o.radial_cells = r.get("radial_cells", o.radial_cells);
    o.dump = r.get<std::string>("dump", "");
    r.finish();
    if (o.h.size() < 2) throw InputError("spectral.h needs at least two grid steps");
    return o;
}

bool centered_ball(const DomainSpec& s) {
    if (std::holds_alternative<NoObstacle>(s.obstacle)) return true;
    const auto* b = std::get_if<BallObstacle>(&s.obstacle);
    return b && center_norm(s.obstacle) == 0.0;
}

double ball_radius(const DomainSpec& s) {
    const auto* b = std::get_if<BallObstacle>(&s.obstacle);
    return b ? b->r : 0.0;
}

struct SpectralOutcome {
    bool grid = false;
    PoincareEstimate estimate;
    bool radial = false;
    RadialOracle oracle;

    double value() const { return grid ? estimate.value : oracle.value; }
    double error() const { return grid ? estimate.error_bar : oracle.error; }
};

SpectralOutcome run_spectral(const DomainSpec& spec, const SpectralOptions& o) {
    SpectralOutcome out;
    if (spec.dim == 2 || spec.dim == 3) {
        out.grid = true;
        out.estimate = poincare_estimate(spec, o.h, o.grid, o.eigen);
    }
    if (centered_ball(spec) && spec.dim >= 2) {
        out.radial = true;
        out.oracle = radial_gap_oracle(spec.dim, spec.lambda, ball_radius(spec), o.radial_cells);
    }
    if (!out.grid && !out.radial) throw InputError("spectral estimates need d in {2, 3} or a centered ball");
    return out;
}

json spectral_json(const SpectralOutcome& s) {
    json j;
    j["value"] = num(s.value());
    j["error_bar"] = num(s.error());
    j["method"] = s.grid ? "grid" : "radial";
    if (s.grid) {
        j["warning"] = s.estimate.warning;
        j["message"] = s.estimate.message;
        j["h"] = s.estimate.h;
        j["raw"] = s.estimate.raw;
        j["cells"] = s.estimate.cells;
    }
    if (s.radial)
        j["radial_oracle"] = json{{"value", num(s.oracle.value)},
                                  {"error", num(s.oracle.error)},
                                  {"gap0", num(s.oracle.gap0)},
                                  {"gap1", num(s.oracle.gap1)}};
    return j;
}

// ---------------------------------------------------------------- cross-check verdicts

json verdict(const std::string& check, const std::string& status, json refs, const std::string& detail) {
    return json{{"check", check}, {"verdict", status}, {"references", std::move(refs)}, {"detail", detail}};
}

json cross_check(const DomainSpec& spec, const BoundCatalogue& cat, const SpectralOutcome* est,
                 const AggregateOptions& bo) {
    json verdicts = json::array();
    // homogeneity of the explicit envelope
    {
        const auto unit = aggregate(rescale_to_unit_lambda(spec), bo);
        const double lam = spec.lambda;
        auto close = [](double a, double b) {
            if (std::isinf(a) || std::isinf(b)) return a == b;
            return std::abs(a - b) <= 1e-12 * std::max({std::abs(a), std::abs(b), 1e-300});
        };
        const bool okk = close(cat.best_explicit_upper, unit.best_explicit_upper / lam) &&
                         close(cat.best_explicit_lower, unit.best_explicit_lower / lam);
        verdicts.push_back(verdict("homogeneity", okk ? "PASS" : "FAIL",
                                   json{cat.best_lower_anchor, cat.best_upper_anchor},
                                   "envelope at lambda vs (1/lambda) x envelope at lambda = 1"));
    }
    if (!est) return verdicts;
    const double v = est->value(), e = est->error();
    const json est_ref = json{{"estimate", num(v)}, {"error_bar", num(e)}};
    {
        const bool in = v + e >= cat.best_explicit_lower * (1 - 1e-12) && v - e <= cat.best_explicit_upper * (1 + 1e-12);
        verdicts.push_back(verdict("inside-envelope", in ? "PASS" : "FAIL",
                                   json{cat.best_lower_anchor, cat.best_upper_anchor, est_ref},
                                   "[" + fmt(cat.best_explicit_lower) + ", " + fmt(cat.best_explicit_upper) + "]"));
    }
    if (centered_ball(spec)) {
        const auto cb = centered_bounds(spec.lambda, spec.dim, ball_radius(spec));
        const bool in = v >= cb.lower.value - e && v <= cb.upper_safe.value * (1 + e);
        verdicts.push_back(verdict("sandwich", in ? "PASS" : "FAIL",
                                   json{cb.lower.anchor, cb.upper_safe.anchor, est_ref},
                                   "[" + fmt(cb.lower.value) + ", " + fmt(cb.upper_safe.value) + "]"));
        if (v - e > cb.upper.value)
            verdicts.push_back(verdict("sandwich-strict", "FINDING", json{cb.upper.anchor, est_ref},
                                       "estimate exceeds 1/lambda + r^2/d = " + fmt(cb.upper.value)));
        else
            verdicts.push_back(verdict("sandwich-strict", "PASS", json{cb.upper.anchor, est_ref},
                                       "estimate within 1/lambda + r^2/d = " + fmt(cb.upper.value)));
    }
    if (std::holds_alternative<CubeObstacle>(spec.obstacle)) {
        for (const auto& b : cat.reports) {
            if (b.side != Side::lower || !b.applicable || !b.is_explicit) continue;
            if (b.anchor.rfind("square", 0) != 0 && b.anchor.rfind("cube", 0) != 0) continue;
            const bool above = v + e >= b.value;
            const std::string status = above ? "PASS" : (b.disputed ? "FINDING" : "FAIL");
            verdicts.push_back(verdict("phase-transition", status, json{b.anchor, est_ref},
                                       "floor " + fmt(b.value) + (b.disputed ? " (disputed)" : "")));
        }
    }
    return verdicts;
}

// ---------------------------------------------------------------- commands

struct Context {
    json config;
    std::optional<std::uint64_t> seed;
    unsigned threads = 1;
    Output out;
};

std::uint64_t need_seed(const Context& c) {
    if (!c.seed) throw InputError("a seed is required for Monte Carlo commands (config 'seed' or --seed)");
    return *c.seed;
}

json cmd_bounds(Context& c, Reader& r) {
    const DomainSpec spec = read_spec(r.child("spec"));
    const auto opt = read_bound_options(r.child("bounds"));
    r.finish();
    const auto cat = aggregate(spec, opt);
    c.out.put("bounds.csv", catalogue_csv(cat));
    c.out.put_json("bounds.json", catalogue_json(cat));
    return json{{"best_explicit_lower", num(cat.best_explicit_lower)},
                {"best_explicit_upper", num(cat.best_explicit_upper)},
                {"ordered", cat.ordered},
                {"reports", cat.reports.size()}};
}

json cmd_spectral(Context& c, Reader& r) {
    const DomainSpec spec = read_spec(r.child("spec"));
    const auto so = read_spectral_options(r.child("spectral"));
    const auto bo = read_bound_options(r.child("bounds"));
    r.finish();
    const auto s = run_spectral(spec, so);
    const auto cat = aggregate(spec, bo);
    json j = spectral_json(s);
    j["spec"] = spec_json(spec);
    j["verdicts"] = cross_check(spec, cat, &s, bo);
    c.out.put_json("spectral.json", j);
    if (s.grid) {
        Csv csv({"h", "cells", "inverse_lambda1"});
        for (std::size_t i = 0; i < s.estimate.h.size(); ++i)
            csv.row({fmt(s.estimate.h[i]), std::to_string(s.estimate.cells[i]), fmt(s.estimate.raw[i])});
        c.out.put("spectral_refinement.csv", csv.text());
        if (!so.dump.empty()) {
            const double hmin = *std::min_element(so.h.begin(), so.h.end());
            write_dump(assemble(build_grid(spec, hmin, so.grid)), (c.out.dir / so.dump).string());
            c.out.written.push_back((c.out.dir / so.dump).string());
        }
    }
    return json{{"value", num(s.value())}, {"error_bar", num(s.error())}};
}

Target read_target(Reader t, int dim) {
    const std::string kind = t.get<std::string>("kind", "none");
    Target out;
    if (kind == "none") {
        out = no_target();
    } else if (kind == "halfspace") {
        const int axis = t.get("axis", 0);
        if (axis < 0 || axis >= dim) throw InputError("simulate.target.axis out of range");
        out = halfspace_target(axis, t.need<double>("level"));
    } else if (kind == "ball") {
        const Point ctr = t.need<std::vector<double>>("center");
        const double rad = t.need<double>("radius");
        if (int(ctr.size()) != dim || !(rad > 0)) throw InputError("simulate.target: bad ball");
        out = predicate_target([ctr, rad](std::span<const double> x) {
            double s = 0;
            for (std::size_t k = 0; k < x.size(); ++k) s += (x[k] - ctr[k]) * (x[k] - ctr[k]);
            return s <= rad * rad;
        });
    } else if (kind == "shadow_exit") {
        // leave the strip behind a cube: max_{i >= 2} |x_i| >= r
        const double rr = t.need<double>("r");
        out = predicate_target([rr](std::span<const double> x) {
            for (std::size_t k = 1; k < x.size(); ++k)
                if (std::abs(x[k]) >= rr) return true;
            return false;
        });
    } else {
        throw InputError("simulate.target.kind: unknown target '" + kind + "'");
    }
    t.finish();
    return out;
}

json moments_json(const std::vector<double>& times, const std::vector<bool>& cens, const std::vector<double>& thetas) {
    json arr = json::array();
    for (double th : thetas) {
        const auto m = empirical_exp_moment(times, cens, th);
        arr.push_back(json{{"theta", th},
                           {"estimate", num(m.estimate)},
                           {"log_estimate", num(m.log_estimate)},
                           {"stderr", num(m.stderr_)},
                           {"divergence", m.divergence},
                           {"censored", m.censored}});
    }
    return arr;
}

json cmd_simulate(Context& c, Reader& r) {
    SimConfig sc;
    sc.spec = read_spec(r.child("spec"));
    sc.seed = need_seed(c);
    sc.threads = c.threads;
    Reader s = r.child("simulate");
    sc.dt = s.get("dt", sc.dt);
    sc.horizon = s.get("horizon", sc.horizon);
    sc.n_paths = s.get<std::size_t>("n_paths", sc.n_paths);
    sc.tolerance = s.get("tolerance", sc.tolerance);
    const Point start = s.get<std::vector<double>>("start", Point(sc.spec.dim, 0.0));
    const Target target = read_target(s.child("target"), sc.spec.dim);
    const auto thetas = s.get<std::vector<double>>("theta", {});
    const bool occ = s.has("occupation");
    Reader o = s.child("occupation");
    const int bins = o.get("radial_bins", 10), sectors = o.get("sectors", 1);
    o.finish();
    s.finish();
    r.finish();
    sc.validate();

    const auto h = hit_time(sc, start, target);
    Csv csv({"path", "hit_time", "censored", "contacts", "displacement_sum"});
    std::uint64_t contacts = 0;
    for (std::size_t i = 0; i < h.paths.size(); ++i) {
        const auto& p = h.paths[i];
        contacts += p.contacts;
        csv.row({std::to_string(i), fmt(p.hit_time), b01(p.censored), std::to_string(p.contacts), fmt(p.displacement)});
    }
    c.out.put("simulate_paths.csv", csv.text());
    const auto times = h.times();
    double mean = 0;
    for (double t : times) mean += t;
    json j{{"spec", spec_json(sc.spec)},
           {"seed", sc.seed},
           {"n_paths", sc.n_paths},
           {"censored", h.censored},
           {"all_censored", h.all_censored},
           {"mean_hit_time_uncensored", times.empty() ? json(nullptr) : num(mean / times.size())},
           {"total_steps", h.total_steps},
           {"domain_violations", h.total_violations},
           {"contacts", contacts}};
    if (!thetas.empty()) {
        std::vector<double> all;
        for (const auto& p : h.paths) all.push_back(p.hit_time);
        j["exp_moments"] = moments_json(all, h.censor_flags(), thetas);
    }
    if (occ) {
        SimConfig oc = sc;
        const auto res = occupation_test(oc, start, bins, sectors);
        j["occupation"] = json{{"edges", res.edges},     {"counts", res.counts},   {"expected", res.expected},
                               {"sectors", res.sectors}, {"chi2", num(res.chi2)},  {"chi2_adjusted", num(res.chi2_adjusted)},
                               {"autocorrelation", num(res.autocorrelation)},      {"dof", res.dof},
                               {"p_value", num(res.p_value)},                      {"pass", res.pass},
                               {"samples", res.samples},                           {"inside_obstacle", res.inside_obstacle}};
    }
    if (h.all_censored) j["warning"] = "all paths censored at the horizon";
    c.out.put_json("simulate.json", j);
    return json{{"censored", h.censored}, {"domain_violations", h.total_violations}};
}

json cmd_exit_time(Context& c, Reader& r) {
    Reader e = r.child("exit_time");
    const double lam = e.get("lambda", 1.0), rad = e.get("r", 1.0);
    const double dt = e.get("dt", 1e-3), horizon = e.get("horizon", 100.0);
    const auto n = e.get<std::size_t>("n_paths", 10000);
    const auto thetas = e.get<std::vector<double>>("theta", {0.5, 1.0, 2.0});
    e.finish();
    r.finish();
    const auto seed = need_seed(c);
    const auto s = exit_interval_ou_1d(lam, rad, dt, n, seed, horizon, c.threads);
    Csv csv({"theta", "mc_laplace", "stderr", "exact_laplace", "z_score", "within_3se"});
    json rows = json::array();
    for (double th : thetas) {
        if (!(th >= 0)) throw InputError("exit_time.theta must be nonnegative");
        const auto m = empirical_exp_moment(s.times, s.censored, -th);
        const double exact = exit_time_laplace(th, lam, rad);
        const double z = m.stderr_ > 0 ? (m.estimate - exact) / m.stderr_ : (m.estimate == exact ? 0.0 : INFINITY);
        const bool within = std::abs(z) <= 3.0;
        csv.row({fmt(th), fmt(m.estimate), fmt(m.stderr_), fmt(exact), fmt(z), b01(within)});
        rows.push_back(json{{"theta", th}, {"mc", num(m.estimate)}, {"stderr", num(m.stderr_)},
                            {"exact", num(exact)}, {"z", num(z)}, {"within_3se", within}});
    }
    c.out.put("exit_time.csv", csv.text());
    const auto thr = exit_moment_threshold(lam, rad);
    std::size_t cens = 0;
    for (bool b : s.censored) cens += b;
    json j{{"lambda", lam}, {"r", rad},         {"dt", dt},   {"n_paths", n},
           {"seed", seed},  {"censored", cens}, {"rows", rows},
           {"beta_star", num(thr.beta)},        {"brownian_cap", num(std::numbers::pi * std::numbers::pi / (8 * rad * rad))}};
    c.out.put_json("exit_time.json", j);
    return json{{"rows", rows.size()}, {"beta_star", num(thr.beta)}};
}

CandidateSet read_set(Reader s) {
    const std::string kind = s.need<std::string>("kind");
    CandidateSet out;
    if (kind == "square_shadow") {
        const double a = s.need<double>("a"), r = s.need<double>("r");
        out = ShadowSet{a, r, s.get("u", r)};
    } else if (kind == "cap") {
        const double a = s.need<double>("a"), r = s.need<double>("r");
        out = CapSet{a, r, s.get("u", r)};
    } else if (kind == "trap_inner" || kind == "trap_notch") {
        const double y = s.need<double>("y"), al = s.need<double>("alpha");
        if (kind == "trap_inner") out = TrapInnerSet{y, al};
        else out = TrapNotchSet{y, al};
    } else if (kind == "halfspace") {
        out = HalfSpaceSet{s.need<double>("t")};
    } else {
        throw InputError(s.path() + ".kind: unknown set '" + kind + "'");
    }
    s.finish();
    return out;
}

json cmd_cheeger(Context& c, Reader& r) {
    const DomainSpec spec = read_spec(r.child("spec"));
    Reader ch = r.child("cheeger");
    std::vector<CandidateSet> sets;
    if (ch.has("sets")) {
        const json& arr = ch.raw("sets");
        if (!arr.is_array()) throw InputError("cheeger.sets must be an array");
        for (std::size_t i = 0; i < arr.size(); ++i) sets.push_back(read_set(Reader(arr[i], "cheeger.sets[" + std::to_string(i) + "]")));
    }
    std::vector<double> ys;
    double alpha = 1.0;
    const bool sweep = ch.has("trap_sweep");
    {
        Reader t = ch.child("trap_sweep");
        ys = t.get<std::vector<double>>("y", {3, 4, 5, 6, 7, 8, 9, 10});
        alpha = t.get("alpha", 1.0);
        t.finish();
    }
    ch.finish();
    r.finish();
    Csv csv({"set", "mass", "surface", "ratio", "complement_used", "poincare_4c2", "closed_form_lower"});
    json rows = json::array();
    for (const auto& s : sets) {
        validate_set(spec, s);
        const auto cr = cheeger_ratio(spec, s);
        const auto cp = cheeger_to_poincare(cr.ratio, true);
        double closed = NAN;
        if (const auto* sh = std::get_if<ShadowSet>(&s)) closed = shadow_ratio_lower(spec.lambda, spec.dim, sh->r);
        csv.row({set_kind(s), fmt(cr.mass), fmt(cr.surface), fmt(cr.ratio), b01(cr.complement_used), fmt(cp.value),
                 fmt(closed)});
        rows.push_back(json{{"set", set_kind(s)}, {"mass", num(cr.mass)}, {"surface", num(cr.surface)},
                            {"ratio", num(cr.ratio)}, {"complement_used", cr.complement_used},
                            {"poincare_4c2", num(cp.value)}, {"warning", cp.message}, {"closed_form_lower", num(closed)}});
    }
    c.out.put("cheeger.csv", csv.text());
    json j{{"spec", spec_json(spec)}, {"sets", rows}};
    if (sweep) {
        Csv t({"y", "alpha", "value", "log_value", "ratio", "applicable"});
        json trows = json::array();
        for (double y : ys) {
            const auto tb = trap_lower_bound(y, alpha);
            t.row({fmt(y), fmt(alpha), fmt(tb.report.value), fmt(std::log(tb.report.value)), fmt(tb.ratio),
                   b01(tb.report.applicable)});
            trows.push_back(json{{"y", y}, {"value", num(tb.report.value)}, {"applicable", tb.report.applicable}});
        }
        c.out.put("trap_sweep.csv", t.text());
        j["trap_sweep"] = trows;
    }
    c.out.put_json("cheeger.json", j);
    return json{{"sets", rows.size()}};
}

DomainSpec with_parameter(DomainSpec s, const std::string& p, double v) {
    if (p == "lambda") {
        s.lambda = v;
    } else if (p == "r" || p == "y" || p == "a" || p == "alpha" || p == "R") {
        std::visit(
            [&](auto& o) {
                using T = std::decay_t<decltype(o)>;
                if constexpr (std::is_same_v<T, NoObstacle>) {
                    throw InputError("sweep parameter '" + p + "' needs an obstacle");
                } else if constexpr (std::is_same_v<T, TrapObstacle>) {
                    if (p == "y" || p == "a") o.y = v;
                    else if (p == "alpha") o.alpha = v;
                    else throw InputError("trap has no parameter '" + p + "'");
                } else {
                    if (p == "r") o.r = v;
                    else if (p == "y" || p == "a") o.center.at(0) = v;
                    else if constexpr (std::is_same_v<T, ShellDomain>) {
                        if (p == "R") o.R = v;
                        else throw InputError("shell has no parameter '" + p + "'");
                    } else {
                        throw InputError("obstacle has no parameter '" + p + "'");
                    }
                }
            },
            s.obstacle);
    } else {
        throw InputError("unknown sweep parameter '" + p + "'");
    }
    s.validate();
    return s;
}

json cmd_sweep(Context& c, Reader& r) {
    const DomainSpec base = read_spec(r.child("spec"));
    const auto bo = read_bound_options(r.child("bounds"));
    const auto so = read_spectral_options(r.child("spectral"));
    Reader sw = r.child("sweep");
    const std::string param = sw.need<std::string>("parameter");
    const auto values = sw.need<std::vector<double>>("values");
    const bool spectral = sw.get("spectral", base.dim == 2 || base.dim == 3 || centered_ball(base));
    sw.finish();
    r.finish();
    std::vector<DomainSpec> specs;
    for (double v : values) specs.push_back(with_parameter(base, param, v));
    std::vector<json> reports(specs.size());
    std::vector<std::string> rows(specs.size());
    std::vector<std::exception_ptr> errors(specs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < specs.size();) {
            try {
                const auto cat = aggregate(specs[i], bo);
                std::optional<SpectralOutcome> est;
                if (spectral) est = run_spectral(specs[i], so);
                json rep{{"index", i},
                         {"parameter", param},
                         {"value", values[i]},
                         {"spec", spec_json(specs[i])},
                         {"catalogue", catalogue_json(cat)},
                         {"verdicts", cross_check(specs[i], cat, est ? &*est : nullptr, bo)}};
                if (est) rep["spectral"] = spectral_json(*est);
                reports[i] = std::move(rep);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    const unsigned nt = std::max(1u, std::min<unsigned>(c.threads, unsigned(specs.size())));
    for (unsigned t = 0; t < nt; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    Csv csv({"index", "parameter", "value", "estimate", "error_bar", "best_lower", "best_upper", "verdicts"});
    json all = json::array();
    std::size_t fails = 0, findings = 0;
    for (std::size_t i = 0; i < reports.size(); ++i) {
        const json& rep = reports[i];
        std::string vs;
        for (const auto& v : rep["verdicts"]) {
            vs += (vs.empty() ? "" : ";") + v["check"].get<std::string>() + "=" + v["verdict"].get<std::string>();
            fails += v["verdict"] == "FAIL";
            findings += v["verdict"] == "FINDING";
        }
        const auto& cat = rep["catalogue"];
        auto txt = [](const json& x) { return x.is_number() ? fmt(x.get<double>()) : x.get<std::string>(); };
        csv.row({std::to_string(i), param, fmt(values[i]),
                 rep.contains("spectral") ? txt(rep["spectral"]["value"]) : "",
                 rep.contains("spectral") ? txt(rep["spectral"]["error_bar"]) : "", txt(cat["best_explicit_lower"]),
                 txt(cat["best_explicit_upper"]), vs});
        all.push_back(rep);
    }
    c.out.put("sweep.csv", csv.text());
    c.out.put_json("sweep_reports.json", all);
    return json{{"points", reports.size()}, {"fail", fails}, {"finding", findings}};
}

// ---------------------------------------------------------------- dispatch

int code_for(const std::exception& e) {
    if (dynamic_cast<const DomainDisconnected*>(&e)) return disconnected;
    if (dynamic_cast<const InputError*>(&e) || dynamic_cast<const CapacityError*>(&e)) return input_error;
    if (dynamic_cast<const SimulationError*>(&e)) return mc_failure;
    if (dynamic_cast<const EvaluationError*>(&e) || dynamic_cast<const NotFound*>(&e)) return special_function_failure;
    if (dynamic_cast<const json::exception*>(&e)) return input_error;
    return other_failure;
}

std::string kind_of(const std::exception& e) {
    if (dynamic_cast<const DomainDisconnected*>(&e)) return "domain disconnected";
    if (dynamic_cast<const CapacityError*>(&e)) return "capacity";
    if (dynamic_cast<const InputError*>(&e) || dynamic_cast<const json::exception*>(&e)) return "input";
    if (dynamic_cast<const SimulationError*>(&e)) return "simulation";
    if (dynamic_cast<const EvaluationError*>(&e) || dynamic_cast<const NotFound*>(&e)) return "special function";
    if (dynamic_cast<const IterationLimit*>(&e)) return "iteration limit";
    return "internal";
}

std::string utc_now() {
    const std::time_t t = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

}  // namespace

std::string schema() {
    return R"JSON({
  "$schema": "https://json-schema.org/draft/2020-12/schema",
  "title": "oupinball experiment config",
  "type": "object",
  "additionalProperties": false,
  "properties": {
    "command": {"enum": ["bounds", "spectral", "simulate", "exit-time", "cheeger", "sweep"]},
    "seed": {"type": "integer", "minimum": 0, "description": "required by simulate and exit-time unless --seed is given"},
    "spec": {"$ref": "#/$defs/spec"},
    "bounds": {
      "type": "object", "additionalProperties": false,
      "properties": {
        "universal_constant": {"type": "number", "default": 1},
        "eps": {"type": "number", "default": 1},
        "c_min": {"type": "number", "default": 1},
        "shell_q_factor": {"type": "number", "default": 3},
        "shell_s_factor": {"type": "number", "default": 1},
        "cap_ratio_max": {"type": "number", "default": 4}
      }
    },
    "spectral": {
      "type": "object", "additionalProperties": false,
      "properties": {
        "h": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 2, "default": [0.2, 0.1, 0.05]},
        "box_factor": {"type": "number", "minimum": 4, "default": 6},
        "max_cells": {"type": "integer", "minimum": 1, "default": 2000000},
        "tol": {"type": "number", "default": 1e-8},
        "max_iterations": {"type": "integer", "default": 150},
        "radial_cells": {"type": "integer", "minimum": 50, "default": 2000},
        "dump": {"type": "string", "description": "file name for an OUPB1 dump of the finest operator"}
      }
    },
    "simulate": {
      "type": "object", "additionalProperties": false,
      "properties": {
        "dt": {"type": "number", "default": 0.001, "description": "at most 0.01/lambda"},
        "horizon": {"type": "number", "default": 10},
        "n_paths": {"type": "integer", "minimum": 1, "default": 1000},
        "tolerance": {"type": "number", "default": 1e-9},
        "start": {"type": "array", "items": {"type": "number"}, "description": "default: origin"},
        "theta": {"type": "array", "items": {"type": "number"}, "description": "exponential moments of the hitting time"},
        "target": {
          "type": "object", "additionalProperties": false,
          "properties": {
            "kind": {"enum": ["none", "halfspace", "ball", "shadow_exit"], "default": "none"},
            "axis": {"type": "integer", "default": 0},
            "level": {"type": "number"},
            "center": {"type": "array", "items": {"type": "number"}},
            "radius": {"type": "number"},
            "r": {"type": "number"}
          }
        },
        "occupation": {
          "type": "object", "additionalProperties": false,
          "properties": {
            "radial_bins": {"type": "integer", "minimum": 2, "default": 10},
            "sectors": {"type": "integer", "minimum": 1, "default": 1}
          }
        }
      }
    },
    "exit_time": {
      "type": "object", "additionalProperties": false,
      "properties": {
        "lambda": {"type": "number", "default": 1},
        "r": {"type": "number", "default": 1},
        "dt": {"type": "number", "default": 0.001},
        "horizon": {"type": "number", "default": 100},
        "n_paths": {"type": "integer", "default": 10000},
        "theta": {"type": "array", "items": {"type": "number", "minimum": 0}, "default": [0.5, 1, 2]}
      }
    },
    "cheeger": {
      "type": "object", "additionalProperties": false,
      "properties": {
        "sets": {"type": "array", "items": {"$ref": "#/$defs/set"}},
        "trap_sweep": {
          "type": "object", "additionalProperties": false,
          "properties": {
            "y": {"type": "array", "items": {"type": "number"}, "default": [3, 4, 5, 6, 7, 8, 9, 10]},
            "alpha": {"type": "number", "default": 1}
          }
        }
      }
    },
    "sweep": {
      "type": "object", "additionalProperties": false,
      "required": ["parameter", "values"],
      "properties": {
        "parameter": {"enum": ["lambda", "r", "R", "y", "a", "alpha"]},
        "values": {"type": "array", "items": {"type": "number"}},
        "spectral": {"type": "boolean"}
      }
    }
  },
  "$defs": {
    "spec": {
      "type": "object", "additionalProperties": false, "required": ["dim"],
      "properties": {
        "dim": {"type": "integer", "minimum": 1},
        "lambda": {"type": "number", "exclusiveMinimum": 0, "default": 1},
        "obstacle": {
          "type": "object", "additionalProperties": false,
          "properties": {
            "kind": {"enum": ["none", "ball", "hypercube", "shell", "trap"], "default": "none"},
            "center": {"type": "array", "items": {"type": "number"}, "description": "default: origin"},
            "r": {"type": "number", "exclusiveMinimum": 0},
            "R": {"type": "number", "description": "outer radius of a shell"},
            "y": {"type": "number", "description": "trap position"},
            "alpha": {"type": "number", "description": "trap size"}
          }
        }
      }
    },
    "set": {
      "type": "object", "additionalProperties": false, "required": ["kind"],
      "properties": {
        "kind": {"enum": ["square_shadow", "cap", "trap_inner", "trap_notch", "halfspace"]},
        "a": {"type": "number"}, "r": {"type": "number"}, "u": {"type": "number"},
        "y": {"type": "number"}, "alpha": {"type": "number"}, "t": {"type": "number"}
      }
    }
  }
}
)JSON";
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Poincare constants of the Ornstein-Uhlenbeck pinball", "oupinball"};
    app.set_version_flag("--version", kVersion);
    bool print_schema = false;
    app.add_flag("--print-schema", print_schema, "print the config JSON Schema and exit");
    std::string config_path, out_dir = ".";
    std::optional<std::uint64_t> seed;
    unsigned threads = 1;
    const std::vector<std::string> names{"bounds", "spectral", "simulate", "exit-time", "cheeger", "sweep"};
    for (const auto& n : names) {
        auto* sub = app.add_subcommand(n, "run the " + n + " experiment");
        sub->add_option("--config", config_path, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--seed", seed, "RNG seed (overrides the config)");
        sub->add_option("--threads", threads, "worker threads")->check(CLI::Range(1u, 1024u));
    }
    app.require_subcommand(0, 1);
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        std::ostringstream o, eo;
        const int code = app.exit(e, o, eo);
        out << o.str();
        err << eo.str();
        return code == 0 ? ok : input_error;
    }
    if (print_schema) {
        out << schema();
        return ok;
    }
    if (app.get_subcommands().empty()) {
        err << app.help();
        return input_error;
    }
    const std::string command = app.get_subcommands().front()->get_name();
    const auto t0 = std::chrono::steady_clock::now();
    Context ctx;
    ctx.threads = threads;
    ctx.out.dir = out_dir;
    try {
        std::ifstream f(config_path);
        try {
            ctx.config = json::parse(f);
        } catch (const json::parse_error& e) {
            throw InputError(std::string("config is not valid JSON: ") + e.what());
        }
        Reader r(ctx.config, "config");
        const std::string declared = r.get<std::string>("command", command);
        if (declared != command) throw InputError("config declares command '" + declared + "' but '" + command + "' was run");
        ctx.seed = r.has("seed") ? std::optional<std::uint64_t>(r.get<std::uint64_t>("seed", 0)) : std::nullopt;
        if (seed) ctx.seed = seed;
        json summary;
        if (command == "bounds") summary = cmd_bounds(ctx, r);
        else if (command == "spectral") summary = cmd_spectral(ctx, r);
        else if (command == "simulate") summary = cmd_simulate(ctx, r);
        else if (command == "exit-time") summary = cmd_exit_time(ctx, r);
        else if (command == "cheeger") summary = cmd_cheeger(ctx, r);
        else summary = cmd_sweep(ctx, r);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        ctx.out.put_json("meta.json", json{{"command", command},
                                           {"version", kVersion},
                                           {"config", config_path},
                                           {"seed", ctx.seed ? json(*ctx.seed) : json(nullptr)},
                                           {"threads", threads},
                                           {"started_utc", utc_now()},
                                           {"wall_seconds", secs}});
        summary["command"] = command;
        summary["outputs"] = ctx.out.written;
        out << summary.dump() << "\n";
        return ok;
    } catch (const std::exception& e) {
        const int code = code_for(e);
        json j{{"error", kind_of(e)}, {"message", e.what()}, {"exit_code", code}, {"command", command}};
        if (const auto* ce = dynamic_cast<const CapacityError*>(&e)) j["suggested_h"] = ce->suggested_h();
        out << j.dump() << "\n";
        err << "oupinball " << command << ": " << e.what() << "\n";
        return code;
    }
}

}  // namespace oupinball::cli
