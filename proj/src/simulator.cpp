#include "oupinball/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numbers>
#include <thread>

#include "oupinball/error.hpp"
#include "oupinball/philox.hpp"
#include "oupinball/special_functions.hpp"

namespace oupinball {

namespace {

constexpr std::uint32_t kMaxRetries = 10;

// Runs body(i) for i in [0, n) on up to `threads` workers. Work is keyed by index,
// so results do not depend on scheduling; the lowest-index exception wins.
template <class F>
void parallel_for(std::size_t n, unsigned threads, F&& body) {
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex mu;
    std::size_t failed_at = n;
    std::exception_ptr failure;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                body(i);
            } catch (...) {
                std::lock_guard lock(mu);
                if (i < failed_at) failed_at = i, failure = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

double sq(double x) { return x * x; }

// One path of the reflected scheme. observe(x, step) runs after every accepted step and
// may return false to stop the path early.
template <class Observe>
PathStats run_path(const SimConfig& c, const Point& start, std::uint64_t path, const Target& target,
                   Observe&& observe) {
    const int d = c.spec.dim;
    const std::uint64_t n_steps = c.steps();
    PathStats ps;
    Point x = start, y(d);
    std::vector<double> xi(d + (d & 1));
    double g0 = target.gap ? target.gap(x) : std::numeric_limits<double>::infinity();
    if (g0 <= 0.0) {
        ps.hit_time = 0.0;
        ps.final_state = x;
        return ps;
    }
    ps.censored = true;
    ps.hit_time = c.horizon;
    for (std::uint64_t s = 0; s < n_steps; ++s) {
        const StepStream stream(c.seed, path, s);
        StepOutcome out;
        for (std::uint32_t attempt = 0;; ++attempt) {
            if (attempt > kMaxRetries)
                throw SimulationError("path " + std::to_string(path) + ": projection failed " +
                                      std::to_string(kMaxRetries) + " times at step " + std::to_string(s));
            stream.normals(xi.data(), d, attempt);
            y = x;
            try {
                out = step(y, c.spec.lambda, c.spec.obstacle, c.dt, std::span<const double>(xi.data(), d));
                break;
            } catch (const ProjectionError&) {
                ++ps.retries;
            }
        }
        ++ps.steps;
        if (out.projected) {
            ++ps.contacts;
            ps.displacement += out.displacement;
        }
        if (signed_distance(c.spec.obstacle, y) < -c.tolerance) ++ps.violations;
        bool hit = false;
        if (target.gap) {
            const double g1 = target.gap(y);
            if (g1 <= 0.0) {
                hit = true;
            } else if (target.bridge) {
                const double e = 2.0 * g0 * g1 / c.dt;
                hit = e < 40.0 && stream.aux_uniform() < std::exp(-e);
            }
            if (!hit && target.crossed) hit = target.crossed(x, y);
            g0 = g1;
        }
        std::swap(x, y);
        const bool go_on = observe(std::span<const double>(x), s + 1);
        if (hit) {
            ps.censored = false;
            ps.hit_time = double(s + 1) * c.dt;
            break;
        }
        if (!go_on) break;
    }
    ps.final_state = x;
    return ps;
}

void check_start(const SimConfig& c, const Point& start) {
    c.validate();
    if (int(start.size()) != c.spec.dim) throw InputError("start point has the wrong dimension");
    if (signed_distance(c.spec.obstacle, start) < -c.tolerance) throw InputError("start point lies outside the domain");
}

HitSamples collect(std::vector<PathStats> paths) {
    HitSamples h;
    for (const auto& p : paths) {
        h.censored += p.censored;
        h.total_steps += p.steps;
        h.total_violations += p.violations;
    }
    h.all_censored = !paths.empty() && h.censored == paths.size();
    h.paths = std::move(paths);
    return h;
}

double log_sum_exp(const std::vector<double>& v, std::size_t n) {
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) top = std::max(top, v[i]);
    if (!std::isfinite(top)) return top;
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += std::exp(v[i] - top);
    return top + std::log(s);
}

}  // namespace

void SimConfig::validate() const {
    spec.validate();
    if (!(dt > 0.0) || !std::isfinite(dt)) throw InputError("dt must be positive");
    if (dt > 0.01 / spec.lambda * (1 + 1e-12)) throw InputError("dt exceeds the stability guard 0.01/lambda");
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw InputError("horizon must be positive");
    if (horizon / dt > 1e9) throw InputError("horizon/dt exceeds 1e9 steps per path");
    if (n_paths == 0) throw InputError("n_paths must be positive");
    if (!(tolerance >= 0.0)) throw InputError("tolerance must be nonnegative");
}

std::uint64_t SimConfig::steps() const { return static_cast<std::uint64_t>(std::llround(std::ceil(horizon / dt - 1e-9))); }

StepOutcome step(std::span<double> x, double lambda, const Obstacle& obstacle, double dt,
                 std::span<const double> xi) {
    if (xi.size() < x.size()) throw InputError("increment has the wrong dimension");
    const double sdt = std::sqrt(dt);
    for (std::size_t k = 0; k < x.size(); ++k) x[k] += -lambda * x[k] * dt + sdt * xi[k];
    StepOutcome out;
    if (std::holds_alternative<NoObstacle>(obstacle) || signed_distance(obstacle, x) >= 0.0) return out;
    Point before(x.begin(), x.end());
    project_in_place(obstacle, x);
    double disp = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) disp += sq(x[k] - before[k]);
    out.projected = true;
    out.displacement = std::sqrt(disp);
    return out;
}

Target halfspace_target(int axis, double level) {
    Target t;
    t.gap = [axis, level](std::span<const double> x) { return level - x[axis]; };
    t.bridge = true;
    return t;
}

Target predicate_target(std::function<bool(std::span<const double>)> inside) {
    Target t;
    t.gap = [f = std::move(inside)](std::span<const double> x) { return f(x) ? -1.0 : 1.0; };
    return t;
}

Target no_target() { return Target{}; }

std::vector<double> HitSamples::times() const {
    std::vector<double> t;
    for (const auto& p : paths)
        if (!p.censored) t.push_back(p.hit_time);
    return t;
}

std::vector<bool> HitSamples::censor_flags() const {
    std::vector<bool> f;
    for (const auto& p : paths) f.push_back(p.censored);
    return f;
}

HitSamples hit_time(const SimConfig& c, const Point& start, const Target& target) {
    check_start(c, start);
    std::vector<PathStats> paths(c.n_paths);
    parallel_for(c.n_paths, c.threads, [&](std::size_t i) {
        paths[i] = run_path(c, start, i, target, [](std::span<const double>, std::uint64_t) { return true; });
    });
    return collect(std::move(paths));
}

ExitSamples exit_interval_ou_1d(double lambda, double r, double dt, std::size_t n_paths, std::uint64_t seed,
                                double horizon, unsigned threads) {
    if (!(lambda >= 0.0) || !(r > 0.0) || !(dt > 0.0) || !(horizon > 0.0) || n_paths == 0)
        throw InputError("exit_interval_ou_1d: need lambda >= 0, r > 0, dt > 0, horizon > 0, n_paths >= 1");
    if (lambda > 0.0 && dt > 0.01 / lambda * (1 + 1e-12)) throw InputError("dt exceeds the stability guard 0.01/lambda");
    if (horizon / dt > 1e9) throw InputError("horizon/dt exceeds 1e9 steps per path");
    const auto n_steps = static_cast<std::uint64_t>(std::llround(std::ceil(horizon / dt - 1e-9)));
    const double sdt = std::sqrt(dt), decay = 1.0 - lambda * dt;
    ExitSamples out;
    out.times.assign(n_paths, horizon);
    std::vector<char> cens(n_paths, 1);
    parallel_for(n_paths, threads, [&](std::size_t p) {
        double x = 0.0, xi[2];
        for (std::uint64_t s = 0; s < n_steps; ++s) {
            const StepStream stream(seed, p, s);
            stream.normals(xi, 1, 0);
            const double y = decay * x + sdt * xi[0];
            bool exit = std::abs(y) >= r;
            if (!exit) {
                const double eu = 2.0 * (r - x) * (r - y) / dt, el = 2.0 * (r + x) * (r + y) / dt;
                if (std::min(eu, el) < 40.0) {
                    const double stay = (1.0 - std::exp(-eu)) * (1.0 - std::exp(-el));
                    exit = stream.aux_uniform() < 1.0 - stay;
                }
            }
            if (exit) {
                out.times[p] = double(s + 1) * dt;
                cens[p] = 0;
                return;
            }
            x = y;
        }
    });
    out.censored.assign(cens.begin(), cens.end());
    return out;
}

ExpMoment empirical_exp_moment(const std::vector<double>& times, const std::vector<bool>& censored, double theta,
                               bool censor_aware) {
    if (times.empty()) throw InputError("no samples");
    if (!censored.empty() && censored.size() != times.size()) throw InputError("censor flags do not match samples");
    ExpMoment m;
    std::vector<double> v;
    v.reserve(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) {
        const bool cen = !censored.empty() && censored[i];
        m.censored += cen;
        if (cen && !censor_aware) continue;
        v.push_back(theta * times[i]);
    }
    if (v.empty()) throw InputError("every sample is censored");
    const std::size_t n = v.size();
    m.log_estimate = log_sum_exp(v, n) - std::log(double(n));
    m.estimate = std::exp(m.log_estimate);
    const double top = *std::max_element(v.begin(), v.end());
    double s1 = 0.0, s2 = 0.0;
    for (double t : v) {
        const double e = std::exp(t - top);
        s1 += e, s2 += e * e;
    }
    const double mean = s1 / n;
    const double var = n > 1 ? std::max(0.0, (s2 - n * mean * mean) / (n - 1)) : 0.0;
    m.stderr_ = std::exp(top) * std::sqrt(var / n);
    if (n >= 64) {
        double prev = log_sum_exp(v, n / 8) - std::log(double(n / 8));
        for (std::size_t k : {n / 4, n / 2, n}) {
            const double cur = log_sum_exp(v, k) - std::log(double(k));
            if (std::abs(cur - prev) > std::log(1.5)) m.divergence = true;
            prev = cur;
        }
    }
    return m;
}

namespace {

double ball_radius_if_isotropic(const DomainSpec& spec) {
    if (std::holds_alternative<NoObstacle>(spec.obstacle)) return 0.0;
    if (const auto* b = std::get_if<BallObstacle>(&spec.obstacle)) {
        if (std::all_of(b->center.begin(), b->center.end(), [](double v) { return v == 0.0; })) return b->r;
    }
    throw InputError("occupation_test needs an isotropic domain (no obstacle or a centered ball)");
}

// Radius rho with mass({|x| >= rho}) = frac * mass({|x| >= r0}).
double radial_quantile(int d, double lambda, double r0, double frac) {
    const double target = std::log(frac) + log_radial_gaussian_mass(d, lambda, r0);
    double lo = r0, hi = r0 + 1.0 / std::sqrt(lambda);
    while (log_radial_gaussian_mass(d, lambda, hi) > target) hi = r0 + 2.0 * (hi - r0);
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (log_radial_gaussian_mass(d, lambda, mid) > target) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

OccupationResult occupation_test(const SimConfig& c, const Point& start, int radial_bins, int sectors) {
    check_start(c, start);
    const double r0 = ball_radius_if_isotropic(c.spec);
    if (c.horizon < 50.0 / c.spec.lambda * (1 - 1e-12)) throw InputError("occupation_test needs horizon >= 50/lambda");
    if (radial_bins < 2 || sectors < 1 || (sectors > 1 && c.spec.dim != 2))
        throw InputError("need at least two radial bins; sectors only in d = 2");
    const int d = c.spec.dim;
    const double lam = c.spec.lambda;
    OccupationResult res;
    res.sectors = sectors;
    res.edges.push_back(r0);
    for (int k = 1; k < radial_bins; ++k) res.edges.push_back(radial_quantile(d, lam, r0, 1.0 - double(k) / radial_bins));
    const int cells = radial_bins * sectors;
    res.expected.assign(cells, 1.0 / cells);

    const std::uint64_t n_steps = c.steps();
    const std::uint64_t burn = n_steps / 5;
    const std::uint64_t stride = std::max<std::uint64_t>(1, std::llround(1.0 / (lam * c.dt)));
    struct Acc {
        std::vector<std::uint64_t> counts;
        std::uint64_t inside = 0;
        // lag-1 moments of x1 and |x|^2
        double s[2] = {0, 0}, ss[2] = {0, 0}, lag[2] = {0, 0}, prev[2] = {0, 0};
        std::uint64_t n = 0, pairs = 0;
    };
    std::vector<Acc> acc(c.n_paths);
    parallel_for(c.n_paths, c.threads, [&](std::size_t p) {
        Acc& a = acc[p];
        a.counts.assign(cells, 0);
        run_path(c, start, p, no_target(), [&](std::span<const double> x, std::uint64_t s) {
            if (s <= burn || (s - burn) % stride != 0) return true;
            double r2 = 0.0;
            for (double v : x) r2 += v * v;
            const double rho = std::sqrt(r2);
            if (signed_distance(c.spec.obstacle, x) < -c.tolerance) ++a.inside;
            const int rb = int(std::upper_bound(res.edges.begin(), res.edges.end(), rho) - res.edges.begin()) - 1;
            int sb = 0;
            if (sectors > 1) {
                const double ang = std::atan2(x[1], x[0]) + std::numbers::pi;
                sb = std::min(sectors - 1, int(ang / (2 * std::numbers::pi) * sectors));
            }
            ++a.counts[std::clamp(rb, 0, radial_bins - 1) * sectors + sb];
            const double obs[2] = {x[0], r2};
            for (int k = 0; k < 2; ++k) {
                a.s[k] += obs[k];
                a.ss[k] += obs[k] * obs[k];
                if (a.n > 0) a.lag[k] += obs[k] * a.prev[k];
                a.prev[k] = obs[k];
            }
            if (a.n > 0) ++a.pairs;
            ++a.n;
            return true;
        });
    });
    res.counts.assign(cells, 0);
    double S[2] = {0, 0}, SS[2] = {0, 0}, LAG[2] = {0, 0};
    std::uint64_t pairs = 0;
    for (const Acc& a : acc) {
        for (int k = 0; k < cells; ++k) res.counts[k] += a.counts[k];
        res.inside_obstacle += a.inside;
        res.samples += a.n;
        pairs += a.pairs;
        for (int k = 0; k < 2; ++k) S[k] += a.s[k], SS[k] += a.ss[k], LAG[k] += a.lag[k];
    }
    if (res.samples < 2 * std::uint64_t(cells)) throw InputError("too few occupation samples; raise horizon or n_paths");
    for (int k = 0; k < cells; ++k) {
        const double e = res.expected[k] * double(res.samples);
        res.chi2 += sq(double(res.counts[k]) - e) / e;
    }
    double rho = 0.0;
    for (int k = 0; k < 2; ++k) {
        const double mean = S[k] / res.samples;
        const double var = SS[k] / res.samples - mean * mean;
        if (var > 0.0 && pairs > 0) rho = std::max(rho, (LAG[k] / pairs - mean * mean) / var);
    }
    rho = std::clamp(rho, 0.0, 0.99);
    res.autocorrelation = rho;
    res.chi2_adjusted = res.chi2 * (1.0 - rho) / (1.0 + rho);
    res.dof = cells - 1;
    res.p_value = chi_square_sf(res.chi2_adjusted, res.dof);
    res.pass = res.p_value > 0.001;
    return res;
}

FractionEstimate occupation_fraction(const SimConfig& c, const Point& start,
                                     const std::function<bool(std::span<const double>)>& inside) {
    check_start(c, start);
    const std::uint64_t burn = c.steps() / 5;
    std::vector<double> frac(c.n_paths, 0.0);
    parallel_for(c.n_paths, c.threads, [&](std::size_t p) {
        std::uint64_t hit = 0, n = 0;
        run_path(c, start, p, no_target(), [&](std::span<const double> x, std::uint64_t s) {
            if (s > burn) ++n, hit += inside(x);
            return true;
        });
        frac[p] = n ? double(hit) / double(n) : 0.0;
    });
    FractionEstimate e;
    for (double f : frac) e.value += f;
    e.value /= double(frac.size());
    double v = 0.0;
    for (double f : frac) v += sq(f - e.value);
    if (frac.size() > 1) e.stderr_ = std::sqrt(v / double(frac.size() - 1) / double(frac.size()));
    return e;
}

double rotation_angle(std::span<const double> x, double a) {
    const double u = x[0] - a;
    double rest = 0.0;
    for (std::size_t k = 1; k < x.size(); ++k) rest += x[k] * x[k];
    const double n = std::sqrt(u * u + rest);
    if (n == 0.0) throw InputError("rotation angle undefined at the shell center");
    return std::acos(std::clamp(u / n, -1.0, 1.0));
}

RotationResult rotation_functional(const SimConfig& c, const Point& start, double probe_time, std::size_t stride) {
    const auto* shell = std::get_if<ShellDomain>(&c.spec.obstacle);
    if (!shell || c.spec.dim != 2) throw InputError("rotation_functional needs a planar shell domain");
    if (shell->center[1] != 0.0) throw InputError("rotation_functional needs the shell centered on the first axis");
    if (!(probe_time >= 0.0) || stride == 0) throw InputError("bad probe time or stride");
    check_start(c, start);
    const double a = shell->center[0], r = shell->r, R = shell->R;
    RotationResult res;
    res.band = std::max(2.0 * std::sqrt(c.dt), 1e-4 * r);
    res.probe_time = probe_time;
    res.stride = stride;
    const double band = res.band;
    auto in_m = [=](std::span<const double> x) {
        const double u = x[0] - a;
        return u >= -R && u <= -r && std::abs(x[1]) <= band;
    };
    Target t;
    t.gap = [=](std::span<const double> x) { return in_m(x) ? -1.0 : 1.0; };
    t.crossed = [=](std::span<const double> x0, std::span<const double> x1) {
        return x0[0] < a && x1[0] < a && (x0[1] > 0.0) != (x1[1] > 0.0);
    };
    const auto probe = static_cast<std::uint64_t>(std::llround(probe_time / c.dt));
    res.z_at.assign(c.n_paths, 0.0);
    std::vector<PathStats> paths(c.n_paths);
    parallel_for(c.n_paths, c.threads, [&](std::size_t p) {
        double z_probe = rotation_angle(start, a);
        bool probed = probe == 0;
        std::vector<double> series;
        if (p == 0) series.push_back(z_probe);
        paths[p] = run_path(c, start, p, t, [&](std::span<const double> x, std::uint64_t s) {
            if (!probed) z_probe = rotation_angle(x, a);
            if (s == probe) probed = true;
            if (p == 0 && s % stride == 0) series.push_back(rotation_angle(x, a));
            return true;
        });
        // stopped at T_M before the probe: Z sits at pi
        if (!probed && !paths[p].censored) z_probe = std::numbers::pi;
        res.z_at[p] = z_probe;
        if (p == 0) res.z_series = std::move(series);
    });
    res.hits = collect(std::move(paths));
    return res;
}

KsResult ks_test(std::vector<double> x, const std::function<double(double)>& cdf) {
    if (x.empty()) throw InputError("no samples");
    std::sort(x.begin(), x.end());
    const double n = double(x.size());
    double dmax = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double f = cdf(x[i]);
        dmax = std::max({dmax, (i + 1) / n - f, f - i / n});
    }
    KsResult k;
    k.n = x.size();
    k.statistic = dmax;
    const double sn = std::sqrt(n);
    k.p_value = kolmogorov_sf((sn + 0.12 + 0.11 / sn) * dmax);
    k.critical_1pct = 1.6276 / sn;
    k.pass = dmax < k.critical_1pct;
    return k;
}

KsResult ks_one_sided(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw InputError("no samples");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = double(a.size()), nb = double(b.size());
    double best = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.size() || j < b.size()) {
        const double v = j >= b.size() || (i < a.size() && a[i] <= b[j]) ? a[i] : b[j];
        while (i < a.size() && a[i] <= v) ++i;
        while (j < b.size() && b[j] <= v) ++j;
        best = std::max(best, i / na - j / nb);
    }
    KsResult k;
    k.n = a.size();
    k.statistic = best;
    const double m = na * nb / (na + nb);
    k.p_value = std::exp(-2.0 * m * best * best);
    k.critical_1pct = std::sqrt(std::log(100.0) / (2.0 * m));
    k.pass = best < k.critical_1pct;
    return k;
}

}  // namespace oupinball
