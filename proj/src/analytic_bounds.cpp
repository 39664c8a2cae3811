#include "oupinball/analytic_bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "oupinball/error.hpp"
#include "oupinball/isoperimetry.hpp"
#include "oupinball/special_functions.hpp"

namespace oupinball {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_common(double lambda, int d, double r) {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw InputError("lambda must be positive and finite");
    if (d < 2) throw InputError("dimension must be at least 2");
    if (!(r >= 0.0) || !std::isfinite(r)) throw InputError("radius must be non-negative and finite");
}

BoundReport make(std::string anchor, Side side, double value, bool applicable, std::string condition) {
    BoundReport b;
    b.anchor = std::move(anchor);
    b.side = side;
    b.value = value;
    b.coefficient = value;
    b.applicable = applicable;
    b.condition = std::move(condition);
    return b;
}

BoundReport free_const(BoundReport b, const std::string& name, double constant) {
    b.is_explicit = false;
    b.free_constant = name;
    b.value = b.coefficient * constant;
    return b;
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

}  // namespace

std::string to_string(Side s) { return s == Side::upper ? "upper" : "lower"; }

std::string to_string(Quantity q) {
    switch (q) {
        case Quantity::domain_poincare: return "domain_poincare";
        case Quantity::shell_poincare: return "shell_poincare";
        case Quantity::exit_rate: return "exit_rate";
        default: return "conjecture";
    }
}

double center_norm(const Obstacle& o) {
    return std::visit(
        [](const auto& v) -> double {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, NoObstacle>) {
                return 0.0;
            } else if constexpr (std::is_same_v<T, TrapObstacle>) {
                return std::abs(v.y);
            } else {
                double s = 0.0;
                for (double c : v.center) s += c * c;
                return std::sqrt(s);
            }
        },
        o);
}

CenteredBounds centered_bounds(double lambda, int d, double r) {
    check_common(lambda, d, r);
    CenteredBounds out;
    out.lower = make("centered.lower", Side::lower, std::max(0.5 / lambda, r * r / d), true, "ball centered at 0");
    out.upper = make("centered.upper", Side::upper, 1.0 / lambda + r * r / d, true, "ball centered at 0");
    out.upper.disputed = true;
    out.upper.note = "sphere constant taken as 1/d; the unit sphere S^{d-1} has 1/(d-1)";
    out.upper_safe =
        make("centered.upper_safe", Side::upper, 1.0 / lambda + r * r / (d - 1), true, "ball centered at 0");
    return out;
}

BoundReport perturbation_upper(double lambda, int d, double y_norm, double r) {
    check_common(lambda, d, r);
    const double s = std::sqrt(lambda);
    const double ys = std::abs(y_norm) * s;
    const double expo = 4.0 * ys * (1.0 + std::max(ys + std::sqrt(double(d)), r * s));
    const double v = (2.0 / lambda) * (2.0 + 3.0 * (1.0 + r * r * lambda / d) * std::exp(expo));
    BoundReport b = make("perturbation.upper", Side::upper, std::isfinite(v) ? v : kInf, true, "ball, any position");
    if (!std::isfinite(v)) b.note = "overflow: valid but useless";
    return b;
}

BoundReport small_displacement_upper(double lambda, int d, double y_norm, double r) {
    check_common(lambda, d, r);
    const double lhs = 4.0 * lambda * y_norm * y_norm * (1.0 + r * r * lambda / d);
    const bool ok = lhs <= 1.0;
    return make("small_displacement.upper", Side::upper, ok ? 4.0 * (1.0 / lambda + r * r / d) : 0.0, ok,
                "4 lambda |y|^2 (1 + r^2 lambda / d) = " + fmt(lhs) + " <= 1");
}

BoundReport decomposition_upper(double lambda, int d, double y_norm, double r, double c) {
    check_common(lambda, d, r);
    BoundReport b = make("decomposition.upper", Side::upper, 0.0, false, "d >= 3");
    b.is_explicit = false;
    b.free_constant = "c";
    if (d < 3) return b;
    const double s = std::sqrt(lambda);
    const double R = r * s, Y = std::abs(y_norm) * s;
    const double dd = d;

    // C1: explicit cases first, then the cheapest non-explicit one
    double c1 = kInf;
    std::string c1_case;
    if (R <= std::sqrt((dd - 2) / 2)) c1 = 0.5 + R * R, c1_case = "small obstacle";
    if (Y == 0.0 && 1.0 + R * R / dd < c1) c1 = 1.0 + R * R / dd, c1_case = "centered obstacle";
    if (!std::isfinite(c1)) {
        if (Y > R + std::sqrt(2.0)) {
            c1 = c, c1_case = "far obstacle";
        } else {
            c1 = c * std::exp(R * R) / std::pow(R, dd - 3), c1_case = "general";
        }
    }

    double c2;
    std::string c2_case;
    if (R <= std::sqrt((dd - 1) / 2) || Y > 2 * R) {
        c2 = c * R * R, c2_case = "1";
    } else if (d > 3 || (R >= 1 && Y > 2 * R)) {
        c2 = c * R * R * (1 + R * R / (dd - 1)), c2_case = "2";
    } else {
        c2 = c * R * R * std::max(R * R, std::exp(Y * (2 * R - Y))), c2_case = "3";
    }

    b.applicable = true;
    b.value = ((1.0 + R * R / (dd - 1)) + c1 * std::max(2.0, c2)) / lambda;
    b.coefficient = b.value / c;
    b.note = "C1 case: " + c1_case + ", C2 regime " + c2_case;
    return b;
}

BoundReport lyapunov_small_radius_upper(double lambda, int d, double r, double b) {
    check_common(lambda, d, r);
    const double p = 2.0 * b * b * b * b;
    const bool ok = p > 1.0 && r * std::sqrt(lambda) <= std::sqrt((d - 1) / 2.0) - 2.0 * b;
    const double v = ok ? b * b * (3 * b * b + 2) / ((p - 1) * lambda) : 0.0;
    return make("lyapunov.small_radius.upper", Side::upper, v, ok,
                "2b^4 > 1 and r sqrt(lambda) <= sqrt((d-1)/2) - 2b, b = " + fmt(b));
}

double lyapunov_best_b(double lambda, int d, double r) {
    return 0.5 * (std::sqrt((d - 1) / 2.0) - r * std::sqrt(lambda)) * (1.0 - 1e-12);
}

std::vector<BoundReport> far_or_small_upper(double lambda, int d, double y_norm, double r, double b, double c) {
    check_common(lambda, d, r);
    if (!(b > 0.0 && b < 1.0)) throw InputError("far-obstacle bound needs 0 < b < 1");
    const double s = std::sqrt(lambda);
    const double R = r * s, Y = std::abs(y_norm) * s, dm = d - 1.0;
    const double half = std::sqrt(dm / 2);
    const double y_min = std::sqrt(double(d)) + half + 81.0 / (b * b * b * std::sqrt(2.0) * std::pow(dm, 1.5));
    const bool ok = R <= (1 - b) * half && Y > y_min;
    const double K = 3 + b * b * dm / 9 + 27 / (2 * b * b * dm);
    std::vector<BoundReport> out;
    out.push_back(make("far_obstacle.upper", Side::upper, ok ? (1 + 6 * K) / lambda : 0.0, ok,
                       "r sqrt(lambda) <= (1-b) sqrt((d-1)/2) and |y| sqrt(lambda) > " + fmt(y_min) + ", b = " +
                           fmt(b)));
    BoundReport blanket = make("small_radius.blanket.upper", Side::upper, 1.0 / lambda, R <= 0.5 * half,
                               "r sqrt(lambda) <= sqrt((d-1)/2)/2");
    out.push_back(free_const(blanket, "c", c));
    return out;
}

LyapunovCheck verify_local_lyapunov(double lambda, int d, double y_norm, double r, double h, double eps,
                                    double grid_step) {
    check_common(lambda, d, r);
    if (!(h > 0.0) || !(eps >= 0.0) || !(grid_step > 0.0)) throw InputError("need h > 0, eps >= 0, grid step > 0");
    const double big = r + 2 * h + eps;
    const double reach = r + 2 * h;
    auto W = [&](const std::vector<double>& x) {
        double s = 0.0;
        for (int i = 1; i < d; ++i) s += x[i] * x[i];
        return big * big - s;
    };
    LyapunovCheck out;
    out.analytic_margin = (d - 1) - 2 * lambda * big * big;
    out.holds = out.analytic_margin >= 0.0;
    out.worst_margin = kInf;
    out.worst_normal_derivative = -kInf;
    const double scale = std::max(1.0, reach + std::abs(y_norm));
    const double fd = 1e-3 * scale;
    std::vector<double> x(d, 0.0), xp(d), xm(d);

    auto margin_at = [&](const std::vector<double>& p) {
        const double w0 = W(p);
        double lap = 0.0, drift = 0.0;
        for (int i = 0; i < d; ++i) {
            xp = p, xm = p;
            xp[i] += fd, xm[i] -= fd;
            const double wp = W(xp), wm = W(xm);
            lap += (wp - 2 * w0 + wm) / (fd * fd);
            drift += p[i] * (wp - wm) / (2 * fd);
        }
        const double LW = 0.5 * lap - lambda * drift;
        return -(LW + 2 * lambda * w0);
    };

    // interior points parametrized by (x1, |xbar|), embedded as (x1, rho, 0, ...)
    const int n = std::max(2, int(std::ceil(2 * reach / grid_step)));
    for (int i = 0; i <= n; ++i) {
        const double x1 = y_norm - reach + 2 * reach * i / n;
        for (int j = 0; j <= n; ++j) {
            const double rho = reach * j / n;
            const double dist2 = (x1 - y_norm) * (x1 - y_norm) + rho * rho;
            if (dist2 > reach * reach || dist2 < r * r) continue;
            x.assign(d, 0.0);
            x[0] = x1;
            x[1] = rho;
            out.worst_margin = std::min(out.worst_margin, margin_at(x));
            ++out.points;
        }
    }
    // boundary of the ball: outward normal of the obstacle points into D
    const int nb = std::max(8, int(std::ceil(2 * std::numbers::pi * std::max(r, 1e-12) / grid_step)));
    for (int k = 0; k <= nb; ++k) {
        const double phi = std::numbers::pi * k / nb;
        std::vector<double> nrm(d, 0.0);
        nrm[0] = std::cos(phi);
        nrm[1] = std::sin(phi);
        x.assign(d, 0.0);
        x[0] = y_norm + r * nrm[0];
        x[1] = r * nrm[1];
        xp = x, xm = x;
        for (int i = 0; i < d; ++i) xp[i] += fd * nrm[i], xm[i] -= fd * nrm[i];
        const double dn = (W(xp) - W(xm)) / (2 * fd);
        out.worst_normal_derivative = std::max(out.worst_normal_derivative, dn);
        out.worst_margin = std::min(out.worst_margin, margin_at(x));
        ++out.points;
    }
    return out;
}

BoundReport hitting_lower(double mass_U, double beta_star) {
    if (!(mass_U > 0.0 && mass_U <= 1.0)) throw InputError("mass_U must lie in (0, 1]");
    if (!(beta_star > 0.0) || !std::isfinite(beta_star)) throw InputError("beta_star must be positive");
    BoundReport b = make("hitting.lower", Side::lower, mass_U / (32.0 * beta_star), true,
                         "exponential moment of the hitting time finite up to beta_star");
    return b;
}

std::vector<BoundReport> square_obstacle_bounds(double lambda, int d, double r, double c) {
    check_common(lambda, d, r);
    const double R = r * std::sqrt(lambda);
    std::vector<BoundReport> out;
    if (d == 2) {
        out.push_back(free_const(make("square.planar.upper", Side::upper, 1.0 / lambda, R <= 0.125,
                                      "r sqrt(lambda) <= 1/8"),
                                 "c", c));
        const double thr = std::numbers::pi / (2 * std::numbers::sqrt2);
        BoundReport lo = make("square.planar.lower", Side::lower, std::expm1(R * R) / (32 * lambda), R > thr,
                              "r sqrt(lambda) > pi/(2 sqrt 2)");
        lo.disputed = true;
        lo.note = "relies on beta* <= lambda/(e^{lambda r^2}-1), which fails numerically; see square.shadow_hitting.lower";
        out.push_back(lo);
    } else {
        out.push_back(free_const(make("square.upper", Side::upper, 1.0 / lambda, R <= c, "r sqrt(lambda) <= c"),
                                 "C", c));
        out.push_back(free_const(make("square.lower", Side::lower, std::exp(R * R) / (d * lambda), R > c,
                                      "r sqrt(lambda) > c'"),
                                 "C'", c));
    }
    return out;
}

BoundReport cube_shadow_hitting_lower(double lambda, int d, double a, double r) {
    check_common(lambda, d, r);
    BoundReport b = make("square.shadow_hitting.lower", Side::lower, 0.0, false,
                         "start behind the cube, target = complement of the shadow strip");
    if (!(r > 0.0)) return b;
    a = std::abs(a);
    Point c(d, 0.0);
    c[0] = a;
    const DomainSpec spec{d, lambda, CubeObstacle{c, r}};
    const double mass = 1.0 - set_mass(spec, ShadowSet{a, r, r});
    try {
        const ExitThreshold t = exit_moment_threshold(lambda, r);
        // the first of d - 1 independent exits from [-r, r]
        b.value = mass / (32.0 * (d - 1) * t.beta);
        b.applicable = true;
        b.note = "beta* = " + fmt(t.beta) + ", mu(target) = " + fmt(mass);
    } catch (const NotFound&) {
        b.note = "no Kummer zero in the scanned range";
    }
    b.coefficient = b.value;
    return b;
}

std::vector<BoundReport> isoperimetric_lower_reports(double lambda, int d, double y_norm, double r, double eps,
                                                     double c_min, double C_d) {
    check_common(lambda, d, r);
    if (!(eps > 0.0 && eps <= 1.0)) throw InputError("eps must lie in (0, 1]");
    const double s = std::sqrt(lambda);
    const double R = r * s, Y = std::abs(y_norm) * s;
    std::vector<BoundReport> out;
    const bool ok = R > c_min && R > eps;
    double v = 0.0;
    if (ok) {
        const double z = R - eps;
        v = eps * eps * (z / ((d - 1) * lambda)) * std::exp(z * z) / (4 * std::sqrt(std::numbers::pi)) *
            std::pow(1 - std::exp(-z * z) / z, d - 2);
    }
    out.push_back(make("cube.test_function.lower", Side::lower, v, ok,
                       "r sqrt(lambda) > max(c_min, eps), eps = " + fmt(eps)));
    out.push_back(free_const(make("cap.order.lower", Side::lower, (1 + R / std::max(Y, 1.0)) / lambda, true,
                                  "all positions"),
                             "C_d", C_d));
    return out;
}

double shell_poincare_upper_value(double r, double q, double s) {
    const double rq2 = (r + q) * (r + q);
    return 64 * rq2 + (1 + 64 * rq2 / (s * s)) * (2.5 + 1 / (s * s));
}

std::vector<BoundReport> shell_and_2d_reports(double r, double q, double s, double y_norm, double c, double C) {
    if (!(r > 0.0) || !(q > 0.0) || !(s > 0.0)) throw InputError("shell reports need r, q, s > 0");
    const double Y = std::abs(y_norm);
    const bool geom = (r + s) * (r + s) + s * s < (r + q) * (r + q);
    std::vector<BoundReport> out;
    BoundReport sh = make("shell.upper", Side::upper, geom ? shell_poincare_upper_value(r, q, s) : 0.0,
                          geom && Y > 1 + r + s, "(r+s)^2 + s^2 < (r+q)^2 and |y| > 1 + r + s");
    sh.quantity = Quantity::shell_poincare;
    out.push_back(sh);
    BoundReport ex = make("shell.exit_rate", Side::upper, 1.0 / (32 * (r + q) * (r + q)), geom,
                          "theta < 1/(32 (r+q)^2)");
    ex.quantity = Quantity::exit_rate;
    out.push_back(ex);
    out.push_back(free_const(make("planar.far.upper", Side::upper, 1 + r * r, Y > 1 + r + c * (1 + std::sqrt(r)),
                                  "|y| > 1 + r + c (1 + sqrt r)"),
                             "C", C));
    return out;
}

BoundReport halfspace_hitting_lower(double lambda) {
    if (!(lambda > 0.0)) throw InputError("lambda must be positive");
    return make("halfspace_hitting.lower", Side::lower, std::erf(1.0) / (64 * lambda), true,
                "obstacle inside {x . e > 0} for a unit vector e");
}

BoundCatalogue aggregate(const DomainSpec& spec, const AggregateOptions& opt) {
    spec.validate();
    const double lam = spec.lambda;
    const int d = spec.dim;
    const double uc = opt.universal_constant;
    BoundCatalogue cat;
    cat.spec = spec;
    auto& reps = cat.reports;
    auto add = [&](const BoundReport& b) { reps.push_back(b); };
    auto add_all = [&](const std::vector<BoundReport>& v) { reps.insert(reps.end(), v.begin(), v.end()); };
    const double yn = center_norm(spec.obstacle);
    const double r = obstacle_scale(spec.obstacle);

    std::visit(
        [&](const auto& o) {
            using T = std::decay_t<decltype(o)>;
            if constexpr (std::is_same_v<T, NoObstacle>) {
                add(make("gaussian.exact", Side::lower, 0.5 / lam, true, "no obstacle"));
                add(make("gaussian.exact", Side::upper, 0.5 / lam, true, "no obstacle"));
            } else if constexpr (std::is_same_v<T, BallObstacle>) {
                if (yn == 0.0) {
                    const CenteredBounds cb = centered_bounds(lam, d, o.r);
                    add(cb.lower), add(cb.upper), add(cb.upper_safe);
                }
                add(perturbation_upper(lam, d, yn, o.r));
                add(small_displacement_upper(lam, d, yn, o.r));
                if (d >= 3) add(decomposition_upper(lam, d, yn, o.r, uc));
                const double b = lyapunov_best_b(lam, d, o.r);
                if (b > 0.0) add(lyapunov_small_radius_upper(lam, d, o.r, b));
                BoundReport best_far;
                bool have_far = false;
                for (int k = 1; k < 100; ++k) {
                    auto v = far_or_small_upper(lam, d, yn, o.r, k / 100.0, uc);
                    if (k == 1) add(v[1]);
                    if (v[0].applicable && (!have_far || v[0].value < best_far.value)) best_far = v[0], have_far = true;
                    if (!have_far && k == 99) best_far = v[0];
                }
                add(best_far);
                if (yn <= opt.cap_ratio_max * o.r) {
                    CapScanOptions co;
                    co.ratio_max = opt.cap_ratio_max;
                    co.C_d = uc;
                    const CapScan cs = cap_lower_scan(lam, d, yn, o.r, co);
                    add(cs.best);
                    add(cs.envelope);
                } else {
                    add(free_const(make("cap.order.lower", Side::lower,
                                        (1 + o.r * std::sqrt(lam) / std::max(yn * std::sqrt(lam), 1.0)) / lam, true,
                                        "all positions"),
                                   "C_d", uc));
                }
                if (d == 2) {
                    const double s1 = std::sqrt(lam);
                    auto v = shell_and_2d_reports(o.r * s1, opt.shell_q_factor * o.r * s1,
                                                  opt.shell_s_factor * o.r * s1, yn * s1, uc, uc);
                    for (auto& b2 : v) {
                        if (b2.quantity == Quantity::exit_rate) b2.value *= lam;
                        else b2.value /= lam;
                        b2.coefficient = b2.is_explicit ? b2.value : b2.value / uc;
                    }
                    add_all(v);
                }
                if (yn > o.r) add(halfspace_hitting_lower(lam));
            } else if constexpr (std::is_same_v<T, CubeObstacle>) {
                add_all(square_obstacle_bounds(lam, d, o.r, uc));
                bool on_axis = true;
                for (int i = 1; i < d; ++i) on_axis = on_axis && o.center[i] == 0.0;
                if (on_axis) add(cube_shadow_hitting_lower(lam, d, o.center[0], o.r));
                add_all(isoperimetric_lower_reports(lam, d, yn, o.r, opt.eps, opt.c_min, uc));
                if (yn > 0.0) {
                    double dot = 0.0, l1 = 0.0;
                    for (double c : o.center) dot += c * c / yn, l1 += std::abs(c) / yn;
                    if (dot - o.r * l1 > 0.0) add(halfspace_hitting_lower(lam));
                }
            } else if constexpr (std::is_same_v<T, ShellDomain>) {
                if (d == 2) {
                    const double s1 = std::sqrt(lam);
                    const double ri = o.r * s1, q = (o.R - o.r) * s1, Y = yn * s1;
                    BoundReport best = make("shell.domain.upper", Side::upper, 0.0, false,
                                            "(r+s)^2 + s^2 < (r+q)^2 and |y| > 1 + r + s for some s");
                    for (int k = 1; k <= 400; ++k) {
                        const double s = q * k / 400.0;
                        auto v = shell_and_2d_reports(ri, q, s, Y, uc, uc);
                        if (v[0].applicable && (!best.applicable || v[0].value / lam < best.value)) {
                            best.applicable = true;
                            best.value = best.coefficient = v[0].value / lam;
                            best.note = "s = " + fmt(s / s1);
                        }
                    }
                    add(best);
                }
            } else {
                const double s1 = std::sqrt(lam);
                TrapBound tb = trap_lower_bound(o.y * s1, o.alpha * s1);
                tb.report.value /= lam;
                tb.report.coefficient = tb.report.value;
                add(tb.report);
                if (o.y > o.alpha) add(halfspace_hitting_lower(lam));
            }
        },
        spec.obstacle);

    BoundReport conj = make("conjecture", Side::upper, (1 + r * r / d) / lam, true, "reference line only");
    conj.quantity = Quantity::conjecture;
    add(free_const(conj, "C_+", uc));

    cat.best_explicit_upper = kInf;
    cat.best_explicit_lower = 0.0;
    for (const auto& b : reps) {
        if (!b.certified()) continue;
        if (b.side == Side::upper && b.value < cat.best_explicit_upper)
            cat.best_explicit_upper = b.value, cat.best_upper_anchor = b.anchor;
        if (b.side == Side::lower && b.value > cat.best_explicit_lower)
            cat.best_explicit_lower = b.value, cat.best_lower_anchor = b.anchor;
    }
    cat.ordered = cat.best_explicit_lower <= cat.best_explicit_upper * (1 + 1e-12);
    if (!cat.ordered)
        cat.findings.push_back("lower " + cat.best_lower_anchor + " = " + fmt(cat.best_explicit_lower) +
                               " exceeds upper " + cat.best_upper_anchor + " = " + fmt(cat.best_explicit_upper));
    for (const auto& b : reps) {
        if (b.anchor == "centered.upper" && b.value < cat.best_explicit_lower)
            cat.findings.push_back("strict centered upper " + fmt(b.value) + " is below the certified lower " +
                                   cat.best_lower_anchor + " = " + fmt(cat.best_explicit_lower));
    }
    return cat;
}

}  // namespace oupinball
