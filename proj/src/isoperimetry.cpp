#include "oupinball/isoperimetry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "oupinball/error.hpp"
#include "oupinball/quadrature.hpp"
#include "oupinball/special_functions.hpp"

namespace oupinball {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log of int_lo^hi exp(-lambda t^2) dt
double log_line(double lambda, double lo, double hi) {
    if (!(hi > lo)) return kNegInf;
    const double s = std::sqrt(lambda);
    const double b = s * lo, c = s * hi;
    double lg;
    if (b >= 0.0) {
        lg = -b * b + std::log(gaussian_tail_scaled(b, c));
    } else if (c <= 0.0) {
        lg = -c * c + std::log(gaussian_tail_scaled(-c, -b));
    } else {
        lg = std::log(gaussian_tail(b, c));
    }
    return lg - std::log(s);
}

double line(double lambda, double lo, double hi) { return std::exp(log_line(lambda, lo, hi)); }

double log_sphere_area(int k) {
    // area of the unit sphere S^{k-1} in R^k
    return std::log(2.0) + 0.5 * k * std::log(std::numbers::pi) - std::lgamma(0.5 * k);
}

double log_total_mass(int d, double lambda) { return 0.5 * d * std::log(std::numbers::pi / lambda); }

double center_norm_of(const Point& c) {
    double s = 0.0;
    for (double v : c) s += v * v;
    return std::sqrt(s);
}

// Mass inside (inside = true) or outside B(c, r), |c| = a, slicing along the center direction.
double ball_mass_impl(int d, double lambda, double a, double r, bool inside) {
    const double slice = 0.5 * (d - 1) * std::log(std::numbers::pi / lambda);
    auto f = [&](double t) {
        const double w = lambda * std::max(0.0, r * r - (t - a) * (t - a));
        const double frac = inside ? gamma_p_half(d - 1, w) : gamma_q_half(d - 1, w);
        return std::exp(-lambda * t * t + slice) * frac;
    };
    const double ref = std::exp(slice - lambda * std::pow(std::max(0.0, std::abs(a) - r), 2.0)) * 2.0 * r;
    double mid = integrate(f, a - r, a + r, 1e-15 * ref, 1e-12, 4000).value;
    if (inside) return mid;
    return mid + std::exp(slice) * (line(lambda, a + r, kInf) + line(lambda, r - a, kInf));
}

struct Pieces {
    double log_mass = kNegInf;
    double log_surface = kNegInf;
};

double cap_log_mass(int d, double lambda, double a, double r, double u) {
    // sigma_{d-2} int_0^u T(a + sqrt(r^2 - s^2)) s^{d-2} e^{-lambda s^2} ds
    const double shift = log_line(lambda, a, kInf);
    auto f = [&](double s) {
        const double z = a + std::sqrt(std::max(0.0, r * r - s * s));
        const double pw = d > 2 ? (d - 2) * std::log(s) : 0.0;
        if (d > 2 && s == 0.0) return 0.0;
        return std::exp(log_line(lambda, z, kInf) - shift + pw - lambda * s * s);
    };
    const double I = integrate(f, 0.0, u, 1e-300, 1e-11, 4000).value;
    return shift + std::log(I) + log_sphere_area(d - 1);
}

Pieces pieces(const DomainSpec& spec, const CandidateSet& set) {
    const int d = spec.dim;
    const double lam = spec.lambda;
    return std::visit(
        [&](const auto& s) -> Pieces {
            using T = std::decay_t<decltype(s)>;
            Pieces p;
            if constexpr (std::is_same_v<T, ShadowSet>) {
                const double lt = log_line(lam, s.a + s.r, kInf);
                const double lw = log_line(lam, -s.u, s.u);
                p.log_mass = lt + (d - 1) * lw;
                p.log_surface = lt + std::log(2.0 * (d - 1)) - lam * s.u * s.u + (d - 2) * lw;
            } else if constexpr (std::is_same_v<T, CapSet>) {
                p.log_mass = cap_log_mass(d, lam, s.a, s.r, s.u);
                const double z = s.a + std::sqrt(std::max(0.0, s.r * s.r - s.u * s.u));
                p.log_surface = log_sphere_area(d - 1) + (d > 2 ? (d - 2) * std::log(s.u) : 0.0) -
                                lam * s.u * s.u + log_line(lam, z, kInf);
            } else if constexpr (std::is_same_v<T, TrapInnerSet> || std::is_same_v<T, TrapNotchSet>) {
                const double depth = std::is_same_v<T, TrapInnerSet> ? 0.5 * s.alpha : s.alpha;
                const double lw = log_line(lam, -0.5 * s.alpha, 0.5 * s.alpha);
                p.log_mass = log_line(lam, s.y, s.y + depth) + lw;
                p.log_surface = -lam * (s.y + depth) * (s.y + depth) + lw;
            } else {
                const double lrest = 0.5 * (d - 1) * std::log(std::numbers::pi / lam);
                p.log_mass = log_line(lam, s.t, kInf) + lrest;
                p.log_surface = -lam * s.t * s.t + lrest;
            }
            return p;
        },
        set);
}

CandidateSet grown(const CandidateSet& set, double h) {
    return std::visit(
        [&](const auto& s) -> CandidateSet {
            using T = std::decay_t<decltype(s)>;
            T g = s;
            if constexpr (std::is_same_v<T, ShadowSet> || std::is_same_v<T, CapSet>) {
                g.u += h;
                return g;
            } else if constexpr (std::is_same_v<T, HalfSpaceSet>) {
                g.t -= h;
                return g;
            } else {
                return s;
            }
        },
        set);
}

double log_domain_mass(const DomainSpec& spec) {
    const int d = spec.dim;
    const double lam = spec.lambda;
    return std::visit(
        [&](const auto& o) -> double {
            using T = std::decay_t<decltype(o)>;
            if constexpr (std::is_same_v<T, NoObstacle>) {
                return log_total_mass(d, lam);
            } else if constexpr (std::is_same_v<T, BallObstacle>) {
                const double a = center_norm_of(o.center);
                if (a == 0.0) return log_radial_gaussian_mass(d, lam, o.r);
                return std::log(ball_mass_impl(d, lam, a, o.r, false));
            } else if constexpr (std::is_same_v<T, CubeObstacle>) {
                double lc = 0.0;
                for (double c : o.center) lc += log_line(lam, c - o.r, c + o.r);
                const double lt = log_total_mass(d, lam);
                return lt + std::log1p(-std::exp(lc - lt));
            } else if constexpr (std::is_same_v<T, ShellDomain>) {
                const double a = center_norm_of(o.center);
                if (a == 0.0) {
                    const double lo = log_radial_gaussian_mass(d, lam, o.r);
                    const double hi = log_radial_gaussian_mass(d, lam, o.R);
                    return lo + std::log1p(-std::exp(hi - lo));
                }
                return std::log(ball_mass_impl(d, lam, a, o.R, true) - ball_mass_impl(d, lam, a, o.r, true));
            } else {
                const double outer = log_line(lam, o.y - o.alpha, o.y + o.alpha) + log_line(lam, -o.alpha, o.alpha);
                const double notch =
                    log_line(lam, o.y, o.y + o.alpha) + log_line(lam, -0.5 * o.alpha, 0.5 * o.alpha);
                const double body = outer + std::log1p(-std::exp(notch - outer));
                const double lt = log_total_mass(d, lam);
                return lt + std::log1p(-std::exp(body - lt));
            }
        },
        spec.obstacle);
}

}  // namespace

std::string set_kind(const CandidateSet& s) {
    switch (s.index()) {
        case 0: return "square_shadow";
        case 1: return "cap";
        case 2: return "trap_inner";
        case 3: return "trap_notch";
        default: return "halfspace";
    }
}

double ball_mass(int d, double lambda, double c_norm, double r) {
    return ball_mass_impl(d, lambda, std::abs(c_norm), r, true);
}

double domain_mass(const DomainSpec& spec) {
    spec.validate();
    return std::exp(log_domain_mass(spec));
}

double obstacle_mass(const DomainSpec& spec) {
    spec.validate();
    if (std::holds_alternative<NoObstacle>(spec.obstacle)) return 0.0;
    return std::exp(log_total_mass(spec.dim, spec.lambda)) - domain_mass(spec);
}

void validate_set(const DomainSpec& spec, const CandidateSet& set) {
    spec.validate();
    const auto on_axis = [&](const Point& c, double a) {
        if (std::abs(c[0] - a) > 1e-12 * std::max(1.0, std::abs(a))) return false;
        for (std::size_t i = 1; i < c.size(); ++i)
            if (c[i] != 0.0) return false;
        return true;
    };
    std::visit(
        [&](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, ShadowSet>) {
                if (!(s.u > 0.0) || !(s.u <= s.r)) throw InputError("shadow set needs 0 < u <= r");
                if (const auto* c = std::get_if<CubeObstacle>(&spec.obstacle)) {
                    if (!on_axis(c->center, s.a) || c->r != s.r)
                        throw InputError("shadow set does not match the cube obstacle");
                } else if (!std::holds_alternative<NoObstacle>(spec.obstacle)) {
                    throw InputError("shadow set requires a cube obstacle or free space");
                }
            } else if constexpr (std::is_same_v<T, CapSet>) {
                if (!(s.u > 0.0) || !(s.u <= s.r)) throw InputError("cap set needs 0 < u <= r");
                const auto* b = std::get_if<BallObstacle>(&spec.obstacle);
                if (!b || !on_axis(b->center, s.a) || b->r != s.r)
                    throw InputError("cap set does not match the ball obstacle");
            } else if constexpr (std::is_same_v<T, TrapInnerSet> || std::is_same_v<T, TrapNotchSet>) {
                const auto* t = std::get_if<TrapObstacle>(&spec.obstacle);
                if (!t || t->y != s.y || t->alpha != s.alpha)
                    throw InputError("trap set does not match the trap obstacle");
            } else {
                if (!std::holds_alternative<NoObstacle>(spec.obstacle))
                    throw InputError("half-space set is only catalogued in free space");
            }
        },
        set);
}

double set_mass(const DomainSpec& spec, const CandidateSet& set) {
    validate_set(spec, set);
    return std::exp(pieces(spec, set).log_mass - log_domain_mass(spec));
}

double surface_mass(const DomainSpec& spec, const CandidateSet& set) {
    validate_set(spec, set);
    return std::exp(pieces(spec, set).log_surface - log_domain_mass(spec));
}

double enlargement_quotient(const DomainSpec& spec, const CandidateSet& set, double h) {
    validate_set(spec, set);
    if (!(h > 0.0)) throw InputError("enlargement step must be positive");
    const double lz = log_domain_mass(spec);
    if (std::holds_alternative<TrapInnerSet>(set) || std::holds_alternative<TrapNotchSet>(set)) {
        // only the mouth face moves: extra slab [y + depth, y + depth + h] x [-alpha/2, alpha/2]
        double y, depth, alpha;
        if (const auto* s = std::get_if<TrapInnerSet>(&set)) {
            y = s->y, depth = 0.5 * s->alpha, alpha = s->alpha;
        } else {
            const auto& n = std::get<TrapNotchSet>(set);
            y = n.y, depth = n.alpha, alpha = n.alpha;
        }
        const double lm = log_line(spec.lambda, y + depth, y + depth + h) +
                          log_line(spec.lambda, -0.5 * alpha, 0.5 * alpha);
        return std::exp(lm - lz) / h;
    }
    const double m0 = pieces(spec, set).log_mass;
    const double m1 = pieces(spec, grown(set, h)).log_mass;
    return std::exp(m0 - lz) * std::expm1(m1 - m0) / h;
}

CheegerRatio cheeger_ratio(const DomainSpec& spec, const CandidateSet& set) {
    validate_set(spec, set);
    const Pieces p = pieces(spec, set);
    const double lz = log_domain_mass(spec);
    CheegerRatio out;
    out.mass = std::exp(p.log_mass - lz);
    out.surface = std::exp(p.log_surface - lz);
    if (p.log_surface == kNegInf) {
        out.ratio = kInf;
        return out;
    }
    if (out.mass > 0.5 * (1 + 1e-12)) {
        out.complement_used = true;
        out.ratio = (1.0 - out.mass) / out.surface;
    } else {
        out.ratio = std::exp(p.log_mass - p.log_surface);
    }
    return out;
}

double shadow_ratio_lower(double lambda, int d, double r) {
    const double s = std::sqrt(lambda);
    return std::exp(lambda * r * r) * (1.0 - std::exp(-lambda * r * r) / (r * s)) / (2.0 * (d - 1) * s);
}

CheegerPoincare cheeger_to_poincare(double c_c, bool from_single_set) {
    if (!(c_c >= 0.0)) throw InputError("Cheeger constant must be non-negative");
    CheegerPoincare out;
    out.value = 4.0 * c_c * c_c;
    out.warning = from_single_set;
    if (from_single_set)
        out.message = "single-set ratio is lower evidence for the Cheeger constant; 4 c^2 is not a certified upper bound";
    return out;
}

TrapBound trap_lower_bound(double y, double alpha, double c_ratio) {
    if (!(alpha > 0.0) || !std::isfinite(y)) throw InputError("trap bound needs alpha > 0 and finite y");
    const DomainSpec spec{2, 1.0, TrapObstacle{y, alpha}};
    TrapBound out;
    BoundReport& rep = out.report;
    rep.anchor = "trap.lower";
    rep.side = Side::lower;
    rep.condition = "mu(B)^2 <= mu(A)/2 and mu(A) >= " + std::to_string(c_ratio) + " mu(B)";
    const double h = 0.5 * alpha;
    // mu(A)/(mu(B) - mu(A)) = int_y^{y+h} / int_{y+h}^{y+alpha}, in log form
    const double l_in = log_line(1.0, y, y + h);
    const double l_out = log_line(1.0, y + h, y + alpha);
    out.ratio = std::exp(l_in - l_out);
    out.mass_inner = set_mass(spec, TrapInnerSet{y, alpha});
    out.mass_notch = set_mass(spec, TrapNotchSet{y, alpha});
    const double e1 = alpha * (y + 0.25 * alpha), e3 = alpha * (y + 0.75 * alpha);
    out.chain_lower = (2 * y * y / (1 + 2 * y * y)) * std::exp(e1) * (-std::expm1(-e1)) / (-std::expm1(-e3));
    out.chain_holds = y > 0 && out.ratio >= out.chain_lower * (1 - 1e-12);
    rep.applicable = out.mass_notch * out.mass_notch <= 0.5 * out.mass_inner && out.mass_inner >= c_ratio * out.mass_notch;
    rep.value = alpha * alpha / 8.0 * out.ratio;
    rep.coefficient = rep.value;
    return out;
}

double cap_lower_value(int d, double a, double r, double u, double eps) {
    if (!(eps > 0.0) || !(u > 2.0 * eps) || !(u <= r)) return std::numeric_limits<double>::quiet_NaN();
    const double s0 = std::sqrt(std::max(0.0, r * r - u * u));
    const double s1 = std::sqrt(r * r - (u - eps) * (u - eps));
    const double s2 = std::sqrt(r * r - (u - 2 * eps) * (u - 2 * eps));
    const double front = eps * eps * (a + s0) * (a + s1) / (1.0 + 2.0 * (a + s2) * (a + s2)) *
                         std::pow((u - eps) / u, d - 2);
    double H;
    if (a == 0.0) {
        H = ((2 * u - 3 * eps) / (s1 + s2)) / ((2 * u - eps) / (s1 + s0));
    } else {
        const double x1 = 2 * a * eps * (2 * u - 3 * eps) / (s1 + s2);
        const double x2 = 2 * a * eps * (2 * u - eps) / (s1 + s0);
        H = -std::expm1(-x1) / std::expm1(x2);
    }
    return front * H;
}

CapScan cap_lower_scan(double lambda, int d, double a, double r, const CapScanOptions& opt) {
    if (!(lambda > 0.0) || d < 2 || !(r > 0.0) || !(a >= 0.0)) throw InputError("cap scan needs lambda, r > 0, a >= 0, d >= 2");
    const double s = std::sqrt(lambda);
    const double a1 = a * s, r1 = r * s;
    CapScan out;
    out.best.anchor = "cap.lower";
    out.best.side = Side::lower;
    out.best.condition = "ball at (a,0,...), a/r <= " + std::to_string(opt.ratio_max) + ", u > 2 eps, Var(f) >= mu(A(u-eps))/2";
    out.envelope.anchor = "cap.order.lower";
    out.envelope.side = Side::lower;
    out.envelope.is_explicit = false;
    out.envelope.free_constant = "C_d";
    out.envelope.applicable = true;
    out.envelope.coefficient = (1.0 + r1 / std::max(a1, 1.0)) / lambda;
    out.envelope.value = opt.C_d * out.envelope.coefficient;
    out.envelope.condition = "all positions";
    if (a1 > opt.ratio_max * r1) return out;
    const DomainSpec unit{d, 1.0, BallObstacle{[&] {
                                                  Point c(d, 0.0);
                                                  c[0] = a1;
                                                  return c;
                                              }(),
                                              r1}};
    const double lz = log_domain_mass(unit);
    double best = 0.0;
    for (int i = 1; i <= opt.n_u; ++i) {
        const double u = r1 * i / opt.n_u;
        const double lm_u = cap_log_mass(d, 1.0, a1, r1, u) - lz;
        for (int j = 1; j <= opt.n_eps; ++j) {
            const double eps = 0.5 * u * j / (opt.n_eps + 1);
            CapScanPoint pt{u / s, eps / s, cap_lower_value(d, a1, r1, u, eps) / lambda, false};
            const double lm_ue = cap_log_mass(d, 1.0, a1, r1, u - eps) - lz;
            pt.valid = std::isfinite(pt.value) && 2.0 * lm_u <= std::log(0.5) + lm_ue;
            if (pt.valid && pt.value > best) best = pt.value;
            out.points.push_back(pt);
        }
    }
    out.best.applicable = best > 0.0;
    out.best.value = best;
    out.best.coefficient = best;
    return out;
}

}  // namespace oupinball
