#include "oupinball/geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "oupinball/error.hpp"

namespace oupinball {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double dist(std::span<const double> x, const Point& c) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - c[i];
        s += d * d;
    }
    return std::sqrt(s);
}

// Radial rescaling about c; nudges the factor until ok() holds so rounding
// never leaves the result on the wrong side of the sphere.
template <class Ok>
void scale_about(std::span<double> x, const Point& c, double s, Ok ok) {
    const Point x0(x.begin(), x.end());
    const double dir = s > 1.0 ? 1.0 : -1.0;
    for (int attempt = 0; attempt < 16; ++attempt) {
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = c[i] + s * (x0[i] - c[i]);
        if (ok(std::span<const double>(x.data(), x.size()))) return;
        s *= 1.0 + dir * 2.2e-16 * (1 << attempt);
    }
}

bool finite_point(std::span<const double> x) {
    return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

struct Seg {
    double ax, ay, bx, by;
};

// Trap body as a counter-clockwise polygon.
std::array<Seg, 8> trap_edges(const TrapObstacle& t) {
    const double y = t.y, a = t.alpha, h = 0.5 * t.alpha;
    const std::array<std::array<double, 2>, 8> v{{{y - a, -a},
                                                  {y + a, -a},
                                                  {y + a, -h},
                                                  {y, -h},
                                                  {y, h},
                                                  {y + a, h},
                                                  {y + a, a},
                                                  {y - a, a}}};
    std::array<Seg, 8> e{};
    for (std::size_t i = 0; i < 8; ++i) {
        const auto& p = v[i];
        const auto& q = v[(i + 1) % 8];
        e[i] = {p[0], p[1], q[0], q[1]};
    }
    return e;
}

// Closest point on a segment and its squared distance.
double seg_closest(const Seg& s, double px, double py, double& cx, double& cy) {
    const double dx = s.bx - s.ax, dy = s.by - s.ay;
    const double len2 = dx * dx + dy * dy;
    double t = ((px - s.ax) * dx + (py - s.ay) * dy) / len2;
    t = std::clamp(t, 0.0, 1.0);
    cx = s.ax + t * dx;
    cy = s.ay + t * dy;
    return (px - cx) * (px - cx) + (py - cy) * (py - cy);
}

bool trap_interior(const TrapObstacle& t, double px, double py) {
    const double y = t.y, a = t.alpha, h = 0.5 * t.alpha;
    const bool outer = px > y - a && px < y + a && py > -a && py < a;
    const bool notch = px >= y && py >= -h && py <= h;
    return outer && !notch;
}

double trap_sd(const TrapObstacle& t, double px, double py) {
    double best = kInf, cx = 0, cy = 0;
    for (const auto& s : trap_edges(t)) best = std::min(best, seg_closest(s, px, py, cx, cy));
    const double d = std::sqrt(best);
    return trap_interior(t, px, py) ? -d : d;
}

}  // namespace

void DomainSpec::validate() const {
    if (dim < 1) throw InputError("dimension must be at least 1");
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw InputError("lambda must be positive and finite");
    const auto check_center = [&](const Point& c) {
        if (static_cast<int>(c.size()) != dim)
            throw InputError("obstacle center has dimension " + std::to_string(c.size()) + ", expected " +
                             std::to_string(dim));
        if (!finite_point(c)) throw InputError("obstacle center must be finite");
    };
    std::visit(
        [&](const auto& o) {
            using T = std::decay_t<decltype(o)>;
            if constexpr (std::is_same_v<T, BallObstacle> || std::is_same_v<T, CubeObstacle>) {
                check_center(o.center);
                if (!(o.r > 0.0) || !std::isfinite(o.r)) throw InputError("obstacle radius must be positive");
            } else if constexpr (std::is_same_v<T, ShellDomain>) {
                check_center(o.center);
                if (!(o.r > 0.0) || !(o.R > o.r) || !std::isfinite(o.R))
                    throw InputError("shell requires 0 < r < R < inf");
            } else if constexpr (std::is_same_v<T, TrapObstacle>) {
                if (dim != 2) throw InputError("trap obstacle is planar, dim must be 2");
                if (!(o.alpha > 0.0) || !std::isfinite(o.alpha) || !std::isfinite(o.y))
                    throw InputError("trap requires alpha > 0 and finite y");
            }
        },
        obstacle);
}

std::string obstacle_kind(const Obstacle& o) {
    switch (o.index()) {
        case 0: return "none";
        case 1: return "ball";
        case 2: return "hypercube";
        case 3: return "shell";
        default: return "trap";
    }
}

double obstacle_scale(const Obstacle& o) {
    return std::visit(
        [](const auto& v) -> double {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, NoObstacle>) return 1.0;
            else if constexpr (std::is_same_v<T, ShellDomain>) return v.R;
            else if constexpr (std::is_same_v<T, TrapObstacle>) return v.alpha;
            else return v.r;
        },
        o);
}

double obstacle_extent(const Obstacle& o) {
    return std::visit(
        [](const auto& v) -> double {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, NoObstacle>) return 0.0;
            else if constexpr (std::is_same_v<T, TrapObstacle>) return std::abs(v.y) + v.alpha * std::sqrt(2.0);
            else {
                double c = 0.0;
                for (double ci : v.center) c += ci * ci;
                c = std::sqrt(c);
                if constexpr (std::is_same_v<T, BallObstacle>) return c + v.r;
                else if constexpr (std::is_same_v<T, CubeObstacle>)
                    return c + v.r * std::sqrt(static_cast<double>(v.center.size()));
                else return c + v.R;
            }
        },
        o);
}

double signed_distance(const Obstacle& o, std::span<const double> x) {
    return std::visit(
        [&](const auto& v) -> double {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, NoObstacle>) {
                return kInf;
            } else if constexpr (std::is_same_v<T, BallObstacle>) {
                return dist(x, v.center) - v.r;
            } else if constexpr (std::is_same_v<T, CubeObstacle>) {
                double out2 = 0.0, qmax = -kInf;
                for (std::size_t i = 0; i < x.size(); ++i) {
                    const double q = std::abs(x[i] - v.center[i]) - v.r;
                    qmax = std::max(qmax, q);
                    if (q > 0) out2 += q * q;
                }
                return qmax > 0 ? std::sqrt(out2) : qmax;
            } else if constexpr (std::is_same_v<T, ShellDomain>) {
                const double rho = dist(x, v.center);
                return std::min(rho - v.r, v.R - rho);
            } else {
                return trap_sd(v, x[0], x[1]);
            }
        },
        o);
}

bool contains(const DomainSpec& spec, std::span<const double> x) {
    if (static_cast<int>(x.size()) != spec.dim)
        throw InputError("point has dimension " + std::to_string(x.size()) + ", expected " +
                         std::to_string(spec.dim));
    if (!finite_point(x)) return false;
    return signed_distance(spec.obstacle, x) >= 0.0;
}

bool project_in_place(const Obstacle& o, std::span<double> x) {
    return std::visit(
        [&](const auto& v) -> bool {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, NoObstacle>) {
                return false;
            } else if constexpr (std::is_same_v<T, BallObstacle>) {
                const double rho = dist(x, v.center);
                if (rho >= v.r) return false;
                if (rho == 0.0) throw ProjectionError("projection undefined at the ball center");
                scale_about(x, v.center, v.r / rho, [&](std::span<const double> p) { return dist(p, v.center) >= v.r; });
                return true;
            } else if constexpr (std::is_same_v<T, CubeObstacle>) {
                // Interior iff every |x_i - c_i| < r; push out through the nearest face.
                std::size_t best = 0;
                double gap = kInf;
                for (std::size_t i = 0; i < x.size(); ++i) {
                    const double g = v.r - std::abs(x[i] - v.center[i]);
                    if (g <= 0) return false;
                    if (g <= gap) {  // ties go to the highest axis
                        gap = g;
                        best = i;
                    }
                }
                x[best] = v.center[best] + (x[best] >= v.center[best] ? v.r : -v.r);
                return true;
            } else if constexpr (std::is_same_v<T, ShellDomain>) {
                const double rho = dist(x, v.center);
                if (rho >= v.r && rho <= v.R) return false;
                if (rho == 0.0) throw ProjectionError("projection undefined at the shell center");
                if (rho < v.r)
                    scale_about(x, v.center, v.r / rho, [&](std::span<const double> p) { return dist(p, v.center) >= v.r; });
                else
                    scale_about(x, v.center, v.R / rho, [&](std::span<const double> p) { return dist(p, v.center) <= v.R; });
                return true;
            } else {
                if (!trap_interior(v, x[0], x[1])) return false;
                double best = kInf, bx = x[0], by = x[1], cx = 0, cy = 0;
                for (const auto& s : trap_edges(v)) {
                    const double d2 = seg_closest(s, x[0], x[1], cx, cy);
                    if (d2 < best) {
                        best = d2;
                        bx = cx;
                        by = cy;
                    }
                }
                x[0] = bx;
                x[1] = by;
                return true;
            }
        },
        o);
}

Point project_to_domain(const Obstacle& o, std::span<const double> x) {
    Point p(x.begin(), x.end());
    project_in_place(o, p);
    return p;
}

Point inward_normal(const Obstacle& o, std::span<const double> x, double tol) {
    const double sd = signed_distance(o, x);
    if (!(std::abs(sd) <= tol)) throw InputError("point is not on the obstacle boundary");
    Point n(x.size(), 0.0);
    std::visit(
        [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, NoObstacle>) {
                throw InputError("free space has no boundary");
            } else if constexpr (std::is_same_v<T, BallObstacle> || std::is_same_v<T, ShellDomain>) {
                const double rho = dist(x, v.center);
                if (rho == 0.0) throw ProjectionError("normal undefined at the center");
                double sign = 1.0;
                if constexpr (std::is_same_v<T, ShellDomain>) {
                    if (std::abs(rho - v.R) < std::abs(rho - v.r)) sign = -1.0;
                }
                for (std::size_t i = 0; i < x.size(); ++i) n[i] = sign * (x[i] - v.center[i]) / rho;
            } else if constexpr (std::is_same_v<T, CubeObstacle>) {
                for (std::size_t i = 0; i < x.size(); ++i) {
                    const double u = x[i] - v.center[i];
                    if (std::abs(std::abs(u) - v.r) <= tol) n[i] = u >= 0 ? 1.0 : -1.0;
                }
            } else {
                for (const auto& s : trap_edges(v)) {
                    double cx = 0, cy = 0;
                    if (seg_closest(s, x[0], x[1], cx, cy) <= tol * tol) {
                        const double dx = s.bx - s.ax, dy = s.by - s.ay;
                        const double len = std::hypot(dx, dy);
                        n[0] += dy / len;
                        n[1] += -dx / len;
                    }
                }
            }
        },
        o);
    double norm = 0.0;
    for (double v : n) norm += v * v;
    norm = std::sqrt(norm);
    if (norm == 0.0) throw InputError("normal undefined at this boundary point");
    for (double& v : n) v /= norm;
    return n;
}

DomainSpec rescale_to_lambda(const DomainSpec& spec, double new_lambda) {
    if (!(new_lambda > 0.0)) throw InputError("lambda must be positive");
    const double s = std::sqrt(spec.lambda / new_lambda);
    DomainSpec out = spec;
    out.lambda = new_lambda;
    std::visit(
        [&](auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, NoObstacle>) {
            } else if constexpr (std::is_same_v<T, TrapObstacle>) {
                v.y *= s;
                v.alpha *= s;
            } else {
                for (double& c : v.center) c *= s;
                v.r *= s;
                if constexpr (std::is_same_v<T, ShellDomain>) v.R *= s;
            }
        },
        out.obstacle);
    return out;
}

DomainSpec rescale_to_unit_lambda(const DomainSpec& spec) { return rescale_to_lambda(spec, 1.0); }

}  // namespace oupinball
