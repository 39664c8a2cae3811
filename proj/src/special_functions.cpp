#include "oupinball/special_functions.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "oupinball/error.hpp"
#include "oupinball/quadrature.hpp"

namespace oupinball {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kSqrtPi = 1.7724538509055160273;

// Double-double arithmetic, enough for the Kummer series.
struct DD {
    double hi = 0.0;
    double lo = 0.0;
};

inline DD two_sum(double a, double b) {
    const double s = a + b;
    const double bb = s - a;
    const double e = (a - (s - bb)) + (b - bb);
    return {s, e};
}

inline DD quick_two_sum(double a, double b) {
    const double s = a + b;
    return {s, b - (s - a)};
}

inline DD two_prod(double a, double b) {
    const double p = a * b;
    return {p, std::fma(a, b, -p)};
}

inline DD add(DD a, DD b) {
    DD s = two_sum(a.hi, b.hi);
    DD t = two_sum(a.lo, b.lo);
    s.lo += t.hi;
    s = quick_two_sum(s.hi, s.lo);
    s.lo += t.lo;
    return quick_two_sum(s.hi, s.lo);
}

inline DD mul(DD a, DD b) {
    DD p = two_prod(a.hi, b.hi);
    p.lo += a.hi * b.lo + a.lo * b.hi;
    return quick_two_sum(p.hi, p.lo);
}

inline DD mul(DD a, double b) {
    DD p = two_prod(a.hi, b);
    p.lo += a.lo * b;
    return quick_two_sum(p.hi, p.lo);
}

inline DD div(DD a, double b) {
    const double q1 = a.hi / b;
    DD p = two_prod(q1, b);
    DD r = two_sum(a.hi, -p.hi);
    r.lo += a.lo - p.lo;
    const double q2 = (r.hi + r.lo) / b;
    return quick_two_sum(q1, q2);
}

// Gauss-Legendre nodes on [-1, 1] by Newton iteration.
template <int N>
struct GaussLegendre {
    std::array<double, N> x{};
    std::array<double, N> w{};
    GaussLegendre() {
        for (int i = 0; i < N; ++i) {
            double z = std::cos(std::numbers::pi * (i + 0.75) / (N + 0.5));
            double dp = 0.0;
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0, p1 = z;
                for (int k = 2; k <= N; ++k) {
                    const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = N * (z * p1 - p0) / (z * z - 1.0);
                const double dz = p1 / dp;
                z -= dz;
                if (std::abs(dz) < 1e-16) break;
            }
            x[i] = z;
            w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        }
    }
};

const GaussLegendre<24>& gl24() {
    static const GaussLegendre<24> g;
    return g;
}

}  // namespace

double kummer_m_half(double a, double z) {
    if (!(z >= 0.0) || !std::isfinite(z)) throw InputError("kummer_m_half requires finite z >= 0");
    if (!std::isfinite(a)) throw InputError("kummer_m_half requires finite a");
    if (z > 700.0) throw EvaluationError("kummer_m_half: z too large for the series");
    constexpr double b = 0.5;
    DD sum{1.0, 0.0};
    DD term{1.0, 0.0};
    const double kstar = std::max(0.0, -a);
    for (int k = 0; k < 10000; ++k) {
        const DD ak = two_sum(a, static_cast<double>(k));
        term = mul(term, ak);
        term = div(term, b + k);
        term = mul(term, z);
        term = div(term, k + 1.0);
        sum = add(sum, term);
        if (term.hi == 0.0) return sum.hi + sum.lo;
        if (k > kstar + 2 && std::abs(term.hi) <= 1e-33 * std::abs(sum.hi)) return sum.hi + sum.lo;
    }
    throw EvaluationError("kummer_m_half: series did not converge in 10^4 terms");
}

ExitThreshold exit_moment_threshold(double lambda, double r) {
    if (!(lambda > 0.0) || !(r > 0.0)) throw InputError("exit_moment_threshold requires lambda > 0, r > 0");
    const double z = lambda * r * r;
    double a_prev = 0.0;
    double f_prev = 1.0;  // 1F1(0; 1/2; z)
    for (int i = 1; i <= 5000; ++i) {
        const double a = -0.01 * i;
        const double f = kummer_m_half(a, z);
        if (f == 0.0) return {-2.0 * lambda * a, -2.0 * lambda * a, -2.0 * lambda * a, 0.0};
        if ((f < 0.0) != (f_prev < 0.0)) {
            double hi = a_prev, lo = a;  // F(hi) > 0 > F(lo)
            double fhi = f_prev;
            for (int it = 0; it < 400; ++it) {
                const double mid = 0.5 * (hi + lo);
                if (mid == hi || mid == lo) break;
                const double fm = kummer_m_half(mid, z);
                if (fm == 0.0) {
                    hi = lo = mid;
                    fhi = 0.0;
                    break;
                }
                if ((fm < 0.0) == (fhi < 0.0)) {
                    hi = mid;
                    fhi = fm;
                } else {
                    lo = mid;
                }
            }
            const double flo = kummer_m_half(lo, z);
            const double fh = kummer_m_half(hi, z);
            const double astar = std::abs(flo) < std::abs(fh) ? lo : hi;
            ExitThreshold out;
            out.beta = -2.0 * lambda * astar;
            out.bracket_lo = -2.0 * lambda * hi;
            out.bracket_hi = -2.0 * lambda * lo;
            out.residual = std::min(std::abs(flo), std::abs(fh));
            return out;
        }
        a_prev = a;
        f_prev = f;
    }
    throw NotFound("no sign change of 1F1(a; 1/2; lambda r^2) for a in (-50, 0)");
}

double exit_time_laplace(double theta, double lambda, double r) {
    if (!(lambda > 0.0) || !(r > 0.0) || !std::isfinite(theta))
        throw InputError("exit_time_laplace requires lambda > 0, r > 0, finite theta");
    if (theta < 0.0) {
        const ExitThreshold t = exit_moment_threshold(lambda, r);
        if (-theta >= t.beta) return kInf;
    }
    const double f = kummer_m_half(theta / (2.0 * lambda), lambda * r * r);
    if (!(f > 0.0)) return kInf;
    return 1.0 / f;
}

double erfcx(double x) {
    if (std::isnan(x)) return x;
    if (x < 0.0) {
        if (x < -26.0) return kInf;
        return 2.0 * std::exp(x * x) - erfcx(-x);
    }
    if (x < 6.0) return std::exp(x * x) * std::erfc(x);
    if (x > 1e8) return 1.0 / (kSqrtPi * x);
    // Continued fraction erfc(x) = exp(-x^2)/sqrt(pi) / (x + (1/2)/(x + 1/(x + (3/2)/(x + ...)))).
    double t = x;
    for (int k = 60; k >= 1; --k) t = x + 0.5 * k / t;
    return 1.0 / (kSqrtPi * t);
}

double gaussian_tail_scaled(double b, double c) {
    if (!(b >= 0.0) || !(c >= b)) throw InputError("gaussian_tail_scaled requires 0 <= b <= c");
    if (c == b) return 0.0;
    if (std::isinf(c)) return 0.5 * kSqrtPi * erfcx(b);
    const double w = c - b;
    const double delta = w * (c + b);
    if (delta < 1.0) {
        // exp(b^2) * int_b^c exp(-u^2) du = int_0^w exp(-2 b t - t^2) dt
        const auto& g = gl24();
        double s = 0.0;
        for (int i = 0; i < 24; ++i) {
            const double t = 0.5 * w * (g.x[i] + 1.0);
            s += g.w[i] * std::exp(-t * (2.0 * b + t));
        }
        return 0.5 * w * s;
    }
    return 0.5 * kSqrtPi * (erfcx(b) - std::exp(-delta) * erfcx(c));
}

double gaussian_tail(double b, double c) {
    if (std::isnan(b) || std::isnan(c)) throw InputError("gaussian_tail: NaN argument");
    if (c < b) return -gaussian_tail(c, b);
    if (c == b) return 0.0;
    if (b >= 0.0) {
        const double s = gaussian_tail_scaled(b, c);
        if (b * b > 745.0) return 0.0;
        return std::exp(-b * b) * s;
    }
    if (c <= 0.0) return gaussian_tail(-c, -b);
    // b < 0 < c
    const double left = 0.5 * kSqrtPi * std::erf(-b);
    const double right = std::isinf(c) ? 0.5 * kSqrtPi : 0.5 * kSqrtPi * std::erf(c);
    return left + right;
}

TailBounds gaussian_tail_bounds_scaled(double b, double c) {
    if (!(b > 0.0) || !(c > b)) throw InputError("gaussian_tail_bounds_scaled requires 0 < b < c");
    // 1 - exp(-(c^2 - b^2)) computed without cancellation
    const double delta = std::isinf(c) ? kInf : (c - b) * (c + b);
    const double one_minus = std::isinf(c) ? 1.0 : -std::expm1(-delta);
    TailBounds t;
    t.upper = one_minus / (2.0 * b);
    // exp(b^2) (exp(-b^2)/b - exp(-c^2)/c) = (c - b exp(-delta)) / (b c) = 1/b - exp(-delta)/c
    double diff;
    if (std::isinf(c)) {
        diff = 1.0 / b;
    } else {
        // 1/b - e/c = (c - b)/(b c) + (1 - e)/c
        diff = (c - b) / (b * c) + one_minus / c;
    }
    t.lower = b * b / (1.0 + 2.0 * b * b) * diff;
    return t;
}

double log_upper_gamma_half(int twice_s, double x) {
    if (twice_s <= 0) throw InputError("log_upper_gamma_half requires s > 0");
    if (!(x >= 0.0)) throw InputError("log_upper_gamma_half requires x >= 0");
    const double s_target = 0.5 * twice_s;
    if (std::isinf(x)) return -kInf;
    const bool half = (twice_s % 2) != 0;
    if (x < 1.0) {
        // G_s = exp(x) Gamma(s, x), G_{s+1} = s G_s + x^s
        double s = half ? 0.5 : 1.0;
        double G = half ? kSqrtPi * erfcx(std::sqrt(x)) : 1.0;
        while (s < s_target - 0.25) {
            G = s * G + std::pow(x, s);
            s += 1.0;
        }
        return -x + std::log(G);
    }
    // H_s = G_s / x^{s-1}, H_{s+1} = s H_s / x + 1
    double s = half ? 0.5 : 1.0;
    double H = half ? kSqrtPi * erfcx(std::sqrt(x)) * std::sqrt(x) : 1.0;
    while (s < s_target - 0.25) {
        H = s * H / x + 1.0;
        s += 1.0;
    }
    return -x + (s_target - 1.0) * std::log(x) + std::log(H);
}

double gamma_q_half(int twice_s, double x) {
    const double s = 0.5 * twice_s;
    if (x <= 0.0) return 1.0;
    if (x < s + 1.0) return 1.0 - gamma_p_half(twice_s, x);
    return std::exp(log_upper_gamma_half(twice_s, x) - std::lgamma(s));
}

double gamma_p_half(int twice_s, double x) {
    if (twice_s <= 0) throw InputError("gamma_p_half requires s > 0");
    const double s = 0.5 * twice_s;
    if (x <= 0.0) return 0.0;
    if (x >= s + 1.0) return 1.0 - gamma_q_half(twice_s, x);
    // P = x^s e^{-x} / Gamma(s+1) * sum_k x^k / ((s+1)...(s+k))
    double term = 1.0, sum = 1.0;
    for (int k = 1; k < 1000; ++k) {
        term *= x / (s + k);
        sum += term;
        if (term < 1e-17 * sum) break;
    }
    return std::exp(s * std::log(x) - x - std::lgamma(s + 1.0)) * sum;
}

double log_radial_gaussian_mass(int d, double lambda, double rho) {
    if (d < 1 || !(lambda > 0.0)) throw InputError("radial mass requires d >= 1, lambda > 0");
    // int_{|x|>=rho} exp(-lambda|x|^2) dx = pi^{d/2} lambda^{-d/2} Gamma(d/2, lambda rho^2) / Gamma(d/2)
    const double x = rho > 0.0 ? lambda * rho * rho : 0.0;
    const double half_d = 0.5 * d;
    return half_d * std::log(std::numbers::pi / lambda) + log_upper_gamma_half(d, x) - std::lgamma(half_d);
}

double radial_gaussian_mass(int d, double lambda, double rho) {
    return std::exp(log_radial_gaussian_mass(d, lambda, rho));
}

double log_ou_hitting_density(double t, double b) {
    if (!(b > 0.0)) throw InputError("hitting density requires b > 0");
    if (!(t > 0.0)) return -kInf;
    // tau = (e^{2t} - 1) / 2, log sinh t = log(tau) - t
    double log_tau;
    if (t > 300.0) log_tau = 2.0 * t - std::log(2.0);
    else log_tau = std::log(0.5 * std::expm1(2.0 * t));
    const double log_sinh = log_tau - t;
    const double tau_term = t > 300.0 ? 0.0 : b * b / std::expm1(2.0 * t);
    return std::log(b) - 0.5 * std::log(2.0 * std::numbers::pi) - 1.5 * log_sinh - tau_term + 0.5 * t;
}

double ou_hitting_density(double t, double b) {
    if (!(t > 0.0)) throw InputError("hitting density requires t > 0");
    return std::exp(log_ou_hitting_density(t, b));
}

double log_radial_tail_integral(int d, double lambda, double r) {
    if (d < 1 || !(lambda > 0.0) || !(r >= 0.0)) throw InputError("radial integral requires d >= 1, lambda > 0, r >= 0");
    // A = Gamma(d/2, lambda r^2) / (2 lambda^{d/2})
    return log_upper_gamma_half(d, lambda * r * r) - std::log(2.0) - 0.5 * d * std::log(lambda);
}

double radial_tail_integral(int d, double lambda, double r) { return std::exp(log_radial_tail_integral(d, lambda, r)); }

double xi_second_moment(int d, double lambda, double r) {
    const double base = 0.5 * d / lambda;
    if (r == 0.0) return base;
    const double la = log_radial_tail_integral(d, lambda, r);
    return base + std::exp(d * std::log(r) - lambda * r * r - std::log(2.0 * lambda) - la);
}

double brownian_exit_moment(double theta, double r) {
    if (!(r > 0.0)) throw InputError("brownian exit moment requires r > 0");
    if (!(theta >= 0.0)) throw InputError("brownian exit moment requires theta >= 0");
    const double arg = r * std::sqrt(2.0 * theta);
    if (arg >= 0.5 * std::numbers::pi) return kInf;
    return 1.0 / std::cos(arg);
}

double ou_hitting_cdf(double t, double b) {
    if (!(b > 0.0)) throw InputError("hitting cdf requires b > 0");
    if (!(t > 0.0)) return 0.0;
    if (t > 300.0) return 1.0;
    const double tau = 0.5 * std::expm1(2.0 * t);
    return std::erfc(b / std::sqrt(2.0 * tau));
}

double chi_square_sf(double x, int k) {
    if (k < 1) throw InputError("chi-square needs k >= 1");
    if (x <= 0.0) return 1.0;
    return gamma_q_half(k, 0.5 * x);
}

double kolmogorov_sf(double x) {
    if (x <= 0.2) return 1.0;
    double s = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * x * x);
        s += (k % 2 ? 1.0 : -1.0) * term;
        if (term < 1e-18) break;
    }
    return std::clamp(2.0 * s, 0.0, 1.0);
}

}  // namespace oupinball
