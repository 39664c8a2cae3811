#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oupinball/error.hpp"
#include "oupinball/quadrature.hpp"
#include "oupinball/special_functions.hpp"

using namespace oupinball;

namespace {

// Hermite H_m(x) by the three-term recurrence in long double.
long double hermite(int m, long double x) {
    long double h0 = 1.0L, h1 = 2.0L * x;
    if (m == 0) return h0;
    for (int k = 1; k < m; ++k) {
        const long double h2 = 2.0L * x * h1 - 2.0L * k * h0;
        h0 = h1;
        h1 = h2;
    }
    return h1;
}

// 1F1(a; 1/2; z) by integrating z M'' + (1/2 - z) M' - a M = 0 with RK4 from a
// short series start near the regular singular point.
double kummer_by_ode(double a, double z_end) {
    const long double z0 = 1e-4L;
    long double m = 1.0L, dm = 0.0L, term = 1.0L;
    for (int k = 0; k < 12; ++k) {
        const long double next = term * (a + k) / (0.5L + k) / (k + 1.0L);
        dm += next * (k + 1) * std::pow(z0, (long double)k);
        term = next;
        m += next * std::pow(z0, (long double)(k + 1));
    }
    auto rhs = [a](long double z, long double y, long double yp) { return ((z - 0.5L) * yp + a * y) / z; };
    const int n = 200000;
    const long double h = (z_end - z0) / n;
    long double z = z0;
    for (int i = 0; i < n; ++i) {
        const long double k1 = dm, l1 = rhs(z, m, dm);
        const long double k2 = dm + 0.5L * h * l1, l2 = rhs(z + 0.5L * h, m + 0.5L * h * k1, dm + 0.5L * h * l1);
        const long double k3 = dm + 0.5L * h * l2, l3 = rhs(z + 0.5L * h, m + 0.5L * h * k2, dm + 0.5L * h * l2);
        const long double k4 = dm + h * l3, l4 = rhs(z + h, m + h * k3, dm + h * l3);
        m += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
        dm += h / 6 * (l1 + 2 * l2 + 2 * l3 + l4);
        z += h;
    }
    return static_cast<double>(m);
}

// Value at x = r of the even solution of u'' = 2 lambda x u' - 2 beta u, u(0) = 1.
double shoot(double beta, double lambda, double r) {
    const int n = 4000;
    const double h = r / n;
    double x = 0, u = 1, du = 0;
    auto f = [&](double xx, double uu, double dd) { return 2 * lambda * xx * dd - 2 * beta * uu; };
    for (int i = 0; i < n; ++i) {
        const double k1 = du, l1 = f(x, u, du);
        const double k2 = du + 0.5 * h * l1, l2 = f(x + 0.5 * h, u + 0.5 * h * k1, du + 0.5 * h * l1);
        const double k3 = du + 0.5 * h * l2, l3 = f(x + 0.5 * h, u + 0.5 * h * k2, du + 0.5 * h * l2);
        const double k4 = du + h * l3, l4 = f(x + h, u + h * k3, du + h * l3);
        u += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
        du += h / 6 * (l1 + 2 * l2 + 2 * l3 + l4);
        x += h;
    }
    return u;
}

double shooting_threshold(double lambda, double r) {
    double lo = 0.0, step = 0.01 * lambda;
    while (shoot(lo + step, lambda, r) > 0) lo += step;
    double hi = lo + step;
    for (int i = 0; i < 80; ++i) {
        const double mid = 0.5 * (lo + hi);
        (shoot(mid, lambda, r) > 0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("kummer closed forms") {
    for (double z : {0.0, 0.1, 1.0, 3.7, 10.0, 25.0}) {
        CHECK(kummer_m_half(0.0, z) == 1.0);
        CHECK(kummer_m_half(0.5, z) == doctest::Approx(std::exp(z)).epsilon(1e-14));
        const double s = std::sqrt(z);
        const double m1 = 1.0 + std::sqrt(std::numbers::pi * z) * std::exp(z) * std::erf(s);
        CHECK(kummer_m_half(1.0, z) == doctest::Approx(m1).epsilon(1e-13));
    }
}

TEST_CASE("kummer at negative integers matches Hermite polynomials") {
    for (int n = 1; n <= 12; ++n) {
        for (double x : {0.3, 1.0, 2.2, 4.0}) {
            long double fact = 1.0L;  // (2n)! / n!
            for (int k = n + 1; k <= 2 * n; ++k) fact *= k;
            const long double expect = hermite(2 * n, x) / fact * ((n % 2) ? -1.0L : 1.0L);
            const double got = kummer_m_half(-n, x * x);
            const double scale = std::max(1.0L, std::abs(expect));
            CHECK(std::abs(got - static_cast<double>(expect)) <= 1e-12 * scale);
        }
    }
}

TEST_CASE("kummer agrees with direct ODE integration for non-integer a") {
    for (double a : {-0.37, -1.85, -3.2, 0.8}) {
        for (double z : {0.5, 2.0, 6.0}) {
            const double ode = kummer_by_ode(a, z);
            CHECK(kummer_m_half(a, z) == doctest::Approx(ode).epsilon(1e-9).scale(1.0));
        }
    }
}

TEST_CASE("kummer rejects bad input") {
    CHECK_THROWS_AS(kummer_m_half(1.0, -1.0), InputError);
    CHECK_THROWS_AS(kummer_m_half(NAN, 1.0), InputError);
}

TEST_CASE("exit threshold matches shooting eigenvalue and stays between caps") {
    for (auto [lambda, r] : {std::pair{1.0, 1.0}, {1.0, 0.3}, {2.0, 1.5}, {0.5, 2.0}}) {
        const ExitThreshold t = exit_moment_threshold(lambda, r);
        CHECK(t.residual <= 1e-10);
        CHECK(t.beta == doctest::Approx(shooting_threshold(lambda, r)).epsilon(1e-7));
        const double brownian = std::numbers::pi * std::numbers::pi / (8.0 * r * r);
        CHECK(t.beta <= brownian);
        CHECK(t.beta > lambda / std::expm1(lambda * r * r));
        CHECK(t.bracket_lo <= t.beta);
        CHECK(t.bracket_hi >= t.beta);
    }
}

TEST_CASE("exit threshold approaches the Brownian value as lambda vanishes") {
    const ExitThreshold t = exit_moment_threshold(0.02, 1.0);
    CHECK(t.beta == doctest::Approx(std::numbers::pi * std::numbers::pi / 8.0).epsilon(0.03));
    CHECK_THROWS_AS(exit_moment_threshold(1e-6, 1.0), NotFound);
}

TEST_CASE("laplace transform of the exit time") {
    CHECK(exit_time_laplace(0.0, 1.0, 1.0) == 1.0);
    // Brownian limit 1 / cosh(r sqrt(2 theta))
    CHECK(exit_time_laplace(1.0, 1e-7, 1.0) == doctest::Approx(1.0 / std::cosh(std::sqrt(2.0))).epsilon(1e-6));
    const double beta = exit_moment_threshold(1.0, 1.0).beta;
    CHECK(std::isinf(exit_time_laplace(-beta * 1.0001, 1.0, 1.0)));
    CHECK(std::isinf(exit_time_laplace(-2.0, 1.0, 1.0)));
    CHECK(exit_time_laplace(-0.5 * beta, 1.0, 1.0) > 1.0);
    CHECK(exit_time_laplace(2.0, 1.0, 1.0) < exit_time_laplace(1.0, 1.0, 1.0));
}

TEST_CASE("erfcx is continuous across branches and matches erfc") {
    for (double x : {-3.0, -0.5, 0.0, 0.7, 2.5, 5.0}) {
        CHECK(erfcx(x) == doctest::Approx(std::exp(x * x) * std::erfc(x)).epsilon(1e-13));
    }
    const double left = std::exp(36.0L) * std::erfc(6.0L);
    CHECK(erfcx(6.0) == doctest::Approx(left).epsilon(1e-13));
    CHECK(erfcx(1e3) == doctest::Approx(1.0 / (std::sqrt(std::numbers::pi) * 1e3)).epsilon(1e-6));
}

TEST_CASE("gaussian tail integral against adaptive quadrature") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> ub(-3.0, 5.0), uw(0.0, 3.0);
    for (int i = 0; i < 300; ++i) {
        const double b = ub(rng), c = b + uw(rng);
        const auto q = integrate([](double u) { return std::exp(-u * u); }, b, c, 1e-15, 1e-14);
        CHECK(std::abs(gaussian_tail(b, c) - q.value) <= 1e-13);
    }
    CHECK(gaussian_tail(0.0) == doctest::Approx(0.5 * std::sqrt(std::numbers::pi)));
    CHECK(gaussian_tail(-INFINITY, INFINITY) == doctest::Approx(std::sqrt(std::numbers::pi)));
}

TEST_CASE("scaled tail survives underflow") {
    const double s = gaussian_tail_scaled(40.0, 40.001);
    const auto q = integrate([](double t) { return std::exp(-t * (80.0 + t)); }, 0.0, 0.001, 1e-20, 1e-14);
    CHECK(s == doctest::Approx(q.value).epsilon(1e-12));
    CHECK(gaussian_tail_scaled(30.0) == doctest::Approx(0.5 * std::sqrt(std::numbers::pi) * erfcx(30.0)));
}

TEST_CASE("tail sandwich holds on a random grid") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> lb(std::log(1e-3), std::log(20.0)), lw(std::log(1e-6), std::log(10.0));
    for (int i = 0; i < 2000; ++i) {
        const double b = std::exp(lb(rng));
        const double c = b + std::exp(lw(rng));
        const double v = gaussian_tail_scaled(b, c);
        const TailBounds tb = gaussian_tail_bounds_scaled(b, c);
        CHECK(tb.lower <= v * (1 + 1e-12));
        CHECK(v <= tb.upper * (1 + 1e-12));
    }
}

TEST_CASE("incomplete gamma against closed forms and quadrature") {
    for (double x : {0.0, 0.2, 1.0, 4.5, 30.0}) {
        // Gamma(3, x) = 2 e^{-x} (1 + x + x^2/2)
        CHECK(std::exp(log_upper_gamma_half(6, x)) == doctest::Approx(2 * std::exp(-x) * (1 + x + x * x / 2)));
        // Gamma(1/2, x) = sqrt(pi) erfc(sqrt(x))
        CHECK(std::exp(log_upper_gamma_half(1, x)) ==
              doctest::Approx(std::sqrt(std::numbers::pi) * std::erfc(std::sqrt(x))).epsilon(1e-13));
    }
    for (int ts : {3, 5, 7, 11}) {
        for (double x : {0.3, 2.0, 9.0}) {
            const double s = 0.5 * ts;
            const auto q = integrate([s](double t) { return std::pow(t, s - 1) * std::exp(-t); }, x, INFINITY);
            CHECK(std::exp(log_upper_gamma_half(ts, x)) == doctest::Approx(q.value).epsilon(1e-11));
            CHECK(gamma_p_half(ts, x) + gamma_q_half(ts, x) == doctest::Approx(1.0));
        }
    }
}

TEST_CASE("radial gaussian mass") {
    const double lam = 1.7;
    for (double rho : {0.0, 0.5, 2.0}) {
        CHECK(radial_gaussian_mass(2, lam, rho) ==
              doctest::Approx(std::numbers::pi / lam * std::exp(-lam * rho * rho)));
        CHECK(radial_gaussian_mass(1, lam, rho) ==
              doctest::Approx(std::sqrt(std::numbers::pi / lam) * std::erfc(std::sqrt(lam) * rho)));
        const auto q = integrate(
            [lam](double t) { return 4 * std::numbers::pi * t * t * std::exp(-lam * t * t); }, rho, INFINITY);
        CHECK(radial_gaussian_mass(3, lam, rho) == doctest::Approx(q.value).epsilon(1e-12));
    }
    CHECK(log_radial_gaussian_mass(2, 1.0, 40.0) == doctest::Approx(std::log(std::numbers::pi) - 1600.0));
}

TEST_CASE("hitting density is a probability density consistent with its cdf") {
    for (double b : {0.5, 1.0, 2.0}) {
        const auto q = integrate([b](double t) { return ou_hitting_density(t, b); }, 0.0, INFINITY, 1e-12, 1e-11);
        CHECK(q.value == doctest::Approx(1.0).epsilon(1e-9));
        for (double t : {0.3, 1.0, 3.0}) {
            const double h = 1e-5;
            const double fd = (ou_hitting_cdf(t + h, b) - ou_hitting_cdf(t - h, b)) / (2 * h);
            CHECK(fd == doctest::Approx(ou_hitting_density(t, b)).epsilon(1e-6));
            const auto part = integrate([b](double s) { return ou_hitting_density(s, b); }, 0.0, t);
            CHECK(part.value == doctest::Approx(ou_hitting_cdf(t, b)).epsilon(1e-10));
        }
    }
    CHECK_THROWS_AS(ou_hitting_density(-1.0, 1.0), InputError);
}

TEST_CASE("quadrature rule integrates polynomials and smooth functions") {
    CHECK(integrate([](double x) { return x * x * x * x; }, 0.0, 2.0).value == doctest::Approx(32.0 / 5.0));
    CHECK(integrate([](double x) { return std::exp(-x); }, 0.0, INFINITY).value == doctest::Approx(1.0));
    CHECK(integrate([](double x) { return std::sqrt(x); }, 0.0, 1.0, 1e-12, 1e-12).value ==
          doctest::Approx(2.0 / 3.0));
}

TEST_CASE("chi-square and Kolmogorov tails") {
    CHECK(chi_square_sf(2.0, 2) == doctest::Approx(std::exp(-1.0)));
    CHECK(chi_square_sf(3.841458820694124, 1) == doctest::Approx(0.05).epsilon(1e-9));
    CHECK(kolmogorov_sf(1.6276) == doctest::Approx(0.01).epsilon(2e-3));
}

TEST_CASE("radial tail integral and second moment") {
    CHECK(radial_tail_integral(2, 1.0, 0.0) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(radial_tail_integral(2, 1.0, 2.0) == doctest::Approx(std::exp(-4.0) / 2).epsilon(1e-13));
    CHECK(xi_second_moment(2, 1.0, 0.0) == 1.0);
    CHECK(xi_second_moment(2, 1.0, 2.0) == doctest::Approx(5.0).epsilon(1e-13));
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int k = 0; k < 300; ++k) {
        const int d = 1 + int(U(rng) * 9);
        const double lam = 0.1 + 4 * U(rng), r = 3 * U(rng);
        const double A = radial_tail_integral(d, lam, r);
        const auto q = integrate([&](double p) { return std::pow(p, d - 1) * std::exp(-lam * p * p); }, r, INFINITY,
                                 1e-300, 1e-12);
        CHECK(A == doctest::Approx(q.value).epsilon(1e-10));
        if (d >= 2) CHECK(A >= std::pow(r, d - 2) * std::exp(-lam * r * r) / (2 * lam) * (1 - 1e-12));
        const auto m2 = integrate([&](double p) { return std::pow(p, d + 1) * std::exp(-lam * p * p); }, r, INFINITY,
                                  1e-300, 1e-12);
        const double xi = xi_second_moment(d, lam, r);
        CHECK(xi == doctest::Approx(m2.value / q.value).epsilon(1e-9));
        if (d >= 2) CHECK(xi <= 0.5 * d / lam + r * r + 1e-12);
    }
}

TEST_CASE("Brownian exit moment") {
    CHECK(brownian_exit_moment(0.0, 1.0) == 1.0);
    CHECK(brownian_exit_moment(std::numbers::pi * std::numbers::pi / 72, 2.0) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(std::isinf(brownian_exit_moment(std::numbers::pi * std::numbers::pi / 8 + 1e-9, 1.0)));
    CHECK_THROWS_AS(brownian_exit_moment(-0.1, 1.0), InputError);
}
