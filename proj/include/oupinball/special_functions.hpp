#pragma once

#include <limits>

namespace oupinball {

/// Confluent hypergeometric 1F1(a; 1/2; z) for z >= 0. The series is summed
/// in double-double arithmetic so cancellation for negative a stays harmless.
/// Throws EvaluationError if 10^4 terms do not converge, InputError if z < 0.
double kummer_m_half(double a, double z);

/// E exp(-theta S) for the exit time S of dX = dW - lambda X dt from (-r, r),
/// started at 0. Returns +inf once theta is at or below the divergence threshold.
double exit_time_laplace(double theta, double lambda, double r);

struct ExitThreshold {
    double beta = 0.0;        ///< supremum of beta with E exp(beta S) finite
    double bracket_lo = 0.0;  ///< beta bracket from the final bisection step
    double bracket_hi = 0.0;
    double residual = 0.0;    ///< |1F1(-beta / 2 lambda; 1/2; lambda r^2)|
};

/// Smallest root in beta of 1F1(-beta/(2 lambda); 1/2; lambda r^2). Scans
/// a = -beta/(2 lambda) downward in steps of 0.01 to -50 and bisects the first
/// sign change to machine resolution. Throws NotFound when no root is seen.
ExitThreshold exit_moment_threshold(double lambda, double r);

/// exp(x^2) erfc(x), accurate for all real x where it is finite.
double erfcx(double x);

/// Integral of exp(-u^2) over [b, c], c may be +inf. Stable for large b and
/// for short intervals.
double gaussian_tail(double b, double c = std::numeric_limits<double>::infinity());

/// exp(b^2) * gaussian_tail(b, c) for b >= 0, representable far past underflow.
double gaussian_tail_scaled(double b, double c = std::numeric_limits<double>::infinity());

struct TailBounds {
    double lower = 0.0;
    double upper = 0.0;
};

/// Elementary sandwich for the integral over [b, c] with 0 < b < c,
/// both sides multiplied by exp(b^2).
TailBounds gaussian_tail_bounds_scaled(double b, double c);

/// log Gamma(s, x) for s = twice_s / 2 (half-integers and integers), x >= 0.
double log_upper_gamma_half(int twice_s, double x);

/// Regularized upper incomplete gamma Q(s, x) for s = twice_s / 2.
double gamma_q_half(int twice_s, double x);

/// Regularized lower incomplete gamma P(s, x) for s = twice_s / 2.
double gamma_p_half(int twice_s, double x);

/// Mass of {|x| >= rho} under exp(-lambda |x|^2) dx in R^d.
double radial_gaussian_mass(int d, double lambda, double rho);

/// log of radial_gaussian_mass.
double log_radial_gaussian_mass(int d, double lambda, double rho);

/// A = int_r^inf rho^{d-1} exp(-lambda rho^2) d rho.
double radial_tail_integral(int d, double lambda, double r);
double log_radial_tail_integral(int d, double lambda, double r);

/// E(xi^2) for xi with density proportional to rho^{d-1} exp(-lambda rho^2) on (r, inf).
double xi_second_moment(int d, double lambda, double r);

/// E exp(theta T) for the exit time T of standard Brownian motion from (-r, r):
/// 1 / cos(r sqrt(2 theta)), +inf once theta >= pi^2 / (8 r^2).
double brownian_exit_moment(double theta, double r);

/// Density of the first time the OU process dX = dW - X dt started at -b
/// reaches 0. Zero for t <= 0.
double ou_hitting_density(double t, double b);

/// log of ou_hitting_density; -inf for t <= 0.
double log_ou_hitting_density(double t, double b);

/// P(hitting time <= t) for the same process.
double ou_hitting_cdf(double t, double b);

/// Upper tail probability of chi-square with k degrees of freedom.
double chi_square_sf(double x, int k);

/// Asymptotic Kolmogorov distribution tail P(sqrt(n) D_n > x).
double kolmogorov_sf(double x);

}  // namespace oupinball
