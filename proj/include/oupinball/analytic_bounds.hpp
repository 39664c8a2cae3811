#pragma once

#include <string>
#include <vector>

#include "oupinball/geometry.hpp"

namespace oupinball {

enum class Side { upper, lower };

/// What a report bounds.
enum class Quantity {
    domain_poincare,  ///< C_P of the domain itself
    shell_poincare,   ///< C_P of an auxiliary shell around the obstacle
    exit_rate,        ///< admissible exponential rate for an exit time
    conjecture,       ///< non-binding reference line
};

std::string to_string(Side s);
std::string to_string(Quantity q);

struct BoundReport {
    std::string anchor;         ///< stable identifier, e.g. "centered.lower"
    Side side = Side::upper;
    Quantity quantity = Quantity::domain_poincare;
    double value = 0.0;         ///< may be +inf for valid but useless bounds
    bool applicable = false;
    bool is_explicit = true;    ///< false when an unspecified universal constant enters
    bool disputed = false;      ///< derivation known to be questionable; kept out of the envelope
    std::string free_constant;  ///< name of the universal constant, empty when explicit
    double coefficient = 0.0;   ///< value divided by the free constant
    std::string condition;      ///< human-readable applicability condition
    std::string note;

    /// True when the report may enter the certified C_P envelope.
    bool certified() const {
        return applicable && is_explicit && !disputed && quantity == Quantity::domain_poincare;
    }
};

struct CenteredBounds {
    BoundReport lower;
    BoundReport upper;       ///< strict form 1/lambda + r^2/d
    BoundReport upper_safe;  ///< 1/lambda + r^2/(d-1)
};

/// Sandwich for a ball centered at the origin.
CenteredBounds centered_bounds(double lambda, int d, double r);

/// Upper bound for a ball at any position; +inf (still applicable) on overflow.
BoundReport perturbation_upper(double lambda, int d, double y_norm, double r);

/// 4 (1/lambda + r^2/d), valid when 4 lambda |y|^2 (1 + r^2 lambda / d) <= 1.
BoundReport small_displacement_upper(double lambda, int d, double y_norm, double r);

/// Variance-decomposition upper bound for d >= 3. All regimes carry the
/// universal constant c (set by `c`).
BoundReport decomposition_upper(double lambda, int d, double y_norm, double r, double c = 1.0);

/// Position-independent Lyapunov bound b^2 (3b^2 + 2) / (2b^4 - 1) / lambda.
BoundReport lyapunov_small_radius_upper(double lambda, int d, double r, double b);

/// Largest admissible b for the small-radius Lyapunov bound, (sqrt((d-1)/2) - r sqrt(lambda)) / 2.
double lyapunov_best_b(double lambda, int d, double r);

/// Far-obstacle bound (1 + 6K)/lambda for 0 < b < 1 plus the blanket small-radius report c/lambda.
std::vector<BoundReport> far_or_small_upper(double lambda, int d, double y_norm, double r, double b,
                                            double c = 1.0);

struct LyapunovCheck {
    bool holds = false;            ///< analytic predicate d - 1 >= 2 lambda (r + 2h + eps)^2
    double analytic_margin = 0.0;  ///< (d - 1) - 2 lambda (r + 2h + eps)^2
    double worst_margin = 0.0;     ///< min over sampled points of -(LW + 2 lambda W), finite differences
    double worst_normal_derivative = 0.0;  ///< max of dW/dn over sampled boundary points (should be <= 0)
    std::size_t points = 0;
};

/// Samples W(x) = (r + 2h + eps)^2 - |xbar|^2 on {|x - y| <= r + 2h} outside the ball
/// B(y, r), y = (|y|, 0, ..., 0), and checks L W <= -2 lambda W with L = Laplacian/2 - lambda x.grad.
LyapunovCheck verify_local_lyapunov(double lambda, int d, double y_norm, double r, double h, double eps,
                                    double grid_step);

/// mass_U / (32 beta_star); InputError when mass_U is outside (0, 1] or beta_star <= 0.
BoundReport hitting_lower(double mass_U, double beta_star);

/// Catalogue rows for a cube obstacle of half-width r.
std::vector<BoundReport> square_obstacle_bounds(double lambda, int d, double r, double c = 1.0);

/// Lower bound through the exit of the shadow strip V = {x1 >= a + r, |xbar|_inf <= r} behind a cube
/// centered at (a, 0, ...): mu(D - V) / (32 (d-1) beta*), beta* the exit threshold of [-r, r].
BoundReport cube_shadow_hitting_lower(double lambda, int d, double a, double r);

/// Test-function lower bound for the cube (explicit) and the generic ball/cube order (C_d/lambda)(1 + r/(|y| v 1)).
std::vector<BoundReport> isoperimetric_lower_reports(double lambda, int d, double y_norm, double r, double eps,
                                                     double c_min = 1.0, double C_d = 1.0);

/// Planar shell and rotation reports (lambda = 1 units).
std::vector<BoundReport> shell_and_2d_reports(double r, double q, double s, double y_norm, double c = 1.0,
                                              double C = 1.0);

/// Value of the shell bound 64(r+q)^2 + (1 + 64(r+q)^2/s^2)(5/2 + 1/s^2).
double shell_poincare_upper_value(double r, double q, double s);

/// Lower bound from hitting a half-space {x . e >= -1/sqrt(lambda)} with the obstacle strictly on the far
/// side of the origin: erf(1)/(64 lambda).
BoundReport halfspace_hitting_lower(double lambda);

struct AggregateOptions {
    double universal_constant = 1.0;  ///< value substituted for every unspecified constant
    double eps = 1.0;                 ///< smoothing width in the cube test-function bound
    double c_min = 1.0;               ///< guard r sqrt(lambda) > c_min for that bound
    double shell_q_factor = 3.0;      ///< q = factor * r for the planar shell reports
    double shell_s_factor = 1.0;      ///< s = factor * r
    double cap_ratio_max = 4.0;       ///< cap scan only when |y|/r <= this
};

struct BoundCatalogue {
    DomainSpec spec;
    std::vector<BoundReport> reports;
    double best_explicit_upper = 0.0;  ///< +inf when none
    double best_explicit_lower = 0.0;  ///< 0 when none
    std::string best_upper_anchor;
    std::string best_lower_anchor;
    bool ordered = true;               ///< best lower <= best upper
    std::vector<std::string> findings;
};

/// Runs every applicable bound for the domain and computes the certified envelope.
BoundCatalogue aggregate(const DomainSpec& spec, const AggregateOptions& options = {});

/// Distance of the obstacle center from the origin (0 for none, |y| for the trap).
double center_norm(const Obstacle& o);

}  // namespace oupinball
