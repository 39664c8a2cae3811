#pragma once

#include <string>
#include <variant>
#include <vector>

#include "oupinball/analytic_bounds.hpp"
#include "oupinball/geometry.hpp"

namespace oupinball {

/// {x1 >= a + r, |x_i| <= u for i >= 2}: the slab hidden behind a cube of half-width r centered at (a, 0, ...).
struct ShadowSet {
    double a = 0.0;
    double r = 0.0;
    double u = 0.0;
};

/// {x1 >= a, |xbar| <= u} minus the ball B((a, 0, ...), r), 0 < u <= r.
struct CapSet {
    double a = 0.0;
    double r = 0.0;
    double u = 0.0;
};

/// Inner half of the trap notch {y <= x1 <= y + alpha/2, |x2| <= alpha/2}.
struct TrapInnerSet {
    double y = 0.0;
    double alpha = 0.0;
};

/// Whole trap notch {y <= x1 <= y + alpha, |x2| <= alpha/2}.
struct TrapNotchSet {
    double y = 0.0;
    double alpha = 0.0;
};

/// {x1 >= t} in free space.
struct HalfSpaceSet {
    double t = 0.0;
};

using CandidateSet = std::variant<ShadowSet, CapSet, TrapInnerSet, TrapNotchSet, HalfSpaceSet>;

std::string set_kind(const CandidateSet& s);

/// Unnormalized Gaussian mass of the removed region (0 for none; for a shell, of the complement of the shell).
double obstacle_mass(const DomainSpec& spec);

/// Unnormalized Gaussian mass of D, the normalizer of mu.
double domain_mass(const DomainSpec& spec);

/// Unnormalized mass of B(c, r) with |c| = c_norm in R^d under exp(-lambda |x|^2).
double ball_mass(int d, double lambda, double c_norm, double r);

/// Throws InputError unless the set is a valid subset of D for this spec.
void validate_set(const DomainSpec& spec, const CandidateSet& set);

/// mu(set), normalized by the mass of D.
double set_mass(const DomainSpec& spec, const CandidateSet& set);

/// Surface measure of the part of the set boundary lying inside D (faces glued to the
/// obstacle are not counted), normalized by the mass of D.
double surface_mass(const DomainSpec& spec, const CandidateSet& set);

/// (mu(A_h) - mu(A)) / h, growing only the counted faces by h.
double enlargement_quotient(const DomainSpec& spec, const CandidateSet& set, double h);

struct CheegerRatio {
    double ratio = 0.0;  ///< +inf when the counted surface vanishes
    double mass = 0.0;
    double surface = 0.0;
    bool complement_used = false;  ///< mass exceeded 1/2, ratio taken on the complement
};

/// mass / surface, the single-set evidence for the Cheeger constant.
CheegerRatio cheeger_ratio(const DomainSpec& spec, const CandidateSet& set);

/// (1 / (2 (d-1) sqrt(lambda))) e^{lambda r^2} (1 - e^{-lambda r^2} / (r sqrt(lambda))).
double shadow_ratio_lower(double lambda, int d, double r);

struct CheegerPoincare {
    double value = 0.0;
    bool warning = false;  ///< set when the input is a single-set ratio (lower evidence only)
    std::string message;
};

/// C_P <= 4 C_C^2. The result is a valid upper bound only when c_c bounds the Cheeger constant from above.
CheegerPoincare cheeger_to_poincare(double c_c, bool from_single_set = true);

struct TrapBound {
    BoundReport report;
    double mass_inner = 0.0;
    double mass_notch = 0.0;
    double ratio = 0.0;        ///< mu(A) / (mu(B) - mu(A))
    double chain_lower = 0.0;  ///< elementary lower bound for the ratio
    bool chain_holds = false;
};

/// Test-function lower bound (alpha^2 / 8) mu(A) / (mu(B) - mu(A)) for the planar trap, lambda = 1.
/// Applicable when Var(f) >= mu(A)/2 is guaranteed and mu(A) >= c_ratio mu(B).
TrapBound trap_lower_bound(double y, double alpha, double c_ratio = 0.75);

struct CapScanPoint {
    double u = 0.0;
    double eps = 0.0;
    double value = 0.0;
    bool valid = false;  ///< variance condition mu(A(u))^2 <= mu(A(u - eps)) / 2 holds
};

struct CapScan {
    BoundReport best;
    BoundReport envelope;  ///< (C_d / lambda)(1 + r/(|y| v 1)), unspecified constant
    std::vector<CapScanPoint> points;
};

struct CapScanOptions {
    int n_u = 32;
    int n_eps = 24;
    double ratio_max = 4.0;  ///< scan only when a / r <= ratio_max
    double C_d = 1.0;
};

/// Cap test-function lower bound for a ball centered at (a, 0, ...), maximized over a (u, eps) grid with u > 2 eps.
CapScan cap_lower_scan(double lambda, int d, double a, double r, const CapScanOptions& options = {});

/// The cap expression in lambda = 1 units; NaN when u <= 2 eps or u > r.
double cap_lower_value(int d, double a, double r, double u, double eps);

}  // namespace oupinball
