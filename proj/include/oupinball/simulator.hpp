#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "oupinball/geometry.hpp"

namespace oupinball {

struct SimConfig {
    DomainSpec spec;
    double dt = 1e-3;
    double horizon = 10.0;
    std::uint64_t seed = 0;
    std::size_t n_paths = 1000;
    double tolerance = 1e-9;  ///< allowed signed-distance deficit after projection
    unsigned threads = 1;

    /// dt <= 0.01 / lambda, horizon / dt <= 1e9, n_paths >= 1. Throws InputError.
    void validate() const;
    std::uint64_t steps() const;
};

struct StepOutcome {
    bool projected = false;
    double displacement = 0.0;
};

/// Euler-Maruyama proposal x - lambda x dt + sqrt(dt) xi, projected onto closure(D) when it leaves D.
/// Throws ProjectionError when the projection is ambiguous.
StepOutcome step(std::span<double> x, double lambda, const Obstacle& obstacle, double dt,
                 std::span<const double> xi);

struct PathStats {
    double hit_time = 0.0;  ///< first hitting time, or the horizon when censored
    bool censored = false;
    std::uint64_t contacts = 0;
    double displacement = 0.0;  ///< sum of projection displacements (local-time proxy)
    std::uint64_t steps = 0;
    std::uint64_t retries = 0;
    std::uint64_t violations = 0;  ///< post-step states with signed distance below -tolerance
    Point final_state;
};

/// Target set {gap(x) <= 0}. When gap is the distance to a flat target boundary the
/// Brownian-bridge crossing probability exp(-2 g0 g1 / dt) catches crossings between steps.
struct Target {
    std::function<double(std::span<const double>)> gap;
    bool bridge = false;
    /// Optional check on the segment between consecutive states.
    std::function<bool(std::span<const double>, std::span<const double>)> crossed;
};

/// {x[axis] >= level}, bridged.
Target halfspace_target(int axis, double level);
/// Arbitrary predicate, no bridge correction.
Target predicate_target(std::function<bool(std::span<const double>)> inside);
/// Never reached: paths run to the horizon.
Target no_target();

struct HitSamples {
    std::vector<PathStats> paths;  ///< ordered by path index
    std::size_t censored = 0;
    bool all_censored = false;
    std::uint64_t total_steps = 0;
    std::uint64_t total_violations = 0;

    std::vector<double> times() const;        ///< uncensored hitting times
    std::vector<bool> censor_flags() const;
};

/// Per-path first hitting times of target from start, censored at the horizon.
HitSamples hit_time(const SimConfig& config, const Point& start, const Target& target);

struct ExitSamples {
    std::vector<double> times;  ///< censored entries hold the horizon
    std::vector<bool> censored;
};

/// First exit times of (-r, r) for the 1-D OU process dX = dW - lambda X dt from 0,
/// Euler steps with a two-sided bridge correction.
ExitSamples exit_interval_ou_1d(double lambda, double r, double dt, std::size_t n_paths, std::uint64_t seed,
                                double horizon = 100.0, unsigned threads = 1);

struct ExpMoment {
    double estimate = 0.0;  ///< mean of exp(theta T); a lower estimate when censored paths are present
    double log_estimate = 0.0;
    double stderr_ = 0.0;
    bool divergence = false;  ///< estimate moves by a factor > 1.5 across a doubling of the subsample
    std::size_t censored = 0;
};

/// Plug-in E exp(theta T). Censored entries contribute exp(theta horizon) when censor_aware,
/// otherwise they are dropped. Evaluated in log space.
ExpMoment empirical_exp_moment(const std::vector<double>& times, const std::vector<bool>& censored, double theta,
                               bool censor_aware = true);

struct OccupationResult {
    std::vector<double> edges;      ///< radial bin edges (the last bin is open)
    std::vector<double> expected;   ///< probabilities under the restricted Gaussian
    std::vector<std::uint64_t> counts;  ///< radial bin x sector, row-major
    int sectors = 1;
    double chi2 = 0.0;
    double chi2_adjusted = 0.0;
    double autocorrelation = 0.0;  ///< lag-1, at the sampling interval
    int dof = 0;
    double p_value = 0.0;
    bool pass = false;
    std::uint64_t samples = 0;
    std::uint64_t inside_obstacle = 0;
};

/// Time-averaged occupation after a 20% burn-in, sampled every 1/lambda, against the
/// restricted Gaussian on equal-mass radial bins (times angular sectors in d = 2).
/// Available for isotropic domains (no obstacle, centered ball). pass iff p > 0.001.
OccupationResult occupation_test(const SimConfig& config, const Point& start, int radial_bins = 10,
                                 int sectors = 1);

struct FractionEstimate {
    double value = 0.0;
    double stderr_ = 0.0;  ///< from the spread across paths
};

/// Long-run fraction of time spent in a set, after a 20% burn-in.
FractionEstimate occupation_fraction(const SimConfig& config, const Point& start,
                                     const std::function<bool(std::span<const double>)>& inside);

/// Angle arccos((x1 - a) / |x - (a, 0)|) in [0, pi].
double rotation_angle(std::span<const double> x, double a);

struct RotationResult {
    HitSamples hits;                 ///< T_M per path
    double band = 0.0;               ///< tolerance band half-width for M
    std::vector<double> z_at;        ///< Z_{t ^ T_M} per path at t = probe_time
    double probe_time = 0.0;
    std::vector<double> z_series;    ///< Z along path 0, every stride steps
    std::size_t stride = 1;
};

/// Reflected OU in the planar shell r <= |x - (a,0)| <= r + q; T_M is the first entry into
/// M = {-r-q <= x1 - a <= -r, |x2| <= band} or a crossing of x2 = 0 behind the center.
RotationResult rotation_functional(const SimConfig& config, const Point& start, double probe_time = 1.0,
                                   std::size_t stride = 100);

struct KsResult {
    double statistic = 0.0;
    double p_value = 0.0;
    double critical_1pct = 0.0;  ///< 1.6276 / sqrt(n)
    bool pass = false;           ///< statistic below the 1% critical value
    std::size_t n = 0;
};

/// One-sample Kolmogorov-Smirnov test against a continuous CDF.
KsResult ks_test(std::vector<double> samples, const std::function<double(double)>& cdf);

/// One-sided two-sample statistic sup_t (F_a(t) - F_b(t)) with its asymptotic p-value
/// exp(-2 n_a n_b / (n_a + n_b) s^2); small p means a is stochastically smaller than b.
KsResult ks_one_sided(std::vector<double> a, std::vector<double> b);

}  // namespace oupinball
