#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace oupinball {

using Point = std::vector<double>;

/// Free space: D = R^d.
struct NoObstacle {};

/// Open Euclidean ball B(center, r); D is its complement.
struct BallObstacle {
    Point center;
    double r = 0.0;
};

/// Open axis-aligned cube {|x_i - center_i| < r for all i}; D is its complement.
struct CubeObstacle {
    Point center;
    double r = 0.0;
};

/// Closed shell domain {r <= |x - center| <= R}. D is the shell itself.
struct ShellDomain {
    Point center;
    double r = 0.0;
    double R = 0.0;
};

/// Planar C-shaped trap centered at (y, 0) with outer half-width alpha and a
/// notch {y < x1 < y + alpha, |x2| < alpha/2} cut from its right side.
/// The trap body is removed from the plane; the notch belongs to D.
struct TrapObstacle {
    double y = 0.0;
    double alpha = 0.0;
};

using Obstacle = std::variant<NoObstacle, BallObstacle, CubeObstacle, ShellDomain, TrapObstacle>;

/// Gaussian measure exp(-lambda |x|^2) restricted to a domain in R^dim.
struct DomainSpec {
    int dim = 2;
    double lambda = 1.0;
    Obstacle obstacle = NoObstacle{};

    /// Throws InputError when the parameters are inconsistent.
    void validate() const;
};

std::string obstacle_kind(const Obstacle& o);

/// Characteristic length of the obstacle (radius, outer radius or alpha); 1 when absent.
double obstacle_scale(const Obstacle& o);

/// Radius of a ball around the origin containing the obstacle.
double obstacle_extent(const Obstacle& o);

/// Positive inside D, negative inside the removed set, zero on the boundary.
/// Exact Euclidean distance to the boundary for every obstacle kind.
double signed_distance(const Obstacle& o, std::span<const double> x);

/// Closed-domain membership test. Throws InputError on dimension mismatch.
bool contains(const DomainSpec& spec, std::span<const double> x);

/// Projects x onto the closure of D in place. Points already in D are left
/// untouched. Returns true when x moved. Throws ProjectionError when the
/// nearest boundary point is not unique in a degenerate way (ball center).
bool project_in_place(const Obstacle& o, std::span<double> x);

/// Copying variant of project_in_place.
Point project_to_domain(const Obstacle& o, std::span<const double> x);

/// Unit normal pointing into D at a boundary point. At corners the
/// normalized sum of adjacent face normals is returned. Throws InputError
/// when x is farther than tol from the boundary.
Point inward_normal(const Obstacle& o, std::span<const double> x, double tol = 1e-9);

/// Maps a domain to the equivalent one with lambda = 1, lengths scaled by sqrt(lambda).
DomainSpec rescale_to_unit_lambda(const DomainSpec& spec);

/// Same domain expressed at a different lambda (lengths scaled by sqrt(lambda/new_lambda)).
DomainSpec rescale_to_lambda(const DomainSpec& spec, double new_lambda);

}  // namespace oupinball
