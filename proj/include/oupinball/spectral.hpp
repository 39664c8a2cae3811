#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "oupinball/analytic_bounds.hpp"
#include "oupinball/geometry.hpp"

namespace oupinball {

/// Uniform cell-centered grid over a box, restricted to cells whose center lies in D.
struct Grid {
    int dim = 2;
    double lambda = 1.0;
    double h = 0.0;
    double half_width = 0.0;     ///< box is [-half_width, half_width]^d
    int cells_per_axis = 0;
    std::vector<std::int64_t> kept_index;  ///< full lattice index -> kept index, -1 when dropped
    std::vector<double> centers;           ///< kept cell centers, row-major (n x dim)
    std::vector<double> log_mass;          ///< -lambda |x|^2 + d log h
    double truncation = 0.0;               ///< Gaussian mass outside the box relative to the total

    std::size_t size() const { return log_mass.size(); }
    double mass(std::size_t i) const;
};

struct GridOptions {
    double box_factor = 6.0;           ///< half-width in units of 1/sqrt(lambda)
    std::size_t max_cells = 2'000'000;  ///< CapacityError beyond this
};

/// Box half-width max(box_factor/sqrt(lambda), obstacle extent + box_factor/(2 sqrt(lambda))), rounded up to whole cells.
/// Throws CapacityError with a suggested step when the kept cells exceed max_cells.
Grid build_grid(const DomainSpec& spec, double h, const GridOptions& options = {});

struct Edge {
    std::uint32_t i = 0;
    std::uint32_t j = 0;
    double log_w = 0.0;  ///< log of the weight; masses far in the tail would underflow otherwise

    double w() const;
};

/// Weighted graph realizing Q(f) = sum w_ij (f_i - f_j)^2 and Var_m(f) = sum m_i (f_i - mean)^2.
struct DiscreteOperator {
    std::vector<double> log_mass;
    std::vector<Edge> edges;  ///< i < j

    std::size_t size() const { return log_mass.size(); }
};

/// Geometric-mean face weights sqrt(m_i m_j)/h^2 between axis neighbors that are both kept.
DiscreteOperator assemble(const Grid& grid);

/// Operator from explicit masses and weights (toy problems, tests).
DiscreteOperator make_operator(const std::vector<double>& masses, const std::vector<Edge>& edges);

/// Number of connected components of the edge graph.
std::size_t component_count(const DiscreteOperator& op);

double energy(const DiscreteOperator& op, const std::vector<double>& f);
double weighted_variance(const DiscreteOperator& op, const std::vector<double>& f);

struct EigenOptions {
    double tol = 1e-8;
    int max_iterations = 150;
    double shift = 0.0;          ///< 0 picks a default from the diagonal
    std::size_t direct_limit = 400'000;  ///< sparse LDLT for planar graphs up to this size, preconditioned CG otherwise
};

struct EigenResult {
    double value = 0.0;     ///< smallest nonzero eigenvalue of Q relative to Var_m
    double residual = 0.0;  ///< |S v - value v| / (value |v|) for the symmetrized operator
    int iterations = 0;
    std::vector<double> vector;  ///< eigenfunction on the cells, unit m-norm
};

/// Shift-invert Lanczos with full reorthogonalization on M^{-1/2} L M^{-1/2}, constant mode deflated.
/// Throws DomainDisconnected or IterationLimit.
EigenResult second_eigenvalue(const DiscreteOperator& op, const EigenOptions& options = {});

struct PoincareEstimate {
    double value = 0.0;
    double error_bar = 0.0;
    bool warning = false;
    std::string message;
    std::vector<double> h;
    std::vector<double> raw;  ///< 1/lambda_1 per grid step
    std::vector<std::size_t> cells;
};

/// Richardson extrapolation of 1/lambda_1(h), first order in h, over the two finest steps.
PoincareEstimate poincare_estimate(const DomainSpec& spec, const std::vector<double>& h_list,
                                   const GridOptions& grid_options = {}, const EigenOptions& eigen_options = {});

/// Extrapolation step on its own: values at decreasing steps h.
PoincareEstimate richardson(const std::vector<double>& h, const std::vector<double>& values);

struct RadialOracle {
    double value = 0.0;   ///< C_P = 1 / min(gap0, gap1)
    double error = 0.0;
    double gap0 = 0.0;    ///< second Neumann eigenvalue of the radial operator
    double gap1 = 0.0;    ///< first eigenvalue with the l = 1 angular term
};

/// C_P for a ball of radius r centered at the origin (r = 0: no obstacle) from 1-D radial problems.
RadialOracle radial_gap_oracle(int d, double lambda, double r, int base_cells = 2000);

/// Var_m(f) / Q(f) as a lower report for C_P (up to discretization).
BoundReport rayleigh_certificate(const DiscreteOperator& op, const std::vector<double>& f);

/// Function values at the kept cell centers.
std::vector<double> sample(const Grid& grid, const std::function<double(const double*)>& f);

/// Little-endian dump: "OUPB1", u64 n, u64 edge count, f64 masses[n], then per edge u64 i, u64 j, f64 w.
void write_dump(const DiscreteOperator& op, const std::string& path);
DiscreteOperator read_dump(const std::string& path);

}  // namespace oupinball
