#include "oupinball/spectral.hpp"

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include "oupinball/error.hpp"
#include "oupinball/special_functions.hpp"

namespace oupinball {

namespace {

using Vec = Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;

constexpr double kMaxExponent = 700.0;

SpMat symmetrized(const DiscreteOperator& op, double shift) {
    const std::size_t n = op.size();
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(2 * op.edges.size() + n);
    std::vector<double> diag(n, shift);
    for (const Edge& e : op.edges) {
        const double off = std::exp(e.log_w - 0.5 * (op.log_mass[e.i] + op.log_mass[e.j]));
        t.emplace_back(e.i, e.j, -off);
        t.emplace_back(e.j, e.i, -off);
        diag[e.i] += std::exp(e.log_w - op.log_mass[e.i]);
        diag[e.j] += std::exp(e.log_w - op.log_mass[e.j]);
    }
    for (std::size_t i = 0; i < n; ++i) t.emplace_back(i, i, diag[i]);
    SpMat S(n, n);
    S.setFromTriplets(t.begin(), t.end());
    return S;
}

Vec null_vector(const DiscreteOperator& op) {
    const double top = *std::max_element(op.log_mass.begin(), op.log_mass.end());
    Vec u(op.size());
    for (std::size_t i = 0; i < op.size(); ++i) u[i] = std::exp(0.5 * (op.log_mass[i] - top));
    return u / u.norm();
}

class ShiftedSolver {
public:
    ShiftedSolver(const SpMat& K, bool direct) : direct_(direct) {
        if (direct_) {
            ldlt_.compute(K);
            if (ldlt_.info() != Eigen::Success) throw EvaluationError("sparse factorization failed");
        } else {
            cg_.setTolerance(1e-12);
            cg_.setMaxIterations(20000);
            cg_.compute(K);
            if (cg_.info() != Eigen::Success) throw EvaluationError("preconditioner setup failed");
        }
    }

    Vec solve(const Vec& b) {
        if (direct_) return ldlt_.solve(b);
        Vec x = cg_.solve(b);
        if (cg_.info() != Eigen::Success) throw IterationLimit("conjugate gradient did not converge");
        return x;
    }

private:
    bool direct_;
    Eigen::SimplicialLDLT<SpMat> ldlt_;
    Eigen::ConjugateGradient<SpMat, Eigen::Lower | Eigen::Upper, Eigen::IncompleteCholesky<double, Eigen::Lower, Eigen::NaturalOrdering<int>>> cg_;
};

void project_out(Vec& v, const Vec& u) { v -= u.dot(v) * u; }

}  // namespace

double Grid::mass(std::size_t i) const { return std::exp(log_mass[i]); }

double Edge::w() const { return std::exp(log_w); }

Grid build_grid(const DomainSpec& spec, double h, const GridOptions& opt) {
    spec.validate();
    if (spec.dim != 2 && spec.dim != 3) throw InputError("grids are available for d = 2 and d = 3 only");
    if (!(h > 0.0) || !std::isfinite(h)) throw InputError("grid step must be positive");
    if (!(opt.box_factor >= 4.0)) throw InputError("box_factor must be at least 4");
    const int d = spec.dim;
    const double lam = spec.lambda;
    const double unit = 1.0 / std::sqrt(lam);
    double L = std::max(opt.box_factor * unit, obstacle_extent(spec.obstacle) + 0.5 * opt.box_factor * unit);
    L = std::min(L, std::sqrt(650.0 / lam));
    const auto per_axis = static_cast<long long>(std::ceil(2.0 * L / h - 1e-9));
    double full = 1.0;
    for (int k = 0; k < d; ++k) full *= double(per_axis);
    if (full > 4.0 * double(opt.max_cells) + 1e6) {
        throw CapacityError("grid of " + std::to_string(full) + " cells exceeds the budget",
                            h * std::pow(full / opt.max_cells, 1.0 / d) * 1.05);
    }
    Grid g;
    g.dim = d;
    g.lambda = lam;
    g.h = h;
    g.cells_per_axis = static_cast<int>(per_axis);
    g.half_width = 0.5 * per_axis * h;
    const double lo = -g.half_width;
    const std::size_t total = static_cast<std::size_t>(full);
    g.kept_index.assign(total, -1);
    const double logh = d * std::log(h);
    std::vector<double> x(d);
    std::vector<long long> idx(d, 0);
    for (std::size_t lin = 0; lin < total; ++lin) {
        std::size_t rem = lin;
        double r2 = 0.0;
        for (int k = d - 1; k >= 0; --k) {
            idx[k] = static_cast<long long>(rem % per_axis);
            rem /= per_axis;
            x[k] = lo + (idx[k] + 0.5) * h;
            r2 += x[k] * x[k];
        }
        if (lam * r2 > kMaxExponent) continue;
        if (!contains(spec, x)) continue;
        g.kept_index[lin] = static_cast<std::int64_t>(g.log_mass.size());
        g.centers.insert(g.centers.end(), x.begin(), x.end());
        g.log_mass.push_back(-lam * r2 + logh);
        if (g.log_mass.size() > opt.max_cells) {
            const double ratio = double(total) / double(lin + 1);
            throw CapacityError("kept cells exceed the budget of " + std::to_string(opt.max_cells),
                                h * std::pow(ratio * double(g.log_mass.size()) / opt.max_cells, 1.0 / d) * 1.05);
        }
    }
    if (g.log_mass.empty()) throw InputError("no grid cell lies in the domain");
    // Gaussian mass outside the box: 1 - erf(sqrt(lambda) L)^d
    const double er = std::erfc(std::sqrt(lam) * g.half_width);
    g.truncation = -std::expm1(d * std::log1p(-er));
    return g;
}

DiscreteOperator assemble(const Grid& g) {
    DiscreteOperator op;
    op.log_mass = g.log_mass;
    const int d = g.dim;
    const long long n = g.cells_per_axis;
    const double log_h2 = 2.0 * std::log(g.h);
    std::vector<long long> stride(d, 1);
    for (int k = d - 2; k >= 0; --k) stride[k] = stride[k + 1] * n;
    const std::size_t total = g.kept_index.size();
    for (std::size_t lin = 0; lin < total; ++lin) {
        const std::int64_t a = g.kept_index[lin];
        if (a < 0) continue;
        for (int k = 0; k < d; ++k) {
            const long long coord = (static_cast<long long>(lin) / stride[k]) % n;
            if (coord + 1 >= n) continue;
            const std::int64_t b = g.kept_index[lin + stride[k]];
            if (b < 0) continue;
            op.edges.push_back(Edge{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b),
                                    0.5 * (g.log_mass[a] + g.log_mass[b]) - log_h2});
        }
    }
    return op;
}

DiscreteOperator make_operator(const std::vector<double>& masses, const std::vector<Edge>& edges) {
    DiscreteOperator op;
    for (double m : masses) {
        if (!(m > 0.0)) throw InputError("masses must be positive");
        op.log_mass.push_back(std::log(m));
    }
    for (Edge e : edges) {
        if (e.i == e.j || e.i >= masses.size() || e.j >= masses.size()) throw InputError("bad edge");
        if (e.i > e.j) std::swap(e.i, e.j);
        op.edges.push_back(e);
    }
    return op;
}

std::size_t component_count(const DiscreteOperator& op) {
    const std::size_t n = op.size();
    std::vector<std::uint32_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0u);
    auto find = [&](std::uint32_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    std::size_t comps = n;
    for (const Edge& e : op.edges) {
        const auto a = find(e.i), b = find(e.j);
        if (a != b) parent[a] = b, --comps;
    }
    return comps;
}

double energy(const DiscreteOperator& op, const std::vector<double>& f) {
    if (f.size() != op.size()) throw InputError("function size does not match the operator");
    double q = 0.0;
    for (const Edge& e : op.edges) {
        const double df = f[e.i] - f[e.j];
        q += e.w() * df * df;
    }
    return q;
}

double weighted_variance(const DiscreteOperator& op, const std::vector<double>& f) {
    if (f.size() != op.size()) throw InputError("function size does not match the operator");
    double sm = 0.0, sf = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double m = std::exp(op.log_mass[i]);
        sm += m, sf += m * f[i];
    }
    const double mean = sf / sm;
    double v = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) v += std::exp(op.log_mass[i]) * (f[i] - mean) * (f[i] - mean);
    return v;
}

EigenResult second_eigenvalue(const DiscreteOperator& op, const EigenOptions& opt) {
    const std::size_t n = op.size();
    if (n < 2) throw InputError("operator needs at least two cells");
    if (component_count(op) != 1) throw DomainDisconnected("the kept cells are not connected");
    const SpMat S = symmetrized(op, 0.0);
    double shift = opt.shift;
    if (!(shift > 0.0)) shift = 1e-3 * S.diagonal().mean();
    SpMat K = S;
    for (std::size_t i = 0; i < n; ++i) K.coeffRef(i, i) += shift;
    // sparse LDLT fill is mild on planar lattices and ruinous on 3-D ones
    const bool planar = op.edges.size() <= 2.25 * double(n);
    ShiftedSolver solver(K, n <= 20000 || (planar && n <= opt.direct_limit));
    const Vec u = null_vector(op);

    std::mt19937_64 rng(0x5eedULL);
    std::normal_distribution<double> N01;
    Vec start(n);
    for (std::size_t i = 0; i < n; ++i) start[i] = N01(rng);

    const int m_max = std::max(4, std::min<int>(opt.max_iterations, static_cast<int>(n) - 1));
    EigenResult best;
    int total_iter = 0;
    for (int restart = 0; restart < 4; ++restart) {
        project_out(start, u);
        if (start.norm() == 0.0) throw EvaluationError("degenerate Lanczos start");
        std::vector<Vec> Q;
        std::vector<double> alpha, beta;
        Q.push_back(start / start.norm());
        Vec ritz;
        double theta = 0.0;
        for (int k = 0; k < m_max; ++k) {
            Vec w = solver.solve(Q[k]);
            project_out(w, u);
            const double a = Q[k].dot(w);
            alpha.push_back(a);
            // full reorthogonalization, twice
            for (int pass = 0; pass < 2; ++pass) {
                for (const Vec& q : Q) w -= q.dot(w) * q;
                project_out(w, u);
            }
            const double b = w.norm();
            ++total_iter;
            const int m = k + 1;
            const bool check = m >= 3 && (m % 3 == 0 || m == m_max || b < 1e-14 * std::abs(a));
            if (check) {
                Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m, m);
                for (int i = 0; i < m; ++i) {
                    T(i, i) = alpha[i];
                    if (i + 1 < m) T(i, i + 1) = T(i + 1, i) = beta[i];
                }
                Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
                theta = es.eigenvalues()[m - 1];
                const Eigen::VectorXd s = es.eigenvectors().col(m - 1);
                const double est = std::abs(b * s[m - 1]);
                if (est <= 1e-3 * opt.tol * theta || m == m_max || b < 1e-14 * std::abs(a)) {
                    ritz = Vec::Zero(n);
                    for (int i = 0; i < m; ++i) ritz += s[i] * Q[i];
                    break;
                }
            }
            if (b == 0.0) break;
            beta.push_back(b);
            Q.push_back(w / b);
        }
        if (ritz.size() == 0) continue;
        project_out(ritz, u);
        ritz.normalize();
        const Vec Sv = S * ritz;
        const double mu = ritz.dot(Sv);
        const double res = (Sv - mu * ritz).norm() / std::abs(mu);
        if (best.vector.empty() || res < best.residual) {
            best.value = mu;
            best.residual = res;
            best.vector.assign(n, 0.0);
            for (std::size_t i = 0; i < n; ++i) best.vector[i] = ritz[i] * std::exp(-0.5 * op.log_mass[i]);
        }
        best.iterations = total_iter;
        if (res <= opt.tol) break;
        start = ritz;
    }
    if (best.vector.empty() || !(best.residual <= opt.tol))
        throw IterationLimit("Lanczos did not reach the requested residual (" + std::to_string(best.residual) + ")");
    // unit m-norm eigenfunction f = M^{-1/2} v
    double nrm = 0.0;
    for (std::size_t i = 0; i < n; ++i) nrm += std::exp(op.log_mass[i]) * best.vector[i] * best.vector[i];
    nrm = std::sqrt(nrm);
    if (nrm > 0.0 && std::isfinite(nrm))
        for (double& v : best.vector) v /= nrm;
    return best;
}

PoincareEstimate richardson(const std::vector<double>& h, const std::vector<double>& values) {
    if (h.size() != values.size() || h.size() < 2) throw InputError("extrapolation needs at least two steps");
    std::vector<std::size_t> order(h.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return h[a] > h[b]; });
    PoincareEstimate out;
    for (auto i : order) out.h.push_back(h[i]), out.raw.push_back(values[i]);
    const std::size_t k = out.h.size();
    bool monotone = true;
    for (std::size_t i = 2; i < k; ++i) {
        const double d1 = out.raw[i - 1] - out.raw[i - 2], d2 = out.raw[i] - out.raw[i - 1];
        if (d1 * d2 < 0.0) monotone = false;
    }
    const double h1 = out.h[k - 2], h2 = out.h[k - 1];
    const double v1 = out.raw[k - 2], v2 = out.raw[k - 1];
    if (!monotone) {
        double spread = 0.0;
        for (double v : out.raw) spread = std::max(spread, std::abs(v - v2));
        out.value = v2;
        out.error_bar = 2.0 * spread;
        out.warning = true;
        out.message = "non-monotone refinement sequence; finest value returned with inflated error bar";
        return out;
    }
    out.value = (h1 * v2 - h2 * v1) / (h1 - h2);
    out.error_bar = std::abs(v2 - out.value);
    return out;
}

PoincareEstimate poincare_estimate(const DomainSpec& spec, const std::vector<double>& h_list,
                                   const GridOptions& grid_options, const EigenOptions& eigen_options) {
    if (h_list.size() < 2) throw InputError("need at least two grid steps");
    std::vector<double> vals, hs;
    std::vector<std::size_t> cells;
    for (double h : h_list) {
        const Grid g = build_grid(spec, h, grid_options);
        const DiscreteOperator op = assemble(g);
        const EigenResult e = second_eigenvalue(op, eigen_options);
        hs.push_back(h);
        vals.push_back(1.0 / e.value);
        cells.push_back(g.size());
    }
    PoincareEstimate out = richardson(hs, vals);
    std::vector<std::size_t> order(hs.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return hs[a] > hs[b]; });
    for (auto i : order) out.cells.push_back(cells[i]);
    return out;
}

namespace {

struct Tridiag {
    std::vector<double> diag, off;  // off[i] couples i and i+1
};

// Number of eigenvalues below x (Sturm sequence through the LDL^T pivots).
int sturm_count(const Tridiag& t, double x) {
    int count = 0;
    double q = t.diag[0] - x;
    if (q < 0) ++count;
    for (std::size_t i = 1; i < t.diag.size(); ++i) {
        if (q == 0.0) q = 1e-300;
        q = t.diag[i] - x - t.off[i - 1] * t.off[i - 1] / q;
        if (q < 0) ++count;
    }
    return count;
}

double kth_eigenvalue(const Tridiag& t, int k) {
    double hi = 0.0;
    for (std::size_t i = 0; i < t.diag.size(); ++i) {
        const double rad = (i > 0 ? std::abs(t.off[i - 1]) : 0.0) + (i + 1 < t.diag.size() ? std::abs(t.off[i]) : 0.0);
        hi = std::max(hi, t.diag[i] + rad);
    }
    double lo = 0.0;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (sturm_count(t, mid) > k) hi = mid;
        else lo = mid;
    }
    return 0.5 * (lo + hi);
}

// gap0 (second eigenvalue, l = 0) and gap1 (first eigenvalue, l = 1) on N cells.
std::pair<double, double> radial_gaps(int d, double lambda, double r, int N) {
    const double peak = std::max(r, std::sqrt((d - 1) / (2.0 * lambda)));
    const double top = peak + 10.0 / std::sqrt(lambda);
    const double delta = (top - r) / N;
    auto logw = [&](double rho) { return (d - 1) * std::log(rho) - lambda * rho * rho; };
    std::vector<double> lW(N), rho(N);
    for (int i = 0; i < N; ++i) {
        rho[i] = r + (i + 0.5) * delta;
        lW[i] = logw(rho[i]) + std::log(delta);
    }
    Tridiag t0;
    t0.diag.assign(N, 0.0);
    t0.off.assign(N - 1, 0.0);
    for (int i = 0; i + 1 < N; ++i) {
        const double lc = logw(r + (i + 1) * delta) - std::log(delta);
        t0.off[i] = -std::exp(lc - 0.5 * (lW[i] + lW[i + 1]));
        t0.diag[i] += std::exp(lc - lW[i]);
        t0.diag[i + 1] += std::exp(lc - lW[i + 1]);
    }
    Tridiag t1 = t0;
    for (int i = 0; i < N; ++i) t1.diag[i] += (d - 1) / (rho[i] * rho[i]);
    return {kth_eigenvalue(t0, 1), kth_eigenvalue(t1, 0)};
}

// Extrapolate three values at N, 2N, 4N with the observed order.
std::pair<double, double> extrapolate3(double v1, double v2, double v3) {
    const double d1 = v2 - v1, d2 = v3 - v2;
    if (std::abs(d2) <= 1e-15 * std::abs(v3) || d1 * d2 <= 0.0) return {v3, std::abs(d2) + 1e-14 * std::abs(v3)};
    double p = std::log2(std::abs(d1 / d2));
    p = std::clamp(p, 0.5, 4.0);
    const double ext = v3 + d2 / (std::exp2(p) - 1.0);
    return {ext, std::abs(ext - v3) + 1e-14 * std::abs(v3)};
}

}  // namespace

RadialOracle radial_gap_oracle(int d, double lambda, double r, int base_cells) {
    if (d < 2 || !(lambda > 0.0) || !(r >= 0.0)) throw InputError("radial oracle needs d >= 2, lambda > 0, r >= 0");
    if (base_cells < 50) throw InputError("radial oracle needs at least 50 cells");
    const auto a = radial_gaps(d, lambda, r, base_cells);
    const auto b = radial_gaps(d, lambda, r, 2 * base_cells);
    const auto c = radial_gaps(d, lambda, r, 4 * base_cells);
    const auto g0 = extrapolate3(a.first, b.first, c.first);
    const auto g1 = extrapolate3(a.second, b.second, c.second);
    RadialOracle out;
    out.gap0 = g0.first;
    out.gap1 = g1.first;
    const bool use0 = g0.first < g1.first;
    const double gap = use0 ? g0.first : g1.first;
    const double err = use0 ? g0.second : g1.second;
    out.value = 1.0 / gap;
    out.error = err / (gap * gap);
    return out;
}

BoundReport rayleigh_certificate(const DiscreteOperator& op, const std::vector<double>& f) {
    const double var = weighted_variance(op, f);
    const double q = energy(op, f);
    if (!(var > 0.0)) throw InputError("test function is constant on the kept cells");
    if (!(q > 0.0)) throw Error("zero energy for a non-constant function on a connected operator");
    BoundReport b;
    b.anchor = "rayleigh.lower";
    b.side = Side::lower;
    b.value = b.coefficient = var / q;
    b.applicable = true;
    b.condition = "up to discretization";
    return b;
}

std::vector<double> sample(const Grid& grid, const std::function<double(const double*)>& f) {
    std::vector<double> out(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) out[i] = f(&grid.centers[i * grid.dim]);
    return out;
}

namespace {

template <class T>
void put(std::ofstream& os, T v) {
    static_assert(std::endian::native == std::endian::little, "dump format is little-endian");
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::ifstream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw InputError("truncated operator dump");
    return v;
}

}  // namespace

void write_dump(const DiscreteOperator& op, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InputError("cannot open " + path);
    os.write("OUPB1", 5);
    put<std::uint64_t>(os, op.size());
    put<std::uint64_t>(os, op.edges.size());
    for (double lm : op.log_mass) put<double>(os, std::exp(lm));
    for (const Edge& e : op.edges) {
        put<std::uint64_t>(os, e.i);
        put<std::uint64_t>(os, e.j);
        put<double>(os, e.w());
    }
}

DiscreteOperator read_dump(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw InputError("cannot open " + path);
    char magic[5];
    is.read(magic, 5);
    if (!is || std::memcmp(magic, "OUPB1", 5) != 0) throw InputError("not an OUPB1 dump");
    const auto n = get<std::uint64_t>(is);
    const auto m = get<std::uint64_t>(is);
    DiscreteOperator op;
    op.log_mass.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) op.log_mass.push_back(std::log(get<double>(is)));
    for (std::uint64_t k = 0; k < m; ++k) {
        Edge e;
        e.i = static_cast<std::uint32_t>(get<std::uint64_t>(is));
        e.j = static_cast<std::uint32_t>(get<std::uint64_t>(is));
        e.log_w = std::log(get<double>(is));
        op.edges.push_back(e);
    }
    return op;
}

}  // namespace oupinball
