#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>

#include "oupinball/error.hpp"
#include "oupinball/spectral.hpp"

using namespace oupinball;

namespace {

// Generalized dense problem L f = mu M f, solved without any symmetrization or deflation.
double dense_gap(const std::vector<double>& m, const std::vector<Edge>& edges) {
    const int n = static_cast<int>(m.size());
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n), M = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) M(i, i) = m[i];
    for (const Edge& e : edges) {
        const double w = std::exp(e.log_w);
        L(e.i, e.i) += w, L(e.j, e.j) += w;
        L(e.i, e.j) -= w, L(e.j, e.i) -= w;
    }
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(L, M, Eigen::EigenvaluesOnly);
    return es.eigenvalues()[1];
}

std::vector<double> unit(std::size_t n) { return std::vector<double>(n, 1.0); }

}  // namespace

TEST_CASE("two-cell toy quotient") {
    const auto op = make_operator({1.0, 1.0}, {Edge{0, 1, 0.0}});
    CHECK(energy(op, {0.0, 1.0}) == 1.0);
    CHECK(weighted_variance(op, {0.0, 1.0}) == 0.5);
    CHECK(energy(op, {3.0, 3.0}) == 0.0);
    CHECK(second_eigenvalue(op).value == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("three-cell path graph against the dense oracle") {
    const std::vector<Edge> e{{0, 1, 0.0}, {1, 2, 0.0}};
    const auto op = make_operator(unit(3), e);
    const double ref = dense_gap(unit(3), e);
    CHECK(ref == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(second_eigenvalue(op).value == doctest::Approx(ref).epsilon(1e-10));
}

TEST_CASE("Lanczos agrees with the dense oracle on random operators") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int k = 0; k < 20; ++k) {
        const int n = 50 + int(U(rng) * 1950);
        std::vector<double> m(n);
        for (double& x : m) x = std::exp(-6 * U(rng));
        std::vector<Edge> edges;
        for (int i = 1; i < n; ++i) {
            const auto j = static_cast<std::uint32_t>(U(rng) * i);
            edges.push_back(Edge{j, static_cast<std::uint32_t>(i), std::log(0.1 + 10 * U(rng))});
        }
        for (int extra = 0; extra < n / 2; ++extra) {
            auto a = static_cast<std::uint32_t>(U(rng) * n), b = static_cast<std::uint32_t>(U(rng) * n);
            if (a == b) continue;
            edges.push_back(Edge{a, b, std::log(0.1 + 10 * U(rng))});
        }
        const double ref = dense_gap(m, edges);
        const auto res = second_eigenvalue(make_operator(m, edges));
        CHECK(res.residual <= 1e-8);
        CHECK(std::abs(res.value - ref) <= 1e-8 * ref);
    }
}

TEST_CASE("disconnected operator is rejected") {
    const auto op = make_operator(unit(4), {Edge{0, 1, 0.0}, Edge{2, 3, 0.0}});
    CHECK(component_count(op) == 2);
    CHECK_THROWS_AS(second_eigenvalue(op), DomainDisconnected);
}

TEST_CASE("thin shell disconnects the kept cells") {
    // ring of width h/2: lattice centers inside it are not face neighbors everywhere
    const DomainSpec thin{2, 1.0, ShellDomain{{0.0, 0.0}, 3.0, 3.05}};
    const auto op = assemble(build_grid(thin, 0.1));
    CHECK(component_count(op) > 1);
    CHECK_THROWS_AS(second_eigenvalue(op), DomainDisconnected);
    const DomainSpec thick{2, 1.0, ShellDomain{{0.0, 0.0}, 1.0, 3.0}};
    CHECK(component_count(assemble(build_grid(thick, 0.1))) == 1);
}

TEST_CASE("free Gaussian grid counts and truncation") {
    const DomainSpec spec{2, 1.0, NoObstacle{}};
    const auto g = build_grid(spec, 0.1);
    CHECK(g.cells_per_axis == 120);
    CHECK(g.size() == 120 * 120);
    CHECK(g.half_width == doctest::Approx(6.0).epsilon(1e-12));
    // mass outside [-6,6]^2 relative to pi: 1 - erf(6)^2
    CHECK(g.truncation <= 1e-8);
    const auto op = assemble(g);
    CHECK(op.edges.size() == 2u * 119u * 120u);
    for (const auto& e : op.edges) CHECK(e.i < e.j);
}

TEST_CASE("kept fraction of a centered disc") {
    const DomainSpec spec{2, 1.0, BallObstacle{{0.0, 0.0}, 1.0}};
    const double h = 0.05;
    const auto g = build_grid(spec, h);
    // count lattice centers inside the unit disc directly
    const int n = g.cells_per_axis;
    long inside = 0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double x = -g.half_width + (i + 0.5) * h, y = -g.half_width + (j + 0.5) * h;
            if (x * x + y * y < 1.0) ++inside;
        }
    CHECK(long(g.size()) >= long(n) * n - inside - 4 * n);
    CHECK(long(g.size()) <= long(n) * n - inside + 4 * n);
    CHECK(double(inside) * h * h == doctest::Approx(M_PI).epsilon(0.02));
}

TEST_CASE("Rayleigh quotient of x1 on the free Gaussian") {
    const DomainSpec spec{2, 1.0, NoObstacle{}};
    const auto g = build_grid(spec, 0.05);
    const auto op = assemble(g);
    const auto f = sample(g, [](const double* x) { return x[0]; });
    // continuum: Var = 1/2, energy = 1 per unit normalized mass
    CHECK(energy(op, f) / weighted_variance(op, f) == doctest::Approx(2.0).epsilon(0.02));
    const auto cert = rayleigh_certificate(op, f);
    CHECK(cert.anchor == "rayleigh.lower");
    CHECK(cert.value == doctest::Approx(0.5).epsilon(0.02));
    CHECK_THROWS_AS(rayleigh_certificate(op, std::vector<double>(g.size(), 1.0)), InputError);
}

TEST_CASE("sum test function on the centered ball") {
    const DomainSpec spec{2, 1.0, BallObstacle{{0.0, 0.0}, 2.0}};
    const auto g = build_grid(spec, 0.05);
    const auto op = assemble(g);
    const auto f = sample(g, [](const double* x) { return x[0] + x[1]; });
    CHECK(rayleigh_certificate(op, f).value >= 2.0 - 0.1);
}

TEST_CASE("free Gaussian eigenvalue") {
    const DomainSpec spec{2, 1.0, NoObstacle{}};
    const auto r = second_eigenvalue(assemble(build_grid(spec, 0.1)));
    CHECK(r.residual <= 1e-8);
    CHECK(r.value == doctest::Approx(2.0).epsilon(0.02));
    // eigenfunction has unit m-norm
    const auto g = build_grid(spec, 0.1);
    double s = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) s += g.mass(i) * r.vector[i] * r.vector[i];
    CHECK(s == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("enlarging the box changes little") {
    const DomainSpec spec{2, 1.0, BallObstacle{{1.0, 0.0}, 0.5}};
    GridOptions a, b;
    a.box_factor = 6.0;
    b.box_factor = 8.0;
    const double va = second_eigenvalue(assemble(build_grid(spec, 0.1, a))).value;
    const double vb = second_eigenvalue(assemble(build_grid(spec, 0.1, b))).value;
    CHECK(va == doctest::Approx(vb).epsilon(1e-7));
}

TEST_CASE("capacity error suggests a coarser step") {
    const DomainSpec spec{3, 1.0, NoObstacle{}};
    GridOptions opt;
    opt.max_cells = 10000;
    try {
        build_grid(spec, 0.1, opt);
        FAIL("expected CapacityError");
    } catch (const CapacityError& e) {
        CHECK(e.suggested_h() > 0.1);
        const auto g = build_grid(spec, e.suggested_h(), opt);
        CHECK(g.size() <= 10000u);
    }
    CHECK_THROWS_AS(build_grid(spec, 0.1, GridOptions{3.0, 100}), InputError);
    CHECK_THROWS_AS(build_grid(DomainSpec{4, 1.0, NoObstacle{}}, 0.5), InputError);
}

TEST_CASE("Richardson extrapolation") {
    // v(h) = 0.5 + 0.3 h is recovered exactly
    auto e = richardson({0.05, 0.2, 0.1}, {0.515, 0.56, 0.53});
    CHECK(e.value == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(e.error_bar == doctest::Approx(0.015).epsilon(1e-9));
    CHECK_FALSE(e.warning);
    CHECK(e.h.front() == 0.2);
    e = richardson({0.2, 0.1, 0.05}, {0.56, 0.50, 0.53});
    CHECK(e.warning);
    CHECK(e.value == 0.53);
    CHECK(e.error_bar >= 0.03);
    CHECK_THROWS_AS(richardson({0.1}, {0.5}), InputError);
}

TEST_CASE("radial oracle on the free Gaussian") {
    for (int d : {2, 3, 5}) {
        const auto o = radial_gap_oracle(d, 1.0, 0.0);
        CHECK(o.gap0 == doctest::Approx(4.0).epsilon(1e-6));
        CHECK(o.gap1 == doctest::Approx(2.0).epsilon(1e-6));
        CHECK(o.value == doctest::Approx(0.5).epsilon(1e-6));
        CHECK(o.error < 1e-5);
    }
    const auto s = radial_gap_oracle(2, 4.0, 0.0);
    CHECK(s.value == doctest::Approx(0.125).epsilon(1e-6));
}

TEST_CASE("radial oracle for centered balls") {
    const auto o = radial_gap_oracle(2, 1.0, 2.0);
    CHECK(o.value >= 2.0);
    CHECK(o.value <= 5.0);
    // the radial sector alone is log-concave with constant at most 1/2lambda
    for (double r : {0.5, 1.0, 2.0, 3.0}) CHECK(1.0 / radial_gap_oracle(3, 1.0, r).gap0 <= 0.5 + 1e-9);
    // homogeneity
    const auto a = radial_gap_oracle(3, 4.0, 0.5), b = radial_gap_oracle(3, 1.0, 1.0);
    CHECK(a.value == doctest::Approx(b.value / 4).epsilon(1e-7));
}

TEST_CASE("operator dump round trip") {
    const DomainSpec spec{2, 1.0, BallObstacle{{0.5, 0.0}, 1.0}};
    const auto op = assemble(build_grid(spec, 0.3));
    const auto path = (std::filesystem::temp_directory_path() / "oupinball_dump_test.bin").string();
    write_dump(op, path);
    const auto back = read_dump(path);
    std::remove(path.c_str());
    REQUIRE(back.size() == op.size());
    REQUIRE(back.edges.size() == op.edges.size());
    for (std::size_t i = 0; i < op.size(); ++i) CHECK(back.log_mass[i] == doctest::Approx(op.log_mass[i]).epsilon(1e-14));
    for (std::size_t k = 0; k < op.edges.size(); ++k) {
        CHECK(back.edges[k].i == op.edges[k].i);
        CHECK(back.edges[k].j == op.edges[k].j);
    }
    CHECK(second_eigenvalue(back).value == doctest::Approx(second_eigenvalue(op).value).epsilon(1e-10));
    CHECK_THROWS_AS(read_dump(path), InputError);
}
