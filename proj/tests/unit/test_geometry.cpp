#include <doctest.h>

#include <cmath>
#include <random>

#include "oupinball/error.hpp"
#include "oupinball/geometry.hpp"

using namespace oupinball;

namespace {

DomainSpec ball2(double a, double r) { return {2, 1.0, BallObstacle{{a, 0.0}, r}}; }

// Brute-force distance to a polygon boundary given by its vertex loop.
double poly_boundary_dist(const std::vector<std::array<double, 2>>& v, double px, double py) {
    double best = 1e300;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const auto& p = v[i];
        const auto& q = v[(i + 1) % v.size()];
        for (int k = 0; k <= 20000; ++k) {
            const double t = k / 20000.0;
            const double x = p[0] + t * (q[0] - p[0]), y = p[1] + t * (q[1] - p[1]);
            best = std::min(best, std::hypot(px - x, py - y));
        }
    }
    return best;
}

}  // namespace

TEST_CASE("ball membership and projection") {
    const auto spec = ball2(4.0, 1.0);
    CHECK(contains(spec, Point{0.0, 0.0}));
    CHECK_FALSE(contains(spec, Point{4.5, 0.0}));
    CHECK(contains(spec, Point{5.0, 0.0}));  // boundary belongs to D
    Point p = project_to_domain(spec.obstacle, Point{4.5, 0.0});
    CHECK(p[0] == doctest::Approx(5.0));
    CHECK(p[1] == doctest::Approx(0.0));
    Point q = project_to_domain(spec.obstacle, Point{4.0, 0.5});
    CHECK(q[0] == doctest::Approx(4.0));
    CHECK(q[1] == doctest::Approx(1.0));
    CHECK_THROWS_AS(project_to_domain(spec.obstacle, Point{4.0, 0.0}), ProjectionError);
    CHECK_THROWS_AS(contains(spec, Point{1.0}), InputError);
}

TEST_CASE("hypercube projection picks the nearest face, highest axis on ties") {
    const DomainSpec spec{2, 1.0, CubeObstacle{{5.0, 0.0}, 1.0}};
    Point p = project_to_domain(spec.obstacle, Point{5.5, 0.5});
    CHECK(p[0] == doctest::Approx(5.5));
    CHECK(p[1] == doctest::Approx(1.0));
    Point q = project_to_domain(spec.obstacle, Point{5.9, 0.2});
    CHECK(q[0] == doctest::Approx(6.0));
    CHECK(q[1] == doctest::Approx(0.2));
    Point n = inward_normal(spec.obstacle, Point{6.0, 1.0});
    CHECK(n[0] == doctest::Approx(1.0 / std::sqrt(2.0)));
    CHECK(n[1] == doctest::Approx(1.0 / std::sqrt(2.0)));
    CHECK(signed_distance(spec.obstacle, Point{7.0, 2.0}) == doctest::Approx(std::sqrt(2.0)));
    CHECK(signed_distance(spec.obstacle, Point{5.0, 0.0}) == doctest::Approx(-1.0));
}

TEST_CASE("trap notch belongs to the domain") {
    const DomainSpec spec{2, 1.0, TrapObstacle{5.0, 1.0}};
    CHECK(contains(spec, Point{5.5, 0.0}));
    CHECK_FALSE(contains(spec, Point{4.5, 0.0}));
    CHECK_FALSE(contains(spec, Point{5.5, 0.75}));
    CHECK(contains(spec, Point{6.5, 0.75}));
    CHECK_THROWS_AS((DomainSpec{3, 1.0, TrapObstacle{5.0, 1.0}}.validate()), InputError);
}

TEST_CASE("trap signed distance matches brute-force polygon distance") {
    const double y = 5.0, a = 1.0;
    const std::vector<std::array<double, 2>> v{{y - a, -a}, {y + a, -a}, {y + a, -a / 2}, {y, -a / 2},
                                               {y, a / 2},  {y + a, a / 2}, {y + a, a},  {y - a, a}};
    const TrapObstacle t{y, a};
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> ux(3.5, 6.5), uy(-1.5, 1.5);
    for (int i = 0; i < 200; ++i) {
        const double px = ux(rng), py = uy(rng);
        const double sd = signed_distance(t, Point{px, py});
        CHECK(std::abs(sd) == doctest::Approx(poly_boundary_dist(v, px, py)).epsilon(1e-3));
    }
}

TEST_CASE("projection lands on the boundary and is idempotent") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g(0.0, 1.0);
    const std::vector<DomainSpec> specs{ball2(1.0, 1.5),
                                        {2, 1.0, CubeObstacle{{0.5, 0.0}, 1.0}},
                                        {3, 1.0, CubeObstacle{{0.0, 0.0, 0.0}, 1.0}},
                                        {2, 1.0, TrapObstacle{0.5, 1.0}},
                                        {2, 1.0, ShellDomain{{0.0, 0.0}, 1.0, 2.0}}};
    for (const auto& spec : specs) {
        spec.validate();
        for (int i = 0; i < 2000; ++i) {
            Point x(spec.dim);
            for (double& v : x) v = 1.5 * g(rng);
            Point p = project_to_domain(spec.obstacle, x);
            CHECK(contains(spec, p));
            if (!contains(spec, x)) CHECK(std::abs(signed_distance(spec.obstacle, p)) <= 1e-12);
            Point pp = project_to_domain(spec.obstacle, p);
            for (int k = 0; k < spec.dim; ++k) CHECK(pp[k] == p[k]);
        }
    }
}

TEST_CASE("projection is the nearest boundary point for balls") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const BallObstacle b{{0.3, -0.2, 0.1}, 1.0};
    for (int i = 0; i < 500; ++i) {
        Point x{0.3 + 0.9 * u(rng), -0.2 + 0.9 * u(rng), 0.1 + 0.9 * u(rng)};
        if (signed_distance(b, x) >= 0) continue;
        const Point p = project_to_domain(b, x);
        const double d = std::sqrt((p[0] - x[0]) * (p[0] - x[0]) + (p[1] - x[1]) * (p[1] - x[1]) +
                                   (p[2] - x[2]) * (p[2] - x[2]));
        CHECK(d == doctest::Approx(-signed_distance(b, x)).epsilon(1e-12));
    }
}

TEST_CASE("rescaling to unit lambda preserves membership") {
    const DomainSpec spec{2, 4.0, BallObstacle{{1.0, 0.0}, 0.5}};
    const DomainSpec unit = rescale_to_unit_lambda(spec);
    const auto& b = std::get<BallObstacle>(unit.obstacle);
    CHECK(b.center[0] == doctest::Approx(2.0));
    CHECK(b.r == doctest::Approx(1.0));
    const DomainSpec back = rescale_to_lambda(unit, 4.0);
    CHECK(std::get<BallObstacle>(back.obstacle).r == doctest::Approx(0.5));
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int i = 0; i < 200; ++i) {
        Point x{u(rng), u(rng)};
        Point xs{2.0 * x[0], 2.0 * x[1]};
        CHECK(contains(spec, x) == contains(unit, xs));
    }
}

TEST_CASE("input validation") {
    CHECK_THROWS_AS((DomainSpec{2, -1.0, NoObstacle{}}.validate()), InputError);
    CHECK_THROWS_AS((DomainSpec{2, 1.0, BallObstacle{{0.0}, 1.0}}.validate()), InputError);
    CHECK_THROWS_AS((DomainSpec{2, 1.0, BallObstacle{{0.0, 0.0}, 0.0}}.validate()), InputError);
    CHECK_THROWS_AS((DomainSpec{2, 1.0, ShellDomain{{0.0, 0.0}, 2.0, 1.0}}.validate()), InputError);
    CHECK_THROWS_AS(inward_normal(BallObstacle{{0.0, 0.0}, 1.0}, Point{3.0, 0.0}), InputError);
}
