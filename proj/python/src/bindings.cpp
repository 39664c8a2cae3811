#include <pybind11/functional.h>
#include <pybind11/stl.h>

#include "oupinball/analytic_bounds.hpp"
#include "oupinball/error.hpp"
#include "oupinball/isoperimetry.hpp"
#include "oupinball/simulator.hpp"
#include "oupinball/special_functions.hpp"
#include "oupinball/spectral.hpp"

namespace py = pybind11;
using namespace oupinball;

namespace {

Target make_target(std::optional<std::pair<int, double>> halfspace) {
    if (!halfspace) return no_target();
    return halfspace_target(halfspace->first, halfspace->second);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Poincare constants and reflected Ornstein-Uhlenbeck simulation outside obstacles";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
    py::register_exception<ProjectionError>(m, "ProjectionError", base.ptr());
    py::register_exception<EvaluationError>(m, "EvaluationError", PyExc_ArithmeticError);
    py::register_exception<NotFound>(m, "NotFound", base.ptr());
    py::register_exception<DomainDisconnected>(m, "DomainDisconnected", base.ptr());
    py::register_exception<IterationLimit>(m, "IterationLimit", base.ptr());
    py::register_exception<CapacityError>(m, "CapacityError", base.ptr());
    py::register_exception<SimulationError>(m, "SimulationError", base.ptr());

    // geometry
    py::class_<NoObstacle>(m, "NoObstacle").def(py::init<>());
    py::class_<BallObstacle>(m, "BallObstacle")
        .def(py::init([](Point c, double r) { return BallObstacle{std::move(c), r}; }), py::arg("center"), py::arg("r"))
        .def_readwrite("center", &BallObstacle::center)
        .def_readwrite("r", &BallObstacle::r);
    py::class_<CubeObstacle>(m, "CubeObstacle")
        .def(py::init([](Point c, double r) { return CubeObstacle{std::move(c), r}; }), py::arg("center"), py::arg("r"))
        .def_readwrite("center", &CubeObstacle::center)
        .def_readwrite("r", &CubeObstacle::r);
    py::class_<ShellDomain>(m, "ShellDomain")
        .def(py::init([](Point c, double r, double R) { return ShellDomain{std::move(c), r, R}; }), py::arg("center"),
             py::arg("r"), py::arg("R"))
        .def_readwrite("center", &ShellDomain::center)
        .def_readwrite("r", &ShellDomain::r)
        .def_readwrite("R", &ShellDomain::R);
    py::class_<TrapObstacle>(m, "TrapObstacle")
        .def(py::init([](double y, double a) { return TrapObstacle{y, a}; }), py::arg("y"), py::arg("alpha"))
        .def_readwrite("y", &TrapObstacle::y)
        .def_readwrite("alpha", &TrapObstacle::alpha);

    py::class_<DomainSpec>(m, "DomainSpec")
        .def(py::init([](int dim, double lam, Obstacle o) {
                 DomainSpec s{dim, lam, std::move(o)};
                 s.validate();
                 return s;
             }),
             py::arg("dim"), py::arg("lam") = 1.0, py::arg("obstacle") = NoObstacle{})
        .def_readonly("dim", &DomainSpec::dim)
        .def_readonly("lam", &DomainSpec::lambda)
        .def_readonly("obstacle", &DomainSpec::obstacle)
        .def("contains", [](const DomainSpec& s, Point x) { return contains(s, x); });
    m.def("signed_distance", [](const Obstacle& o, Point x) { return signed_distance(o, x); });
    m.def("project_to_domain", [](const Obstacle& o, Point x) { return project_to_domain(o, x); });
    m.def("rescale_to_unit_lambda", &rescale_to_unit_lambda);

    // special functions
    m.def("kummer_m_half", &kummer_m_half, py::arg("a"), py::arg("z"));
    m.def("exit_time_laplace", &exit_time_laplace, py::arg("theta"), py::arg("lam"), py::arg("r"));
    py::class_<ExitThreshold>(m, "ExitThreshold")
        .def_readonly("beta", &ExitThreshold::beta)
        .def_readonly("bracket_lo", &ExitThreshold::bracket_lo)
        .def_readonly("bracket_hi", &ExitThreshold::bracket_hi)
        .def_readonly("residual", &ExitThreshold::residual);
    m.def("exit_moment_threshold", &exit_moment_threshold, py::arg("lam"), py::arg("r"));
    m.def("gaussian_tail", &gaussian_tail, py::arg("b"), py::arg("c") = std::numeric_limits<double>::infinity());
    m.def("radial_gaussian_mass", &radial_gaussian_mass, py::arg("d"), py::arg("lam"), py::arg("rho"));
    m.def("ou_hitting_cdf", &ou_hitting_cdf, py::arg("t"), py::arg("b"));
    m.def("brownian_exit_moment", &brownian_exit_moment, py::arg("theta"), py::arg("r"));

    // analytic bounds
    py::class_<BoundReport>(m, "BoundReport")
        .def_readonly("anchor", &BoundReport::anchor)
        .def_property_readonly("side", [](const BoundReport& b) { return to_string(b.side); })
        .def_property_readonly("quantity", [](const BoundReport& b) { return to_string(b.quantity); })
        .def_readonly("value", &BoundReport::value)
        .def_readonly("applicable", &BoundReport::applicable)
        .def_readonly("is_explicit", &BoundReport::is_explicit)
        .def_readonly("disputed", &BoundReport::disputed)
        .def_property_readonly("certified", &BoundReport::certified)
        .def_readonly("condition", &BoundReport::condition)
        .def_readonly("note", &BoundReport::note)
        .def("__repr__", [](const BoundReport& b) { return "<BoundReport " + b.anchor + " = " + std::to_string(b.value) + ">"; });
    py::class_<CenteredBounds>(m, "CenteredBounds")
        .def_readonly("lower", &CenteredBounds::lower)
        .def_readonly("upper", &CenteredBounds::upper)
        .def_readonly("upper_safe", &CenteredBounds::upper_safe);
    m.def("centered_bounds", &centered_bounds, py::arg("lam"), py::arg("d"), py::arg("r"));
    py::class_<AggregateOptions>(m, "AggregateOptions")
        .def(py::init<>())
        .def_readwrite("universal_constant", &AggregateOptions::universal_constant)
        .def_readwrite("eps", &AggregateOptions::eps)
        .def_readwrite("c_min", &AggregateOptions::c_min);
    py::class_<BoundCatalogue>(m, "BoundCatalogue")
        .def_readonly("reports", &BoundCatalogue::reports)
        .def_readonly("best_explicit_upper", &BoundCatalogue::best_explicit_upper)
        .def_readonly("best_explicit_lower", &BoundCatalogue::best_explicit_lower)
        .def_readonly("best_upper_anchor", &BoundCatalogue::best_upper_anchor)
        .def_readonly("best_lower_anchor", &BoundCatalogue::best_lower_anchor)
        .def_readonly("ordered", &BoundCatalogue::ordered)
        .def_readonly("findings", &BoundCatalogue::findings);
    m.def("aggregate", &aggregate, py::arg("spec"), py::arg("options") = AggregateOptions{});

    // isoperimetry
    py::class_<ShadowSet>(m, "ShadowSet")
        .def(py::init([](double a, double r, std::optional<double> u) { return ShadowSet{a, r, u.value_or(r)}; }),
             py::arg("a"), py::arg("r"), py::arg("u") = py::none());
    py::class_<CapSet>(m, "CapSet")
        .def(py::init([](double a, double r, std::optional<double> u) { return CapSet{a, r, u.value_or(r)}; }),
             py::arg("a"), py::arg("r"), py::arg("u") = py::none());
    py::class_<TrapInnerSet>(m, "TrapInnerSet")
        .def(py::init([](double y, double a) { return TrapInnerSet{y, a}; }), py::arg("y"), py::arg("alpha"));
    py::class_<TrapNotchSet>(m, "TrapNotchSet")
        .def(py::init([](double y, double a) { return TrapNotchSet{y, a}; }), py::arg("y"), py::arg("alpha"));
    py::class_<HalfSpaceSet>(m, "HalfSpaceSet").def(py::init([](double t) { return HalfSpaceSet{t}; }), py::arg("t"));
    py::class_<CheegerRatio>(m, "CheegerRatio")
        .def_readonly("ratio", &CheegerRatio::ratio)
        .def_readonly("mass", &CheegerRatio::mass)
        .def_readonly("surface", &CheegerRatio::surface)
        .def_readonly("complement_used", &CheegerRatio::complement_used);
    m.def("cheeger_ratio", &cheeger_ratio, py::arg("spec"), py::arg("set"));
    m.def("domain_mass", &domain_mass, py::arg("spec"));
    m.def("shadow_ratio_lower", &shadow_ratio_lower, py::arg("lam"), py::arg("d"), py::arg("r"));
    py::class_<TrapBound>(m, "TrapBound")
        .def_readonly("report", &TrapBound::report)
        .def_readonly("ratio", &TrapBound::ratio)
        .def_readonly("chain_holds", &TrapBound::chain_holds);
    m.def("trap_lower_bound", &trap_lower_bound, py::arg("y"), py::arg("alpha"), py::arg("c_ratio") = 0.75);

    // spectral
    py::class_<GridOptions>(m, "GridOptions")
        .def(py::init<>())
        .def_readwrite("box_factor", &GridOptions::box_factor)
        .def_readwrite("max_cells", &GridOptions::max_cells);
    py::class_<EigenOptions>(m, "EigenOptions")
        .def(py::init<>())
        .def_readwrite("tol", &EigenOptions::tol)
        .def_readwrite("max_iterations", &EigenOptions::max_iterations);
    py::class_<PoincareEstimate>(m, "PoincareEstimate")
        .def_readonly("value", &PoincareEstimate::value)
        .def_readonly("error_bar", &PoincareEstimate::error_bar)
        .def_readonly("warning", &PoincareEstimate::warning)
        .def_readonly("message", &PoincareEstimate::message)
        .def_readonly("h", &PoincareEstimate::h)
        .def_readonly("raw", &PoincareEstimate::raw)
        .def_readonly("cells", &PoincareEstimate::cells);
    m.def("poincare_estimate", &poincare_estimate, py::arg("spec"), py::arg("h"),
          py::arg("grid_options") = GridOptions{}, py::arg("eigen_options") = EigenOptions{},
          py::call_guard<py::gil_scoped_release>());
    m.def("richardson", &richardson, py::arg("h"), py::arg("values"));
    py::class_<RadialOracle>(m, "RadialOracle")
        .def_readonly("value", &RadialOracle::value)
        .def_readonly("error", &RadialOracle::error)
        .def_readonly("gap0", &RadialOracle::gap0)
        .def_readonly("gap1", &RadialOracle::gap1);
    m.def("radial_gap_oracle", &radial_gap_oracle, py::arg("d"), py::arg("lam"), py::arg("r"),
          py::arg("base_cells") = 2000);

    // simulation
    py::class_<SimConfig>(m, "SimConfig")
        .def(py::init([](DomainSpec spec, double dt, double horizon, std::uint64_t seed, std::size_t n, unsigned threads) {
                 SimConfig c;
                 c.spec = std::move(spec);
                 c.dt = dt;
                 c.horizon = horizon;
                 c.seed = seed;
                 c.n_paths = n;
                 c.threads = threads;
                 c.validate();
                 return c;
             }),
             py::arg("spec"), py::arg("dt") = 1e-3, py::arg("horizon") = 10.0, py::arg("seed") = 0,
             py::arg("n_paths") = 1000, py::arg("threads") = 1)
        .def_readonly("dt", &SimConfig::dt)
        .def_readonly("horizon", &SimConfig::horizon)
        .def_readonly("seed", &SimConfig::seed)
        .def_readonly("n_paths", &SimConfig::n_paths);
    py::class_<PathStats>(m, "PathStats")
        .def_readonly("hit_time", &PathStats::hit_time)
        .def_readonly("censored", &PathStats::censored)
        .def_readonly("contacts", &PathStats::contacts)
        .def_readonly("displacement", &PathStats::displacement)
        .def_readonly("violations", &PathStats::violations)
        .def_readonly("final_state", &PathStats::final_state);
    py::class_<HitSamples>(m, "HitSamples")
        .def_readonly("paths", &HitSamples::paths)
        .def_readonly("censored", &HitSamples::censored)
        .def_readonly("all_censored", &HitSamples::all_censored)
        .def_readonly("total_steps", &HitSamples::total_steps)
        .def_readonly("total_violations", &HitSamples::total_violations)
        .def("times", &HitSamples::times)
        .def("censor_flags", &HitSamples::censor_flags);
    m.def(
        "hit_time",
        [](const SimConfig& c, const Point& start, std::optional<std::pair<int, double>> halfspace) {
            return hit_time(c, start, make_target(halfspace));
        },
        py::arg("config"), py::arg("start"), py::arg("halfspace") = py::none(),
        py::call_guard<py::gil_scoped_release>(),
        "First hitting times of {x[axis] >= level} given halfspace = (axis, level); None runs to the horizon.");
    py::class_<ExitSamples>(m, "ExitSamples")
        .def_readonly("times", &ExitSamples::times)
        .def_readonly("censored", &ExitSamples::censored);
    m.def("exit_interval_ou_1d", &exit_interval_ou_1d, py::arg("lam"), py::arg("r"), py::arg("dt"),
          py::arg("n_paths"), py::arg("seed"), py::arg("horizon") = 100.0, py::arg("threads") = 1,
          py::call_guard<py::gil_scoped_release>());
    py::class_<ExpMoment>(m, "ExpMoment")
        .def_readonly("estimate", &ExpMoment::estimate)
        .def_readonly("log_estimate", &ExpMoment::log_estimate)
        .def_readonly("stderr", &ExpMoment::stderr_)
        .def_readonly("divergence", &ExpMoment::divergence)
        .def_readonly("censored", &ExpMoment::censored);
    m.def("empirical_exp_moment", &empirical_exp_moment, py::arg("times"), py::arg("censored"), py::arg("theta"),
          py::arg("censor_aware") = true);
    py::class_<KsResult>(m, "KsResult")
        .def_readonly("statistic", &KsResult::statistic)
        .def_readonly("p_value", &KsResult::p_value)
        .def_readonly("critical_1pct", &KsResult::critical_1pct)
        .def_readonly("passed", &KsResult::pass)
        .def_readonly("n", &KsResult::n);
    m.def("ks_test", &ks_test, py::arg("samples"), py::arg("cdf"));
}
