#pragma once

#include <functional>
#include <limits>

namespace oupinball {

struct QuadResult {
    double value = 0.0;
    double error = 0.0;
    int evaluations = 0;
};

/// Globally adaptive Gauss-Kronrod (7/15) integration over [a, b].
/// b may be +inf; the half-line is mapped onto [0, 1).
/// Throws EvaluationError when the interval budget is exhausted before the
/// requested tolerance max(abs_tol, rel_tol |I|) is reached.
QuadResult integrate(const std::function<double(double)>& f, double a, double b, double abs_tol = 1e-13,
                     double rel_tol = 1e-12, int max_intervals = 2000);

}  // namespace oupinball
