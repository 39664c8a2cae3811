#include "oupinball/quadrature.hpp"

#include <cmath>
#include <queue>
#include <vector>

#include "oupinball/error.hpp"

namespace oupinball {

namespace {

constexpr double kXgk[8] = {0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                            0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                            0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                            0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr double kWgk[8] = {0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                            0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                            0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                            0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double kWg[4] = {0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                           0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Piece {
    double a, b, value, error;
    bool operator<(const Piece& o) const { return error < o.error; }
};

Piece gk15(const std::function<double(double)>& f, double a, double b) {
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    const double fc = f(c);
    double rk = fc * kWgk[7];
    double rg = fc * kWg[3];
    for (int j = 0; j < 7; ++j) {
        const double x = h * kXgk[j];
        const double s = f(c - x) + f(c + x);
        rk += kWgk[j] * s;
        if (j % 2 == 1) rg += kWg[j / 2] * s;
    }
    return {a, b, rk * h, std::abs((rk - rg) * h)};
}

}  // namespace

QuadResult integrate(const std::function<double(double)>& f, double a, double b, double abs_tol, double rel_tol,
                     int max_intervals) {
    if (std::isnan(a) || std::isnan(b) || std::isinf(a)) throw InputError("integrate: invalid limits");
    if (b == a) return {};
    if (std::isinf(b)) {
        if (b < 0) throw InputError("integrate: lower limit must be finite and below upper");
        // x = a + t / (1 - t)
        auto g = [&f, a](double t) {
            if (t >= 1.0) return 0.0;
            const double u = 1.0 - t;
            const double v = f(a + t / u);
            return v == 0.0 ? 0.0 : v / (u * u);
        };
        return integrate(g, 0.0, 1.0, abs_tol, rel_tol, max_intervals);
    }
    if (b < a) {
        QuadResult r = integrate(f, b, a, abs_tol, rel_tol, max_intervals);
        r.value = -r.value;
        return r;
    }
    std::priority_queue<Piece> heap;
    Piece first = gk15(f, a, b);
    heap.push(first);
    double total = first.value, err = first.error;
    int evals = 15, count = 1;
    while (err > std::max(abs_tol, rel_tol * std::abs(total))) {
        if (count >= max_intervals) throw EvaluationError("integrate: interval budget exhausted");
        Piece p = heap.top();
        heap.pop();
        const double m = 0.5 * (p.a + p.b);
        Piece l = gk15(f, p.a, m), r = gk15(f, m, p.b);
        evals += 30;
        ++count;
        total += l.value + r.value - p.value;
        err += l.error + r.error - p.error;
        heap.push(l);
        heap.push(r);
        if (count % 64 == 0) {
            // resum to flush drift from the running updates
            std::vector<Piece> all;
            double t = 0, e = 0;
            while (!heap.empty()) {
                all.push_back(heap.top());
                heap.pop();
            }
            for (const auto& q : all) {
                t += q.value;
                e += q.error;
                heap.push(q);
            }
            total = t;
            err = e;
        }
    }
    return {total, err, evals};
}

}  // namespace oupinball
