#include "memstab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "memstab/sampler.hpp"

namespace memstab {

double replica_rate(const std::vector<Vec>& final_latents, const Vec& mem_target, double epsilon) {
    if (final_latents.empty()) throw std::invalid_argument("replica_rate: empty batch");
    if (!(epsilon > 0.0)) throw std::invalid_argument("replica_rate: epsilon must be positive");
    double hits = 0.0;
    for (const auto& z : final_latents)
        if (distance(z, mem_target) <= epsilon) hits += 1.0;
    return hits / static_cast<double>(final_latents.size());
}

namespace {

// integrates y' = lambda*y to t_end with n steps; returns |y_n - exact|
double solve_error(OdeSolver solver, double lambda, double y0, double t_end, int n) {
    const double h = t_end / static_cast<double>(n);
    const double exact = y0 * std::exp(lambda * t_end);
    auto f_conv = [&](double y) { return -lambda * y; };  // euler_step convention: y - dt*f
    auto rhs = [&](double y) { return lambda * y; };      // adams convention: y + dt*f

    if (solver == OdeSolver::Euler) {
        Vec y{y0};
        for (int i = 0; i < n; ++i) y = euler_step(y, Vec{f_conv(y[0])}, h);
        return std::abs(y[0] - exact);
    }

    // AB4 with exact-history warmup: start at node 3 from the true solution,
    // history filled with f on the true solution at nodes 3,2,1,0.
    if (n < 4) throw std::invalid_argument("measure_order: AB4 needs at least 4 steps");
    auto truth = [&](int k) { return y0 * std::exp(lambda * h * static_cast<double>(k)); };
    std::vector<Vec> hist = {Vec{rhs(truth(3))}, Vec{rhs(truth(2))}, Vec{rhs(truth(1))},
                             Vec{rhs(truth(0))}};
    Vec y{truth(3)};
    for (int k = 3; k < n; ++k) {
        y = pndm_step(hist, y, h);
        hist.insert(hist.begin(), Vec{rhs(y[0])});
        hist.pop_back();
    }
    return std::abs(y[0] - exact);
}

}  // namespace

OrderMeasurement measure_order(OdeSolver solver, double lambda, double y0, double t_end,
                               const std::vector<int>& step_counts) {
    if (step_counts.size() < 2) throw std::invalid_argument("measure_order: need >= 2 step counts");
    std::vector<double> log_h, log_e;
    bool all_zero = true;
    for (int n : step_counts) {
        const double err = solve_error(solver, lambda, y0, t_end, n);
        if (err > 0.0) {
            all_zero = false;
            log_h.push_back(std::log(t_end / static_cast<double>(n)));
            log_e.push_back(std::log(err));
        }
    }
    if (all_zero) return {0.0, true};
    if (log_h.size() < 2) throw std::runtime_error("measure_order: too few nonzero errors");
    // least-squares slope
    const double n = static_cast<double>(log_h.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < log_h.size(); ++i) {
        mx += log_h[i];
        my += log_e[i];
    }
    mx /= n;
    my /= n;
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < log_h.size(); ++i) {
        num += (log_h[i] - mx) * (log_e[i] - my);
        den += (log_h[i] - mx) * (log_h[i] - mx);
    }
    return {num / den, false};
}

double overhead(const std::vector<double>& unmitigated_times,
                const std::vector<double>& mitigated_times) {
    if (unmitigated_times.empty() || mitigated_times.empty())
        throw std::invalid_argument("overhead: empty timing list");
    auto mean = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
    };
    const double u = mean(unmitigated_times);
    return (mean(mitigated_times) - u) / u;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("pearson: need matched series of length >= 2");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) throw std::invalid_argument("pearson: degenerate series");
    return sxy / std::sqrt(sxx * syy);
}

double median(std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("median: empty");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    if (n % 2 == 1) return values[n / 2];
    return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace memstab
