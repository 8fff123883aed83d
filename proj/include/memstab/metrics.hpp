#pragma once

#include <vector>

#include "memstab/vec.hpp"

namespace memstab {

// Fraction of final latents within epsilon of the memorized target.
double replica_rate(const std::vector<Vec>& final_latents, const Vec& mem_target, double epsilon);

struct OutcomeSummary {
    double replica_rate = 0.0;
    double diverged_rate = 0.0;
    double mean_wall_time_per_trajectory = 0.0;  // seconds
    double mitigation_action_rate = 0.0;         // actions per step
};

enum class OdeSolver { Euler, Ab4 };

struct OrderMeasurement {
    double slope = 0.0;
    bool exact = false;  // zero error at every step count; slope undefined
};

// Empirical convergence order on the scalar linear problem y' = lambda * y
// over [0, t_end]: least-squares slope of log(error) against log(h). AB4 uses
// exact-history warmup (f evaluated on the true solution at the first nodes).
OrderMeasurement measure_order(OdeSolver solver, double lambda, double y0, double t_end,
                               const std::vector<int>& step_counts);

// (mean mitigated - mean unmitigated) / mean unmitigated
double overhead(const std::vector<double>& unmitigated_times,
                const std::vector<double>& mitigated_times);

double pearson(const std::vector<double>& x, const std::vector<double>& y);

double median(std::vector<double> values);

}  // namespace memstab
