#pragma once

#include <vector>

namespace memstab {

// Discrete variance-preserving noise schedule. alpha_bar[t] is the cumulative
// product of (1 - beta_s) for s <= t, indexed by training timestep.
struct NoiseSchedule {
    int num_train_steps = 0;
    std::vector<double> alpha_bar;
    // Strictly decreasing training-timestep indices; the largest one is the
    // noise level of the initial latent.
    std::vector<int> inference_timesteps;

    int inference_step_count() const { return static_cast<int>(inference_timesteps.size()); }
    double alpha_bar_at(int train_timestep) const;
    // sqrt(1 - abar) / sqrt(abar), the noise-to-signal ratio used as the
    // integration variable by the ODE-view samplers.
    double sigma_bar_at(int train_timestep) const;
};

NoiseSchedule make_linear_schedule(int num_train_steps, double beta_start, double beta_end);

// Returns a copy of `schedule` with T evenly strided, strictly decreasing
// timestep indices anchored at num_train_steps - 1.
NoiseSchedule select_inference_timesteps(const NoiseSchedule& schedule, int T);

}  // namespace memstab
