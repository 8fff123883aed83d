#include "memstab/schedule.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace memstab {

double NoiseSchedule::alpha_bar_at(int train_timestep) const {
    if (train_timestep < 0 || train_timestep >= num_train_steps)
        throw std::invalid_argument("alpha_bar_at: timestep " + std::to_string(train_timestep) +
                                    " out of range");
    return alpha_bar[static_cast<std::size_t>(train_timestep)];
}

double NoiseSchedule::sigma_bar_at(int train_timestep) const {
    const double a = alpha_bar_at(train_timestep);
    return std::sqrt(1.0 - a) / std::sqrt(a);
}

NoiseSchedule make_linear_schedule(int num_train_steps, double beta_start, double beta_end) {
    if (num_train_steps <= 0)
        throw std::invalid_argument("make_linear_schedule: num_train_steps must be positive");
    if (!(beta_start > 0.0) || !(beta_end < 1.0) || beta_start > beta_end)
        throw std::invalid_argument("make_linear_schedule: require 0 < beta_start <= beta_end < 1");

    NoiseSchedule s;
    s.num_train_steps = num_train_steps;
    s.alpha_bar.resize(static_cast<std::size_t>(num_train_steps));
    double prod = 1.0;
    for (int t = 0; t < num_train_steps; ++t) {
        const double beta =
            num_train_steps == 1
                ? beta_start
                : beta_start + (beta_end - beta_start) * static_cast<double>(t) /
                                   static_cast<double>(num_train_steps - 1);
        prod *= 1.0 - beta;
        s.alpha_bar[static_cast<std::size_t>(t)] = prod;
    }
    s.inference_timesteps.resize(static_cast<std::size_t>(num_train_steps));
    for (int i = 0; i < num_train_steps; ++i)
        s.inference_timesteps[static_cast<std::size_t>(i)] = num_train_steps - 1 - i;
    return s;
}

NoiseSchedule select_inference_timesteps(const NoiseSchedule& schedule, int T) {
    if (T < 1 || T > schedule.num_train_steps)
        throw std::invalid_argument("select_inference_timesteps: T out of range");
    NoiseSchedule s = schedule;
    const int stride = schedule.num_train_steps / T;
    s.inference_timesteps.resize(static_cast<std::size_t>(T));
    for (int i = 0; i < T; ++i)
        s.inference_timesteps[static_cast<std::size_t>(i)] = (schedule.num_train_steps - 1) - i * stride;
    return s;
}

}  // namespace memstab
