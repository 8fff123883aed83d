#pragma once

#include <string>
#include <vector>

#include "memstab/sampler.hpp"

namespace memstab {

enum class Channel { Delta, Latent, Z0 };
std::string to_string(Channel c);

struct ChannelStats {
    double mu = 0.0;
    double sigma = 0.0;
};

// Per-step (mu, sigma) of ||delta||, ||z|| and ||z0_hat|| over a reference set
// of non-memorized trajectories, keyed by generation step index. The delta
// channel at step 0 is unusable (no predecessor state).
struct StabilityProfile {
    double gamma = 3.0;
    int reference_count = 0;
    std::vector<ChannelStats> delta;
    std::vector<ChannelStats> latent;
    std::vector<ChannelStats> z0;

    int step_count() const { return static_cast<int>(delta.size()); }
    const std::vector<ChannelStats>& channel(Channel c) const;
};

// Sample mean and population (divide-by-N) standard deviation per step and
// channel. Requires >= 2 equal-length, non-diverged trajectories.
StabilityProfile collect_profile(const std::vector<Trajectory>& reference, double gamma);

// [max(0, mu - gamma*sigma), mu + gamma*sigma]
struct StabilityInterval {
    double lower = 0.0;
    double upper = 0.0;

    bool contains(double v) const { return v >= lower && v <= upper; }
    double project(double v) const { return v < lower ? lower : (v > upper ? upper : v); }
};

StabilityInterval region(const StabilityProfile& profile, Channel channel, int step);

// |value - mu| / max(sigma, 1e-9 * max(mu, 1))
double zscore(const StabilityProfile& profile, Channel channel, int step, double value);

std::string profile_to_json(const StabilityProfile& profile);
StabilityProfile profile_from_json(const std::string& text);

}  // namespace memstab
