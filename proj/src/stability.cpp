#include "memstab/stability.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

namespace memstab {

namespace {

double record_value(const StepRecord& r, Channel c) {
    switch (c) {
        case Channel::Delta: return r.update_norm;
        case Channel::Latent: return r.latent_norm;
        case Channel::Z0: return r.z0_hat_norm;
    }
    throw std::logic_error("record_value: bad channel");
}

std::vector<ChannelStats> per_step_stats(const std::vector<Trajectory>& reference, Channel c) {
    const std::size_t T = reference.front().records.size();
    const double n = static_cast<double>(reference.size());
    std::vector<ChannelStats> out(T);
    // two-pass mean/variance, summation order fixed by trajectory order
    for (std::size_t i = 0; i < T; ++i) {
        double mean = 0.0;
        for (const auto& traj : reference) mean += record_value(traj.records[i], c);
        mean /= n;
        double var = 0.0;
        for (const auto& traj : reference) {
            const double d = record_value(traj.records[i], c) - mean;
            var += d * d;
        }
        out[i] = {mean, std::sqrt(var / n)};
    }
    return out;
}

}  // namespace

std::string to_string(Channel c) {
    switch (c) {
        case Channel::Delta: return "delta";
        case Channel::Latent: return "latent";
        case Channel::Z0: return "z0";
    }
    throw std::logic_error("to_string: bad Channel");
}

const std::vector<ChannelStats>& StabilityProfile::channel(Channel c) const {
    switch (c) {
        case Channel::Delta: return delta;
        case Channel::Latent: return latent;
        case Channel::Z0: return z0;
    }
    throw std::logic_error("channel: bad Channel");
}

StabilityProfile collect_profile(const std::vector<Trajectory>& reference, double gamma) {
    if (reference.empty()) throw std::invalid_argument("collect_profile: empty reference set");
    if (reference.size() < 2)
        throw std::invalid_argument("collect_profile: need >= 2 trajectories for a defined sigma");
    const std::size_t T = reference.front().records.size();
    for (const auto& traj : reference) {
        if (traj.diverged) throw std::invalid_argument("collect_profile: diverged trajectory in reference set");
        if (traj.records.size() != T)
            throw std::invalid_argument("collect_profile: mixed trajectory lengths");
    }
    StabilityProfile p;
    p.gamma = gamma;
    p.reference_count = static_cast<int>(reference.size());
    p.delta = per_step_stats(reference, Channel::Delta);
    p.latent = per_step_stats(reference, Channel::Latent);
    p.z0 = per_step_stats(reference, Channel::Z0);
    return p;
}

namespace {

const ChannelStats& stats_at(const StabilityProfile& profile, Channel channel, int step) {
    if (step < 0 || step >= profile.step_count())
        throw std::invalid_argument("stability: step out of range");
    if (channel == Channel::Delta && step == 0)
        throw std::invalid_argument("stability: delta channel unusable at step 0");
    return profile.channel(channel)[static_cast<std::size_t>(step)];
}

}  // namespace

StabilityInterval region(const StabilityProfile& profile, Channel channel, int step) {
    const ChannelStats& s = stats_at(profile, channel, step);
    return {std::max(0.0, s.mu - profile.gamma * s.sigma), s.mu + profile.gamma * s.sigma};
}

double zscore(const StabilityProfile& profile, Channel channel, int step, double value) {
    const ChannelStats& s = stats_at(profile, channel, step);
    const double floor = 1e-9 * std::max(s.mu, 1.0);
    return std::abs(value - s.mu) / std::max(s.sigma, floor);
}

std::string profile_to_json(const StabilityProfile& profile) {
    nlohmann::json j;
    j["gamma"] = profile.gamma;
    j["reference_count"] = profile.reference_count;
    auto emit = [&](const char* mu_key, const char* sigma_key, const std::vector<ChannelStats>& ch) {
        std::vector<double> mu, sigma;
        mu.reserve(ch.size());
        sigma.reserve(ch.size());
        for (const auto& s : ch) {
            mu.push_back(s.mu);
            sigma.push_back(s.sigma);
        }
        j[mu_key] = mu;
        j[sigma_key] = sigma;
    };
    emit("mu_delta", "sigma_delta", profile.delta);
    emit("mu_latent", "sigma_latent", profile.latent);
    emit("mu_z0", "sigma_z0", profile.z0);
    return j.dump(2);
}

StabilityProfile profile_from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    StabilityProfile p;
    p.gamma = j.at("gamma").get<double>();
    p.reference_count = j.at("reference_count").get<int>();
    auto read = [&](const char* mu_key, const char* sigma_key) {
        const auto mu = j.at(mu_key).get<std::vector<double>>();
        const auto sigma = j.at(sigma_key).get<std::vector<double>>();
        if (mu.size() != sigma.size())
            throw std::invalid_argument("profile_from_json: mu/sigma length mismatch");
        std::vector<ChannelStats> ch(mu.size());
        for (std::size_t i = 0; i < mu.size(); ++i) ch[i] = {mu[i], sigma[i]};
        return ch;
    };
    p.delta = read("mu_delta", "sigma_delta");
    p.latent = read("mu_latent", "sigma_latent");
    p.z0 = read("mu_z0", "sigma_z0");
    if (p.latent.size() != p.delta.size() || p.z0.size() != p.delta.size())
        throw std::invalid_argument("profile_from_json: channel length mismatch");
    return p;
}

}  // namespace memstab
