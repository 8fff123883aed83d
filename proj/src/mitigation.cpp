#include "memstab/mitigation.hpp"

#include <cmath>
#include <stdexcept>

namespace memstab {

void MitigationPolicy::validate() const {
    if (!(tau_mild > 0.0) || !(tau_strong > 0.0))
        throw std::invalid_argument("MitigationPolicy: thresholds must be positive");
    if (!(tau_mild < tau_strong))
        throw std::invalid_argument("MitigationPolicy: tau_mild must be below tau_strong");
    if (mild_steps_k < 1) throw std::invalid_argument("MitigationPolicy: mild_steps_k must be >= 1");
}

Vec rescale(const Vec& v, double target_norm) {
    if (!(target_norm > 0.0)) throw std::invalid_argument("rescale: target norm must be positive");
    const double n = norm(v);
    if (n == 0.0) throw std::invalid_argument("rescale: zero vector has no direction");
    return scaled(v, target_norm / n);
}

void classify(MitigationState& state, double s_delta, double s_z0, const MitigationPolicy& policy) {
    if (state.mem_type != MemType::None) return;
    if (s_delta <= policy.tau_mild) return;
    if (s_z0 > policy.tau_strong) {
        state.mem_type = MemType::Strong;
    } else if (s_z0 > policy.tau_mild) {
        state.mem_type = MemType::Mild;
    } else {
        return;  // stays unclassified, eligible at a later step
    }
    // first_trigger_step is recorded on transition; set by apply_mitigation,
    // which knows the step index.
}

HookResult apply_mitigation(const StepContext& ctx, MitigationState& state,
                            const MitigationPolicy& policy, const StabilityProfile& profile) {
    HookResult result;
    const int i = ctx.record.step_index;
    const double s_delta = zscore(profile, Channel::Delta, i, ctx.record.update_norm);
    const double s_z0 = zscore(profile, Channel::Z0, i, ctx.record.z0_hat_norm);

    const MemType before = state.mem_type;
    classify(state, s_delta, s_z0, policy);
    if (before == MemType::None && state.mem_type != MemType::None) state.first_trigger_step = i;

    if (state.mem_type == MemType::None) return result;

    const double sqrt_a = std::sqrt(ctx.alpha_bar);
    const double sqrt_b = std::sqrt(1.0 - ctx.alpha_bar);
    Vec z = ctx.record.latent;
    bool touched = false;

    auto log_action = [&](MitigationAction a) {
        state.events.emplace_back(i, a);
        result.actions.push_back(a);
        touched = true;
    };

    // z0 rescale toward the reference mean, re-forming the latent through the
    // same reconstruction identity the step used.
    auto rescale_z0_to_mean = [&]() {
        const Vec z0 = reconstruct_z0(z, ctx.eps_cfg, ctx.alpha_bar);
        const double target = profile.z0[static_cast<std::size_t>(i)].mu;
        if (norm(z0) == 0.0 || !(target > 0.0)) {
            ++state.skipped_rescales;  // degenerate direction, non-fatal
            return;
        }
        const Vec z0_new = rescale(z0, target);
        for (std::size_t j = 0; j < z.size(); ++j) z[j] = sqrt_a * z0_new[j] + sqrt_b * ctx.eps_cfg[j];
        log_action(MitigationAction::RescaleZ0);
    };

    auto clamp_latent_norm = [&]() {
        const StabilityInterval r = region(profile, Channel::Latent, i);
        const double n = norm(z);
        if (r.contains(n) || n == 0.0) return;
        z = scaled(z, r.project(n) / n);
        log_action(MitigationAction::ClampZ);
    };

    auto clamp_delta_norm = [&]() {
        const StabilityInterval r = region(profile, Channel::Delta, i);
        Vec d = diff(z, ctx.prev_latent);
        const double n = norm(d);
        if (r.contains(n) || n == 0.0) return;
        const double scale = r.project(n) / n;
        for (std::size_t j = 0; j < z.size(); ++j) z[j] = ctx.prev_latent[j] + scale * d[j];
        log_action(MitigationAction::ClampDelta);
    };

    if (state.mem_type == MemType::Strong) {
        if (policy.rescale_z0 && s_z0 > policy.tau_mild) rescale_z0_to_mean();
        if (policy.constrain_latent) clamp_latent_norm();
        if (policy.constrain_delta) clamp_delta_norm();
    } else {  // mild
        if (policy.rescale_z0 && i < policy.mild_steps_k && s_delta > policy.tau_mild &&
            s_z0 <= policy.tau_strong) {
            rescale_z0_to_mean();
        }
        // latent-norm constraint only while the update norm is outside its region
        if (policy.constrain_latent && !region(profile, Channel::Delta, i).contains(ctx.record.update_norm)) {
            clamp_latent_norm();
        }
    }

    if (touched) result.new_latent = std::move(z);
    return result;
}

}  // namespace memstab
