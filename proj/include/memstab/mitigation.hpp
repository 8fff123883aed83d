#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "memstab/sampler.hpp"
#include "memstab/stability.hpp"

namespace memstab {

struct MitigationPolicy {
    double tau_mild = 3.0;
    double tau_strong = 14.0;
    int mild_steps_k = 10;
    // Action toggles. rescale_z0 is the baseline action; the two constraint
    // toggles drive the ablation cells. With all three off the hook never
    // touches the state.
    bool rescale_z0 = true;
    bool constrain_latent = true;
    bool constrain_delta = true;

    void validate() const;
};

struct MitigationState {
    MemType mem_type = MemType::None;
    std::optional<int> first_trigger_step;
    std::vector<std::pair<int, MitigationAction>> events;
    int skipped_rescales = 0;  // zero-norm z0 encountered, rescale skipped
};

// (target_norm / ||v||) * v; direction preserved.
Vec rescale(const Vec& v, double target_norm);

// Severity classification at the first step whose delta Z-score exceeds
// tau_mild: strong if the z0 Z-score exceeds tau_strong, mild if it exceeds
// tau_mild, otherwise the state stays unclassified and remains eligible.
void classify(MitigationState& state, double s_delta, double s_z0, const MitigationPolicy& policy);

// The per-step mitigation body (classification plus the severity-specific
// actions). Returns the replacement latent, if any, with the actions taken.
HookResult apply_mitigation(const StepContext& ctx, MitigationState& state,
                            const MitigationPolicy& policy, const StabilityProfile& profile);

// Trajectory-scoped stateful hook wrapping apply_mitigation.
class Mitigator {
public:
    Mitigator(const StabilityProfile& profile, MitigationPolicy policy)
        : profile_(&profile), policy_(std::move(policy)) {
        policy_.validate();
    }

    HookResult operator()(const StepContext& ctx) {
        return apply_mitigation(ctx, state_, policy_, *profile_);
    }

    const MitigationState& state() const { return state_; }

private:
    const StabilityProfile* profile_;
    MitigationPolicy policy_;
    MitigationState state_;
};

}  // namespace memstab
