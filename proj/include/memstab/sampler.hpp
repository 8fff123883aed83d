#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "memstab/schedule.hpp"
#include "memstab/score.hpp"
#include "memstab/vec.hpp"

namespace memstab {

enum class SamplerKind { Euler, Ddim, Pndm };

std::string to_string(SamplerKind kind);
SamplerKind sampler_kind_from_string(const std::string& s);

enum class MitigationAction { RescaleZ0, ClampZ, ClampDelta };
std::string to_string(MitigationAction a);

enum class MemType { None, Mild, Strong };
std::string to_string(MemType t);

// One generation state. Record 0 is the initial latent (update is the zero
// vector by convention); record i >= 1 is the state after the i-th update.
// The noise-prediction fields are evaluated at this record's own state; the
// update that produced record i used record i-1's evaluation.
struct StepRecord {
    int step_index = 0;
    int train_timestep = 0;
    Vec latent;
    Vec update;
    Vec z0_hat;
    double update_norm = 0.0;
    double latent_norm = 0.0;
    double z0_hat_norm = 0.0;
    double eps_cond_norm = 0.0;
    double eps_uncond_norm = 0.0;
    double guidance_norm = 0.0;  // ||eps_cond - eps_uncond||
    std::vector<MitigationAction> mitigation_applied;
};

struct Trajectory {
    std::vector<StepRecord> records;
    std::uint64_t seed = 0;
    SamplerKind sampler_kind = SamplerKind::Ddim;
    MemType mem_type_final = MemType::None;
    bool diverged = false;

    int step_count() const { return static_cast<int>(records.size()); }
};

// z0 = (z - sqrt(1-abar) * eps) / sqrt(abar)
Vec reconstruct_z0(const Vec& z, const Vec& eps, double alpha_bar);

// sqrt(abar_prev) * z0 + sqrt(1-abar_prev) * eps
Vec ddim_step(const Vec& z, const Vec& eps, double alpha_bar_t, double alpha_bar_prev);

// One explicit Euler step, z - dt * f, where f is the denoising prediction
// (f = -eps in the probability-flow view) and dt is the signed increment of
// the integration variable.
Vec euler_step(const Vec& z, const Vec& f_value, double dt);

// Fourth-order Adams-Bashforth step z + dt * sum_i b_i f_i with the classical
// weights (55, -59, 37, -9)/24; history is ordered newest-first and must hold
// exactly four entries. Shorter histories go through adams_bashforth_step.
Vec pndm_step(std::span<const Vec> history_newest_first, const Vec& state, double dt);

// Order-k Adams-Bashforth for k = history.size() in 1..4 (PNDM warmup path).
Vec adams_bashforth_step(std::span<const Vec> history_newest_first, const Vec& state, double dt);

struct StepContext {
    const StepRecord& record;  // freshly written, pre-mutation values
    const Vec& prev_latent;    // state the update departed from
    const Vec& eps_cfg;        // CFG prediction at the record's state
    double alpha_bar;          // at the record's train timestep
};

struct HookResult {
    std::optional<Vec> new_latent;
    std::vector<MitigationAction> actions;
};

using StepHook = std::function<HookResult(const StepContext&)>;

// Runs the reverse process across schedule.inference_timesteps. The hook (if
// any) runs after every state update; a returned latent replaces the state
// before the next step, and the record is rewritten to stay self-consistent
// (update/z0_hat/prediction norms recomputed at the final state). States with
// any coordinate above 1e6 in magnitude (or non-finite) mark the trajectory
// diverged and truncate it.
Trajectory sample_trajectory(SamplerKind kind, const NoiseSchedule& schedule,
                             const GuidanceConfig& guidance, std::uint64_t seed,
                             const StepHook& hook = {});

}  // namespace memstab
