#pragma once

#include <iosfwd>
#include <string>

#include "memstab/sampler.hpp"

namespace memstab {

// One JSON object per line with fields: step_index, train_timestep, latent,
// update_norm, latent_norm, z0_hat_norm, eps_cond_norm, eps_uncond_norm,
// guidance_norm, mitigation_applied. With norms_only the latent array is
// elided (written as []).
void write_trajectory_jsonl(std::ostream& out, const Trajectory& trajectory, bool norms_only = false);
std::string trajectory_to_jsonl(const Trajectory& trajectory, bool norms_only = false);

// Reads records back; vector-valued fields may be empty when the file was
// written norms-only. Sampler kind/seed are not part of the line format.
Trajectory read_trajectory_jsonl(std::istream& in);
Trajectory trajectory_from_jsonl(const std::string& text);

}  // namespace memstab
