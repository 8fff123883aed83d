#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "memstab/config.hpp"
#include "memstab/detection.hpp"
#include "memstab/metrics.hpp"
#include "memstab/mitigation.hpp"
#include "memstab/stability.hpp"

namespace memstab {

// Deterministic trajectory batch: seed = seed_base + index. When a policy is
// given each trajectory runs with its own Mitigator and mem_type_final is
// filled from the final state.
std::vector<Trajectory> run_batch(const ExperimentConfig& cfg, const std::string& scenario,
                                  SamplerKind sampler, std::uint64_t seed_base, int count,
                                  const StabilityProfile* profile = nullptr,
                                  const MitigationPolicy* policy = nullptr, int jobs = 1);

StabilityProfile calibrate_profile(const ExperimentConfig& cfg, SamplerKind sampler,
                                   int reference_count = 0, int jobs = 1);

struct StabilitySamplerReport {
    double violation_rate_delta = 0.0;  // pooled per-step, gamma, normal held-out
    double violation_rate_z0 = 0.0;
    double whole_trajectory_gamma5 = 0.0;
    double memorized_violation_fraction = 0.0;  // >= one delta violation
    std::map<double, double> gamma_sweep_rates;
    double split_half_delta_rate_a = 0.0;
    double split_half_delta_rate_b = 0.0;
};

struct StabilityExperimentResult {
    std::map<std::string, StabilitySamplerReport> per_sampler;  // "ddim", "pndm"
};

struct DetectionCell {
    std::string sampler;
    std::string scenario;
    int detection_steps = 0;
    int num_seeds = 1;
    double auc = 0.0;
    double tpr_at_fpr = 0.0;
};

struct DetectionExperimentResult {
    std::vector<DetectionCell> cells;
    std::map<std::string, double> median_smem_strong;  // per sampler, at full horizon
    std::map<int, double> normal_median_smem_by_steps;
    std::map<int, double> reference_sweep_auc;
    double shuffled_auc = 0.5;
    double wen_corr_pndm = 0.0;
    double wen_corr_ddim = 0.0;  // NaN when no dominated steps exist
    int wen_points_pndm = 0;
    double dominance_median_max_pndm = 0.0;
};

struct MitigationCell {
    std::string scenario;
    std::string cell;  // unmitigated, default, z_only, delta_only, rescale_only
    double replica_rate = 0.0;
    double diverged_rate = 0.0;
    double min_final_distance = 0.0;
    std::map<std::string, int> mem_type_counts;
    long action_count = 0;
};

struct MitigationExperimentResult {
    std::vector<MitigationCell> cells;
    double tau_online = 0.0;  // 1%-FPR-calibrated trigger threshold
    double overhead_normal = 0.0;
    double mean_time_unmitigated_s = 0.0;
    double mean_time_mitigated_s = 0.0;
    std::map<std::string, double> replica_epsilon;
};

StabilityExperimentResult run_exp_stability(const ExperimentConfig& cfg, int jobs = 1);
DetectionExperimentResult run_exp_detection(const ExperimentConfig& cfg, int jobs = 1);
MitigationExperimentResult run_exp_mitigation(const ExperimentConfig& cfg, int jobs = 1);

// Runs the experiment and writes report.json plus CSV files into out_dir.
// Refuses to overwrite a directory whose report carries a different config
// hash unless force is set.
void write_exp_stability(const ExperimentConfig& cfg, std::uint64_t cfg_hash,
                         const std::string& out_dir, int jobs, bool force);
void write_exp_detection(const ExperimentConfig& cfg, std::uint64_t cfg_hash,
                         const std::string& out_dir, int jobs, bool force);
void write_exp_mitigation(const ExperimentConfig& cfg, std::uint64_t cfg_hash,
                          const std::string& out_dir, int jobs, bool force);

// Wen-relation series: for each memorized trajectory, the first step whose
// departure evaluation is guidance-dominated (dominance >= gate) contributes
// the pair (||delta_i||, w * M_Wen at the departure evaluation).
void wen_relation_series(const std::vector<Trajectory>& memorized, double guidance_scale,
                         double dominance_gate, std::vector<double>& delta_norms,
                         std::vector<double>& scaled_wen);

}  // namespace memstab
