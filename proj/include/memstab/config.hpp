#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "memstab/mitigation.hpp"
#include "memstab/schedule.hpp"
#include "memstab/score.hpp"

namespace memstab {

struct ScheduleParams {
    int num_train_steps = 1000;
    double beta_start = 1e-4;
    double beta_end = 2e-2;
    int inference_steps = 50;

    NoiseSchedule build() const;
};

struct StabilityParams {
    double gamma = 3.0;
    int reference_count = 50;
    SamplerKind sampler = SamplerKind::Ddim;
    std::uint64_t reference_seed_base = 100000;
};

struct DetectionParams {
    int detection_steps = 3;
    double target_fpr = 0.01;
    std::uint64_t eval_seed_base = 200000;
    std::uint64_t memorized_seed_base = 300000;
    int eval_count = 200;
    std::vector<int> steps_grid = {1, 3, 50};
    std::vector<int> multiseed_groups = {1, 4, 8};
    std::vector<int> reference_sweep = {10, 50, 200};
    double dominance_gate = 5.0;
    double beta_min = 5.0;
};

struct ExperimentParams {
    int normal_study_count = 500;
    int timing_count = 200;
    std::vector<double> gamma_sweep = {2.0, 3.0, 5.0};
};

struct ExperimentConfig {
    ScheduleParams schedule;
    double guidance_scale = 7.5;
    int dimension = 8;
    std::map<std::string, ScoreModelSpec> scenarios;  // uncond, normal, strong, mild, ...
    StabilityParams stability;
    DetectionParams detection;
    MitigationPolicy mitigation;
    ExperimentParams experiment;

    const ScoreModelSpec& scenario(const std::string& name) const;
    GuidanceConfig guidance_for(const std::string& scenario_name) const;

    // Mean of the sharpest (minimum-variance) component of a memorized model.
    Vec memorized_target(const std::string& scenario_name) const;
    // 0.5 * distance from the memorized target to the nearest other component mean.
    double replica_epsilon(const std::string& scenario_name) const;
};

// Parses and validates; errors carry the JSON field path.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const std::string& json_text);

// FNV-1a over the canonical (sorted-key) serialization of the raw document.
std::uint64_t config_hash(const std::string& json_text);
std::string read_text_file(const std::string& path);

}  // namespace memstab
