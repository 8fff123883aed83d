#pragma once

#include <vector>

#include "memstab/sampler.hpp"
#include "memstab/stability.hpp"

namespace memstab {

// S_mem: maximum delta-channel Z-score over the first s generation steps
// (step 0 has no update and is skipped; s may equal the trajectory length,
// in which case all recorded updates are scored).
double memorization_score(const Trajectory& trajectory, const StabilityProfile& profile,
                          int detection_steps);

// Guidance-magnitude baseline: ||eps_cond - eps_uncond|| as recorded.
double wen_guidance_magnitude(const StepRecord& step);

struct ThresholdResult {
    double value = 0.0;
    // True when no score satisfies the target rate (sample too small); the
    // maximum score is returned in that case.
    bool saturated = false;
};

// Smallest observed score such that the fraction of normal scores >= it is
// <= target_fpr; a score is flagged when score >= threshold.
ThresholdResult calibrate_threshold(std::vector<double> normal_scores, double target_fpr);

// Mann-Whitney AUC: P(memorized > normal) with ties counted 1/2.
double auc(const std::vector<double>& memorized_scores, const std::vector<double>& normal_scores);

// TPR at the calibrate_threshold operating point.
double tpr_at_fpr(const std::vector<double>& memorized_scores,
                  const std::vector<double>& normal_scores, double fpr);

}  // namespace memstab
