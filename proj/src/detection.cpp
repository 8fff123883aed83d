#include "memstab/detection.hpp"

#include <algorithm>
#include <stdexcept>

namespace memstab {

double memorization_score(const Trajectory& trajectory, const StabilityProfile& profile,
                          int detection_steps) {
    const int T = trajectory.step_count();
    if (detection_steps < 1) throw std::invalid_argument("memorization_score: detection_steps < 1");
    // s+1 records are needed for s scored updates; for s >= the full horizon a
    // complete trajectory suffices (all recorded updates are scored).
    const int need = std::min(detection_steps + 1, profile.step_count());
    if (T < need)
        throw std::invalid_argument("memorization_score: trajectory shorter than detection window");
    const int last = std::min(detection_steps, T - 1);
    double best = 0.0;
    for (int i = 1; i <= last; ++i) {
        best = std::max(best, zscore(profile, Channel::Delta, i,
                                     trajectory.records[static_cast<std::size_t>(i)].update_norm));
    }
    return best;
}

double wen_guidance_magnitude(const StepRecord& step) { return step.guidance_norm; }

ThresholdResult calibrate_threshold(std::vector<double> normal_scores, double target_fpr) {
    if (normal_scores.empty()) throw std::invalid_argument("calibrate_threshold: no scores");
    if (!(target_fpr > 0.0) || !(target_fpr < 1.0))
        throw std::invalid_argument("calibrate_threshold: target_fpr must be in (0, 1)");
    std::sort(normal_scores.begin(), normal_scores.end());
    const double n = static_cast<double>(normal_scores.size());
    for (std::size_t j = 0; j < normal_scores.size(); ++j) {
        // count of scores >= candidate, ties included
        const auto lo = std::lower_bound(normal_scores.begin(), normal_scores.end(), normal_scores[j]);
        const double ge = n - static_cast<double>(lo - normal_scores.begin());
        if (ge / n <= target_fpr) return {normal_scores[j], false};
    }
    return {normal_scores.back(), true};
}

double auc(const std::vector<double>& memorized_scores, const std::vector<double>& normal_scores) {
    if (memorized_scores.empty() || normal_scores.empty())
        throw std::invalid_argument("auc: empty score list");
    std::vector<double> neg(normal_scores);
    std::sort(neg.begin(), neg.end());
    const double m = static_cast<double>(memorized_scores.size());
    const double n = static_cast<double>(neg.size());
    double total = 0.0;
    for (double s : memorized_scores) {
        const auto lo = std::lower_bound(neg.begin(), neg.end(), s);
        const auto hi = std::upper_bound(neg.begin(), neg.end(), s);
        const double below = static_cast<double>(lo - neg.begin());
        const double ties = static_cast<double>(hi - lo);
        total += below + 0.5 * ties;
    }
    return total / (m * n);
}

double tpr_at_fpr(const std::vector<double>& memorized_scores,
                  const std::vector<double>& normal_scores, double fpr) {
    if (memorized_scores.empty()) throw std::invalid_argument("tpr_at_fpr: empty memorized list");
    const ThresholdResult thr = calibrate_threshold(normal_scores, fpr);
    double hits = 0.0;
    for (double s : memorized_scores)
        if (s >= thr.value) hits += 1.0;
    return hits / static_cast<double>(memorized_scores.size());
}

}  // namespace memstab
