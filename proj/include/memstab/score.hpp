#pragma once

#include <string>
#include <vector>

#include "memstab/vec.hpp"

namespace memstab {

struct GaussianComponent {
    Vec mean;
    double variance = 1.0;  // isotropic
    double weight = 1.0;
};

enum class ModelLabel { Unconditional, NormalConditional, MemorizedConditional };

std::string to_string(ModelLabel label);
ModelLabel model_label_from_string(const std::string& s);

// Analytic Gaussian-mixture data distribution. For the diffused marginal at
// noise level abar, each component contributes N(sqrt(abar)*mean,
// (abar*variance + 1 - abar) * I), and the exact noise prediction is
//   eps*(z) = -sqrt(1 - abar) * grad_z log p(z).
struct ScoreModelSpec {
    int dimension = 0;
    std::vector<GaussianComponent> components;
    ModelLabel label = ModelLabel::Unconditional;

    // Normalizes weights to sum 1 and checks invariants.
    void finalize();
};

Vec noise_prediction(const ScoreModelSpec& model, const Vec& z, double alpha_bar);

Vec cfg_combine(const Vec& eps_cond, const Vec& eps_uncond, double w);

// ||eps_cond|| / ||eps_uncond||; +inf when the unconditional norm is zero.
double dominance_factor(const Vec& eps_cond, const Vec& eps_uncond);

struct GuidanceConfig {
    double scale = 7.5;
    ScoreModelSpec conditional;
    ScoreModelSpec unconditional;
};

}  // namespace memstab
