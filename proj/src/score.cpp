#include "memstab/score.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace memstab {

std::string to_string(ModelLabel label) {
    switch (label) {
        case ModelLabel::Unconditional: return "unconditional";
        case ModelLabel::NormalConditional: return "normal_conditional";
        case ModelLabel::MemorizedConditional: return "memorized_conditional";
    }
    throw std::logic_error("to_string: bad ModelLabel");
}

ModelLabel model_label_from_string(const std::string& s) {
    if (s == "unconditional") return ModelLabel::Unconditional;
    if (s == "normal_conditional") return ModelLabel::NormalConditional;
    if (s == "memorized_conditional") return ModelLabel::MemorizedConditional;
    throw std::invalid_argument("unknown model label: " + s);
}

void ScoreModelSpec::finalize() {
    if (dimension <= 0) throw std::invalid_argument("ScoreModelSpec: dimension must be positive");
    if (components.empty()) throw std::invalid_argument("ScoreModelSpec: no components");
    double total = 0.0;
    for (const auto& c : components) {
        if (static_cast<int>(c.mean.size()) != dimension)
            throw std::invalid_argument("ScoreModelSpec: component mean has wrong dimension");
        if (!(c.variance > 0.0)) throw std::invalid_argument("ScoreModelSpec: variance must be > 0");
        if (!(c.weight > 0.0)) throw std::invalid_argument("ScoreModelSpec: weight must be > 0");
        total += c.weight;
    }
    for (auto& c : components) c.weight /= total;
}

Vec noise_prediction(const ScoreModelSpec& model, const Vec& z, double alpha_bar) {
    if (static_cast<int>(z.size()) != model.dimension)
        throw std::invalid_argument("noise_prediction: dimension mismatch");
    if (!(alpha_bar > 0.0) || alpha_bar > 1.0)
        throw std::invalid_argument("noise_prediction: alpha_bar must be in (0, 1]");

    const std::size_t k = model.components.size();
    const double d = static_cast<double>(model.dimension);
    const double sqrt_abar = std::sqrt(alpha_bar);

    // Posterior responsibilities in log space with max-subtraction; sigma_mem
    // near 0.02 underflows naive exponentials otherwise.
    std::vector<double> logq(k);
    std::vector<double> marg_var(k);
    double max_logq = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < k; ++i) {
        const auto& c = model.components[i];
        const double s = alpha_bar * c.variance + (1.0 - alpha_bar);
        if (!(s > 0.0)) throw std::runtime_error("noise_prediction: degenerate component density");
        marg_var[i] = s;
        double sq = 0.0;
        for (int j = 0; j < model.dimension; ++j) {
            const double dz = z[static_cast<std::size_t>(j)] - sqrt_abar * c.mean[static_cast<std::size_t>(j)];
            sq += dz * dz;
        }
        logq[i] = std::log(c.weight) - 0.5 * d * std::log(2.0 * M_PI * s) - sq / (2.0 * s);
        max_logq = std::max(max_logq, logq[i]);
    }
    double denom = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        logq[i] = std::exp(logq[i] - max_logq);
        denom += logq[i];
    }

    // eps* = sqrt(1-abar) * sum_i r_i (z - m_i) / s_i
    Vec eps(z.size(), 0.0);
    for (std::size_t i = 0; i < k; ++i) {
        const double coef = (logq[i] / denom) / marg_var[i];
        const auto& mean = model.components[i].mean;
        for (std::size_t j = 0; j < z.size(); ++j) eps[j] += coef * (z[j] - sqrt_abar * mean[j]);
    }
    const double scale = std::sqrt(1.0 - alpha_bar);
    for (double& x : eps) x *= scale;
    return eps;
}

Vec cfg_combine(const Vec& eps_cond, const Vec& eps_uncond, double w) {
    if (eps_cond.size() != eps_uncond.size())
        throw std::invalid_argument("cfg_combine: dimension mismatch");
    Vec out(eps_uncond);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += w * (eps_cond[i] - eps_uncond[i]);
    return out;
}

double dominance_factor(const Vec& eps_cond, const Vec& eps_uncond) {
    if (eps_cond.size() != eps_uncond.size())
        throw std::invalid_argument("dominance_factor: dimension mismatch");
    const double nu = norm(eps_uncond);
    if (nu == 0.0) return std::numeric_limits<double>::infinity();
    return norm(eps_cond) / nu;
}

}  // namespace memstab
