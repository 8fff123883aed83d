#include "memstab/sampler.hpp"

#include <array>
#include <cmath>
#include <deque>
#include <stdexcept>

#include "memstab/rng.hpp"

namespace memstab {

namespace {

constexpr double kDivergenceLimit = 1e6;

bool state_ok(const Vec& z) {
    for (double x : z) {
        if (!std::isfinite(x) || std::abs(x) > kDivergenceLimit) return false;
    }
    return true;
}

struct Evaluation {
    Vec eps_cond;
    Vec eps_uncond;
    Vec eps_cfg;
};

Evaluation evaluate(const GuidanceConfig& guidance, const Vec& z, double alpha_bar) {
    Evaluation ev;
    ev.eps_cond = noise_prediction(guidance.conditional, z, alpha_bar);
    ev.eps_uncond = noise_prediction(guidance.unconditional, z, alpha_bar);
    ev.eps_cfg = cfg_combine(ev.eps_cond, ev.eps_uncond, guidance.scale);
    return ev;
}

StepRecord make_record(int step_index, int train_timestep, const Vec& z, const Vec& update,
                       double alpha_bar, const Evaluation& ev) {
    StepRecord r;
    r.step_index = step_index;
    r.train_timestep = train_timestep;
    r.latent = z;
    r.update = update;
    r.z0_hat = reconstruct_z0(z, ev.eps_cfg, alpha_bar);
    r.update_norm = norm(update);
    r.latent_norm = norm(z);
    r.z0_hat_norm = norm(r.z0_hat);
    r.eps_cond_norm = norm(ev.eps_cond);
    r.eps_uncond_norm = norm(ev.eps_uncond);
    r.guidance_norm = distance(ev.eps_cond, ev.eps_uncond);
    return r;
}

}  // namespace

std::string to_string(SamplerKind kind) {
    switch (kind) {
        case SamplerKind::Euler: return "euler";
        case SamplerKind::Ddim: return "ddim";
        case SamplerKind::Pndm: return "pndm";
    }
    throw std::logic_error("to_string: bad SamplerKind");
}

SamplerKind sampler_kind_from_string(const std::string& s) {
    if (s == "euler") return SamplerKind::Euler;
    if (s == "ddim") return SamplerKind::Ddim;
    if (s == "pndm") return SamplerKind::Pndm;
    throw std::invalid_argument("unknown sampler kind: " + s);
}

std::string to_string(MitigationAction a) {
    switch (a) {
        case MitigationAction::RescaleZ0: return "rescale_z0";
        case MitigationAction::ClampZ: return "clamp_z";
        case MitigationAction::ClampDelta: return "clamp_delta";
    }
    throw std::logic_error("to_string: bad MitigationAction");
}

std::string to_string(MemType t) {
    switch (t) {
        case MemType::None: return "none";
        case MemType::Mild: return "mild";
        case MemType::Strong: return "strong";
    }
    throw std::logic_error("to_string: bad MemType");
}

Vec reconstruct_z0(const Vec& z, const Vec& eps, double alpha_bar) {
    if (!(alpha_bar > 0.0) || alpha_bar > 1.0)
        throw std::invalid_argument("reconstruct_z0: alpha_bar must be in (0, 1]");
    if (z.size() != eps.size()) throw std::invalid_argument("reconstruct_z0: dimension mismatch");
    const double sa = std::sqrt(alpha_bar);
    const double sb = std::sqrt(1.0 - alpha_bar);
    Vec out(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) out[i] = (z[i] - sb * eps[i]) / sa;
    return out;
}

Vec ddim_step(const Vec& z, const Vec& eps, double alpha_bar_t, double alpha_bar_prev) {
    if (!(alpha_bar_prev > 0.0) || alpha_bar_prev > 1.0)
        throw std::invalid_argument("ddim_step: alpha_bar_prev must be in (0, 1]");
    const Vec z0 = reconstruct_z0(z, eps, alpha_bar_t);
    const double sa = std::sqrt(alpha_bar_prev);
    const double sb = std::sqrt(1.0 - alpha_bar_prev);
    Vec out(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) out[i] = sa * z0[i] + sb * eps[i];
    return out;
}

Vec euler_step(const Vec& z, const Vec& f_value, double dt) {
    if (z.size() != f_value.size()) throw std::invalid_argument("euler_step: dimension mismatch");
    Vec out(z);
    axpy(-dt, f_value, out);
    return out;
}

Vec adams_bashforth_step(std::span<const Vec> history_newest_first, const Vec& state, double dt) {
    static const std::array<std::vector<double>, 4> kWeights = {{
        {1.0},
        {3.0 / 2.0, -1.0 / 2.0},
        {23.0 / 12.0, -16.0 / 12.0, 5.0 / 12.0},
        {55.0 / 24.0, -59.0 / 24.0, 37.0 / 24.0, -9.0 / 24.0},
    }};
    const std::size_t k = history_newest_first.size();
    if (k < 1 || k > 4)
        throw std::invalid_argument("adams_bashforth_step: history must hold 1..4 entries");
    const auto& b = kWeights[k - 1];
    Vec out(state);
    for (std::size_t i = 0; i < k; ++i) axpy(dt * b[i], history_newest_first[i], out);
    return out;
}

Vec pndm_step(std::span<const Vec> history_newest_first, const Vec& state, double dt) {
    if (history_newest_first.size() != 4)
        throw std::invalid_argument("pndm_step: requires exactly four history entries");
    return adams_bashforth_step(history_newest_first, state, dt);
}

Trajectory sample_trajectory(SamplerKind kind, const NoiseSchedule& schedule,
                             const GuidanceConfig& guidance, std::uint64_t seed,
                             const StepHook& hook) {
    const int T = schedule.inference_step_count();
    if (T < 1) throw std::invalid_argument("sample_trajectory: schedule has no inference timesteps");
    const int d = guidance.conditional.dimension;

    Trajectory traj;
    traj.seed = seed;
    traj.sampler_kind = kind;
    traj.records.reserve(static_cast<std::size_t>(T));

    Vec z = gaussian_vector(seed, static_cast<std::size_t>(d));
    int t_cur = schedule.inference_timesteps[0];
    double a_cur = schedule.alpha_bar_at(t_cur);
    Evaluation ev = evaluate(guidance, z, a_cur);
    traj.records.push_back(make_record(0, t_cur, z, Vec(static_cast<std::size_t>(d), 0.0), a_cur, ev));

    std::deque<Vec> history;  // f = -eps_cfg, newest first
    history.emplace_front(scaled(ev.eps_cfg, -1.0));

    for (int i = 1; i < T; ++i) {
        const int t_next = schedule.inference_timesteps[static_cast<std::size_t>(i)];
        const double a_next = schedule.alpha_bar_at(t_next);

        Vec z_new;
        switch (kind) {
            case SamplerKind::Ddim:
                z_new = ddim_step(z, ev.eps_cfg, a_cur, a_next);
                break;
            case SamplerKind::Euler: {
                // DDIM's ODE view: d(xbar)/d(sigma_bar) = eps with xbar = z/sqrt(abar)
                const Vec xbar = scaled(z, 1.0 / std::sqrt(a_cur));
                const double dt = schedule.sigma_bar_at(t_next) - schedule.sigma_bar_at(t_cur);
                const Vec stepped = euler_step(xbar, history.front(), dt);
                z_new = scaled(stepped, std::sqrt(a_next));
                break;
            }
            case SamplerKind::Pndm: {
                const Vec xbar = scaled(z, 1.0 / std::sqrt(a_cur));
                const double dt = schedule.sigma_bar_at(t_cur) - schedule.sigma_bar_at(t_next);
                std::vector<Vec> hist(history.begin(), history.end());
                const Vec stepped = adams_bashforth_step(hist, xbar, dt);
                z_new = scaled(stepped, std::sqrt(a_next));
                break;
            }
        }

        if (!state_ok(z_new)) {
            traj.diverged = true;
            break;
        }

        Evaluation ev_new = evaluate(guidance, z_new, a_next);
        StepRecord rec = make_record(i, t_next, z_new, diff(z_new, z), a_next, ev_new);

        if (hook) {
            StepContext ctx{rec, z, ev_new.eps_cfg, a_next};
            HookResult res = hook(ctx);
            if (res.new_latent) {
                z_new = std::move(*res.new_latent);
                if (!state_ok(z_new)) {
                    traj.diverged = true;
                    break;
                }
                ev_new = evaluate(guidance, z_new, a_next);
                rec = make_record(i, t_next, z_new, diff(z_new, z), a_next, ev_new);
            }
            rec.mitigation_applied = std::move(res.actions);
        }

        traj.records.push_back(std::move(rec));
        history.emplace_front(scaled(ev_new.eps_cfg, -1.0));
        if (history.size() > 4) history.pop_back();
        z = std::move(z_new);
        t_cur = t_next;
        a_cur = a_next;
    }
    return traj;
}

}  // namespace memstab
