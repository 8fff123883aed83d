#include "memstab/trajectory_io.hpp"

#include <ostream>
#include <sstream>

#include <json.hpp>

namespace memstab {

namespace {

using nlohmann::json;

json record_to_json(const StepRecord& r, bool norms_only) {
    json j;
    j["step_index"] = r.step_index;
    j["train_timestep"] = r.train_timestep;
    j["latent"] = norms_only ? json::array() : json(r.latent);
    j["update_norm"] = r.update_norm;
    j["latent_norm"] = r.latent_norm;
    j["z0_hat_norm"] = r.z0_hat_norm;
    j["eps_cond_norm"] = r.eps_cond_norm;
    j["eps_uncond_norm"] = r.eps_uncond_norm;
    j["guidance_norm"] = r.guidance_norm;
    json actions = json::array();
    for (const auto a : r.mitigation_applied) actions.push_back(to_string(a));
    j["mitigation_applied"] = actions;
    return j;
}

MitigationAction action_from_string(const std::string& s) {
    if (s == "rescale_z0") return MitigationAction::RescaleZ0;
    if (s == "clamp_z") return MitigationAction::ClampZ;
    if (s == "clamp_delta") return MitigationAction::ClampDelta;
    throw std::invalid_argument("unknown mitigation action: " + s);
}

}  // namespace

void write_trajectory_jsonl(std::ostream& out, const Trajectory& trajectory, bool norms_only) {
    for (const auto& r : trajectory.records) out << record_to_json(r, norms_only).dump() << '\n';
}

std::string trajectory_to_jsonl(const Trajectory& trajectory, bool norms_only) {
    std::ostringstream ss;
    write_trajectory_jsonl(ss, trajectory, norms_only);
    return ss.str();
}

Trajectory read_trajectory_jsonl(std::istream& in) {
    Trajectory traj;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const json j = json::parse(line);
        StepRecord r;
        r.step_index = j.at("step_index").get<int>();
        r.train_timestep = j.at("train_timestep").get<int>();
        r.latent = j.at("latent").get<Vec>();
        r.update_norm = j.at("update_norm").get<double>();
        r.latent_norm = j.at("latent_norm").get<double>();
        r.z0_hat_norm = j.at("z0_hat_norm").get<double>();
        r.eps_cond_norm = j.at("eps_cond_norm").get<double>();
        r.eps_uncond_norm = j.at("eps_uncond_norm").get<double>();
        r.guidance_norm = j.at("guidance_norm").get<double>();
        for (const auto& a : j.at("mitigation_applied"))
            r.mitigation_applied.push_back(action_from_string(a.get<std::string>()));
        traj.records.push_back(std::move(r));
    }
    return traj;
}

Trajectory trajectory_from_jsonl(const std::string& text) {
    std::istringstream ss(text);
    return read_trajectory_jsonl(ss);
}

}  // namespace memstab
