#include "memstab/config.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace memstab {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw std::invalid_argument("config: " + path + ": " + what);
}

const json& member(const json& j, const std::string& path, const std::string& key) {
    if (!j.is_object()) fail(path, "expected an object");
    auto it = j.find(key);
    if (it == j.end()) fail(path + "." + key, "missing");
    return *it;
}

double get_number(const json& j, const std::string& path, const std::string& key) {
    const json& v = member(j, path, key);
    if (!v.is_number()) fail(path + "." + key, "expected a number");
    return v.get<double>();
}

int get_int(const json& j, const std::string& path, const std::string& key) {
    const json& v = member(j, path, key);
    if (!v.is_number_integer()) fail(path + "." + key, "expected an integer");
    return v.get<int>();
}

std::uint64_t get_u64(const json& j, const std::string& path, const std::string& key) {
    const json& v = member(j, path, key);
    if (!v.is_number_unsigned() && !v.is_number_integer()) fail(path + "." + key, "expected an integer");
    return v.get<std::uint64_t>();
}

bool get_bool(const json& j, const std::string& path, const std::string& key) {
    const json& v = member(j, path, key);
    if (!v.is_boolean()) fail(path + "." + key, "expected a boolean");
    return v.get<bool>();
}

std::string get_string(const json& j, const std::string& path, const std::string& key) {
    const json& v = member(j, path, key);
    if (!v.is_string()) fail(path + "." + key, "expected a string");
    return v.get<std::string>();
}

template <typename T>
std::vector<T> get_array(const json& j, const std::string& path, const std::string& key) {
    const json& v = member(j, path, key);
    if (!v.is_array()) fail(path + "." + key, "expected an array");
    try {
        return v.get<std::vector<T>>();
    } catch (const json::exception&) {
        fail(path + "." + key, "bad element type");
    }
}

ScoreModelSpec parse_scenario(const json& j, const std::string& path, int dimension) {
    ScoreModelSpec spec;
    spec.dimension = dimension;
    spec.label = model_label_from_string(get_string(j, path, "label"));
    const json& comps = member(j, path, "components");
    if (!comps.is_array() || comps.empty()) fail(path + ".components", "expected a non-empty array");
    int idx = 0;
    for (const auto& cj : comps) {
        const std::string cpath = path + ".components[" + std::to_string(idx++) + "]";
        GaussianComponent c;
        c.mean = get_array<double>(cj, cpath, "mean");
        if (static_cast<int>(c.mean.size()) != dimension) fail(cpath + ".mean", "wrong dimension");
        c.variance = get_number(cj, cpath, "variance");
        c.weight = get_number(cj, cpath, "weight");
        spec.components.push_back(std::move(c));
    }
    try {
        spec.finalize();
    } catch (const std::exception& e) {
        fail(path, e.what());
    }
    // A memorized model must carry a sharp component well below the broad scale.
    if (spec.label == ModelLabel::MemorizedConditional) {
        double min_var = std::numeric_limits<double>::infinity();
        for (const auto& c : spec.components) min_var = std::min(min_var, c.variance);
        if (min_var > 0.15 * 0.15) fail(path, "memorized_conditional has no sharp component");
    }
    return spec;
}

}  // namespace

NoiseSchedule ScheduleParams::build() const {
    return select_inference_timesteps(make_linear_schedule(num_train_steps, beta_start, beta_end),
                                      inference_steps);
}

const ScoreModelSpec& ExperimentConfig::scenario(const std::string& name) const {
    auto it = scenarios.find(name);
    if (it == scenarios.end()) throw std::invalid_argument("unknown scenario: " + name);
    return it->second;
}

GuidanceConfig ExperimentConfig::guidance_for(const std::string& scenario_name) const {
    GuidanceConfig g;
    g.scale = guidance_scale;
    g.conditional = scenario(scenario_name);
    g.unconditional = scenario("uncond");
    return g;
}

Vec ExperimentConfig::memorized_target(const std::string& scenario_name) const {
    const ScoreModelSpec& spec = scenario(scenario_name);
    if (spec.label != ModelLabel::MemorizedConditional)
        throw std::invalid_argument("memorized_target: scenario " + scenario_name +
                                    " is not memorized_conditional");
    std::size_t best = 0;
    for (std::size_t i = 1; i < spec.components.size(); ++i)
        if (spec.components[i].variance < spec.components[best].variance) best = i;
    return spec.components[best].mean;
}

double ExperimentConfig::replica_epsilon(const std::string& scenario_name) const {
    const ScoreModelSpec& spec = scenario(scenario_name);
    const Vec target = memorized_target(scenario_name);
    double nearest = std::numeric_limits<double>::infinity();
    for (const auto& c : spec.components) {
        const double d = distance(c.mean, target);
        if (d > 0.0) nearest = std::min(nearest, d);
    }
    if (!std::isfinite(nearest))
        throw std::invalid_argument("replica_epsilon: no other component mean");
    return 0.5 * nearest;
}

ExperimentConfig parse_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config: not valid JSON: ") + e.what());
    }

    ExperimentConfig cfg;
    cfg.dimension = get_int(j, "", "dimension");
    if (cfg.dimension < 1) fail("dimension", "must be positive");

    const json& sj = member(j, "", "schedule");
    cfg.schedule.num_train_steps = get_int(sj, "schedule", "num_train_steps");
    cfg.schedule.beta_start = get_number(sj, "schedule", "beta_start");
    cfg.schedule.beta_end = get_number(sj, "schedule", "beta_end");
    cfg.schedule.inference_steps = get_int(sj, "schedule", "inference_steps");
    if (cfg.schedule.inference_steps < 1 ||
        cfg.schedule.inference_steps > cfg.schedule.num_train_steps)
        fail("schedule.inference_steps", "out of range");

    cfg.guidance_scale = get_number(member(j, "", "guidance"), "guidance", "scale");
    if (cfg.guidance_scale < 0.0) fail("guidance.scale", "must be >= 0");

    const json& scen = member(j, "", "scenarios");
    if (!scen.is_object() || scen.empty()) fail("scenarios", "expected a non-empty object");
    for (auto it = scen.begin(); it != scen.end(); ++it)
        cfg.scenarios[it.key()] = parse_scenario(it.value(), "scenarios." + it.key(), cfg.dimension);
    if (cfg.scenarios.find("uncond") == cfg.scenarios.end())
        fail("scenarios.uncond", "missing (required unconditional model)");
    if (cfg.scenarios.at("uncond").label != ModelLabel::Unconditional)
        fail("scenarios.uncond.label", "must be unconditional");

    const json& st = member(j, "", "stability");
    cfg.stability.gamma = get_number(st, "stability", "gamma");
    cfg.stability.reference_count = get_int(st, "stability", "reference_count");
    cfg.stability.sampler = sampler_kind_from_string(get_string(st, "stability", "sampler"));
    cfg.stability.reference_seed_base = get_u64(st, "stability", "reference_seed_base");
    if (cfg.stability.reference_count < 2) fail("stability.reference_count", "must be >= 2");
    if (!(cfg.stability.gamma > 0.0)) fail("stability.gamma", "must be positive");

    const json& dt = member(j, "", "detection");
    cfg.detection.detection_steps = get_int(dt, "detection", "detection_steps");
    cfg.detection.target_fpr = get_number(dt, "detection", "target_fpr");
    cfg.detection.eval_seed_base = get_u64(dt, "detection", "eval_seed_base");
    cfg.detection.memorized_seed_base = get_u64(dt, "detection", "memorized_seed_base");
    cfg.detection.eval_count = get_int(dt, "detection", "eval_count");
    cfg.detection.steps_grid = get_array<int>(dt, "detection", "steps_grid");
    cfg.detection.multiseed_groups = get_array<int>(dt, "detection", "multiseed_groups");
    cfg.detection.reference_sweep = get_array<int>(dt, "detection", "reference_sweep");
    cfg.detection.dominance_gate = get_number(dt, "detection", "dominance_gate");
    cfg.detection.beta_min = get_number(dt, "detection", "beta_min");
    if (cfg.detection.detection_steps < 1 ||
        cfg.detection.detection_steps > cfg.schedule.inference_steps)
        fail("detection.detection_steps", "must be in [1, inference_steps]");
    if (!(cfg.detection.target_fpr > 0.0) || !(cfg.detection.target_fpr < 1.0))
        fail("detection.target_fpr", "must be in (0, 1)");

    const json& mt = member(j, "", "mitigation");
    cfg.mitigation.tau_mild = get_number(mt, "mitigation", "tau_mild");
    cfg.mitigation.tau_strong = get_number(mt, "mitigation", "tau_strong");
    cfg.mitigation.mild_steps_k = get_int(mt, "mitigation", "mild_steps_k");
    cfg.mitigation.rescale_z0 = get_bool(mt, "mitigation", "rescale_z0");
    cfg.mitigation.constrain_latent = get_bool(mt, "mitigation", "constrain_latent");
    cfg.mitigation.constrain_delta = get_bool(mt, "mitigation", "constrain_delta");
    try {
        cfg.mitigation.validate();
    } catch (const std::exception& e) {
        fail("mitigation", e.what());
    }
    if (cfg.mitigation.mild_steps_k > cfg.schedule.inference_steps)
        fail("mitigation.mild_steps_k", "exceeds inference_steps");

    const json& ex = member(j, "", "experiment");
    cfg.experiment.normal_study_count = get_int(ex, "experiment", "normal_study_count");
    cfg.experiment.timing_count = get_int(ex, "experiment", "timing_count");
    cfg.experiment.gamma_sweep = get_array<double>(ex, "experiment", "gamma_sweep");

    return cfg;
}

ExperimentConfig load_config(const std::string& path) { return parse_config(read_text_file(path)); }

std::uint64_t config_hash(const std::string& json_text) {
    // canonicalize: nlohmann::json orders object keys
    const std::string canon = nlohmann::json::parse(json_text).dump();
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : canon) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace memstab
