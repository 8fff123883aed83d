#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "memstab/config.hpp"
#include "memstab/harness.hpp"
#include "memstab/trajectory_io.hpp"

namespace fs = std::filesystem;
using namespace memstab;

namespace {

struct LoadedConfig {
    ExperimentConfig cfg;
    std::uint64_t hash = 0;
};

LoadedConfig load(const std::string& path) {
    const std::string text = read_text_file(path);
    return {parse_config(text), config_hash(text)};
}

// minimal glob: '*' in the filename component only
std::vector<fs::path> expand_glob(const std::string& pattern) {
    const fs::path p(pattern);
    const std::string name = p.filename().string();
    const fs::path dir = p.parent_path().empty() ? fs::path(".") : p.parent_path();
    const auto star = name.find('*');
    if (star == std::string::npos) return {p};
    const std::string prefix = name.substr(0, star);
    const std::string suffix = name.substr(star + 1);
    std::vector<fs::path> out;
    if (!fs::is_directory(dir)) return out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string f = entry.path().filename().string();
        if (f.size() >= prefix.size() + suffix.size() && f.compare(0, prefix.size(), prefix) == 0 &&
            f.compare(f.size() - suffix.size(), suffix.size(), suffix) == 0)
            out.push_back(entry.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

// Trajectory files are named <scenario>__seed<N>.jsonl by `sample`; detect
// recovers scenario/seed/label from the name.
struct FileMeta {
    std::string scenario = "unknown";
    std::string seed = "-";
    bool memorized = false;
};

FileMeta parse_file_meta(const fs::path& path) {
    FileMeta meta;
    std::string stem = path.stem().string();
    const auto sep = stem.find("__seed");
    if (sep != std::string::npos) {
        meta.scenario = stem.substr(0, sep);
        meta.seed = stem.substr(sep + 6);
    } else {
        meta.scenario = stem;
    }
    meta.memorized = meta.scenario == "strong" || meta.scenario == "mild" ||
                     meta.scenario.find("mem") != std::string::npos;
    return meta;
}

int run_calibrate(const std::string& config_path, const std::string& out_path, int jobs) {
    const LoadedConfig lc = load(config_path);
    const StabilityProfile profile = calibrate_profile(lc.cfg, lc.cfg.stability.sampler, 0, jobs);
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + out_path);
    out << profile_to_json(profile) << "\n";
    std::cout << "wrote profile (" << profile.reference_count << " references, gamma "
              << profile.gamma << ") to " << out_path << "\n";
    return 0;
}

int run_sample(const std::string& config_path, const std::string& sampler_name,
               const std::string& scenario, std::uint64_t seed, bool mitigate,
               const std::string& profile_path, const std::string& out_path, bool norms_only) {
    const LoadedConfig lc = load(config_path);
    const SamplerKind kind = sampler_kind_from_string(sampler_name);
    const NoiseSchedule schedule = lc.cfg.schedule.build();
    const GuidanceConfig guidance = lc.cfg.guidance_for(scenario);

    Trajectory traj;
    if (mitigate) {
        if (profile_path.empty())
            throw std::runtime_error("--mitigate requires --profile profile.json");
        const StabilityProfile profile = profile_from_json(read_text_file(profile_path));
        Mitigator mitigator(profile, lc.cfg.mitigation);
        StepHook hook = [&mitigator](const StepContext& ctx) { return mitigator(ctx); };
        traj = sample_trajectory(kind, schedule, guidance, seed, hook);
        traj.mem_type_final = mitigator.state().mem_type;
    } else {
        traj = sample_trajectory(kind, schedule, guidance, seed);
    }
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + out_path);
    write_trajectory_jsonl(out, traj, norms_only);
    if (traj.diverged) std::cout << "trajectory diverged after " << traj.step_count() << " steps\n";
    return 0;
}

int run_detect(const std::string& profile_path, const std::string& glob, int steps, double fpr,
               const std::string& out_path) {
    const StabilityProfile profile = profile_from_json(read_text_file(profile_path));
    const auto files = expand_glob(glob);
    if (files.empty()) throw std::runtime_error("no trajectory files match " + glob);

    struct Row {
        FileMeta meta;
        double score = 0.0;
    };
    std::vector<Row> rows;
    std::vector<double> normal_scores;
    for (const auto& f : files) {
        std::ifstream in(f, std::ios::binary);
        if (!in) throw std::runtime_error("cannot read " + f.string());
        const Trajectory t = read_trajectory_jsonl(in);
        Row row{parse_file_meta(f), memorization_score(t, profile, steps)};
        if (!row.meta.memorized) normal_scores.push_back(row.score);
        rows.push_back(std::move(row));
    }
    if (normal_scores.empty())
        throw std::runtime_error("detect: no normal-labelled trajectories to calibrate on");
    const ThresholdResult thr = calibrate_threshold(normal_scores, fpr);
    if (thr.saturated)
        std::cerr << "warning: sample too small for fpr " << fpr << "; threshold saturated at max\n";

    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + out_path);
    out << "scenario,seed,label,s,S_mem,threshold,flagged\n";
    for (const auto& r : rows) {
        out << r.meta.scenario << "," << r.meta.seed << ","
            << (r.meta.memorized ? "memorized" : "normal") << "," << steps << ","
            << nlohmann::json(r.score).dump() << "," << nlohmann::json(thr.value).dump() << ","
            << (r.score >= thr.value ? "1" : "0") << "\n";
    }
    return 0;
}

int run_experiment(const std::string& which, const std::string& config_path,
                   const std::string& out_dir, int jobs, bool force) {
    const LoadedConfig lc = load(config_path);
    if (which == "stability") {
        write_exp_stability(lc.cfg, lc.hash, out_dir, jobs, force);
    } else if (which == "detection") {
        write_exp_detection(lc.cfg, lc.hash, out_dir, jobs, force);
    } else if (which == "mitigation") {
        write_exp_mitigation(lc.cfg, lc.hash, out_dir, jobs, force);
    } else {
        throw std::runtime_error("unknown experiment: " + which);
    }
    std::cout << "experiment " << which << " written to " << out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"memstab: stability-region memorization laboratory"};
    app.require_subcommand(1);

    std::string config_path, out_path, profile_path, sampler_name = "ddim", scenario = "normal";
    std::string glob, experiment_name, out_dir;
    std::uint64_t seed = 0;
    int steps = 3, jobs = 1;
    double fpr = 0.01;
    bool mitigate = false, norms_only = false, force = false;

    auto* calibrate = app.add_subcommand("calibrate", "build a stability profile from the reference scenario");
    calibrate->add_option("--config", config_path, "experiment config JSON")->required();
    calibrate->add_option("--out", out_path, "output profile.json")->required();
    calibrate->add_option("--jobs", jobs, "trajectory-level parallelism");

    auto* sample = app.add_subcommand("sample", "generate one trajectory as JSONL");
    sample->add_option("--config", config_path)->required();
    sample->add_option("--sampler", sampler_name, "euler|ddim|pndm");
    sample->add_option("--scenario", scenario, "scenario name from the config");
    sample->add_option("--seed", seed)->required();
    sample->add_flag("--mitigate", mitigate, "run with the mitigation hook");
    sample->add_option("--profile", profile_path, "stability profile for --mitigate");
    sample->add_option("--out", out_path)->required();
    sample->add_flag("--norms-only", norms_only, "elide latent vectors from the JSONL");

    auto* detect = app.add_subcommand("detect", "score trajectory files and flag at a calibrated threshold");
    detect->add_option("--profile", profile_path)->required();
    detect->add_option("--trajectories", glob, "file or glob (scenario__seedN.jsonl)")->required();
    detect->add_option("--steps", steps, "detection steps s");
    detect->add_option("--fpr", fpr, "target false positive rate");
    detect->add_option("--out", out_path)->required();

    auto* experiment = app.add_subcommand("experiment", "run a canned experiment");
    experiment->add_option("name", experiment_name, "stability|detection|mitigation")->required();
    experiment->add_option("--config", config_path)->required();
    experiment->add_option("--out", out_dir, "output directory")->required();
    experiment->add_option("--jobs", jobs, "trajectory-level parallelism");
    experiment->add_flag("--force", force, "overwrite a report for a different config");

    CLI11_PARSE(app, argc, argv);

    try {
        if (calibrate->parsed()) return run_calibrate(config_path, out_path, jobs);
        if (sample->parsed())
            return run_sample(config_path, sampler_name, scenario, seed, mitigate, profile_path,
                              out_path, norms_only);
        if (detect->parsed()) return run_detect(profile_path, glob, steps, fpr, out_path);
        if (experiment->parsed())
            return run_experiment(experiment_name, config_path, out_dir, jobs, force);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
