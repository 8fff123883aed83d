#include "memstab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "memstab/rng.hpp"

namespace memstab {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void parallel_for(int count, int jobs, const std::function<void(int)>& body) {
    if (jobs <= 1 || count <= 1) {
        for (int i = 0; i < count; ++i) body(i);
        return;
    }
    const int workers = std::min(jobs, count);
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    std::atomic<int> next{0};
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&]() {
            for (;;) {
                const int i = next.fetch_add(1);
                if (i >= count) return;
                body(i);
            }
        });
    }
    for (auto& t : pool) t.join();
}

std::string fmt_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::vector<Vec> final_latents(const std::vector<Trajectory>& batch, int expected_steps) {
    std::vector<Vec> out;
    out.reserve(batch.size());
    for (const auto& t : batch) {
        if (!t.diverged && t.step_count() == expected_steps)
            out.push_back(t.records.back().latent);
    }
    return out;
}

double diverged_rate(const std::vector<Trajectory>& batch) {
    double n = 0.0;
    for (const auto& t : batch)
        if (t.diverged) n += 1.0;
    return n / static_cast<double>(batch.size());
}

// replica rate over a batch; diverged/truncated trajectories count as
// non-replicas but stay in the denominator
double batch_replica_rate(const std::vector<Trajectory>& batch, const Vec& target, double eps,
                          int expected_steps) {
    double hits = 0.0;
    for (const auto& t : batch) {
        if (t.diverged || t.step_count() != expected_steps) continue;
        if (distance(t.records.back().latent, target) <= eps) hits += 1.0;
    }
    return hits / static_cast<double>(batch.size());
}

double pooled_violation_rate(const std::vector<Trajectory>& batch, const StabilityProfile& profile,
                             Channel channel, double gamma) {
    double viol = 0.0, total = 0.0;
    for (const auto& t : batch) {
        for (int i = 1; i < t.step_count(); ++i) {
            const auto& r = t.records[static_cast<std::size_t>(i)];
            const double v = channel == Channel::Delta ? r.update_norm
                           : channel == Channel::Latent ? r.latent_norm
                                                        : r.z0_hat_norm;
            if (zscore(profile, channel, i, v) > gamma) viol += 1.0;
            total += 1.0;
        }
    }
    return viol / total;
}

double whole_trajectory_violation_fraction(const std::vector<Trajectory>& batch,
                                           const StabilityProfile& profile, double gamma) {
    double viol = 0.0;
    for (const auto& t : batch) {
        for (int i = 1; i < t.step_count(); ++i) {
            if (zscore(profile, Channel::Delta, i, t.records[static_cast<std::size_t>(i)].update_norm) >
                gamma) {
                viol += 1.0;
                break;
            }
        }
    }
    return viol / static_cast<double>(batch.size());
}

std::vector<double> smem_scores(const std::vector<Trajectory>& batch,
                                const StabilityProfile& profile, int steps) {
    std::vector<double> out;
    out.reserve(batch.size());
    for (const auto& t : batch) out.push_back(memorization_score(t, profile, steps));
    return out;
}

std::vector<double> group_means(const std::vector<double>& scores, int group) {
    std::vector<double> out;
    for (std::size_t i = 0; i + static_cast<std::size_t>(group) <= scores.size();
         i += static_cast<std::size_t>(group)) {
        double s = 0.0;
        for (int k = 0; k < group; ++k) s += scores[i + static_cast<std::size_t>(k)];
        out.push_back(s / group);
    }
    return out;
}

void guard_out_dir(const std::string& out_dir, std::uint64_t cfg_hash, bool force) {
    const fs::path report = fs::path(out_dir) / "report.json";
    if (fs::exists(report) && !force) {
        const json j = json::parse(read_text_file(report.string()));
        const auto existing = j.value("config_hash", std::string());
        const std::string current = std::to_string(cfg_hash);
        if (!existing.empty() && existing != current)
            throw std::runtime_error("output directory " + out_dir +
                                     " holds a report for a different config (hash " + existing +
                                     " vs " + current + "); use --force to overwrite");
    }
    fs::create_directories(out_dir);
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
}

}  // namespace

std::vector<Trajectory> run_batch(const ExperimentConfig& cfg, const std::string& scenario,
                                  SamplerKind sampler, std::uint64_t seed_base, int count,
                                  const StabilityProfile* profile, const MitigationPolicy* policy,
                                  int jobs) {
    const NoiseSchedule schedule = cfg.schedule.build();
    const GuidanceConfig guidance = cfg.guidance_for(scenario);
    if (policy && !profile)
        throw std::invalid_argument("run_batch: mitigation requires a stability profile");

    std::vector<Trajectory> out(static_cast<std::size_t>(count));
    parallel_for(count, jobs, [&](int i) {
        const std::uint64_t seed = seed_base + static_cast<std::uint64_t>(i);
        if (policy) {
            Mitigator mitigator(*profile, *policy);
            StepHook hook = [&mitigator](const StepContext& ctx) { return mitigator(ctx); };
            Trajectory t = sample_trajectory(sampler, schedule, guidance, seed, hook);
            t.mem_type_final = mitigator.state().mem_type;
            out[static_cast<std::size_t>(i)] = std::move(t);
        } else {
            out[static_cast<std::size_t>(i)] = sample_trajectory(sampler, schedule, guidance, seed);
        }
    });
    return out;
}

StabilityProfile calibrate_profile(const ExperimentConfig& cfg, SamplerKind sampler,
                                   int reference_count, int jobs) {
    const int n = reference_count > 0 ? reference_count : cfg.stability.reference_count;
    const auto reference =
        run_batch(cfg, "normal", sampler, cfg.stability.reference_seed_base, n, nullptr, nullptr, jobs);
    return collect_profile(reference, cfg.stability.gamma);
}

void wen_relation_series(const std::vector<Trajectory>& memorized, double guidance_scale,
                         double dominance_gate, std::vector<double>& delta_norms,
                         std::vector<double>& scaled_wen) {
    delta_norms.clear();
    scaled_wen.clear();
    for (const auto& t : memorized) {
        for (int i = 1; i < t.step_count(); ++i) {
            const auto& departure = t.records[static_cast<std::size_t>(i - 1)];
            if (departure.eps_uncond_norm <= 0.0) continue;
            const double dominance = departure.eps_cond_norm / departure.eps_uncond_norm;
            if (dominance >= dominance_gate) {
                delta_norms.push_back(t.records[static_cast<std::size_t>(i)].update_norm);
                scaled_wen.push_back(guidance_scale * wen_guidance_magnitude(departure));
                break;  // first dominated step of this trajectory
            }
        }
    }
}

StabilityExperimentResult run_exp_stability(const ExperimentConfig& cfg, int jobs) {
    StabilityExperimentResult result;
    const int n_eval = cfg.detection.eval_count;
    for (SamplerKind sampler : {SamplerKind::Ddim, SamplerKind::Pndm}) {
        const StabilityProfile profile = calibrate_profile(cfg, sampler, 0, jobs);
        const auto normal =
            run_batch(cfg, "normal", sampler, cfg.detection.eval_seed_base, n_eval, nullptr, nullptr, jobs);
        const auto memorized = run_batch(cfg, "strong", sampler, cfg.detection.memorized_seed_base,
                                         n_eval, nullptr, nullptr, jobs);

        StabilitySamplerReport rep;
        rep.violation_rate_delta = pooled_violation_rate(normal, profile, Channel::Delta, profile.gamma);
        rep.violation_rate_z0 = pooled_violation_rate(normal, profile, Channel::Z0, profile.gamma);
        rep.whole_trajectory_gamma5 = whole_trajectory_violation_fraction(normal, profile, 5.0);
        rep.memorized_violation_fraction =
            whole_trajectory_violation_fraction(memorized, profile, profile.gamma);
        for (double g : cfg.experiment.gamma_sweep)
            rep.gamma_sweep_rates[g] = pooled_violation_rate(normal, profile, Channel::Delta, g);
        const int half = n_eval / 2;
        std::vector<Trajectory> a(normal.begin(), normal.begin() + half);
        std::vector<Trajectory> b(normal.begin() + half, normal.end());
        rep.split_half_delta_rate_a = pooled_violation_rate(a, profile, Channel::Delta, profile.gamma);
        rep.split_half_delta_rate_b = pooled_violation_rate(b, profile, Channel::Delta, profile.gamma);
        if (whole_trajectory_violation_fraction(memorized, profile, profile.gamma) == 0.0)
            throw std::runtime_error("exp_stability: memorized scenario never violates the delta region");
        result.per_sampler[to_string(sampler)] = rep;
    }
    return result;
}

DetectionExperimentResult run_exp_detection(const ExperimentConfig& cfg, int jobs) {
    DetectionExperimentResult result;
    const int n = cfg.detection.eval_count;
    const int horizon = cfg.schedule.inference_steps;

    for (SamplerKind sampler : {SamplerKind::Ddim, SamplerKind::Pndm}) {
        const std::string sampler_name = to_string(sampler);
        const StabilityProfile profile = calibrate_profile(cfg, sampler, 0, jobs);
        const auto normal =
            run_batch(cfg, "normal", sampler, cfg.detection.eval_seed_base, n, nullptr, nullptr, jobs);
        const auto strong = run_batch(cfg, "strong", sampler, cfg.detection.memorized_seed_base, n,
                                      nullptr, nullptr, jobs);
        const auto mild = run_batch(cfg, "mild", sampler,
                                    cfg.detection.memorized_seed_base + static_cast<std::uint64_t>(n),
                                    n, nullptr, nullptr, jobs);

        for (int s : cfg.detection.steps_grid) {
            const auto normal_scores = smem_scores(normal, profile, s);
            for (const auto* mem_batch : {&strong, &mild}) {
                const std::string scenario = mem_batch == &strong ? "strong" : "mild";
                const auto mem_scores = smem_scores(*mem_batch, profile, s);
                for (int g : cfg.detection.multiseed_groups) {
                    const auto mg = group_means(mem_scores, g);
                    const auto ng = group_means(normal_scores, g);
                    DetectionCell cell;
                    cell.sampler = sampler_name;
                    cell.scenario = scenario;
                    cell.detection_steps = s;
                    cell.num_seeds = g;
                    cell.auc = auc(mg, ng);
                    cell.tpr_at_fpr = tpr_at_fpr(mg, ng, cfg.detection.target_fpr);
                    result.cells.push_back(cell);
                }
            }
        }
        result.median_smem_strong[sampler_name] = median(smem_scores(strong, profile, horizon));

        std::vector<double> deltas, wens;
        wen_relation_series(strong, cfg.guidance_scale, cfg.detection.dominance_gate, deltas, wens);
        const double corr = deltas.size() >= 3 ? pearson(deltas, wens)
                                               : std::numeric_limits<double>::quiet_NaN();
        if (sampler == SamplerKind::Pndm) {
            result.wen_corr_pndm = corr;
            result.wen_points_pndm = static_cast<int>(deltas.size());
            std::vector<double> max_dominance;
            for (const auto& t : strong) {
                double best = 0.0;
                for (int i = 0; i < t.step_count(); ++i) {
                    const auto& r = t.records[static_cast<std::size_t>(i)];
                    if (r.eps_uncond_norm > 0.0)
                        best = std::max(best, r.eps_cond_norm / r.eps_uncond_norm);
                }
                max_dominance.push_back(best);
            }
            result.dominance_median_max_pndm = median(max_dominance);
        } else if (sampler == SamplerKind::Ddim) {
            result.wen_corr_ddim = corr;
        }

        if (sampler == cfg.stability.sampler) {
            // multiple-testing medians over a larger normal study set
            const auto study = run_batch(cfg, "normal", sampler, cfg.detection.eval_seed_base,
                                         cfg.experiment.normal_study_count, nullptr, nullptr, jobs);
            for (int s : {1, 3, 10, 25, 50}) {
                const int capped = std::min(s, horizon);
                result.normal_median_smem_by_steps[s] = median(smem_scores(study, profile, capped));
            }
            // reference-set size sweep
            for (int n_ref : cfg.detection.reference_sweep) {
                const StabilityProfile p = calibrate_profile(cfg, sampler, n_ref, jobs);
                result.reference_sweep_auc[n_ref] =
                    auc(smem_scores(strong, p, cfg.detection.detection_steps),
                        smem_scores(normal, p, cfg.detection.detection_steps));
            }
            // label-shuffle null control
            const auto ns = smem_scores(normal, profile, cfg.detection.detection_steps);
            const auto ms = smem_scores(strong, profile, cfg.detection.detection_steps);
            std::vector<double> pool(ns);
            pool.insert(pool.end(), ms.begin(), ms.end());
            deterministic_shuffle(pool, 424242);
            const std::vector<double> fake_mem(pool.begin(),
                                               pool.begin() + static_cast<long>(ms.size()));
            const std::vector<double> fake_norm(pool.begin() + static_cast<long>(ms.size()),
                                                pool.end());
            result.shuffled_auc = auc(fake_mem, fake_norm);
        }
    }
    return result;
}

MitigationExperimentResult run_exp_mitigation(const ExperimentConfig& cfg, int jobs) {
    MitigationExperimentResult result;
    const SamplerKind sampler = cfg.stability.sampler;
    const int n = cfg.detection.eval_count;
    const int horizon = cfg.schedule.inference_steps;
    const StabilityProfile profile = calibrate_profile(cfg, sampler, 0, jobs);

    // Online trigger threshold: 1%-FPR quantile of the per-trajectory maximum
    // delta Z-score over held-out normal generations.
    const auto normal =
        run_batch(cfg, "normal", sampler, cfg.detection.eval_seed_base, n, nullptr, nullptr, jobs);
    std::vector<double> max_z;
    max_z.reserve(normal.size());
    for (const auto& t : normal) max_z.push_back(memorization_score(t, profile, horizon));
    result.tau_online = calibrate_threshold(max_z, cfg.detection.target_fpr).value;

    MitigationPolicy online = cfg.mitigation;
    online.tau_mild = result.tau_online;

    struct CellSpec {
        const char* name;
        bool rescale, clamp_z, clamp_d;
    };
    const CellSpec cells[] = {
        {"default", cfg.mitigation.rescale_z0, cfg.mitigation.constrain_latent,
         cfg.mitigation.constrain_delta},
        {"z_only", false, true, false},
        {"delta_only", false, false, true},
        {"rescale_only", true, false, false},
    };

    for (const std::string scenario : {std::string("strong"), std::string("mild")}) {
        const Vec target = cfg.memorized_target(scenario);
        const double eps = cfg.replica_epsilon(scenario);
        result.replica_epsilon[scenario] = eps;
        const std::uint64_t base = scenario == "strong"
                                       ? cfg.detection.memorized_seed_base
                                       : cfg.detection.memorized_seed_base + static_cast<std::uint64_t>(n);

        auto record_cell = [&](const std::string& cell_name, const std::vector<Trajectory>& batch) {
            MitigationCell cell;
            cell.scenario = scenario;
            cell.cell = cell_name;
            cell.replica_rate = batch_replica_rate(batch, target, eps, horizon);
            cell.diverged_rate = diverged_rate(batch);
            double dmin = std::numeric_limits<double>::infinity();
            for (const auto& t : batch) {
                if (t.diverged || t.step_count() != horizon) continue;
                dmin = std::min(dmin, distance(t.records.back().latent, target));
            }
            cell.min_final_distance = dmin;
            long actions = 0;
            for (const auto& t : batch) {
                cell.mem_type_counts[to_string(t.mem_type_final)] += 1;
                for (const auto& r : t.records)
                    actions += static_cast<long>(r.mitigation_applied.size());
            }
            cell.action_count = actions;
            result.cells.push_back(std::move(cell));
        };

        record_cell("unmitigated", run_batch(cfg, scenario, sampler, base, n, nullptr, nullptr, jobs));
        for (const auto& spec : cells) {
            MitigationPolicy p = online;
            p.rescale_z0 = spec.rescale;
            p.constrain_latent = spec.clamp_z;
            p.constrain_delta = spec.clamp_d;
            record_cell(spec.name, run_batch(cfg, scenario, sampler, base, n, &profile, &p, jobs));
        }
    }

    // Hook overhead on normal trajectories, timed serially with interleaved arms.
    {
        const NoiseSchedule schedule = cfg.schedule.build();
        const GuidanceConfig guidance = cfg.guidance_for("normal");
        const int m = cfg.experiment.timing_count;
        std::vector<double> t_plain, t_hooked;
        t_plain.reserve(static_cast<std::size_t>(m));
        t_hooked.reserve(static_cast<std::size_t>(m));
        // warm-up pass
        (void)sample_trajectory(sampler, schedule, guidance, cfg.detection.eval_seed_base);
        using clock = std::chrono::steady_clock;
        for (int i = 0; i < m; ++i) {
            const std::uint64_t seed = cfg.detection.eval_seed_base + static_cast<std::uint64_t>(i);
            {
                const auto t0 = clock::now();
                (void)sample_trajectory(sampler, schedule, guidance, seed);
                t_plain.push_back(std::chrono::duration<double>(clock::now() - t0).count());
            }
            {
                Mitigator mitigator(profile, online);
                StepHook hook = [&mitigator](const StepContext& ctx) { return mitigator(ctx); };
                const auto t0 = clock::now();
                (void)sample_trajectory(sampler, schedule, guidance, seed, hook);
                t_hooked.push_back(std::chrono::duration<double>(clock::now() - t0).count());
            }
        }
        result.overhead_normal = overhead(t_plain, t_hooked);
        double su = 0.0, sm = 0.0;
        for (double x : t_plain) su += x;
        for (double x : t_hooked) sm += x;
        result.mean_time_unmitigated_s = su / static_cast<double>(m);
        result.mean_time_mitigated_s = sm / static_cast<double>(m);
    }
    return result;
}

namespace {

json stability_to_json(const StabilityExperimentResult& r) {
    json j;
    for (const auto& [sampler, rep] : r.per_sampler) {
        json s;
        s["violation_rate_delta"] = rep.violation_rate_delta;
        s["violation_rate_z0"] = rep.violation_rate_z0;
        s["whole_trajectory_gamma5"] = rep.whole_trajectory_gamma5;
        s["memorized_violation_fraction"] = rep.memorized_violation_fraction;
        json sweep;
        for (const auto& [g, rate] : rep.gamma_sweep_rates) sweep[fmt_double(g)] = rate;
        s["gamma_sweep_rates"] = sweep;
        s["split_half_delta_rate_a"] = rep.split_half_delta_rate_a;
        s["split_half_delta_rate_b"] = rep.split_half_delta_rate_b;
        j[sampler] = s;
    }
    return j;
}

json detection_to_json(const DetectionExperimentResult& r) {
    json j;
    json cells = json::array();
    for (const auto& c : r.cells) {
        cells.push_back({{"sampler", c.sampler},
                         {"scenario", c.scenario},
                         {"detection_steps", c.detection_steps},
                         {"num_seeds", c.num_seeds},
                         {"auc", c.auc},
                         {"tpr_at_fpr", c.tpr_at_fpr}});
    }
    j["cells"] = cells;
    j["median_smem_strong"] = r.median_smem_strong;
    json mt;
    for (const auto& [s, m] : r.normal_median_smem_by_steps) mt[std::to_string(s)] = m;
    j["normal_median_smem_by_steps"] = mt;
    json sweep;
    for (const auto& [nref, a] : r.reference_sweep_auc) sweep[std::to_string(nref)] = a;
    j["reference_sweep_auc"] = sweep;
    j["shuffled_auc"] = r.shuffled_auc;
    j["wen_corr_pndm"] = r.wen_corr_pndm;
    j["wen_corr_ddim"] =
        std::isfinite(r.wen_corr_ddim) ? json(r.wen_corr_ddim) : json();
    j["wen_points_pndm"] = r.wen_points_pndm;
    j["dominance_median_max_pndm"] = r.dominance_median_max_pndm;
    return j;
}

json mitigation_to_json(const MitigationExperimentResult& r) {
    json j;
    json cells = json::array();
    for (const auto& c : r.cells) {
        json cj;
        cj["scenario"] = c.scenario;
        cj["cell"] = c.cell;
        cj["replica_rate"] = c.replica_rate;
        cj["diverged_rate"] = c.diverged_rate;
        cj["min_final_distance"] =
            std::isfinite(c.min_final_distance) ? json(c.min_final_distance) : json();
        cj["mem_type_counts"] = c.mem_type_counts;
        cj["action_count"] = c.action_count;
        cells.push_back(cj);
    }
    j["cells"] = cells;
    j["tau_online"] = r.tau_online;
    j["overhead_normal"] = r.overhead_normal;
    j["mean_time_unmitigated_s"] = r.mean_time_unmitigated_s;
    j["mean_time_mitigated_s"] = r.mean_time_mitigated_s;
    j["replica_epsilon"] = r.replica_epsilon;
    return j;
}

void write_report(const std::string& out_dir, std::uint64_t cfg_hash, const std::string& experiment,
                  json body) {
    body["experiment"] = experiment;
    body["config_hash"] = std::to_string(cfg_hash);
    write_file(fs::path(out_dir) / "report.json", body.dump(2) + "\n");
}

}  // namespace

void write_exp_stability(const ExperimentConfig& cfg, std::uint64_t cfg_hash,
                         const std::string& out_dir, int jobs, bool force) {
    guard_out_dir(out_dir, cfg_hash, force);
    const auto result = run_exp_stability(cfg, jobs);

    // band + per-trajectory series CSVs for external plotting
    for (SamplerKind sampler : {SamplerKind::Ddim, SamplerKind::Pndm}) {
        const StabilityProfile profile = calibrate_profile(cfg, sampler, 0, jobs);
        std::string bands = "step,mu_delta,lo_delta,hi_delta,mu_latent,lo_latent,hi_latent,mu_z0,lo_z0,hi_z0\n";
        for (int i = 0; i < profile.step_count(); ++i) {
            const auto row = [&](Channel c) {
                if (c == Channel::Delta && i == 0) return std::string("0,0,0");
                const auto iv = region(profile, c, i);
                const double mu = profile.channel(c)[static_cast<std::size_t>(i)].mu;
                return fmt_double(mu) + "," + fmt_double(iv.lower) + "," + fmt_double(iv.upper);
            };
            bands += std::to_string(i) + "," + row(Channel::Delta) + "," + row(Channel::Latent) +
                     "," + row(Channel::Z0) + "\n";
        }
        write_file(fs::path(out_dir) / ("bands_" + to_string(sampler) + ".csv"), bands);

        std::string series = "scenario,seed,step,delta_norm,latent_norm,z0_norm\n";
        for (const std::string scenario : {std::string("normal"), std::string("strong")}) {
            const std::uint64_t base = scenario == "normal" ? cfg.detection.eval_seed_base
                                                            : cfg.detection.memorized_seed_base;
            const auto batch = run_batch(cfg, scenario, sampler, base, 10, nullptr, nullptr, jobs);
            for (const auto& t : batch) {
                for (const auto& r : t.records) {
                    series += scenario + "," + std::to_string(t.seed) + "," +
                              std::to_string(r.step_index) + "," + fmt_double(r.update_norm) + "," +
                              fmt_double(r.latent_norm) + "," + fmt_double(r.z0_hat_norm) + "\n";
                }
            }
        }
        write_file(fs::path(out_dir) / ("series_" + to_string(sampler) + ".csv"), series);
    }
    write_report(out_dir, cfg_hash, "stability", stability_to_json(result));
}

void write_exp_detection(const ExperimentConfig& cfg, std::uint64_t cfg_hash,
                         const std::string& out_dir, int jobs, bool force) {
    guard_out_dir(out_dir, cfg_hash, force);
    const auto result = run_exp_detection(cfg, jobs);
    std::string csv = "sampler,scenario,detection_steps,num_seeds,auc,tpr_at_fpr\n";
    for (const auto& c : result.cells) {
        csv += c.sampler + "," + c.scenario + "," + std::to_string(c.detection_steps) + "," +
               std::to_string(c.num_seeds) + "," + fmt_double(c.auc) + "," +
               fmt_double(c.tpr_at_fpr) + "\n";
    }
    write_file(fs::path(out_dir) / "detection_metrics.csv", csv);
    write_report(out_dir, cfg_hash, "detection", detection_to_json(result));
}

void write_exp_mitigation(const ExperimentConfig& cfg, std::uint64_t cfg_hash,
                          const std::string& out_dir, int jobs, bool force) {
    guard_out_dir(out_dir, cfg_hash, force);
    const auto result = run_exp_mitigation(cfg, jobs);
    std::string csv = "scenario,cell,replica_rate,diverged_rate,action_count\n";
    for (const auto& c : result.cells) {
        csv += c.scenario + "," + c.cell + "," + fmt_double(c.replica_rate) + "," +
               fmt_double(c.diverged_rate) + "," + std::to_string(c.action_count) + "\n";
    }
    write_file(fs::path(out_dir) / "mitigation_cells.csv", csv);

    // per-seed summary for the default-policy runs
    const SamplerKind sampler = cfg.stability.sampler;
    const StabilityProfile profile = calibrate_profile(cfg, sampler, 0, jobs);
    MitigationPolicy online = cfg.mitigation;
    online.tau_mild = result.tau_online;
    std::string runs = "scenario,seed,mem_type,first_trigger_step,action_count,replica\n";
    const int horizon = cfg.schedule.inference_steps;
    for (const std::string scenario : {std::string("strong"), std::string("mild")}) {
        const Vec target = cfg.memorized_target(scenario);
        const double eps = cfg.replica_epsilon(scenario);
        const std::uint64_t base =
            scenario == "strong"
                ? cfg.detection.memorized_seed_base
                : cfg.detection.memorized_seed_base + static_cast<std::uint64_t>(cfg.detection.eval_count);
        const NoiseSchedule schedule = cfg.schedule.build();
        const GuidanceConfig guidance = cfg.guidance_for(scenario);
        for (int i = 0; i < cfg.detection.eval_count; ++i) {
            Mitigator mitigator(profile, online);
            StepHook hook = [&mitigator](const StepContext& ctx) { return mitigator(ctx); };
            const std::uint64_t seed = base + static_cast<std::uint64_t>(i);
            const Trajectory t = sample_trajectory(sampler, schedule, guidance, seed, hook);
            const auto& st = mitigator.state();
            const bool replica = !t.diverged && t.step_count() == horizon &&
                                 distance(t.records.back().latent, target) <= eps;
            runs += scenario + "," + std::to_string(seed) + "," + to_string(st.mem_type) + "," +
                    (st.first_trigger_step ? std::to_string(*st.first_trigger_step) : "-") + "," +
                    std::to_string(st.events.size()) + "," + (replica ? "1" : "0") + "\n";
        }
    }
    write_file(fs::path(out_dir) / "mitigation_runs.csv", runs);
    write_report(out_dir, cfg_hash, "mitigation", mitigation_to_json(result));
}

}  // namespace memstab
