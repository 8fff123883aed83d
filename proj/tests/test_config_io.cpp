#include <doctest.h>

#include <cmath>

#include "memstab/config.hpp"
#include "memstab/harness.hpp"
#include "memstab/trajectory_io.hpp"

using namespace memstab;

TEST_CASE("default config loads and validates") {
    const auto cfg = load_config(MEMSTAB_DEFAULT_CONFIG);
    CHECK(cfg.dimension == 8);
    CHECK(cfg.schedule.inference_steps == 50);
    CHECK(cfg.guidance_scale == 7.5);
    CHECK(cfg.stability.gamma == 3.0);
    CHECK(cfg.mitigation.tau_strong == 14.0);
    CHECK(cfg.scenarios.size() == 4);
    CHECK(cfg.scenario("strong").label == ModelLabel::MemorizedConditional);
    CHECK(cfg.scenario("normal").label == ModelLabel::NormalConditional);

    SUBCASE("weights normalized within 1e-12") {
        for (const auto& [name, spec] : cfg.scenarios) {
            double total = 0.0;
            for (const auto& c : spec.components) total += c.weight;
            CHECK(std::abs(total - 1.0) < 1e-12);
        }
    }
    SUBCASE("memorized target is the sharp component, epsilon is half the decoy gap") {
        const Vec target = cfg.memorized_target("strong");
        CHECK(norm(target) == doctest::Approx(3.85).epsilon(1e-12));
        CHECK(cfg.replica_epsilon("strong") == doctest::Approx(0.8).epsilon(1e-9));
        CHECK(cfg.replica_epsilon("mild") == doctest::Approx(0.85).epsilon(1e-9));
        CHECK_THROWS_AS(cfg.memorized_target("normal"), std::invalid_argument);
    }
}

TEST_CASE("malformed configs fail with a field path") {
    SUBCASE("missing section") {
        try {
            parse_config(R"({"dimension": 8})");
            FAIL("expected throw");
        } catch (const std::invalid_argument& e) {
            CHECK(std::string(e.what()).find("schedule") != std::string::npos);
        }
    }
    SUBCASE("bad type deep in a scenario") {
        const std::string text = R"({
          "dimension": 2,
          "schedule": {"num_train_steps": 10, "beta_start": 1e-4, "beta_end": 0.02, "inference_steps": 5},
          "guidance": {"scale": 1.0},
          "scenarios": {"uncond": {"label": "unconditional",
                        "components": [{"mean": [0, 0], "variance": "big", "weight": 1.0}]}},
          "stability": {"gamma": 3.0, "reference_count": 5, "sampler": "ddim", "reference_seed_base": 1},
          "detection": {"detection_steps": 3, "target_fpr": 0.01, "eval_seed_base": 2,
                        "memorized_seed_base": 3, "eval_count": 5, "steps_grid": [1],
                        "multiseed_groups": [1], "reference_sweep": [5],
                        "dominance_gate": 5.0, "beta_min": 5.0},
          "mitigation": {"tau_mild": 3.0, "tau_strong": 14.0, "mild_steps_k": 2,
                         "rescale_z0": true, "constrain_latent": true, "constrain_delta": true},
          "experiment": {"normal_study_count": 5, "timing_count": 2, "gamma_sweep": [3.0]}
        })";
        try {
            parse_config(text);
            FAIL("expected throw");
        } catch (const std::invalid_argument& e) {
            CHECK(std::string(e.what()).find("scenarios.uncond.components[0].variance") !=
                  std::string::npos);
        }
    }
}

TEST_CASE("config hash is stable under formatting, sensitive to values") {
    const std::string a = R"({"b": 1, "a": [1, 2]})";
    const std::string b = "{\"a\":[1,2],  \"b\":1}";
    const std::string c = R"({"b": 2, "a": [1, 2]})";
    CHECK(config_hash(a) == config_hash(b));
    CHECK(config_hash(a) != config_hash(c));
}

TEST_CASE("trajectory JSONL round trip") {
    const auto cfg = load_config(MEMSTAB_DEFAULT_CONFIG);
    const auto batch = run_batch(cfg, "normal", SamplerKind::Ddim, 777, 1);
    const Trajectory& t = batch[0];

    SUBCASE("full latents survive") {
        const Trajectory back = trajectory_from_jsonl(trajectory_to_jsonl(t));
        REQUIRE(back.step_count() == t.step_count());
        for (int i = 0; i < t.step_count(); ++i) {
            const auto& a = t.records[static_cast<std::size_t>(i)];
            const auto& b = back.records[static_cast<std::size_t>(i)];
            CHECK(a.latent == b.latent);
            CHECK(a.update_norm == b.update_norm);
            CHECK(a.z0_hat_norm == b.z0_hat_norm);
            CHECK(a.guidance_norm == b.guidance_norm);
            CHECK(a.train_timestep == b.train_timestep);
        }
    }
    SUBCASE("norms-only elides latent vectors but keeps every scalar") {
        const Trajectory back = trajectory_from_jsonl(trajectory_to_jsonl(t, true));
        REQUIRE(back.step_count() == t.step_count());
        for (int i = 0; i < t.step_count(); ++i) {
            CHECK(back.records[static_cast<std::size_t>(i)].latent.empty());
            CHECK(back.records[static_cast<std::size_t>(i)].update_norm ==
                  t.records[static_cast<std::size_t>(i)].update_norm);
        }
    }
    SUBCASE("serialization is deterministic") {
        CHECK(trajectory_to_jsonl(t) == trajectory_to_jsonl(t));
    }
}
