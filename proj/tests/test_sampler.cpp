#include <doctest.h>

#include <array>
#include <cmath>
#include <vector>

#include "memstab/metrics.hpp"
#include "memstab/rng.hpp"
#include "memstab/sampler.hpp"
#include "memstab/schedule.hpp"

using namespace memstab;

namespace {

GuidanceConfig unit_gaussian_guidance(int d, double w = 0.0) {
    ScoreModelSpec m;
    m.dimension = d;
    m.components.push_back({Vec(static_cast<std::size_t>(d), 0.0), 1.0, 1.0});
    m.finalize();
    GuidanceConfig g;
    g.scale = w;
    g.conditional = m;
    g.unconditional = m;
    return g;
}

// solves the 4x4 system sum_i b_i (-i)^p = 1/(p+1), p = 0..3 (quadrature
// exactness of the AB4 extrapolation polynomial) by Gaussian elimination
std::array<double, 4> derive_ab4_weights() {
    double a[4][5];
    for (int p = 0; p < 4; ++p) {
        for (int i = 0; i < 4; ++i) a[p][i] = std::pow(static_cast<double>(-i), p);
        a[p][0] = p == 0 ? 1.0 : 0.0;  // (-0)^p
        a[p][4] = 1.0 / (p + 1);
    }
    for (int col = 0; col < 4; ++col) {
        int pivot = col;
        for (int r = col + 1; r < 4; ++r)
            if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
        for (int c = 0; c < 5; ++c) std::swap(a[col][c], a[pivot][c]);
        for (int r = 0; r < 4; ++r) {
            if (r == col) continue;
            const double f = a[r][col] / a[col][col];
            for (int c = col; c < 5; ++c) a[r][c] -= f * a[col][c];
        }
    }
    return {a[0][4] / a[0][0], a[1][4] / a[1][1], a[2][4] / a[2][2], a[3][4] / a[3][3]};
}

}  // namespace

TEST_CASE("reconstruct_z0") {
    SUBCASE("abar = 1 returns z") {
        const Vec z = {1.0, -2.0};
        CHECK(reconstruct_z0(z, {5.0, 5.0}, 1.0) == z);
    }
    SUBCASE("eps = 0 rescales by 1/sqrt(abar)") {
        const Vec out = reconstruct_z0({2.0, 0.0}, {0.0, 0.0}, 0.25);
        CHECK(out[0] == doctest::Approx(4.0).epsilon(1e-15));
    }
    SUBCASE("direct substitution oracle") {
        const Vec out = reconstruct_z0({2.0, 0.0}, {1.0, 0.0}, 0.25);
        const double expected = (2.0 - std::sqrt(0.75)) / 0.5;
        CHECK(out[0] == doctest::Approx(expected).epsilon(1e-12));
        CHECK(out[0] == doctest::Approx(2.2679491924311228).epsilon(1e-12));
        CHECK(out[1] == 0.0);
    }
    SUBCASE("bad abar") {
        CHECK_THROWS_AS(reconstruct_z0({1.0}, {0.0}, 0.0), std::invalid_argument);
    }
}

TEST_CASE("ddim_step") {
    SUBCASE("equal abar with zero eps is the identity") {
        const Vec z = {0.4, -1.1};
        const Vec out = ddim_step(z, {0.0, 0.0}, 0.3, 0.3);
        for (std::size_t i = 0; i < z.size(); ++i) CHECK(out[i] == doctest::Approx(z[i]).epsilon(1e-15));
    }
    SUBCASE("abar_prev = 1 with zero eps lands on z0") {
        const Vec out = ddim_step({2.0, 0.0}, {0.0, 0.0}, 0.25, 1.0);
        CHECK(out[0] == doctest::Approx(4.0).epsilon(1e-15));
    }
    SUBCASE("substitution oracle") {
        const Vec out = ddim_step({2.0, 0.0}, {1.0, 0.0}, 0.25, 0.5);
        const double z0 = (2.0 - std::sqrt(0.75)) / 0.5;
        const double expected = std::sqrt(0.5) * z0 + std::sqrt(0.5) * 1.0;
        CHECK(out[0] == doctest::Approx(expected).epsilon(1e-12));
        CHECK(out[0] == doctest::Approx(2.3107914).epsilon(1e-6));
    }
    SUBCASE("ddim equals the sigma-bar Euler step algebraically") {
        // xbar' = xbar + (sb_prev - sb_t) * eps, mapped back by sqrt(abar_prev)
        const Vec z = {0.9, -0.4, 1.7};
        const Vec eps = {0.2, 0.5, -1.0};
        const double at = 0.31, ap = 0.57;
        const Vec direct = ddim_step(z, eps, at, ap);
        const double sbt = std::sqrt(1.0 - at) / std::sqrt(at);
        const double sbp = std::sqrt(1.0 - ap) / std::sqrt(ap);
        Vec xbar = scaled(z, 1.0 / std::sqrt(at));
        axpy(sbp - sbt, eps, xbar);
        const Vec via_ode = scaled(xbar, std::sqrt(ap));
        for (std::size_t i = 0; i < z.size(); ++i)
            CHECK(direct[i] == doctest::Approx(via_ode[i]).epsilon(1e-12));
    }
}

TEST_CASE("euler_step") {
    CHECK(euler_step({1.0}, {0.0}, 0.3)[0] == 1.0);
    CHECK(euler_step({1.0}, {5.0}, 0.0)[0] == 1.0);
    // z' = -z from z=1: one step of 0.1 gives 0.9 with f = -(dz/dt) = z
    CHECK(euler_step({1.0}, {1.0}, 0.1)[0] == doctest::Approx(0.9).epsilon(1e-15));
}

TEST_CASE("adams-bashforth steps") {
    SUBCASE("equal history values collapse to a plain step (weights sum to 1)") {
        const Vec c = {2.0, -1.0};
        std::vector<Vec> hist(4, c);
        const Vec out = pndm_step(hist, {1.0, 1.0}, 0.5);
        CHECK(out[0] == doctest::Approx(1.0 + 0.5 * 2.0).epsilon(1e-12));
        CHECK(out[1] == doctest::Approx(1.0 - 0.5 * 1.0).epsilon(1e-12));
    }
    SUBCASE("zero prediction leaves the state unchanged") {
        std::vector<Vec> hist(4, Vec{0.0});
        CHECK(pndm_step(hist, {3.0}, 0.7)[0] == 3.0);
    }
    SUBCASE("short history is rejected") {
        std::vector<Vec> hist(3, Vec{0.0});
        CHECK_THROWS_AS(pndm_step(hist, {1.0}, 0.1), std::invalid_argument);
    }
    SUBCASE("AB4 weights reproduce the order-4 interpolation conditions") {
        const auto w = derive_ab4_weights();
        CHECK(w[0] == doctest::Approx(55.0 / 24.0).epsilon(1e-12));
        CHECK(w[1] == doctest::Approx(-59.0 / 24.0).epsilon(1e-12));
        CHECK(w[2] == doctest::Approx(37.0 / 24.0).epsilon(1e-12));
        CHECK(w[3] == doctest::Approx(-9.0 / 24.0).epsilon(1e-12));
        // and the implementation applies exactly these weights
        std::vector<Vec> hist = {Vec{1.0}, Vec{0.0}, Vec{0.0}, Vec{0.0}};
        CHECK(pndm_step(hist, {0.0}, 1.0)[0] == doctest::Approx(55.0 / 24.0).epsilon(1e-12));
        hist = {Vec{0.0}, Vec{1.0}, Vec{0.0}, Vec{0.0}};
        CHECK(pndm_step(hist, {0.0}, 1.0)[0] == doctest::Approx(-59.0 / 24.0).epsilon(1e-12));
    }
}

TEST_CASE("AB4 convergence order on z' = -z is at least 3.7") {
    const auto m = measure_order(OdeSolver::Ab4, -1.0, 1.0, 1.0, {16, 32, 64, 128});
    CHECK(!m.exact);
    CHECK(m.slope >= 3.7);
}

TEST_CASE("trajectory generation") {
    const auto schedule = select_inference_timesteps(make_linear_schedule(1000, 1e-4, 2e-2), 50);

    SUBCASE("unit-gaussian w=0: final norm matches the chi distribution, all z0 finite") {
        const int d = 8;
        const auto g = unit_gaussian_guidance(d, 0.0);
        double mean_norm = 0.0;
        const int n = 200;
        for (int i = 0; i < n; ++i) {
            const auto t = sample_trajectory(SamplerKind::Ddim, schedule, g, 1000 + static_cast<std::uint64_t>(i));
            REQUIRE(!t.diverged);
            REQUIRE(t.step_count() == 50);
            for (const auto& r : t.records) CHECK(std::isfinite(r.z0_hat_norm));
            mean_norm += t.records.back().latent_norm;
        }
        mean_norm /= n;
        // E||x|| for chi_8 = sqrt(2) Gamma(4.5)/Gamma(4); MC se ~ 0.05
        const double expected = std::sqrt(2.0) * std::tgamma(4.5) / std::tgamma(4.0);
        CHECK(mean_norm == doctest::Approx(expected).epsilon(0.06));
        CHECK(std::abs(mean_norm - std::sqrt(8.0)) < 0.25);
    }

    SUBCASE("observer hook leaves the trajectory bit-identical") {
        const auto g = unit_gaussian_guidance(4, 0.0);
        int called = 0;
        StepHook observer = [&](const StepContext&) {
            ++called;
            return HookResult{};
        };
        const auto a = sample_trajectory(SamplerKind::Pndm, schedule, g, 99);
        const auto b = sample_trajectory(SamplerKind::Pndm, schedule, g, 99, observer);
        CHECK(called == 49);
        REQUIRE(a.step_count() == b.step_count());
        for (int i = 0; i < a.step_count(); ++i) {
            CHECK(a.records[static_cast<std::size_t>(i)].latent ==
                  b.records[static_cast<std::size_t>(i)].latent);
            CHECK(a.records[static_cast<std::size_t>(i)].update ==
                  b.records[static_cast<std::size_t>(i)].update);
        }
    }

    SUBCASE("same seed gives identical trajectories") {
        const auto g = unit_gaussian_guidance(4, 0.0);
        for (auto kind : {SamplerKind::Euler, SamplerKind::Ddim, SamplerKind::Pndm}) {
            const auto a = sample_trajectory(kind, schedule, g, 1234);
            const auto b = sample_trajectory(kind, schedule, g, 1234);
            REQUIRE(a.step_count() == b.step_count());
            for (int i = 0; i < a.step_count(); ++i)
                CHECK(a.records[static_cast<std::size_t>(i)].latent ==
                      b.records[static_cast<std::size_t>(i)].latent);
        }
    }

    SUBCASE("update consistency: update(i) = latent(i) - latent(i-1) exactly") {
        const auto g = unit_gaussian_guidance(6, 0.0);
        for (auto kind : {SamplerKind::Euler, SamplerKind::Ddim, SamplerKind::Pndm}) {
            const auto t = sample_trajectory(kind, schedule, g, 7);
            for (int i = 1; i < t.step_count(); ++i) {
                const auto& cur = t.records[static_cast<std::size_t>(i)];
                const auto& prev = t.records[static_cast<std::size_t>(i - 1)];
                for (std::size_t j = 0; j < cur.latent.size(); ++j)
                    CHECK(cur.update[j] == cur.latent[j] - prev.latent[j]);
            }
            CHECK(norm(t.records[0].update) == 0.0);
        }
    }

    SUBCASE("exact unit-gaussian score keeps z0_hat bounded at every step") {
        const auto g = unit_gaussian_guidance(8, 0.0);
        for (std::uint64_t seed : {11u, 12u, 13u, 14u}) {
            const auto t = sample_trajectory(SamplerKind::Ddim, schedule, g, seed);
            // z0_hat = sqrt(abar) * z for the unit gaussian, so its norm never
            // exceeds the running latent norm
            for (const auto& r : t.records) CHECK(r.z0_hat_norm <= r.latent_norm + 1e-12);
        }
    }

    SUBCASE("blow-up marks the trajectory diverged without crashing") {
        ScoreModelSpec sharp;
        sharp.dimension = 2;
        sharp.components.push_back({{40.0, 0.0}, 1e-4, 1.0});
        sharp.finalize();
        ScoreModelSpec broad;
        broad.dimension = 2;
        broad.components.push_back({{0.0, 0.0}, 1.0, 1.0});
        broad.finalize();
        GuidanceConfig g;
        g.scale = 1e7;  // absurd guidance to force overflow
        g.conditional = sharp;
        g.unconditional = broad;
        const auto t = sample_trajectory(SamplerKind::Pndm, schedule, g, 3);
        CHECK(t.diverged);
        CHECK(t.step_count() < 50);
    }
}

TEST_CASE("euler sampler agrees with ddim to first order") {
    // identical update on the shared ODE view; tiny differences only from
    // floating-point association
    const auto schedule = select_inference_timesteps(make_linear_schedule(1000, 1e-4, 2e-2), 50);
    const auto g = unit_gaussian_guidance(4, 0.0);
    const auto a = sample_trajectory(SamplerKind::Ddim, schedule, g, 21);
    const auto b = sample_trajectory(SamplerKind::Euler, schedule, g, 21);
    REQUIRE(a.step_count() == b.step_count());
    for (int i = 0; i < a.step_count(); ++i) {
        const auto& ra = a.records[static_cast<std::size_t>(i)];
        const auto& rb = b.records[static_cast<std::size_t>(i)];
        CHECK(distance(ra.latent, rb.latent) < 1e-9 * (1.0 + ra.latent_norm));
    }
}
