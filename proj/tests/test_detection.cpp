#include <doctest.h>

#include <algorithm>
#include <stdexcept>
#include <cmath>

#include "memstab/detection.hpp"
#include "memstab/rng.hpp"

using namespace memstab;

namespace {

StabilityProfile flat_profile(int T, double mu, double sigma) {
    StabilityProfile p;
    p.gamma = 3.0;
    p.delta.assign(static_cast<std::size_t>(T), {mu, sigma});
    p.latent = p.delta;
    p.z0 = p.delta;
    return p;
}

Trajectory delta_trajectory(const std::vector<double>& delta_norms) {
    Trajectory t;
    for (std::size_t i = 0; i < delta_norms.size(); ++i) {
        StepRecord r;
        r.step_index = static_cast<int>(i);
        r.update_norm = delta_norms[i];
        t.records.push_back(std::move(r));
    }
    return t;
}

// enumeration oracle: smallest observed score whose >=-fraction is <= fpr
double threshold_oracle(std::vector<double> scores, double fpr) {
    std::sort(scores.begin(), scores.end());
    const double n = static_cast<double>(scores.size());
    for (double candidate : scores) {
        double ge = 0.0;
        for (double s : scores)
            if (s >= candidate) ge += 1.0;
        if (ge / n <= fpr) return candidate;
    }
    return scores.back();
}

double auc_bruteforce(const std::vector<double>& pos, const std::vector<double>& neg) {
    double total = 0.0;
    for (double p : pos)
        for (double q : neg) total += p > q ? 1.0 : (p == q ? 0.5 : 0.0);
    return total / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

}  // namespace

TEST_CASE("memorization_score") {
    const auto p = flat_profile(8, 0.0, 1.0);

    SUBCASE("all deltas at the mean score zero") {
        const auto t = delta_trajectory({0, 0, 0, 0});
        CHECK(memorization_score(t, p, 3) == 0.0);
    }
    SUBCASE("max over the prefix: (1, 5, 2) -> 5") {
        const auto t = delta_trajectory({0, 1, 5, 2});
        CHECK(memorization_score(t, p, 3) == doctest::Approx(5.0));
    }
    SUBCASE("monotone in s over a random batch") {
        GaussianSource rng(5);
        for (int rep = 0; rep < 100; ++rep) {
            std::vector<double> d(8);
            for (double& x : d) x = std::abs(rng.next());
            const auto t = delta_trajectory(d);
            CHECK(memorization_score(t, p, 7) >= memorization_score(t, p, 3));
        }
    }
    SUBCASE("s beyond the horizon is accepted for full-length trajectories") {
        const auto t = delta_trajectory({0, 1, 2, 3, 4, 5, 6, 9});
        CHECK(memorization_score(t, p, 8) == doctest::Approx(9.0));
    }
    SUBCASE("truncated trajectory is rejected when the window needs more") {
        const auto t = delta_trajectory({0, 1, 2});
        CHECK_THROWS_AS(memorization_score(t, p, 5), std::invalid_argument);
        CHECK_NOTHROW(memorization_score(t, p, 2));
    }
}

TEST_CASE("wen_guidance_magnitude returns the recorded guidance norm") {
    StepRecord r;
    r.guidance_norm = 2.0;
    r.eps_cond_norm = 3.0;
    r.eps_uncond_norm = 1.0;
    CHECK(wen_guidance_magnitude(r) == 2.0);
    r.guidance_norm = 0.0;
    CHECK(wen_guidance_magnitude(r) == 0.0);
}

TEST_CASE("calibrate_threshold") {
    SUBCASE("scores 1..100 at fpr 0.01 give threshold 100") {
        std::vector<double> scores;
        for (int i = 1; i <= 100; ++i) scores.push_back(i);
        const auto thr = calibrate_threshold(scores, 0.01);
        CHECK(thr.value == 100.0);
        CHECK(!thr.saturated);
    }
    SUBCASE("all scores equal returns that score") {
        const auto thr = calibrate_threshold({4.0, 4.0, 4.0}, 0.2);
        CHECK(thr.value == 4.0);
        CHECK(thr.saturated);
    }
    SUBCASE("fpr 0.5 on {1,2,3,4} picks the upper median") {
        const auto thr = calibrate_threshold({1.0, 2.0, 3.0, 4.0}, 0.5);
        CHECK(thr.value == 3.0);
        CHECK(thr.value == threshold_oracle({1, 2, 3, 4}, 0.5));
    }
    SUBCASE("matches the enumeration oracle on random inputs, with ties") {
        GaussianSource rng(21);
        for (int rep = 0; rep < 50; ++rep) {
            std::vector<double> scores;
            const int n = 20 + rep;
            for (int i = 0; i < n; ++i) scores.push_back(std::round(rng.next() * 4.0));
            for (double fpr : {0.05, 0.1, 0.3, 0.5}) {
                CHECK(calibrate_threshold(scores, fpr).value == threshold_oracle(scores, fpr));
            }
        }
    }
}

TEST_CASE("auc") {
    SUBCASE("perfect separation") { CHECK(auc({5, 6}, {1, 2}) == 1.0); }
    SUBCASE("identical multisets give one half") {
        CHECK(auc({1, 2, 3}, {1, 2, 3}) == doctest::Approx(0.5));
    }
    SUBCASE("pair-count example: 3/4") {
        CHECK(auc({3, 5}, {1, 4}) == doctest::Approx(0.75));
    }
    SUBCASE("singletons and swap symmetry") {
        CHECK(auc({2}, {1}) == 1.0);
        GaussianSource rng(3);
        std::vector<double> a(15), b(9);
        for (double& x : a) x = std::round(rng.next() * 3.0);
        for (double& x : b) x = std::round(rng.next() * 3.0);
        CHECK(auc(a, b) == doctest::Approx(1.0 - auc(b, a)).epsilon(1e-12));
    }
    SUBCASE("matches brute force with ties") {
        GaussianSource rng(9);
        for (int rep = 0; rep < 30; ++rep) {
            std::vector<double> a(12), b(17);
            for (double& x : a) x = std::round(rng.next() * 2.0);
            for (double& x : b) x = std::round(rng.next() * 2.0);
            CHECK(auc(a, b) == doctest::Approx(auc_bruteforce(a, b)).epsilon(1e-12));
        }
    }
    SUBCASE("invariant under strictly increasing transforms") {
        GaussianSource rng(31);
        std::vector<double> a(20), b(25);
        for (double& x : a) x = rng.next();
        for (double& x : b) x = rng.next();
        const double base = auc(a, b);
        auto f = [](double x) { return std::exp(0.7 * x) + 3.0; };
        std::vector<double> fa(a), fb(b);
        for (double& x : fa) x = f(x);
        for (double& x : fb) x = f(x);
        CHECK(auc(fa, fb) == doctest::Approx(base).epsilon(1e-12));
    }
    SUBCASE("empty input is rejected") {
        CHECK_THROWS_AS(auc({}, {1.0}), std::invalid_argument);
    }
}

TEST_CASE("tpr_at_fpr") {
    SUBCASE("perfect separation") {
        std::vector<double> normal;
        for (int i = 0; i < 200; ++i) normal.push_back(i * 0.01);
        CHECK(tpr_at_fpr({10, 11, 12}, normal, 0.01) == 1.0);
    }
    SUBCASE("single memorized score below threshold") {
        std::vector<double> normal;
        for (int i = 0; i < 100; ++i) normal.push_back(i);
        CHECK(tpr_at_fpr({-5.0}, normal, 0.05) == 0.0);
    }
    SUBCASE("identical distributions give roughly the fpr") {
        GaussianSource rng(17);
        std::vector<double> normal(2000), mem(2000);
        for (double& x : normal) x = rng.next();
        for (double& x : mem) x = rng.next();
        const double t = tpr_at_fpr(mem, normal, 0.05);
        CHECK(t > 0.02);
        CHECK(t < 0.09);
    }
}
