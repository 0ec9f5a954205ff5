#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "aigc_alloc/errors.hpp"
#include "aigc_alloc/scenario.hpp"

using namespace aigc;

namespace {

// The bandwidth-tight two-user instance used across several checks.
Scenario two_user_tight() {
    Scenario s;
    s.num_users = 2;
    s.bandwidth_budget = 15.0;
    s.compute_budget = 1000.0;
    s.qoe_threshold = {0.5, 0.5};
    s.max_bitrate = 10.0;
    s.ref_bitrate = 10.0;
    s.similarity_floor = 0.2;
    s.similarity_ceiling = 1.0;
    s.max_diffusion_step = 10;
    s.validate();
    return s;
}

}  // namespace

TEST_CASE("bitrate is linear in the resolution ratio") {
    Scenario s = preset_scenario("default");
    s.max_bitrate = 25.0;
    CHECK(bitrate(1.0, s) == doctest::Approx(25.0));
    CHECK(bitrate(0.5, s) == doctest::Approx(12.5));
    s.max_bitrate = 10.0;
    CHECK(bitrate(0.1, s) == doctest::Approx(1.0));
    CHECK_THROWS_AS(bitrate(0.05, s), DomainError);
    CHECK_THROWS_AS(bitrate(1.2, s), DomainError);
}

TEST_CASE("similarity interpolates between floor and ceiling") {
    Scenario s = preset_scenario("default");
    s.similarity_floor = 0.2;
    s.similarity_ceiling = 1.0;
    s.max_diffusion_step = 10;
    CHECK(similarity(10, s) == doctest::Approx(1.0));
    CHECK(similarity(5, s) == doctest::Approx(0.6));
    Scenario single = s;
    single.max_diffusion_step = 1;
    CHECK(similarity(1, single) == doctest::Approx(1.0));
    CHECK_THROWS_AS(similarity(0, s), DomainError);
    CHECK_THROWS_AS(similarity(11, s), DomainError);
}

TEST_CASE("user_qoe is the weighted combination with a capped bitrate term") {
    Scenario s = preset_scenario("default");
    s.max_bitrate = 10.0;
    s.ref_bitrate = 10.0;
    s.similarity_floor = 0.2;
    s.similarity_ceiling = 1.0;
    s.max_diffusion_step = 10;
    CHECK(user_qoe(1.0, 10, s) == doctest::Approx(1.0));
    CHECK(user_qoe(0.5, 5, s) == doctest::Approx(0.55));
    Scenario rate_only = s;
    rate_only.weight_bitrate = 1.0;
    rate_only.weight_similarity = 0.0;
    CHECK(user_qoe(0.3, 4, rate_only) == doctest::Approx(0.3));
}

TEST_CASE("user_qoe is monotone in both decision variables") {
    const Scenario s = preset_scenario("default");
    for (int ri = 0; ri + 1 < 10; ++ri) {
        const double r0 = 0.1 + 0.1 * ri, r1 = 0.1 + 0.1 * (ri + 1);
        for (int d = 1; d < s.max_diffusion_step; ++d) {
            CHECK(user_qoe(r1, d, s) >= user_qoe(r0, d, s) - 1e-12);
            CHECK(user_qoe(r0, d + 1, s) >= user_qoe(r0, d, s) - 1e-12);
        }
    }
}

TEST_CASE("evaluate: feasible maximum for one unconstrained user") {
    Scenario s;
    s.num_users = 1;
    s.bandwidth_budget = 1000.0;
    s.compute_budget = 1000.0;
    s.qoe_threshold = {0.5};
    s.max_bitrate = 10.0;
    s.ref_bitrate = 10.0;
    const Decision d{{1.0}, {s.max_diffusion_step}};
    const QoEReport report = evaluate(s, d);
    CHECK(report.total_qoe == doctest::Approx(1.0));
    CHECK(report.penalty == 0.0);
    CHECK(report.reward == doctest::Approx(1.0));
    CHECK(report.bandwidth_feasible);
    CHECK(report.compute_feasible);
    CHECK(report.threshold_met[0]);
}

TEST_CASE("evaluate: brute-force optimum of the bandwidth-tight instance is 1.75") {
    const Scenario s = two_user_tight();
    // independent oracle: exhaustive grid r in {0.1..1.0}, d in {1..10}
    double best = -1e9;
    for (int r0 = 1; r0 <= 10; ++r0)
        for (int r1 = 1; r1 <= 10; ++r1)
            for (int d0 = 1; d0 <= 10; ++d0)
                for (int d1 = 1; d1 <= 10; ++d1) {
                    const Decision d{{0.1 * r0, 0.1 * r1}, {d0, d1}};
                    const QoEReport rep = evaluate(s, d);
                    if (rep.bandwidth_feasible && rep.compute_feasible) best = std::max(best, rep.total_qoe);
                }
    CHECK(best == doctest::Approx(1.75));
}

TEST_CASE("evaluate: penalty at 100% bandwidth overuse") {
    Scenario s = two_user_tight();
    s.penalty_coeff = 10.0;
    s.bandwidth_budget = 10.0;  // r=(1,1) uses 20 = 2x the budget
    const Decision d{{1.0, 1.0}, {10, 10}};
    const QoEReport rep = evaluate(s, d);
    CHECK_FALSE(rep.bandwidth_feasible);
    CHECK(rep.penalty >= 10.0);
    CHECK(rep.reward == doctest::Approx(rep.total_qoe - rep.penalty));
}

TEST_CASE("evaluate: dimension mismatch is a contract error") {
    const Scenario s = two_user_tight();
    CHECK_THROWS_AS(evaluate(s, Decision{{0.5}, {3}}), ContractError);
}

TEST_CASE("reward equals total QoE exactly when all constraints hold") {
    const Scenario s = preset_scenario("default");
    Rng rng(99);
    for (int trial = 0; trial < 200; ++trial) {
        Decision d;
        for (int i = 0; i < s.num_users; ++i) {
            d.resolution_ratio.push_back(rng.uniform(0.1, 1.0));
            d.diffusion_step.push_back(rng.uniform_int(1, s.max_diffusion_step));
        }
        const QoEReport rep = evaluate(s, d);
        bool all_met = rep.bandwidth_feasible && rep.compute_feasible;
        for (bool met : rep.threshold_met) all_met = all_met && met;
        if (all_met) {
            CHECK(rep.penalty == 0.0);
            CHECK(rep.reward == rep.total_qoe);
        } else {
            CHECK(rep.penalty > 0.0);
        }
    }
}

TEST_CASE("project_feasible: idempotent on feasible decisions") {
    const Scenario s = preset_scenario("default");
    const Decision d{{0.4, 0.5, 0.3, 0.25}, {3, 4, 5, 2}};
    const Decision p = project_feasible(s, d);
    for (int i = 0; i < s.num_users; ++i) {
        CHECK(p.resolution_ratio[i] == doctest::Approx(d.resolution_ratio[i]));
        CHECK(p.diffusion_step[i] == d.diffusion_step[i]);
    }
}

TEST_CASE("project_feasible: uniform bandwidth scaling") {
    Scenario s = two_user_tight();
    s.bandwidth_budget = 10.0;
    const Decision p = project_feasible(s, Decision{{1.0, 1.0}, {5, 5}});
    CHECK(p.resolution_ratio[0] == doctest::Approx(0.5));
    CHECK(p.resolution_ratio[1] == doctest::Approx(0.5));
}

TEST_CASE("project_feasible: round-robin compute reduction starts at the largest step") {
    Scenario s = two_user_tight();
    s.compute_budget = 19.0;
    s.step_compute_cost = 1.0;
    const Decision p = project_feasible(s, Decision{{0.5, 0.5}, {10, 10}});
    // tie on the largest step breaks toward the largest index
    CHECK(p.diffusion_step[0] == 10);
    CHECK(p.diffusion_step[1] == 9);
    CHECK(evaluate(s, p).compute_feasible);
}

TEST_CASE("project_feasible: scaling that pins users at r_min stays within budget") {
    Scenario s = two_user_tight();
    s.bandwidth_budget = 5.0;
    const Decision p = project_feasible(s, Decision{{0.1, 1.0}, {5, 5}});
    CHECK(evaluate(s, p).bandwidth_feasible);
    CHECK(p.resolution_ratio[0] == doctest::Approx(0.1));
}

TEST_CASE("project_feasible: infeasible floors raise errors naming the budget") {
    Scenario s = two_user_tight();
    s.bandwidth_budget = 1.0;  // below 2 users * 10 Mbps * 0.1
    CHECK_THROWS_WITH_AS(project_feasible(s, Decision{{0.1, 0.1}, {1, 1}}),
                         doctest::Contains("bandwidth"), InfeasibleError);
    Scenario c = two_user_tight();
    c.compute_budget = 1.0;  // below 2 users * 1 step
    CHECK_THROWS_WITH_AS(project_feasible(c, Decision{{0.1, 0.1}, {1, 1}}),
                         doctest::Contains("compute"), InfeasibleError);
}

TEST_CASE("project_feasible: random decisions always land inside both budgets") {
    Rng rng(123);
    for (int trial = 0; trial < 300; ++trial) {
        Rng scenario_rng = rng.derive(trial);
        const Scenario s = sample_scenario(scenario_rng, default_sampler(1 + trial % 6));
        Decision d;
        for (int i = 0; i < s.num_users; ++i) {
            d.resolution_ratio.push_back(rng.uniform(0.1, 1.0));
            d.diffusion_step.push_back(rng.uniform_int(1, s.max_diffusion_step));
        }
        const QoEReport rep = evaluate(s, project_feasible(s, d));
        CHECK(rep.bandwidth_feasible);
        CHECK(rep.compute_feasible);
    }
}

TEST_CASE("encode_state layout and determinism") {
    Scenario s = preset_scenario("default");
    s.num_users = 1;
    s.qoe_threshold = {0.5};
    s.bandwidth_budget = 36.0;
    s.compute_budget = 36.0;
    const StateNormalizer norm{36.0, 36.0};
    const auto state = encode_state(s, norm);
    REQUIRE(state.size() == 3);
    CHECK(state[0] == doctest::Approx(1.0));
    CHECK(state[1] == doctest::Approx(1.0));
    CHECK(state[2] == doctest::Approx(0.5));

    const auto state2 = encode_state(s, norm);
    CHECK(state == state2);

    Scenario zeros = s;
    zeros.qoe_threshold = {0.0};
    const auto state3 = encode_state(zeros, norm);
    CHECK(state3[2] == 0.0);
    CHECK(state3 != state);  // injective on differing thresholds
}

TEST_CASE("sample_scenario: degenerate ranges give the fixed scenario") {
    SamplerConfig config = default_sampler(2);
    config.bandwidth_range = {14.0, 14.0};
    config.compute_range = {12.0, 12.0};
    config.threshold_range = {0.4, 0.4};
    Rng rng(1);
    const Scenario s = sample_scenario(rng, config);
    CHECK(s.bandwidth_budget == doctest::Approx(14.0));
    CHECK(s.compute_budget == doctest::Approx(12.0));
    CHECK(s.qoe_threshold[0] == doctest::Approx(0.4));
    CHECK(s.qoe_threshold[1] == doctest::Approx(0.4));
}

TEST_CASE("sample_scenario: seeded determinism") {
    const SamplerConfig config = default_sampler(3);
    Rng a(9), b(9);
    const Scenario sa = sample_scenario(a, config);
    const Scenario sb = sample_scenario(b, config);
    CHECK(sa.bandwidth_budget == sb.bandwidth_budget);
    CHECK(sa.compute_budget == sb.compute_budget);
    CHECK(sa.qoe_threshold == sb.qoe_threshold);
}

TEST_CASE("sample_scenario: threshold sample mean matches the range midpoint") {
    SamplerConfig config = default_sampler(1);
    config.threshold_range = {0.3, 0.7};
    Rng rng(2024);
    double sum = 0.0;
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) sum += sample_scenario(rng, config).qoe_threshold[0];
    CHECK(sum / draws == doctest::Approx(0.5).epsilon(0.02));
    CHECK(std::abs(sum / draws - 0.5) < 0.01);
}

TEST_CASE("sample_scenario: inverted ranges are config errors") {
    SamplerConfig config = default_sampler(2);
    config.bandwidth_range = {20.0, 10.0};
    Rng rng(1);
    CHECK_THROWS_AS(sample_scenario(rng, config), ConfigError);
}

TEST_CASE("presets carry the documented service metadata") {
    const Scenario surgery = preset_scenario("surgery");
    REQUIRE(surgery.preset_meta.has_value());
    CHECK(surgery.preset_meta->latency_budget_ms == doctest::Approx(1.0));
    CHECK(surgery.preset_meta->reliability_target == doctest::Approx(0.99999999));

    const Scenario outpatient = preset_scenario("outpatient");
    REQUIRE(outpatient.preset_meta.has_value());
    CHECK(outpatient.preset_meta->latency_budget_ms == doctest::Approx(2.0));
    CHECK(outpatient.preset_meta->reliability_target == doctest::Approx(0.99999));

    const Scenario fallback = preset_scenario("default");
    CHECK_FALSE(fallback.preset_meta.has_value());
    CHECK(fallback.num_users == 4);
    CHECK(fallback.bandwidth_budget == doctest::Approx(40.0));
    CHECK(fallback.compute_budget == doctest::Approx(40.0));
    CHECK(fallback.max_diffusion_step == 10);
    for (double t : fallback.qoe_threshold) CHECK(t == doctest::Approx(0.5));

    CHECK_THROWS_AS(preset_scenario("icu"), ConfigError);
}

TEST_CASE("scenario invariants are validated") {
    Scenario s = preset_scenario("default");
    s.weight_bitrate = 0.7;  // weights no longer sum to 1
    CHECK_THROWS_AS(s.validate(), ConfigError);
    Scenario t = preset_scenario("default");
    t.qoe_threshold.pop_back();
    CHECK_THROWS_AS(t.validate(), ConfigError);
    Scenario u = preset_scenario("default");
    u.similarity_floor = 0.9;
    u.similarity_ceiling = 0.5;
    CHECK_THROWS_AS(u.validate(), ConfigError);
}
