#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "aigc_alloc/baselines.hpp"
#include "aigc_alloc/errors.hpp"
#include "aigc_alloc/tape.hpp"

using namespace aigc;
using namespace aigc::nn;

namespace {

Scenario unconstrained_single() {
    Scenario s;
    s.num_users = 1;
    s.bandwidth_budget = 100.0;
    s.compute_budget = 100.0;
    s.qoe_threshold = {0.2};
    s.max_bitrate = 10.0;
    s.ref_bitrate = 10.0;
    s.validate();
    return s;
}

Scenario bandwidth_tight_pair() {
    Scenario s;
    s.num_users = 2;
    s.bandwidth_budget = 15.0;
    s.compute_budget = 1000.0;
    s.qoe_threshold = {0.5, 0.5};
    s.max_bitrate = 10.0;
    s.ref_bitrate = 10.0;
    s.validate();
    return s;
}

TrainConfig tiny_config(std::uint64_t seed) {
    TrainConfig config;
    config.sampler = default_sampler(2);
    config.total_steps = 220;
    config.warmup_steps = 30;
    config.batch_size = 16;
    config.eval_every = 50;
    config.eval_episodes = 4;
    config.actor_hidden = {16, 16};
    config.critic_hidden = {16, 16};
    config.replay_capacity = 500;
    config.seed = seed;
    return config;
}

}  // namespace

TEST_CASE("oracle: unconstrained single user saturates everything") {
    const OracleResult result = oracle_grid_search(unconstrained_single());
    CHECK(result.best.resolution_ratio[0] == doctest::Approx(1.0));
    CHECK(result.best.diffusion_step[0] == 10);
    CHECK(result.total_qoe == doctest::Approx(1.0));
    CHECK(result.points_evaluated == 100);
}

TEST_CASE("oracle: bandwidth-tight pair reaches 1.75 with the lexicographic winner") {
    const OracleResult result = oracle_grid_search(bandwidth_tight_pair());
    CHECK(result.total_qoe == doctest::Approx(1.75));
    CHECK(result.reward == doctest::Approx(1.75));
    CHECK(result.tie_count > 1);
    CHECK(result.best.resolution_ratio[0] == doctest::Approx(0.5));
    CHECK(result.best.resolution_ratio[1] == doctest::Approx(1.0));
    CHECK(result.best.diffusion_step[0] == 10);
    CHECK(result.best.diffusion_step[1] == 10);
}

TEST_CASE("oracle: forced compute corner puts every user at one step") {
    Scenario s = bandwidth_tight_pair();
    s.compute_budget = 2.0;
    s.step_compute_cost = 1.0;
    s.qoe_threshold = {0.0, 0.0};
    const OracleResult result = oracle_grid_search(s);
    CHECK(result.best.diffusion_step[0] == 1);
    CHECK(result.best.diffusion_step[1] == 1);
    CHECK(result.best.resolution_ratio[0] + result.best.resolution_ratio[1] == doctest::Approx(1.5));
    CHECK(result.best.resolution_ratio[0] == doctest::Approx(0.5));  // lexicographic tie winner
}

TEST_CASE("oracle: capacity bound is enforced and named") {
    Scenario s = preset_scenario("default");
    s.num_users = 5;
    s.qoe_threshold.assign(5, 0.5);
    s.bandwidth_budget = 50.0;
    s.compute_budget = 50.0;
    CHECK_THROWS_WITH_AS(oracle_grid_search(s, 10), doctest::Contains("10^7"), CapacityError);
    CHECK(tractable_r_levels(s, 10) == 2);  // (2*10)^5 = 3.2e6 fits, (3*10)^5 does not
}

TEST_CASE("tractable_r_levels matches the capacity arithmetic") {
    Scenario s = preset_scenario("default");  // N=4, T_max=10
    // (levels*10)^4 <= 1e7  =>  levels <= 5
    CHECK(tractable_r_levels(s, 10) == 5);
    s.num_users = 2;
    s.qoe_threshold.assign(2, 0.5);
    CHECK(tractable_r_levels(s, 10) == 10);
    s.num_users = 6;
    s.qoe_threshold.assign(6, 0.5);
    CHECK(tractable_r_levels(s, 10) == 1);
    s.num_users = 8;
    s.qoe_threshold.assign(8, 0.5);
    CHECK(tractable_r_levels(s, 10) == 0);
}

TEST_CASE("oracle: thread partitioning does not change the result") {
    const Scenario s = bandwidth_tight_pair();
    // worker_threads() reads AIGC_ALLOC_THREADS once per call site; force both paths
    setenv("AIGC_ALLOC_THREADS", "1", 1);
    const OracleResult serial = oracle_grid_search(s);
    setenv("AIGC_ALLOC_THREADS", "4", 1);
    const OracleResult parallel = oracle_grid_search(s);
    unsetenv("AIGC_ALLOC_THREADS");
    CHECK(serial.reward == parallel.reward);
    CHECK(serial.tie_count == parallel.tie_count);
    CHECK(serial.best.resolution_ratio == parallel.best.resolution_ratio);
    CHECK(serial.best.diffusion_step == parallel.best.diffusion_step);
}

TEST_CASE("greedy: unconstrained equals the oracle decision exactly") {
    const Scenario s = unconstrained_single();
    const Decision greedy = greedy_allocate(s);
    const OracleResult oracle = oracle_grid_search(s);
    CHECK(greedy.resolution_ratio == oracle.best.resolution_ratio);
    CHECK(greedy.diffusion_step == oracle.best.diffusion_step);
}

TEST_CASE("greedy: projection shapes under tight budgets") {
    const Decision d = greedy_allocate(bandwidth_tight_pair());
    CHECK(d.resolution_ratio[0] == doctest::Approx(0.75));
    CHECK(d.resolution_ratio[1] == doctest::Approx(0.75));
    CHECK(d.diffusion_step[0] == 10);
    CHECK(d.diffusion_step[1] == 10);

    Scenario compute_corner = bandwidth_tight_pair();
    compute_corner.bandwidth_budget = 100.0;
    compute_corner.compute_budget = 2.0;
    const Decision c = greedy_allocate(compute_corner);
    CHECK(c.diffusion_step[0] == 1);
    CHECK(c.diffusion_step[1] == 1);
}

TEST_CASE("random policy: seeded, uniform in the mean, always feasible") {
    const Scenario s = unconstrained_single();
    Rng a(7), b(7);
    const Decision da = random_policy(s, a);
    const Decision db = random_policy(s, b);
    CHECK(da.resolution_ratio == db.resolution_ratio);
    CHECK(da.diffusion_step == db.diffusion_step);

    Rng rng(8);
    double mean_r = 0.0;
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) mean_r += random_policy(s, rng).resolution_ratio[0];
    mean_r /= draws;
    CHECK(std::abs(mean_r - 0.55) < 0.01);

    Rng frng(9);
    for (int i = 0; i < 100; ++i) {
        const Scenario tight = bandwidth_tight_pair();
        const QoEReport rep = evaluate(tight, random_policy(tight, frng));
        CHECK(rep.bandwidth_feasible);
        CHECK(rep.compute_feasible);
    }
}

TEST_CASE("oracle dominance over heuristic solvers on random scenarios") {
    Rng rng(41);
    for (int trial = 0; trial < 20; ++trial) {
        Rng srng = rng.derive(trial);
        const Scenario s = sample_scenario(srng, default_sampler(2));
        const OracleResult oracle = oracle_grid_search(s);
        const double greedy_reward = evaluate(s, greedy_allocate(s)).reward;
        Rng prng = rng.derive(1000 + trial);
        const double random_reward = evaluate(s, random_policy(s, prng)).reward;
        // continuous decisions may beat the grid only by the resolution slack
        CHECK(oracle.reward >= greedy_reward - 0.05 * s.num_users);
        CHECK(oracle.reward >= random_reward - 0.05 * s.num_users);
    }
}

TEST_CASE("gaussian policy: deterministic evaluation ignores the std head") {
    Rng rng(12);
    GaussianPolicy policy = gaussian_policy_new(2, 4, {8}, rng);
    const std::vector<double> state{0.8, 0.7, 0.4, 0.5};
    const auto mean_before = policy_mean_action(policy, state);
    // perturb only the log-std half of the output layer
    Tensor& w = policy.net.weights.back();
    Tensor& b = policy.net.biases.back();
    const std::size_t dim = 4;
    for (std::size_t r = 0; r < w.shape[0]; ++r)
        for (std::size_t c = dim; c < 2 * dim; ++c) w.at(r, c) += 0.5;
    for (std::size_t c = dim; c < 2 * dim; ++c) b.data[c] -= 0.3;
    const auto mean_after = policy_mean_action(policy, state);
    CHECK(mean_before == mean_after);
    for (double v : mean_before) CHECK(std::abs(v) <= kRawActionBound);
}

TEST_CASE("gaussian policy: sampling is seed-deterministic with finite log-prob") {
    Rng rng(13);
    const GaussianPolicy policy = gaussian_policy_new(2, 4, {8}, rng);
    const std::vector<double> state{0.6, 0.9, 0.35, 0.45};
    Rng a(99), b(99);
    double logp_a = 0.0, logp_b = 0.0;
    const auto sa = policy_sample(policy, state, a, &logp_a);
    const auto sb = policy_sample(policy, state, b, &logp_b);
    CHECK(sa == sb);
    CHECK(logp_a == logp_b);
    CHECK(std::isfinite(logp_a));
}

TEST_CASE("ppo clip: clamped ratios stay inside [0.8, 1.2]") {
    Tape tape;
    const auto ratios = tape.constant(Tensor({1, 4}, {0.5, 0.95, 1.05, 1.9}));
    const auto clipped = tape.clamp(ratios, 1.0 - kPpoClip, 1.0 + kPpoClip);
    const auto& v = tape.value(clipped).data;
    CHECK(v[0] == doctest::Approx(0.8));
    CHECK(v[1] == doctest::Approx(0.95));
    CHECK(v[2] == doctest::Approx(1.05));
    CHECK(v[3] == doctest::Approx(1.2));
}

TEST_CASE("sac-lite: identical seeds give identical curves") {
    const SacResult a = train_sac_lite(tiny_config(31));
    const SacResult b = train_sac_lite(tiny_config(31));
    REQUIRE(a.curve.points.size() == b.curve.points.size());
    REQUIRE(!a.curve.points.empty());
    for (std::size_t i = 0; i < a.curve.points.size(); ++i)
        CHECK(a.curve.points[i].second == b.curve.points[i].second);
}

TEST_CASE("ppo-lite: identical seeds give identical curves with increasing env steps") {
    const PpoResult a = train_ppo_lite(tiny_config(32));
    const PpoResult b = train_ppo_lite(tiny_config(32));
    REQUIRE(a.curve.points.size() == b.curve.points.size());
    REQUIRE(!a.curve.points.empty());
    for (std::size_t i = 0; i < a.curve.points.size(); ++i) {
        CHECK(a.curve.points[i].first == b.curve.points[i].first);
        CHECK(a.curve.points[i].second == b.curve.points[i].second);
        if (i > 0) CHECK(a.curve.points[i].first > a.curve.points[i - 1].first);
    }
}

TEST_CASE("all solvers emit resource-feasible evaluation decisions") {
    TrainConfig config = tiny_config(33);
    const auto eval_set = evaluation_scenarios(config);
    const StateNormalizer norm = config.sampler.normalizer();

    const TrainResult codi = train(config);
    const SacResult sac = train_sac_lite(config);
    const PpoResult ppo = train_ppo_lite(config);

    const auto check_reports = [](const EvalResult& result) {
        for (const auto& rep : result.reports) {
            CHECK(rep.bandwidth_feasible);
            CHECK(rep.compute_feasible);
        }
    };
    check_reports(evaluate_policy(codi.actor, eval_set, norm));
    check_reports(evaluate_raw_policy(
        [&](const std::vector<double>& s) { return policy_mean_action(sac.policy, s); }, eval_set, norm));
    check_reports(evaluate_raw_policy(
        [&](const std::vector<double>& s) { return policy_mean_action(ppo.policy, s); }, eval_set, norm));
}

TEST_CASE("solver registry") {
    CHECK(solver_from_name("codi") == SolverKind::Codi);
    CHECK(solver_from_name("oracle") == SolverKind::Oracle);
    CHECK_THROWS_AS(solver_from_name("dqn"), ConfigError);
    CHECK(solver_names().size() == 6);
}
