#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "aigc_alloc/diffusion.hpp"
#include "aigc_alloc/errors.hpp"

using namespace aigc;
using namespace aigc::nn;

namespace {

DiffusionActor zero_predictor_actor(int num_users, int state_dim, int steps) {
    Rng rng(1);
    DiffusionActor actor = actor_new(num_users, state_dim, {8}, steps, 0.05, 0.2, rng);
    for (Tensor* p : actor.eps_net.param_ptrs())
        std::fill(p->data.begin(), p->data.end(), 0.0);
    return actor;
}

}  // namespace

TEST_CASE("schedule_new: products of alphas") {
    NoiseSchedule s = schedule_new(2, 0.1, 0.2);
    CHECK(s.beta[0] == doctest::Approx(0.1));
    CHECK(s.beta[1] == doctest::Approx(0.2));
    CHECK(s.alpha_bar[0] == doctest::Approx(0.9));
    CHECK(s.alpha_bar[1] == doctest::Approx(0.72));

    NoiseSchedule one = schedule_new(1, 0.05, 0.05);
    CHECK(one.alpha_bar[0] == doctest::Approx(0.95));

    NoiseSchedule flat = schedule_new(5, 0.1, 0.1);
    CHECK(flat.alpha_bar[4] == doctest::Approx(0.59049));

    CHECK_THROWS_AS(schedule_new(0, 0.1, 0.2), ConfigError);
    CHECK_THROWS_AS(schedule_new(3, 0.0, 0.2), ConfigError);
    CHECK_THROWS_AS(schedule_new(3, 0.3, 0.2), ConfigError);
    CHECK_THROWS_AS(schedule_new(3, 0.3, 1.0), ConfigError);
}

TEST_CASE("alpha_bar decreases strictly") {
    const NoiseSchedule s = schedule_new(16, 1e-4, 0.1);
    for (int k = 1; k < s.steps; ++k) CHECK(s.alpha_bar[k] < s.alpha_bar[k - 1]);
    CHECK(s.alpha_bar.back() > 0.0);
}

TEST_CASE("forward_noising closed form") {
    const NoiseSchedule s = schedule_new(2, 0.1, 0.2);
    const std::vector<double> a0{1.0, 0.0};
    const std::vector<double> zero{0.0, 0.0};
    const std::vector<double> e{0.0, 1.0};

    const auto no_noise = forward_noising(a0, 2, zero, s);
    CHECK(no_noise[0] == doctest::Approx(std::sqrt(0.72)));
    CHECK(no_noise[1] == doctest::Approx(0.0));

    const auto no_signal = forward_noising(zero, 2, e, s);
    CHECK(no_signal[0] == doctest::Approx(0.0));
    CHECK(no_signal[1] == doctest::Approx(std::sqrt(0.28)));

    const auto both = forward_noising(a0, 2, e, s);
    CHECK(both[0] == doctest::Approx(0.8485281374));
    CHECK(both[1] == doctest::Approx(0.5291502622));

    CHECK_THROWS_AS(forward_noising(a0, 0, e, s), ContractError);
    CHECK_THROWS_AS(forward_noising(a0, 3, e, s), ContractError);
}

TEST_CASE("forward_noising preserves unit variance") {
    const NoiseSchedule s = schedule_new(5, 1e-4, 0.1);
    Rng rng(31);
    const int samples = 100000;
    double sum = 0.0, sum_sq = 0.0;
    for (int i = 0; i < samples; ++i) {
        const auto out = forward_noising(std::vector<double>{rng.normal()}, 3,
                                         std::vector<double>{rng.normal()}, s);
        sum += out[0];
        sum_sq += out[0] * out[0];
    }
    const double mean = sum / samples;
    const double var = sum_sq / samples - mean * mean;
    CHECK(var == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("step embedding is deterministic with the documented dimension") {
    const auto a = step_embedding(3);
    const auto b = step_embedding(3);
    REQUIRE(a.size() == static_cast<std::size_t>(kStepEmbedDim));
    CHECK(a == b);
    CHECK(a[0] == doctest::Approx(std::sin(3.0)));
    CHECK(a[1] == doctest::Approx(std::cos(3.0)));
    CHECK(step_embedding(4) != a);
}

TEST_CASE("zero-predictor chain reduces to the closed form") {
    const int n = 2, state_dim = 4;
    DiffusionActor actor = zero_predictor_actor(n, state_dim, 5);
    const std::vector<double> state{0.5, 0.5, 0.3, 0.4};
    const std::vector<double> terminal{0.7, -0.4, 0.2, 0.1};
    const auto a0 = denoise(actor, state, terminal, ChainMode::Deterministic, nullptr);
    const double abar_k = actor.schedule.alpha_bar.back();
    for (std::size_t i = 0; i < terminal.size(); ++i)
        CHECK(std::abs(a0[i] - terminal[i] / std::sqrt(abar_k)) <= 1e-12);
}

TEST_CASE("single-step zero predictor divides by sqrt(alpha_1)") {
    DiffusionActor actor = zero_predictor_actor(1, 3, 1);
    const std::vector<double> state{0.1, 0.2, 0.3};
    const std::vector<double> v{0.5, -0.25};
    const auto a0 = denoise(actor, state, v, ChainMode::Deterministic, nullptr);
    const double expect = 1.0 / std::sqrt(actor.schedule.alpha[0]);
    CHECK(a0[0] == doctest::Approx(0.5 * expect));
    CHECK(a0[1] == doctest::Approx(-0.25 * expect));
}

TEST_CASE("stochastic sampling is seed-deterministic") {
    Rng init(3);
    const DiffusionActor actor = actor_new(2, 4, {16}, 5, 1e-4, 0.1, init);
    const std::vector<double> state{0.9, 0.8, 0.4, 0.5};
    Rng a(123), b(123);
    const auto run_a = sample_action(actor, state, a, ChainMode::Stochastic);
    const auto run_b = sample_action(actor, state, b, ChainMode::Stochastic);
    CHECK(run_a == run_b);
    Rng c(124);
    CHECK(sample_action(actor, state, c, ChainMode::Stochastic) != run_a);
}

TEST_CASE("decode_decision midpoint and saturation") {
    Scenario s = preset_scenario("default");
    s.max_diffusion_step = 10;
    const std::size_t n = static_cast<std::size_t>(s.num_users);
    std::vector<double> raw(2 * n, 0.0);
    Decision mid = decode_decision(raw, s);
    for (std::size_t i = 0; i < n; ++i) {
        CHECK(mid.resolution_ratio[i] == doctest::Approx(0.55));
        CHECK(mid.diffusion_step[i] == 6);  // round-half-up of 5.5
    }
    std::fill(raw.begin(), raw.end(), 40.0);
    Decision high = decode_decision(raw, s);
    for (std::size_t i = 0; i < n; ++i) {
        CHECK(high.resolution_ratio[i] == doctest::Approx(1.0));
        CHECK(high.diffusion_step[i] == 10);
    }
    std::fill(raw.begin(), raw.end(), -40.0);
    Decision low = decode_decision(raw, s);
    for (std::size_t i = 0; i < n; ++i) {
        CHECK(low.resolution_ratio[i] == doctest::Approx(0.1));
        CHECK(low.diffusion_step[i] == 1);
    }
    CHECK_THROWS_AS(decode_decision(std::vector<double>(2 * n + 1, 0.0), s), ContractError);
}

TEST_CASE("decode_decision is total over finite raw actions") {
    const Scenario s = preset_scenario("default");
    Rng rng(17);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<double> raw(static_cast<std::size_t>(2 * s.num_users));
        for (auto& v : raw) v = rng.uniform(-50.0, 50.0);
        const Decision d = decode_decision(raw, s);
        for (int i = 0; i < s.num_users; ++i) {
            CHECK(d.resolution_ratio[i] >= kMinResolutionRatio);
            CHECK(d.resolution_ratio[i] <= 1.0);
            CHECK(d.diffusion_step[i] >= 1);
            CHECK(d.diffusion_step[i] <= s.max_diffusion_step);
        }
    }
}

TEST_CASE("actor gradients vanish when the critics are constant") {
    Rng rng(5);
    DiffusionActor actor = actor_new(1, 3, {8}, 3, 0.05, 0.1, rng);
    Rng crng(6);
    Mlp q1 = mlp_init({5, 4, 1}, Activation::Relu, Activation::Identity, crng);
    for (Tensor* p : q1.param_ptrs()) std::fill(p->data.begin(), p->data.end(), 0.0);
    q1.biases[1].data[0] = 2.5;  // Q == 2.5 everywhere
    Mlp q2 = q1;
    Tensor states = Tensor::zeros({4, 3});
    Tensor terminal = Tensor::zeros({4, 2});
    Rng drng(7);
    for (auto& v : states.data) v = drng.normal();
    for (auto& v : terminal.data) v = drng.normal();
    std::vector<Tensor> grads;
    const double loss = actor_loss_and_grads(actor, q1, q2, states, terminal, grads);
    CHECK(loss == doctest::Approx(-2.5));
    for (const auto& g : grads)
        for (double v : g.data) CHECK(v == 0.0);
}

TEST_CASE("chains longer than the supported maximum are rejected") {
    Rng rng(9);
    DiffusionActor actor = actor_new(1, 3, {4}, kMaxDenoiseSteps + 1, 1e-4, 0.1, rng);
    nn::Tape tape;
    const auto vars = tape.register_mlp(actor.eps_net);
    const auto st = tape.constant(Tensor::zeros({1, 3}));
    const auto nz = tape.constant(Tensor::zeros({1, 2}));
    CHECK_THROWS_AS(build_denoise_graph(tape, vars, actor, st, nz), ConfigError);
}

TEST_CASE("minimizing ||a0||^2 through a single-step chain drives a0 to zero") {
    // equivalent to the actor objective with Q(s, a) = -||a||^2
    Rng rng(21);
    DiffusionActor actor = actor_new(1, 2, {32}, 1, 0.1, 0.1, rng);
    AdamState opt;
    Rng noise_rng(22);
    const std::size_t batch = 16;
    Tensor states = Tensor::zeros({batch, 2});
    for (auto& v : states.data) v = noise_rng.uniform(0.0, 1.0);

    for (int step = 0; step < 500; ++step) {
        Tensor terminal = Tensor::zeros({batch, 2});
        for (auto& v : terminal.data) v = noise_rng.normal();
        nn::Tape tape;
        const auto vars = tape.register_mlp(actor.eps_net);
        const auto a0 = build_denoise_graph(tape, vars, actor, tape.constant(states), tape.constant(terminal));
        const auto loss = tape.mean_square(a0);
        tape.backward(loss);
        const auto grads = tape.mlp_grads(vars);
        adam_step(actor.eps_net.param_ptrs(), grads, opt, 1e-2);
    }

    // held-out terminal draws through the trained deterministic chain
    Rng eval_rng(23);
    double norm_sum = 0.0;
    const int eval_draws = 64;
    for (int i = 0; i < eval_draws; ++i) {
        const std::vector<double> state{eval_rng.uniform(0.0, 1.0), eval_rng.uniform(0.0, 1.0)};
        const auto terminal = eval_rng.normal_vector(2);
        const auto a0 = denoise(actor, state, terminal, ChainMode::Deterministic, nullptr);
        norm_sum += std::sqrt(a0[0] * a0[0] + a0[1] * a0[1]);
    }
    CHECK(norm_sum / eval_draws < 0.1);
}

TEST_CASE("actor checkpoint round trip preserves chain outputs") {
    Rng rng(33);
    const DiffusionActor actor = actor_new(2, 4, {12}, 4, 1e-3, 0.08, rng);
    const auto path = (std::filesystem::temp_directory_path() / "aigc_actor_roundtrip.ckpt").string();
    save_actor_file(path, actor);
    const DiffusionActor loaded = load_actor_file(path, 2, 4);
    std::remove(path.c_str());

    CHECK(loaded.schedule.steps == actor.schedule.steps);
    const std::vector<double> state{0.7, 0.6, 0.45, 0.5};
    const std::vector<double> terminal{0.3, -0.6, 0.8, 0.05};
    const auto a = denoise(actor, state, terminal, ChainMode::Deterministic, nullptr);
    const auto b = denoise(loaded, state, terminal, ChainMode::Deterministic, nullptr);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));

    CHECK_THROWS_AS(load_actor_file(path + ".missing", 2, 4), ConfigError);
}
