#include "aigc_alloc/diffusion.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

#include "aigc_alloc/errors.hpp"

namespace aigc {

NoiseSchedule schedule_new(int steps, double beta_start, double beta_end) {
    if (steps < 1) throw ConfigError("schedule_new: need at least one denoising step");
    if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
        throw ConfigError("schedule_new: betas must satisfy 0 < beta_start <= beta_end < 1");
    NoiseSchedule s;
    s.steps = steps;
    s.beta_start = beta_start;
    s.beta_end = beta_end;
    s.beta.resize(static_cast<std::size_t>(steps));
    s.alpha.resize(s.beta.size());
    s.alpha_bar.resize(s.beta.size());
    double running = 1.0;
    for (int k = 0; k < steps; ++k) {
        const double t = steps == 1 ? 0.0 : static_cast<double>(k) / static_cast<double>(steps - 1);
        s.beta[k] = beta_start + (beta_end - beta_start) * t;
        s.alpha[k] = 1.0 - s.beta[k];
        running *= s.alpha[k];
        s.alpha_bar[k] = running;
    }
    return s;
}

std::vector<double> forward_noising(std::span<const double> a0, int k, std::span<const double> eps,
                                    const NoiseSchedule& schedule) {
    if (k < 1 || k > schedule.steps) throw ContractError("forward_noising: step index outside 1..K");
    if (a0.size() != eps.size()) throw ContractError("forward_noising: action/noise dimension mismatch");
    const double abar = schedule.alpha_bar[static_cast<std::size_t>(k - 1)];
    const double signal = std::sqrt(abar);
    const double noise = std::sqrt(1.0 - abar);
    std::vector<double> out(a0.size());
    for (std::size_t i = 0; i < a0.size(); ++i) out[i] = signal * a0[i] + noise * eps[i];
    return out;
}

std::vector<double> step_embedding(int k) {
    std::vector<double> emb(kStepEmbedDim);
    for (int i = 0; i < kStepEmbedDim / 2; ++i) {
        const double freq = std::pow(10000.0, -2.0 * i / kStepEmbedDim);
        emb[2 * i] = std::sin(k * freq);
        emb[2 * i + 1] = std::cos(k * freq);
    }
    return emb;
}

DiffusionActor actor_new(int num_users, int state_dim, const std::vector<std::size_t>& hidden, int denoise_steps,
                         double beta_start, double beta_end, Rng& rng) {
    if (num_users < 1) throw ConfigError("actor_new: need at least one user");
    DiffusionActor actor;
    actor.num_users = num_users;
    actor.state_dim = state_dim;
    actor.schedule = schedule_new(denoise_steps, beta_start, beta_end);
    std::vector<std::size_t> sizes;
    sizes.push_back(static_cast<std::size_t>(state_dim + 2 * num_users + kStepEmbedDim));
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(static_cast<std::size_t>(2 * num_users));
    actor.eps_net = nn::mlp_init(sizes, nn::Activation::Tanh, nn::Activation::Identity, rng);
    return actor;
}

std::vector<double> denoise(const DiffusionActor& actor, std::span<const double> state,
                            std::span<const double> terminal_noise, ChainMode mode, Rng* rng) {
    const std::size_t action_dim = static_cast<std::size_t>(actor.action_dim());
    if (state.size() != static_cast<std::size_t>(actor.state_dim))
        throw ContractError("denoise: state dimension mismatch");
    if (terminal_noise.size() != action_dim) throw ContractError("denoise: action dimension mismatch");
    if (mode == ChainMode::Stochastic && rng == nullptr)
        throw ContractError("denoise: stochastic mode needs an RNG");

    std::vector<double> action(terminal_noise.begin(), terminal_noise.end());
    std::vector<double> input(state.size() + action_dim + kStepEmbedDim);
    for (int k = actor.schedule.steps; k >= 1; --k) {
        const double beta = actor.schedule.beta[static_cast<std::size_t>(k - 1)];
        const double alpha = actor.schedule.alpha[static_cast<std::size_t>(k - 1)];
        const double abar = actor.schedule.alpha_bar[static_cast<std::size_t>(k - 1)];
        std::copy(state.begin(), state.end(), input.begin());
        std::copy(action.begin(), action.end(), input.begin() + state.size());
        const auto emb = step_embedding(k);
        std::copy(emb.begin(), emb.end(), input.begin() + state.size() + action_dim);
        const auto eps_hat = actor.eps_net.forward(input);
        const double noise_scale = beta / std::sqrt(1.0 - abar);
        const double inv_sqrt_alpha = 1.0 / std::sqrt(alpha);
        for (std::size_t i = 0; i < action_dim; ++i)
            action[i] = (action[i] - noise_scale * eps_hat[i]) * inv_sqrt_alpha;
        if (mode == ChainMode::Stochastic) {
            const double sigma = std::sqrt(beta);
            for (auto& a : action) a += sigma * rng->normal();
        }
    }
    for (auto& a : action) a = std::clamp(a, -kRawActionBound, kRawActionBound);
    return action;
}

std::vector<double> sample_action(const DiffusionActor& actor, std::span<const double> state, Rng& rng,
                                  ChainMode mode) {
    const auto terminal = rng.normal_vector(static_cast<std::size_t>(actor.action_dim()));
    return denoise(actor, state, terminal, mode, &rng);
}

Decision decode_decision(std::span<const double> raw, const Scenario& scenario) {
    const std::size_t n = static_cast<std::size_t>(scenario.num_users);
    if (raw.size() != 2 * n) throw ContractError("decode_decision: raw action length must be 2N");
    Decision d;
    d.resolution_ratio.resize(n);
    d.diffusion_step.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double unit_r = (std::tanh(raw[i]) + 1.0) / 2.0;
        d.resolution_ratio[i] = kMinResolutionRatio + unit_r * (1.0 - kMinResolutionRatio);
        const double unit_d = (std::tanh(raw[n + i]) + 1.0) / 2.0;
        const double step = 1.0 + unit_d * (scenario.max_diffusion_step - 1);
        d.diffusion_step[i] = std::clamp(static_cast<int>(std::floor(step + 0.5)), 1, scenario.max_diffusion_step);
    }
    return d;
}

nn::Tape::Var build_denoise_graph(nn::Tape& tape, const nn::Tape::MlpVars& eps_vars, const DiffusionActor& actor,
                                  nn::Tape::Var state_batch, nn::Tape::Var terminal_noise_batch) {
    if (actor.schedule.steps > kMaxDenoiseSteps)
        throw ConfigError("build_denoise_graph: denoising chain longer than the supported maximum");
    const std::size_t batch = tape.value(state_batch).rows();
    nn::Tape::Var action = terminal_noise_batch;
    for (int k = actor.schedule.steps; k >= 1; --k) {
        const double beta = actor.schedule.beta[static_cast<std::size_t>(k - 1)];
        const double alpha = actor.schedule.alpha[static_cast<std::size_t>(k - 1)];
        const double abar = actor.schedule.alpha_bar[static_cast<std::size_t>(k - 1)];
        const auto emb = step_embedding(k);
        nn::Tensor emb_rows = nn::Tensor::zeros({batch, static_cast<std::size_t>(kStepEmbedDim)});
        for (std::size_t r = 0; r < batch; ++r)
            for (std::size_t c = 0; c < emb.size(); ++c) emb_rows.at(r, c) = emb[c];
        const nn::Tape::Var emb_var = tape.constant(std::move(emb_rows));
        const std::array<nn::Tape::Var, 3> parts{state_batch, action, emb_var};
        const nn::Tape::Var eps_hat = tape.apply_mlp(eps_vars, actor.eps_net, tape.concat_cols(parts));
        const double inv_sqrt_alpha = 1.0 / std::sqrt(alpha);
        const double eps_coeff = -beta / (std::sqrt(1.0 - abar) * std::sqrt(alpha));
        action = tape.lincomb(inv_sqrt_alpha, action, eps_coeff, eps_hat);
    }
    return tape.clamp(action, -kRawActionBound, kRawActionBound);
}

double actor_loss_and_grads(const DiffusionActor& actor, const nn::Mlp& q1, const nn::Mlp& q2,
                            const nn::Tensor& state_batch, const nn::Tensor& terminal_noise_batch,
                            std::vector<nn::Tensor>& eps_grads) {
    nn::Tape tape;
    const auto eps_vars = tape.register_mlp(actor.eps_net);
    const auto q1_vars = tape.register_mlp_frozen(q1);
    const auto q2_vars = tape.register_mlp_frozen(q2);
    const auto state_var = tape.constant(state_batch);
    const auto noise_var = tape.constant(terminal_noise_batch);
    const auto a0 = build_denoise_graph(tape, eps_vars, actor, state_var, noise_var);
    const std::array<nn::Tape::Var, 2> q_in{state_var, a0};
    const auto q_input = tape.concat_cols(q_in);
    const auto q_min = tape.minimum(tape.apply_mlp(q1_vars, q1, q_input), tape.apply_mlp(q2_vars, q2, q_input));
    const auto loss = tape.scale(tape.mean_all(q_min), -1.0);
    tape.backward(loss);
    eps_grads = tape.mlp_grads(eps_vars);
    return tape.value(loss).data[0];
}

void save_actor_file(const std::string& path, const DiffusionActor& actor) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open checkpoint for writing: " + path);
    char header[96];
    std::snprintf(header, sizeof(header), "SCHEDULE %d %.17g %.17g\n", actor.schedule.steps,
                  actor.schedule.beta_start, actor.schedule.beta_end);
    out << header;
    nn::save_mlp(out, actor.eps_net);
}

DiffusionActor load_actor_file(const std::string& path, int num_users, int state_dim) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open checkpoint: " + path);
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("actor checkpoint: missing schedule header");
    std::istringstream header(line);
    std::string tag;
    int steps = 0;
    double beta_start = 0.0, beta_end = 0.0;
    if (!(header >> tag >> steps >> beta_start >> beta_end) || tag != "SCHEDULE")
        throw ConfigError("actor checkpoint: malformed schedule header");
    DiffusionActor actor;
    actor.num_users = num_users;
    actor.state_dim = state_dim;
    actor.schedule = schedule_new(steps, beta_start, beta_end);
    actor.eps_net = nn::load_mlp(in);
    const std::size_t expected_in = static_cast<std::size_t>(state_dim + 2 * num_users + kStepEmbedDim);
    if (actor.eps_net.input_size() != expected_in ||
        actor.eps_net.output_size() != static_cast<std::size_t>(2 * num_users))
        throw ConfigError("actor checkpoint: network dimensions do not match scenario layout");
    return actor;
}

}  // namespace aigc
