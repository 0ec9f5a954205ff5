#include "aigc_alloc/critic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <thread>

#include "aigc_alloc/errors.hpp"
#include "aigc_alloc/tape.hpp"
#include "aigc_alloc/utils.hpp"

namespace aigc {

namespace {

// Substream ids carved off the master seed.
enum Stream : std::uint64_t {
    kActorInit = 0,
    kCriticInit = 1,
    kScenarioStream = 2,
    kExploreStream = 3,
    kReplayStream = 4,
    kActorNoiseStream = 5,
    kEvalScenarioStream = 100,
};

constexpr std::uint64_t kEvalNoiseSalt = 0x5EEDFACE0FDA7A17ULL;

}  // namespace

CriticPair critics_new(int state_dim, int action_dim, const std::vector<std::size_t>& hidden, double tau,
                       Rng& rng) {
    if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("critics_new: tau must lie in (0, 1]");
    std::vector<std::size_t> sizes;
    sizes.push_back(static_cast<std::size_t>(state_dim + action_dim));
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(1);
    CriticPair pair;
    pair.tau = tau;
    pair.q1 = nn::mlp_init(sizes, nn::Activation::Relu, nn::Activation::Identity, rng);
    pair.q2 = nn::mlp_init(sizes, nn::Activation::Relu, nn::Activation::Identity, rng);
    pair.q1_target = pair.q1;
    pair.q2_target = pair.q2;
    return pair;
}

void soft_update(CriticPair& pair) {
    const auto blend = [tau = pair.tau](nn::Mlp& target, const nn::Mlp& online) {
        auto target_params = target.param_ptrs();
        auto online_params = online.param_ptrs();
        for (std::size_t i = 0; i < target_params.size(); ++i)
            for (std::size_t k = 0; k < target_params[i]->size(); ++k)
                target_params[i]->data[k] =
                    (1.0 - tau) * target_params[i]->data[k] + tau * online_params[i]->data[k];
    };
    blend(pair.q1_target, pair.q1);
    blend(pair.q2_target, pair.q2);
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ConfigError("ReplayBuffer: capacity must be positive");
    storage_.reserve(std::min<std::size_t>(capacity, 1 << 16));
}

void ReplayBuffer::push(Transition t) {
    if (storage_.size() < capacity_) {
        storage_.push_back(std::move(t));
    } else {
        storage_[next_] = std::move(t);  // overwrite the oldest slot
        next_ = (next_ + 1) % capacity_;
    }
}

const Transition& ReplayBuffer::at(std::size_t logical_index) const {
    if (logical_index >= storage_.size()) throw ContractError("ReplayBuffer::at: index out of range");
    if (storage_.size() < capacity_) return storage_[logical_index];
    return storage_[(next_ + logical_index) % capacity_];
}

TransitionBatch ReplayBuffer::sample(std::size_t batch_size, Rng& rng) const {
    if (storage_.empty()) throw ContractError("ReplayBuffer::sample: buffer is empty");
    const std::size_t state_dim = storage_.front().state.size();
    const std::size_t action_dim = storage_.front().action.size();
    TransitionBatch batch;
    batch.states = nn::Tensor::zeros({batch_size, state_dim});
    batch.actions = nn::Tensor::zeros({batch_size, action_dim});
    batch.rewards.resize(batch_size);
    for (std::size_t b = 0; b < batch_size; ++b) {
        const auto idx = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(storage_.size()) - 1));
        const Transition& t = storage_[idx];
        std::copy(t.state.begin(), t.state.end(), batch.states.data.begin() + b * state_dim);
        std::copy(t.action.begin(), t.action.end(), batch.actions.data.begin() + b * action_dim);
        batch.rewards[b] = t.reward;
    }
    return batch;
}

namespace {

nn::Tensor reward_column(const TransitionBatch& batch) {
    nn::Tensor y = nn::Tensor::zeros({batch.size(), 1});
    std::copy(batch.rewards.begin(), batch.rewards.end(), y.data.begin());
    return y;
}

}  // namespace

double critic_loss(const CriticPair& pair, const TransitionBatch& batch) {
    if (batch.size() == 0) throw ContractError("critic_loss: empty batch");
    double loss = 0.0;
    nn::Tensor input = nn::Tensor::zeros({batch.size(), batch.states.cols() + batch.actions.cols()});
    for (std::size_t b = 0; b < batch.size(); ++b) {
        std::copy(batch.states.data.begin() + b * batch.states.cols(),
                  batch.states.data.begin() + (b + 1) * batch.states.cols(),
                  input.data.begin() + b * input.cols());
        std::copy(batch.actions.data.begin() + b * batch.actions.cols(),
                  batch.actions.data.begin() + (b + 1) * batch.actions.cols(),
                  input.data.begin() + b * input.cols() + batch.states.cols());
    }
    for (const nn::Mlp* net : {&pair.q1, &pair.q2}) {
        const nn::Tensor q = net->forward(input);
        double sum = 0.0;
        for (std::size_t b = 0; b < batch.size(); ++b) {
            const double err = q.data[b] - batch.rewards[b];
            sum += err * err;
        }
        loss += sum / static_cast<double>(batch.size());
    }
    return loss;
}

double critic_loss_and_grads(const CriticPair& pair, const TransitionBatch& batch,
                             std::vector<nn::Tensor>& q1_grads, std::vector<nn::Tensor>& q2_grads) {
    if (batch.size() == 0) throw ContractError("critic_loss_and_grads: empty batch");
    nn::Tape tape;
    const auto q1_vars = tape.register_mlp(pair.q1);
    const auto q2_vars = tape.register_mlp(pair.q2);
    const auto states = tape.constant(batch.states);
    const auto actions = tape.constant(batch.actions);
    const std::array<nn::Tape::Var, 2> parts{states, actions};
    const auto input = tape.concat_cols(parts);
    const auto targets = tape.constant(reward_column(batch));
    const auto q1_out = tape.apply_mlp(q1_vars, pair.q1, input);
    const auto q2_out = tape.apply_mlp(q2_vars, pair.q2, input);
    const auto loss =
        tape.add(tape.mean_square(tape.sub(q1_out, targets)), tape.mean_square(tape.sub(q2_out, targets)));
    tape.backward(loss);
    q1_grads = tape.mlp_grads(q1_vars);
    q2_grads = tape.mlp_grads(q2_vars);
    return tape.value(loss).data[0];
}

void TrainConfig::validate() const {
    if (total_steps < 0) throw ConfigError("train: total_steps must be non-negative");
    if (batch_size < 1) throw ConfigError("train: batch_size must be positive");
    if (static_cast<std::size_t>(batch_size) > replay_capacity)
        throw ConfigError("train: batch_size must not exceed replay capacity");
    if (lr_actor <= 0.0 || lr_critic <= 0.0) throw ConfigError("train: learning rates must be positive");
    if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("train: tau must lie in (0, 1]");
    if (warmup_steps < 0) throw ConfigError("train: warmup_steps must be non-negative");
    if (eval_every < 1) throw ConfigError("train: eval_every must be positive");
    if (eval_episodes < 1) throw ConfigError("train: eval_episodes must be positive");
    if (denoise_steps < 1 || denoise_steps > kMaxDenoiseSteps)
        throw ConfigError("train: denoise_steps outside supported range");
    if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
        throw ConfigError("train: invalid beta range");
    if (explore_noise_start < 0.0 || explore_noise_end < 0.0)
        throw ConfigError("train: exploration noise must be non-negative");
    sampler.validate();
}

EvalResult evaluate_raw_policy(const RawPolicyFn& policy, std::span<const Scenario> scenarios,
                               const StateNormalizer& norm) {
    EvalResult result;
    result.reports.resize(scenarios.size());
    const auto run_range = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const auto state = encode_state(scenarios[i], norm);
            const auto raw = policy(state);
            const Decision decision = project_feasible(scenarios[i], decode_decision(raw, scenarios[i]));
            result.reports[i] = evaluate(scenarios[i], decision);
        }
    };
    const std::size_t workers =
        std::min<std::size_t>(static_cast<std::size_t>(worker_threads()), scenarios.size());
    if (workers <= 1 || scenarios.size() < 8) {
        run_range(0, scenarios.size());
    } else {
        std::vector<std::thread> threads;
        const std::size_t chunk = (scenarios.size() + workers - 1) / workers;
        for (std::size_t w = 0; w < workers; ++w) {
            const std::size_t begin = w * chunk;
            const std::size_t end = std::min(scenarios.size(), begin + chunk);
            if (begin < end) threads.emplace_back(run_range, begin, end);
        }
        for (auto& t : threads) t.join();
    }
    for (const auto& report : result.reports) {
        result.mean_reward += report.reward;
        result.mean_total_qoe += report.total_qoe;
    }
    if (!scenarios.empty()) {
        result.mean_reward /= static_cast<double>(scenarios.size());
        result.mean_total_qoe /= static_cast<double>(scenarios.size());
    }
    return result;
}

std::vector<double> evaluation_terminal_noise(std::span<const double> state, int action_dim) {
    Rng rng(hash_doubles(state) ^ kEvalNoiseSalt);
    return rng.normal_vector(static_cast<std::size_t>(action_dim));
}

EvalResult evaluate_policy(const DiffusionActor& actor, std::span<const Scenario> scenarios,
                           const StateNormalizer& norm) {
    return evaluate_raw_policy(
        [&actor](const std::vector<double>& state) {
            const auto terminal = evaluation_terminal_noise(state, actor.action_dim());
            return denoise(actor, state, terminal, ChainMode::Deterministic, nullptr);
        },
        scenarios, norm);
}

std::vector<Scenario> evaluation_scenarios(const TrainConfig& config) {
    Rng rng = Rng(config.seed).derive(kEvalScenarioStream);
    std::vector<Scenario> scenarios;
    scenarios.reserve(static_cast<std::size_t>(config.eval_episodes));
    for (int i = 0; i < config.eval_episodes; ++i) scenarios.push_back(sample_scenario(rng, config.sampler));
    return scenarios;
}

TrainResult train(const TrainConfig& config) {
    config.validate();
    const Rng master(config.seed);
    Rng actor_init = master.derive(kActorInit);
    Rng critic_init = master.derive(kCriticInit);
    Rng scenario_rng = master.derive(kScenarioStream);
    Rng explore_rng = master.derive(kExploreStream);
    Rng replay_rng = master.derive(kReplayStream);
    Rng actor_noise_rng = master.derive(kActorNoiseStream);

    const int state_dim = static_cast<int>(config.sampler.state_dim());
    const int action_dim = 2 * config.sampler.num_users;

    TrainResult result{
        actor_new(config.sampler.num_users, state_dim, config.actor_hidden, config.denoise_steps,
                  config.beta_start, config.beta_end, actor_init),
        critics_new(state_dim, action_dim, config.critic_hidden, config.tau, critic_init),
        {},
    };
    DiffusionActor& actor = result.actor;
    CriticPair& critics = result.critics;

    nn::AdamState actor_opt, q1_opt, q2_opt;
    ReplayBuffer buffer(config.replay_capacity);
    const StateNormalizer norm = config.sampler.normalizer();
    const std::vector<Scenario> eval_set = evaluation_scenarios(config);

    std::vector<nn::Tensor> grads_a, grads_q1, grads_q2;
    for (long long step = 0; step < config.total_steps; ++step) {
        const Scenario scenario = sample_scenario(scenario_rng, config.sampler);
        const auto state = encode_state(scenario, norm);

        auto raw = sample_action(actor, state, explore_rng, ChainMode::Stochastic);
        const double frac =
            config.total_steps > 1 ? static_cast<double>(step) / static_cast<double>(config.total_steps - 1) : 0.0;
        const double noise_std =
            config.explore_noise_start + (config.explore_noise_end - config.explore_noise_start) * frac;
        for (auto& a : raw) a = std::clamp(a + noise_std * explore_rng.normal(), -kRawActionBound, kRawActionBound);

        const Decision decision = project_feasible(scenario, decode_decision(raw, scenario));
        const QoEReport report = evaluate(scenario, decision);
        buffer.push({state, raw, report.reward});

        if (step >= config.warmup_steps && buffer.size() >= static_cast<std::size_t>(config.batch_size)) {
            const TransitionBatch batch = buffer.sample(static_cast<std::size_t>(config.batch_size), replay_rng);
            const double c_loss = critic_loss_and_grads(critics, batch, grads_q1, grads_q2);
            adam_step(critics.q1.param_ptrs(), grads_q1, q1_opt, config.lr_critic);
            adam_step(critics.q2.param_ptrs(), grads_q2, q2_opt, config.lr_critic);

            nn::Tensor terminal = nn::Tensor::zeros({batch.size(), static_cast<std::size_t>(action_dim)});
            for (auto& v : terminal.data) v = actor_noise_rng.normal();
            const double a_loss =
                actor_loss_and_grads(actor, critics.q1, critics.q2, batch.states, terminal, grads_a);
            adam_step(actor.eps_net.param_ptrs(), grads_a, actor_opt, config.lr_actor);

            soft_update(critics);
            if (!std::isfinite(c_loss) || !std::isfinite(a_loss))
                throw std::runtime_error("train: non-finite loss at step " + std::to_string(step) +
                                         " (critic=" + std::to_string(c_loss) +
                                         ", actor=" + std::to_string(a_loss) + ")");
        }

        if ((step + 1) % config.eval_every == 0)
            result.curve.points.emplace_back(step + 1, evaluate_policy(actor, eval_set, norm).mean_reward);
    }
    return result;
}

}  // namespace aigc
