#include "aigc_alloc/baselines.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <thread>

#include "aigc_alloc/errors.hpp"
#include "aigc_alloc/tape.hpp"
#include "aigc_alloc/utils.hpp"

namespace aigc {

namespace {

constexpr double kTieEps = 1e-9;

std::vector<double> r_grid(int r_levels) {
    std::vector<double> grid;
    grid.reserve(static_cast<std::size_t>(r_levels));
    if (r_levels == 1) {
        grid.push_back(kMinResolutionRatio);
        return grid;
    }
    // endpoint-weighted interpolation keeps both ends of the grid exact
    const double span = static_cast<double>(r_levels - 1);
    for (int i = 0; i < r_levels; ++i)
        grid.push_back((kMinResolutionRatio * (span - i) + 1.0 * i) / span);
    return grid;
}

// Odometer over per-user (r index, d index) pairs, most significant first, so
// the visit order is the lexicographic order of (r_0, d_0, r_1, d_1, ...).
struct GridWalker {
    int users;
    long long combos_per_user;
    std::vector<long long> digits;

    explicit GridWalker(int n, long long per_user) : users(n), combos_per_user(per_user), digits(n, 0) {}

    void seed(long long leading) {
        digits.assign(static_cast<std::size_t>(users), 0);
        digits[0] = leading;
    }

    // Advances the non-leading digits; returns false after the last combo.
    bool advance() {
        for (int i = users - 1; i >= 1; --i) {
            if (++digits[i] < combos_per_user) return true;
            digits[i] = 0;
        }
        return false;
    }
};

struct ChunkBest {
    double best_reward = -std::numeric_limits<double>::infinity();
    bool found = false;
    long long points = 0;
};

struct ChunkTies {
    long long count = 0;
    std::vector<long long> first_combo;  // lexicographically first tie in this chunk
};

}  // namespace

int tractable_r_levels(const Scenario& scenario, int preferred) {
    for (int levels = preferred; levels >= 1; --levels) {
        const double log_size = scenario.num_users *
                                std::log(static_cast<double>(levels) * scenario.max_diffusion_step);
        if (log_size <= std::log(static_cast<double>(kOracleCapacity)) + 1e-12) return levels;
    }
    return 0;
}

OracleResult oracle_grid_search(const Scenario& scenario, int r_levels) {
    scenario.validate();
    if (r_levels < 1) throw ConfigError("oracle_grid_search: r_levels must be positive");
    const int n = scenario.num_users;
    const int t_max = scenario.max_diffusion_step;
    const double log_size = n * std::log(static_cast<double>(r_levels) * t_max);
    if (log_size > std::log(static_cast<double>(kOracleCapacity)) + 1e-12) {
        throw CapacityError("oracle_grid_search: grid of (" + std::to_string(r_levels) + " r levels x " +
                            std::to_string(t_max) + " steps)^" + std::to_string(n) +
                            " exceeds the 10^7 decision bound");
    }

    const auto grid = r_grid(r_levels);
    const long long combos_per_user = static_cast<long long>(grid.size()) * t_max;

    // Per-(r,d) tables; only the threshold term differs between users.
    std::vector<double> rate_table(static_cast<std::size_t>(combos_per_user));
    std::vector<double> qoe_table(static_cast<std::size_t>(combos_per_user));
    std::vector<double> step_cost_table(static_cast<std::size_t>(combos_per_user));
    for (std::size_t ri = 0; ri < grid.size(); ++ri) {
        for (int d = 1; d <= t_max; ++d) {
            const std::size_t idx = ri * static_cast<std::size_t>(t_max) + static_cast<std::size_t>(d - 1);
            rate_table[idx] = bitrate(grid[ri], scenario);
            qoe_table[idx] = user_qoe(grid[ri], d, scenario);
            step_cost_table[idx] = scenario.step_compute_cost * d;
        }
    }
    // reward contribution of user u choosing combo c, thresholds included
    const auto user_reward = [&](int u, long long c) {
        const double qoe = qoe_table[static_cast<std::size_t>(c)];
        double deficit = scenario.qoe_threshold[static_cast<std::size_t>(u)] - qoe;
        if (deficit <= kFeasEps) deficit = 0.0;
        return qoe - scenario.penalty_coeff * deficit;
    };

    const double bw_limit = scenario.bandwidth_budget + kFeasEps * std::max(1.0, scenario.bandwidth_budget);
    const double compute_limit = scenario.compute_budget + kFeasEps * std::max(1.0, scenario.compute_budget);

    const auto scan = [&](long long lead_begin, long long lead_end, ChunkBest& best, ChunkTies* ties,
                          double tie_floor) {
        GridWalker walker(n, combos_per_user);
        for (long long lead = lead_begin; lead < lead_end; ++lead) {
            walker.seed(lead);
            do {
                double bw = 0.0, compute = 0.0, reward = 0.0;
                for (int u = 0; u < n; ++u) {
                    const long long c = walker.digits[static_cast<std::size_t>(u)];
                    bw += rate_table[static_cast<std::size_t>(c)];
                    compute += step_cost_table[static_cast<std::size_t>(c)];
                    reward += user_reward(u, c);
                }
                best.points += 1;
                if (bw > bw_limit || compute > compute_limit) continue;
                best.found = true;
                if (reward > best.best_reward) best.best_reward = reward;
                if (ties != nullptr && reward >= tie_floor) {
                    ties->count += 1;
                    if (ties->first_combo.empty()) ties->first_combo = walker.digits;
                }
            } while (walker.advance());
        }
    };

    const long long lead_count = combos_per_user;
    const int workers = std::max(1, std::min<int>(worker_threads(), static_cast<int>(lead_count)));
    std::vector<std::pair<long long, long long>> ranges;
    const long long chunk = (lead_count + workers - 1) / workers;
    for (long long begin = 0; begin < lead_count; begin += chunk)
        ranges.emplace_back(begin, std::min(lead_count, begin + chunk));

    const auto run_pass = [&](auto&& body) {
        if (ranges.size() == 1) {
            body(0);
        } else {
            std::vector<std::thread> threads;
            for (std::size_t i = 0; i < ranges.size(); ++i) threads.emplace_back(body, i);
            for (auto& t : threads) t.join();
        }
    };

    // Pass 1: exact maximum reward over feasible grid decisions.
    std::vector<ChunkBest> bests(ranges.size());
    run_pass([&](std::size_t i) { scan(ranges[i].first, ranges[i].second, bests[i], nullptr, 0.0); });
    ChunkBest overall;
    for (const auto& b : bests) {
        overall.points += b.points;
        overall.found = overall.found || b.found;
        overall.best_reward = std::max(overall.best_reward, b.best_reward);
    }
    if (!overall.found)
        throw InfeasibleError("oracle_grid_search: no grid decision satisfies the resource budgets");

    // Pass 2: ties within kTieEps of the maximum; the lexicographically first
    // one is the winner, independent of how the chunks were partitioned.
    std::vector<ChunkBest> best2(ranges.size());
    std::vector<ChunkTies> ties(ranges.size());
    const double tie_floor = overall.best_reward - kTieEps;
    run_pass([&](std::size_t i) { scan(ranges[i].first, ranges[i].second, best2[i], &ties[i], tie_floor); });

    OracleResult result;
    result.points_evaluated = overall.points;
    std::vector<long long> winner;
    for (const auto& t : ties) {
        result.tie_count += t.count;
        if (winner.empty() && !t.first_combo.empty()) winner = t.first_combo;
    }
    result.best.resolution_ratio.resize(static_cast<std::size_t>(n));
    result.best.diffusion_step.resize(static_cast<std::size_t>(n));
    for (int u = 0; u < n; ++u) {
        const long long c = winner[static_cast<std::size_t>(u)];
        result.best.resolution_ratio[static_cast<std::size_t>(u)] = grid[static_cast<std::size_t>(c / t_max)];
        result.best.diffusion_step[static_cast<std::size_t>(u)] = static_cast<int>(c % t_max) + 1;
    }
    const QoEReport report = evaluate(scenario, result.best);
    result.total_qoe = report.total_qoe;
    result.reward = report.reward;
    return result;
}

Decision greedy_allocate(const Scenario& scenario) {
    Decision all_max;
    all_max.resolution_ratio.assign(static_cast<std::size_t>(scenario.num_users), 1.0);
    all_max.diffusion_step.assign(static_cast<std::size_t>(scenario.num_users), scenario.max_diffusion_step);
    return project_feasible(scenario, all_max);
}

Decision random_policy(const Scenario& scenario, Rng& rng) {
    Decision d;
    d.resolution_ratio.resize(static_cast<std::size_t>(scenario.num_users));
    d.diffusion_step.resize(static_cast<std::size_t>(scenario.num_users));
    for (auto& r : d.resolution_ratio) r = rng.uniform(kMinResolutionRatio, 1.0);
    for (auto& step : d.diffusion_step) step = rng.uniform_int(1, scenario.max_diffusion_step);
    return project_feasible(scenario, d);
}

GaussianPolicy gaussian_policy_new(int num_users, int state_dim, const std::vector<std::size_t>& hidden,
                                   Rng& rng) {
    GaussianPolicy policy;
    policy.num_users = num_users;
    policy.state_dim = state_dim;
    std::vector<std::size_t> sizes;
    sizes.push_back(static_cast<std::size_t>(state_dim));
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(static_cast<std::size_t>(4 * num_users));  // mean | log_std
    policy.net = nn::mlp_init(sizes, nn::Activation::Tanh, nn::Activation::Identity, rng);
    return policy;
}

namespace {

double clamped_log_std(double raw) { return std::clamp(raw, kLogStdMin, kLogStdMax); }

}  // namespace

std::vector<double> policy_mean_action(const GaussianPolicy& policy, const std::vector<double>& state) {
    const auto out = policy.net.forward(state);
    std::vector<double> action(static_cast<std::size_t>(policy.action_dim()));
    for (std::size_t i = 0; i < action.size(); ++i) action[i] = kRawActionBound * std::tanh(out[i]);
    return action;
}

std::vector<double> policy_sample(const GaussianPolicy& policy, const std::vector<double>& state, Rng& rng,
                                  double* log_prob) {
    const auto out = policy.net.forward(state);
    const std::size_t dim = static_cast<std::size_t>(policy.action_dim());
    std::vector<double> action(dim);
    double logp = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
        const double mean = out[i];
        const double log_std = clamped_log_std(out[dim + i]);
        const double std_dev = std::exp(log_std);
        const double z = rng.normal();
        const double u = mean + std_dev * z;
        const double t = std::tanh(u);
        action[i] = kRawActionBound * t;
        logp += -0.5 * z * z - log_std - 0.5 * std::log(2.0 * M_PI) -
                std::log(kRawActionBound * (1.0 - t * t) + 1e-8);
    }
    if (log_prob != nullptr) *log_prob = logp;
    return action;
}

namespace {

enum Stream : std::uint64_t {
    kPolicyInit = 0,
    kValueInit = 1,
    kScenarioStream = 2,
    kExploreStream = 3,
    kReplayStream = 4,
    kUpdateNoiseStream = 5,
};

nn::Tensor column(const std::vector<double>& values) {
    nn::Tensor t = nn::Tensor::zeros({values.size(), 1});
    std::copy(values.begin(), values.end(), t.data.begin());
    return t;
}

// Squashed-Gaussian actor terms for one batch: builds mean/log-std heads and
// the reparameterized action kRawActionBound * tanh(mean + std * zeta).
struct PolicyGraph {
    nn::Tape::Var mean;
    nn::Tape::Var log_std;
    nn::Tape::Var pre_squash;  // u
    nn::Tape::Var squashed;    // tanh(u)
    nn::Tape::Var action;      // kRawActionBound * tanh(u)
};

PolicyGraph build_policy_graph(nn::Tape& tape, const nn::Tape::MlpVars& vars, const GaussianPolicy& policy,
                               nn::Tape::Var states, const nn::Tensor& zeta) {
    const std::size_t dim = static_cast<std::size_t>(policy.action_dim());
    PolicyGraph g;
    const auto heads = tape.apply_mlp(vars, policy.net, states);
    g.mean = tape.slice_cols(heads, 0, dim);
    g.log_std = tape.clamp(tape.slice_cols(heads, dim, dim), kLogStdMin, kLogStdMax);
    const auto zeta_var = tape.constant(zeta);
    g.pre_squash = tape.add(g.mean, tape.mul(tape.exp_op(g.log_std), zeta_var));
    g.squashed = tape.tanh_op(g.pre_squash);
    g.action = tape.scale(g.squashed, kRawActionBound);
    return g;
}

}  // namespace

SacResult train_sac_lite(const TrainConfig& config) {
    config.validate();
    const Rng master(config.seed);
    Rng policy_init = master.derive(kPolicyInit);
    Rng critic_init = master.derive(kValueInit);
    Rng scenario_rng = master.derive(kScenarioStream);
    Rng explore_rng = master.derive(kExploreStream);
    Rng replay_rng = master.derive(kReplayStream);
    Rng update_rng = master.derive(kUpdateNoiseStream);

    const int state_dim = static_cast<int>(config.sampler.state_dim());
    const int action_dim = 2 * config.sampler.num_users;

    SacResult result{
        gaussian_policy_new(config.sampler.num_users, state_dim, config.actor_hidden, policy_init),
        critics_new(state_dim, action_dim, config.critic_hidden, config.tau, critic_init),
        {},
    };
    GaussianPolicy& policy = result.policy;
    CriticPair& critics = result.critics;

    nn::AdamState policy_opt, q1_opt, q2_opt;
    ReplayBuffer buffer(config.replay_capacity);
    const StateNormalizer norm = config.sampler.normalizer();
    const std::vector<Scenario> eval_set = evaluation_scenarios(config);
    const auto eval_policy = [&policy](const std::vector<double>& state) {
        return policy_mean_action(policy, state);
    };

    const std::size_t dim = static_cast<std::size_t>(action_dim);
    std::vector<nn::Tensor> grads_pi, grads_q1, grads_q2;
    for (long long step = 0; step < config.total_steps; ++step) {
        const Scenario scenario = sample_scenario(scenario_rng, config.sampler);
        const auto state = encode_state(scenario, norm);
        const auto raw = policy_sample(policy, state, explore_rng, nullptr);
        const Decision decision = project_feasible(scenario, decode_decision(raw, scenario));
        const QoEReport report = evaluate(scenario, decision);
        buffer.push({state, raw, report.reward});

        if (step >= config.warmup_steps && buffer.size() >= static_cast<std::size_t>(config.batch_size)) {
            const TransitionBatch batch = buffer.sample(static_cast<std::size_t>(config.batch_size), replay_rng);
            const double c_loss = critic_loss_and_grads(critics, batch, grads_q1, grads_q2);
            adam_step(critics.q1.param_ptrs(), grads_q1, q1_opt, config.lr_critic);
            adam_step(critics.q2.param_ptrs(), grads_q2, q2_opt, config.lr_critic);

            // policy step: maximize E[min Q(s, a) - alpha * log pi(a|s)]
            nn::Tensor zeta = nn::Tensor::zeros({batch.size(), dim});
            for (auto& v : zeta.data) v = update_rng.normal();
            nn::Tape tape;
            const auto pi_vars = tape.register_mlp(policy.net);
            const auto q1_vars = tape.register_mlp_frozen(critics.q1);
            const auto q2_vars = tape.register_mlp_frozen(critics.q2);
            const auto states = tape.constant(batch.states);
            const auto g = build_policy_graph(tape, pi_vars, policy, states, zeta);
            const std::array<nn::Tape::Var, 2> q_parts{states, g.action};
            const auto q_input = tape.concat_cols(q_parts);
            const auto q_min =
                tape.minimum(tape.apply_mlp(q1_vars, critics.q1, q_input), tape.apply_mlp(q2_vars, critics.q2, q_input));
            // log pi(a|s) = sum_dims [-0.5 zeta^2 - log_std - 0.5 log 2pi - log(c(1 - tanh(u)^2) + eps)]
            const auto ones = tape.constant(nn::Tensor({batch.size(), dim},
                                                       std::vector<double>(batch.size() * dim, 1.0)));
            const auto zeta_sq = tape.constant([&] {
                nn::Tensor t = zeta;
                for (auto& v : t.data) v = v * v;
                return t;
            }());
            const auto squash_sq = tape.square(g.squashed);
            const auto jac = tape.log_op(tape.lincomb(kRawActionBound, tape.sub(ones, squash_sq), 1e-8, ones));
            auto log_pi_terms = tape.lincomb(-0.5, zeta_sq, -1.0, g.log_std);
            log_pi_terms = tape.sub(log_pi_terms, jac);
            const auto log_pi = tape.sum_cols(log_pi_terms);  // constant -0.5*log(2pi)*dim omitted
            const auto loss = tape.mean_all(tape.lincomb(kSacTemperature, log_pi, -1.0, q_min));
            tape.backward(loss);
            grads_pi = tape.mlp_grads(pi_vars);
            adam_step(policy.net.param_ptrs(), grads_pi, policy_opt, config.lr_actor);

            soft_update(critics);
            const double pi_loss = tape.value(loss).data[0];
            if (!std::isfinite(c_loss) || !std::isfinite(pi_loss))
                throw std::runtime_error("train_sac_lite: non-finite loss at step " + std::to_string(step));
        }

        if ((step + 1) % config.eval_every == 0)
            result.curve.points.emplace_back(step + 1,
                                             evaluate_raw_policy(eval_policy, eval_set, norm).mean_reward);
    }
    return result;
}

PpoResult train_ppo_lite(const TrainConfig& config) {
    config.validate();
    const Rng master(config.seed);
    Rng policy_init = master.derive(kPolicyInit);
    Rng value_init = master.derive(kValueInit);
    Rng scenario_rng = master.derive(kScenarioStream);
    Rng explore_rng = master.derive(kExploreStream);

    const int state_dim = static_cast<int>(config.sampler.state_dim());
    const std::size_t dim = static_cast<std::size_t>(2 * config.sampler.num_users);

    PpoResult result;
    result.policy = gaussian_policy_new(config.sampler.num_users, state_dim, config.actor_hidden, policy_init);
    std::vector<std::size_t> value_sizes;
    value_sizes.push_back(static_cast<std::size_t>(state_dim));
    value_sizes.insert(value_sizes.end(), config.critic_hidden.begin(), config.critic_hidden.end());
    value_sizes.push_back(1);
    result.value_net = nn::mlp_init(value_sizes, nn::Activation::Tanh, nn::Activation::Identity, value_init);

    nn::AdamState policy_opt, value_opt;
    const StateNormalizer norm = config.sampler.normalizer();
    const std::vector<Scenario> eval_set = evaluation_scenarios(config);
    const auto eval_policy = [&result](const std::vector<double>& state) {
        return policy_mean_action(result.policy, state);
    };

    const std::size_t rollout = static_cast<std::size_t>(config.batch_size);
    long long env_steps = 0;
    long long next_eval = config.eval_every;
    while (env_steps < config.total_steps) {
        // collect one on-policy rollout of single-step episodes
        nn::Tensor states = nn::Tensor::zeros({rollout, static_cast<std::size_t>(state_dim)});
        nn::Tensor pre_squash = nn::Tensor::zeros({rollout, dim});
        std::vector<double> gauss_logp_old(rollout);
        std::vector<double> rewards(rollout);
        for (std::size_t b = 0; b < rollout; ++b) {
            const Scenario scenario = sample_scenario(scenario_rng, config.sampler);
            const auto state = encode_state(scenario, norm);
            std::copy(state.begin(), state.end(), states.data.begin() + b * state.size());
            const auto heads = result.policy.net.forward(state);
            double glogp = 0.0;
            std::vector<double> raw(dim);
            for (std::size_t i = 0; i < dim; ++i) {
                const double mean = heads[i];
                const double log_std = clamped_log_std(heads[dim + i]);
                const double std_dev = std::exp(log_std);
                const double z = explore_rng.normal();
                const double u = mean + std_dev * z;
                pre_squash.at(b, i) = u;
                raw[i] = kRawActionBound * std::tanh(u);
                glogp += -0.5 * z * z - log_std;  // squash terms cancel in the ratio
            }
            const Decision decision = project_feasible(scenario, decode_decision(raw, scenario));
            rewards[b] = evaluate(scenario, decision).reward;
        }
        env_steps += static_cast<long long>(rollout);

        // advantages against the learned state-value baseline, normalized
        const nn::Tensor values = result.value_net.forward(states);
        std::vector<double> advantage(rollout);
        double adv_mean = 0.0;
        for (std::size_t b = 0; b < rollout; ++b) {
            advantage[b] = rewards[b] - values.data[b];
            adv_mean += advantage[b];
        }
        adv_mean /= static_cast<double>(rollout);
        double adv_var = 0.0;
        for (double a : advantage) adv_var += (a - adv_mean) * (a - adv_mean);
        const double adv_std = std::sqrt(adv_var / static_cast<double>(rollout));
        for (auto& a : advantage) a = (a - adv_mean) / (adv_std + 1e-8);

        for (int epoch = 0; epoch < kPpoEpochs; ++epoch) {
            // policy: clipped-ratio objective on the stored pre-squash actions
            nn::Tape tape;
            const auto pi_vars = tape.register_mlp(result.policy.net);
            const auto states_var = tape.constant(states);
            const auto heads = tape.apply_mlp(pi_vars, result.policy.net, states_var);
            const auto mean = tape.slice_cols(heads, 0, dim);
            const auto log_std = tape.clamp(tape.slice_cols(heads, dim, dim), kLogStdMin, kLogStdMax);
            const auto u_const = tape.constant(pre_squash);
            const auto z = tape.mul(tape.sub(u_const, mean), tape.exp_op(tape.scale(log_std, -1.0)));
            const auto glogp_terms = tape.lincomb(-0.5, tape.square(z), -1.0, log_std);
            const auto glogp_new = tape.sum_cols(glogp_terms);
            const auto ratio = tape.exp_op(tape.sub(glogp_new, tape.constant(column(gauss_logp_old))));
            const auto adv = tape.constant(column(advantage));
            const auto unclipped = tape.mul(ratio, adv);
            const auto clipped = tape.mul(tape.clamp(ratio, 1.0 - kPpoClip, 1.0 + kPpoClip), adv);
            const auto objective = tape.minimum(unclipped, clipped);
            const auto loss = tape.scale(tape.mean_all(objective), -1.0);
            tape.backward(loss);
            const auto grads_pi = tape.mlp_grads(pi_vars);
            adam_step(result.policy.net.param_ptrs(), grads_pi, policy_opt, config.lr_actor);

            // value baseline regression
            nn::Tape vtape;
            const auto v_vars = vtape.register_mlp(result.value_net);
            const auto v_out = vtape.apply_mlp(v_vars, result.value_net, vtape.constant(states));
            const auto v_loss = vtape.mean_square(vtape.sub(v_out, vtape.constant(column(rewards))));
            vtape.backward(v_loss);
            const auto grads_v = vtape.mlp_grads(v_vars);
            adam_step(result.value_net.param_ptrs(), grads_v, value_opt, config.lr_critic);

            if (!std::isfinite(tape.value(loss).data[0]) || !std::isfinite(vtape.value(v_loss).data[0]))
                throw std::runtime_error("train_ppo_lite: non-finite loss at env step " +
                                         std::to_string(env_steps));
        }

        if (env_steps >= next_eval) {
            result.curve.points.emplace_back(env_steps,
                                             evaluate_raw_policy(eval_policy, eval_set, norm).mean_reward);
            next_eval = (env_steps / config.eval_every + 1) * config.eval_every;
        }
    }
    return result;
}

SolverKind solver_from_name(const std::string& name) {
    if (name == "codi") return SolverKind::Codi;
    if (name == "sac") return SolverKind::Sac;
    if (name == "ppo") return SolverKind::Ppo;
    if (name == "greedy") return SolverKind::Greedy;
    if (name == "random") return SolverKind::Random;
    if (name == "oracle") return SolverKind::Oracle;
    throw ConfigError("unknown solver: " + name + " (expected codi|sac|ppo|greedy|random|oracle)");
}

const std::vector<std::string>& solver_names() {
    static const std::vector<std::string> names{"codi", "sac", "ppo", "greedy", "random", "oracle"};
    return names;
}

}  // namespace aigc
