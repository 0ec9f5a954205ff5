#include "aigc_alloc/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <thread>

#include <CLI11.hpp>

#include "aigc_alloc/baselines.hpp"
#include "aigc_alloc/errors.hpp"
#include "aigc_alloc/gradcheck.hpp"
#include "aigc_alloc/utils.hpp"

namespace aigc::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string timestamp_utc() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

class CsvFile {
public:
    CsvFile(const fs::path& path, const std::string& header) : out_(path, std::ios::binary) {
        if (!out_) throw ConfigError("cannot open output file: " + path.string());
        out_ << header << '\n';
    }
    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
        out_ << '\n';
    }

private:
    std::ofstream out_;
};

void write_curve_csv(const fs::path& path, const LearningCurve& curve) {
    CsvFile csv(path, "step,mean_reward");
    for (const auto& [step, reward] : curve.points) csv.row({std::to_string(step), format_double(reward)});
}

struct Manifest {
    json config_snapshot;
    std::string command;
    std::string started_at;
    std::vector<json> runs;
    json terminal_metrics = json::object();

    void write(const fs::path& out_dir) const {
        json root{
            {"tool_version", kToolVersion},
            {"rng_algorithm", Rng::kAlgorithmName},
            {"command", command},
            {"started_at", started_at},
            {"finished_at", timestamp_utc()},
            {"config", config_snapshot},
            {"runs", runs},
            {"terminal_metrics", terminal_metrics},
        };
        std::ofstream out(out_dir / "manifest.json", std::ios::binary);
        if (!out) throw ConfigError("cannot write manifest in " + out_dir.string());
        out << root.dump(2) << '\n';
    }
};

// Runs one job per index on up to worker_threads() threads; any exception is
// rethrown on the caller thread after all workers finish.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& job) {
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(worker_threads()), count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) job(i);
        return;
    }
    std::vector<std::exception_ptr> errors(count);
    std::vector<std::thread> threads;
    std::size_t next = 0;
    std::mutex mutex;
    for (std::size_t w = 0; w < workers; ++w) {
        threads.emplace_back([&] {
            while (true) {
                std::size_t index;
                {
                    std::lock_guard lock(mutex);
                    if (next >= count) return;
                    index = next++;
                }
                try {
                    job(index);
                } catch (...) {
                    errors[index] = std::current_exception();
                }
            }
        });
    }
    for (auto& t : threads) t.join();
    for (auto& err : errors)
        if (err) std::rethrow_exception(err);
}

void save_critics(const fs::path& dir, const std::string& stem, const CriticPair& critics) {
    nn::save_mlp_file((dir / (stem + "_q1.ckpt")).string(), critics.q1);
    nn::save_mlp_file((dir / (stem + "_q2.ckpt")).string(), critics.q2);
    nn::save_mlp_file((dir / (stem + "_q1_target.ckpt")).string(), critics.q1_target);
    nn::save_mlp_file((dir / (stem + "_q2_target.ckpt")).string(), critics.q2_target);
}

std::vector<std::string> critic_files(const std::string& stem) {
    return {stem + "_q1.ckpt", stem + "_q2.ckpt", stem + "_q1_target.ckpt", stem + "_q2_target.ckpt"};
}

}  // namespace

std::string format_double(double value) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", value);
    return buf;
}

int cmd_train(const ExperimentConfig& config) {
    const SolverKind kind = solver_from_name(config.solver);
    if (kind != SolverKind::Codi && kind != SolverKind::Sac && kind != SolverKind::Ppo)
        throw ConfigError("train: solver \"" + config.solver + "\" is not trainable (use codi, sac or ppo)");

    const fs::path out_dir(config.out_dir);
    fs::create_directories(out_dir);
    Manifest manifest;
    manifest.command = "train";
    manifest.started_at = timestamp_utc();
    manifest.config_snapshot = config_to_json(config);
    manifest.runs.resize(config.seeds.size());

    parallel_for(config.seeds.size(), [&](std::size_t i) {
        const std::uint64_t seed = config.seeds[i];
        TrainConfig train_config = config.train;
        train_config.seed = seed;
        const std::string stem = config.solver + "_seed" + std::to_string(seed);
        const std::string curve_name = "curve_" + config.solver + "_" + std::to_string(seed) + ".csv";
        std::vector<std::string> files{curve_name};
        LearningCurve curve;

        if (kind == SolverKind::Codi) {
            TrainResult result = train(train_config);
            curve = std::move(result.curve);
            save_actor_file((out_dir / (stem + "_actor.ckpt")).string(), result.actor);
            save_critics(out_dir, stem, result.critics);
            files.push_back(stem + "_actor.ckpt");
            for (auto& f : critic_files(stem)) files.push_back(f);
        } else if (kind == SolverKind::Sac) {
            SacResult result = train_sac_lite(train_config);
            curve = std::move(result.curve);
            nn::save_mlp_file((out_dir / (stem + "_policy.ckpt")).string(), result.policy.net);
            save_critics(out_dir, stem, result.critics);
            files.push_back(stem + "_policy.ckpt");
            for (auto& f : critic_files(stem)) files.push_back(f);
        } else {
            PpoResult result = train_ppo_lite(train_config);
            curve = std::move(result.curve);
            nn::save_mlp_file((out_dir / (stem + "_policy.ckpt")).string(), result.policy.net);
            nn::save_mlp_file((out_dir / (stem + "_value.ckpt")).string(), result.value_net);
            files.push_back(stem + "_policy.ckpt");
            files.push_back(stem + "_value.ckpt");
        }

        write_curve_csv(out_dir / curve_name, curve);
        const double final_reward = curve.points.empty() ? 0.0 : curve.points.back().second;
        manifest.runs[i] = json{{"seed", seed}, {"files", files}, {"final_mean_reward", final_reward}};
    });

    double mean_final = 0.0;
    for (const auto& run : manifest.runs) mean_final += run.at("final_mean_reward").get<double>();
    mean_final /= static_cast<double>(manifest.runs.size());
    manifest.terminal_metrics["mean_final_reward"] = mean_final;
    manifest.write(out_dir);
    std::cout << "train: " << config.solver << " over " << config.seeds.size()
              << " seed(s), mean final reward " << format_double(mean_final) << "\n";
    return 0;
}

int cmd_sweep_users(const ExperimentConfig& config) {
    const fs::path out_dir(config.out_dir);
    fs::create_directories(out_dir);
    Manifest manifest;
    manifest.command = "sweep-users";
    manifest.started_at = timestamp_utc();
    manifest.config_snapshot = config_to_json(config);

    struct Row {
        std::string solver;
        int num_users;
        std::uint64_t seed;
        double total_qoe;
    };
    struct Task {
        std::string solver;
        int num_users;
        std::uint64_t seed;
    };
    std::vector<Task> tasks;
    for (int n : config.sweep.user_counts)
        for (const auto& solver : config.sweep.solvers)
            for (std::uint64_t seed : config.seeds) tasks.push_back({solver, n, seed});
    std::vector<Row> rows(tasks.size());

    parallel_for(tasks.size(), [&](std::size_t i) {
        const Task& task = tasks[i];
        TrainConfig train_config = config.train;
        train_config.sampler = scale_sampler_to_users(config.train.sampler, task.num_users);
        train_config.seed = task.seed;
        const auto eval_set = evaluation_scenarios(train_config);
        const StateNormalizer norm = train_config.sampler.normalizer();
        double total_qoe = 0.0;

        switch (solver_from_name(task.solver)) {
            case SolverKind::Codi: {
                TrainResult result = train(train_config);
                total_qoe = evaluate_policy(result.actor, eval_set, norm).mean_total_qoe;
                break;
            }
            case SolverKind::Sac: {
                SacResult result = train_sac_lite(train_config);
                total_qoe = evaluate_raw_policy(
                                [&](const std::vector<double>& s) { return policy_mean_action(result.policy, s); },
                                eval_set, norm)
                                .mean_total_qoe;
                break;
            }
            case SolverKind::Ppo: {
                PpoResult result = train_ppo_lite(train_config);
                total_qoe = evaluate_raw_policy(
                                [&](const std::vector<double>& s) { return policy_mean_action(result.policy, s); },
                                eval_set, norm)
                                .mean_total_qoe;
                break;
            }
            case SolverKind::Greedy: {
                for (const auto& scenario : eval_set)
                    total_qoe += evaluate(scenario, greedy_allocate(scenario)).total_qoe;
                total_qoe /= static_cast<double>(eval_set.size());
                break;
            }
            case SolverKind::Random: {
                Rng rng(task.seed);
                for (const auto& scenario : eval_set)
                    total_qoe += evaluate(scenario, random_policy(scenario, rng)).total_qoe;
                total_qoe /= static_cast<double>(eval_set.size());
                break;
            }
            case SolverKind::Oracle: {
                for (const auto& scenario : eval_set) {
                    const int levels = tractable_r_levels(scenario, config.oracle_r_levels);
                    if (levels < 1)
                        throw CapacityError("sweep-users: oracle grid intractable at N=" +
                                            std::to_string(task.num_users));
                    total_qoe += oracle_grid_search(scenario, levels).total_qoe;
                }
                total_qoe /= static_cast<double>(eval_set.size());
                break;
            }
        }
        rows[i] = Row{task.solver, task.num_users, task.seed, total_qoe};
    });

    CsvFile csv(out_dir / "qoe_vs_users.csv", "solver,num_users,seed,total_qoe");
    for (const auto& row : rows)
        csv.row({row.solver, std::to_string(row.num_users), std::to_string(row.seed),
                 format_double(row.total_qoe)});

    json summary = json::object();
    for (const auto& row : rows) {
        auto& bucket = summary[row.solver + "_N" + std::to_string(row.num_users)];
        bucket = bucket.is_null() ? row.total_qoe : bucket.get<double>() + row.total_qoe;
    }
    for (auto& [key, value] : summary.items())
        value = value.get<double>() / static_cast<double>(config.seeds.size());
    manifest.terminal_metrics = summary;
    for (std::size_t i = 0; i < tasks.size(); ++i)
        manifest.runs.push_back(json{{"solver", tasks[i].solver},
                                     {"num_users", tasks[i].num_users},
                                     {"seed", tasks[i].seed},
                                     {"files", {"qoe_vs_users.csv"}},
                                     {"total_qoe", rows[i].total_qoe}});
    manifest.write(out_dir);
    std::cout << "sweep-users: wrote " << rows.size() << " rows to qoe_vs_users.csv\n";
    return 0;
}

int cmd_oracle(const ExperimentConfig& config) {
    if (!config.scenario) throw ConfigError("oracle: config needs a \"scenario\" block");
    const fs::path out_dir(config.out_dir);
    fs::create_directories(out_dir);
    Manifest manifest;
    manifest.command = "oracle";
    manifest.started_at = timestamp_utc();
    manifest.config_snapshot = config_to_json(config);

    const OracleResult result = oracle_grid_search(*config.scenario, config.oracle_r_levels);

    CsvFile csv(out_dir / "oracle.csv", "key,value");
    csv.row({"total_qoe", format_double(result.total_qoe)});
    csv.row({"reward", format_double(result.reward)});
    csv.row({"tie_count", std::to_string(result.tie_count)});
    csv.row({"points_evaluated", std::to_string(result.points_evaluated)});
    for (std::size_t i = 0; i < result.best.resolution_ratio.size(); ++i) {
        csv.row({"r_" + std::to_string(i), format_double(result.best.resolution_ratio[i])});
        csv.row({"d_" + std::to_string(i), std::to_string(result.best.diffusion_step[i])});
    }

    manifest.runs.push_back(json{{"files", {"oracle.csv"}}});
    manifest.terminal_metrics = json{{"reward", result.reward},
                                     {"total_qoe", result.total_qoe},
                                     {"tie_count", result.tie_count}};
    manifest.write(out_dir);
    std::cout << "oracle: reward " << format_double(result.reward) << ", total QoE "
              << format_double(result.total_qoe) << ", ties " << result.tie_count << ", points "
              << result.points_evaluated << "\n";
    return 0;
}

int cmd_evaluate(const ExperimentConfig& config) {
    const fs::path out_dir(config.out_dir);
    fs::create_directories(out_dir);
    Manifest manifest;
    manifest.command = "evaluate";
    manifest.started_at = timestamp_utc();
    manifest.config_snapshot = config_to_json(config);

    TrainConfig eval_config = config.train;
    eval_config.seed = config.seeds.front();
    std::vector<Scenario> scenarios;
    if (config.scenario) {
        scenarios.push_back(*config.scenario);
    } else {
        scenarios = evaluation_scenarios(eval_config);
    }
    const StateNormalizer norm = eval_config.sampler.normalizer();
    const SolverKind kind = solver_from_name(config.solver);

    EvalResult result;
    if (kind == SolverKind::Codi || kind == SolverKind::Sac || kind == SolverKind::Ppo) {
        if (config.checkpoint.empty())
            throw ConfigError("evaluate: solver \"" + config.solver + "\" needs a checkpoint path");
        if (kind == SolverKind::Codi) {
            const DiffusionActor actor =
                load_actor_file(config.checkpoint, eval_config.sampler.num_users,
                                static_cast<int>(eval_config.sampler.state_dim()));
            result = evaluate_policy(actor, scenarios, norm);
        } else {
            GaussianPolicy policy;
            policy.num_users = eval_config.sampler.num_users;
            policy.state_dim = static_cast<int>(eval_config.sampler.state_dim());
            policy.net = nn::load_mlp_file(config.checkpoint);
            if (policy.net.output_size() != static_cast<std::size_t>(4 * policy.num_users))
                throw ConfigError("evaluate: policy checkpoint does not match the configured user count");
            result = evaluate_raw_policy(
                [&](const std::vector<double>& s) { return policy_mean_action(policy, s); }, scenarios, norm);
        }
    } else {
        Rng rng(eval_config.seed);
        result.reports.reserve(scenarios.size());
        for (const auto& scenario : scenarios) {
            Decision decision;
            if (kind == SolverKind::Greedy) decision = greedy_allocate(scenario);
            else if (kind == SolverKind::Random) decision = random_policy(scenario, rng);
            else {
                const int levels = tractable_r_levels(scenario, config.oracle_r_levels);
                if (levels < 1) throw CapacityError("evaluate: oracle grid intractable for this scenario");
                decision = oracle_grid_search(scenario, levels).best;
            }
            result.reports.push_back(evaluate(scenario, decision));
        }
        for (const auto& r : result.reports) {
            result.mean_reward += r.reward;
            result.mean_total_qoe += r.total_qoe;
        }
        result.mean_reward /= static_cast<double>(result.reports.size());
        result.mean_total_qoe /= static_cast<double>(result.reports.size());
    }

    CsvFile csv(out_dir / "evaluation.csv", "scenario_index,total_qoe,reward,bandwidth_used,compute_used,penalty");
    for (std::size_t i = 0; i < result.reports.size(); ++i) {
        const QoEReport& r = result.reports[i];
        csv.row({std::to_string(i), format_double(r.total_qoe), format_double(r.reward),
                 format_double(r.bandwidth_used), format_double(r.compute_used), format_double(r.penalty)});
    }
    manifest.runs.push_back(json{{"files", {"evaluation.csv"}}});
    manifest.terminal_metrics =
        json{{"mean_reward", result.mean_reward}, {"mean_total_qoe", result.mean_total_qoe}};
    manifest.write(out_dir);
    std::cout << "evaluate: " << config.solver << " mean reward " << format_double(result.mean_reward)
              << ", mean total QoE " << format_double(result.mean_total_qoe) << " over "
              << result.reports.size() << " scenario(s)\n";
    return 0;
}

int cmd_gradcheck() {
    const GradCheckReport report = run_gradcheck(false);
    for (const auto& entry : report.entries)
        std::cout << (entry.pass ? "PASS " : "FAIL ") << entry.name << " max_rel_err="
                  << format_double(entry.max_rel_err) << "\n";
    std::cout << (report.pass ? "gradcheck OK" : "gradcheck FAILED") << ": worst " << report.worst_name
              << " max_rel_err=" << format_double(report.worst_err) << " (tolerance "
              << format_double(kGradCheckTolerance) << ")\n";
    return report.pass ? 0 : 1;
}

int run_cli(int argc, char** argv) {
    CLI::App app{"Edge AIGC QoE allocation: diffusion-policy training, baselines and experiment artifacts"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_override;
    std::vector<std::string> seed_exprs;
    std::vector<std::string> overrides;

    const auto add_common = [&](CLI::App* cmd, bool config_required) {
        cmd->add_option("--config", config_path, "experiment config (JSON)")->required(config_required);
        cmd->add_option("--seed", seed_exprs, "seed list, e.g. --seed 1,2,3")->delimiter(',');
        cmd->add_option("--out", out_override, "output directory override");
        cmd->add_option("--set", overrides, "config override key.path=value")->take_all();
    };

    auto* train_cmd = app.add_subcommand("train", "train the configured solver for every seed");
    add_common(train_cmd, true);
    auto* sweep_cmd = app.add_subcommand("sweep-users", "train/evaluate all solvers across user counts");
    add_common(sweep_cmd, true);
    std::vector<int> user_counts;
    sweep_cmd->add_option("--users", user_counts, "user counts, e.g. --users 2,4,6")->delimiter(',');
    auto* oracle_cmd = app.add_subcommand("oracle", "exhaustive grid search on the configured scenario");
    add_common(oracle_cmd, true);
    auto* eval_cmd = app.add_subcommand("evaluate", "evaluate a checkpoint or heuristic on fresh scenarios");
    add_common(eval_cmd, true);
    auto* gradcheck_cmd = app.add_subcommand("gradcheck", "finite-difference verification of all gradients");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (gradcheck_cmd->parsed()) return cmd_gradcheck();

        ExperimentConfig config = load_config_file(config_path, overrides);
        if (!out_override.empty()) config.out_dir = out_override;
        if (!seed_exprs.empty()) {
            config.seeds.clear();
            for (const auto& expr : seed_exprs) config.seeds.push_back(std::stoull(expr));
        }
        if (train_cmd->parsed()) return cmd_train(config);
        if (sweep_cmd->parsed()) {
            if (!user_counts.empty()) config.sweep.user_counts = user_counts;
            return cmd_sweep_users(config);
        }
        if (oracle_cmd->parsed()) return cmd_oracle(config);
        if (eval_cmd->parsed()) return cmd_evaluate(config);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

}  // namespace aigc::cli
