#include "aigc_alloc/config.hpp"

#include <fstream>
#include <set>

#include "aigc_alloc/baselines.hpp"
#include "aigc_alloc/errors.hpp"

namespace aigc {

namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::string& where, const std::set<std::string>& allowed) {
    if (!obj.is_object()) throw ConfigError("config: " + where + " must be an object");
    for (const auto& [key, _] : obj.items())
        if (!allowed.contains(key)) throw ConfigError("config: unknown key \"" + key + "\" in " + where);
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
    if (obj.contains(key)) out = obj.at(key).get<T>();
}

void read_range(const json& obj, const char* key, std::pair<double, double>& out) {
    if (!obj.contains(key)) return;
    const auto& v = obj.at(key);
    if (!v.is_array() || v.size() != 2) throw ConfigError(std::string("config: ") + key + " must be [low, high]");
    out = {v[0].get<double>(), v[1].get<double>()};
}

SamplerConfig sampler_from_json(const json& obj, const SamplerConfig& base) {
    check_keys(obj, "sampler",
               {"num_users", "bandwidth_range", "compute_range", "threshold_range", "weight_bitrate",
                "weight_similarity", "max_bitrate", "ref_bitrate", "similarity_floor", "similarity_ceiling",
                "max_diffusion_step", "step_compute_cost", "penalty_coeff"});
    SamplerConfig s = base;
    const int previous_users = s.num_users;
    read(obj, "num_users", s.num_users);
    if (s.num_users != previous_users && !obj.contains("bandwidth_range")) {
        // keep per-user budget fractions when only the user count changes
        s = scale_sampler_to_users(base, s.num_users);
    }
    read_range(obj, "bandwidth_range", s.bandwidth_range);
    read_range(obj, "compute_range", s.compute_range);
    read_range(obj, "threshold_range", s.threshold_range);
    read(obj, "weight_bitrate", s.weight_bitrate);
    read(obj, "weight_similarity", s.weight_similarity);
    read(obj, "max_bitrate", s.max_bitrate);
    read(obj, "ref_bitrate", s.ref_bitrate);
    read(obj, "similarity_floor", s.similarity_floor);
    read(obj, "similarity_ceiling", s.similarity_ceiling);
    read(obj, "max_diffusion_step", s.max_diffusion_step);
    read(obj, "step_compute_cost", s.step_compute_cost);
    read(obj, "penalty_coeff", s.penalty_coeff);
    s.validate();
    return s;
}

Scenario scenario_from_json(const json& obj) {
    check_keys(obj, "scenario",
               {"preset", "num_users", "bandwidth_budget", "compute_budget", "qoe_threshold", "weight_bitrate",
                "weight_similarity", "max_bitrate", "ref_bitrate", "similarity_floor", "similarity_ceiling",
                "max_diffusion_step", "step_compute_cost", "penalty_coeff"});
    Scenario s;
    if (obj.contains("preset")) {
        s = preset_scenario(obj.at("preset").get<std::string>());
    } else {
        if (!obj.contains("num_users") || !obj.contains("bandwidth_budget") || !obj.contains("compute_budget"))
            throw ConfigError("config: scenario needs either a preset or num_users + both budgets");
        s.num_users = obj.at("num_users").get<int>();
        s.qoe_threshold.assign(static_cast<std::size_t>(s.num_users), 0.5);
    }
    read(obj, "num_users", s.num_users);
    read(obj, "bandwidth_budget", s.bandwidth_budget);
    read(obj, "compute_budget", s.compute_budget);
    if (obj.contains("qoe_threshold")) {
        const auto& t = obj.at("qoe_threshold");
        if (t.is_number()) {
            s.qoe_threshold.assign(static_cast<std::size_t>(s.num_users), t.get<double>());
        } else {
            s.qoe_threshold = t.get<std::vector<double>>();
        }
    }
    read(obj, "weight_bitrate", s.weight_bitrate);
    read(obj, "weight_similarity", s.weight_similarity);
    read(obj, "max_bitrate", s.max_bitrate);
    read(obj, "ref_bitrate", s.ref_bitrate);
    read(obj, "similarity_floor", s.similarity_floor);
    read(obj, "similarity_ceiling", s.similarity_ceiling);
    read(obj, "max_diffusion_step", s.max_diffusion_step);
    read(obj, "step_compute_cost", s.step_compute_cost);
    read(obj, "penalty_coeff", s.penalty_coeff);
    s.validate();
    return s;
}

TrainConfig train_from_json(const json& obj, TrainConfig base) {
    check_keys(obj, "train",
               {"total_steps", "batch_size", "lr_actor", "lr_critic", "tau", "warmup_steps", "eval_every",
                "eval_episodes", "denoise_steps", "beta_start", "beta_end", "explore_noise_start",
                "explore_noise_end", "replay_capacity", "actor_hidden", "critic_hidden"});
    read(obj, "total_steps", base.total_steps);
    read(obj, "batch_size", base.batch_size);
    read(obj, "lr_actor", base.lr_actor);
    read(obj, "lr_critic", base.lr_critic);
    read(obj, "tau", base.tau);
    read(obj, "warmup_steps", base.warmup_steps);
    read(obj, "eval_every", base.eval_every);
    read(obj, "eval_episodes", base.eval_episodes);
    read(obj, "denoise_steps", base.denoise_steps);
    read(obj, "beta_start", base.beta_start);
    read(obj, "beta_end", base.beta_end);
    read(obj, "explore_noise_start", base.explore_noise_start);
    read(obj, "explore_noise_end", base.explore_noise_end);
    read(obj, "replay_capacity", base.replay_capacity);
    read(obj, "actor_hidden", base.actor_hidden);
    read(obj, "critic_hidden", base.critic_hidden);
    return base;
}

SweepConfig sweep_from_json(const json& obj) {
    check_keys(obj, "sweep", {"user_counts", "solvers"});
    SweepConfig s;
    read(obj, "user_counts", s.user_counts);
    read(obj, "solvers", s.solvers);
    if (s.user_counts.empty()) throw ConfigError("config: sweep.user_counts must not be empty");
    for (int n : s.user_counts)
        if (n < 1) throw ConfigError("config: sweep.user_counts entries must be positive");
    for (const auto& name : s.solvers) solver_from_name(name);  // validates
    return s;
}

}  // namespace

SamplerConfig scale_sampler_to_users(const SamplerConfig& sampler, int num_users) {
    if (num_users < 1) throw ConfigError("scale_sampler_to_users: num_users must be positive");
    SamplerConfig out = sampler;
    const double factor = static_cast<double>(num_users) / static_cast<double>(sampler.num_users);
    out.num_users = num_users;
    out.bandwidth_range = {sampler.bandwidth_range.first * factor, sampler.bandwidth_range.second * factor};
    out.compute_range = {sampler.compute_range.first * factor, sampler.compute_range.second * factor};
    out.validate();
    return out;
}

ExperimentConfig config_from_json(const nlohmann::json& root) {
    check_keys(root, "config root",
               {"solver", "out_dir", "seeds", "train", "sampler", "scenario", "sweep", "oracle_r_levels",
                "checkpoint"});
    ExperimentConfig config;
    read(root, "solver", config.solver);
    solver_from_name(config.solver);
    read(root, "out_dir", config.out_dir);
    read(root, "seeds", config.seeds);
    if (config.seeds.empty()) throw ConfigError("config: seeds must not be empty");
    if (root.contains("sampler")) config.train.sampler = sampler_from_json(root.at("sampler"), config.train.sampler);
    if (root.contains("train")) config.train = train_from_json(root.at("train"), config.train);
    if (root.contains("scenario")) config.scenario = scenario_from_json(root.at("scenario"));
    if (root.contains("sweep")) config.sweep = sweep_from_json(root.at("sweep"));
    read(root, "oracle_r_levels", config.oracle_r_levels);
    if (config.oracle_r_levels < 1) throw ConfigError("config: oracle_r_levels must be positive");
    read(root, "checkpoint", config.checkpoint);
    config.train.validate();
    return config;
}

nlohmann::json config_to_json(const ExperimentConfig& config) {
    json sampler{
        {"num_users", config.train.sampler.num_users},
        {"bandwidth_range", {config.train.sampler.bandwidth_range.first, config.train.sampler.bandwidth_range.second}},
        {"compute_range", {config.train.sampler.compute_range.first, config.train.sampler.compute_range.second}},
        {"threshold_range", {config.train.sampler.threshold_range.first, config.train.sampler.threshold_range.second}},
        {"weight_bitrate", config.train.sampler.weight_bitrate},
        {"weight_similarity", config.train.sampler.weight_similarity},
        {"max_bitrate", config.train.sampler.max_bitrate},
        {"ref_bitrate", config.train.sampler.ref_bitrate},
        {"similarity_floor", config.train.sampler.similarity_floor},
        {"similarity_ceiling", config.train.sampler.similarity_ceiling},
        {"max_diffusion_step", config.train.sampler.max_diffusion_step},
        {"step_compute_cost", config.train.sampler.step_compute_cost},
        {"penalty_coeff", config.train.sampler.penalty_coeff},
    };
    json train{
        {"total_steps", config.train.total_steps},
        {"batch_size", config.train.batch_size},
        {"lr_actor", config.train.lr_actor},
        {"lr_critic", config.train.lr_critic},
        {"tau", config.train.tau},
        {"warmup_steps", config.train.warmup_steps},
        {"eval_every", config.train.eval_every},
        {"eval_episodes", config.train.eval_episodes},
        {"denoise_steps", config.train.denoise_steps},
        {"beta_start", config.train.beta_start},
        {"beta_end", config.train.beta_end},
        {"explore_noise_start", config.train.explore_noise_start},
        {"explore_noise_end", config.train.explore_noise_end},
        {"replay_capacity", config.train.replay_capacity},
        {"actor_hidden", config.train.actor_hidden},
        {"critic_hidden", config.train.critic_hidden},
    };
    json root{
        {"solver", config.solver},
        {"out_dir", config.out_dir},
        {"seeds", config.seeds},
        {"train", train},
        {"sampler", sampler},
        {"sweep", {{"user_counts", config.sweep.user_counts}, {"solvers", config.sweep.solvers}}},
        {"oracle_r_levels", config.oracle_r_levels},
    };
    if (!config.checkpoint.empty()) root["checkpoint"] = config.checkpoint;
    if (config.scenario) {
        const Scenario& s = *config.scenario;
        root["scenario"] = json{
            {"num_users", s.num_users},
            {"bandwidth_budget", s.bandwidth_budget},
            {"compute_budget", s.compute_budget},
            {"qoe_threshold", s.qoe_threshold},
            {"weight_bitrate", s.weight_bitrate},
            {"weight_similarity", s.weight_similarity},
            {"max_bitrate", s.max_bitrate},
            {"ref_bitrate", s.ref_bitrate},
            {"similarity_floor", s.similarity_floor},
            {"similarity_ceiling", s.similarity_ceiling},
            {"max_diffusion_step", s.max_diffusion_step},
            {"step_compute_cost", s.step_compute_cost},
            {"penalty_coeff", s.penalty_coeff},
        };
    }
    return root;
}

ExperimentConfig load_config_file(const std::string& path, const std::vector<std::string>& overrides) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    json root;
    try {
        in >> root;
    } catch (const json::exception& e) {
        throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
    }
    for (const auto& override_expr : overrides) {
        const auto eq = override_expr.find('=');
        if (eq == std::string::npos)
            throw ConfigError("override must look like key.path=value: " + override_expr);
        const std::string path_expr = override_expr.substr(0, eq);
        const std::string value_expr = override_expr.substr(eq + 1);
        json value;
        try {
            value = json::parse(value_expr);
        } catch (const json::exception&) {
            value = value_expr;  // plain string
        }
        json* node = &root;
        std::size_t begin = 0;
        while (true) {
            const auto dot = path_expr.find('.', begin);
            const std::string key = path_expr.substr(begin, dot == std::string::npos ? dot : dot - begin);
            if (key.empty()) throw ConfigError("override has an empty key segment: " + override_expr);
            if (dot == std::string::npos) {
                (*node)[key] = value;
                break;
            }
            node = &(*node)[key];
            begin = dot + 1;
        }
    }
    return config_from_json(root);
}

}  // namespace aigc
