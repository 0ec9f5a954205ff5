#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "aigc_alloc/baselines.hpp"
#include "aigc_alloc/config.hpp"
#include "aigc_alloc/critic.hpp"
#include "aigc_alloc/diffusion.hpp"
#include "aigc_alloc/gradcheck.hpp"
#include "aigc_alloc/scenario.hpp"

namespace py = pybind11;
using namespace aigc;

namespace {

std::vector<std::pair<long long, double>> curve_points(const LearningCurve& curve) { return curve.points; }

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Edge AIGC QoE allocation: scenario model, diffusion-policy training and baseline solvers";

    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<CapacityError>(m, "CapacityError", PyExc_RuntimeError);
    py::register_exception<InfeasibleError>(m, "InfeasibleError", PyExc_RuntimeError);

    m.attr("MIN_RESOLUTION_RATIO") = kMinResolutionRatio;
    m.attr("__version__") = kToolVersion;

    py::class_<PresetMeta>(m, "PresetMeta")
        .def(py::init<>())
        .def_readwrite("latency_budget_ms", &PresetMeta::latency_budget_ms)
        .def_readwrite("reliability_target", &PresetMeta::reliability_target);

    py::class_<Scenario>(m, "Scenario")
        .def(py::init<>())
        .def_readwrite("num_users", &Scenario::num_users)
        .def_readwrite("bandwidth_budget", &Scenario::bandwidth_budget)
        .def_readwrite("compute_budget", &Scenario::compute_budget)
        .def_readwrite("qoe_threshold", &Scenario::qoe_threshold)
        .def_readwrite("weight_bitrate", &Scenario::weight_bitrate)
        .def_readwrite("weight_similarity", &Scenario::weight_similarity)
        .def_readwrite("max_bitrate", &Scenario::max_bitrate)
        .def_readwrite("ref_bitrate", &Scenario::ref_bitrate)
        .def_readwrite("similarity_floor", &Scenario::similarity_floor)
        .def_readwrite("similarity_ceiling", &Scenario::similarity_ceiling)
        .def_readwrite("max_diffusion_step", &Scenario::max_diffusion_step)
        .def_readwrite("step_compute_cost", &Scenario::step_compute_cost)
        .def_readwrite("penalty_coeff", &Scenario::penalty_coeff)
        .def_readwrite("preset_meta", &Scenario::preset_meta)
        .def("validate", &Scenario::validate);

    py::class_<Decision>(m, "Decision")
        .def(py::init<>())
        .def(py::init([](std::vector<double> r, std::vector<int> d) {
                 return Decision{std::move(r), std::move(d)};
             }),
             py::arg("resolution_ratio"), py::arg("diffusion_step"))
        .def_readwrite("resolution_ratio", &Decision::resolution_ratio)
        .def_readwrite("diffusion_step", &Decision::diffusion_step);

    py::class_<QoEReport>(m, "QoEReport")
        .def_readonly("per_user_bitrate", &QoEReport::per_user_bitrate)
        .def_readonly("per_user_similarity", &QoEReport::per_user_similarity)
        .def_readonly("per_user_qoe", &QoEReport::per_user_qoe)
        .def_readonly("threshold_met", &QoEReport::threshold_met)
        .def_readonly("bandwidth_used", &QoEReport::bandwidth_used)
        .def_readonly("bandwidth_feasible", &QoEReport::bandwidth_feasible)
        .def_readonly("compute_used", &QoEReport::compute_used)
        .def_readonly("compute_feasible", &QoEReport::compute_feasible)
        .def_readonly("total_qoe", &QoEReport::total_qoe)
        .def_readonly("penalty", &QoEReport::penalty)
        .def_readonly("reward", &QoEReport::reward);

    py::class_<Rng>(m, "Rng")
        .def(py::init<std::uint64_t>(), py::arg("seed"))
        .def("derive", &Rng::derive, py::arg("stream"))
        .def("uniform01", &Rng::uniform01)
        .def("uniform", &Rng::uniform)
        .def("uniform_int", &Rng::uniform_int)
        .def("normal", &Rng::normal);

    py::class_<StateNormalizer>(m, "StateNormalizer")
        .def(py::init<>())
        .def(py::init([](double b, double c) { return StateNormalizer{b, c}; }), py::arg("bandwidth_norm"),
             py::arg("compute_norm"))
        .def_readwrite("bandwidth_norm", &StateNormalizer::bandwidth_norm)
        .def_readwrite("compute_norm", &StateNormalizer::compute_norm);

    py::class_<SamplerConfig>(m, "SamplerConfig")
        .def(py::init<>())
        .def_readwrite("num_users", &SamplerConfig::num_users)
        .def_readwrite("bandwidth_range", &SamplerConfig::bandwidth_range)
        .def_readwrite("compute_range", &SamplerConfig::compute_range)
        .def_readwrite("threshold_range", &SamplerConfig::threshold_range)
        .def_readwrite("weight_bitrate", &SamplerConfig::weight_bitrate)
        .def_readwrite("weight_similarity", &SamplerConfig::weight_similarity)
        .def_readwrite("max_bitrate", &SamplerConfig::max_bitrate)
        .def_readwrite("ref_bitrate", &SamplerConfig::ref_bitrate)
        .def_readwrite("similarity_floor", &SamplerConfig::similarity_floor)
        .def_readwrite("similarity_ceiling", &SamplerConfig::similarity_ceiling)
        .def_readwrite("max_diffusion_step", &SamplerConfig::max_diffusion_step)
        .def_readwrite("step_compute_cost", &SamplerConfig::step_compute_cost)
        .def_readwrite("penalty_coeff", &SamplerConfig::penalty_coeff)
        .def("normalizer", &SamplerConfig::normalizer)
        .def("validate", &SamplerConfig::validate);

    m.def("bitrate", &bitrate, py::arg("resolution_ratio"), py::arg("scenario"));
    m.def("similarity", &similarity, py::arg("diffusion_step"), py::arg("scenario"));
    m.def("user_qoe", &user_qoe, py::arg("resolution_ratio"), py::arg("diffusion_step"), py::arg("scenario"));
    m.def("evaluate", &evaluate, py::arg("scenario"), py::arg("decision"));
    m.def("project_feasible", &project_feasible, py::arg("scenario"), py::arg("decision"));
    m.def("encode_state", &encode_state, py::arg("scenario"), py::arg("norm"));
    m.def("sample_scenario", &sample_scenario, py::arg("rng"), py::arg("config"));
    m.def("default_sampler", &default_sampler, py::arg("num_users"));
    m.def("preset_scenario", &preset_scenario, py::arg("name"));

    py::class_<NoiseSchedule>(m, "NoiseSchedule")
        .def_readonly("steps", &NoiseSchedule::steps)
        .def_readonly("beta", &NoiseSchedule::beta)
        .def_readonly("alpha", &NoiseSchedule::alpha)
        .def_readonly("alpha_bar", &NoiseSchedule::alpha_bar);
    m.def("schedule_new", &schedule_new, py::arg("steps"), py::arg("beta_start"), py::arg("beta_end"));
    m.def(
        "forward_noising",
        [](const std::vector<double>& a0, int k, const std::vector<double>& eps, const NoiseSchedule& s) {
            return forward_noising(a0, k, eps, s);
        },
        py::arg("a0"), py::arg("k"), py::arg("eps"), py::arg("schedule"));
    m.def("step_embedding", &step_embedding, py::arg("k"));

    py::enum_<ChainMode>(m, "ChainMode")
        .value("STOCHASTIC", ChainMode::Stochastic)
        .value("DETERMINISTIC", ChainMode::Deterministic);

    py::class_<DiffusionActor>(m, "DiffusionActor")
        .def_readonly("num_users", &DiffusionActor::num_users)
        .def_readonly("state_dim", &DiffusionActor::state_dim)
        .def_property_readonly("schedule", [](const DiffusionActor& a) { return a.schedule; })
        .def("action_dim", &DiffusionActor::action_dim);
    m.def(
        "sample_action",
        [](const DiffusionActor& actor, const std::vector<double>& state, Rng& rng, ChainMode mode) {
            return sample_action(actor, state, rng, mode);
        },
        py::arg("actor"), py::arg("state"), py::arg("rng"), py::arg("mode"));
    m.def(
        "decode_decision",
        [](const std::vector<double>& raw, const Scenario& s) { return decode_decision(raw, s); },
        py::arg("raw"), py::arg("scenario"));
    m.def("save_actor", &save_actor_file, py::arg("path"), py::arg("actor"));
    m.def("load_actor", &load_actor_file, py::arg("path"), py::arg("num_users"), py::arg("state_dim"));

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("total_steps", &TrainConfig::total_steps)
        .def_readwrite("batch_size", &TrainConfig::batch_size)
        .def_readwrite("lr_actor", &TrainConfig::lr_actor)
        .def_readwrite("lr_critic", &TrainConfig::lr_critic)
        .def_readwrite("tau", &TrainConfig::tau)
        .def_readwrite("warmup_steps", &TrainConfig::warmup_steps)
        .def_readwrite("eval_every", &TrainConfig::eval_every)
        .def_readwrite("eval_episodes", &TrainConfig::eval_episodes)
        .def_readwrite("seed", &TrainConfig::seed)
        .def_readwrite("denoise_steps", &TrainConfig::denoise_steps)
        .def_readwrite("beta_start", &TrainConfig::beta_start)
        .def_readwrite("beta_end", &TrainConfig::beta_end)
        .def_readwrite("explore_noise_start", &TrainConfig::explore_noise_start)
        .def_readwrite("explore_noise_end", &TrainConfig::explore_noise_end)
        .def_readwrite("replay_capacity", &TrainConfig::replay_capacity)
        .def_readwrite("actor_hidden", &TrainConfig::actor_hidden)
        .def_readwrite("critic_hidden", &TrainConfig::critic_hidden)
        .def_readwrite("sampler", &TrainConfig::sampler)
        .def("validate", &TrainConfig::validate);

    py::class_<EvalResult>(m, "EvalResult")
        .def_readonly("mean_reward", &EvalResult::mean_reward)
        .def_readonly("mean_total_qoe", &EvalResult::mean_total_qoe)
        .def_readonly("reports", &EvalResult::reports);

    py::class_<TrainResult>(m, "TrainResult")
        .def_readonly("actor", &TrainResult::actor)
        .def_property_readonly("curve", [](const TrainResult& r) { return curve_points(r.curve); });
    m.def("train", &train, py::arg("config"), py::call_guard<py::gil_scoped_release>());
    m.def(
        "evaluate_policy",
        [](const DiffusionActor& actor, const std::vector<Scenario>& scenarios, const StateNormalizer& norm) {
            return evaluate_policy(actor, scenarios, norm);
        },
        py::arg("actor"), py::arg("scenarios"), py::arg("norm"), py::call_guard<py::gil_scoped_release>());
    m.def("evaluation_scenarios", &evaluation_scenarios, py::arg("config"));

    py::class_<OracleResult>(m, "OracleResult")
        .def_readonly("best", &OracleResult::best)
        .def_readonly("total_qoe", &OracleResult::total_qoe)
        .def_readonly("reward", &OracleResult::reward)
        .def_readonly("points_evaluated", &OracleResult::points_evaluated)
        .def_readonly("tie_count", &OracleResult::tie_count);
    m.def("oracle_grid_search", &oracle_grid_search, py::arg("scenario"), py::arg("r_levels") = 10,
          py::call_guard<py::gil_scoped_release>());
    m.def("tractable_r_levels", &tractable_r_levels, py::arg("scenario"), py::arg("preferred") = 10);
    m.def("greedy_allocate", &greedy_allocate, py::arg("scenario"));
    m.def("random_policy", &random_policy, py::arg("scenario"), py::arg("rng"));

    py::class_<GaussianPolicy>(m, "GaussianPolicy")
        .def_readonly("num_users", &GaussianPolicy::num_users)
        .def_readonly("state_dim", &GaussianPolicy::state_dim);
    m.def("policy_mean_action", &policy_mean_action, py::arg("policy"), py::arg("state"));

    py::class_<SacResult>(m, "SacResult")
        .def_readonly("policy", &SacResult::policy)
        .def_property_readonly("curve", [](const SacResult& r) { return curve_points(r.curve); });
    m.def("train_sac_lite", &train_sac_lite, py::arg("config"), py::call_guard<py::gil_scoped_release>());

    py::class_<PpoResult>(m, "PpoResult")
        .def_readonly("policy", &PpoResult::policy)
        .def_property_readonly("curve", [](const PpoResult& r) { return curve_points(r.curve); });
    m.def("train_ppo_lite", &train_ppo_lite, py::arg("config"), py::call_guard<py::gil_scoped_release>());

    py::class_<GradCheckEntry>(m, "GradCheckEntry")
        .def_readonly("name", &GradCheckEntry::name)
        .def_readonly("max_rel_err", &GradCheckEntry::max_rel_err)
        .def_readonly("pass_", &GradCheckEntry::pass);
    py::class_<GradCheckReport>(m, "GradCheckReport")
        .def_readonly("entries", &GradCheckReport::entries)
        .def_readonly("worst_name", &GradCheckReport::worst_name)
        .def_readonly("worst_err", &GradCheckReport::worst_err)
        .def_readonly("pass_", &GradCheckReport::pass);
    m.def("run_gradcheck", &run_gradcheck, py::arg("inject_tanh_fault") = false,
          py::call_guard<py::gil_scoped_release>());
}
