#pragma once

#include <span>
#include <string>
#include <vector>

#include "aigc_alloc/mlp.hpp"
#include "aigc_alloc/rng.hpp"
#include "aigc_alloc/scenario.hpp"
#include "aigc_alloc/tape.hpp"

namespace aigc {

// Raw policy actions are clamped to this box before decoding.
inline constexpr double kRawActionBound = 3.0;

// Longest differentiable denoising chain the actor loss will unroll.
inline constexpr int kMaxDenoiseSteps = 64;

// DDPM-style schedule for the policy's internal denoising chain. `steps` is
// the chain length K; the service-side diffusion step decided per user is a
// separate quantity and lives in Decision.
struct NoiseSchedule {
    int steps = 0;
    double beta_start = 0.0;
    double beta_end = 0.0;
    std::vector<double> beta;       // beta_1..beta_K, linearly spaced
    std::vector<double> alpha;      // 1 - beta_k
    std::vector<double> alpha_bar;  // running product of alpha
};

NoiseSchedule schedule_new(int steps, double beta_start, double beta_end);

// Closed-form forward noising: sqrt(abar_k) * a0 + sqrt(1 - abar_k) * eps.
std::vector<double> forward_noising(std::span<const double> a0, int k, std::span<const double> eps,
                                    const NoiseSchedule& schedule);

// Sinusoidal embedding of the chain step index, dimension 16.
inline constexpr int kStepEmbedDim = 16;
std::vector<double> step_embedding(int k);

enum class ChainMode { Stochastic, Deterministic };

// Conditional diffusion actor: the noise-prediction MLP consumes
// state | raw action | step embedding and predicts noise of dimension 2N.
struct DiffusionActor {
    nn::Mlp eps_net;
    NoiseSchedule schedule;
    int num_users = 0;
    int state_dim = 0;

    int action_dim() const { return 2 * num_users; }
};

DiffusionActor actor_new(int num_users, int state_dim, const std::vector<std::size_t>& hidden, int denoise_steps,
                         double beta_start, double beta_end, Rng& rng);

// Runs the reverse chain from a given terminal noise vector. In stochastic
// mode each step adds sqrt(beta_k) * z with z drawn from `rng`; deterministic
// mode is a pure function of (parameters, state, a_K). The result is clamped
// to [-kRawActionBound, kRawActionBound].
std::vector<double> denoise(const DiffusionActor& actor, std::span<const double> state,
                            std::span<const double> terminal_noise, ChainMode mode, Rng* rng);

// Draws a_K from the standard Gaussian and runs the reverse chain.
std::vector<double> sample_action(const DiffusionActor& actor, std::span<const double> state, Rng& rng,
                                  ChainMode mode);

// Maps a raw action to an in-bounds Decision: tanh squashing onto
// [r_min, 1] for ratios and {1..T_max} (round half up) for steps. Callers
// that must emit feasible allocations apply project_feasible afterwards.
Decision decode_decision(std::span<const double> raw, const Scenario& scenario);

// Differentiable deterministic reverse chain for a batch of states
// ([B, state_dim]) and terminal noise ([B, 2N]); returns the a_0 variable.
nn::Tape::Var build_denoise_graph(nn::Tape& tape, const nn::Tape::MlpVars& eps_vars, const DiffusionActor& actor,
                                  nn::Tape::Var state_batch, nn::Tape::Var terminal_noise_batch);

// Loss = -mean_batch min(Q1(s, a0), Q2(s, a0)) with gradients through every
// denoising step. Critic parameters receive no update from this pass.
// Returns the loss and fills eps-net gradients in Mlp::param_ptrs() order.
double actor_loss_and_grads(const DiffusionActor& actor, const nn::Mlp& q1, const nn::Mlp& q2,
                            const nn::Tensor& state_batch, const nn::Tensor& terminal_noise_batch,
                            std::vector<nn::Tensor>& eps_grads);

// Actor checkpoint: one schedule header line, then the MLPCKPT v1 payload.
void save_actor_file(const std::string& path, const DiffusionActor& actor);
DiffusionActor load_actor_file(const std::string& path, int num_users, int state_dim);

}  // namespace aigc
