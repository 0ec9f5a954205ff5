#include "aigc_alloc/gradcheck.hpp"

#include <array>
#include <cmath>
#include <functional>

#include "aigc_alloc/critic.hpp"
#include "aigc_alloc/diffusion.hpp"
#include "aigc_alloc/mlp.hpp"
#include "aigc_alloc/tape.hpp"

namespace aigc {

namespace {

constexpr double kFdStep = 1e-5;

double rel_err(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max({1.0, std::abs(analytic), std::abs(numeric)});
}

// Compares tape gradients of `loss(mlp)` against central differences over
// every parameter of `mlp`, one report entry per parameter array.
void check_mlp_params(GradCheckReport& report, const std::string& prefix, nn::Mlp& mlp,
                      const std::function<double(const nn::Mlp&, std::vector<nn::Tensor>*)>& loss) {
    std::vector<nn::Tensor> grads;
    loss(mlp, &grads);
    auto params = mlp.param_ptrs();
    for (std::size_t p = 0; p < params.size(); ++p) {
        GradCheckEntry entry;
        entry.name = prefix + " layer " + std::to_string(p / 2) + (p % 2 == 0 ? " weights" : " biases");
        for (std::size_t k = 0; k < params[p]->size(); ++k) {
            const double original = params[p]->data[k];
            params[p]->data[k] = original + kFdStep;
            const double up = loss(mlp, nullptr);
            params[p]->data[k] = original - kFdStep;
            const double down = loss(mlp, nullptr);
            params[p]->data[k] = original;
            const double numeric = (up - down) / (2.0 * kFdStep);
            entry.max_rel_err = std::max(entry.max_rel_err, rel_err(grads[p].data[k], numeric));
        }
        entry.pass = entry.max_rel_err <= kGradCheckTolerance;
        report.entries.push_back(entry);
    }
}

void finalize(GradCheckReport& report) {
    report.pass = true;
    for (const auto& entry : report.entries) {
        report.pass = report.pass && entry.pass;
        if (entry.max_rel_err >= report.worst_err) {
            report.worst_err = entry.max_rel_err;
            report.worst_name = entry.name;
        }
    }
}

}  // namespace

GradCheckReport run_gradcheck(bool inject_tanh_fault) {
    GradCheckReport report;
    Rng rng(20240817);

    // 1) plain MLP regression losses, tanh and relu hidden layers
    for (const auto hidden : {nn::Activation::Tanh, nn::Activation::Relu}) {
        nn::Mlp mlp = nn::mlp_init({4, 8, 3}, hidden, nn::Activation::Identity, rng);
        nn::Tensor x = nn::Tensor::zeros({5, 4});
        for (auto& v : x.data) v = rng.normal();
        nn::Tensor y = nn::Tensor::zeros({5, 3});
        for (auto& v : y.data) v = rng.normal();
        const auto loss = [&, x, y](const nn::Mlp& net, std::vector<nn::Tensor>* grads) {
            nn::Tape tape;
            tape.debug_flip_tanh_grad(inject_tanh_fault);
            const auto vars = tape.register_mlp(net);
            const auto out = tape.apply_mlp(vars, net, tape.constant(x));
            const auto l = tape.mean_square(tape.sub(out, tape.constant(y)));
            if (grads != nullptr) {
                tape.backward(l);
                *grads = tape.mlp_grads(vars);
            }
            return tape.value(l).data[0];
        };
        check_mlp_params(report, hidden == nn::Activation::Tanh ? "mlp[tanh]" : "mlp[relu]", mlp, loss);
    }

    // 2) elementwise-op graph exercised by the SAC/PPO losses
    {
        nn::Mlp mlp = nn::mlp_init({3, 6, 4}, nn::Activation::Tanh, nn::Activation::Identity, rng);
        nn::Tensor x = nn::Tensor::zeros({4, 3});
        for (auto& v : x.data) v = rng.normal();
        nn::Tensor z = nn::Tensor::zeros({4, 2});
        for (auto& v : z.data) v = 0.5 * rng.normal();
        const auto loss = [&, x, z](const nn::Mlp& net, std::vector<nn::Tensor>* grads) {
            nn::Tape tape;
            tape.debug_flip_tanh_grad(inject_tanh_fault);
            const auto vars = tape.register_mlp(net);
            const auto heads = tape.apply_mlp(vars, net, tape.constant(x));
            const auto mean = tape.slice_cols(heads, 0, 2);
            const auto log_std = tape.clamp(tape.slice_cols(heads, 2, 2), -5.0, 2.0);
            const auto u = tape.add(mean, tape.mul(tape.exp_op(log_std), tape.constant(z)));
            const auto t = tape.tanh_op(u);
            const auto ones = tape.constant(nn::Tensor({4, 2}, std::vector<double>(8, 1.0)));
            const auto jac = tape.log_op(tape.lincomb(3.0, tape.sub(ones, tape.square(t)), 1e-8, ones));
            const auto terms = tape.sub(tape.lincomb(-0.5, tape.square(u), -1.0, log_std), jac);
            const auto ratio = tape.exp_op(tape.scale(tape.sum_cols(terms), 0.25));
            const auto clipped = tape.minimum(ratio, tape.clamp(ratio, 0.8, 1.2));
            const auto l = tape.mean_all(clipped);
            if (grads != nullptr) {
                tape.backward(l);
                *grads = tape.mlp_grads(vars);
            }
            return tape.value(l).data[0];
        };
        check_mlp_params(report, "elementwise-ops", mlp, loss);
    }

    // 3) critic regression loss
    {
        Rng critic_rng = rng.derive(7);
        CriticPair pair = critics_new(3, 2, {6}, 0.005, critic_rng);
        TransitionBatch batch;
        batch.states = nn::Tensor::zeros({6, 3});
        for (auto& v : batch.states.data) v = rng.normal();
        batch.actions = nn::Tensor::zeros({6, 2});
        for (auto& v : batch.actions.data) v = rng.normal();
        batch.rewards.resize(6);
        for (auto& v : batch.rewards) v = rng.normal();
        const auto loss = [&, batch](const nn::Mlp& net, std::vector<nn::Tensor>* grads) {
            CriticPair local = pair;
            local.q1 = net;
            std::vector<nn::Tensor> g1, g2;
            const double value = critic_loss_and_grads(local, batch, g1, g2);
            if (grads != nullptr) *grads = g1;
            return value;
        };
        check_mlp_params(report, "critic", pair.q1, loss);
    }

    // 4) full K=2 denoising chain through the actor parameters
    {
        Rng actor_rng = rng.derive(11);
        DiffusionActor actor = actor_new(1, 3, {6}, 2, 0.05, 0.2, actor_rng);
        Rng critic_rng = rng.derive(13);
        CriticPair critics = critics_new(3, 2, {6}, 0.005, critic_rng);
        nn::Tensor states = nn::Tensor::zeros({4, 3});
        for (auto& v : states.data) v = rng.normal();
        nn::Tensor terminal = nn::Tensor::zeros({4, 2});
        for (auto& v : terminal.data) v = rng.normal();
        const auto loss = [&, states, terminal](const nn::Mlp& net, std::vector<nn::Tensor>* grads) {
            DiffusionActor local = actor;
            local.eps_net = net;
            if (grads != nullptr && !inject_tanh_fault) {
                // analytic gradients through the production path
                return actor_loss_and_grads(local, critics.q1, critics.q2, states, terminal, *grads);
            }
            nn::Tape tape;
            tape.debug_flip_tanh_grad(inject_tanh_fault);
            const auto eps_vars = tape.register_mlp(local.eps_net);
            const auto q1_vars = tape.register_mlp_frozen(critics.q1);
            const auto q2_vars = tape.register_mlp_frozen(critics.q2);
            const auto state_var = tape.constant(states);
            const auto a0 = build_denoise_graph(tape, eps_vars, local, state_var, tape.constant(terminal));
            const std::array<nn::Tape::Var, 2> parts{state_var, a0};
            const auto q_in = tape.concat_cols(parts);
            const auto q_min = tape.minimum(tape.apply_mlp(q1_vars, critics.q1, q_in),
                                            tape.apply_mlp(q2_vars, critics.q2, q_in));
            const auto l = tape.scale(tape.mean_all(q_min), -1.0);
            if (grads != nullptr) {
                tape.backward(l);
                *grads = tape.mlp_grads(eps_vars);
            }
            return tape.value(l).data[0];
        };
        check_mlp_params(report, "denoise-chain[K=2]", actor.eps_net, loss);
    }

    finalize(report);
    return report;
}

}  // namespace aigc
