#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "aigc_alloc/rng.hpp"
#include "aigc_alloc/tensor.hpp"

namespace aigc::nn {

enum class Activation { Identity, Tanh, Relu };

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& name);

// Plain multilayer perceptron. Weights are [in, out] row-major so a forward
// pass is X * W + b per layer. Training-time gradients come from the Tape;
// forward() here is the fast inference path.
struct Mlp {
    std::vector<std::size_t> sizes;
    Activation hidden_activation = Activation::Tanh;
    Activation output_activation = Activation::Identity;
    std::vector<Tensor> weights;  // one [sizes[i], sizes[i+1]] matrix per layer
    std::vector<Tensor> biases;   // one [sizes[i+1]] vector per layer

    std::size_t input_size() const { return sizes.front(); }
    std::size_t output_size() const { return sizes.back(); }
    std::size_t layer_count() const { return weights.size(); }

    // Parameters in checkpoint order: W0, b0, W1, b1, ...
    std::vector<Tensor*> param_ptrs();
    std::vector<const Tensor*> param_ptrs() const;

    // Batched forward: x is [B, in] (or a flat vector treated as one row).
    Tensor forward(const Tensor& x) const;
    std::vector<double> forward(const std::vector<double>& x) const;
};

// Fan-in-scaled uniform init: W ~ U[-sqrt(3/fan_in), +sqrt(3/fan_in)] so each
// weight has variance 1/fan_in; biases start at zero.
Mlp mlp_init(const std::vector<std::size_t>& sizes, Activation hidden, Activation output, Rng& rng);

void apply_activation(Activation a, std::vector<double>& values);

// Adam with bias correction. beta/epsilon constants are fixed; moment
// accumulators are allocated lazily to match the parameter shapes.
struct AdamState {
    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEpsilon = 1e-8;
    long long step_count = 0;
    std::vector<Tensor> first_moment;
    std::vector<Tensor> second_moment;
};

void adam_step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads, AdamState& state,
               double learning_rate);

// Versioned plain-text checkpoint format:
//   MLPCKPT v1
//   <size_0> <size_1> ... <size_L>
//   <hidden activation> <output activation>
//   <W0 as decimal floats on one line>
//   <b0 ...>
//   ...
// Values are printed with 17 significant digits, so a round trip is
// bit-exact for finite doubles.
void save_mlp(std::ostream& out, const Mlp& mlp);
Mlp load_mlp(std::istream& in);
void save_mlp_file(const std::string& path, const Mlp& mlp);
Mlp load_mlp_file(const std::string& path);

}  // namespace aigc::nn
