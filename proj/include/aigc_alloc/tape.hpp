#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "aigc_alloc/mlp.hpp"
#include "aigc_alloc/tensor.hpp"

namespace aigc::nn {

// Reverse-mode tape over the small op vocabulary the actor/critic losses
// need. Values are computed eagerly as nodes are recorded; backward() fills
// per-node gradients. A tape is built fresh for every optimization step.
class Tape {
public:
    using Var = std::size_t;

    // -- leaves --------------------------------------------------------
    Var constant(Tensor value);           // no gradient tracked
    Var param(const Tensor& value);       // gradient tracked

    // -- recorded ops ---------------------------------------------------
    Var affine(Var x, Var w, Var b);      // [B,n]*[n,m] + [m] -> [B,m]
    Var tanh_op(Var x);
    Var relu_op(Var x);
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);                // elementwise
    Var lincomb(double ca, Var a, double cb, Var b);  // ca*a + cb*b
    Var scale(Var a, double c);
    Var minimum(Var a, Var b);            // elementwise; ties route gradient to `a`
    Var clamp(Var a, double lo, double hi);
    Var square(Var a);
    Var exp_op(Var a);                    // input capped at 700 so the result stays finite
    Var log_op(Var a);                    // input floored at 1e-300
    Var concat_cols(std::span<const Var> parts);  // along the last dimension
    Var slice_cols(Var a, std::size_t begin, std::size_t width);  // column range
    Var sum_cols(Var a);                  // [B,m] -> [B,1]
    Var mean_all(Var a);                  // scalar mean
    Var mean_square(Var a);               // scalar mean of squares

    void backward(Var loss);              // loss must hold exactly one element

    const Tensor& value(Var v) const { return nodes_[v].value; }
    const Tensor& grad(Var v) const { return nodes_[v].grad; }
    std::size_t node_count() const { return nodes_.size(); }

    // Test fixture for the gradient-check suites: flips the sign of the tanh
    // derivative so an intentionally broken backward pass can be detected.
    void debug_flip_tanh_grad(bool flip) { flip_tanh_grad_ = flip; }

    // -- MLP helpers ------------------------------------------------------
    struct MlpVars {
        std::vector<Var> weights;
        std::vector<Var> biases;
    };
    MlpVars register_mlp(const Mlp& mlp);
    // Registers the parameters as constants: gradients still flow through the
    // net to its inputs, but the parameters themselves receive none.
    MlpVars register_mlp_frozen(const Mlp& mlp);
    Var apply_mlp(const MlpVars& vars, const Mlp& mlp, Var x);
    // Gradients in the same order as Mlp::param_ptrs(): W0, b0, W1, b1, ...
    std::vector<Tensor> mlp_grads(const MlpVars& vars) const;

private:
    enum class Op {
        Leaf,
        Affine,
        Tanh,
        Relu,
        Mul,
        Lincomb,  // also covers add/sub/scale
        Minimum,
        Clamp,
        Square,
        Exp,
        Log,
        Concat,
        SliceCols,
        SumCols,
        MeanAll,
        MeanSquare,
    };

    struct Node {
        Op op = Op::Leaf;
        std::vector<Var> inputs;
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        double c0 = 0.0, c1 = 0.0;  // op constants (lincomb coefficients, clamp bounds)
    };

    Var push(Node node);
    std::vector<Node> nodes_;
    bool flip_tanh_grad_ = false;
};

}  // namespace aigc::nn
