#include "aigc_alloc/tape.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "aigc_alloc/errors.hpp"

namespace aigc::nn {

namespace {

using MatMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstMatMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

ConstMatMap as_matrix(const Tensor& t) {
    return ConstMatMap(t.data.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

MatMap as_matrix(Tensor& t) {
    return MatMap(t.data.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

constexpr double kExpCap = 700.0;
constexpr double kLogFloor = 1e-300;

}  // namespace

Tape::Var Tape::push(Node node) {
    if (node.requires_grad) node.grad = Tensor::zeros(node.value.shape);
    nodes_.push_back(std::move(node));
    return nodes_.size() - 1;
}

Tape::Var Tape::constant(Tensor value) {
    Node n;
    n.value = std::move(value);
    return push(std::move(n));
}

Tape::Var Tape::param(const Tensor& value) {
    Node n;
    n.value = value;
    n.requires_grad = true;
    return push(std::move(n));
}

Tape::Var Tape::affine(Var x, Var w, Var b) {
    const Tensor& xv = nodes_[x].value;
    const Tensor& wv = nodes_[w].value;
    const Tensor& bv = nodes_[b].value;
    if (wv.shape.size() != 2) throw ContractError("affine: weight must be 2-D");
    if (xv.cols() != wv.shape[0]) throw ContractError("affine: input width does not match weight rows");
    if (bv.size() != wv.shape[1]) throw ContractError("affine: bias width does not match weight cols");
    Node n;
    n.op = Op::Affine;
    n.inputs = {x, w, b};
    n.requires_grad = nodes_[x].requires_grad || nodes_[w].requires_grad || nodes_[b].requires_grad;
    n.value = Tensor::zeros({xv.rows(), wv.shape[1]});
    as_matrix(n.value).noalias() = as_matrix(xv) * as_matrix(wv);
    for (std::size_t r = 0; r < n.value.rows(); ++r)
        for (std::size_t c = 0; c < n.value.cols(); ++c) n.value.at(r, c) += bv.data[c];
    return push(std::move(n));
}

Tape::Var Tape::tanh_op(Var x) {
    Node n;
    n.op = Op::Tanh;
    n.inputs = {x};
    n.requires_grad = nodes_[x].requires_grad;
    n.value = nodes_[x].value;
    for (auto& v : n.value.data) v = std::tanh(v);
    return push(std::move(n));
}

Tape::Var Tape::relu_op(Var x) {
    Node n;
    n.op = Op::Relu;
    n.inputs = {x};
    n.requires_grad = nodes_[x].requires_grad;
    n.value = nodes_[x].value;
    for (auto& v : n.value.data) v = v > 0.0 ? v : 0.0;
    return push(std::move(n));
}

Tape::Var Tape::add(Var a, Var b) { return lincomb(1.0, a, 1.0, b); }
Tape::Var Tape::sub(Var a, Var b) { return lincomb(1.0, a, -1.0, b); }

Tape::Var Tape::mul(Var a, Var b) {
    const Tensor& av = nodes_[a].value;
    const Tensor& bv = nodes_[b].value;
    if (!av.same_shape(bv)) throw ContractError("mul: shape mismatch");
    Node n;
    n.op = Op::Mul;
    n.inputs = {a, b};
    n.requires_grad = nodes_[a].requires_grad || nodes_[b].requires_grad;
    n.value = av;
    for (std::size_t i = 0; i < n.value.size(); ++i) n.value.data[i] *= bv.data[i];
    return push(std::move(n));
}

Tape::Var Tape::lincomb(double ca, Var a, double cb, Var b) {
    const Tensor& av = nodes_[a].value;
    const Tensor& bv = nodes_[b].value;
    if (!av.same_shape(bv)) throw ContractError("lincomb: shape mismatch");
    Node n;
    n.op = Op::Lincomb;
    n.inputs = {a, b};
    n.c0 = ca;
    n.c1 = cb;
    n.requires_grad = nodes_[a].requires_grad || nodes_[b].requires_grad;
    n.value = av;
    for (std::size_t i = 0; i < n.value.size(); ++i) n.value.data[i] = ca * av.data[i] + cb * bv.data[i];
    return push(std::move(n));
}

Tape::Var Tape::scale(Var a, double c) {
    Node n;
    n.op = Op::Lincomb;
    n.inputs = {a, a};
    n.c0 = c;
    n.c1 = 0.0;
    n.requires_grad = nodes_[a].requires_grad;
    n.value = nodes_[a].value;
    for (auto& v : n.value.data) v *= c;
    return push(std::move(n));
}

Tape::Var Tape::minimum(Var a, Var b) {
    const Tensor& av = nodes_[a].value;
    const Tensor& bv = nodes_[b].value;
    if (!av.same_shape(bv)) throw ContractError("minimum: shape mismatch");
    Node n;
    n.op = Op::Minimum;
    n.inputs = {a, b};
    n.requires_grad = nodes_[a].requires_grad || nodes_[b].requires_grad;
    n.value = av;
    for (std::size_t i = 0; i < n.value.size(); ++i) n.value.data[i] = std::min(av.data[i], bv.data[i]);
    return push(std::move(n));
}

Tape::Var Tape::clamp(Var a, double lo, double hi) {
    Node n;
    n.op = Op::Clamp;
    n.inputs = {a};
    n.c0 = lo;
    n.c1 = hi;
    n.requires_grad = nodes_[a].requires_grad;
    n.value = nodes_[a].value;
    for (auto& v : n.value.data) v = v < lo ? lo : (v > hi ? hi : v);
    return push(std::move(n));
}

Tape::Var Tape::square(Var a) {
    Node n;
    n.op = Op::Square;
    n.inputs = {a};
    n.requires_grad = nodes_[a].requires_grad;
    n.value = nodes_[a].value;
    for (auto& v : n.value.data) v *= v;
    return push(std::move(n));
}

Tape::Var Tape::exp_op(Var a) {
    Node n;
    n.op = Op::Exp;
    n.inputs = {a};
    n.requires_grad = nodes_[a].requires_grad;
    n.value = nodes_[a].value;
    for (auto& v : n.value.data) v = std::exp(std::min(v, kExpCap));
    return push(std::move(n));
}

Tape::Var Tape::log_op(Var a) {
    Node n;
    n.op = Op::Log;
    n.inputs = {a};
    n.requires_grad = nodes_[a].requires_grad;
    n.value = nodes_[a].value;
    for (auto& v : n.value.data) v = std::log(std::max(v, kLogFloor));
    return push(std::move(n));
}

Tape::Var Tape::concat_cols(std::span<const Var> parts) {
    if (parts.empty()) throw ContractError("concat_cols: no inputs");
    const std::size_t batch = nodes_[parts[0]].value.rows();
    std::size_t total = 0;
    bool needs_grad = false;
    for (Var p : parts) {
        if (nodes_[p].value.rows() != batch) throw ContractError("concat_cols: row counts differ");
        total += nodes_[p].value.cols();
        needs_grad = needs_grad || nodes_[p].requires_grad;
    }
    Node n;
    n.op = Op::Concat;
    n.inputs.assign(parts.begin(), parts.end());
    n.requires_grad = needs_grad;
    n.value = Tensor::zeros({batch, total});
    std::size_t offset = 0;
    for (Var p : parts) {
        const Tensor& pv = nodes_[p].value;
        for (std::size_t r = 0; r < batch; ++r)
            for (std::size_t c = 0; c < pv.cols(); ++c) n.value.at(r, offset + c) = pv.at(r, c);
        offset += pv.cols();
    }
    return push(std::move(n));
}

Tape::Var Tape::slice_cols(Var a, std::size_t begin, std::size_t width) {
    const Tensor& av = nodes_[a].value;
    if (begin + width > av.cols()) throw ContractError("slice_cols: range outside the input width");
    Node n;
    n.op = Op::SliceCols;
    n.inputs = {a};
    n.c0 = static_cast<double>(begin);
    n.requires_grad = nodes_[a].requires_grad;
    n.value = Tensor::zeros({av.rows(), width});
    for (std::size_t r = 0; r < av.rows(); ++r)
        for (std::size_t c = 0; c < width; ++c) n.value.at(r, c) = av.at(r, begin + c);
    return push(std::move(n));
}

Tape::Var Tape::sum_cols(Var a) {
    const Tensor& av = nodes_[a].value;
    Node n;
    n.op = Op::SumCols;
    n.inputs = {a};
    n.requires_grad = nodes_[a].requires_grad;
    n.value = Tensor::zeros({av.rows(), 1});
    for (std::size_t r = 0; r < av.rows(); ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < av.cols(); ++c) s += av.at(r, c);
        n.value.data[r] = s;
    }
    return push(std::move(n));
}

Tape::Var Tape::mean_all(Var a) {
    const Tensor& av = nodes_[a].value;
    if (av.size() == 0) throw ContractError("mean_all: empty input");
    Node n;
    n.op = Op::MeanAll;
    n.inputs = {a};
    n.requires_grad = nodes_[a].requires_grad;
    double s = 0.0;
    for (double v : av.data) s += v;
    n.value = Tensor::scalar(s / static_cast<double>(av.size()));
    return push(std::move(n));
}

Tape::Var Tape::mean_square(Var a) {
    const Tensor& av = nodes_[a].value;
    if (av.size() == 0) throw ContractError("mean_square: empty input");
    Node n;
    n.op = Op::MeanSquare;
    n.inputs = {a};
    n.requires_grad = nodes_[a].requires_grad;
    double s = 0.0;
    for (double v : av.data) s += v * v;
    n.value = Tensor::scalar(s / static_cast<double>(av.size()));
    return push(std::move(n));
}

void Tape::backward(Var loss) {
    if (nodes_[loss].value.size() != 1) throw ContractError("backward: loss must be a scalar");
    for (auto& node : nodes_)
        if (node.requires_grad)
            std::fill(node.grad.data.begin(), node.grad.data.end(), 0.0);
    if (!nodes_[loss].requires_grad) return;  // loss does not depend on any parameter
    nodes_[loss].grad.data[0] = 1.0;

    for (std::size_t idx = loss + 1; idx-- > 0;) {
        Node& node = nodes_[idx];
        if (!node.requires_grad || node.op == Op::Leaf) continue;
        const Tensor& gy = node.grad;
        switch (node.op) {
            case Op::Affine: {
                Node& xn = nodes_[node.inputs[0]];
                Node& wn = nodes_[node.inputs[1]];
                Node& bn = nodes_[node.inputs[2]];
                if (xn.requires_grad)
                    as_matrix(xn.grad).noalias() += as_matrix(gy) * as_matrix(wn.value).transpose();
                if (wn.requires_grad)
                    as_matrix(wn.grad).noalias() += as_matrix(xn.value).transpose() * as_matrix(gy);
                if (bn.requires_grad)
                    for (std::size_t r = 0; r < gy.rows(); ++r)
                        for (std::size_t c = 0; c < gy.cols(); ++c) bn.grad.data[c] += gy.at(r, c);
                break;
            }
            case Op::Tanh: {
                Node& xn = nodes_[node.inputs[0]];
                if (!xn.requires_grad) break;
                const double sign = flip_tanh_grad_ ? -1.0 : 1.0;
                for (std::size_t i = 0; i < gy.size(); ++i) {
                    const double y = node.value.data[i];
                    xn.grad.data[i] += sign * gy.data[i] * (1.0 - y * y);
                }
                break;
            }
            case Op::Relu: {
                Node& xn = nodes_[node.inputs[0]];
                if (!xn.requires_grad) break;
                // subgradient at 0 is 0
                for (std::size_t i = 0; i < gy.size(); ++i)
                    if (xn.value.data[i] > 0.0) xn.grad.data[i] += gy.data[i];
                break;
            }
            case Op::Mul: {
                Node& an = nodes_[node.inputs[0]];
                Node& bn = nodes_[node.inputs[1]];
                for (std::size_t i = 0; i < gy.size(); ++i) {
                    if (an.requires_grad) an.grad.data[i] += gy.data[i] * bn.value.data[i];
                    if (bn.requires_grad) bn.grad.data[i] += gy.data[i] * an.value.data[i];
                }
                break;
            }
            case Op::Lincomb: {
                Node& an = nodes_[node.inputs[0]];
                Node& bn = nodes_[node.inputs[1]];
                if (an.requires_grad)
                    for (std::size_t i = 0; i < gy.size(); ++i) an.grad.data[i] += node.c0 * gy.data[i];
                if (node.c1 != 0.0 && bn.requires_grad)
                    for (std::size_t i = 0; i < gy.size(); ++i) bn.grad.data[i] += node.c1 * gy.data[i];
                break;
            }
            case Op::Minimum: {
                Node& an = nodes_[node.inputs[0]];
                Node& bn = nodes_[node.inputs[1]];
                for (std::size_t i = 0; i < gy.size(); ++i) {
                    const bool left = an.value.data[i] <= bn.value.data[i];
                    if (left && an.requires_grad) an.grad.data[i] += gy.data[i];
                    if (!left && bn.requires_grad) bn.grad.data[i] += gy.data[i];
                }
                break;
            }
            case Op::Clamp: {
                Node& xn = nodes_[node.inputs[0]];
                if (!xn.requires_grad) break;
                for (std::size_t i = 0; i < gy.size(); ++i) {
                    const double x = xn.value.data[i];
                    if (x >= node.c0 && x <= node.c1) xn.grad.data[i] += gy.data[i];
                }
                break;
            }
            case Op::Square: {
                Node& xn = nodes_[node.inputs[0]];
                if (!xn.requires_grad) break;
                for (std::size_t i = 0; i < gy.size(); ++i)
                    xn.grad.data[i] += 2.0 * xn.value.data[i] * gy.data[i];
                break;
            }
            case Op::Exp: {
                Node& xn = nodes_[node.inputs[0]];
                if (!xn.requires_grad) break;
                for (std::size_t i = 0; i < gy.size(); ++i) xn.grad.data[i] += node.value.data[i] * gy.data[i];
                break;
            }
            case Op::Log: {
                Node& xn = nodes_[node.inputs[0]];
                if (!xn.requires_grad) break;
                for (std::size_t i = 0; i < gy.size(); ++i)
                    xn.grad.data[i] += gy.data[i] / std::max(xn.value.data[i], kLogFloor);
                break;
            }
            case Op::Concat: {
                std::size_t offset = 0;
                for (Var p : node.inputs) {
                    Node& pn = nodes_[p];
                    const std::size_t w = pn.value.cols();
                    if (pn.requires_grad)
                        for (std::size_t r = 0; r < gy.rows(); ++r)
                            for (std::size_t c = 0; c < w; ++c) pn.grad.at(r, c) += gy.at(r, offset + c);
                    offset += w;
                }
                break;
            }
            case Op::SliceCols: {
                Node& xn = nodes_[node.inputs[0]];
                if (!xn.requires_grad) break;
                const std::size_t begin = static_cast<std::size_t>(node.c0);
                for (std::size_t r = 0; r < gy.rows(); ++r)
                    for (std::size_t c = 0; c < gy.cols(); ++c) xn.grad.at(r, begin + c) += gy.at(r, c);
                break;
            }
            case Op::SumCols: {
                Node& xn = nodes_[node.inputs[0]];
                if (!xn.requires_grad) break;
                for (std::size_t r = 0; r < xn.value.rows(); ++r)
                    for (std::size_t c = 0; c < xn.value.cols(); ++c) xn.grad.at(r, c) += gy.data[r];
                break;
            }
            case Op::MeanAll: {
                Node& xn = nodes_[node.inputs[0]];
                if (!xn.requires_grad) break;
                const double g = gy.data[0] / static_cast<double>(xn.value.size());
                for (auto& v : xn.grad.data) v += g;
                break;
            }
            case Op::MeanSquare: {
                Node& xn = nodes_[node.inputs[0]];
                if (!xn.requires_grad) break;
                const double g = 2.0 * gy.data[0] / static_cast<double>(xn.value.size());
                for (std::size_t i = 0; i < xn.grad.size(); ++i) xn.grad.data[i] += g * xn.value.data[i];
                break;
            }
            case Op::Leaf:
                break;
        }
    }
}

Tape::MlpVars Tape::register_mlp(const Mlp& mlp) {
    MlpVars vars;
    for (std::size_t i = 0; i < mlp.weights.size(); ++i) {
        vars.weights.push_back(param(mlp.weights[i]));
        vars.biases.push_back(param(mlp.biases[i]));
    }
    return vars;
}

Tape::MlpVars Tape::register_mlp_frozen(const Mlp& mlp) {
    MlpVars vars;
    for (std::size_t i = 0; i < mlp.weights.size(); ++i) {
        vars.weights.push_back(constant(mlp.weights[i]));
        vars.biases.push_back(constant(mlp.biases[i]));
    }
    return vars;
}

Tape::Var Tape::apply_mlp(const MlpVars& vars, const Mlp& mlp, Var x) {
    Var cur = x;
    for (std::size_t layer = 0; layer < vars.weights.size(); ++layer) {
        cur = affine(cur, vars.weights[layer], vars.biases[layer]);
        const Activation act =
            layer + 1 == vars.weights.size() ? mlp.output_activation : mlp.hidden_activation;
        if (act == Activation::Tanh) cur = tanh_op(cur);
        else if (act == Activation::Relu) cur = relu_op(cur);
    }
    return cur;
}

std::vector<Tensor> Tape::mlp_grads(const MlpVars& vars) const {
    std::vector<Tensor> out;
    out.reserve(2 * vars.weights.size());
    for (std::size_t i = 0; i < vars.weights.size(); ++i) {
        out.push_back(grad(vars.weights[i]));
        out.push_back(grad(vars.biases[i]));
    }
    return out;
}

}  // namespace aigc::nn
