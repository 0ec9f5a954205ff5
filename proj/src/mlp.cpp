#include "aigc_alloc/mlp.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "aigc_alloc/errors.hpp"

namespace aigc::nn {

std::string activation_name(Activation a) {
    switch (a) {
        case Activation::Identity: return "identity";
        case Activation::Tanh: return "tanh";
        case Activation::Relu: return "relu";
    }
    throw ContractError("activation_name: unknown activation");
}

Activation activation_from_name(const std::string& name) {
    if (name == "identity") return Activation::Identity;
    if (name == "tanh") return Activation::Tanh;
    if (name == "relu") return Activation::Relu;
    throw ConfigError("unknown activation tag: " + name);
}

void apply_activation(Activation a, std::vector<double>& values) {
    switch (a) {
        case Activation::Identity: return;
        case Activation::Tanh:
            for (auto& v : values) v = std::tanh(v);
            return;
        case Activation::Relu:
            for (auto& v : values) v = v > 0.0 ? v : 0.0;
            return;
    }
}

std::vector<Tensor*> Mlp::param_ptrs() {
    std::vector<Tensor*> out;
    out.reserve(2 * weights.size());
    for (std::size_t i = 0; i < weights.size(); ++i) {
        out.push_back(&weights[i]);
        out.push_back(&biases[i]);
    }
    return out;
}

std::vector<const Tensor*> Mlp::param_ptrs() const {
    std::vector<const Tensor*> out;
    out.reserve(2 * weights.size());
    for (std::size_t i = 0; i < weights.size(); ++i) {
        out.push_back(&weights[i]);
        out.push_back(&biases[i]);
    }
    return out;
}

Tensor Mlp::forward(const Tensor& x) const {
    const std::size_t batch = x.rows();
    if (x.cols() != input_size()) throw ContractError("Mlp::forward: input width does not match first layer");
    std::vector<double> cur(x.data);
    std::size_t width = input_size();
    for (std::size_t layer = 0; layer < weights.size(); ++layer) {
        const Tensor& w = weights[layer];
        const Tensor& b = biases[layer];
        const std::size_t out_w = w.shape[1];
        std::vector<double> next(batch * out_w);
        for (std::size_t r = 0; r < batch; ++r) {
            double* dst = next.data() + r * out_w;
            for (std::size_t j = 0; j < out_w; ++j) dst[j] = b.data[j];
            const double* src = cur.data() + r * width;
            for (std::size_t k = 0; k < width; ++k) {
                const double xv = src[k];
                const double* wrow = w.data.data() + k * out_w;
                for (std::size_t j = 0; j < out_w; ++j) dst[j] += xv * wrow[j];
            }
        }
        apply_activation(layer + 1 == weights.size() ? output_activation : hidden_activation, next);
        cur = std::move(next);
        width = out_w;
    }
    return Tensor({batch, width}, std::move(cur));
}

std::vector<double> Mlp::forward(const std::vector<double>& x) const {
    return forward(Tensor::row(x)).data;
}

Mlp mlp_init(const std::vector<std::size_t>& sizes, Activation hidden, Activation output, Rng& rng) {
    if (sizes.size() < 2) throw ContractError("mlp_init: need at least input and output sizes");
    Mlp mlp;
    mlp.sizes = sizes;
    mlp.hidden_activation = hidden;
    mlp.output_activation = output;
    for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
        const std::size_t fan_in = sizes[i];
        const std::size_t fan_out = sizes[i + 1];
        const double bound = std::sqrt(3.0 / static_cast<double>(fan_in));
        Tensor w = Tensor::zeros({fan_in, fan_out});
        for (auto& v : w.data) v = rng.uniform(-bound, bound);
        mlp.weights.push_back(std::move(w));
        mlp.biases.push_back(Tensor::zeros({fan_out}));
    }
    return mlp;
}

void adam_step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads, AdamState& state,
               double learning_rate) {
    if (params.size() != grads.size()) throw ContractError("adam_step: parameter/gradient count mismatch");
    if (state.first_moment.empty()) {
        for (const Tensor* p : params) {
            state.first_moment.push_back(Tensor::zeros(p->shape));
            state.second_moment.push_back(Tensor::zeros(p->shape));
        }
    }
    if (state.first_moment.size() != params.size())
        throw ContractError("adam_step: state does not match parameter count");
    state.step_count += 1;
    const double b1 = AdamState::kBeta1;
    const double b2 = AdamState::kBeta2;
    const double bias1 = 1.0 - std::pow(b1, static_cast<double>(state.step_count));
    const double bias2 = 1.0 - std::pow(b2, static_cast<double>(state.step_count));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = *params[i];
        const Tensor& g = grads[i];
        if (!p.same_shape(g)) throw ContractError("adam_step: gradient shape mismatch");
        Tensor& m = state.first_moment[i];
        Tensor& v = state.second_moment[i];
        for (std::size_t k = 0; k < p.size(); ++k) {
            m.data[k] = b1 * m.data[k] + (1.0 - b1) * g.data[k];
            v.data[k] = b2 * v.data[k] + (1.0 - b2) * g.data[k] * g.data[k];
            const double m_hat = m.data[k] / bias1;
            const double v_hat = v.data[k] / bias2;
            p.data[k] -= learning_rate * m_hat / (std::sqrt(v_hat) + AdamState::kEpsilon);
        }
    }
}

namespace {

void write_array(std::ostream& out, const Tensor& t) {
    char buf[40];
    for (std::size_t i = 0; i < t.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g", t.data[i]);
        if (i) out << ' ';
        out << buf;
    }
    out << '\n';
}

}  // namespace

void save_mlp(std::ostream& out, const Mlp& mlp) {
    out << "MLPCKPT v1\n";
    for (std::size_t i = 0; i < mlp.sizes.size(); ++i) out << (i ? " " : "") << mlp.sizes[i];
    out << '\n';
    out << activation_name(mlp.hidden_activation) << ' ' << activation_name(mlp.output_activation) << '\n';
    for (std::size_t i = 0; i < mlp.weights.size(); ++i) {
        write_array(out, mlp.weights[i]);
        write_array(out, mlp.biases[i]);
    }
}

Mlp load_mlp(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != "MLPCKPT v1")
        throw ConfigError("checkpoint: missing MLPCKPT v1 header");
    if (!std::getline(in, line)) throw ConfigError("checkpoint: missing layer sizes");
    std::istringstream sizes_in(line);
    std::vector<std::size_t> sizes;
    for (std::size_t s; sizes_in >> s;) sizes.push_back(s);
    if (sizes.size() < 2) throw ConfigError("checkpoint: need at least two layer sizes");
    if (!std::getline(in, line)) throw ConfigError("checkpoint: missing activation tags");
    std::istringstream act_in(line);
    std::string hidden_tag, output_tag;
    if (!(act_in >> hidden_tag >> output_tag)) throw ConfigError("checkpoint: malformed activation line");

    Mlp mlp;
    mlp.sizes = sizes;
    mlp.hidden_activation = activation_from_name(hidden_tag);
    mlp.output_activation = activation_from_name(output_tag);
    for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
        Tensor w = Tensor::zeros({sizes[i], sizes[i + 1]});
        Tensor b = Tensor::zeros({sizes[i + 1]});
        for (Tensor* t : {&w, &b}) {
            if (!std::getline(in, line)) throw ConfigError("checkpoint: truncated parameter data");
            std::istringstream row(line);
            for (std::size_t k = 0; k < t->size(); ++k)
                if (!(row >> t->data[k])) throw ConfigError("checkpoint: parameter array too short");
        }
        mlp.weights.push_back(std::move(w));
        mlp.biases.push_back(std::move(b));
    }
    return mlp;
}

void save_mlp_file(const std::string& path, const Mlp& mlp) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open checkpoint for writing: " + path);
    save_mlp(out, mlp);
}

Mlp load_mlp_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open checkpoint: " + path);
    return load_mlp(in);
}

}  // namespace aigc::nn
