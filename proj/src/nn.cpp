#include "cmi/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace cmi {

Matrix glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Matrix w(fan_in, fan_out);
    for (double& v : w.data()) v = rng.uniform(-limit, limit);
    return w;
}

Linear::Linear(std::size_t in, std::size_t out, Rng& rng)
    : weight(glorot_uniform(in, out, rng)), bias(Matrix(1, out)) {}

Var Linear::forward(Tape& tape, Var x) {
    return tape.add_row(tape.matmul(x, tape.parameter(weight)), tape.parameter(bias));
}

MLP::MLP(std::size_t in, std::size_t hidden, std::size_t out, std::size_t depth, Rng& rng) {
    if (depth == 0) throw std::invalid_argument("MLP: depth must be positive");
    std::size_t width = in;
    for (std::size_t l = 0; l + 1 < depth; ++l) {
        layers_.emplace_back(width, hidden, rng);
        width = hidden;
    }
    layers_.emplace_back(width, out, rng);
}

Var MLP::forward(Tape& tape, Var x) {
    if (tape.value(x).cols() != in_width())
        throw DimensionError("MLP: input width " + std::to_string(tape.value(x).cols()) +
                             " does not match " + std::to_string(in_width()));
    Var h = x;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        h = layers_[l].forward(tape, h);
        if (l + 1 < layers_.size()) h = tape.relu(h);
    }
    return h;
}

Matrix MLP::predict(const Matrix& x) {
    Tape tape;
    return tape.value(forward(tape, tape.constant(x)));
}

std::vector<Parameter*> MLP::parameters() {
    std::vector<Parameter*> out;
    for (auto& layer : layers_) {
        out.push_back(&layer.weight);
        out.push_back(&layer.bias);
    }
    return out;
}

Adam::Adam(std::vector<Parameter*> params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
    for (Parameter* p : params_) {
        m_.emplace_back(p->value.rows(), p->value.cols());
        v_.emplace_back(p->value.rows(), p->value.cols());
        if (!p->grad.same_shape(p->value)) p->zero_grad();
    }
}

void Adam::zero_grad() {
    for (Parameter* p : params_) p->grad.fill(0.0);
}

void Adam::step() {
    ++step_;
    const double t = static_cast<double>(step_);
    const double c1 = 1.0 - std::pow(options_.beta1, t);
    const double c2 = 1.0 - std::pow(options_.beta2, t);
    for (std::size_t k = 0; k < params_.size(); ++k) {
        auto& w = params_[k]->value.data();
        const auto& g = params_[k]->grad.data();
        auto& m = m_[k].data();
        auto& v = v_[k].data();
        for (std::size_t i = 0; i < w.size(); ++i) {
            m[i] = options_.beta1 * m[i] + (1.0 - options_.beta1) * g[i];
            v[i] = options_.beta2 * v[i] + (1.0 - options_.beta2) * g[i] * g[i];
            const double mhat = m[i] / c1;
            const double vhat = v[i] / c2;
            w[i] -= options_.lr * mhat / (std::sqrt(vhat) + options_.eps);
        }
    }
}

}  // namespace cmi
