#pragma once

#include <cstdint>
#include <vector>

#include "cmi/autodiff.hpp"
#include "cmi/rng.hpp"

namespace cmi {

/// Uniform fan-based init in +-sqrt(6 / (fan_in + fan_out)).
Matrix glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);

struct Linear {
    Parameter weight;  // in x out
    Parameter bias;    // 1 x out

    Linear() = default;
    Linear(std::size_t in, std::size_t out, Rng& rng);
    Var forward(Tape& tape, Var x);
    std::size_t in_width() const { return weight.value.rows(); }
    std::size_t out_width() const { return weight.value.cols(); }
};

/// Fully connected network with ReLU between layers (none after the last).
/// depth counts linear layers, so depth 2 is input -> hidden -> output.
class MLP {
public:
    MLP() = default;
    MLP(std::size_t in, std::size_t hidden, std::size_t out, std::size_t depth, Rng& rng);

    Var forward(Tape& tape, Var x);
    Matrix predict(const Matrix& x);

    std::vector<Parameter*> parameters();
    std::vector<Linear>& layers() { return layers_; }
    const std::vector<Linear>& layers() const { return layers_; }
    std::size_t in_width() const { return layers_.front().in_width(); }
    std::size_t out_width() const { return layers_.back().out_width(); }
    std::size_t depth() const { return layers_.size(); }

private:
    std::vector<Linear> layers_;
};

struct AdamOptions {
    double lr = 1e-4;
    double beta1 = 0.5;
    double beta2 = 0.9;
    double eps = 1e-8;
};

/// Adam with bias correction over a fixed parameter list.
class Adam {
public:
    Adam(std::vector<Parameter*> params, AdamOptions options);

    void zero_grad();
    /// One update from the gradients currently stored on the parameters.
    void step();

    std::uint64_t steps() const { return step_; }
    double lr() const { return options_.lr; }
    void set_lr(double lr) { options_.lr = lr; }
    const AdamOptions& options() const { return options_; }
    const std::vector<Matrix>& first_moments() const { return m_; }
    const std::vector<Matrix>& second_moments() const { return v_; }

private:
    std::vector<Parameter*> params_;
    AdamOptions options_;
    std::vector<Matrix> m_;
    std::vector<Matrix> v_;
    std::uint64_t step_ = 0;
};

}  // namespace cmi
