#include "cmi/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "cmi/objectives.hpp"
#include "cmi/rng.hpp"

namespace cmi {

double relative_error(double analytic, double numeric, double floor) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
    return std::abs(analytic - numeric) / denom;
}

double check_input_gradients(const ScalarOfInputs& f, std::vector<Matrix> inputs, double h) {
    auto evaluate = [&](const std::vector<Matrix>& xs, bool with_grad, std::vector<Matrix>* grads) {
        Tape tape;
        std::vector<Var> vars;
        for (const auto& x : xs) vars.push_back(tape.variable(x));
        Var out = f(tape, vars);
        if (with_grad) {
            tape.backward(out);
            for (Var v : vars) grads->push_back(tape.grad(v));
        }
        return tape.scalar(out);
    };
    std::vector<Matrix> analytic;
    evaluate(inputs, true, &analytic);
    double worst = 0.0;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        for (std::size_t i = 0; i < inputs[k].size(); ++i) {
            const double orig = inputs[k][i];
            inputs[k][i] = orig + h;
            const double up = evaluate(inputs, false, nullptr);
            inputs[k][i] = orig - h;
            const double down = evaluate(inputs, false, nullptr);
            inputs[k][i] = orig;
            worst = std::max(worst, relative_error(analytic[k][i], (up - down) / (2.0 * h)));
        }
    }
    return worst;
}

double check_parameter_gradients(const ScalarOfParams& f, const std::vector<Parameter*>& params, double h) {
    for (Parameter* p : params) p->zero_grad();
    {
        Tape tape;
        tape.backward(f(tape));
    }
    std::vector<Matrix> analytic;
    for (Parameter* p : params) analytic.push_back(p->grad);
    auto evaluate = [&] {
        Tape tape;
        return tape.scalar(f(tape));
    };
    double worst = 0.0;
    for (std::size_t k = 0; k < params.size(); ++k) {
        Matrix& w = params[k]->value;
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double orig = w[i];
            w[i] = orig + h;
            const double up = evaluate();
            w[i] = orig - h;
            const double down = evaluate();
            w[i] = orig;
            worst = std::max(worst, relative_error(analytic[k][i], (up - down) / (2.0 * h)));
        }
    }
    return worst;
}

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Matrix m(r, c);
    for (double& v : m.data()) v = rng.uniform(lo, hi);
    return m;
}

// Entries bounded away from zero so ReLU kinks and tiny norms stay outside +-h.
Matrix away_from_zero(std::size_t r, std::size_t c, Rng& rng) {
    Matrix m(r, c);
    for (double& v : m.data()) {
        const double mag = rng.uniform(0.2, 1.0);
        v = rng.uniform() < 0.5 ? -mag : mag;
    }
    return m;
}

// sum(out * W) for a fixed random weighting W, so every output entry matters.
Var weighted_sum(Tape& tape, Var out, Rng& rng) {
    const Matrix& v = tape.value(out);
    return tape.sum(tape.mul(out, tape.constant(random_matrix(v.rows(), v.cols(), rng))));
}

// Zero biases plus an all-dead hidden layer give exact zero rows, where cosine
// is not differentiable; random biases keep the tiny instances away from that.
Critic jittered(Critic c, Rng& rng) {
    for (Parameter* p : c.parameters())
        if (p->value.rows() == 1)
            for (double& v : p->value.data()) v += rng.uniform(-0.5, 0.5);
    return c;
}

}  // namespace

std::vector<GradCheckResult> run_gradcheck_suite(std::uint64_t seed) {
    std::vector<GradCheckResult> results;
    Rng data = Rng::stream(seed, "gradcheck-data");

    auto op_case = [&](const std::string& name, std::vector<Matrix> inputs,
                       std::function<Var(Tape&, const std::vector<Var>&)> body) {
        const std::uint64_t weight_seed = data.next();
        ScalarOfInputs f = [&, weight_seed](Tape& t, const std::vector<Var>& v) {
            Rng w(weight_seed);
            return weighted_sum(t, body(t, v), w);
        };
        results.push_back({name, check_input_gradients(f, std::move(inputs))});
    };

    op_case("matmul", {random_matrix(3, 4, data), random_matrix(4, 2, data)},
            [](Tape& t, const std::vector<Var>& v) { return t.matmul(v[0], v[1]); });
    op_case("transpose", {random_matrix(3, 2, data)},
            [](Tape& t, const std::vector<Var>& v) { return t.transpose(v[0]); });
    op_case("add", {random_matrix(3, 3, data), random_matrix(3, 3, data)},
            [](Tape& t, const std::vector<Var>& v) { return t.add(v[0], v[1]); });
    op_case("sub", {random_matrix(3, 3, data), random_matrix(3, 3, data)},
            [](Tape& t, const std::vector<Var>& v) { return t.sub(v[0], v[1]); });
    op_case("mul", {random_matrix(3, 3, data), random_matrix(3, 3, data)},
            [](Tape& t, const std::vector<Var>& v) { return t.mul(v[0], v[1]); });
    op_case("add_row", {random_matrix(3, 4, data), random_matrix(1, 4, data)},
            [](Tape& t, const std::vector<Var>& v) { return t.add_row(v[0], v[1]); });
    op_case("relu", {away_from_zero(3, 4, data)},
            [](Tape& t, const std::vector<Var>& v) { return t.relu(v[0]); });
    op_case("exp", {random_matrix(3, 3, data)},
            [](Tape& t, const std::vector<Var>& v) { return t.exp(v[0]); });
    op_case("log", {random_matrix(3, 3, data, 0.5, 2.0)},
            [](Tape& t, const std::vector<Var>& v) { return t.log(v[0]); });
    op_case("scale", {random_matrix(2, 3, data)},
            [](Tape& t, const std::vector<Var>& v) { return t.scale(v[0], -2.5); });
    op_case("add_scalar", {random_matrix(2, 3, data)},
            [](Tape& t, const std::vector<Var>& v) { return t.add_scalar(v[0], 0.75); });
    op_case("row_logsumexp", {random_matrix(3, 5, data, -3.0, 3.0)},
            [](Tape& t, const std::vector<Var>& v) { return t.row_logsumexp(v[0]); });
    op_case("diag", {random_matrix(4, 4, data)},
            [](Tape& t, const std::vector<Var>& v) { return t.diag(v[0]); });
    op_case("sum", {random_matrix(3, 2, data)},
            [](Tape& t, const std::vector<Var>& v) { return t.sum(v[0]); });
    op_case("mean", {random_matrix(3, 2, data)},
            [](Tape& t, const std::vector<Var>& v) { return t.mean(v[0]); });
    op_case("concat_cols", {random_matrix(3, 2, data), random_matrix(3, 3, data)},
            [](Tape& t, const std::vector<Var>& v) { return t.concat_cols(v[0], v[1]); });
    op_case("gather_rows", {random_matrix(3, 2, data)},
            [](Tape& t, const std::vector<Var>& v) { return t.gather_rows(v[0], {2, 0, 2, 1}); });
    op_case("normalize_rows", {away_from_zero(3, 4, data)},
            [](Tape& t, const std::vector<Var>& v) { return t.normalize_rows(v[0]); });
    op_case("cosine_rows", {away_from_zero(3, 4, data), away_from_zero(4, 4, data)},
            [](Tape& t, const std::vector<Var>& v) { return t.cosine_rows(v[0], v[1], 0.5); });
    op_case("pair_rows_dot", {random_matrix(2, 3, data), random_matrix(6, 3, data)},
            [](Tape& t, const std::vector<Var>& v) { return t.pair_rows_dot(v[0], v[1]); });

    // Objectives: n = 3, widths <= 4, gradients with respect to critic parameters.
    Rng init = Rng::stream(seed, "gradcheck-init");
    CriticOptions opts;
    opts.hidden = 4;
    opts.out = 3;
    opts.tau = 0.5;

    auto batch_with_z = [&](bool shared_z) {
        TripleBatch b{random_matrix(3, 2, data), random_matrix(3, 2, data), std::nullopt};
        Matrix z = random_matrix(3, 2, data);
        if (shared_z)
            for (std::size_t r = 1; r < 3; ++r)
                for (std::size_t c = 0; c < 2; ++c) z(r, c) = z(0, c);
        b.zs = std::move(z);
        return b;
    };

    {
        Critic critic = jittered(Critic::separable(2, 2, opts, init), init);
        TripleBatch b = batch_with_z(false);
        results.push_back({"infonce(separable, cosine)",
                           check_parameter_gradients([&](Tape& t) { return infonce_value(t, b, critic); },
                                                     critic.parameters())});
    }
    {
        CriticOptions dot = opts;
        dot.similarity = Similarity::dot;
        Critic critic = jittered(Critic::separable(2, 2, dot, init), init);
        TripleBatch b = batch_with_z(false);
        results.push_back({"infonce(separable, dot)",
                           check_parameter_gradients([&](Tape& t) { return infonce_value(t, b, critic); },
                                                     critic.parameters())});
    }
    {
        Critic critic = jittered(Critic::z_augmented(2, 2, 2, opts, init), init);
        std::vector<TripleBatch> bs = {batch_with_z(true), batch_with_z(true)};
        results.push_back({"c_infonce(z_augmented, shared z)",
                           check_parameter_gradients([&](Tape& t) { return c_infonce_value(t, bs, critic); },
                                                     critic.parameters())});
    }
    {
        Critic critic = jittered(Critic::z_augmented(2, 2, 2, opts, init), init);
        std::vector<TripleBatch> bs = {batch_with_z(false)};
        results.push_back({"c_infonce(z_augmented, per-row z)",
                           check_parameter_gradients([&](Tape& t) { return c_infonce_value(t, bs, critic); },
                                                     critic.parameters())});
    }
    {
        Critic critic = jittered(Critic::bilinear_z(2, 2, 2, opts, init), init);
        std::vector<TripleBatch> bs = {batch_with_z(false), batch_with_z(false)};
        results.push_back({"c_infonce(bilinear_z)",
                           check_parameter_gradients([&](Tape& t) { return c_infonce_value(t, bs, critic); },
                                                     critic.parameters())});
    }
    {
        Critic critic = jittered(Critic::separable(2, 2, opts, init), init);
        std::vector<TripleBatch> bs = {batch_with_z(true), batch_with_z(true)};
        results.push_back({"weac_infonce(separable)",
                           check_parameter_gradients([&](Tape& t) { return weac_infonce_value(t, bs, critic); },
                                                     critic.parameters())});
    }
    return results;
}

}  // namespace cmi
