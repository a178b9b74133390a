#include "cmi/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "cmi/kernels.hpp"

namespace cmi {

const char* op_name(OpKind kind) {
    switch (kind) {
        case OpKind::constant: return "constant";
        case OpKind::variable: return "variable";
        case OpKind::parameter: return "parameter";
        case OpKind::matmul: return "matmul";
        case OpKind::transpose: return "transpose";
        case OpKind::add: return "add";
        case OpKind::sub: return "sub";
        case OpKind::mul: return "mul";
        case OpKind::add_row: return "add_row";
        case OpKind::relu: return "relu";
        case OpKind::exp: return "exp";
        case OpKind::log: return "log";
        case OpKind::scale: return "scale";
        case OpKind::add_scalar: return "add_scalar";
        case OpKind::row_logsumexp: return "row_logsumexp";
        case OpKind::diag: return "diag";
        case OpKind::sum: return "sum";
        case OpKind::mean: return "mean";
        case OpKind::concat_cols: return "concat_cols";
        case OpKind::gather_rows: return "gather_rows";
        case OpKind::normalize_rows: return "normalize_rows";
        case OpKind::cosine_rows: return "cosine_rows";
        case OpKind::pair_rows_dot: return "pair_rows_dot";
    }
    return "unknown";
}

namespace {

void add_into(Matrix& dst, const Matrix& src) {
    auto& d = dst.data();
    const auto& s = src.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

// Backward through row normalisation: dx_i = (g_i - (g_i . u_i) u_i) / r_i.
Matrix normalize_backward(const Matrix& g, const Matrix& unit, const std::vector<double>& norms) {
    Matrix out(g.rows(), g.cols());
    for (std::size_t r = 0; r < g.rows(); ++r) {
        double proj = 0.0;
        for (std::size_t c = 0; c < g.cols(); ++c) proj += g(r, c) * unit(r, c);
        for (std::size_t c = 0; c < g.cols(); ++c)
            out(r, c) = (g(r, c) - proj * unit(r, c)) / norms[r];
    }
    return out;
}

}  // namespace

const Tape::Node& Tape::node(Var v) const {
    if (v.id >= nodes_.size()) throw std::out_of_range("Tape: invalid Var");
    return nodes_[v.id];
}

Var Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return Var{nodes_.size() - 1};
}

Var Tape::unary(OpKind kind, Var a, Matrix value) {
    Node n;
    n.kind = kind;
    n.parents = {a.id, Var::npos};
    n.value = std::move(value);
    n.needs_grad = node(a).needs_grad;
    return push(std::move(n));
}

Var Tape::binary(OpKind kind, Var a, Var b, Matrix value) {
    Node n;
    n.kind = kind;
    n.parents = {a.id, b.id};
    n.value = std::move(value);
    n.needs_grad = node(a).needs_grad || node(b).needs_grad;
    return push(std::move(n));
}

Var Tape::constant(Matrix value) {
    Node n;
    n.kind = OpKind::constant;
    n.value = std::move(value);
    return push(std::move(n));
}

Var Tape::variable(Matrix value) {
    Node n;
    n.kind = OpKind::variable;
    n.value = std::move(value);
    n.needs_grad = true;
    return push(std::move(n));
}

Var Tape::parameter(Parameter& p) {
    Node n;
    n.kind = OpKind::parameter;
    n.value = p.value;
    n.param = &p;
    n.needs_grad = true;
    if (!p.grad.same_shape(p.value)) p.zero_grad();
    return push(std::move(n));
}

Var Tape::matmul(Var a, Var b) {
    return binary(OpKind::matmul, a, b, kernels::matmul(value(a), value(b)));
}

Var Tape::transpose(Var a) { return unary(OpKind::transpose, a, value(a).transposed()); }

Var Tape::add(Var a, Var b) {
    require_same_shape(value(a), value(b), "add");
    Matrix out = value(a);
    add_into(out, value(b));
    return binary(OpKind::add, a, b, std::move(out));
}

Var Tape::sub(Var a, Var b) {
    require_same_shape(value(a), value(b), "sub");
    Matrix out = value(a);
    const auto& bv = value(b).data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
    return binary(OpKind::sub, a, b, std::move(out));
}

Var Tape::mul(Var a, Var b) {
    require_same_shape(value(a), value(b), "mul");
    Matrix out = value(a);
    const auto& bv = value(b).data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
    return binary(OpKind::mul, a, b, std::move(out));
}

Var Tape::add_row(Var a, Var row) {
    const Matrix& av = value(a);
    const Matrix& rv = value(row);
    if (rv.rows() != 1 || rv.cols() != av.cols()) throw DimensionError("add_row: bias shape mismatch");
    Matrix out = av;
    for (std::size_t r = 0; r < out.rows(); ++r)
        for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += rv(0, c);
    return binary(OpKind::add_row, a, row, std::move(out));
}

Var Tape::relu(Var a) {
    Matrix out = value(a);
    for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
    return unary(OpKind::relu, a, std::move(out));
}

Var Tape::exp(Var a) {
    Matrix out = value(a);
    for (double& v : out.data()) v = std::exp(v);
    return unary(OpKind::exp, a, std::move(out));
}

Var Tape::log(Var a) {
    Matrix out = value(a);
    for (double& v : out.data()) {
        if (!(v > 0.0)) throw DomainError("log: non-positive operand");
        v = std::log(v);
    }
    return unary(OpKind::log, a, std::move(out));
}

Var Tape::scale(Var a, double factor) {
    Matrix out = value(a);
    for (double& v : out.data()) v *= factor;
    Var r = unary(OpKind::scale, a, std::move(out));
    nodes_[r.id].scalar = factor;
    return r;
}

Var Tape::add_scalar(Var a, double shift) {
    Matrix out = value(a);
    for (double& v : out.data()) v += shift;
    Var r = unary(OpKind::add_scalar, a, std::move(out));
    nodes_[r.id].scalar = shift;
    return r;
}

Var Tape::row_logsumexp(Var a) {
    return unary(OpKind::row_logsumexp, a, kernels::row_logsumexp(value(a)));
}

Var Tape::diag(Var a) {
    const Matrix& av = value(a);
    if (av.rows() != av.cols()) throw DimensionError("diag: matrix is not square");
    Matrix out(av.rows(), 1);
    for (std::size_t i = 0; i < av.rows(); ++i) out(i, 0) = av(i, i);
    return unary(OpKind::diag, a, std::move(out));
}

Var Tape::sum(Var a) {
    double s = 0.0;
    for (double v : value(a).data()) s += v;
    return unary(OpKind::sum, a, Matrix(1, 1, s));
}

Var Tape::mean(Var a) {
    const Matrix& av = value(a);
    if (av.empty()) throw DimensionError("mean: empty input");
    double s = 0.0;
    for (double v : av.data()) s += v;
    return unary(OpKind::mean, a, Matrix(1, 1, s / static_cast<double>(av.size())));
}

Var Tape::concat_cols(Var a, Var b) {
    return binary(OpKind::concat_cols, a, b, hconcat(value(a), value(b)));
}

Var Tape::gather_rows(Var a, std::vector<std::size_t> indices) {
    Matrix out = cmi::gather_rows(value(a), indices);
    Var r = unary(OpKind::gather_rows, a, std::move(out));
    nodes_[r.id].index = std::move(indices);
    return r;
}

Matrix Tape::normalize(const Matrix& m, std::vector<double>& norms) {
    norms.assign(m.rows(), 0.0);
    Matrix unit(m.rows(), m.cols());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        double s = 0.0;
        for (double v : m.row_span(r)) s += v * v;
        double n = std::sqrt(s);
        if (n < kNormFloor) {
            ++degenerate_rows_;
            n = kNormFloor;
        }
        norms[r] = n;
        for (std::size_t c = 0; c < m.cols(); ++c) unit(r, c) = m(r, c) / n;
    }
    return unit;
}

Var Tape::normalize_rows(Var a) {
    std::vector<double> norms;
    Matrix unit = normalize(value(a), norms);
    Var r = unary(OpKind::normalize_rows, a, unit);
    nodes_[r.id].aux = std::move(unit);
    nodes_[r.id].norms = std::move(norms);
    return r;
}

Var Tape::cosine_rows(Var a, Var b, double tau) {
    if (!(tau > 0.0)) throw DomainError("cosine_rows: tau must be positive");
    if (value(a).cols() != value(b).cols()) throw DimensionError("cosine_rows: width mismatch");
    std::vector<double> na, nb;
    Matrix ua = normalize(value(a), na);
    Matrix ub = normalize(value(b), nb);
    Matrix s = kernels::matmul_nt(ua, ub);
    for (double& v : s.data()) v = std::clamp(v, -1.0, 1.0) / tau;
    Var r = binary(OpKind::cosine_rows, a, b, std::move(s));
    Node& n = nodes_[r.id];
    n.scalar = tau;
    n.aux = std::move(ua);
    n.aux2 = std::move(ub);
    n.norms = std::move(na);
    n.norms2 = std::move(nb);
    return r;
}

Var Tape::pair_rows_dot(Var a, Var b) {
    const Matrix& av = value(a);
    const Matrix& bv = value(b);
    if (av.cols() != bv.cols() || av.rows() == 0 || bv.rows() % av.rows() != 0)
        throw DimensionError("pair_rows_dot: shape mismatch");
    const std::size_t n = av.rows();
    const std::size_t m = bv.rows() / n;
    Matrix out(n, m);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < av.cols(); ++k) s += av(i, k) * bv(i * m + j, k);
            out(i, j) = s;
        }
    return binary(OpKind::pair_rows_dot, a, b, std::move(out));
}

double Tape::scalar(Var v) const {
    const Matrix& m = value(v);
    if (m.rows() != 1 || m.cols() != 1) throw DimensionError("Tape::scalar: value is not 1x1");
    return m(0, 0);
}

Matrix Tape::grad(Var v) const {
    const Node& n = node(v);
    if (n.grad.empty()) return Matrix(n.value.rows(), n.value.cols());
    return n.grad;
}

void Tape::accumulate(std::size_t id, const Matrix& g) {
    if (id == Var::npos) return;
    Node& n = nodes_[id];
    if (!n.needs_grad) return;
    if (n.grad.empty()) {
        n.grad = g;
    } else {
        add_into(n.grad, g);
    }
}

void Tape::backward(Var root) {
    const Node& rn = node(root);
    if (rn.value.rows() != 1 || rn.value.cols() != 1) throw DimensionError("backward: root must be 1x1");
    for (Node& n : nodes_) n.grad = Matrix();
    nodes_[root.id].grad = Matrix(1, 1, 1.0);

    for (std::size_t id = root.id + 1; id-- > 0;) {
        Node& n = nodes_[id];
        if (n.grad.empty() || !n.needs_grad) continue;
        const Matrix g = n.grad;
        const auto [pa, pb] = n.parents;
        switch (n.kind) {
            case OpKind::constant:
            case OpKind::variable:
                break;
            case OpKind::parameter:
                add_into(n.param->grad, g);
                break;
            case OpKind::matmul:
                if (nodes_[pa].needs_grad) accumulate(pa, kernels::matmul_nt(g, nodes_[pb].value));
                if (nodes_[pb].needs_grad) accumulate(pb, kernels::matmul_tn(nodes_[pa].value, g));
                break;
            case OpKind::transpose:
                accumulate(pa, g.transposed());
                break;
            case OpKind::add:
                accumulate(pa, g);
                accumulate(pb, g);
                break;
            case OpKind::sub: {
                accumulate(pa, g);
                Matrix neg = g;
                for (double& v : neg.data()) v = -v;
                accumulate(pb, neg);
                break;
            }
            case OpKind::mul: {
                if (nodes_[pa].needs_grad) {
                    Matrix ga = g;
                    const auto& bv = nodes_[pb].value.data();
                    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] *= bv[i];
                    accumulate(pa, ga);
                }
                if (nodes_[pb].needs_grad) {
                    Matrix gb = g;
                    const auto& av = nodes_[pa].value.data();
                    for (std::size_t i = 0; i < gb.size(); ++i) gb[i] *= av[i];
                    accumulate(pb, gb);
                }
                break;
            }
            case OpKind::add_row: {
                accumulate(pa, g);
                Matrix gr(1, g.cols());
                for (std::size_t r = 0; r < g.rows(); ++r)
                    for (std::size_t c = 0; c < g.cols(); ++c) gr(0, c) += g(r, c);
                accumulate(pb, gr);
                break;
            }
            case OpKind::relu: {
                Matrix ga = g;
                const auto& in = nodes_[pa].value.data();
                for (std::size_t i = 0; i < ga.size(); ++i)
                    if (!(in[i] > 0.0)) ga[i] = 0.0;
                accumulate(pa, ga);
                break;
            }
            case OpKind::exp: {
                Matrix ga = g;
                for (std::size_t i = 0; i < ga.size(); ++i) ga[i] *= n.value[i];
                accumulate(pa, ga);
                break;
            }
            case OpKind::log: {
                Matrix ga = g;
                const auto& in = nodes_[pa].value.data();
                for (std::size_t i = 0; i < ga.size(); ++i) ga[i] /= in[i];
                accumulate(pa, ga);
                break;
            }
            case OpKind::scale: {
                Matrix ga = g;
                for (double& v : ga.data()) v *= n.scalar;
                accumulate(pa, ga);
                break;
            }
            case OpKind::add_scalar:
                accumulate(pa, g);
                break;
            case OpKind::row_logsumexp: {
                const Matrix& in = nodes_[pa].value;
                Matrix ga(in.rows(), in.cols());
                for (std::size_t r = 0; r < in.rows(); ++r)
                    for (std::size_t c = 0; c < in.cols(); ++c)
                        ga(r, c) = g(r, 0) * std::exp(in(r, c) - n.value(r, 0));
                accumulate(pa, ga);
                break;
            }
            case OpKind::diag: {
                const Matrix& in = nodes_[pa].value;
                Matrix ga(in.rows(), in.cols());
                for (std::size_t i = 0; i < in.rows(); ++i) ga(i, i) = g(i, 0);
                accumulate(pa, ga);
                break;
            }
            case OpKind::sum: {
                const Matrix& in = nodes_[pa].value;
                accumulate(pa, Matrix(in.rows(), in.cols(), g(0, 0)));
                break;
            }
            case OpKind::mean: {
                const Matrix& in = nodes_[pa].value;
                accumulate(pa, Matrix(in.rows(), in.cols(), g(0, 0) / static_cast<double>(in.size())));
                break;
            }
            case OpKind::concat_cols: {
                const std::size_t ca = nodes_[pa].value.cols();
                const std::size_t cb = nodes_[pb].value.cols();
                Matrix ga(g.rows(), ca), gb(g.rows(), cb);
                for (std::size_t r = 0; r < g.rows(); ++r) {
                    for (std::size_t c = 0; c < ca; ++c) ga(r, c) = g(r, c);
                    for (std::size_t c = 0; c < cb; ++c) gb(r, c) = g(r, ca + c);
                }
                accumulate(pa, ga);
                accumulate(pb, gb);
                break;
            }
            case OpKind::gather_rows: {
                const Matrix& in = nodes_[pa].value;
                Matrix ga(in.rows(), in.cols());
                for (std::size_t i = 0; i < n.index.size(); ++i)
                    for (std::size_t c = 0; c < in.cols(); ++c) ga(n.index[i], c) += g(i, c);
                accumulate(pa, ga);
                break;
            }
            case OpKind::normalize_rows:
                accumulate(pa, normalize_backward(g, n.aux, n.norms));
                break;
            case OpKind::cosine_rows: {
                Matrix g_scaled = g;
                for (double& v : g_scaled.data()) v /= n.scalar;
                if (nodes_[pa].needs_grad) {
                    Matrix gu = kernels::matmul(g_scaled, n.aux2);
                    accumulate(pa, normalize_backward(gu, n.aux, n.norms));
                }
                if (nodes_[pb].needs_grad) {
                    Matrix gu = kernels::matmul_tn(g_scaled, n.aux);
                    accumulate(pb, normalize_backward(gu, n.aux2, n.norms2));
                }
                break;
            }
            case OpKind::pair_rows_dot: {
                const Matrix& av = nodes_[pa].value;
                const Matrix& bv = nodes_[pb].value;
                const std::size_t m = g.cols();
                Matrix ga(av.rows(), av.cols()), gb(bv.rows(), bv.cols());
                for (std::size_t i = 0; i < av.rows(); ++i)
                    for (std::size_t j = 0; j < m; ++j) {
                        const double gij = g(i, j);
                        for (std::size_t k = 0; k < av.cols(); ++k) {
                            ga(i, k) += gij * bv(i * m + j, k);
                            gb(i * m + j, k) += gij * av(i, k);
                        }
                    }
                accumulate(pa, ga);
                accumulate(pb, gb);
                break;
            }
        }
    }
}

}  // namespace cmi
