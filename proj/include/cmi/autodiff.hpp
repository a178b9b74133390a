#pragma once

#include <array>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "cmi/matrix.hpp"

namespace cmi {

/// A trainable tensor. The tape reads `value` at record time and accumulates
/// into `grad` during backward.
struct Parameter {
    Matrix value;
    Matrix grad;

    Parameter() = default;
    explicit Parameter(Matrix v) : value(std::move(v)), grad(value.rows(), value.cols()) {}
    void zero_grad() { grad = Matrix(value.rows(), value.cols()); }
};

/// Handle to a node on a Tape.
struct Var {
    static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
    std::size_t id = npos;
    bool valid() const { return id != npos; }
};

enum class OpKind {
    constant,
    variable,
    parameter,
    matmul,
    transpose,
    add,
    sub,
    mul,
    add_row,
    relu,
    exp,
    log,
    scale,
    add_scalar,
    row_logsumexp,
    diag,
    sum,
    mean,
    concat_cols,
    gather_rows,
    normalize_rows,
    cosine_rows,
    pair_rows_dot,
};

const char* op_name(OpKind kind);

/// Define-by-run reverse-mode tape. Nodes are appended in evaluation order, so
/// every parent index is smaller than its child's. A tape is rebuilt for every
/// forward pass and is not shared across threads.
class Tape {
public:
    Var constant(Matrix value);
    Var variable(Matrix value);
    Var parameter(Parameter& p);

    Var matmul(Var a, Var b);
    Var transpose(Var a);
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    /// a (n x c) plus a 1 x c row broadcast over rows.
    Var add_row(Var a, Var row);
    Var relu(Var a);
    Var exp(Var a);
    Var log(Var a);
    Var scale(Var a, double factor);
    Var add_scalar(Var a, double shift);
    /// Per-row log-sum-exp, stabilised by the row maximum. Result is n x 1.
    Var row_logsumexp(Var a);
    /// Main diagonal of a square matrix as an n x 1 column.
    Var diag(Var a);
    Var sum(Var a);
    Var mean(Var a);
    Var concat_cols(Var a, Var b);
    Var gather_rows(Var a, std::vector<std::size_t> indices);
    /// Rows scaled to unit L2 norm (norm clamped below at kNormFloor).
    Var normalize_rows(Var a);
    /// S_ij = cos(a_i, b_j) / tau, n x m.
    Var cosine_rows(Var a, Var b, double tau);
    /// a is n x h, b is (n*m) x h; S_ij = a_i . b_(i*m + j), n x m.
    Var pair_rows_dot(Var a, Var b);

    /// Reverse sweep from a 1x1 root. Previous gradients on the tape are discarded;
    /// parameter gradients are accumulated.
    void backward(Var root);

    const Matrix& value(Var v) const { return node(v).value; }
    double scalar(Var v) const;
    /// Gradient of the last backward root with respect to v (zeros if unreached).
    Matrix grad(Var v) const;

    std::size_t size() const { return nodes_.size(); }
    OpKind kind(Var v) const { return node(v).kind; }
    std::array<std::size_t, 2> parents(Var v) const { return node(v).parents; }
    /// Rows whose norm fell below kNormFloor in normalize/cosine ops.
    std::size_t degenerate_rows() const { return degenerate_rows_; }

    static constexpr double kNormFloor = 1e-12;

private:
    struct Node {
        OpKind kind = OpKind::constant;
        std::array<std::size_t, 2> parents{Var::npos, Var::npos};
        Matrix value;
        Matrix grad;
        bool needs_grad = false;
        double scalar = 0.0;
        Parameter* param = nullptr;
        std::vector<std::size_t> index;
        Matrix aux;   // cached normalised rows
        Matrix aux2;  // second cache (cosine: normalised b rows)
        std::vector<double> norms;
        std::vector<double> norms2;
    };

    const Node& node(Var v) const;
    Var push(Node n);
    Var unary(OpKind kind, Var a, Matrix value);
    Var binary(OpKind kind, Var a, Var b, Matrix value);
    void accumulate(std::size_t id, const Matrix& g);
    Matrix normalize(const Matrix& m, std::vector<double>& norms);

    std::vector<Node> nodes_;
    std::size_t degenerate_rows_ = 0;
};

}  // namespace cmi
