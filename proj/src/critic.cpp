#include "cmi/critic.hpp"

#include <stdexcept>

namespace cmi {

namespace {

bool rows_identical(const Matrix& z) {
    for (std::size_t r = 1; r < z.rows(); ++r)
        for (std::size_t c = 0; c < z.cols(); ++c)
            if (z(r, c) != z(0, c)) return false;
    return true;
}

}  // namespace

bool TripleBatch::z_shared() const { return !zs || rows_identical(*zs); }

const char* to_string(CriticKind kind) {
    switch (kind) {
        case CriticKind::separable: return "separable";
        case CriticKind::z_augmented: return "z_augmented";
        case CriticKind::bilinear_z: return "bilinear_z";
    }
    return "unknown";
}

const char* to_string(Similarity s) { return s == Similarity::cosine ? "cosine" : "dot"; }

CriticKind parse_critic_kind(const std::string& s) {
    for (CriticKind k : {CriticKind::separable, CriticKind::z_augmented, CriticKind::bilinear_z})
        if (s == to_string(k)) return k;
    throw std::invalid_argument("unknown critic kind '" + s + "' (expected separable, z_augmented or bilinear_z)");
}

Similarity parse_similarity(const std::string& s) {
    if (s == "cosine") return Similarity::cosine;
    if (s == "dot") return Similarity::dot;
    throw std::invalid_argument("unknown similarity '" + s + "' (expected cosine or dot)");
}

Critic Critic::separable(std::size_t d_x, std::size_t d_y, const CriticOptions& opts, Rng& rng) {
    if (opts.shared_tower && d_x != d_y)
        throw DimensionError("Critic: shared tower needs equal input widths");
    Critic c(CriticKind::separable, opts);
    c.d_x_ = d_x;
    c.d_y_ = d_y;
    c.tower_x_ = MLP(d_x, opts.hidden, opts.out, opts.depth, rng);
    if (!opts.shared_tower) c.tower_y_ = MLP(d_y, opts.hidden, opts.out, opts.depth, rng);
    return c;
}

Critic Critic::z_augmented(std::size_t d_x, std::size_t d_y, std::size_t d_z,
                           const CriticOptions& opts, Rng& rng) {
    if (opts.shared_tower && d_x != d_y)
        throw DimensionError("Critic: shared tower needs equal input widths");
    Critic c(CriticKind::z_augmented, opts);
    c.d_x_ = d_x;
    c.d_y_ = d_y;
    c.d_z_ = d_z;
    c.tower_x_ = MLP(d_x + d_z, opts.hidden, opts.out, opts.depth, rng);
    if (!opts.shared_tower) c.tower_y_ = MLP(d_y + d_z, opts.hidden, opts.out, opts.depth, rng);
    return c;
}

Critic Critic::bilinear_z(std::size_t d_x, std::size_t d_y, std::size_t d_z,
                          const CriticOptions& opts, Rng& rng) {
    CriticOptions o = opts;
    o.similarity = Similarity::dot;
    o.tau = 1.0;
    o.shared_tower = false;
    Critic c(CriticKind::bilinear_z, o);
    c.d_x_ = d_x;
    c.d_y_ = d_y;
    c.d_z_ = d_z;
    c.tower_x_ = MLP(d_x, opts.hidden, opts.out, opts.depth, rng);
    c.tower_y_ = MLP(d_y, opts.hidden, opts.out, opts.depth, rng);
    c.z_map_x_ = Linear(d_z, opts.out, rng);
    c.z_map_y_ = Linear(d_z, opts.out, rng);
    // Unit offsets so the untrained critic starts as a plain g_x . g_y product.
    c.z_map_x_.bias.value.fill(1.0);
    c.z_map_y_.bias.value.fill(1.0);
    return c;
}

void Critic::check_widths(const TripleBatch& batch) const {
    if (batch.xs.rows() != batch.ys.rows()) throw DimensionError("Critic: x and y row counts differ");
    if (batch.xs.cols() != d_x_ || batch.ys.cols() != d_y_)
        throw DimensionError("Critic: input widths do not match critic");
    if (uses_z()) {
        if (!batch.zs) throw std::invalid_argument("Critic: conditioning rows required");
        if (batch.zs->cols() != d_z_ || batch.zs->rows() != batch.xs.rows())
            throw DimensionError("Critic: z shape does not match critic");
    }
}

Var Critic::similarity(Tape& tape, Var a, Var b) const {
    if (opts_.similarity == Similarity::cosine) return tape.cosine_rows(a, b, opts_.tau);
    Var s = tape.matmul(a, tape.transpose(b));
    return opts_.tau == 1.0 ? s : tape.scale(s, 1.0 / opts_.tau);
}

Var Critic::scores(Tape& tape, const TripleBatch& batch) {
    check_widths(batch);
    return scores(tape, tape.constant(batch.xs), tape.constant(batch.ys), batch.zs);
}

Var Critic::scores(Tape& tape, Var xs, Var ys, const std::optional<Matrix>& zs) {
    const std::size_t n = tape.value(xs).rows();
    if (tape.value(ys).rows() != n) throw DimensionError("Critic: x and y row counts differ");
    if (tape.value(xs).cols() != d_x_ || tape.value(ys).cols() != d_y_)
        throw DimensionError("Critic: input widths do not match critic");
    if (uses_z()) {
        if (!zs) throw std::invalid_argument("Critic: conditioning rows required");
        if (zs->cols() != d_z_ || zs->rows() != n) throw DimensionError("Critic: z shape does not match critic");
    }
    MLP& gy = tower_y();
    switch (kind_) {
        case CriticKind::separable: {
            Var a = tower_x_.forward(tape, xs);
            Var b = gy.forward(tape, ys);
            return similarity(tape, a, b);
        }
        case CriticKind::z_augmented: {
            Var z = tape.constant(*zs);
            Var a = tower_x_.forward(tape, tape.concat_cols(xs, z));
            if (rows_identical(*zs)) {
                Var b = gy.forward(tape, tape.concat_cols(ys, z));
                return similarity(tape, a, b);
            }
            // Distinct anchors: evaluate g_y on every (y_j, z_i) pair.
            std::vector<std::size_t> y_index(n * n), z_index(n * n);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    y_index[i * n + j] = j;
                    z_index[i * n + j] = i;
                }
            Var pairs = tape.concat_cols(tape.gather_rows(ys, std::move(y_index)),
                                         tape.constant(gather_rows(*zs, z_index)));
            Var b = gy.forward(tape, pairs);
            if (opts_.similarity == Similarity::cosine) {
                return tape.scale(tape.pair_rows_dot(tape.normalize_rows(a), tape.normalize_rows(b)),
                                  1.0 / opts_.tau);
            }
            Var s = tape.pair_rows_dot(a, b);
            return opts_.tau == 1.0 ? s : tape.scale(s, 1.0 / opts_.tau);
        }
        case CriticKind::bilinear_z: {
            Var z = tape.constant(*zs);
            Var gx = tower_x_.forward(tape, xs);
            Var gyv = gy.forward(tape, ys);
            Var mx = z_map_x_.forward(tape, z);
            Var my = z_map_y_.forward(tape, z);
            Var u = tape.mul(tape.mul(gx, mx), my);
            return tape.matmul(u, tape.transpose(gyv));
        }
    }
    throw std::logic_error("Critic: unknown kind");
}

Matrix Critic::score_matrix(const TripleBatch& batch) {
    Tape tape;
    return tape.value(scores(tape, batch));
}

std::vector<Parameter*> Critic::parameters() {
    std::vector<Parameter*> out = tower_x_.parameters();
    if (!opts_.shared_tower) {
        auto y = tower_y_.parameters();
        out.insert(out.end(), y.begin(), y.end());
    }
    if (kind_ == CriticKind::bilinear_z) {
        for (Linear* l : {&z_map_x_, &z_map_y_}) {
            out.push_back(&l->weight);
            out.push_back(&l->bias);
        }
    }
    return out;
}

}  // namespace cmi
