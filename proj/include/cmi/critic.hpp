#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cmi/nn.hpp"

namespace cmi {

/// Aligned (x_i, y_i) rows drawn under one conditioning outcome. When present,
/// `zs` holds one conditioning row per sample; for a discrete outcome every row
/// is identical.
struct TripleBatch {
    Matrix xs;
    Matrix ys;
    std::optional<Matrix> zs;

    std::size_t size() const { return xs.rows(); }
    bool has_z() const { return zs.has_value(); }
    /// True when every z row equals the first.
    bool z_shared() const;
};

enum class CriticKind { separable, z_augmented, bilinear_z };
enum class Similarity { cosine, dot };

const char* to_string(CriticKind kind);
const char* to_string(Similarity s);
CriticKind parse_critic_kind(const std::string& s);
Similarity parse_similarity(const std::string& s);

struct CriticOptions {
    std::size_t hidden = 64;
    std::size_t out = 32;
    std::size_t depth = 2;
    Similarity similarity = Similarity::cosine;
    double tau = 1.0;
    /// One tower for both sides (requires equal input widths).
    bool shared_tower = false;
};

/// Scoring function f over (x, y[, z]).
///
/// - separable:   f(x, y)    = sim(g_x(x), g_y(y))
/// - z_augmented: f(x, y, z) = sim(g_x([x, z]), g_y([y, z]))
/// - bilinear_z:  f(x, y, z) = (g_x(x) * (W_xz z)) . (g_y(y) * (W_yz z)), raw
///
/// sim is cos(a, b) / tau or a . b / tau. For a pair (i, j) the conditioning row
/// used is the anchor's z_i, so f(x_i, y_j, z_i).
class Critic {
public:
    static Critic separable(std::size_t d_x, std::size_t d_y, const CriticOptions& opts, Rng& rng);
    static Critic z_augmented(std::size_t d_x, std::size_t d_y, std::size_t d_z,
                              const CriticOptions& opts, Rng& rng);
    static Critic bilinear_z(std::size_t d_x, std::size_t d_y, std::size_t d_z,
                             const CriticOptions& opts, Rng& rng);

    /// n x n score matrix S_ij = f(x_i, y_j[, z_i]) recorded on the tape.
    Var scores(Tape& tape, const TripleBatch& batch);
    /// Same, for inputs already on the tape (gradients flow into xs and ys).
    Var scores(Tape& tape, Var xs, Var ys, const std::optional<Matrix>& zs);
    Matrix score_matrix(const TripleBatch& batch);

    std::vector<Parameter*> parameters();

    CriticKind kind() const { return kind_; }
    double tau() const { return opts_.tau; }
    const CriticOptions& options() const { return opts_; }
    bool uses_z() const { return kind_ != CriticKind::separable; }

    MLP& tower_x() { return tower_x_; }
    MLP& tower_y() { return opts_.shared_tower ? tower_x_ : tower_y_; }
    Linear& z_map_x() { return z_map_x_; }
    Linear& z_map_y() { return z_map_y_; }

private:
    Critic(CriticKind kind, CriticOptions opts) : kind_(kind), opts_(opts) {}
    void check_widths(const TripleBatch& batch) const;
    Var similarity(Tape& tape, Var a, Var b) const;

    CriticKind kind_;
    CriticOptions opts_;
    std::size_t d_x_ = 0, d_y_ = 0, d_z_ = 0;
    MLP tower_x_;
    MLP tower_y_;
    Linear z_map_x_;
    Linear z_map_y_;
};

}  // namespace cmi
