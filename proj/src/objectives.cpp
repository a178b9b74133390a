#include "cmi/objectives.hpp"

#include <cmath>
#include <string>

namespace cmi {
namespace {

void require_contrastive_size(const TripleBatch& batch) {
    if (batch.size() < 2)
        throw BatchTooSmallError("contrastive objective needs at least 2 pairs, got " +
                                 std::to_string(batch.size()));
}

Var mean_of(Tape& tape, std::span<const Var> terms) {
    Var total = terms.front();
    for (std::size_t i = 1; i < terms.size(); ++i) total = tape.add(total, terms[i]);
    return terms.size() == 1 ? total : tape.scale(total, 1.0 / static_cast<double>(terms.size()));
}

}  // namespace

Var contrastive_bound(Tape& tape, Var scores) {
    const std::size_t n = tape.value(scores).rows();
    if (n != tape.value(scores).cols()) throw DimensionError("contrastive_bound: score matrix must be square");
    if (n < 2) throw BatchTooSmallError("contrastive_bound: need at least 2 pairs");
    Var per_row = tape.sub(tape.diag(scores), tape.row_logsumexp(scores));
    return tape.add_scalar(tape.mean(per_row), std::log(static_cast<double>(n)));
}

Var infonce_value(Tape& tape, const TripleBatch& batch, Critic& critic) {
    if (critic.kind() != CriticKind::separable)
        throw std::invalid_argument("infonce_value: critic must be separable");
    require_contrastive_size(batch);
    return contrastive_bound(tape, critic.scores(tape, batch));
}

Var c_infonce_value(Tape& tape, std::span<const TripleBatch> batches, Critic& critic) {
    if (critic.kind() == CriticKind::separable)
        throw std::invalid_argument("c_infonce_value: critic must take z (z_augmented or bilinear_z)");
    if (batches.empty()) throw std::invalid_argument("c_infonce_value: no batches");
    std::vector<Var> terms;
    terms.reserve(batches.size());
    for (const auto& b : batches) {
        if (!b.has_z()) throw ConditioningError("c_infonce_value: batch without conditioning rows");
        require_contrastive_size(b);
        terms.push_back(contrastive_bound(tape, critic.scores(tape, b)));
    }
    return mean_of(tape, terms);
}

Var weac_infonce_value(Tape& tape, std::span<const TripleBatch> batches, Critic& critic) {
    if (critic.kind() != CriticKind::separable)
        throw std::invalid_argument("weac_infonce_value: critic must be separable");
    if (batches.empty()) throw std::invalid_argument("weac_infonce_value: no batches");
    std::vector<Var> terms;
    terms.reserve(batches.size());
    for (const auto& b : batches) {
        require_contrastive_size(b);
        terms.push_back(contrastive_bound(tape, critic.scores(tape, b)));
    }
    return mean_of(tape, terms);
}

double infonce(const TripleBatch& batch, Critic& critic) {
    Tape tape;
    return tape.scalar(infonce_value(tape, batch, critic));
}

double c_infonce(std::span<const TripleBatch> batches, Critic& critic) {
    Tape tape;
    return tape.scalar(c_infonce_value(tape, batches, critic));
}

double weac_infonce(std::span<const TripleBatch> batches, Critic& critic) {
    Tape tape;
    return tape.scalar(weac_infonce_value(tape, batches, critic));
}

}  // namespace cmi
