#pragma once

#include <span>
#include <stdexcept>

#include "cmi/critic.hpp"

namespace cmi {

class BatchTooSmallError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class ConditioningError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// mean_i [ S_ii - log sum_j exp(S_ij) ] + log n for an n x n score matrix.
/// Every summand is at most log n, so the value is too.
Var contrastive_bound(Tape& tape, Var scores);

/// Unconditional InfoNCE over one batch (z ignored); critic must be separable.
Var infonce_value(Tape& tape, const TripleBatch& batch, Critic& critic);

/// Mean over per-outcome batches of the conditional bound with scores f(x_i, y_j, z).
/// Critic must be z_augmented or bilinear_z and every batch must carry z.
Var c_infonce_value(Tape& tape, std::span<const TripleBatch> batches, Critic& critic);

/// Mean over per-outcome batches of the bound with scores f(x_i, y_j); z never
/// reaches the critic. Critic must be separable.
Var weac_infonce_value(Tape& tape, std::span<const TripleBatch> batches, Critic& critic);

// Forward-only conveniences.
double infonce(const TripleBatch& batch, Critic& critic);
double c_infonce(std::span<const TripleBatch> batches, Critic& critic);
double weac_infonce(std::span<const TripleBatch> batches, Critic& critic);

}  // namespace cmi
