#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "cmi/rng.hpp"

namespace cmi {

class NormalizationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Exact joint table p[x][y][z] over alphabets of at most 16 symbols each.
class DiscretePMF {
public:
    static constexpr std::size_t kMaxAlphabet = 16;

    DiscretePMF(std::size_t nx, std::size_t ny, std::size_t nz, std::vector<double> table);

    std::size_t nx() const { return nx_; }
    std::size_t ny() const { return ny_; }
    std::size_t nz() const { return nz_; }
    double operator()(std::size_t x, std::size_t y, std::size_t z) const {
        return p_[(x * ny_ + y) * nz_ + z];
    }
    const std::vector<double>& table() const { return p_; }

    std::vector<double> marginal_x() const;
    std::vector<double> marginal_y() const;
    std::vector<double> marginal_z() const;
    /// nx*ny table of P(x, y).
    std::vector<double> marginal_xy() const;

    /// Flat Dirichlet(1) draw: iid exponentials normalised. Never yields exact zeros.
    static DiscretePMF random(std::size_t nx, std::size_t ny, std::size_t nz, Rng& rng);
    /// p(z) p(x|z) p(y|z) with every factor drawn from a flat Dirichlet.
    static DiscretePMF random_conditionally_independent(std::size_t nx, std::size_t ny,
                                                        std::size_t nz, Rng& rng);

private:
    std::size_t nx_, ny_, nz_;
    std::vector<double> p_;
};

enum class MIPair { XY, XZ, YZ, X_YZ };

/// Sum p log(p / q) with 0 log 0 := 0. Throws if p > 0 where q == 0.
double kl_divergence(const std::vector<double>& p, const std::vector<double>& q);

double exact_mi(const DiscretePMF& p, MIPair of);
/// sum_z p(z) KL(P_XY|z || P_X|z P_Y|z).
double exact_cmi(const DiscretePMF& p);
/// KL(P_XY || sum_z p(z) p(x|z) p(y|z)).
double exact_weak_cmi(const DiscretePMF& p);
/// sum_z p(z) p(x|z) p(y|z) as an nx*ny table.
std::vector<double> weak_reference(const DiscretePMF& p);

struct VariationalCheckReport {
    std::size_t trials = 0;
    std::size_t violations = 0;        // random critics whose bound exceeded KL + 1e-9
    double max_excess = -1e300;        // max over trials of (bound - KL)
    double optimum_gap = 0.0;          // max |bound(log dP/dQ) - KL| over checked pairs
    bool ok(double tol = 1e-9) const { return violations == 0 && optimum_gap <= tol; }
};

/// E_P[f] - E_Q[exp f] + 1 for a score table f.
double variational_kl_bound(const std::vector<double>& p, const std::vector<double>& q,
                            const std::vector<double>& f);

/// Checks the two-sample variational KL bound on three (P, Q) pairs derived from
/// `p`: (P_XY, P_X P_Y), (P_XY, weak reference) and (P_XYZ, P_Z P_X|Z P_Y|Z).
/// Each of `trials` random critics must stay below the KL; the log-ratio critic
/// must attain it.
VariationalCheckReport variational_kl_check(const DiscretePMF& p, std::size_t trials, Rng& rng);

struct OracleSuiteReport {
    std::size_t pmfs = 0;
    std::size_t ordering_violations = 0;  // weak CMI < 0 or above CMI + slack
    double max_chain_rule_error = 0.0;
    std::size_t independence_cases = 0;
    std::size_t independence_violations = 0;  // CMI == 0 but weak CMI > slack
    std::size_t critics = 0;
    std::size_t critic_violations = 0;
    double max_optimum_gap = 0.0;

    bool ok() const;
};

/// Property run over random pmfs: 0 <= weak CMI <= CMI (1e-9 slack) and the chain
/// rule (1e-10) on `trials` pmfs; conditional independence implies weak
/// conditional independence on 100 constructed pmfs; the variational KL bound on
/// `critic_trials` random critics per derived (P, Q) pair, attained to 1e-9.
OracleSuiteReport run_oracle_suite(std::size_t trials, std::size_t critic_trials, std::uint64_t seed);

}  // namespace cmi
