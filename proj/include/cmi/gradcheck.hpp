#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cmi/autodiff.hpp"

namespace cmi {

/// |analytic - numeric| / max(|analytic|, |numeric|, floor), maximised over entries.
inline constexpr double kGradRelFloor = 1e-6;

double relative_error(double analytic, double numeric, double floor = kGradRelFloor);

/// Builds a scalar from leaf variables created on the supplied tape.
using ScalarOfInputs = std::function<Var(Tape&, const std::vector<Var>&)>;
using ScalarOfParams = std::function<Var(Tape&)>;

/// Central finite differences against the tape's reverse sweep for every entry of
/// every input. Returns the maximum relative error.
double check_input_gradients(const ScalarOfInputs& f, std::vector<Matrix> inputs, double h = 1e-4);

/// Same, perturbing parameter values in place (restored afterwards).
double check_parameter_gradients(const ScalarOfParams& f, const std::vector<Parameter*>& params,
                                 double h = 1e-4);

struct GradCheckResult {
    std::string name;
    double max_rel_error = 0.0;
};

/// Every differentiable tape op plus the three contrastive objectives on tiny
/// random instances.
std::vector<GradCheckResult> run_gradcheck_suite(std::uint64_t seed);

}  // namespace cmi
