#pragma once

#include "banditseq/autodiff.hpp"
#include "banditseq/param_store.hpp"

#include <functional>
#include <string>
#include <vector>

namespace banditseq {

// Builds a scalar loss on the given tape from the current parameter values.
using LossBuilder = std::function<Var(Tape&, ParamStore&)>;

struct GradCheckOptions {
    double step = 1e-4;
    double tolerance = 1e-4;
    // Relative error is |analytic - numeric| / max(|analytic|, |numeric|, floor).
    double denominator_floor = 1e-6;
};

struct ParamGradError {
    std::string name;
    double max_relative_error = 0.0;
    std::size_t worst_index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    std::size_t flagged = 0;
};

struct GradCheckReport {
    std::vector<ParamGradError> params;
    double max_relative_error = 0.0;
    std::size_t flagged = 0;
    bool passed() const { return flagged == 0; }
};

// Compares backward() against central differences for every coordinate of
// every parameter. Parameter values are restored and gradients left zeroed.
GradCheckReport finite_diff_check(const LossBuilder& loss, ParamStore& params,
                                  GradCheckOptions options = {});

} // namespace banditseq
