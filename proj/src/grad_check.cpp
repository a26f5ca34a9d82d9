#include "banditseq/grad_check.hpp"

#include "banditseq/errors.hpp"

#include <algorithm>
#include <cmath>

namespace banditseq {

namespace {

double evaluate(const LossBuilder& loss, ParamStore& params) {
    Tape tape;
    return loss(tape, params).item();
}

} // namespace

GradCheckReport finite_diff_check(const LossBuilder& loss, ParamStore& params,
                                  GradCheckOptions options) {
    require(options.step >= 1e-6 && options.step <= 1e-3, "finite-difference step must be in [1e-6, 1e-3]");

    const double base_a = evaluate(loss, params);
    const double base_b = evaluate(loss, params);
    if (base_a != base_b) {
        throw ContractViolation("loss function is nondeterministic: two evaluations differ");
    }

    params.zero_grad();
    {
        Tape tape;
        Var root = loss(tape, params);
        tape.backward(root);
    }
    std::vector<Tensor> analytic;
    analytic.reserve(params.size());
    for (const auto& e : params.entries()) {
        analytic.push_back(e.grad);
    }
    params.zero_grad();

    GradCheckReport report;
    auto entries = params.entries();
    for (std::size_t i = 0; i < entries.size(); ++i) {
        ParamGradError err;
        err.name = entries[i].name;
        for (std::size_t k = 0; k < entries[i].value.size(); ++k) {
            double& x = entries[i].value[k];
            const double saved = x;
            x = saved + options.step;
            const double plus = evaluate(loss, params);
            x = saved - options.step;
            const double minus = evaluate(loss, params);
            x = saved;
            const double numeric = (plus - minus) / (2.0 * options.step);
            const double a = analytic[i][k];
            const double denom = std::max({std::abs(a), std::abs(numeric), options.denominator_floor});
            const double rel = std::abs(a - numeric) / denom;
            if (rel > options.tolerance) {
                ++err.flagged;
            }
            if (rel > err.max_relative_error || k == 0) {
                err.max_relative_error = rel;
                err.worst_index = k;
                err.analytic = a;
                err.numeric = numeric;
            }
        }
        report.max_relative_error = std::max(report.max_relative_error, err.max_relative_error);
        report.flagged += err.flagged;
        report.params.push_back(std::move(err));
    }
    return report;
}

} // namespace banditseq
