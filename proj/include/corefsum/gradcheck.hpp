#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "corefsum/autodiff.hpp"
#include "corefsum/ops.hpp"

namespace corefsum {

struct GradCheckReport {
    double max_rel_error = 0.0;
    bool passed = false;
    std::string worst;  // "param[index]" of the largest deviation
};

// Central finite differences against the analytic reverse-mode gradients.
// model_fn must rebuild the graph from the current parameter values and
// return a scalar loss node; run it with dropout disabled.
inline GradCheckReport check_gradients(const std::function<Value()>& model_fn,
                                       const std::vector<Parameter*>& params,
                                       double tolerance = 1e-4, double h = 1e-5) {
    for (Parameter* p : params) p->zero_grad();
    Value loss = model_fn();
    if (!loss->val.all_finite()) throw NumericError("check_gradients: non-finite loss");
    backward(loss);

    std::vector<Tensor> analytic;
    analytic.reserve(params.size());
    for (Parameter* p : params) analytic.push_back(p->grad);

    GradCheckReport report;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Parameter* p = params[pi];
        for (std::size_t i = 0; i < p->value.size(); ++i) {
            const double orig = p->value.at(i);
            p->value.at(i) = orig + h;
            const double f_plus = model_fn()->val.at(0);
            p->value.at(i) = orig - h;
            const double f_minus = model_fn()->val.at(0);
            p->value.at(i) = orig;
            if (!std::isfinite(f_plus) || !std::isfinite(f_minus)) {
                throw NumericError("check_gradients: non-finite perturbed loss at " + p->name);
            }
            const double fd = (f_plus - f_minus) / (2.0 * h);
            const double an = analytic[pi].at(i);
            const double denom = std::max({std::fabs(an), std::fabs(fd), 1e-6});
            const double rel = std::fabs(an - fd) / denom;
            if (rel > report.max_rel_error) {
                report.max_rel_error = rel;
                report.worst = p->name + "[" + std::to_string(i) + "]";
            }
        }
    }
    report.passed = report.max_rel_error < tolerance;
    return report;
}

}  // namespace corefsum
