#pragma once

// Central-finite-difference verification of analytic gradients. Meant to run
// on double instantiations of the ops; float precision is too coarse for the
// tolerances used in the test suites.

#include "csnake/tensor.hpp"

namespace csnake {

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::size_t worst_index = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
};

// f must be a deterministic map TensorPtr<double> -> scalar TensorPtr<double>.
// Reported error per coordinate: |analytic - central difference| / max(1, |analytic|).
template <class F>
GradCheckReport grad_check(F&& f, const TensorPtr<double>& x0, double h) {
    if (!(h > 0)) throw ContractViolation("grad_check: h must be positive");

    auto x = Tensor<double>::create(x0->shape, x0->data, true);
    auto loss = f(x);
    if (!loss || loss->size() != 1) throw ContractViolation("grad_check: f must return a scalar");
    if (!std::isfinite(loss->value())) throw ContractViolation("grad_check: non-finite f at the base point");
    backward(loss);
    std::vector<double> analytic = x->grad;
    if (analytic.size() != x->data.size()) analytic.assign(x->data.size(), 0.0);

    GradCheckReport rep;
    for (std::size_t i = 0; i < x0->data.size(); ++i) {
        auto eval = [&](double delta) {
            auto xi = Tensor<double>::create(x0->shape, x0->data, false);
            xi->data[i] += delta;
            double v = f(xi)->value();
            if (!std::isfinite(v))
                throw ContractViolation("grad_check: non-finite f output at coordinate " + std::to_string(i));
            return v;
        };
        double fd = (eval(h) - eval(-h)) / (2.0 * h);
        double rel = std::abs(analytic[i] - fd) / std::max(1.0, std::abs(analytic[i]));
        if (rel > rep.max_rel_error) {
            rep.max_rel_error = rel;
            rep.worst_index = i;
            rep.worst_analytic = analytic[i];
            rep.worst_numeric = fd;
        }
    }
    return rep;
}

}  // namespace csnake
