#include "moce/gradcheck.hpp"

#include <cmath>
#include <string>

#include "moce/errors.hpp"

namespace moce::num {

namespace {

double evaluate(const Objective& f) {
    const Tensor out = f(nullptr);
    if (out.numel() != 1) throw ContractError("finite_diff_check: objective is not scalar");
    const double v = out.item();
    if (!std::isfinite(v)) throw NumericError("finite_diff_check: non-finite objective value");
    return v;
}

}  // namespace

GradCheckResult finite_diff_check(const Objective& f, std::span<const Tensor> params, double h) {
    for (const auto& p : params) {
        if (!p.requires_grad()) throw ContractError("finite_diff_check: parameter is not differentiable");
        p.zero_grad();
    }
    {
        Tape tape;
        const Tensor loss = f(&tape);
        if (!std::isfinite(loss.item())) {
            throw NumericError("finite_diff_check: non-finite objective value");
        }
        tape.backward(loss);
    }

    GradCheckResult result;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        const Tensor& p = params[pi];
        auto values = p.mutable_values();
        const auto grad = p.grad();
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double saved = values[i];
            values[i] = saved + h;
            const double up = evaluate(f);
            values[i] = saved - h;
            const double down = evaluate(f);
            values[i] = saved;

            const double numeric = (up - down) / (2.0 * h);
            const double analytic = grad[i];
            const double err =
                std::abs(analytic - numeric) / (std::abs(analytic) + std::abs(numeric) + 1e-12);
            ++result.coordinates;
            if (err > result.max_relative_error) {
                result.max_relative_error = err;
                result.worst_param = pi;
                result.worst_index = i;
                result.worst_analytic = analytic;
                result.worst_numeric = numeric;
            }
        }
    }
    return result;
}

}  // namespace moce::num
