#pragma once

#include <functional>
#include <span>

#include "moce/tensor.hpp"

namespace moce::num {

/// Scalar objective over some parameter tensors. Called with a live tape to
/// obtain analytic gradients and with `nullptr` for plain evaluation.
using Objective = std::function<Tensor(Tape*)>;

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::size_t worst_param = 0;
    std::size_t worst_index = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
    std::size_t coordinates = 0;
};

/// Compares tape gradients of `f` against central differences with step `h`
/// over every coordinate of `params`. The error per coordinate is
/// |analytic - numeric| / (|analytic| + |numeric| + 1e-12).
///
/// Parameter values are restored after probing. Throws NumericError if any
/// evaluation of `f` is non-finite.
GradCheckResult finite_diff_check(const Objective& f, std::span<const Tensor> params, double h = 1e-5);

}  // namespace moce::num
