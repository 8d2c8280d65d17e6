#pragma once

#include <functional>
#include <string>
#include <vector>

#include "cplab/tensor.hpp"

namespace cplab {

/// Central-finite-difference verification of reverse-mode gradients, always
/// in double precision. The scalar loss is re-evaluated with each input
/// element perturbed by +/-h under NoGrad; the analytic gradient must match
/// (f(x+h)-f(x-h))/(2h) within `tol`, measured as max |a-fd| relative to the
/// larger of 1 and the gradient magnitudes.
struct GradCheckReport {
    double max_rel_err = 0.0;
    std::string worst_input;  // which input/element was worst
    bool pass(double tol) const { return max_rel_err < tol; }
};

GradCheckReport grad_check(
    const std::function<Tensor<double>(const std::vector<Tensor<double>>&)>& loss_fn,
    std::vector<Tensor<double>> inputs, double h = 1e-5,
    const std::vector<std::vector<std::int64_t>>& element_subsets = {});

/// One line per check: name, pass flag, detail (max relative error).
struct VerifyCheck {
    std::string name;
    bool pass = false;
    std::string detail;
};

/// Randomized gradient checks for every differentiable op, `seeds` seeds per
/// op, shapes drawn per seed. tol 1e-4 per the numerical-core contract.
std::vector<VerifyCheck> op_gradient_suite(int seeds, double tol = 1e-4);

}  // namespace cplab
