#pragma once

#include <vector>

#include "cplab/gradcheck.hpp"
#include "cplab/image.hpp"

namespace cplab::verify {

/// The full from-first-principles verification suite: per-op gradient checks
/// against central finite differences, a whole-model gradient spot check,
/// schedule and forward-process statistics, zero-init equivalence, metric
/// identities against an independent SSIM route, and optimizer contracts.
std::vector<VerifyCheck> run_all(int grad_seeds = 10);

/// Independent windowed-SSIM route (direct per-window evaluation); used to
/// cross-check the production implementation.
double reference_ssim(const img::Image& a, const img::Image& b);

}  // namespace cplab::verify
