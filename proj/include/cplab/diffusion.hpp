#pragma once

#include <cstdint>
#include <vector>

#include "cplab/nets.hpp"
#include "cplab/rng.hpp"
#include "cplab/tensor.hpp"

namespace cplab::diffusion {

/// Per-timestep noise tables; index t is 1-based (entry t-1).
struct NoiseSchedule {
    int T = 0;
    double beta_start = 0.0, beta_end = 0.0;
    std::vector<double> beta;       // beta_t
    std::vector<double> alpha;      // 1 - beta_t
    std::vector<double> alpha_bar;  // prod_{s<=t} (1 - beta_s)

    double abar(int t) const { return t == 0 ? 1.0 : alpha_bar[static_cast<size_t>(t - 1)]; }
};

/// Linear betas; 0 < beta_start <= beta_end < 1.
NoiseSchedule make_schedule(int T, double beta_start, double beta_end);

enum class SamplerKind { AncestralStochastic, DeterministicSkip };

SamplerKind sampler_kind_from_string(const std::string& s);
std::string sampler_kind_to_string(SamplerKind k);

struct SamplerConfig {
    SamplerKind kind = SamplerKind::DeterministicSkip;
    int steps = 50;         // sub-schedule length for deterministic-skip
    double scale = 1.0;     // conditioning scale on control residuals
    std::uint64_t seed = 0;
    // Per-step noise amount; <0 selects by kind (ancestral 1, skip 0). An
    // ancestral run with eta forced to 0 suppresses per-step noise entirely.
    double eta = -1.0;
};

/// z_t = sqrt(abar_t) x0 + sqrt(1-abar_t) eps, exactly; no graph is recorded.
template <typename S>
Tensor<S> q_sample(const Tensor<S>& x0, int t, const Tensor<S>& eps,
                   const NoiseSchedule& sched);

/// [0,1] images <-> the [-1,1] space the denoiser operates in.
template <typename S>
Tensor<S> to_model_space(const Tensor<S>& x01);
template <typename S>
Tensor<S> from_model_space_clamped(const Tensor<S>& x);

/// Mean squared error between drawn noise and the model prediction at
/// per-sample uniform timesteps. Gradients reach only parameters that
/// require them (a frozen backbone stays untouched).
template <typename S>
Tensor<S> ldm_loss(const nets::ModelPair<S>& model, const Tensor<S>& x0_model_space,
                   const Tensor<S>& cond, const std::vector<int>& labels, Rng& rng,
                   const NoiseSchedule& sched, bool use_control, S scale = S(1));

/// Reverse process from seeded Gaussian noise; returns images in [0,1].
/// Row i of the batch uses an independent RNG stream derived from
/// (cfg.seed, i), so results do not depend on batch partitioning.
template <typename S>
Tensor<S> sample(const nets::ModelPair<S>& model, const Tensor<S>& cond,
                 const std::vector<int>& labels, const SamplerConfig& cfg,
                 const NoiseSchedule& sched, bool use_control);

/// The deterministic-skip timestep sub-schedule: `steps` evenly spaced
/// values from T down to 1 (inclusive on both ends).
std::vector<int> skip_schedule(int T, int steps);

}  // namespace cplab::diffusion
