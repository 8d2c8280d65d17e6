#include "cplab/diffusion.hpp"

#include <algorithm>
#include <cmath>

namespace cplab::diffusion {

NoiseSchedule make_schedule(int T, double beta_start, double beta_end) {
    check(T >= 1, "make_schedule: T must be >= 1, got ", T);
    check(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0,
          "make_schedule: invalid beta range [", beta_start, ", ", beta_end, "]");
    NoiseSchedule s;
    s.T = T;
    s.beta_start = beta_start;
    s.beta_end = beta_end;
    s.beta.resize(static_cast<size_t>(T));
    s.alpha.resize(static_cast<size_t>(T));
    s.alpha_bar.resize(static_cast<size_t>(T));
    double prod = 1.0;
    for (int t = 0; t < T; ++t) {
        const double b =
            T == 1 ? beta_start
                   : beta_start + (beta_end - beta_start) * static_cast<double>(t) / (T - 1);
        s.beta[static_cast<size_t>(t)] = b;
        s.alpha[static_cast<size_t>(t)] = 1.0 - b;
        prod *= 1.0 - b;
        s.alpha_bar[static_cast<size_t>(t)] = prod;
    }
    return s;
}

SamplerKind sampler_kind_from_string(const std::string& s) {
    if (s == "ancestral") return SamplerKind::AncestralStochastic;
    if (s == "skip") return SamplerKind::DeterministicSkip;
    fail("sampler kind '", s, "' unknown (ancestral, skip)");
}

std::string sampler_kind_to_string(SamplerKind k) {
    return k == SamplerKind::AncestralStochastic ? "ancestral" : "skip";
}

template <typename S>
Tensor<S> q_sample(const Tensor<S>& x0, int t, const Tensor<S>& eps,
                   const NoiseSchedule& sched) {
    check(x0.shape() == eps.shape(), "q_sample: shapes ", shape_str(x0.shape()), " and ",
          shape_str(eps.shape()), " differ");
    check(t >= 1 && t <= sched.T, "q_sample: t ", t, " outside [1,", sched.T, "]");
    const double ab = sched.abar(t);
    const S c0 = static_cast<S>(std::sqrt(ab));
    const S c1 = static_cast<S>(std::sqrt(1.0 - ab));
    auto out = Tensor<S>::zeros(x0.shape());
    auto od = out.data();
    auto xd = x0.data();
    auto ed = eps.data();
    for (std::int64_t i = 0; i < out.numel(); ++i) od[i] = c0 * xd[i] + c1 * ed[i];
    return out;
}

template <typename S>
Tensor<S> to_model_space(const Tensor<S>& x01) {
    auto out = Tensor<S>::zeros(x01.shape());
    auto od = out.data();
    auto xd = x01.data();
    for (std::int64_t i = 0; i < out.numel(); ++i) od[i] = S(2) * xd[i] - S(1);
    return out;
}

template <typename S>
Tensor<S> from_model_space_clamped(const Tensor<S>& x) {
    auto out = Tensor<S>::zeros(x.shape());
    auto od = out.data();
    auto xd = x.data();
    for (std::int64_t i = 0; i < out.numel(); ++i)
        od[i] = std::clamp((xd[i] + S(1)) / S(2), S(0), S(1));
    return out;
}

template <typename S>
Tensor<S> ldm_loss(const nets::ModelPair<S>& model, const Tensor<S>& x0, const Tensor<S>& cond,
                   const std::vector<int>& labels, Rng& rng, const NoiseSchedule& sched,
                   bool use_control, S scale) {
    check(x0.rank() == 4, "ldm_loss: x0 must be 4-D, got ", shape_str(x0.shape()));
    const int n = x0.dim(0);
    check(static_cast<int>(labels.size()) == n, "ldm_loss: ", labels.size(), " labels for ",
          n, " samples");

    std::vector<int> t(static_cast<size_t>(n));
    for (auto& ti : t) ti = 1 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(sched.T)));

    auto eps = Tensor<S>::zeros(x0.shape());
    for (auto& v : eps.data()) v = static_cast<S>(rng.normal());

    // z_t rows mix per-sample alpha_bar; inputs carry no gradient
    auto z = Tensor<S>::zeros(x0.shape());
    const std::int64_t row = x0.numel() / n;
    auto zd = z.data();
    auto xd = x0.data();
    auto ed = eps.data();
    for (int i = 0; i < n; ++i) {
        const double ab = sched.abar(t[static_cast<size_t>(i)]);
        const S c0 = static_cast<S>(std::sqrt(ab));
        const S c1 = static_cast<S>(std::sqrt(1.0 - ab));
        for (std::int64_t j = 0; j < row; ++j) zd[i * row + j] = c0 * xd[i * row + j] + c1 * ed[i * row + j];
    }

    auto pred = use_control ? model.denoise_combined(z, t, labels, cond, scale)
                            : model.denoise_backbone(z, t, labels);
    return mse_loss(pred, eps);
}

std::vector<int> skip_schedule(int T, int steps) {
    check(steps >= 1 && steps <= T, "sampler: steps ", steps, " outside [1,", T, "]");
    std::vector<int> taus(static_cast<size_t>(steps));
    if (steps == 1) {
        taus[0] = T;
        return taus;
    }
    for (int k = 0; k < steps; ++k) {
        const double v = 1.0 + (static_cast<double>(T) - 1.0) * k / (steps - 1);
        taus[static_cast<size_t>(k)] = static_cast<int>(std::lround(v));
    }
    std::sort(taus.begin(), taus.end(), std::greater<int>());
    return taus;  // descending, starts at T, ends at 1
}

template <typename S>
Tensor<S> sample(const nets::ModelPair<S>& model, const Tensor<S>& cond,
                 const std::vector<int>& labels, const SamplerConfig& cfg,
                 const NoiseSchedule& sched, bool use_control) {
    NoGradGuard ng;
    const int n = static_cast<int>(labels.size());
    const int size = model.backbone.config().image_size;
    const int ch = model.backbone.config().in_channels;
    check(n >= 1, "sample: empty batch");

    const bool ancestral = cfg.kind == SamplerKind::AncestralStochastic;
    const double eta = cfg.eta >= 0.0 ? cfg.eta : (ancestral ? 1.0 : 0.0);
    std::vector<int> taus = ancestral ? skip_schedule(sched.T, sched.T)
                                      : skip_schedule(sched.T, cfg.steps);

    std::vector<Rng> streams;
    streams.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i)
        streams.emplace_back(derive_seed(cfg.seed, static_cast<std::uint64_t>(i)));

    const std::int64_t row = static_cast<std::int64_t>(ch) * size * size;
    auto draw_noise = [&](Tensor<S>& buf) {
        auto d = buf.data();
        for (int i = 0; i < n; ++i)
            for (std::int64_t j = 0; j < row; ++j)
                d[i * row + j] = static_cast<S>(streams[static_cast<size_t>(i)].normal());
    };

    auto z = Tensor<S>::zeros({n, ch, size, size});
    draw_noise(z);

    auto noise = Tensor<S>::zeros(z.shape());
    for (size_t k = 0; k < taus.size(); ++k) {
        const int t = taus[k];
        const int t_prev = k + 1 < taus.size() ? taus[k + 1] : 0;
        const std::vector<int> tb(static_cast<size_t>(n), t);

        auto pred = use_control
                        ? model.denoise_combined(z, tb, labels, cond, static_cast<S>(cfg.scale))
                        : model.denoise_backbone(z, tb, labels);

        const double ab_t = sched.abar(t);
        const double ab_p = sched.abar(t_prev);
        const double sigma =
            eta * std::sqrt((1.0 - ab_p) / (1.0 - ab_t)) * std::sqrt(1.0 - ab_t / ab_p);
        const double dir = std::sqrt(std::max(1.0 - ab_p - sigma * sigma, 0.0));
        const S c_x0 = static_cast<S>(std::sqrt(ab_p));
        const S c_eps = static_cast<S>(dir);
        const S c_sig = static_cast<S>(sigma);
        const S inv_sqrt_ab = static_cast<S>(1.0 / std::sqrt(ab_t));
        const S sqrt_1mab = static_cast<S>(std::sqrt(1.0 - ab_t));

        const bool add_noise = sigma > 0.0;
        if (add_noise) draw_noise(noise);

        auto zd = z.data();
        auto pd = pred.data();
        auto nd = noise.data();
        for (std::int64_t i = 0; i < z.numel(); ++i) {
            const S x0_hat = (zd[i] - sqrt_1mab * pd[i]) * inv_sqrt_ab;
            S v = c_x0 * x0_hat + c_eps * pd[i];
            if (add_noise) v += c_sig * nd[i];
            zd[i] = v;
        }
    }
    return from_model_space_clamped(z);
}

#define CPLAB_INSTANTIATE_DIFFUSION(S)                                                      \
    template Tensor<S> q_sample<S>(const Tensor<S>&, int, const Tensor<S>&,                \
                                   const NoiseSchedule&);                                  \
    template Tensor<S> to_model_space<S>(const Tensor<S>&);                               \
    template Tensor<S> from_model_space_clamped<S>(const Tensor<S>&);                     \
    template Tensor<S> ldm_loss<S>(const nets::ModelPair<S>&, const Tensor<S>&,           \
                                   const Tensor<S>&, const std::vector<int>&, Rng&,       \
                                   const NoiseSchedule&, bool, S);                        \
    template Tensor<S> sample<S>(const nets::ModelPair<S>&, const Tensor<S>&,             \
                                 const std::vector<int>&, const SamplerConfig&,           \
                                 const NoiseSchedule&, bool);

CPLAB_INSTANTIATE_DIFFUSION(float)
CPLAB_INSTANTIATE_DIFFUSION(double)

}  // namespace cplab::diffusion
