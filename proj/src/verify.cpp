#include "cplab/verify.hpp"

#include <cmath>

#include "cplab/diffusion.hpp"
#include "cplab/nets.hpp"
#include "cplab/optim.hpp"
#include "cplab/rng.hpp"

namespace cplab::verify {

double reference_ssim(const img::Image& a, const img::Image& b) {
    // direct per-window evaluation: 11x11 Gaussian mask, sigma 1.5,
    // population statistics, averaged over fully-contained windows
    const img::Image la = img::luminance(a), lb = img::luminance(b);
    const int h = la.height, w = la.width;
    constexpr int kRad = 5;
    double mask[11][11];
    double msum = 0;
    for (int i = -kRad; i <= kRad; ++i)
        for (int j = -kRad; j <= kRad; ++j) {
            mask[i + kRad][j + kRad] = std::exp(-0.5 * (i * i + j * j) / (1.5 * 1.5));
            msum += mask[i + kRad][j + kRad];
        }
    for (auto& row : mask)
        for (double& v : row) v /= msum;

    constexpr double c1 = 1e-4, c2 = 9e-4;
    double acc = 0;
    int count = 0;
    for (int y = kRad; y < h - kRad; ++y)
        for (int x = kRad; x < w - kRad; ++x) {
            double mu_a = 0, mu_b = 0, saa = 0, sbb = 0, sab = 0;
            for (int i = -kRad; i <= kRad; ++i)
                for (int j = -kRad; j <= kRad; ++j) {
                    const double wt = mask[i + kRad][j + kRad];
                    const double va = la.at(y + i, x + j);
                    const double vb = lb.at(y + i, x + j);
                    mu_a += wt * va;
                    mu_b += wt * vb;
                    saa += wt * va * va;
                    sbb += wt * vb * vb;
                    sab += wt * va * vb;
                }
            const double var_a = saa - mu_a * mu_a;
            const double var_b = sbb - mu_b * mu_b;
            const double cov = sab - mu_a * mu_b;
            acc += ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) /
                   ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
            ++count;
        }
    return acc / count;
}

namespace {

img::Image random_image(Rng& rng, int h, int w) {
    img::Image x(h, w, 1);
    for (auto& v : x.values) v = static_cast<float>(rng.uniform());
    return x;
}

VerifyCheck full_model_grad_check() {
    nets::NetConfig cfg;
    cfg.image_size = 8;
    cfg.width1 = 8;
    cfg.width2 = 12;
    cfg.width3 = 16;
    cfg.emb_dim = 16;
    cfg.gn_groups = 4;
    cfg.t_max = 10;
    nets::ModelPair<double> m(cfg, 2024);
    m.control.init_from(m.backbone);
    m.backbone.set_requires_grad(true);
    m.control.set_requires_grad(true);

    Rng rng(99);
    auto x0 = Tensor<double>::zeros({1, 1, 8, 8});
    for (auto& v : x0.data()) v = rng.normal();
    auto cond = Tensor<double>::zeros({1, 1, 8, 8});
    for (auto& v : cond.data()) v = rng.uniform() > 0.7 ? 1.0 : 0.0;
    const std::vector<int> labels{1};
    const auto sched = diffusion::make_schedule(10, 1e-3, 0.05);

    auto loss_fn = [&] {
        Rng fixed(31337);
        return diffusion::ldm_loss(m, x0, cond, labels, fixed, sched, true);
    };
    auto loss = loss_fn();
    loss.backward();

    auto params = m.backbone.named_params();
    auto cparams = m.control.named_params();
    params.insert(params.end(), cparams.begin(), cparams.end());

    Rng pick(4040);
    double worst = 0;
    std::string worst_at;
    int checked = 0;
    while (checked < 20) {
        auto& [name, p] = params[pick.uniform_int(params.size())];
        if (!p.has_grad()) continue;
        const auto idx = static_cast<std::int64_t>(
            pick.uniform_int(static_cast<std::uint64_t>(p.numel())));
        const double analytic = p.grad()[idx];
        NoGradGuard ng;
        auto vals = p.data();
        const double orig = vals[idx];
        const double h = 1e-5;
        vals[idx] = orig + h;
        const double fp = loss_fn().item();
        vals[idx] = orig - h;
        const double fm = loss_fn().item();
        vals[idx] = orig;
        const double fd = (fp - fm) / (2 * h);
        const double rel =
            std::abs(analytic - fd) / std::max({1.0, std::abs(analytic), std::abs(fd)});
        if (rel > worst) {
            worst = rel;
            worst_at = name;
        }
        ++checked;
    }
    return {"grad/full_model_spot_check", worst < 1e-3,
            cat("max_rel_err ", worst, " (worst at ", worst_at, ")")};
}

VerifyCheck schedule_checks() {
    const auto s = diffusion::make_schedule(250, 1e-4, 0.025);
    bool ok = s.alpha_bar.back() < 0.05;
    ok = ok && std::abs(s.alpha_bar.back() - 0.042255055698237599) < 1e-12;
    for (size_t i = 0; i < s.alpha_bar.size() && ok; ++i) {
        ok = s.alpha_bar[i] > 0.0 && s.alpha_bar[i] < 1.0;
        if (i) ok = ok && s.alpha_bar[i] < s.alpha_bar[i - 1];
    }
    const auto s2 = diffusion::make_schedule(250, 1e-4, 0.025);
    ok = ok && s.alpha_bar == s2.alpha_bar && s.beta == s2.beta;
    return {"schedule/tables", ok, cat("alpha_bar_T ", s.alpha_bar.back())};
}

VerifyCheck q_sample_statistics() {
    const auto s = diffusion::make_schedule(250, 1e-4, 0.025);
    bool ok = true;
    std::string detail;
    for (int t : {62, 125, 250}) {
        const double ab = s.abar(t);
        const int draws = 10000;
        auto x0 = Tensor<double>::full({1, 1, 4, 4}, 0.6);
        std::vector<double> sum(16, 0), sumsq(16, 0);
        Rng rng(derive_seed(0x95A7, static_cast<std::uint64_t>(t)));
        for (int d = 0; d < draws; ++d) {
            auto eps = Tensor<double>::zeros({1, 1, 4, 4});
            for (auto& v : eps.data()) v = rng.normal();
            auto z = diffusion::q_sample(x0, t, eps, s);
            for (int i = 0; i < 16; ++i) {
                sum[i] += z.data()[i];
                sumsq[i] += z.data()[i] * z.data()[i];
            }
        }
        const double want_mean = std::sqrt(ab) * 0.6;
        const double want_var = 1.0 - ab;
        double pooled = 0;
        for (int i = 0; i < 16; ++i) {
            const double mean = sum[i] / draws;
            pooled += sumsq[i] / draws - mean * mean;
            if (std::abs(mean - want_mean) >= 3.0 * std::sqrt(want_var / draws)) ok = false;
        }
        pooled /= 16.0;
        const double var_err = std::abs(pooled - want_var) / want_var;
        if (var_err >= 0.02) ok = false;
        detail += cat("t=", t, " var_err ", var_err, "; ");
    }
    return {"diffusion/q_sample_statistics", ok, detail};
}

VerifyCheck zero_init_equivalence() {
    nets::NetConfig cfg;
    cfg.image_size = 16;
    cfg.width1 = 8;
    cfg.width2 = 12;
    cfg.width3 = 16;
    cfg.emb_dim = 16;
    cfg.gn_groups = 4;
    cfg.t_max = 50;
    nets::ModelPair<float> m(cfg, 555);
    m.control.init_from(m.backbone);

    Rng rng(808);
    bool ok = true;
    constexpr int kBatch = 20;
    for (int rep = 0; rep < 5 && ok; ++rep) {  // 5 x 20 = 100 random inputs
        auto z = Tensor<float>::zeros({kBatch, 1, 16, 16});
        for (auto& v : z.data()) v = static_cast<float>(rng.normal());
        auto cond = Tensor<float>::zeros({kBatch, 1, 16, 16});
        for (auto& v : cond.data()) v = rng.uniform() > 0.5f ? 1.0f : 0.0f;
        std::vector<int> t(kBatch), labels(kBatch);
        for (int i = 0; i < kBatch; ++i) {
            t[static_cast<size_t>(i)] = 1 + static_cast<int>(rng.uniform_int(50));
            labels[static_cast<size_t>(i)] = static_cast<int>(rng.uniform_int(4));
        }
        const auto base = m.denoise_backbone(z, t, labels);
        for (float s : {0.0f, 0.5f, 1.0f}) {
            const auto combined = m.denoise_combined(z, t, labels, cond, s);
            for (std::int64_t i = 0; i < base.numel(); ++i)
                if (combined.data()[i] != base.data()[i]) {
                    ok = false;
                    break;
                }
        }
    }
    return {"nets/zero_init_equivalence", ok, "100 inputs x scales {0, 0.5, 1.0}, exact"};
}

VerifyCheck metric_identities() {
    Rng rng(6161);
    bool ok = true;
    std::string detail;
    double worst_ssim_gap = 0;
    for (int rep = 0; rep < 50; ++rep) {
        const auto a = random_image(rng, 16, 16);
        const auto b = random_image(rng, 16, 16);
        const double gap = std::abs(img::ssim(a, b) - reference_ssim(a, b));
        worst_ssim_gap = std::max(worst_ssim_gap, gap);
        if (gap >= 1e-6) ok = false;
        const double m = img::mse(a, b);
        if (m > 0 && img::psnr(a, b) != 10.0 * std::log10(1.0 / m)) ok = false;
    }
    const auto x = random_image(rng, 16, 16);
    if (std::abs(img::ssim(x, x) - 1.0) > 1e-9) ok = false;
    if (img::mse(x, x) != 0.0) ok = false;
    if (!std::isinf(img::psnr(x, x))) ok = false;
    detail = cat("worst |ssim - reference| ", worst_ssim_gap);
    return {"imaging/metric_identities", ok, detail};
}

VerifyCheck adamw_decay_contract() {
    auto w = Tensor<float>::full({4}, 0.5f);
    w.set_requires_grad(true);
    w.accumulate_grad(std::vector<float>(4, 0.0f));
    AdamWConfig cfg;
    cfg.lr = 1e-4;
    cfg.weight_decay = 1e-2;
    AdamW<float> opt({{"w", w}}, cfg);
    opt.step();
    const float expect = 0.5f * static_cast<float>(1.0 - 1e-4 * 1e-2);
    bool ok = true;
    for (float v : w.data()) ok = ok && v == expect;
    return {"optim/adamw_zero_grad_decay", ok, "w' == w * (1 - lr*wd) exactly"};
}

VerifyCheck backward_linearity() {
    Rng rng(99);
    bool ok = true;
    for (int rep = 0; rep < 5; ++rep) {
        auto w = Tensor<double>::zeros({8});
        for (auto& v : w.data()) v = rng.normal();
        w.set_requires_grad(true);
        auto l1 = [&] { return reduce_sum(mul(w, w)); };
        auto l2 = [&] { return reduce_mean(silu(w)); };
        add(l1(), l2()).backward();
        std::vector<double> combined(w.grad().begin(), w.grad().end());
        w.zero_grad();
        l1().backward();
        std::vector<double> g1(w.grad().begin(), w.grad().end());
        w.zero_grad();
        l2().backward();
        for (size_t i = 0; i < combined.size(); ++i)
            ok = ok && combined[i] == g1[i] + w.grad()[i];
        w.zero_grad();
    }
    return {"grad/backward_linearity", ok, "grad(l1+l2) == grad(l1)+grad(l2), 64-bit exact"};
}

VerifyCheck edge_invariance() {
    Rng rng(2468);
    bool ok = true;
    for (int rep = 0; rep < 3; ++rep) {
        img::Image x(24, 24, 1, 0.05f);
        for (int b = 0; b < 3; ++b) {
            const int cy = 4 + static_cast<int>(rng.uniform_int(16));
            const int cx = 4 + static_cast<int>(rng.uniform_int(16));
            const int r = 2 + static_cast<int>(rng.uniform_int(4));
            const float v = 0.6f + 0.4f * static_cast<float>(rng.uniform());
            for (int y = 0; y < 24; ++y)
                for (int xx = 0; xx < 24; ++xx)
                    if ((y - cy) * (y - cy) + (xx - cx) * (xx - cx) <= r * r) x.at(y, xx) = v;
        }
        img::Image scaled = x;
        for (auto& v : scaled.values) v = 0.5f * v + 0.25f;
        const auto e1 = img::edge_map(x);
        const auto e2 = img::edge_map(scaled);
        for (size_t i = 0; i < e1.size(); ++i) ok = ok && e1.values[i] == e2.values[i];
        for (float v : e1.values) ok = ok && (v == 0.0f || v == 1.0f);
    }
    return {"imaging/edge_affine_invariance", ok, "binary output, brightness-invariant"};
}

VerifyCheck trigger_confinement() {
    Rng rng(1357);
    bool ok = true;
    img::TriggerPatch patch;
    patch.glyph = img::default_trigger_glyph();
    for (int rep = 0; rep < 5; ++rep) {
        const auto x = random_image(rng, 32, 32);
        patch.strength = rng.uniform(0.1, 1.0);
        const auto y = img::composite_trigger(x, patch);
        const auto region = img::patch_region(patch, 32, 32);
        for (int yy = 0; yy < 32; ++yy)
            for (int xx = 0; xx < 32; ++xx)
                if (!region.contains(yy, xx)) ok = ok && y.at(yy, xx) == x.at(yy, xx);
    }
    return {"imaging/trigger_outside_noop", ok, "exact pixel equality outside the region"};
}

VerifyCheck forward_determinism() {
    Rng rng(11);
    auto x = Tensor<float>::zeros({2, 3, 10, 10});
    for (auto& v : x.data()) v = static_cast<float>(rng.normal());
    auto w = Tensor<float>::zeros({4, 3, 3, 3});
    for (auto& v : w.data()) v = static_cast<float>(rng.normal());
    auto y1 = conv2d(x, w, 1, 1);
    auto y2 = conv2d(x, w, 1, 1);
    bool ok = true;
    for (std::int64_t i = 0; i < y1.numel(); ++i) ok = ok && y1.data()[i] == y2.data()[i];
    return {"ops/forward_determinism", ok, "bit-identical repeat evaluation"};
}

}  // namespace

std::vector<VerifyCheck> run_all(int grad_seeds) {
    std::vector<VerifyCheck> out = op_gradient_suite(grad_seeds);
    out.push_back(full_model_grad_check());
    out.push_back(backward_linearity());
    out.push_back(adamw_decay_contract());
    out.push_back(forward_determinism());
    out.push_back(schedule_checks());
    out.push_back(q_sample_statistics());
    out.push_back(zero_init_equivalence());
    out.push_back(metric_identities());
    out.push_back(edge_invariance());
    out.push_back(trigger_confinement());
    return out;
}

}  // namespace cplab::verify
