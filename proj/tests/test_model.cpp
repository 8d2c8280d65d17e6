#include <cmath>

#include "cplab/diffusion.hpp"
#include "cplab/gradcheck.hpp"
#include "cplab/nets.hpp"
#include "cplab/optim.hpp"
#include "cplab/rng.hpp"
#include "doctest.h"

using namespace cplab;
using namespace cplab::nets;
using namespace cplab::diffusion;

namespace {

template <typename S>
Tensor<S> randn(Rng& rng, std::vector<int> shape) {
    auto t = Tensor<S>::zeros(std::move(shape));
    for (auto& v : t.data()) v = static_cast<S>(rng.normal());
    return t;
}

NetConfig small_cfg() {
    NetConfig c;
    c.image_size = 16;
    c.width1 = 8;
    c.width2 = 12;
    c.width3 = 16;
    c.emb_dim = 16;
    c.gn_groups = 4;
    c.classes = 4;
    c.t_max = 50;
    return c;
}

}  // namespace

TEST_CASE("untrained backbone produces finite deterministic output") {
    auto cfg = small_cfg();
    ModelPair<float> m(cfg, 99);
    auto z = Tensor<float>::zeros({2, 1, 16, 16});
    std::vector<int> t{1, 25}, labels{0, 3};
    auto y1 = m.denoise_backbone(z, t, labels);
    CHECK(y1.shape() == z.shape());
    for (float v : y1.data()) CHECK(std::isfinite(v));
    auto y2 = m.denoise_backbone(z, t, labels);
    for (std::int64_t i = 0; i < y1.numel(); ++i) CHECK(y1.data()[i] == y2.data()[i]);
}

TEST_CASE("out-of-range timestep and label are rejected") {
    auto cfg = small_cfg();
    ModelPair<float> m(cfg, 1);
    auto z = Tensor<float>::zeros({1, 1, 16, 16});
    CHECK_THROWS(m.denoise_backbone(z, {0}, {0}));
    CHECK_THROWS(m.denoise_backbone(z, {51}, {0}));
    CHECK_THROWS(m.denoise_backbone(z, {1}, {4}));
    CHECK_THROWS(m.denoise_backbone(z, {1}, {-1}));
}

TEST_CASE("conditioning map size mismatch is rejected") {
    auto cfg = small_cfg();
    ModelPair<float> m(cfg, 2);
    auto z = Tensor<float>::zeros({1, 1, 16, 16});
    auto bad = Tensor<float>::zeros({1, 1, 8, 8});
    CHECK_THROWS(m.control_residuals(z, {1}, bad));
}

TEST_CASE("freshly initialized control branch is exactly inert") {
    auto cfg = small_cfg();
    ModelPair<float> m(cfg, 7);
    m.control.init_from(m.backbone);
    Rng rng(5);
    auto z = randn<float>(rng, {2, 1, 16, 16});
    auto cond = randn<float>(rng, {2, 1, 16, 16});
    std::vector<int> t{3, 40}, labels{1, 2};

    auto res = m.control_residuals(z, t, cond);
    for (float v : res.skip32.data()) CHECK(v == 0.0f);
    for (float v : res.skip16.data()) CHECK(v == 0.0f);
    for (float v : res.bottleneck.data()) CHECK(v == 0.0f);

    // zero-init equivalence at several scales, exact equality
    auto base = m.denoise_backbone(z, t, labels);
    for (float s : {0.0f, 0.5f, 1.0f}) {
        auto combined = m.denoise_combined(z, t, labels, cond, s);
        for (std::int64_t i = 0; i < base.numel(); ++i)
            CHECK(combined.data()[i] == base.data()[i]);
    }
}

TEST_CASE("one training step makes residuals live; the frozen backbone digest holds") {
    auto cfg = small_cfg();
    ModelPair<float> m(cfg, 13);
    m.control.init_from(m.backbone);
    m.backbone.set_requires_grad(false);
    m.control.set_requires_grad(true);
    const std::string digest_before = params_digest(m.backbone.named_params());

    Rng rng(31);
    auto x0 = randn<float>(rng, {4, 1, 16, 16});
    auto cond = randn<float>(rng, {4, 1, 16, 16});
    std::vector<int> labels{0, 1, 2, 3};
    auto sched = make_schedule(50, 1e-4, 0.025);

    AdamWConfig ocfg;
    ocfg.lr = 1e-2;
    AdamW<float> opt(m.control.named_params(), ocfg);
    for (int step = 0; step < 2; ++step) {
        Rng lr(derive_seed(77, static_cast<std::uint64_t>(step)));
        auto loss = ldm_loss(m, x0, cond, labels, lr, sched, true);
        CHECK(std::isfinite(loss.item()));
        opt.zero_grad();
        loss.backward();
        opt.step();
    }

    auto res = m.control_residuals(x0, {1, 1, 1, 1}, cond);
    double norm = 0;
    for (float v : res.skip32.data()) norm += static_cast<double>(v) * v;
    for (float v : res.skip16.data()) norm += static_cast<double>(v) * v;
    for (float v : res.bottleneck.data()) norm += static_cast<double>(v) * v;
    CHECK(norm > 0.0);

    CHECK(params_digest(m.backbone.named_params()) == digest_before);

    // with residuals live, scale 0 still reproduces the backbone exactly
    auto base = m.denoise_backbone(x0, {1, 1, 1, 1}, labels);
    auto at0 = m.denoise_combined(x0, {1, 1, 1, 1}, labels, cond, 0.0f);
    for (std::int64_t i = 0; i < base.numel(); ++i) CHECK(at0.data()[i] == base.data()[i]);
}

TEST_CASE("full-model loss gradient matches finite differences on sampled parameters") {
    NetConfig cfg;
    cfg.image_size = 8;
    cfg.width1 = 8;
    cfg.width2 = 12;
    cfg.width3 = 16;
    cfg.emb_dim = 16;
    cfg.gn_groups = 4;
    cfg.t_max = 10;
    ModelPair<double> m(cfg, 21);
    m.control.init_from(m.backbone);
    m.backbone.set_requires_grad(true);
    m.control.set_requires_grad(true);

    Rng rng(55);
    auto x0 = randn<double>(rng, {1, 1, 8, 8});
    auto cond = randn<double>(rng, {1, 1, 8, 8});
    std::vector<int> labels{2};
    auto sched = make_schedule(10, 1e-3, 0.05);

    auto params = m.backbone.named_params();
    auto cparams = m.control.named_params();
    params.insert(params.end(), cparams.begin(), cparams.end());

    // loss with frozen noise/timestep draws so it is a pure function of params
    auto loss_fn = [&](const std::vector<Tensor<double>>&) {
        Rng fixed(4242);
        return ldm_loss(m, x0, cond, labels, fixed, sched, true);
    };

    auto loss = loss_fn({});
    loss.backward();

    Rng pick(808);
    double worst = 0.0;
    int checked = 0;
    while (checked < 20) {
        auto& [name, p] = params[pick.uniform_int(params.size())];
        if (!p.has_grad()) continue;
        const std::int64_t idx = static_cast<std::int64_t>(pick.uniform_int(
            static_cast<std::uint64_t>(p.numel())));
        const double analytic = p.grad()[idx];
        const double h = 1e-5;
        NoGradGuard ng;
        auto vals = p.data();
        const double orig = vals[idx];
        vals[idx] = orig + h;
        const double fp = loss_fn({}).item();
        vals[idx] = orig - h;
        const double fm = loss_fn({}).item();
        vals[idx] = orig;
        const double fd = (fp - fm) / (2 * h);
        const double rel = std::abs(analytic - fd) / std::max({1.0, std::abs(analytic), std::abs(fd)});
        worst = std::max(worst, rel);
        ++checked;
    }
    CHECK(worst < 1e-3);
}

TEST_CASE("noise schedule construction") {
    SUBCASE("single step") {
        auto s = make_schedule(1, 0.1, 0.1);
        CHECK(s.alpha_bar[0] == doctest::Approx(0.9).epsilon(1e-15));
    }
    SUBCASE("two steps multiply down") {
        auto s = make_schedule(2, 0.1, 0.2);
        CHECK(s.alpha_bar[0] == doctest::Approx(0.9).epsilon(1e-15));
        CHECK(s.alpha_bar[1] == doctest::Approx(0.72).epsilon(1e-15));
    }
    SUBCASE("defaults land on the pinned regression constant") {
        auto s = make_schedule(250, 1e-4, 0.025);
        CHECK(s.alpha_bar.back() == doctest::Approx(0.042255055698237599).epsilon(1e-12));
        CHECK(s.alpha_bar.back() < 0.05);
    }
    SUBCASE("alpha_bar is strictly decreasing inside (0,1)") {
        auto s = make_schedule(250, 1e-4, 0.025);
        for (size_t i = 0; i < s.alpha_bar.size(); ++i) {
            CHECK(s.alpha_bar[i] > 0.0);
            CHECK(s.alpha_bar[i] < 1.0);
            if (i) CHECK(s.alpha_bar[i] < s.alpha_bar[i - 1]);
        }
    }
    SUBCASE("regeneration is bit-identical") {
        auto s1 = make_schedule(100, 2e-4, 0.02);
        auto s2 = make_schedule(100, 2e-4, 0.02);
        CHECK(s1.beta == s2.beta);
        CHECK(s1.alpha_bar == s2.alpha_bar);
    }
    SUBCASE("invalid ranges are rejected") {
        CHECK_THROWS(make_schedule(0, 0.1, 0.2));
        CHECK_THROWS(make_schedule(10, 0.0, 0.2));
        CHECK_THROWS(make_schedule(10, 0.3, 0.2));
        CHECK_THROWS(make_schedule(10, 0.1, 1.0));
    }
}

TEST_CASE("q_sample follows the closed form") {
    SUBCASE("abar 0.25 with unit image and zero noise gives 0.5") {
        auto s = make_schedule(1, 0.75, 0.75);
        auto x0 = Tensor<float>::full({1, 1, 2, 2}, 1.0f);
        auto eps = Tensor<float>::zeros({1, 1, 2, 2});
        auto z = q_sample(x0, 1, eps, s);
        for (float v : z.data()) CHECK(v == doctest::Approx(0.5f).epsilon(1e-7));
    }
    SUBCASE("abar near 1 reproduces x0") {
        auto s = make_schedule(1, 1e-12, 1e-12);
        Rng rng(2);
        auto x0 = randn<float>(rng, {1, 1, 3, 3});
        auto eps = randn<float>(rng, {1, 1, 3, 3});
        auto z = q_sample(x0, 1, eps, s);
        for (std::int64_t i = 0; i < z.numel(); ++i)
            CHECK(z.data()[i] == doctest::Approx(x0.data()[i]).epsilon(1e-5));
    }
    SUBCASE("monte-carlo mean and variance match the formula") {
        auto s = make_schedule(250, 1e-4, 0.025);
        const int t = 125;
        const double ab = s.abar(t);
        const int draws = 10000;
        auto x0 = Tensor<double>::full({1, 1, 4, 4}, 0.6);
        std::vector<double> sum(16, 0.0), sumsq(16, 0.0);
        Rng rng(909);
        for (int d = 0; d < draws; ++d) {
            auto eps = randn<double>(rng, {1, 1, 4, 4});
            auto z = q_sample(x0, t, eps, s);
            for (int i = 0; i < 16; ++i) {
                sum[i] += z.data()[i];
                sumsq[i] += z.data()[i] * z.data()[i];
            }
        }
        const double want_mean = std::sqrt(ab) * 0.6;
        const double want_var = 1.0 - ab;
        const double mean_tol = 3.0 * std::sqrt(want_var / draws);
        double pooled_var = 0.0;
        for (int i = 0; i < 16; ++i) {
            const double mean = sum[i] / draws;
            pooled_var += sumsq[i] / draws - mean * mean;
            CHECK(std::abs(mean - want_mean) < mean_tol);
        }
        pooled_var /= 16.0;
        CHECK(std::abs(pooled_var - want_var) / want_var < 0.02);
    }
}

TEST_CASE("ldm_loss") {
    auto cfg = small_cfg();
    ModelPair<float> m(cfg, 3);
    m.control.init_from(m.backbone);
    auto sched = make_schedule(50, 1e-4, 0.025);
    Rng rng(6);
    auto x0 = randn<float>(rng, {8, 1, 16, 16});
    auto cond = Tensor<float>::zeros({8, 1, 16, 16});
    std::vector<int> labels(8, 0);

    SUBCASE("zero predictor gives loss of about 1 per element") {
        for (auto& [name, p] : m.backbone.named_params())
            if (name == "out_conv.weight" || name == "out_conv.bias")
                std::fill(p.data().begin(), p.data().end(), 0.0f);
        Rng lr(1234);
        auto loss = ldm_loss(m, x0, cond, labels, lr, sched, false);
        CHECK(loss.item() == doctest::Approx(1.0).epsilon(0.1));
    }
    SUBCASE("fixed seed and weights give identical losses") {
        Rng l1(55), l2(55);
        auto a = ldm_loss(m, x0, cond, labels, l1, sched, false);
        auto b = ldm_loss(m, x0, cond, labels, l2, sched, false);
        CHECK(a.item() == b.item());
    }
}

TEST_CASE("samplers") {
    auto cfg = small_cfg();
    ModelPair<float> m(cfg, 17);
    m.control.init_from(m.backbone);
    auto sched = make_schedule(50, 1e-4, 0.025);
    auto cond = Tensor<float>::zeros({2, 1, 16, 16});
    std::vector<int> labels{0, 1};

    SUBCASE("deterministic-skip reruns bit-identically") {
        SamplerConfig sc;
        sc.kind = SamplerKind::DeterministicSkip;
        sc.steps = 10;
        sc.seed = 42;
        auto a = sample(m, cond, labels, sc, sched, false);
        auto b = sample(m, cond, labels, sc, sched, false);
        for (std::int64_t i = 0; i < a.numel(); ++i) CHECK(a.data()[i] == b.data()[i]);
        for (float v : a.data()) {
            CHECK(v >= 0.0f);
            CHECK(v <= 1.0f);
        }
    }
    SUBCASE("noise-suppressed ancestral equals full-schedule deterministic-skip") {
        SamplerConfig anc;
        anc.kind = SamplerKind::AncestralStochastic;
        anc.seed = 9;
        anc.eta = 0.0;  // per-step noise suppressed
        SamplerConfig skip;
        skip.kind = SamplerKind::DeterministicSkip;
        skip.steps = sched.T;
        skip.seed = 9;
        auto a = sample(m, cond, labels, anc, sched, false);
        auto b = sample(m, cond, labels, skip, sched, false);
        for (std::int64_t i = 0; i < a.numel(); ++i) CHECK(a.data()[i] == b.data()[i]);
    }
    SUBCASE("ancestral sampling stays finite and in range") {
        SamplerConfig sc;
        sc.kind = SamplerKind::AncestralStochastic;
        sc.seed = 1;
        auto a = sample(m, cond, labels, sc, sched, false);
        for (float v : a.data()) {
            CHECK(std::isfinite(v));
            CHECK(v >= 0.0f);
            CHECK(v <= 1.0f);
        }
    }
    SUBCASE("steps above T are rejected") {
        SamplerConfig sc;
        sc.steps = 51;
        CHECK_THROWS(sample(m, cond, labels, sc, sched, false));
    }
    SUBCASE("skip schedule covers both endpoints") {
        auto taus = skip_schedule(250, 10);
        CHECK(taus.front() == 250);
        CHECK(taus.back() == 1);
        CHECK(taus.size() == 10);
        auto full = skip_schedule(50, 50);
        for (int i = 0; i < 50; ++i) CHECK(full[static_cast<size_t>(i)] == 50 - i);
    }
}
