#include "cplab/gradcheck.hpp"

#include <cmath>

#include "cplab/ops.hpp"
#include "cplab/rng.hpp"

namespace cplab {

GradCheckReport grad_check(
    const std::function<Tensor<double>(const std::vector<Tensor<double>>&)>& loss_fn,
    std::vector<Tensor<double>> inputs, double h,
    const std::vector<std::vector<std::int64_t>>& element_subsets) {
    for (auto& in : inputs) in.set_requires_grad(true);
    auto loss = loss_fn(inputs);
    loss.backward();

    std::vector<std::vector<double>> analytic;
    for (auto& in : inputs) {
        check(in.has_grad(), "grad_check: input received no gradient");
        analytic.emplace_back(in.grad().begin(), in.grad().end());
    }

    GradCheckReport rep;
    double grad_scale = 1.0;
    for (const auto& g : analytic)
        for (double v : g) grad_scale = std::max(grad_scale, std::abs(v));

    NoGradGuard ng;
    for (size_t k = 0; k < inputs.size(); ++k) {
        auto vals = inputs[k].data();
        std::vector<std::int64_t> elems;
        if (k < element_subsets.size() && !element_subsets[k].empty()) {
            elems = element_subsets[k];
        } else {
            elems.resize(static_cast<size_t>(inputs[k].numel()));
            for (size_t i = 0; i < elems.size(); ++i) elems[i] = static_cast<std::int64_t>(i);
        }
        for (std::int64_t i : elems) {
            const double orig = vals[i];
            vals[i] = orig + h;
            const double fp = loss_fn(inputs).item();
            vals[i] = orig - h;
            const double fm = loss_fn(inputs).item();
            vals[i] = orig;
            const double fd = (fp - fm) / (2.0 * h);
            const double denom = std::max({1.0, grad_scale, std::abs(fd)});
            const double rel = std::abs(analytic[k][static_cast<size_t>(i)] - fd) / denom;
            if (rel > rep.max_rel_err) {
                rep.max_rel_err = rel;
                rep.worst_input = cat("input ", k, " elem ", i, " analytic ",
                                      analytic[k][static_cast<size_t>(i)], " fd ", fd);
            }
        }
    }
    return rep;
}

namespace {

Tensor<double> randn(Rng& rng, std::vector<int> shape, double sigma = 1.0) {
    auto t = Tensor<double>::zeros(std::move(shape));
    for (auto& v : t.data()) v = sigma * rng.normal();
    return t;
}

// weighted sum with fixed random coefficients: exercises non-uniform output grads
Tensor<double> rand_readout(Rng& rng, const Tensor<double>& x) {
    auto w = randn(rng, x.shape());
    w.set_requires_grad(false);
    return reduce_sum(mul(x, w));
}

using LossFn = std::function<Tensor<double>(const std::vector<Tensor<double>>&)>;

struct OpCase {
    std::string name;
    // builds (inputs, loss) for one seed
    std::function<std::pair<std::vector<Tensor<double>>, LossFn>(Rng&)> make;
};

std::vector<OpCase> op_cases() {
    std::vector<OpCase> cases;
    auto idim = [](Rng& r, int lo, int hi) {
        return lo + static_cast<int>(r.uniform_int(static_cast<std::uint64_t>(hi - lo + 1)));
    };

    cases.push_back({"add_broadcast", [idim](Rng& r) {
        const int n = idim(r, 1, 3), c = idim(r, 1, 4), h = idim(r, 2, 5), w = idim(r, 2, 5);
        std::vector<Tensor<double>> in{randn(r, {n, c, h, w}), randn(r, {c, 1, 1})};
        Rng r2(r.next_u64());
        LossFn f = [r2](const std::vector<Tensor<double>>& v) mutable {
            Rng rr = r2;
            return rand_readout(rr, add(v[0], v[1]));
        };
        return std::make_pair(std::move(in), std::move(f));
    }});
    cases.push_back({"sub", [idim](Rng& r) {
        const int n = idim(r, 2, 6), m = idim(r, 2, 6);
        std::vector<Tensor<double>> in{randn(r, {n, m}), randn(r, {n, m})};
        Rng r2(r.next_u64());
        LossFn f = [r2](const std::vector<Tensor<double>>& v) mutable {
            Rng rr = r2;
            return rand_readout(rr, sub(v[0], v[1]));
        };
        return std::make_pair(std::move(in), std::move(f));
    }});
    cases.push_back({"mul_broadcast", [idim](Rng& r) {
        const int n = idim(r, 1, 3), c = idim(r, 1, 4), h = idim(r, 2, 5), w = idim(r, 2, 5);
        std::vector<Tensor<double>> in{randn(r, {n, c, h, w}), randn(r, {1, c, 1, w})};
        Rng r2(r.next_u64());
        LossFn f = [r2](const std::vector<Tensor<double>>& v) mutable {
            Rng rr = r2;
            return rand_readout(rr, mul(v[0], v[1]));
        };
        return std::make_pair(std::move(in), std::move(f));
    }});
    cases.push_back({"scale_add_scalar", [idim](Rng& r) {
        std::vector<Tensor<double>> in{randn(r, {idim(r, 2, 8), idim(r, 2, 8)})};
        const double k = r.uniform(-2.0, 2.0), c = r.uniform(-1.0, 1.0);
        Rng r2(r.next_u64());
        LossFn f = [r2, k, c](const std::vector<Tensor<double>>& v) mutable {
            Rng rr = r2;
            return rand_readout(rr, add_scalar(scale(v[0], k), c));
        };
        return std::make_pair(std::move(in), std::move(f));
    }});
    cases.push_back({"silu", [idim](Rng& r) {
        std::vector<Tensor<double>> in{randn(r, {idim(r, 2, 6), idim(r, 2, 6)}, 2.0)};
        Rng r2(r.next_u64());
        LossFn f = [r2](const std::vector<Tensor<double>>& v) mutable {
            Rng rr = r2;
            return rand_readout(rr, silu(v[0]));
        };
        return std::make_pair(std::move(in), std::move(f));
    }});
    cases.push_back({"sigmoid", [idim](Rng& r) {
        std::vector<Tensor<double>> in{randn(r, {idim(r, 2, 6), idim(r, 2, 6)}, 2.0)};
        Rng r2(r.next_u64());
        LossFn f = [r2](const std::vector<Tensor<double>>& v) mutable {
            Rng rr = r2;
            return rand_readout(rr, sigmoid(v[0]));
        };
        return std::make_pair(std::move(in), std::move(f));
    }});
    cases.push_back({"matmul", [idim](Rng& r) {
        const int m = idim(r, 2, 5), k = idim(r, 2, 5), n = idim(r, 2, 5);
        std::vector<Tensor<double>> in{randn(r, {m, k}), randn(r, {k, n})};
        Rng r2(r.next_u64());
        LossFn f = [r2](const std::vector<Tensor<double>>& v) mutable {
            Rng rr = r2;
            return rand_readout(rr, matmul(v[0], v[1]));
        };
        return std::make_pair(std::move(in), std::move(f));
    }});
    cases.push_back({"conv2d", [idim](Rng& r) {
        const int n = idim(r, 1, 2), ci = idim(r, 1, 3), co = idim(r, 1, 3);
        const int h = idim(r, 4, 7), w = idim(r, 4, 7);
        const int k = 1 + 2 * static_cast<int>(r.uniform_int(2));  // 1 or 3
        const int stride = idim(r, 1, 2), pad = static_cast<int>(r.uniform_int(2));
        std::vector<Tensor<double>> in{randn(r, {n, ci, h, w}), randn(r, {co, ci, k, k})};
        Rng r2(r.next_u64());
        LossFn f = [r2, stride, pad](const std::vector<Tensor<double>>& v) mutable {
            Rng rr = r2;
            return rand_readout(rr, conv2d(v[0], v[1], stride, pad));
        };
        return std::make_pair(std::move(in), std::move(f));
    }});
    cases.push_back({"group_norm", [idim](Rng& r) {
        const int groups = idim(r, 1, 2);
        const int c = groups * idim(r, 1, 3);
        const int n = idim(r, 1, 2), h = idim(r, 2, 4), w = idim(r, 2, 4);
        auto gamma = randn(r, {c}, 0.5);
        for (auto& v : gamma.data()) v += 1.0;
        std::vector<Tensor<double>> in{randn(r, {n, c, h, w}), gamma, randn(r, {c}, 0.3)};
        Rng r2(r.next_u64());
        LossFn f = [r2, groups](const std::vector<Tensor<double>>& v) mutable {
            Rng rr = r2;
            return rand_readout(rr, group_norm(v[0], v[1], v[2], groups));
        };
        return std::make_pair(std::move(in), std::move(f));
    }});
    cases.push_back({"avg_pool2d", [idim](Rng& r) {
        const int k = idim(r, 1, 2) * 2;  // 2 or 4
        const int n = idim(r, 1, 2), c = idim(r, 1, 3);
        const int h = k * idim(r, 1, 2), w = k * idim(r, 1, 2);
        std::vector<Tensor<double>> in{randn(r, {n, c, h, w})};
        Rng r2(r.next_u64());
        LossFn f = [r2, k](const std::vector<Tensor<double>>& v) mutable {
            Rng rr = r2;
            return rand_readout(rr, avg_pool2d(v[0], k));
        };
        return std::make_pair(std::move(in), std::move(f));
    }});
    cases.push_back({"upsample_nearest2x", [idim](Rng& r) {
        std::vector<Tensor<double>> in{
            randn(r, {idim(r, 1, 2), idim(r, 1, 3), idim(r, 2, 4), idim(r, 2, 4)})};
        Rng r2(r.next_u64());
        LossFn f = [r2](const std::vector<Tensor<double>>& v) mutable {
            Rng rr = r2;
            return rand_readout(rr, upsample_nearest2x(v[0]));
        };
        return std::make_pair(std::move(in), std::move(f));
    }});
    cases.push_back({"concat_narrow", [idim](Rng& r) {
        const int n = idim(r, 1, 2), c1 = idim(r, 1, 3), c2 = idim(r, 1, 3);
        const int h = idim(r, 2, 4), w = idim(r, 2, 4);
        std::vector<Tensor<double>> in{randn(r, {n, c1, h, w}), randn(r, {n, c2, h, w})};
        Rng r2(r.next_u64());
        LossFn f = [r2, c1](const std::vector<Tensor<double>>& v) mutable {
            Rng rr = r2;
            auto cc = concat(v[0], v[1], 1);
            return rand_readout(rr, narrow(cc, 1, c1 > 1 ? 1 : 0, cc.dim(1) - 1));
        };
        return std::make_pair(std::move(in), std::move(f));
    }});
    cases.push_back({"reshape_broadcast_to", [idim](Rng& r) {
        const int a = idim(r, 2, 4), b = idim(r, 2, 4);
        std::vector<Tensor<double>> in{randn(r, {a, b})};
        Rng r2(r.next_u64());
        LossFn f = [r2, a, b](const std::vector<Tensor<double>>& v) mutable {
            Rng rr = r2;
            auto rs = reshape(v[0], {a, b, 1});
            return rand_readout(rr, broadcast_to(rs, {a, b, 3}));
        };
        return std::make_pair(std::move(in), std::move(f));
    }});
    cases.push_back({"embedding", [idim](Rng& r) {
        const int vocab = idim(r, 3, 6), d = idim(r, 2, 5), n = idim(r, 2, 6);
        std::vector<int> ids(static_cast<size_t>(n));
        for (auto& id : ids) id = static_cast<int>(r.uniform_int(static_cast<std::uint64_t>(vocab)));
        std::vector<Tensor<double>> in{randn(r, {vocab, d})};
        Rng r2(r.next_u64());
        LossFn f = [r2, ids](const std::vector<Tensor<double>>& v) mutable {
            Rng rr = r2;
            return rand_readout(rr, embedding(v[0], ids));
        };
        return std::make_pair(std::move(in), std::move(f));
    }});
    cases.push_back({"reduce_sum_mean", [idim](Rng& r) {
        std::vector<Tensor<double>> in{randn(r, {idim(r, 2, 5), idim(r, 2, 5)})};
        LossFn f = [](const std::vector<Tensor<double>>& v) {
            return add(reduce_sum(v[0]), reduce_mean(v[0]));
        };
        return std::make_pair(std::move(in), std::move(f));
    }});
    cases.push_back({"mse_loss", [idim](Rng& r) {
        const int n = idim(r, 2, 5), m = idim(r, 2, 5);
        std::vector<Tensor<double>> in{randn(r, {n, m}), randn(r, {n, m})};
        LossFn f = [](const std::vector<Tensor<double>>& v) { return mse_loss(v[0], v[1]); };
        return std::make_pair(std::move(in), std::move(f));
    }});
    cases.push_back({"bce_with_logits", [idim](Rng& r) {
        const int n = idim(r, 2, 6);
        auto y = Tensor<double>::zeros({n});
        for (auto& v : y.data()) v = r.uniform();
        std::vector<Tensor<double>> in{randn(r, {n}, 2.0), y};
        LossFn f = [](const std::vector<Tensor<double>>& v) {
            return bce_with_logits_loss(v[0], v[1]);
        };
        return std::make_pair(std::move(in), std::move(f));
    }});
    return cases;
}

}  // namespace

std::vector<VerifyCheck> op_gradient_suite(int seeds, double tol) {
    std::vector<VerifyCheck> out;
    for (const auto& c : op_cases()) {
        double worst = 0.0;
        std::string detail;
        for (int s = 0; s < seeds; ++s) {
            Rng rng(derive_seed(0xC0FFEE, static_cast<std::uint64_t>(s)));
            auto [inputs, loss_fn] = c.make(rng);
            auto rep = grad_check(loss_fn, std::move(inputs));
            if (rep.max_rel_err > worst) {
                worst = rep.max_rel_err;
                detail = cat("seed ", s, ": ", rep.worst_input);
            }
        }
        out.push_back({cat("grad/", c.name), worst < tol,
                       worst < tol ? cat("max_rel_err ", worst)
                                   : cat("max_rel_err ", worst, " | ", detail)});
    }
    return out;
}

}  // namespace cplab
