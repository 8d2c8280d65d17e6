#include "cplab/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace cplab {

namespace {

// Right-aligned broadcast result shape, or failure naming the op.
std::vector<int> broadcast_shape(const char* op, const std::vector<int>& a,
                                 const std::vector<int>& b) {
    const size_t r = std::max(a.size(), b.size());
    std::vector<int> out(r);
    for (size_t i = 0; i < r; ++i) {
        const int ea = i < r - a.size() ? 1 : a[i - (r - a.size())];
        const int eb = i < r - b.size() ? 1 : b[i - (r - b.size())];
        if (ea != eb && ea != 1 && eb != 1)
            fail(op, ": shapes ", shape_str(a), " and ", shape_str(b), " are not broadcastable");
        out[i] = std::max(ea, eb);
    }
    return out;
}

// Strides of `in` aligned into `out` (0 where `in` is broadcast).
std::vector<std::int64_t> broadcast_strides(const std::vector<int>& in,
                                            const std::vector<int>& out) {
    std::vector<std::int64_t> st(out.size(), 0);
    std::int64_t acc = 1;
    for (size_t i = 0; i < in.size(); ++i) {
        const size_t j = in.size() - 1 - i;
        const size_t k = out.size() - 1 - i;
        st[k] = (in[j] == 1 && out[k] != 1) ? 0 : acc;
        acc *= in[j];
    }
    return st;
}

// Odometer walk over `shape`, calling fn(flat_out, off_a, off_b).
template <typename Fn>
void for_each_bcast2(const std::vector<int>& shape, const std::vector<std::int64_t>& sa,
                     const std::vector<std::int64_t>& sb, Fn&& fn) {
    const size_t r = shape.size();
    std::int64_t n = 1;
    for (int e : shape) n *= e;
    std::vector<int> idx(r, 0);
    std::int64_t oa = 0, ob = 0;
    for (std::int64_t i = 0; i < n; ++i) {
        fn(i, oa, ob);
        for (size_t dp = 0; dp < r; ++dp) {
            const size_t d = r - 1 - dp;
            oa += sa[d];
            ob += sb[d];
            if (++idx[d] < shape[d]) break;
            oa -= sa[d] * shape[d];
            ob -= sb[d] * shape[d];
            idx[d] = 0;
        }
    }
}

// Reduces `g` (laid out as `from`) back onto a tensor of shape `to`.
template <typename S>
std::vector<S> sum_to(std::span<const S> g, const std::vector<int>& from,
                      const std::vector<int>& to) {
    std::int64_t n_to = 1;
    for (int e : to) n_to *= e;
    std::vector<S> out(static_cast<size_t>(n_to), S(0));
    const auto st = broadcast_strides(to, from);
    const std::vector<std::int64_t> szero(from.size(), 0);
    for_each_bcast2(from, st, szero,
                    [&](std::int64_t i, std::int64_t ot, std::int64_t) { out[ot] += g[i]; });
    return out;
}

template <typename S, typename FwdFn, typename GradFn>
Tensor<S> binary_bcast(const char* op, const Tensor<S>& a, const Tensor<S>& b, FwdFn fwd,
                       GradFn grads) {
    const auto oshape = broadcast_shape(op, a.shape(), b.shape());
    auto out = Tensor<S>::zeros(oshape);
    const auto sa = broadcast_strides(a.shape(), oshape);
    const auto sb = broadcast_strides(b.shape(), oshape);
    auto ad = a.data();
    auto bd = b.data();
    auto od = out.data();
    if (oshape == a.shape() && oshape == b.shape()) {
        for (std::int64_t i = 0; i < out.numel(); ++i) od[i] = fwd(ad[i], bd[i]);
    } else {
        for_each_bcast2(oshape, sa, sb, [&](std::int64_t i, std::int64_t oa, std::int64_t ob) {
            od[i] = fwd(ad[oa], bd[ob]);
        });
    }
    if (grad_enabled() && (a.needs_grad() || b.needs_grad())) {
        Tensor<S> ac = a, bc = b;
        out.record({a, b}, [ac, bc, oshape, sa, sb, grads](detail::TensorImpl<S>& self) mutable {
            std::span<const S> go{self.grad.data(), self.grad.size()};
            std::vector<S> ga, gb;
            if (ac.needs_grad()) ga.assign(static_cast<size_t>(go.size()), S(0));
            if (bc.needs_grad()) gb.assign(static_cast<size_t>(go.size()), S(0));
            auto ad2 = ac.data();
            auto bd2 = bc.data();
            for_each_bcast2(oshape, sa, sb, [&](std::int64_t i, std::int64_t oa, std::int64_t ob) {
                auto [da, db] = grads(ad2[oa], bd2[ob], go[i]);
                if (!ga.empty()) ga[i] = da;
                if (!gb.empty()) gb[i] = db;
            });
            if (!ga.empty()) {
                auto r = sum_to<S>(ga, self.shape, ac.shape());
                ac.accumulate_grad(r);
            }
            if (!gb.empty()) {
                auto r = sum_to<S>(gb, self.shape, bc.shape());
                bc.accumulate_grad(r);
            }
        });
    }
    return out;
}

template <typename S, typename FwdFn, typename GradFn>
Tensor<S> unary_op(const Tensor<S>& x, FwdFn fwd, GradFn dfdx) {
    auto out = Tensor<S>::zeros(x.shape());
    auto xd = x.data();
    auto od = out.data();
    for (std::int64_t i = 0; i < out.numel(); ++i) od[i] = fwd(xd[i]);
    if (grad_enabled() && x.needs_grad()) {
        Tensor<S> xc = x;
        out.record({x}, [xc, dfdx](detail::TensorImpl<S>& self) mutable {
            auto xd2 = xc.data();
            std::vector<S> gx(xd2.size());
            for (size_t i = 0; i < gx.size(); ++i) gx[i] = dfdx(xd2[i]) * self.grad[i];
            xc.accumulate_grad(gx);
        });
    }
    return out;
}

template <typename S>
S sigmoid_val(S x) {
    return x >= S(0) ? S(1) / (S(1) + std::exp(-x)) : std::exp(x) / (S(1) + std::exp(x));
}

}  // namespace

template <typename S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
    return binary_bcast<S>(
        "add", a, b, [](S x, S y) { return x + y; },
        [](S, S, S go) { return std::pair<S, S>{go, go}; });
}

template <typename S>
Tensor<S> sub(const Tensor<S>& a, const Tensor<S>& b) {
    return binary_bcast<S>(
        "sub", a, b, [](S x, S y) { return x - y; },
        [](S, S, S go) { return std::pair<S, S>{go, -go}; });
}

template <typename S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b) {
    return binary_bcast<S>(
        "mul", a, b, [](S x, S y) { return x * y; },
        [](S x, S y, S go) { return std::pair<S, S>{go * y, go * x}; });
}

template <typename S>
Tensor<S> scale(const Tensor<S>& x, S k) {
    return unary_op<S>(
        x, [k](S v) { return k * v; }, [k](S) { return k; });
}

template <typename S>
Tensor<S> add_scalar(const Tensor<S>& x, S c) {
    return unary_op<S>(
        x, [c](S v) { return v + c; }, [](S) { return S(1); });
}

template <typename S>
Tensor<S> silu(const Tensor<S>& x) {
    return unary_op<S>(
        x, [](S v) { return v * sigmoid_val(v); },
        [](S v) {
            const S s = sigmoid_val(v);
            return s * (S(1) + v * (S(1) - s));
        });
}

template <typename S>
Tensor<S> sigmoid(const Tensor<S>& x) {
    return unary_op<S>(
        x, [](S v) { return sigmoid_val(v); },
        [](S v) {
            const S s = sigmoid_val(v);
            return s * (S(1) - s);
        });
}

template <typename S>
Tensor<S> reshape(const Tensor<S>& x, std::vector<int> shape) {
    std::int64_t n = 1;
    for (int e : shape) n *= e;
    check(n == x.numel(), "reshape: cannot view ", shape_str(x.shape()), " as ",
          shape_str(shape));
    auto out = Tensor<S>::from_data(std::move(shape),
                                    std::vector<S>(x.data().begin(), x.data().end()));
    if (grad_enabled() && x.needs_grad()) {
        Tensor<S> xc = x;
        out.record({x}, [xc](detail::TensorImpl<S>& self) mutable {
            xc.accumulate_grad(self.grad);
        });
    }
    return out;
}

template <typename S>
Tensor<S> broadcast_to(const Tensor<S>& x, const std::vector<int>& shape) {
    const auto joint = broadcast_shape("broadcast_to", x.shape(), shape);
    check(joint == shape, "broadcast_to: ", shape_str(x.shape()), " does not broadcast to ",
          shape_str(shape));
    auto out = Tensor<S>::zeros(shape);
    const auto sx = broadcast_strides(x.shape(), shape);
    const std::vector<std::int64_t> z(shape.size(), 0);
    auto xd = x.data();
    auto od = out.data();
    for_each_bcast2(shape, sx, z,
                    [&](std::int64_t i, std::int64_t ox, std::int64_t) { od[i] = xd[ox]; });
    if (grad_enabled() && x.needs_grad()) {
        Tensor<S> xc = x;
        out.record({x}, [xc](detail::TensorImpl<S>& self) mutable {
            auto r = sum_to<S>({self.grad.data(), self.grad.size()}, self.shape, xc.shape());
            xc.accumulate_grad(r);
        });
    }
    return out;
}

namespace {

// outer/inner block extents around `dim`
std::pair<std::int64_t, std::int64_t> block_sizes(const std::vector<int>& shape, int dim) {
    std::int64_t outer = 1, inner = 1;
    for (int i = 0; i < dim; ++i) outer *= shape[static_cast<size_t>(i)];
    for (size_t i = static_cast<size_t>(dim) + 1; i < shape.size(); ++i) inner *= shape[i];
    return {outer, inner};
}

}  // namespace

template <typename S>
Tensor<S> concat(const Tensor<S>& a, const Tensor<S>& b, int dim) {
    check(a.rank() == b.rank() && dim >= 0 && dim < a.rank(), "concat: rank mismatch ",
          shape_str(a.shape()), " vs ", shape_str(b.shape()));
    for (int i = 0; i < a.rank(); ++i)
        check(i == dim || a.dim(i) == b.dim(i), "concat: shapes ", shape_str(a.shape()), " and ",
              shape_str(b.shape()), " differ outside dim ", dim);
    auto shape = a.shape();
    shape[static_cast<size_t>(dim)] += b.dim(dim);
    auto out = Tensor<S>::zeros(shape);
    const auto [outer, inner] = block_sizes(shape, dim);
    const std::int64_t na = a.dim(dim) * inner, nb = b.dim(dim) * inner;
    auto ad = a.data();
    auto bd = b.data();
    auto od = out.data();
    for (std::int64_t o = 0; o < outer; ++o) {
        std::copy_n(ad.data() + o * na, na, od.data() + o * (na + nb));
        std::copy_n(bd.data() + o * nb, nb, od.data() + o * (na + nb) + na);
    }
    if (grad_enabled() && (a.needs_grad() || b.needs_grad())) {
        Tensor<S> ac = a, bc = b;
        out.record({a, b}, [ac, bc, outer, na, nb](detail::TensorImpl<S>& self) mutable {
            if (ac.needs_grad()) {
                std::vector<S> ga(static_cast<size_t>(outer * na));
                for (std::int64_t o = 0; o < outer; ++o)
                    std::copy_n(self.grad.data() + o * (na + nb), na, ga.data() + o * na);
                ac.accumulate_grad(ga);
            }
            if (bc.needs_grad()) {
                std::vector<S> gb(static_cast<size_t>(outer * nb));
                for (std::int64_t o = 0; o < outer; ++o)
                    std::copy_n(self.grad.data() + o * (na + nb) + na, nb, gb.data() + o * nb);
                bc.accumulate_grad(gb);
            }
        });
    }
    return out;
}

template <typename S>
Tensor<S> narrow(const Tensor<S>& x, int dim, int start, int len) {
    check(dim >= 0 && dim < x.rank() && start >= 0 && len > 0 && start + len <= x.dim(dim),
          "narrow: slice [", start, ",", start + len, ") of dim ", dim, " invalid for ",
          shape_str(x.shape()));
    auto shape = x.shape();
    shape[static_cast<size_t>(dim)] = len;
    auto out = Tensor<S>::zeros(shape);
    const auto [outer, inner] = block_sizes(x.shape(), dim);
    const std::int64_t stride_in = x.dim(dim) * inner, stride_out = len * inner;
    auto xd = x.data();
    auto od = out.data();
    for (std::int64_t o = 0; o < outer; ++o)
        std::copy_n(xd.data() + o * stride_in + start * inner, stride_out,
                    od.data() + o * stride_out);
    if (grad_enabled() && x.needs_grad()) {
        Tensor<S> xc = x;
        const std::int64_t off = start * inner;
        out.record({x}, [xc, outer, stride_in, stride_out, off](detail::TensorImpl<S>& self) mutable {
            std::vector<S> gx(static_cast<size_t>(xc.numel()), S(0));
            for (std::int64_t o = 0; o < outer; ++o)
                std::copy_n(self.grad.data() + o * stride_out, stride_out,
                            gx.data() + o * stride_in + off);
            xc.accumulate_grad(gx);
        });
    }
    return out;
}

template <typename S>
Tensor<S> embedding(const Tensor<S>& table, const std::vector<int>& ids) {
    check(table.rank() == 2, "embedding: table must be 2-D, got ", shape_str(table.shape()));
    const int v = table.dim(0), d = table.dim(1);
    for (int id : ids)
        check(id >= 0 && id < v, "embedding: id ", id, " out of range [0,", v, ")");
    auto out = Tensor<S>::zeros({static_cast<int>(ids.size()), d});
    auto td = table.data();
    auto od = out.data();
    for (size_t i = 0; i < ids.size(); ++i)
        std::copy_n(td.data() + static_cast<std::int64_t>(ids[i]) * d, d, od.data() + i * d);
    if (grad_enabled() && table.needs_grad()) {
        Tensor<S> tc = table;
        out.record({table}, [tc, ids, d](detail::TensorImpl<S>& self) mutable {
            std::vector<S> gt(static_cast<size_t>(tc.numel()), S(0));
            for (size_t i = 0; i < ids.size(); ++i)
                for (int j = 0; j < d; ++j)
                    gt[static_cast<size_t>(ids[i]) * d + j] += self.grad[i * d + j];
            tc.accumulate_grad(gt);
        });
    }
    return out;
}

template <typename S>
Tensor<S> avg_pool2d(const Tensor<S>& x, int k) {
    check(x.rank() == 4, "avg_pool2d: input must be 4-D, got ", shape_str(x.shape()));
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    check(k > 0 && h % k == 0 && w % k == 0, "avg_pool2d: kernel ", k,
          " must divide spatial dims of ", shape_str(x.shape()));
    const int ho = h / k, wo = w / k;
    auto out = Tensor<S>::zeros({n, c, ho, wo});
    auto xd = x.data();
    auto od = out.data();
    const S inv = S(1) / (S(k) * S(k));
    for (std::int64_t nc = 0; nc < static_cast<std::int64_t>(n) * c; ++nc) {
        const S* src = xd.data() + nc * h * w;
        S* dst = od.data() + nc * ho * wo;
        for (int i = 0; i < ho; ++i)
            for (int j = 0; j < wo; ++j) {
                S s = 0;
                for (int di = 0; di < k; ++di)
                    for (int dj = 0; dj < k; ++dj) s += src[(i * k + di) * w + j * k + dj];
                dst[i * wo + j] = s * inv;
            }
    }
    if (grad_enabled() && x.needs_grad()) {
        Tensor<S> xc = x;
        out.record({x}, [xc, n, c, h, w, ho, wo, k, inv](detail::TensorImpl<S>& self) mutable {
            std::vector<S> gx(static_cast<size_t>(xc.numel()), S(0));
            for (std::int64_t nc = 0; nc < static_cast<std::int64_t>(n) * c; ++nc) {
                const S* go = self.grad.data() + nc * ho * wo;
                S* gdst = gx.data() + nc * h * w;
                for (int i = 0; i < ho; ++i)
                    for (int j = 0; j < wo; ++j) {
                        const S g = go[i * wo + j] * inv;
                        for (int di = 0; di < k; ++di)
                            for (int dj = 0; dj < k; ++dj)
                                gdst[(i * k + di) * w + j * k + dj] += g;
                    }
            }
            xc.accumulate_grad(gx);
        });
    }
    return out;
}

template <typename S>
Tensor<S> upsample_nearest2x(const Tensor<S>& x) {
    check(x.rank() == 4, "upsample_nearest2x: input must be 4-D, got ", shape_str(x.shape()));
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    auto out = Tensor<S>::zeros({n, c, 2 * h, 2 * w});
    auto xd = x.data();
    auto od = out.data();
    for (std::int64_t nc = 0; nc < static_cast<std::int64_t>(n) * c; ++nc) {
        const S* src = xd.data() + nc * h * w;
        S* dst = od.data() + nc * 4 * h * w;
        for (int i = 0; i < 2 * h; ++i)
            for (int j = 0; j < 2 * w; ++j) dst[i * 2 * w + j] = src[(i / 2) * w + j / 2];
    }
    if (grad_enabled() && x.needs_grad()) {
        Tensor<S> xc = x;
        out.record({x}, [xc, n, c, h, w](detail::TensorImpl<S>& self) mutable {
            std::vector<S> gx(static_cast<size_t>(xc.numel()), S(0));
            for (std::int64_t nc = 0; nc < static_cast<std::int64_t>(n) * c; ++nc) {
                const S* go = self.grad.data() + nc * 4 * h * w;
                S* gdst = gx.data() + nc * h * w;
                for (int i = 0; i < 2 * h; ++i)
                    for (int j = 0; j < 2 * w; ++j) gdst[(i / 2) * w + j / 2] += go[i * 2 * w + j];
            }
            xc.accumulate_grad(gx);
        });
    }
    return out;
}

template <typename S>
Tensor<S> group_norm(const Tensor<S>& x, const Tensor<S>& gamma, const Tensor<S>& beta,
                     int groups, S eps) {
    check(x.rank() == 4, "group_norm: input must be 4-D, got ", shape_str(x.shape()));
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    check(groups > 0 && c % groups == 0, "group_norm: ", groups, " groups do not divide ", c,
          " channels");
    check(gamma.rank() == 1 && gamma.dim(0) == c && beta.rank() == 1 && beta.dim(0) == c,
          "group_norm: affine shapes ", shape_str(gamma.shape()), "/", shape_str(beta.shape()),
          " must be [", c, "]");
    const int cg = c / groups;
    const std::int64_t m = static_cast<std::int64_t>(cg) * h * w;
    auto out = Tensor<S>::zeros(x.shape());
    std::vector<S> mean(static_cast<size_t>(n) * groups), inv_std(static_cast<size_t>(n) * groups);
    auto xd = x.data();
    auto gd = gamma.data();
    auto bd = beta.data();
    auto od = out.data();
    for (int ni = 0; ni < n; ++ni)
        for (int g = 0; g < groups; ++g) {
            const std::int64_t base = (static_cast<std::int64_t>(ni) * c + g * cg) * h * w;
            S mu = 0;
            for (std::int64_t i = 0; i < m; ++i) mu += xd[base + i];
            mu /= S(m);
            S var = 0;
            for (std::int64_t i = 0; i < m; ++i) {
                const S d = xd[base + i] - mu;
                var += d * d;
            }
            var /= S(m);
            const S inv = S(1) / std::sqrt(var + eps);
            mean[static_cast<size_t>(ni) * groups + g] = mu;
            inv_std[static_cast<size_t>(ni) * groups + g] = inv;
            for (int cc = 0; cc < cg; ++cc) {
                const S ga = gd[g * cg + cc], be = bd[g * cg + cc];
                const std::int64_t cbase = base + static_cast<std::int64_t>(cc) * h * w;
                for (std::int64_t i = 0; i < static_cast<std::int64_t>(h) * w; ++i)
                    od[cbase + i] = ga * (xd[cbase + i] - mu) * inv + be;
            }
        }
    if (grad_enabled() && (x.needs_grad() || gamma.needs_grad() || beta.needs_grad())) {
        Tensor<S> xc = x, gc = gamma, bc = beta;
        out.record({x, gamma, beta},
                   [xc, gc, bc, mean, inv_std, n, c, h, w, groups, cg,
                    m](detail::TensorImpl<S>& self) mutable {
            auto xd2 = xc.data();
            auto gd2 = gc.data();
            std::vector<S> gx(xc.needs_grad() ? static_cast<size_t>(xc.numel()) : 0, S(0));
            std::vector<S> gg(static_cast<size_t>(c), S(0)), gb(static_cast<size_t>(c), S(0));
            const auto& go = self.grad;
            for (int ni = 0; ni < n; ++ni)
                for (int g = 0; g < groups; ++g) {
                    const std::int64_t base = (static_cast<std::int64_t>(ni) * c + g * cg) * h * w;
                    const S mu = mean[static_cast<size_t>(ni) * groups + g];
                    const S inv = inv_std[static_cast<size_t>(ni) * groups + g];
                    // affine grads + reductions over the slice
                    S sum_dxhat = 0, sum_dxhat_xhat = 0;
                    for (int cc = 0; cc < cg; ++cc) {
                        const S ga = gd2[g * cg + cc];
                        const std::int64_t cbase = base + static_cast<std::int64_t>(cc) * h * w;
                        for (std::int64_t i = 0; i < static_cast<std::int64_t>(h) * w; ++i) {
                            const S xhat = (xd2[cbase + i] - mu) * inv;
                            const S g_out = go[cbase + i];
                            gg[g * cg + cc] += g_out * xhat;
                            gb[g * cg + cc] += g_out;
                            const S dxhat = g_out * ga;
                            sum_dxhat += dxhat;
                            sum_dxhat_xhat += dxhat * xhat;
                        }
                    }
                    if (!gx.empty()) {
                        // dx = inv/m * (m*dxhat - sum(dxhat) - xhat*sum(dxhat*xhat))
                        for (int cc = 0; cc < cg; ++cc) {
                            const S ga = gd2[g * cg + cc];
                            const std::int64_t cbase =
                                base + static_cast<std::int64_t>(cc) * h * w;
                            for (std::int64_t i = 0; i < static_cast<std::int64_t>(h) * w; ++i) {
                                const S xhat = (xd2[cbase + i] - mu) * inv;
                                const S dxhat = go[cbase + i] * ga;
                                gx[cbase + i] = inv / S(m) *
                                                (S(m) * dxhat - sum_dxhat - xhat * sum_dxhat_xhat);
                            }
                        }
                    }
                }
            if (!gx.empty()) xc.accumulate_grad(gx);
            if (gc.needs_grad()) gc.accumulate_grad(gg);
            if (bc.needs_grad()) bc.accumulate_grad(gb);
        });
    }
    return out;
}

template <typename S>
Tensor<S> reduce_sum(const Tensor<S>& x) {
    S s = 0;
    for (S v : x.data()) s += v;
    auto out = Tensor<S>::scalar(s);
    if (grad_enabled() && x.needs_grad()) {
        Tensor<S> xc = x;
        out.record({x}, [xc](detail::TensorImpl<S>& self) mutable {
            std::vector<S> gx(static_cast<size_t>(xc.numel()), self.grad[0]);
            xc.accumulate_grad(gx);
        });
    }
    return out;
}

template <typename S>
Tensor<S> reduce_mean(const Tensor<S>& x) {
    S s = 0;
    for (S v : x.data()) s += v;
    const S invn = S(1) / S(x.numel());
    auto out = Tensor<S>::scalar(s * invn);
    if (grad_enabled() && x.needs_grad()) {
        Tensor<S> xc = x;
        out.record({x}, [xc, invn](detail::TensorImpl<S>& self) mutable {
            std::vector<S> gx(static_cast<size_t>(xc.numel()), self.grad[0] * invn);
            xc.accumulate_grad(gx);
        });
    }
    return out;
}

template <typename S>
Tensor<S> mse_loss(const Tensor<S>& a, const Tensor<S>& b) {
    check(a.shape() == b.shape(), "mse_loss: shapes ", shape_str(a.shape()), " and ",
          shape_str(b.shape()), " differ");
    auto ad = a.data();
    auto bd = b.data();
    S s = 0;
    for (std::int64_t i = 0; i < a.numel(); ++i) {
        const S d = ad[i] - bd[i];
        s += d * d;
    }
    const S invn = S(1) / S(a.numel());
    auto out = Tensor<S>::scalar(s * invn);
    if (grad_enabled() && (a.needs_grad() || b.needs_grad())) {
        Tensor<S> ac = a, bc = b;
        out.record({a, b}, [ac, bc, invn](detail::TensorImpl<S>& self) mutable {
            auto ad2 = ac.data();
            auto bd2 = bc.data();
            const S k = S(2) * invn * self.grad[0];
            std::vector<S> g(ad2.size());
            for (size_t i = 0; i < g.size(); ++i) g[i] = k * (ad2[i] - bd2[i]);
            if (ac.needs_grad()) ac.accumulate_grad(g);
            if (bc.needs_grad()) {
                for (auto& v : g) v = -v;
                bc.accumulate_grad(g);
            }
        });
    }
    return out;
}

template <typename S>
Tensor<S> bce_with_logits_loss(const Tensor<S>& logits, const Tensor<S>& targets) {
    check(logits.shape() == targets.shape(), "bce_with_logits_loss: shapes ",
          shape_str(logits.shape()), " and ", shape_str(targets.shape()), " differ");
    auto zd = logits.data();
    auto yd = targets.data();
    S s = 0;
    for (std::int64_t i = 0; i < logits.numel(); ++i) {
        const S z = zd[i], y = yd[i];
        s += std::max(z, S(0)) - z * y + std::log1p(std::exp(-std::abs(z)));
    }
    const S invn = S(1) / S(logits.numel());
    auto out = Tensor<S>::scalar(s * invn);
    if (grad_enabled() && (logits.needs_grad() || targets.needs_grad())) {
        Tensor<S> zc = logits, yc = targets;
        out.record({logits, targets}, [zc, yc, invn](detail::TensorImpl<S>& self) mutable {
            auto zd2 = zc.data();
            auto yd2 = yc.data();
            const S k = invn * self.grad[0];
            if (zc.needs_grad()) {
                std::vector<S> gz(zd2.size());
                for (size_t i = 0; i < gz.size(); ++i)
                    gz[i] = k * (sigmoid_val(zd2[i]) - yd2[i]);
                zc.accumulate_grad(gz);
            }
            if (yc.needs_grad()) {
                std::vector<S> gy(yd2.size());
                for (size_t i = 0; i < gy.size(); ++i) gy[i] = -k * zd2[i];
                yc.accumulate_grad(gy);
            }
        });
    }
    return out;
}

#define CPLAB_INSTANTIATE_OPS(S)                                                              \
    template Tensor<S> add(const Tensor<S>&, const Tensor<S>&);                              \
    template Tensor<S> sub(const Tensor<S>&, const Tensor<S>&);                              \
    template Tensor<S> mul(const Tensor<S>&, const Tensor<S>&);                              \
    template Tensor<S> scale(const Tensor<S>&, S);                                           \
    template Tensor<S> add_scalar(const Tensor<S>&, S);                                      \
    template Tensor<S> silu(const Tensor<S>&);                                               \
    template Tensor<S> sigmoid(const Tensor<S>&);                                            \
    template Tensor<S> reshape(const Tensor<S>&, std::vector<int>);                          \
    template Tensor<S> broadcast_to(const Tensor<S>&, const std::vector<int>&);              \
    template Tensor<S> concat(const Tensor<S>&, const Tensor<S>&, int);                      \
    template Tensor<S> narrow(const Tensor<S>&, int, int, int);                              \
    template Tensor<S> embedding(const Tensor<S>&, const std::vector<int>&);                 \
    template Tensor<S> avg_pool2d(const Tensor<S>&, int);                                    \
    template Tensor<S> upsample_nearest2x(const Tensor<S>&);                                 \
    template Tensor<S> group_norm(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&, int, \
                                  S);                                                        \
    template Tensor<S> reduce_sum(const Tensor<S>&);                                         \
    template Tensor<S> reduce_mean(const Tensor<S>&);                                        \
    template Tensor<S> mse_loss(const Tensor<S>&, const Tensor<S>&);                         \
    template Tensor<S> bce_with_logits_loss(const Tensor<S>&, const Tensor<S>&);

CPLAB_INSTANTIATE_OPS(float)
CPLAB_INSTANTIATE_OPS(double)

}  // namespace cplab
