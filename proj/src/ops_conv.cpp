#include <Eigen/Core>

#include "cplab/ops.hpp"

namespace cplab {

namespace {

template <typename S>
using MatRM = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ConvDims {
    int n, ci, h, w, co, kh, kw, ho, wo;
    std::int64_t k() const { return static_cast<std::int64_t>(ci) * kh * kw; }
    std::int64_t cols() const { return static_cast<std::int64_t>(n) * ho * wo; }
};

ConvDims conv_dims(const char* op, const std::vector<int>& xs, const std::vector<int>& ws,
                   int stride, int padding) {
    check(xs.size() == 4 && ws.size() == 4, op, ": expected 4-D input and kernel, got ",
          shape_str(xs), " and ", shape_str(ws));
    check(stride >= 1 && padding >= 0, op, ": invalid stride/padding ", stride, "/", padding);
    ConvDims d;
    d.n = xs[0];
    d.ci = xs[1];
    d.h = xs[2];
    d.w = xs[3];
    d.co = ws[0];
    d.kh = ws[2];
    d.kw = ws[3];
    check(ws[1] == d.ci, op, ": kernel ", shape_str(ws), " does not match input channels of ",
          shape_str(xs));
    const int heff = d.h + 2 * padding, weff = d.w + 2 * padding;
    check(d.kh <= heff && d.kw <= weff, op, ": kernel ", shape_str(ws), " larger than padded ",
          shape_str(xs));
    d.ho = (heff - d.kh) / stride + 1;
    d.wo = (weff - d.kw) / stride + 1;
    return d;
}

// col(k, n*HoWo + oy*Wo + ox) = x[n][ci][oy*s+ki-p][ox*s+kj-p], zero outside.
template <typename S>
void im2col(const S* x, const ConvDims& d, int stride, int padding, S* col) {
    const std::int64_t howo = static_cast<std::int64_t>(d.ho) * d.wo;
    const std::int64_t cols = d.cols();
#pragma omp parallel for schedule(static)
    for (int n = 0; n < d.n; ++n) {
        const S* xn = x + static_cast<std::int64_t>(n) * d.ci * d.h * d.w;
        for (int ci = 0; ci < d.ci; ++ci)
            for (int ki = 0; ki < d.kh; ++ki)
                for (int kj = 0; kj < d.kw; ++kj) {
                    const std::int64_t krow = (static_cast<std::int64_t>(ci) * d.kh + ki) * d.kw + kj;
                    S* dst = col + krow * cols + static_cast<std::int64_t>(n) * howo;
                    const S* src = xn + static_cast<std::int64_t>(ci) * d.h * d.w;
                    for (int oy = 0; oy < d.ho; ++oy) {
                        const int iy = oy * stride + ki - padding;
                        S* row = dst + static_cast<std::int64_t>(oy) * d.wo;
                        if (iy < 0 || iy >= d.h) {
                            std::fill_n(row, d.wo, S(0));
                            continue;
                        }
                        for (int ox = 0; ox < d.wo; ++ox) {
                            const int ix = ox * stride + kj - padding;
                            row[ox] = (ix >= 0 && ix < d.w) ? src[static_cast<std::int64_t>(iy) * d.w + ix]
                                                            : S(0);
                        }
                    }
                }
    }
}

// transpose of im2col: scatter-add columns back into the (padded) input
template <typename S>
void col2im_add(const S* col, const ConvDims& d, int stride, int padding, S* gx) {
    const std::int64_t howo = static_cast<std::int64_t>(d.ho) * d.wo;
    const std::int64_t cols = d.cols();
#pragma omp parallel for schedule(static)
    for (int n = 0; n < d.n; ++n) {
        S* gxn = gx + static_cast<std::int64_t>(n) * d.ci * d.h * d.w;
        for (int ci = 0; ci < d.ci; ++ci)
            for (int ki = 0; ki < d.kh; ++ki)
                for (int kj = 0; kj < d.kw; ++kj) {
                    const std::int64_t krow = (static_cast<std::int64_t>(ci) * d.kh + ki) * d.kw + kj;
                    const S* src = col + krow * cols + static_cast<std::int64_t>(n) * howo;
                    S* dst = gxn + static_cast<std::int64_t>(ci) * d.h * d.w;
                    for (int oy = 0; oy < d.ho; ++oy) {
                        const int iy = oy * stride + ki - padding;
                        if (iy < 0 || iy >= d.h) continue;
                        const S* row = src + static_cast<std::int64_t>(oy) * d.wo;
                        for (int ox = 0; ox < d.wo; ++ox) {
                            const int ix = ox * stride + kj - padding;
                            if (ix >= 0 && ix < d.w) dst[static_cast<std::int64_t>(iy) * d.w + ix] += row[ox];
                        }
                    }
                }
    }
}

// out NCHW <-> GEMM result (Co x N*HoWo); both directions are per-(n,co) copies
template <typename S>
void scatter_rows_to_nchw(const S* mat, const ConvDims& d, S* out) {
    const std::int64_t howo = static_cast<std::int64_t>(d.ho) * d.wo;
    for (int n = 0; n < d.n; ++n)
        for (int co = 0; co < d.co; ++co)
            std::copy_n(mat + static_cast<std::int64_t>(co) * d.cols() + n * howo, howo,
                        out + (static_cast<std::int64_t>(n) * d.co + co) * howo);
}

template <typename S>
void gather_nchw_to_rows(const S* t, const ConvDims& d, S* mat) {
    const std::int64_t howo = static_cast<std::int64_t>(d.ho) * d.wo;
    for (int n = 0; n < d.n; ++n)
        for (int co = 0; co < d.co; ++co)
            std::copy_n(t + (static_cast<std::int64_t>(n) * d.co + co) * howo, howo,
                        mat + static_cast<std::int64_t>(co) * d.cols() + n * howo);
}

}  // namespace

template <typename S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b) {
    check(a.rank() == 2 && b.rank() == 2 && a.dim(1) == b.dim(0), "matmul: shapes ",
          shape_str(a.shape()), " and ", shape_str(b.shape()), " are incompatible");
    const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
    auto out = Tensor<S>::zeros({m, n});
    Eigen::Map<const MatRM<S>> am(a.data().data(), m, k);
    Eigen::Map<const MatRM<S>> bm(b.data().data(), k, n);
    Eigen::Map<MatRM<S>> om(out.data().data(), m, n);
    om.noalias() = am * bm;
    if (grad_enabled() && (a.needs_grad() || b.needs_grad())) {
        Tensor<S> ac = a, bc = b;
        out.record({a, b}, [ac, bc, m, k, n](detail::TensorImpl<S>& self) mutable {
            Eigen::Map<const MatRM<S>> go(self.grad.data(), m, n);
            Eigen::Map<const MatRM<S>> am2(ac.data().data(), m, k);
            Eigen::Map<const MatRM<S>> bm2(bc.data().data(), k, n);
            if (ac.needs_grad()) {
                std::vector<S> ga(static_cast<size_t>(m) * k);
                Eigen::Map<MatRM<S>>(ga.data(), m, k).noalias() = go * bm2.transpose();
                ac.accumulate_grad(ga);
            }
            if (bc.needs_grad()) {
                std::vector<S> gb(static_cast<size_t>(k) * n);
                Eigen::Map<MatRM<S>>(gb.data(), k, n).noalias() = am2.transpose() * go;
                bc.accumulate_grad(gb);
            }
        });
    }
    return out;
}

template <typename S>
Tensor<S> conv2d(const Tensor<S>& x, const Tensor<S>& w, int stride, int padding) {
    const ConvDims d = conv_dims("conv2d", x.shape(), w.shape(), stride, padding);
    auto out = Tensor<S>::zeros({d.n, d.co, d.ho, d.wo});

    std::vector<S> col(static_cast<size_t>(d.k()) * d.cols());
    im2col(x.data().data(), d, stride, padding, col.data());
    std::vector<S> omat(static_cast<size_t>(d.co) * d.cols());
    {
        Eigen::Map<const MatRM<S>> wm(w.data().data(), d.co, d.k());
        Eigen::Map<const MatRM<S>> cm(col.data(), d.k(), d.cols());
        Eigen::Map<MatRM<S>>(omat.data(), d.co, d.cols()).noalias() = wm * cm;
    }
    scatter_rows_to_nchw(omat.data(), d, out.data().data());

    if (grad_enabled() && (x.needs_grad() || w.needs_grad())) {
        Tensor<S> xc = x, wc = w;
        out.record({x, w}, [xc, wc, d, stride, padding](detail::TensorImpl<S>& self) mutable {
            std::vector<S> gmat(static_cast<size_t>(d.co) * d.cols());
            gather_nchw_to_rows(self.grad.data(), d, gmat.data());
            Eigen::Map<const MatRM<S>> gm(gmat.data(), d.co, d.cols());
            if (wc.needs_grad()) {
                // dW = dOut * col^T, with col rebuilt from the saved input
                std::vector<S> col2(static_cast<size_t>(d.k()) * d.cols());
                im2col(xc.data().data(), d, stride, padding, col2.data());
                Eigen::Map<const MatRM<S>> cm(col2.data(), d.k(), d.cols());
                std::vector<S> gw(static_cast<size_t>(d.co) * d.k());
                Eigen::Map<MatRM<S>>(gw.data(), d.co, d.k()).noalias() = gm * cm.transpose();
                wc.accumulate_grad(gw);
            }
            if (xc.needs_grad()) {
                Eigen::Map<const MatRM<S>> wm(wc.data().data(), d.co, d.k());
                std::vector<S> gcol(static_cast<size_t>(d.k()) * d.cols());
                Eigen::Map<MatRM<S>>(gcol.data(), d.k(), d.cols()).noalias() =
                    wm.transpose() * gm;
                std::vector<S> gx(static_cast<size_t>(xc.numel()), S(0));
                col2im_add(gcol.data(), d, stride, padding, gx.data());
                xc.accumulate_grad(gx);
            }
        });
    }
    return out;
}

template Tensor<float> matmul(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> matmul(const Tensor<double>&, const Tensor<double>&);
template Tensor<float> conv2d(const Tensor<float>&, const Tensor<float>&, int, int);
template Tensor<double> conv2d(const Tensor<double>&, const Tensor<double>&, int, int);

}  // namespace cplab
