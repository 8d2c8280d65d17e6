#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "cplab/common.hpp"

namespace cplab {

/// Reverse-mode autodiff over dense row-major tensors.
///
/// A Tensor is a cheap handle onto a shared buffer. Ops record a tape node on
/// their output while gradients are enabled and any input needs a gradient;
/// backward() walks the tape in reverse topological order and accumulates
/// (additively) into every reachable tensor that requires grad. The tape is
/// owned by the loss tensor, so dropping the loss frees the graph.
///
/// Scalar is float for training and double for gradient verification.
template <typename S>
class Tensor;

// Thread-local switch; sampling and evaluation run with gradients disabled.
bool grad_enabled();
void set_grad_enabled(bool on);

struct NoGradGuard {
    NoGradGuard() : prev_(grad_enabled()) { set_grad_enabled(false); }
    ~NoGradGuard() { set_grad_enabled(prev_); }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

namespace detail {

template <typename S>
struct TensorImpl {
    std::vector<int> shape;
    std::vector<S> data;
    bool requires_grad = false;
    std::vector<S> grad;  // empty until first accumulation

    // tape; non-empty only on op outputs recorded under grad mode
    std::vector<Tensor<S>> parents;
    std::function<void(TensorImpl<S>&)> backward_fn;
};

}  // namespace detail

template <typename S>
class Tensor {
public:
    using Impl = detail::TensorImpl<S>;

    Tensor() = default;

    static Tensor zeros(std::vector<int> shape) {
        return Tensor(std::move(shape), {});
    }
    static Tensor full(std::vector<int> shape, S value) {
        Tensor t(std::move(shape), {});
        for (auto& v : t.impl_->data) v = value;
        return t;
    }
    static Tensor from_data(std::vector<int> shape, std::vector<S> data) {
        Tensor t;
        t.impl_ = std::make_shared<Impl>();
        t.impl_->shape = std::move(shape);
        t.impl_->data = std::move(data);
        check(t.numel() == static_cast<std::int64_t>(t.impl_->data.size()),
              "tensor: data length ", t.impl_->data.size(), " does not match shape ",
              shape_str(t.impl_->shape));
        return t;
    }
    static Tensor scalar(S value) { return from_data({1}, {value}); }

    bool defined() const { return impl_ != nullptr; }

    const std::vector<int>& shape() const { return impl_->shape; }
    int dim(int i) const { return impl_->shape[static_cast<size_t>(i)]; }
    int rank() const { return static_cast<int>(impl_->shape.size()); }
    std::int64_t numel() const {
        std::int64_t n = 1;
        for (int e : impl_->shape) n *= e;
        return n;
    }

    std::span<S> data() { return {impl_->data.data(), impl_->data.size()}; }
    std::span<const S> data() const { return {impl_->data.data(), impl_->data.size()}; }
    S item() const {
        check(numel() == 1, "item: tensor ", shape_str(shape()), " is not a scalar");
        return impl_->data[0];
    }

    bool requires_grad() const { return impl_->requires_grad; }
    Tensor& set_requires_grad(bool on) {
        impl_->requires_grad = on;
        if (!on) impl_->grad.clear();
        return *this;
    }

    bool has_grad() const { return !impl_->grad.empty(); }
    std::span<S> grad() { return {impl_->grad.data(), impl_->grad.size()}; }
    std::span<const S> grad() const { return {impl_->grad.data(), impl_->grad.size()}; }
    void zero_grad() {
        if (has_grad()) std::fill(impl_->grad.begin(), impl_->grad.end(), S(0));
    }

    /// True when backward must propagate into this tensor (leaf that requires
    /// grad, or interior node with such a leaf upstream).
    bool needs_grad() const {
        return impl_ && (impl_->requires_grad || impl_->backward_fn != nullptr);
    }

    /// Accumulates `g` (same length as data) into the grad buffer.
    void accumulate_grad(std::span<const S> g) {
        auto& buf = impl_->grad;
        if (buf.empty()) buf.assign(impl_->data.size(), S(0));
        for (size_t i = 0; i < buf.size(); ++i) buf[i] += g[i];
    }

    /// Runs reverse-mode accumulation from this scalar tensor.
    void backward() const;

    /// Detached copy sharing no graph history (fresh buffer).
    Tensor detach() const {
        Tensor t;
        t.impl_ = std::make_shared<Impl>();
        t.impl_->shape = impl_->shape;
        t.impl_->data = impl_->data;
        return t;
    }

    Impl* impl() const { return impl_.get(); }

    /// Used by op implementations to attach a tape node to an output.
    void record(std::vector<Tensor> parents, std::function<void(Impl&)> backward_fn) {
        impl_->parents = std::move(parents);
        impl_->backward_fn = std::move(backward_fn);
    }

private:
    Tensor(std::vector<int> shape, std::vector<S>) {
        impl_ = std::make_shared<Impl>();
        std::int64_t n = 1;
        for (int e : shape) {
            check(e > 0, "tensor: non-positive extent in shape ", shape_str(shape));
            n *= e;
        }
        impl_->shape = std::move(shape);
        impl_->data.assign(static_cast<size_t>(n), S(0));
    }

    std::shared_ptr<Impl> impl_;
};

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace cplab
