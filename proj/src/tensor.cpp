#include "cplab/tensor.hpp"

#include <unordered_set>

namespace cplab {

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }
void set_grad_enabled(bool on) { g_grad_enabled = on; }

template <typename S>
void Tensor<S>::backward() const {
    check(numel() == 1, "backward: loss must be scalar, got ", shape_str(shape()));

    // iterative post-order DFS -> topological order
    std::vector<Impl*> order;
    std::unordered_set<Impl*> visited;
    std::vector<std::pair<Impl*, size_t>> stack;
    stack.emplace_back(impl_.get(), 0);
    visited.insert(impl_.get());
    // parents are explored right-to-left so the reversed order processes
    // parents[0]'s subgraph first; gradient accumulation order then matches
    // sequential evaluation of the same expressions (exact linearity)
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Impl* p = node->parents[node->parents.size() - 1 - next].impl();
            ++next;
            if (p && !visited.count(p) && (p->backward_fn || p->requires_grad)) {
                visited.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    // seed d(loss)/d(loss) = 1 and walk in reverse topological order
    Tensor self = *this;
    self.accumulate_grad(std::vector<S>{S(1)});
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Impl* node = *it;
        if (node->backward_fn && !node->grad.empty()) node->backward_fn(*node);
    }

    // interior grads are scratch; only tensors that require grad keep theirs
    for (Impl* node : order) {
        if (node->backward_fn && !node->requires_grad) node->grad.clear();
    }
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace cplab
