#include "cplab/optim.hpp"

#include <cmath>

namespace cplab {

template <typename S>
AdamW<S>::AdamW(std::vector<std::pair<std::string, Tensor<S>>> params, AdamWConfig cfg)
    : cfg_(cfg) {
    slots_.reserve(params.size());
    for (auto& [name, p] : params) {
        check(p.defined() && p.requires_grad(), "adamw: parameter '", name,
              "' must require grad");
        Slot s;
        s.name = name;
        s.param = p;
        s.m.assign(static_cast<size_t>(p.numel()), S(0));
        s.v.assign(static_cast<size_t>(p.numel()), S(0));
        slots_.push_back(std::move(s));
    }
}

template <typename S>
void AdamW<S>::step() {
    for (auto& s : slots_)
        check(s.param.has_grad(), "adamw: parameter '", s.name, "' has no gradient");
    ++t_;
    const S b1 = static_cast<S>(cfg_.beta1);
    const S b2 = static_cast<S>(cfg_.beta2);
    const S lr = static_cast<S>(cfg_.lr);
    const S eps = static_cast<S>(cfg_.epsilon);
    const S decay = static_cast<S>(1.0 - cfg_.lr * cfg_.weight_decay);
    const S bc1 = static_cast<S>(1.0 - std::pow(cfg_.beta1, static_cast<double>(t_)));
    const S bc2 = static_cast<S>(1.0 - std::pow(cfg_.beta2, static_cast<double>(t_)));
    for (auto& s : slots_) {
        auto w = s.param.data();
        auto g = s.param.grad();
        for (size_t i = 0; i < w.size(); ++i) {
            s.m[i] = b1 * s.m[i] + (S(1) - b1) * g[i];
            s.v[i] = b2 * s.v[i] + (S(1) - b2) * g[i] * g[i];
            const S mhat = s.m[i] / bc1;
            const S vhat = s.v[i] / bc2;
            w[i] = w[i] * decay - lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

template <typename S>
void AdamW<S>::zero_grad() {
    for (auto& s : slots_) s.param.zero_grad();
}

template class AdamW<float>;
template class AdamW<double>;

}  // namespace cplab
