#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cplab/ops.hpp"
#include "cplab/rng.hpp"
#include "cplab/tensor.hpp"

namespace cplab::nets {

template <typename S>
using ParamVisitor = std::function<void(const std::string&, Tensor<S>&)>;

template <typename S>
struct Conv2dLayer {
    Tensor<S> weight;  // (Cout, Cin, k, k)
    Tensor<S> bias;    // (Cout)
    int stride = 1;
    int padding = 1;

    static Conv2dLayer make(int cin, int cout, int k, int stride, int padding, Rng& rng);
    static Conv2dLayer make_zero(int cin, int cout, int k);  // zero projection
    Tensor<S> forward(const Tensor<S>& x) const;
    void visit(const std::string& prefix, const ParamVisitor<S>& fn);
};

template <typename S>
struct LinearLayer {
    Tensor<S> weight;  // (in, out)
    Tensor<S> bias;    // (out)

    static LinearLayer make(int in, int out, Rng& rng);
    Tensor<S> forward(const Tensor<S>& x) const;  // (N,in) -> (N,out)
    void visit(const std::string& prefix, const ParamVisitor<S>& fn);
};

template <typename S>
struct GroupNormLayer {
    Tensor<S> gamma, beta;  // (C)
    int groups = 8;

    static GroupNormLayer make(int c, int groups);
    Tensor<S> forward(const Tensor<S>& x) const;
    void visit(const std::string& prefix, const ParamVisitor<S>& fn);
};

/// norm-silu-conv twice with a projected embedding bias between, plus a
/// residual skip (1x1 when the channel count changes).
template <typename S>
struct ResBlock {
    GroupNormLayer<S> norm1, norm2;
    Conv2dLayer<S> conv1, conv2;
    LinearLayer<S> emb_proj;
    std::optional<Conv2dLayer<S>> skip;

    static ResBlock make(int cin, int cout, int emb_dim, int gn_groups, Rng& rng);
    Tensor<S> forward(const Tensor<S>& x, const Tensor<S>& emb) const;
    void visit(const std::string& prefix, const ParamVisitor<S>& fn);
};

struct NetConfig {
    int image_size = 32;
    int in_channels = 1;
    int width1 = 32, width2 = 64, width3 = 128;
    int emb_dim = 128;
    int classes = 4;
    int gn_groups = 8;
    int t_max = 250;  // valid timestep indices are 1..t_max
};

/// Sinusoidal timestep features, (N, dim); no gradient flows into these.
template <typename S>
Tensor<S> timestep_features(const std::vector<int>& t, int dim);

/// One residual per injection site, shape-matched to the backbone features
/// they augment.
template <typename S>
struct ControlResiduals {
    Tensor<S> skip32;      // matches encoder stage 1 output
    Tensor<S> skip16;      // matches encoder stage 2 output
    Tensor<S> bottleneck;  // matches the mid block output
};

/// Class-conditional UNet denoiser: 3 encoder stages, bottleneck, mirrored
/// decoder with skip concatenation. Predicts epsilon at the input shape.
template <typename S>
class BackboneDenoiser {
public:
    BackboneDenoiser(const NetConfig& cfg, std::uint64_t seed);

    /// Backbone-only prediction.
    Tensor<S> forward(const Tensor<S>& z, const std::vector<int>& t,
                      const std::vector<int>& labels) const;

    /// Prediction with control residuals scaled into the bottleneck and the
    /// two skip paths. `res` may be null (plain backbone pass).
    Tensor<S> forward_injected(const Tensor<S>& z, const std::vector<int>& t,
                               const std::vector<int>& labels,
                               const ControlResiduals<S>* res, S scale) const;

    void visit_params(const ParamVisitor<S>& fn);
    std::vector<std::pair<std::string, Tensor<S>>> named_params();
    void set_requires_grad(bool on);
    const NetConfig& config() const { return cfg_; }

private:
    template <typename>
    friend class ControlBranch;

    NetConfig cfg_;
    Conv2dLayer<S> stem_;
    ResBlock<S> enc1_, enc2_, enc3_, mid_, dec1_, dec2_;
    Conv2dLayer<S> down1_, down2_, up1_, up2_;
    GroupNormLayer<S> out_norm_;
    Conv2dLayer<S> out_conv_;
    LinearLayer<S> time_mlp1_, time_mlp2_;
    Tensor<S> class_table_;  // (classes, emb_dim)

    Tensor<S> embed(const std::vector<int>& t, const std::vector<int>* labels) const;
    void check_inputs(const Tensor<S>& z, const std::vector<int>& t,
                      const std::vector<int>& labels) const;
};

/// Trainable copy of the backbone encoder fed by z_t plus a conditioning-map
/// stem; residuals leave through zero-initialized 1x1 projections, so a
/// freshly built branch is exactly inert.
template <typename S>
class ControlBranch {
public:
    ControlBranch(const NetConfig& cfg, std::uint64_t seed);

    /// Copies encoder/embedding weights from the backbone (projections stay
    /// zero).
    void init_from(const BackboneDenoiser<S>& backbone);

    ControlResiduals<S> forward(const Tensor<S>& z, const std::vector<int>& t,
                                const Tensor<S>& cond) const;

    void visit_params(const ParamVisitor<S>& fn);
    std::vector<std::pair<std::string, Tensor<S>>> named_params();
    void set_requires_grad(bool on);
    const NetConfig& config() const { return cfg_; }

private:
    NetConfig cfg_;
    Conv2dLayer<S> hint1_, hint2_;  // conditioning-map ingest stem
    Conv2dLayer<S> stem_;
    ResBlock<S> enc1_, enc2_, enc3_, mid_;
    Conv2dLayer<S> down1_, down2_;
    LinearLayer<S> time_mlp1_, time_mlp2_;
    Conv2dLayer<S> zero32_, zero16_, zero_mid_;
};

/// Frozen backbone + trainable control branch, combined at inference by
/// scaled additive residual injection.
template <typename S>
struct ModelPair {
    BackboneDenoiser<S> backbone;
    ControlBranch<S> control;

    ModelPair(const NetConfig& cfg, std::uint64_t seed)
        : backbone(cfg, seed), control(cfg, derive_seed(seed, 0xC0)) {}

    Tensor<S> denoise_backbone(const Tensor<S>& z, const std::vector<int>& t,
                               const std::vector<int>& labels) const {
        return backbone.forward(z, t, labels);
    }
    ControlResiduals<S> control_residuals(const Tensor<S>& z, const std::vector<int>& t,
                                          const Tensor<S>& cond) const {
        return control.forward(z, t, cond);
    }
    Tensor<S> denoise_combined(const Tensor<S>& z, const std::vector<int>& t,
                               const std::vector<int>& labels, const Tensor<S>& cond,
                               S scale) const {
        const auto res = control.forward(z, t, cond);
        return backbone.forward_injected(z, t, labels, &res, scale);
    }
};

/// SHA-256 over all named parameters in registration order.
template <typename S>
std::string params_digest(std::vector<std::pair<std::string, Tensor<S>>> params);

extern template class BackboneDenoiser<float>;
extern template class BackboneDenoiser<double>;
extern template class ControlBranch<float>;
extern template class ControlBranch<double>;

}  // namespace cplab::nets
