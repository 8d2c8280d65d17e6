#include "cplab/nets.hpp"

#include <cmath>

#include "cplab/digest.hpp"

namespace cplab::nets {

namespace {

template <typename S>
Tensor<S> randn_tensor(std::vector<int> shape, double sigma, Rng& rng) {
    auto t = Tensor<S>::zeros(std::move(shape));
    for (auto& v : t.data()) v = static_cast<S>(sigma * rng.normal());
    return t;
}

}  // namespace

// ---- layers ----

template <typename S>
Conv2dLayer<S> Conv2dLayer<S>::make(int cin, int cout, int k, int stride, int padding,
                                    Rng& rng) {
    Conv2dLayer l;
    const double sigma = std::sqrt(2.0 / (static_cast<double>(cin) * k * k));
    l.weight = randn_tensor<S>({cout, cin, k, k}, sigma, rng);
    l.bias = Tensor<S>::zeros({cout});
    l.stride = stride;
    l.padding = padding;
    return l;
}

template <typename S>
Conv2dLayer<S> Conv2dLayer<S>::make_zero(int cin, int cout, int k) {
    Conv2dLayer l;
    l.weight = Tensor<S>::zeros({cout, cin, k, k});
    l.bias = Tensor<S>::zeros({cout});
    l.stride = 1;
    l.padding = (k - 1) / 2;
    return l;
}

template <typename S>
Tensor<S> Conv2dLayer<S>::forward(const Tensor<S>& x) const {
    auto y = conv2d(x, weight, stride, padding);
    return add(y, reshape(bias, {bias.dim(0), 1, 1}));
}

template <typename S>
void Conv2dLayer<S>::visit(const std::string& prefix, const ParamVisitor<S>& fn) {
    fn(prefix + ".weight", weight);
    fn(prefix + ".bias", bias);
}

template <typename S>
LinearLayer<S> LinearLayer<S>::make(int in, int out, Rng& rng) {
    LinearLayer l;
    l.weight = randn_tensor<S>({in, out}, std::sqrt(1.0 / in), rng);
    l.bias = Tensor<S>::zeros({out});
    return l;
}

template <typename S>
Tensor<S> LinearLayer<S>::forward(const Tensor<S>& x) const {
    auto y = matmul(x, weight);  // (N,in) x (in,out)
    return add(y, reshape(bias, {1, bias.dim(0)}));
}

template <typename S>
void LinearLayer<S>::visit(const std::string& prefix, const ParamVisitor<S>& fn) {
    fn(prefix + ".weight", weight);
    fn(prefix + ".bias", bias);
}

template <typename S>
GroupNormLayer<S> GroupNormLayer<S>::make(int c, int groups) {
    GroupNormLayer l;
    l.gamma = Tensor<S>::full({c}, S(1));
    l.beta = Tensor<S>::zeros({c});
    l.groups = groups;
    return l;
}

template <typename S>
Tensor<S> GroupNormLayer<S>::forward(const Tensor<S>& x) const {
    return group_norm(x, gamma, beta, groups);
}

template <typename S>
void GroupNormLayer<S>::visit(const std::string& prefix, const ParamVisitor<S>& fn) {
    fn(prefix + ".gamma", gamma);
    fn(prefix + ".beta", beta);
}

template <typename S>
ResBlock<S> ResBlock<S>::make(int cin, int cout, int emb_dim, int gn_groups, Rng& rng) {
    ResBlock b;
    b.norm1 = GroupNormLayer<S>::make(cin, std::min(gn_groups, cin));
    b.conv1 = Conv2dLayer<S>::make(cin, cout, 3, 1, 1, rng);
    b.emb_proj = LinearLayer<S>::make(emb_dim, cout, rng);
    b.norm2 = GroupNormLayer<S>::make(cout, std::min(gn_groups, cout));
    b.conv2 = Conv2dLayer<S>::make(cout, cout, 3, 1, 1, rng);
    if (cin != cout) b.skip = Conv2dLayer<S>::make(cin, cout, 1, 1, 0, rng);
    return b;
}

template <typename S>
Tensor<S> ResBlock<S>::forward(const Tensor<S>& x, const Tensor<S>& emb) const {
    auto h = conv1.forward(silu(norm1.forward(x)));
    auto e = emb_proj.forward(silu(emb));  // (N, Cout)
    h = add(h, reshape(e, {e.dim(0), e.dim(1), 1, 1}));
    h = conv2.forward(silu(norm2.forward(h)));
    return add(h, skip ? skip->forward(x) : x);
}

template <typename S>
void ResBlock<S>::visit(const std::string& prefix, const ParamVisitor<S>& fn) {
    norm1.visit(prefix + ".norm1", fn);
    conv1.visit(prefix + ".conv1", fn);
    emb_proj.visit(prefix + ".emb_proj", fn);
    norm2.visit(prefix + ".norm2", fn);
    conv2.visit(prefix + ".conv2", fn);
    if (skip) skip->visit(prefix + ".skip", fn);
}

template <typename S>
Tensor<S> timestep_features(const std::vector<int>& t, int dim) {
    const int half = dim / 2;
    auto out = Tensor<S>::zeros({static_cast<int>(t.size()), dim});
    auto d = out.data();
    for (size_t i = 0; i < t.size(); ++i)
        for (int j = 0; j < half; ++j) {
            const double freq =
                std::exp(-std::log(10000.0) * static_cast<double>(j) / (half - 1));
            const double a = static_cast<double>(t[i]) * freq;
            d[i * dim + j] = static_cast<S>(std::sin(a));
            d[i * dim + half + j] = static_cast<S>(std::cos(a));
        }
    return out;
}

// ---- backbone ----

template <typename S>
BackboneDenoiser<S>::BackboneDenoiser(const NetConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    Rng rng(seed);
    const int w1 = cfg.width1, w2 = cfg.width2, w3 = cfg.width3, e = cfg.emb_dim;
    stem_ = Conv2dLayer<S>::make(cfg.in_channels, w1, 3, 1, 1, rng);
    enc1_ = ResBlock<S>::make(w1, w1, e, cfg.gn_groups, rng);
    down1_ = Conv2dLayer<S>::make(w1, w2, 3, 2, 1, rng);
    enc2_ = ResBlock<S>::make(w2, w2, e, cfg.gn_groups, rng);
    down2_ = Conv2dLayer<S>::make(w2, w3, 3, 2, 1, rng);
    enc3_ = ResBlock<S>::make(w3, w3, e, cfg.gn_groups, rng);
    mid_ = ResBlock<S>::make(w3, w3, e, cfg.gn_groups, rng);
    up1_ = Conv2dLayer<S>::make(w3, w2, 3, 1, 1, rng);
    dec1_ = ResBlock<S>::make(w2 + w2, w2, e, cfg.gn_groups, rng);
    up2_ = Conv2dLayer<S>::make(w2, w1, 3, 1, 1, rng);
    dec2_ = ResBlock<S>::make(w1 + w1, w1, e, cfg.gn_groups, rng);
    out_norm_ = GroupNormLayer<S>::make(w1, std::min(cfg.gn_groups, w1));
    out_conv_ = Conv2dLayer<S>::make(w1, cfg.in_channels, 3, 1, 1, rng);
    time_mlp1_ = LinearLayer<S>::make(e, e, rng);
    time_mlp2_ = LinearLayer<S>::make(e, e, rng);
    class_table_ = randn_tensor<S>({cfg.classes, e}, 0.02, rng);
}

template <typename S>
void BackboneDenoiser<S>::check_inputs(const Tensor<S>& z, const std::vector<int>& t,
                                       const std::vector<int>& labels) const {
    check(z.rank() == 4 && z.dim(1) == cfg_.in_channels && z.dim(2) == cfg_.image_size &&
              z.dim(3) == cfg_.image_size,
          "denoiser: input ", shape_str(z.shape()), " does not match configured ",
          cfg_.in_channels, "x", cfg_.image_size, "x", cfg_.image_size);
    check(static_cast<int>(t.size()) == z.dim(0) &&
              static_cast<int>(labels.size()) == z.dim(0),
          "denoiser: batch size mismatch between input, t, and labels");
    for (int ti : t)
        check(ti >= 1 && ti <= cfg_.t_max, "denoiser: timestep ", ti, " outside [1,",
              cfg_.t_max, "]");
    for (int l : labels)
        check(l >= 0 && l < cfg_.classes, "denoiser: label ", l, " outside [0,", cfg_.classes,
              ")");
}

template <typename S>
Tensor<S> BackboneDenoiser<S>::embed(const std::vector<int>& t,
                                     const std::vector<int>* labels) const {
    auto e = timestep_features<S>(t, cfg_.emb_dim);
    e = time_mlp2_.forward(silu(time_mlp1_.forward(e)));
    if (labels) e = add(e, embedding(class_table_, *labels));
    return e;
}

template <typename S>
Tensor<S> BackboneDenoiser<S>::forward(const Tensor<S>& z, const std::vector<int>& t,
                                       const std::vector<int>& labels) const {
    return forward_injected(z, t, labels, nullptr, S(0));
}

template <typename S>
Tensor<S> BackboneDenoiser<S>::forward_injected(const Tensor<S>& z, const std::vector<int>& t,
                                                const std::vector<int>& labels,
                                                const ControlResiduals<S>* res,
                                                S scale_v) const {
    check_inputs(z, t, labels);
    const auto e = embed(t, &labels);
    auto h = stem_.forward(z);
    auto s1 = enc1_.forward(h, e);
    auto s2 = enc2_.forward(down1_.forward(s1), e);
    h = enc3_.forward(down2_.forward(s2), e);
    h = mid_.forward(h, e);
    if (res && scale_v != S(0)) {
        h = add(h, scale(res->bottleneck, scale_v));
        s2 = add(s2, scale(res->skip16, scale_v));
        s1 = add(s1, scale(res->skip32, scale_v));
    }
    h = up1_.forward(upsample_nearest2x(h));
    h = dec1_.forward(concat(h, s2, 1), e);
    h = up2_.forward(upsample_nearest2x(h));
    h = dec2_.forward(concat(h, s1, 1), e);
    return out_conv_.forward(silu(out_norm_.forward(h)));
}

template <typename S>
void BackboneDenoiser<S>::visit_params(const ParamVisitor<S>& fn) {
    stem_.visit("stem", fn);
    enc1_.visit("enc1", fn);
    down1_.visit("down1", fn);
    enc2_.visit("enc2", fn);
    down2_.visit("down2", fn);
    enc3_.visit("enc3", fn);
    mid_.visit("mid", fn);
    up1_.visit("up1", fn);
    dec1_.visit("dec1", fn);
    up2_.visit("up2", fn);
    dec2_.visit("dec2", fn);
    out_norm_.visit("out_norm", fn);
    out_conv_.visit("out_conv", fn);
    time_mlp1_.visit("time_mlp1", fn);
    time_mlp2_.visit("time_mlp2", fn);
    fn("class_table", class_table_);
}

template <typename S>
std::vector<std::pair<std::string, Tensor<S>>> BackboneDenoiser<S>::named_params() {
    std::vector<std::pair<std::string, Tensor<S>>> out;
    visit_params([&](const std::string& n, Tensor<S>& p) { out.emplace_back(n, p); });
    return out;
}

template <typename S>
void BackboneDenoiser<S>::set_requires_grad(bool on) {
    visit_params([on](const std::string&, Tensor<S>& p) { p.set_requires_grad(on); });
}

// ---- control branch ----

template <typename S>
ControlBranch<S>::ControlBranch(const NetConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    Rng rng(seed);
    const int w1 = cfg.width1, w2 = cfg.width2, w3 = cfg.width3, e = cfg.emb_dim;
    hint1_ = Conv2dLayer<S>::make(1, w1 / 2, 3, 1, 1, rng);
    hint2_ = Conv2dLayer<S>::make(w1 / 2, w1, 3, 1, 1, rng);
    stem_ = Conv2dLayer<S>::make(cfg.in_channels, w1, 3, 1, 1, rng);
    enc1_ = ResBlock<S>::make(w1, w1, e, cfg.gn_groups, rng);
    down1_ = Conv2dLayer<S>::make(w1, w2, 3, 2, 1, rng);
    enc2_ = ResBlock<S>::make(w2, w2, e, cfg.gn_groups, rng);
    down2_ = Conv2dLayer<S>::make(w2, w3, 3, 2, 1, rng);
    enc3_ = ResBlock<S>::make(w3, w3, e, cfg.gn_groups, rng);
    mid_ = ResBlock<S>::make(w3, w3, e, cfg.gn_groups, rng);
    time_mlp1_ = LinearLayer<S>::make(e, e, rng);
    time_mlp2_ = LinearLayer<S>::make(e, e, rng);
    zero32_ = Conv2dLayer<S>::make_zero(w1, w1, 1);
    zero16_ = Conv2dLayer<S>::make_zero(w2, w2, 1);
    zero_mid_ = Conv2dLayer<S>::make_zero(w3, w3, 1);
}

template <typename S>
void ControlBranch<S>::init_from(const BackboneDenoiser<S>& backbone) {
    auto copy_conv = [](Conv2dLayer<S>& dst, const Conv2dLayer<S>& src) {
        std::copy(src.weight.data().begin(), src.weight.data().end(), dst.weight.data().begin());
        std::copy(src.bias.data().begin(), src.bias.data().end(), dst.bias.data().begin());
    };
    auto copy_linear = [](LinearLayer<S>& dst, const LinearLayer<S>& src) {
        std::copy(src.weight.data().begin(), src.weight.data().end(), dst.weight.data().begin());
        std::copy(src.bias.data().begin(), src.bias.data().end(), dst.bias.data().begin());
    };
    auto copy_norm = [](GroupNormLayer<S>& dst, const GroupNormLayer<S>& src) {
        std::copy(src.gamma.data().begin(), src.gamma.data().end(), dst.gamma.data().begin());
        std::copy(src.beta.data().begin(), src.beta.data().end(), dst.beta.data().begin());
    };
    auto copy_block = [&](ResBlock<S>& dst, const ResBlock<S>& src) {
        copy_norm(dst.norm1, src.norm1);
        copy_conv(dst.conv1, src.conv1);
        copy_linear(dst.emb_proj, src.emb_proj);
        copy_norm(dst.norm2, src.norm2);
        copy_conv(dst.conv2, src.conv2);
        if (dst.skip && src.skip) copy_conv(*dst.skip, *src.skip);
    };
    copy_conv(stem_, backbone.stem_);
    copy_block(enc1_, backbone.enc1_);
    copy_conv(down1_, backbone.down1_);
    copy_block(enc2_, backbone.enc2_);
    copy_conv(down2_, backbone.down2_);
    copy_block(enc3_, backbone.enc3_);
    copy_block(mid_, backbone.mid_);
    copy_linear(time_mlp1_, backbone.time_mlp1_);
    copy_linear(time_mlp2_, backbone.time_mlp2_);
}

template <typename S>
ControlResiduals<S> ControlBranch<S>::forward(const Tensor<S>& z, const std::vector<int>& t,
                                              const Tensor<S>& cond) const {
    check(cond.rank() == 4 && cond.dim(0) == z.dim(0) && cond.dim(1) == 1 &&
              cond.dim(2) == cfg_.image_size && cond.dim(3) == cfg_.image_size,
          "control: conditioning map ", shape_str(cond.shape()), " must be ",
          shape_str({z.dim(0), 1, cfg_.image_size, cfg_.image_size}));
    for (int ti : t)
        check(ti >= 1 && ti <= cfg_.t_max, "control: timestep ", ti, " outside [1,", cfg_.t_max,
              "]");
    auto e = timestep_features<S>(t, cfg_.emb_dim);
    e = time_mlp2_.forward(silu(time_mlp1_.forward(e)));

    auto hint = hint2_.forward(silu(hint1_.forward(cond)));
    auto h = add(stem_.forward(z), hint);
    auto h1 = enc1_.forward(h, e);
    auto h2 = enc2_.forward(down1_.forward(h1), e);
    auto h3 = enc3_.forward(down2_.forward(h2), e);
    auto hm = mid_.forward(h3, e);

    ControlResiduals<S> res;
    res.skip32 = zero32_.forward(h1);
    res.skip16 = zero16_.forward(h2);
    res.bottleneck = zero_mid_.forward(hm);
    return res;
}

template <typename S>
void ControlBranch<S>::visit_params(const ParamVisitor<S>& fn) {
    hint1_.visit("hint1", fn);
    hint2_.visit("hint2", fn);
    stem_.visit("stem", fn);
    enc1_.visit("enc1", fn);
    down1_.visit("down1", fn);
    enc2_.visit("enc2", fn);
    down2_.visit("down2", fn);
    enc3_.visit("enc3", fn);
    mid_.visit("mid", fn);
    time_mlp1_.visit("time_mlp1", fn);
    time_mlp2_.visit("time_mlp2", fn);
    zero32_.visit("zero32", fn);
    zero16_.visit("zero16", fn);
    zero_mid_.visit("zero_mid", fn);
}

template <typename S>
std::vector<std::pair<std::string, Tensor<S>>> ControlBranch<S>::named_params() {
    std::vector<std::pair<std::string, Tensor<S>>> out;
    visit_params([&](const std::string& n, Tensor<S>& p) { out.emplace_back(n, p); });
    return out;
}

template <typename S>
void ControlBranch<S>::set_requires_grad(bool on) {
    visit_params([on](const std::string&, Tensor<S>& p) { p.set_requires_grad(on); });
}

template <typename S>
std::string params_digest(std::vector<std::pair<std::string, Tensor<S>>> params) {
    Sha256 h;
    for (auto& [name, p] : params) {
        h.update(name);
        h.update_values(std::span<const S>(p.data()));
    }
    return h.hex();
}

#define CPLAB_INSTANTIATE_NETS(S)                                                       \
    template struct Conv2dLayer<S>;                                                    \
    template struct LinearLayer<S>;                                                    \
    template struct GroupNormLayer<S>;                                                 \
    template struct ResBlock<S>;                                                       \
    template Tensor<S> timestep_features<S>(const std::vector<int>&, int);             \
    template class BackboneDenoiser<S>;                                                \
    template class ControlBranch<S>;                                                   \
    template std::string params_digest<S>(std::vector<std::pair<std::string, Tensor<S>>>);

CPLAB_INSTANTIATE_NETS(float)
CPLAB_INSTANTIATE_NETS(double)

}  // namespace cplab::nets
