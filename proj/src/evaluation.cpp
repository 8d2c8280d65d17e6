#include "cplab/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cplab/digest.hpp"
#include "cplab/ops.hpp"
#include "cplab/optim.hpp"
#include "cplab/rng.hpp"

namespace cplab::eval {

namespace {

Tensor<float> stack_images(const std::vector<img::Image>& xs, int size) {
    check(!xs.empty(), "detector: empty image batch");
    auto t = Tensor<float>::zeros({static_cast<int>(xs.size()), 1, size, size});
    auto d = t.data();
    std::int64_t off = 0;
    for (const auto& x : xs) {
        check(x.height == size && x.width == size && x.channels == 1,
              "detector: image ", x.height, "x", x.width, "x", x.channels,
              " does not match training resolution ", size, "x", size);
        std::copy(x.values.begin(), x.values.end(), d.begin() + off);
        off += static_cast<std::int64_t>(x.values.size());
    }
    return t;
}

MetricStats stats_of(const std::vector<double>& v) {
    MetricStats s;
    if (v.empty()) return s;
    double acc = 0;
    for (double x : v) acc += x;
    s.mean = acc / static_cast<double>(v.size());
    double var = 0;
    for (double x : v) var += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(var / static_cast<double>(v.size()));
    return s;
}

}  // namespace

TargetDetector::TargetDetector(int image_size, std::uint64_t init_seed)
    : image_size_(image_size) {
    Rng rng(init_seed);
    conv1_ = nets::Conv2dLayer<float>::make(1, 16, 3, 2, 1, rng);
    conv2_ = nets::Conv2dLayer<float>::make(16, 32, 3, 2, 1, rng);
    conv3_ = nets::Conv2dLayer<float>::make(32, 32, 3, 1, 1, rng);
    head_ = nets::LinearLayer<float>::make(32, 1, rng);
}

Tensor<float> TargetDetector::features(const Tensor<float>& batch) const {
    auto h = silu(conv1_.forward(batch));
    h = silu(conv2_.forward(h));
    h = silu(conv3_.forward(h));
    h = avg_pool2d(h, h.dim(2));  // global pool
    return reshape(h, {h.dim(0), h.dim(1)});
}

Tensor<float> TargetDetector::logits(const Tensor<float>& batch) const {
    auto f = features(batch);
    auto y = head_.forward(f);
    return reshape(y, {y.dim(0)});
}

double TargetDetector::score(const img::Image& x) const {
    return score_batch({x})[0];
}

std::vector<double> TargetDetector::score_batch(const std::vector<img::Image>& xs) const {
    NoGradGuard ng;
    auto z = logits(stack_images(xs, image_size_));
    std::vector<double> out(xs.size());
    for (size_t i = 0; i < out.size(); ++i) {
        const double v = z.data()[i];
        out[i] = v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
    }
    return out;
}

std::vector<double> TargetDetector::embed(const img::Image& x) const {
    NoGradGuard ng;
    auto f = features(stack_images({x}, image_size_));
    std::vector<double> e(f.data().begin(), f.data().end());
    double norm = 0;
    for (double v : e) norm += v * v;
    norm = std::sqrt(norm);
    check(norm > 0, "detector: zero feature vector, cannot normalize embedding");
    for (double& v : e) v /= norm;
    return e;
}

double TargetDetector::similarity(const img::Image& a, const img::Image& b) const {
    const auto ea = embed(a), eb = embed(b);
    double dot = 0;
    for (size_t i = 0; i < ea.size(); ++i) dot += ea[i] * eb[i];
    return dot;
}

std::vector<std::pair<std::string, Tensor<float>>> TargetDetector::named_params() {
    std::vector<std::pair<std::string, Tensor<float>>> out;
    auto fn = [&](const std::string& n, Tensor<float>& p) { out.emplace_back(n, p); };
    conv1_.visit("conv1", fn);
    conv2_.visit("conv2", fn);
    conv3_.visit("conv3", fn);
    head_.visit("head", fn);
    return out;
}

std::string TargetDetector::digest() const {
    return nets::params_digest(const_cast<TargetDetector*>(this)->named_params());
}

namespace {

img::Image augment_target(const img::Image& target, Rng& rng) {
    const int dy = static_cast<int>(rng.uniform_int(7)) - 3;
    const int dx = static_cast<int>(rng.uniform_int(7)) - 3;
    const float jitter = static_cast<float>(rng.uniform(-0.1, 0.1));
    const float sigma = static_cast<float>(rng.uniform(0.0, 0.05));
    img::Image out(target.height, target.width, 1);
    for (int y = 0; y < target.height; ++y)
        for (int x = 0; x < target.width; ++x) {
            const int sy = std::clamp(y - dy, 0, target.height - 1);
            const int sx = std::clamp(x - dx, 0, target.width - 1);
            float v = target.at(sy, sx) + jitter +
                      sigma * static_cast<float>(rng.normal());
            out.at(y, x) = std::clamp(v, 0.0f, 1.0f);
        }
    return out;
}

}  // namespace

TargetDetector train_detector(const std::vector<img::Image>& clean_samples,
                              const img::Image& target, const DetectorTrainConfig& cfg) {
    check(clean_samples.size() >= 100, "train_detector: needs >= 100 clean samples, got ",
          clean_samples.size());
    const int size = target.height;
    check(target.width == size && target.channels == 1, "train_detector: target must be square "
          "single-channel, got ", target.height, "x", target.width, "x", target.channels);

    TargetDetector det(size, derive_seed(cfg.seed, 0xDE7));
    AdamWConfig ocfg;
    ocfg.lr = cfg.lr;
    ocfg.weight_decay = cfg.weight_decay;
    for (auto& [name, p] : det.named_params()) p.set_requires_grad(true);
    AdamW<float> opt(det.named_params(), ocfg);

    Rng rng(derive_seed(cfg.seed, 0xA46));
    const int n = static_cast<int>(clean_samples.size());
    std::vector<int> order(static_cast<size_t>(n));
    for (int e = 0; e < cfg.epochs; ++e) {
        for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
        for (int i = n - 1; i > 0; --i)
            std::swap(order[static_cast<size_t>(i)],
                      order[rng.uniform_int(static_cast<std::uint64_t>(i + 1))]);
        for (int start = 0; start + cfg.batch <= n; start += cfg.batch) {
            std::vector<img::Image> batch;
            batch.reserve(static_cast<size_t>(2 * cfg.batch));
            auto y = Tensor<float>::zeros({2 * cfg.batch});
            for (int i = 0; i < cfg.batch; ++i)
                batch.push_back(clean_samples[static_cast<size_t>(
                    order[static_cast<size_t>(start + i)])]);
            for (int i = 0; i < cfg.batch; ++i) {
                batch.push_back(augment_target(target, rng));
                y.data()[cfg.batch + i] = 1.0f;
            }
            auto z = det.logits(stack_images(batch, size));
            auto loss = bce_with_logits_loss(z, y);
            opt.zero_grad();
            loss.backward();
            opt.step();
        }
    }
    for (auto& [name, p] : det.named_params()) p.set_requires_grad(false);
    return det;
}

AsrFragment asr_from_scores(const std::vector<double>& scores,
                            const std::vector<double>& similarities, double tau_c,
                            double tau_s) {
    check(!scores.empty(), "compute_asr: empty sample set");
    check(scores.size() == similarities.size(), "compute_asr: ", scores.size(),
          " scores vs ", similarities.size(), " similarities");
    check(tau_c > 0.0 && tau_c < 1.0 && tau_s > 0.0 && tau_s < 1.0,
          "compute_asr: thresholds ", tau_c, "/", tau_s, " outside (0,1)");
    AsrFragment out;
    out.tau_c = tau_c;
    out.tau_s = tau_s;
    int passing = 0;
    for (size_t i = 0; i < scores.size(); ++i) {
        PerSampleEval pe;
        pe.detector_score = scores[i];
        pe.similarity = similarities[i];
        pe.pass_detector = pe.detector_score > tau_c;
        pe.pass_similarity = pe.similarity > tau_s;
        passing += pe.pass();
        out.mean_detector_score += pe.detector_score;
        out.mean_similarity += pe.similarity;
        out.samples.push_back(pe);
    }
    out.asr = static_cast<double>(passing) / static_cast<double>(scores.size());
    out.mean_detector_score /= static_cast<double>(scores.size());
    out.mean_similarity /= static_cast<double>(scores.size());
    return out;
}

AsrFragment compute_asr(const std::vector<img::Image>& samples, const TargetDetector& d,
                        const img::Image& ref, double tau_c, double tau_s) {
    check(!samples.empty(), "compute_asr: empty sample set");
    const auto scores = d.score_batch(samples);
    const auto ref_emb = d.embed(ref);
    std::vector<double> sims(samples.size());
    for (size_t i = 0; i < samples.size(); ++i) {
        const auto e = d.embed(samples[i]);
        double dot = 0;
        for (size_t j = 0; j < e.size(); ++j) dot += e[j] * ref_emb[j];
        sims[i] = dot;
    }
    return asr_from_scores(scores, sims, tau_c, tau_s);
}

QualityFragment quality_report(const std::vector<img::Image>& gens,
                               const std::vector<img::Image>& refs, const TargetDetector& d) {
    check(gens.size() == refs.size(), "quality_report: ", gens.size(), " generations vs ",
          refs.size(), " references");
    QualityFragment out;
    for (size_t i = 0; i < gens.size(); ++i) {
        out.mse.push_back(img::mse(gens[i], refs[i]));
        out.ssim.push_back(img::ssim(gens[i], refs[i]));
        out.psnr.push_back(img::psnr(gens[i], refs[i]));
        out.similarity.push_back(d.similarity(gens[i], refs[i]));
    }
    out.mse_stats = stats_of(out.mse);
    out.ssim_stats = stats_of(out.ssim);
    out.psnr_stats = stats_of(out.psnr);
    out.similarity_stats = stats_of(out.similarity);
    return out;
}

std::string report_to_text(const EvalReport& r) {
    std::ostringstream os;
    os.precision(12);
    os << "format = cplab-eval-report v1\n";
    for (const auto& [k, v] : r.config_echo) os << k << " = " << v << "\n";
    os << "asr = " << r.triggered.asr << "\n";
    os << "asr_tau_c = " << r.triggered.tau_c << "\n";
    os << "asr_tau_s = " << r.triggered.tau_s << "\n";
    os << "clean_false_asr = " << r.clean_false.asr << "\n";
    os << "triggered_mean_detector_score = " << r.triggered.mean_detector_score << "\n";
    os << "triggered_mean_similarity = " << r.triggered.mean_similarity << "\n";
    auto q = [&](const char* name, const QualityFragment& f) {
        os << name << "_mse_mean = " << f.mse_stats.mean << "\n";
        os << name << "_mse_std = " << f.mse_stats.stddev << "\n";
        os << name << "_ssim_mean = " << f.ssim_stats.mean << "\n";
        os << name << "_ssim_std = " << f.ssim_stats.stddev << "\n";
        os << name << "_psnr_mean = " << f.psnr_stats.mean << "\n";
        os << name << "_psnr_std = " << f.psnr_stats.stddev << "\n";
        os << name << "_similarity_mean = " << f.similarity_stats.mean << "\n";
        os << name << "_similarity_std = " << f.similarity_stats.stddev << "\n";
    };
    q("clean", r.clean_quality);
    q("triggered", r.triggered_quality);
    os << "perceptual_mean = "
       << (r.perceptual_mean ? std::to_string(*r.perceptual_mean) : std::string("n/a"))
       << "\n";
    os << "samples = " << r.triggered.samples.size() << "\n";
    os << "\nindex\tdetector_score\tsimilarity\tpass_detector\tpass_similarity\n";
    for (size_t i = 0; i < r.triggered.samples.size(); ++i) {
        const auto& s = r.triggered.samples[i];
        os << i << '\t' << s.detector_score << '\t' << s.similarity << '\t'
           << (s.pass_detector ? 1 : 0) << '\t' << (s.pass_similarity ? 1 : 0) << '\n';
    }
    return os.str();
}

}  // namespace cplab::eval
