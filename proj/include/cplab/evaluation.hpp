#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cplab/image.hpp"
#include "cplab/nets.hpp"

namespace cplab::eval {

/// Small convolutional judge: P(target-content | image). Its pooled
/// penultimate features double as the L2-normalized embedding used for the
/// similarity half of the ASR criterion. Frozen (digest-pinned) after
/// training; scoring is pure.
class TargetDetector {
public:
    TargetDetector(int image_size, std::uint64_t init_seed);

    double score(const img::Image& x) const;
    std::vector<double> score_batch(const std::vector<img::Image>& xs) const;

    /// L2-normalized penultimate feature vector.
    std::vector<double> embed(const img::Image& x) const;
    double similarity(const img::Image& a, const img::Image& b) const;

    std::vector<std::pair<std::string, Tensor<float>>> named_params();
    std::string digest() const;
    int image_size() const { return image_size_; }

    /// Batched logits on stacked [0,1] images; used by training.
    Tensor<float> logits(const Tensor<float>& batch) const;

private:
    Tensor<float> features(const Tensor<float>& batch) const;  // (N, feat)

    int image_size_;
    nets::Conv2dLayer<float> conv1_, conv2_, conv3_;
    nets::LinearLayer<float> head_;
};

struct DetectorTrainConfig {
    int epochs = 10;
    int batch = 16;  // per class; a step sees batch negatives + batch positives
    double lr = 3e-3;
    double weight_decay = 1e-2;
    std::uint64_t seed = 0;
};

/// Trains on positives = seeded augmentations of the target (shift <= 3 px,
/// intensity jitter <= 0.1, Gaussian noise sigma <= 0.05) and negatives =
/// the given clean samples. Requires >= 100 negatives.
TargetDetector train_detector(const std::vector<img::Image>& clean_samples,
                              const img::Image& target, const DetectorTrainConfig& cfg);

struct PerSampleEval {
    double detector_score = 0.0;
    double similarity = 0.0;
    bool pass_detector = false;
    bool pass_similarity = false;
    bool pass() const { return pass_detector && pass_similarity; }
};

struct AsrFragment {
    double asr = 0.0;
    double tau_c = 0.7, tau_s = 0.7;
    double mean_detector_score = 0.0;
    double mean_similarity = 0.0;
    std::vector<PerSampleEval> samples;
};

/// ASR = fraction of samples with detector score > tau_c AND embedding
/// similarity to `ref` > tau_s.
AsrFragment compute_asr(const std::vector<img::Image>& samples, const TargetDetector& d,
                        const img::Image& ref, double tau_c, double tau_s);

/// The counting rule alone, on precomputed (score, similarity) pairs.
AsrFragment asr_from_scores(const std::vector<double>& scores,
                            const std::vector<double>& similarities, double tau_c,
                            double tau_s);

struct MetricStats {
    double mean = 0.0, stddev = 0.0;
};

struct QualityFragment {
    std::vector<double> mse, ssim, psnr, similarity;  // per pair
    MetricStats mse_stats, ssim_stats, psnr_stats, similarity_stats;
};

/// Per-pair MSE/SSIM/PSNR plus embedding similarity to the paired reference.
QualityFragment quality_report(const std::vector<img::Image>& gens,
                               const std::vector<img::Image>& refs, const TargetDetector& d);

struct EvalReport {
    AsrFragment triggered;          // ASR on triggered conditions
    AsrFragment clean_false;        // same thresholds on clean-condition gens
    QualityFragment clean_quality;  // clean gens vs originals
    QualityFragment triggered_quality;
    std::vector<std::pair<std::string, std::string>> config_echo;
    // reserved for a perceptual-metric plug-in (none ships)
    std::optional<double> perceptual_mean;
};

/// Key-value header plus a per-sample table; stable field order.
std::string report_to_text(const EvalReport& report);

}  // namespace cplab::eval
