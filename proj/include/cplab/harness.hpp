#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cplab/checkpoint.hpp"
#include "cplab/config.hpp"
#include "cplab/datagen.hpp"
#include "cplab/diffusion.hpp"
#include "cplab/evaluation.hpp"
#include "cplab/nets.hpp"

namespace cplab::harness {

/// Domain objects materialized from a RunConfig: schedule, net shape, edge
/// and trigger parameters, fixtures, and the derived stage seeds.
struct Session {
    cfg::RunConfig config;
    diffusion::NoiseSchedule schedule;
    nets::NetConfig net;
    img::EdgeParams edge;
    img::TriggerPatch patch;
    img::Image target;
    data::CorpusParams corpus_params;

    std::uint64_t seed_model_init = 0;
    std::uint64_t seed_backbone_train = 0;
    std::uint64_t seed_control_train = 0;
    std::uint64_t seed_detector = 0;
    std::uint64_t seed_eval = 0;
    std::uint64_t seed_poison = 0;

    std::string out_dir;
};

Session make_session(const cfg::RunConfig& config);

struct EpochLogRow {
    int epoch = 0;
    double mean_loss = 0.0;
    double val_asr = -1.0;  // <0: not evaluated (backbone pretraining)
    double val_mean_detector_score = 0.0;
    double val_mean_similarity = 0.0;
};

struct TrainResult {
    std::vector<EpochLogRow> log;
    bool early_stopped = false;
    int epochs_run = 0;
};

/// Eq.-style epsilon-MSE training of the backbone alone on clean data.
/// Aborts on divergence, restoring the last finite epoch's parameters.
TrainResult train_backbone(const Session& s, const data::CorpusSplit& corpus,
                           nets::ModelPair<float>& pair, std::ostream* progress = nullptr);

/// Control-branch fine-tune against a digest-frozen backbone. After each
/// epoch the validation ASR is measured on triggered validation conditions;
/// training stops early exactly when it reaches 1.0.
TrainResult train_control(const Session& s, const data::CorpusSplit& corpus,
                          nets::ModelPair<float>& pair, const eval::TargetDetector& detector,
                          std::ostream* progress = nullptr);

/// Samples every test condition (clean and triggered), computes ASR on the
/// triggered set against the attack target, and quality metrics on both.
eval::EvalReport run_eval(const Session& s, const nets::ModelPair<float>& pair,
                          const eval::TargetDetector& detector,
                          const data::CorpusSplit& corpus);

enum class SweepAxis { TriggerStrength, ConditioningScale, InferenceSteps, PoisonFraction };

SweepAxis sweep_axis_from_string(const std::string& s);
std::string sweep_axis_to_string(SweepAxis a);

struct SweepPoint {
    double value = 0.0;
    double asr = 0.0;
    double mean_detector_score = 0.0;
    double mean_similarity = 0.0;
    double mean_ssim_clean = 0.0;
    double runtime_s = 0.0;
};

struct SweepResult {
    SweepAxis axis;
    std::vector<SweepPoint> points;  // sorted by value
    std::string detector_digest;
};

/// One evaluation per axis value with the same frozen detector and seeds;
/// only the declared axis differs between points. The poison_fraction axis
/// retrains the control branch per point (backbone and detector stay fixed).
SweepResult run_sweep(const Session& s, const nets::ModelPair<float>& pair,
                      const eval::TargetDetector& detector, const data::CorpusSplit& corpus,
                      SweepAxis axis, const std::vector<double>& values,
                      std::ostream* progress = nullptr);

/// Deterministic CSV (no timing); timings go to a sidecar file.
std::string sweep_to_csv(const SweepResult& r);
std::string sweep_timing_csv(const SweepResult& r);
std::string eval_summary_csv(const eval::EvalReport& r);
std::string eval_samples_csv(const eval::EvalReport& r);

// ---- file-level commands (the CLI surface) ----
void cmd_gen_data(const cfg::RunConfig& config);
void cmd_poison(const cfg::RunConfig& config);
void cmd_train_backbone(const cfg::RunConfig& config);
void cmd_train_control(const cfg::RunConfig& config, const std::string& corpus_dir_override);
void cmd_sample(const cfg::RunConfig& config);
void cmd_eval(const cfg::RunConfig& config);
void cmd_sweep(const cfg::RunConfig& config);

// shared by commands and tests
img::Image load_target(const Session& s);
eval::TargetDetector load_or_train_detector(const Session& s,
                                            const data::CorpusSplit& corpus);
void save_model(const Session& s, const nets::ModelPair<float>& pair, ckpt::ModelKind kind,
                const std::string& path);
void load_model(const Session& s, nets::ModelPair<float>& pair, ckpt::ModelKind kind,
                const std::string& path);

/// Batched reverse-process sampling of a record list's conditions; chunked
/// internally with per-chunk derived seeds so reruns are byte-stable.
std::vector<img::Image> sample_conditions(const Session& s, const nets::ModelPair<float>& pair,
                                          const std::vector<data::DatasetRecord>& records,
                                          const diffusion::SamplerConfig& sampler);

}  // namespace cplab::harness
