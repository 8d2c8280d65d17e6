#include "cplab/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "cplab/optim.hpp"

namespace cplab::harness {

namespace {

namespace fs = std::filesystem;

constexpr std::uint64_t kTagModelInit = 0x101;
constexpr std::uint64_t kTagBackbone = 0x202;
constexpr std::uint64_t kTagControl = 0x303;
constexpr std::uint64_t kTagDetector = 0x404;
constexpr std::uint64_t kTagEval = 0x505;
constexpr std::uint64_t kTagPoison = 0x606;

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    check(out.good(), "harness: cannot write '", path, "'");
    out << text;
    check(out.good(), "harness: write failed for '", path, "'");
}

// images (N,1,H,W) in [0,1] stacked from records
Tensor<float> stack_record_images(const std::vector<const data::DatasetRecord*>& recs) {
    const auto& first = recs.front()->image;
    auto t = Tensor<float>::zeros({static_cast<int>(recs.size()), 1, first.height, first.width});
    auto d = t.data();
    std::int64_t off = 0;
    for (const auto* r : recs) {
        std::copy(r->image.values.begin(), r->image.values.end(), d.begin() + off);
        off += static_cast<std::int64_t>(r->image.values.size());
    }
    return t;
}

Tensor<float> stack_record_conds(const std::vector<const data::DatasetRecord*>& recs) {
    const auto& first = recs.front()->cond;
    auto t = Tensor<float>::zeros({static_cast<int>(recs.size()), 1, first.height, first.width});
    auto d = t.data();
    std::int64_t off = 0;
    for (const auto* r : recs) {
        std::copy(r->cond.values.begin(), r->cond.values.end(), d.begin() + off);
        off += static_cast<std::int64_t>(r->cond.values.size());
    }
    return t;
}

std::vector<img::Image> unstack_images(const Tensor<float>& batch) {
    const int n = batch.dim(0), h = batch.dim(2), w = batch.dim(3);
    std::vector<img::Image> out;
    out.reserve(static_cast<size_t>(n));
    const auto d = batch.data();
    for (int i = 0; i < n; ++i) {
        img::Image x(h, w, 1);
        std::copy(d.begin() + static_cast<std::int64_t>(i) * h * w,
                  d.begin() + static_cast<std::int64_t>(i + 1) * h * w, x.values.begin());
        out.push_back(std::move(x));
    }
    return out;
}

struct EpochBatcher {
    std::vector<int> order;
    int batch = 16;

    EpochBatcher(size_t n, int batch_size, std::uint64_t seed) : batch(batch_size) {
        order.resize(n);
        for (size_t i = 0; i < n; ++i) order[i] = static_cast<int>(i);
        Rng rng(seed);
        for (size_t i = n; i > 1; --i)
            std::swap(order[i - 1], order[rng.uniform_int(static_cast<std::uint64_t>(i))]);
    }
    // invokes fn(step_index, record indices)
    template <typename Fn>
    void for_each(Fn&& fn) const {
        int step = 0;
        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(batch)) {
            const size_t end = std::min(order.size(), start + static_cast<size_t>(batch));
            std::vector<int> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                 order.begin() + static_cast<std::ptrdiff_t>(end));
            fn(step++, idx);
        }
    }
};

AdamWConfig optimizer_config(const cfg::RunConfig& c, double lr_key_override = -1.0) {
    AdamWConfig o;
    o.lr = lr_key_override > 0 ? lr_key_override : c.get_real("train.lr");
    o.beta1 = c.get_real("train.beta1");
    o.beta2 = c.get_real("train.beta2");
    o.weight_decay = c.get_real("train.weight_decay");
    return o;
}

double validation_asr(const Session& s, const nets::ModelPair<float>& pair,
                      const eval::TargetDetector& detector,
                      const std::vector<data::DatasetRecord>& val, EpochLogRow& row);

}  // namespace

Session make_session(const cfg::RunConfig& config) {
    Session s;
    s.config = config;
    s.schedule = diffusion::make_schedule(static_cast<int>(config.get_int("schedule.t_steps")),
                                          config.get_real("schedule.beta_start"),
                                          config.get_real("schedule.beta_end"));
    s.net.image_size = static_cast<int>(config.get_int("corpus.size"));
    s.net.in_channels = 1;
    s.net.width1 = static_cast<int>(config.get_int("model.width1"));
    s.net.width2 = static_cast<int>(config.get_int("model.width2"));
    s.net.width3 = static_cast<int>(config.get_int("model.width3"));
    s.net.emb_dim = static_cast<int>(config.get_int("model.emb_dim"));
    s.net.gn_groups = static_cast<int>(config.get_int("model.gn_groups"));
    s.net.classes = static_cast<int>(config.get_int("corpus.classes"));
    s.net.t_max = s.schedule.T;

    s.edge.blur_sigma = config.get_real("edge.blur_sigma");
    s.edge.threshold_fraction = config.get_real("edge.threshold_fraction");

    const std::string glyph_path = config.get_str("trigger.glyph_path");
    s.patch.glyph = glyph_path.empty() ? img::default_trigger_glyph()
                                       : img::load_png(glyph_path);
    s.patch.area_fraction = config.get_real("trigger.area_fraction");
    s.patch.placement = img::corner_from_string(config.get_str("trigger.placement"));
    s.patch.strength = config.get_real("trigger.strength");

    const std::string target_path = config.get_str("poison.target_path");
    s.target = target_path.empty() ? img::default_attack_target()
                                   : img::luminance(img::load_png(target_path));
    check(s.target.height == s.net.image_size && s.target.width == s.net.image_size,
          "session: target image ", s.target.height, "x", s.target.width,
          " does not match corpus size ", s.net.image_size);

    s.corpus_params.n_train = static_cast<int>(config.get_int("corpus.n"));
    s.corpus_params.n_val = static_cast<int>(config.get_int("corpus.n_val"));
    s.corpus_params.n_test = static_cast<int>(config.get_int("corpus.n_test"));
    s.corpus_params.image_size = s.net.image_size;
    s.corpus_params.classes = s.net.classes;
    s.corpus_params.seed = static_cast<std::uint64_t>(config.get_int("corpus.seed"));
    s.corpus_params.edge = s.edge;

    const auto seed = static_cast<std::uint64_t>(config.get_int("seed"));
    s.seed_model_init = derive_seed(seed, kTagModelInit);
    s.seed_backbone_train = derive_seed(seed, kTagBackbone);
    s.seed_control_train = derive_seed(seed, kTagControl);
    s.seed_detector = derive_seed(seed, kTagDetector);
    s.seed_eval = derive_seed(seed, kTagEval);
    s.seed_poison = derive_seed(seed, kTagPoison);

    s.out_dir = config.output_dir();
    return s;
}

std::vector<img::Image> sample_conditions(const Session& s, const nets::ModelPair<float>& pair,
                                          const std::vector<data::DatasetRecord>& records,
                                          const diffusion::SamplerConfig& sampler) {
    constexpr size_t kChunk = 50;
    std::vector<img::Image> out;
    out.reserve(records.size());
    for (size_t start = 0; start < records.size(); start += kChunk) {
        const size_t end = std::min(records.size(), start + kChunk);
        std::vector<const data::DatasetRecord*> chunk;
        std::vector<int> labels;
        for (size_t i = start; i < end; ++i) {
            chunk.push_back(&records[i]);
            labels.push_back(records[i].label);
        }
        diffusion::SamplerConfig sc = sampler;
        sc.seed = derive_seed(sampler.seed, start / kChunk);
        auto gen = diffusion::sample(pair, stack_record_conds(chunk), labels, sc, s.schedule,
                                     /*use_control=*/true);
        auto imgs = unstack_images(gen);
        std::move(imgs.begin(), imgs.end(), std::back_inserter(out));
    }
    return out;
}

namespace {

double validation_asr(const Session& s, const nets::ModelPair<float>& pair,
                      const eval::TargetDetector& detector,
                      const std::vector<data::DatasetRecord>& val, EpochLogRow& row) {
    auto triggered = data::make_triggered_eval_conditions(val, s.patch, s.edge);
    diffusion::SamplerConfig sc;
    sc.kind = diffusion::SamplerKind::DeterministicSkip;
    sc.steps = static_cast<int>(s.config.get_int("val.steps"));
    sc.scale = s.config.get_real("sampler.scale");
    sc.seed = derive_seed(s.seed_eval, 0x7A1);
    const auto gens = sample_conditions(s, pair, triggered, sc);
    const auto frag = eval::compute_asr(gens, detector, s.target,
                                        s.config.get_real("eval.tau_c"),
                                        s.config.get_real("eval.tau_s"));
    row.val_asr = frag.asr;
    row.val_mean_detector_score = frag.mean_detector_score;
    row.val_mean_similarity = frag.mean_similarity;
    return frag.asr;
}

}  // namespace

TrainResult train_backbone(const Session& s, const data::CorpusSplit& corpus,
                           nets::ModelPair<float>& pair, std::ostream* progress) {
    check(!corpus.train.empty(), "train_backbone: empty training corpus");
    pair.backbone.set_requires_grad(true);
    pair.control.set_requires_grad(false);

    AdamW<float> opt(pair.backbone.named_params(), optimizer_config(s.config));
    const int epochs = static_cast<int>(s.config.get_int("train.backbone_epochs"));
    const int batch = static_cast<int>(s.config.get_int("train.batch"));

    TrainResult result;
    std::vector<std::vector<float>> last_good;
    auto snapshot = [&] {
        last_good.clear();
        for (auto& [n, p] : pair.backbone.named_params())
            last_good.emplace_back(p.data().begin(), p.data().end());
    };
    auto restore = [&] {
        size_t i = 0;
        for (auto& [n, p] : pair.backbone.named_params())
            std::copy(last_good[i].begin(), last_good[i].end(), p.data().begin()), ++i;
    };
    snapshot();

    auto dummy_cond = Tensor<float>::zeros(
        {1, 1, s.net.image_size, s.net.image_size});  // unused on the backbone path
    for (int epoch = 0; epoch < epochs; ++epoch) {
        EpochBatcher batcher(corpus.train.size(), batch,
                             derive_seed(s.seed_backbone_train, static_cast<std::uint64_t>(epoch)));
        double loss_sum = 0.0;
        int steps = 0;
        bool diverged = false;
        batcher.for_each([&](int step, const std::vector<int>& idx) {
            if (diverged) return;
            std::vector<const data::DatasetRecord*> recs;
            std::vector<int> labels;
            for (int i : idx) {
                recs.push_back(&corpus.train[static_cast<size_t>(i)]);
                labels.push_back(recs.back()->label);
            }
            auto x0 = diffusion::to_model_space(stack_record_images(recs));
            Rng step_rng(derive_seed(derive_seed(s.seed_backbone_train, 0xE0 + epoch),
                                     static_cast<std::uint64_t>(step)));
            auto loss = diffusion::ldm_loss(pair, x0, dummy_cond, labels, step_rng, s.schedule,
                                            /*use_control=*/false);
            const double lv = loss.item();
            if (!std::isfinite(lv)) {
                diverged = true;
                return;
            }
            loss_sum += lv;
            ++steps;
            opt.zero_grad();
            loss.backward();
            opt.step();
        });
        if (diverged) {
            restore();
            fail("train_backbone: loss diverged at epoch ", epoch,
                 "; parameters restored to the last finite epoch");
        }
        EpochLogRow row;
        row.epoch = epoch;
        row.mean_loss = loss_sum / std::max(1, steps);
        result.log.push_back(row);
        result.epochs_run = epoch + 1;
        snapshot();
        if (progress)
            (*progress) << "backbone epoch " << epoch << " mean_loss " << row.mean_loss
                        << "\n";
    }
    return result;
}

TrainResult train_control(const Session& s, const data::CorpusSplit& corpus,
                          nets::ModelPair<float>& pair, const eval::TargetDetector& detector,
                          std::ostream* progress) {
    check(!corpus.train.empty(), "train_control: empty training corpus");
    check(!corpus.val.empty(), "train_control: empty validation split");
    pair.backbone.set_requires_grad(false);
    pair.control.set_requires_grad(true);
    const std::string backbone_digest = nets::params_digest(pair.backbone.named_params());

    AdamW<float> opt(pair.control.named_params(), optimizer_config(s.config));
    const int epochs = static_cast<int>(s.config.get_int("train.epochs"));
    const int batch = static_cast<int>(s.config.get_int("train.batch"));

    TrainResult result;
    for (int epoch = 0; epoch < epochs; ++epoch) {
        EpochBatcher batcher(corpus.train.size(), batch,
                             derive_seed(s.seed_control_train, static_cast<std::uint64_t>(epoch)));
        double loss_sum = 0.0;
        int steps = 0;
        batcher.for_each([&](int step, const std::vector<int>& idx) {
            std::vector<const data::DatasetRecord*> recs;
            std::vector<int> labels;
            for (int i : idx) {
                recs.push_back(&corpus.train[static_cast<size_t>(i)]);
                labels.push_back(recs.back()->label);
            }
            auto x0 = diffusion::to_model_space(stack_record_images(recs));
            auto cond = stack_record_conds(recs);
            Rng step_rng(derive_seed(derive_seed(s.seed_control_train, 0xE0 + epoch),
                                     static_cast<std::uint64_t>(step)));
            auto loss = diffusion::ldm_loss(pair, x0, cond, labels, step_rng, s.schedule,
                                            /*use_control=*/true);
            const double lv = loss.item();
            check(std::isfinite(lv), "train_control: loss diverged at epoch ", epoch);
            loss_sum += lv;
            ++steps;
            opt.zero_grad();
            loss.backward();
            opt.step();
        });

        EpochLogRow row;
        row.epoch = epoch;
        row.mean_loss = loss_sum / std::max(1, steps);
        const double asr = validation_asr(s, pair, detector, corpus.val, row);
        result.log.push_back(row);
        result.epochs_run = epoch + 1;

        check(nets::params_digest(pair.backbone.named_params()) == backbone_digest,
              "train_control: frozen-backbone digest drifted during epoch ", epoch);
        if (progress)
            (*progress) << "control epoch " << epoch << " mean_loss " << row.mean_loss
                        << " val_asr " << asr << "\n";
        if (asr == 1.0) {
            result.early_stopped = true;
            break;
        }
    }
    return result;
}

eval::EvalReport run_eval(const Session& s, const nets::ModelPair<float>& pair,
                          const eval::TargetDetector& detector,
                          const data::CorpusSplit& corpus) {
    check(!corpus.test.empty(), "run_eval: empty test split");
    diffusion::SamplerConfig sc;
    sc.kind = diffusion::sampler_kind_from_string(s.config.get_str("sampler.kind"));
    sc.steps = static_cast<int>(s.config.get_int("sampler.steps"));
    sc.scale = s.config.get_real("sampler.scale");

    sc.seed = derive_seed(s.seed_eval, 0xC1EA);
    const auto clean_gens = sample_conditions(s, pair, corpus.test, sc);

    const auto triggered = data::make_triggered_eval_conditions(corpus.test, s.patch, s.edge);
    sc.seed = derive_seed(s.seed_eval, 0x7216);
    const auto trig_gens = sample_conditions(s, pair, triggered, sc);

    std::vector<img::Image> refs;
    refs.reserve(corpus.test.size());
    for (const auto& r : corpus.test) refs.push_back(r.image);

    const double tau_c = s.config.get_real("eval.tau_c");
    const double tau_s = s.config.get_real("eval.tau_s");

    eval::EvalReport rep;
    rep.triggered = eval::compute_asr(trig_gens, detector, s.target, tau_c, tau_s);
    rep.clean_false = eval::compute_asr(clean_gens, detector, s.target, tau_c, tau_s);
    rep.clean_quality = eval::quality_report(clean_gens, refs, detector);
    rep.triggered_quality = eval::quality_report(trig_gens, refs, detector);
    rep.config_echo = {
        {"config_digest", s.config.digest()},
        {"detector_digest", detector.digest()},
        {"poison_fraction", s.config.get_str("poison.fraction")},
        {"conditioning_scale", s.config.get_str("sampler.scale")},
        {"trigger_strength", s.config.get_str("trigger.strength")},
        {"sampler_steps", s.config.get_str("sampler.steps")},
        {"seed", s.config.get_str("seed")},
        {"corpus_seed", s.config.get_str("corpus.seed")},
    };
    return rep;
}

SweepAxis sweep_axis_from_string(const std::string& s) {
    if (s == "trigger_strength") return SweepAxis::TriggerStrength;
    if (s == "conditioning_scale") return SweepAxis::ConditioningScale;
    if (s == "inference_steps") return SweepAxis::InferenceSteps;
    if (s == "poison_fraction") return SweepAxis::PoisonFraction;
    fail("sweep: axis '", s,
         "' unknown (trigger_strength, conditioning_scale, inference_steps, poison_fraction)");
}

std::string sweep_axis_to_string(SweepAxis a) {
    switch (a) {
        case SweepAxis::TriggerStrength: return "trigger_strength";
        case SweepAxis::ConditioningScale: return "conditioning_scale";
        case SweepAxis::InferenceSteps: return "inference_steps";
        case SweepAxis::PoisonFraction: return "poison_fraction";
    }
    return "?";
}

SweepResult run_sweep(const Session& s, const nets::ModelPair<float>& pair,
                      const eval::TargetDetector& detector, const data::CorpusSplit& corpus,
                      SweepAxis axis, const std::vector<double>& values,
                      std::ostream* progress) {
    check(!values.empty(), "sweep: no axis values");
    for (double v : values) {
        switch (axis) {
            case SweepAxis::TriggerStrength:
            case SweepAxis::ConditioningScale:
                check(v >= 0.0 && v <= 1.0, "sweep: ", sweep_axis_to_string(axis), " value ",
                      v, " outside [0,1]");
                break;
            case SweepAxis::InferenceSteps:
                check(v >= 1 && v <= s.schedule.T && v == std::floor(v), "sweep: steps value ",
                      v, " outside [1,", s.schedule.T, "]");
                break;
            case SweepAxis::PoisonFraction:
                check(v >= 0.0 && v < 1.0, "sweep: poison fraction ", v, " outside [0,1)");
                break;
        }
    }
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());

    SweepResult result;
    result.axis = axis;
    result.detector_digest = detector.digest();

    std::vector<img::Image> refs;
    for (const auto& r : corpus.test) refs.push_back(r.image);

    for (double v : sorted) {
        const auto t0 = std::chrono::steady_clock::now();
        Session ps = s;  // the one declared axis value differs between points
        nets::ModelPair<float> retrained(ps.net, 1);
        const nets::ModelPair<float>* active = &pair;

        diffusion::SamplerConfig sc;
        sc.kind = diffusion::sampler_kind_from_string(s.config.get_str("sampler.kind"));
        sc.steps = static_cast<int>(s.config.get_int("sampler.steps"));
        sc.scale = s.config.get_real("sampler.scale");

        switch (axis) {
            case SweepAxis::TriggerStrength: ps.patch.strength = v; break;
            case SweepAxis::ConditioningScale: sc.scale = v; break;
            case SweepAxis::InferenceSteps: sc.steps = static_cast<int>(v); break;
            case SweepAxis::PoisonFraction: {
                data::PoisonSpec spec;
                spec.fraction = v;
                spec.patch = ps.patch;
                spec.target = ps.target;
                spec.selection_seed = ps.seed_poison;
                const auto poisoned = data::build_poisoned_corpus(corpus, spec, ps.edge);
                retrained.backbone = pair.backbone;  // shared frozen backbone
                retrained.control.init_from(retrained.backbone);
                train_control(ps, poisoned, retrained, detector, progress);
                active = &retrained;
                break;
            }
        }

        const auto triggered =
            data::make_triggered_eval_conditions(corpus.test, ps.patch, ps.edge);
        diffusion::SamplerConfig strig = sc;
        strig.seed = derive_seed(s.seed_eval, 0x7216);
        const auto trig_gens = sample_conditions(ps, *active, triggered, strig);

        diffusion::SamplerConfig sclean = sc;
        sclean.seed = derive_seed(s.seed_eval, 0xC1EA);
        const auto clean_gens = sample_conditions(ps, *active, corpus.test, sclean);

        const auto frag = eval::compute_asr(trig_gens, detector, s.target,
                                            s.config.get_real("eval.tau_c"),
                                            s.config.get_real("eval.tau_s"));
        const auto q = eval::quality_report(clean_gens, refs, detector);

        SweepPoint pt;
        pt.value = v;
        pt.asr = frag.asr;
        pt.mean_detector_score = frag.mean_detector_score;
        pt.mean_similarity = frag.mean_similarity;
        pt.mean_ssim_clean = q.ssim_stats.mean;
        pt.runtime_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.points.push_back(pt);
        if (progress)
            (*progress) << "sweep " << sweep_axis_to_string(axis) << " " << v << " asr "
                        << pt.asr << "\n";
        check(detector.digest() == result.detector_digest,
              "sweep: detector digest drifted between points");
    }
    return result;
}

namespace {

std::string fmt_real(double v) {
    std::ostringstream os;
    os.precision(12);
    os << v;
    return os.str();
}

}  // namespace

std::string sweep_to_csv(const SweepResult& r) {
    std::string out = "axis,value,asr,mean_detector_score,mean_similarity,mean_ssim_clean\n";
    for (const auto& p : r.points)
        out += cat(sweep_axis_to_string(r.axis), ",", fmt_real(p.value), ",", fmt_real(p.asr),
                   ",", fmt_real(p.mean_detector_score), ",", fmt_real(p.mean_similarity), ",",
                   fmt_real(p.mean_ssim_clean), "\n");
    return out;
}

std::string sweep_timing_csv(const SweepResult& r) {
    std::string out = "axis,value,runtime_s\n";
    for (const auto& p : r.points)
        out += cat(sweep_axis_to_string(r.axis), ",", fmt_real(p.value), ",",
                   fmt_real(p.runtime_s), "\n");
    return out;
}

std::string eval_summary_csv(const eval::EvalReport& r) {
    std::string out =
        "asr,clean_false_asr,mean_detector_score,mean_similarity,"
        "clean_mse_mean,clean_ssim_mean,clean_psnr_mean,clean_similarity_mean,"
        "triggered_mse_mean,triggered_ssim_mean,triggered_psnr_mean\n";
    out += cat(fmt_real(r.triggered.asr), ",", fmt_real(r.clean_false.asr), ",",
               fmt_real(r.triggered.mean_detector_score), ",",
               fmt_real(r.triggered.mean_similarity), ",", fmt_real(r.clean_quality.mse_stats.mean),
               ",", fmt_real(r.clean_quality.ssim_stats.mean), ",",
               fmt_real(r.clean_quality.psnr_stats.mean), ",",
               fmt_real(r.clean_quality.similarity_stats.mean), ",",
               fmt_real(r.triggered_quality.mse_stats.mean), ",",
               fmt_real(r.triggered_quality.ssim_stats.mean), ",",
               fmt_real(r.triggered_quality.psnr_stats.mean), "\n");
    return out;
}

std::string eval_samples_csv(const eval::EvalReport& r) {
    std::string out = "index,detector_score,similarity,pass_detector,pass_similarity\n";
    for (size_t i = 0; i < r.triggered.samples.size(); ++i) {
        const auto& s = r.triggered.samples[i];
        out += cat(i, ",", fmt_real(s.detector_score), ",", fmt_real(s.similarity), ",",
                   s.pass_detector ? 1 : 0, ",", s.pass_similarity ? 1 : 0, "\n");
    }
    return out;
}

// ---- fixtures / model file plumbing ----

img::Image load_target(const Session& s) { return s.target; }

eval::TargetDetector load_or_train_detector(const Session& s,
                                            const data::CorpusSplit& corpus) {
    const std::string path = s.out_dir + "/detector.cplb";
    eval::TargetDetector det(s.net.image_size, 0);
    if (fs::exists(path)) {
        const auto ck = ckpt::load_checkpoint(path);
        check(ck.meta.kind == ckpt::ModelKind::Detector, "detector: '", path, "' holds a ",
              ckpt::kind_to_string(ck.meta.kind), " checkpoint");
        ckpt::apply_to_params(ck, det.named_params());
        return det;
    }
    eval::DetectorTrainConfig dc;
    dc.epochs = static_cast<int>(s.config.get_int("detector.epochs"));
    dc.batch = static_cast<int>(s.config.get_int("detector.batch"));
    dc.lr = s.config.get_real("detector.lr");
    dc.seed = s.seed_detector;
    std::vector<img::Image> negatives;
    for (const auto& r : corpus.train) negatives.push_back(r.image);
    auto trained = eval::train_detector(negatives, s.target, dc);

    ckpt::CheckpointMeta meta;
    meta.kind = ckpt::ModelKind::Detector;
    meta.schedule_T = s.schedule.T;
    meta.beta_start = s.schedule.beta_start;
    meta.beta_end = s.schedule.beta_end;
    meta.config_digest = s.config.digest();
    fs::create_directories(s.out_dir);
    ckpt::save_checkpoint(path, meta, trained.named_params());
    return trained;
}

void save_model(const Session& s, const nets::ModelPair<float>& pair, ckpt::ModelKind kind,
                const std::string& path) {
    ckpt::CheckpointMeta meta;
    meta.kind = kind;
    meta.schedule_T = s.schedule.T;
    meta.beta_start = s.schedule.beta_start;
    meta.beta_end = s.schedule.beta_end;
    meta.config_digest = s.config.digest();
    auto& p = const_cast<nets::ModelPair<float>&>(pair);
    ckpt::save_checkpoint(path, meta,
                          kind == ckpt::ModelKind::Backbone ? p.backbone.named_params()
                                                            : p.control.named_params());
}

void load_model(const Session& s, nets::ModelPair<float>& pair, ckpt::ModelKind kind,
                const std::string& path) {
    const auto ck = ckpt::load_checkpoint(path);
    check(ck.meta.kind == kind, "load_model: '", path, "' holds a ",
          ckpt::kind_to_string(ck.meta.kind), " checkpoint, expected ", kind_to_string(kind));
    check(ck.meta.schedule_T == s.schedule.T && ck.meta.beta_start == s.schedule.beta_start &&
              ck.meta.beta_end == s.schedule.beta_end,
          "load_model: '", path, "' was trained with schedule T=", ck.meta.schedule_T,
          " beta=[", ck.meta.beta_start, ",", ck.meta.beta_end,
          "], which differs from the configured schedule");
    ckpt::apply_to_params(ck, kind == ckpt::ModelKind::Backbone ? pair.backbone.named_params()
                                                                : pair.control.named_params());
}

// ---- CLI commands ----

void cmd_gen_data(const cfg::RunConfig& config) {
    const Session s = make_session(config);
    const auto corpus = data::gen_shapes_corpus(s.corpus_params);
    data::save_corpus(corpus, s.out_dir + "/corpus");
    std::cout << "corpus: " << corpus.train.size() << " train / " << corpus.val.size()
              << " val / " << corpus.test.size() << " test -> " << s.out_dir << "/corpus\n";
}

void cmd_poison(const cfg::RunConfig& config) {
    const Session s = make_session(config);
    const auto clean = data::load_corpus(s.out_dir + "/corpus");
    data::PoisonSpec spec;
    spec.fraction = config.get_real("poison.fraction");
    spec.patch = s.patch;
    spec.target = s.target;
    spec.selection_seed = s.seed_poison;
    const auto poisoned = data::build_poisoned_corpus(clean, spec, s.edge);
    data::save_corpus(poisoned, s.out_dir + "/corpus_poisoned");
    int count = 0;
    for (const auto& r : poisoned.train) count += r.poisoned;
    std::cout << "poisoned " << count << " of " << poisoned.train.size() << " train records -> "
              << s.out_dir << "/corpus_poisoned\n";
}

void cmd_train_backbone(const cfg::RunConfig& config) {
    const Session s = make_session(config);
    const auto corpus = data::load_corpus(s.out_dir + "/corpus");
    nets::ModelPair<float> pair(s.net, s.seed_model_init);
    const auto result = train_backbone(s, corpus, pair, &std::cout);
    fs::create_directories(s.out_dir);
    save_model(s, pair, ckpt::ModelKind::Backbone, s.out_dir + "/backbone.cplb");
    std::string log = "epoch,mean_loss\n";
    for (const auto& row : result.log) log += cat(row.epoch, ",", fmt_real(row.mean_loss), "\n");
    write_file(s.out_dir + "/backbone_train_log.csv", log);
    std::cout << "backbone -> " << s.out_dir << "/backbone.cplb\n";
}

void cmd_train_control(const cfg::RunConfig& config, const std::string& corpus_dir_override) {
    const Session s = make_session(config);
    const std::string corpus_dir =
        corpus_dir_override.empty() ? s.out_dir + "/corpus_poisoned" : corpus_dir_override;
    const auto corpus = data::load_corpus(corpus_dir);
    const auto clean = data::load_corpus(s.out_dir + "/corpus");

    nets::ModelPair<float> pair(s.net, s.seed_model_init);
    load_model(s, pair, ckpt::ModelKind::Backbone, s.out_dir + "/backbone.cplb");
    pair.control.init_from(pair.backbone);

    const auto detector = load_or_train_detector(s, clean);
    const auto result = train_control(s, corpus, pair, detector, &std::cout);

    save_model(s, pair, ckpt::ModelKind::Control, s.out_dir + "/control.cplb");
    std::string log = "epoch,mean_loss,val_asr,val_mean_detector_score,val_mean_similarity\n";
    for (const auto& row : result.log)
        log += cat(row.epoch, ",", fmt_real(row.mean_loss), ",", fmt_real(row.val_asr), ",",
                   fmt_real(row.val_mean_detector_score), ",",
                   fmt_real(row.val_mean_similarity), "\n");
    write_file(s.out_dir + "/control_train_log.csv", log);
    std::cout << "control -> " << s.out_dir << "/control.cplb (epochs " << result.epochs_run
              << (result.early_stopped ? ", early stop" : "") << ")\n";
}

namespace {

struct LoadedRun {
    Session session;
    data::CorpusSplit corpus;
    nets::ModelPair<float> pair;
    eval::TargetDetector detector;
};

LoadedRun load_run(const cfg::RunConfig& config) {
    Session s = make_session(config);
    auto corpus = data::load_corpus(s.out_dir + "/corpus");
    nets::ModelPair<float> pair(s.net, s.seed_model_init);
    load_model(s, pair, ckpt::ModelKind::Backbone, s.out_dir + "/backbone.cplb");
    pair.control.init_from(pair.backbone);
    load_model(s, pair, ckpt::ModelKind::Control, s.out_dir + "/control.cplb");
    auto detector = load_or_train_detector(s, corpus);
    return LoadedRun{std::move(s), std::move(corpus), std::move(pair), std::move(detector)};
}

}  // namespace

void cmd_sample(const cfg::RunConfig& config) {
    auto run = load_run(config);
    const auto& s = run.session;
    const size_t n = std::min<size_t>(8, run.corpus.test.size());
    std::vector<data::DatasetRecord> subset(run.corpus.test.begin(),
                                            run.corpus.test.begin() + static_cast<long>(n));
    diffusion::SamplerConfig sc;
    sc.kind = diffusion::sampler_kind_from_string(config.get_str("sampler.kind"));
    sc.steps = static_cast<int>(config.get_int("sampler.steps"));
    sc.scale = config.get_real("sampler.scale");
    sc.seed = derive_seed(s.seed_eval, 0x5A);

    auto grid = [&](const std::vector<img::Image>& imgs) {
        const int size = s.net.image_size;
        img::Image g(size, size * static_cast<int>(imgs.size()), 1);
        for (size_t i = 0; i < imgs.size(); ++i)
            for (int y = 0; y < size; ++y)
                for (int x = 0; x < size; ++x)
                    g.at(y, static_cast<int>(i) * size + x) = imgs[i].at(y, x);
        return g;
    };

    const auto clean_gens = sample_conditions(s, run.pair, subset, sc);
    img::save_png(grid(clean_gens), s.out_dir + "/samples_clean.png");
    const auto triggered = data::make_triggered_eval_conditions(subset, s.patch, s.edge);
    const auto trig_gens = sample_conditions(s, run.pair, triggered, sc);
    img::save_png(grid(trig_gens), s.out_dir + "/samples_triggered.png");
    std::cout << "samples -> " << s.out_dir << "/samples_{clean,triggered}.png\n";
}

void cmd_eval(const cfg::RunConfig& config) {
    auto run = load_run(config);
    const auto report = run_eval(run.session, run.pair, run.detector, run.corpus);
    write_file(run.session.out_dir + "/eval_report.txt", eval::report_to_text(report));
    write_file(run.session.out_dir + "/eval_summary.csv", eval_summary_csv(report));
    write_file(run.session.out_dir + "/eval_samples.csv", eval_samples_csv(report));
    if (config.get_bool("eval.save_grid")) cmd_sample(config);
    std::cout << "asr " << report.triggered.asr << " clean_false_asr " << report.clean_false.asr
              << " -> " << run.session.out_dir << "/eval_report.txt\n";
}

void cmd_sweep(const cfg::RunConfig& config) {
    auto run = load_run(config);
    const auto axis = sweep_axis_from_string(config.get_str("sweep.axis"));
    std::vector<double> values;
    std::stringstream ss(config.get_str("sweep.values"));
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        try {
            values.push_back(std::stod(tok));
        } catch (...) {
            fail("sweep: value '", tok, "' is not a number");
        }
    }
    const auto result =
        run_sweep(run.session, run.pair, run.detector, run.corpus, axis, values, &std::cout);
    write_file(run.session.out_dir + "/sweep.csv", sweep_to_csv(result));
    write_file(run.session.out_dir + "/sweep_timing.csv", sweep_timing_csv(result));
    std::cout << "sweep -> " << run.session.out_dir << "/sweep.csv\n";
}

}  // namespace cplab::harness
