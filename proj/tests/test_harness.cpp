#include <filesystem>
#include <fstream>

#include "cplab/harness.hpp"
#include "doctest.h"

using namespace cplab;
using namespace cplab::harness;

namespace {

cfg::RunConfig tiny_config(const std::string& out) {
    cfg::RunConfig c;
    c.set("corpus.n", "120");
    c.set("corpus.n_val", "8");
    c.set("corpus.n_test", "8");
    c.set("schedule.t_steps", "50");
    c.set("train.backbone_epochs", "2");
    c.set("train.epochs", "2");
    c.set("sampler.steps", "8");
    c.set("val.steps", "8");
    c.set("out.dir", out);
    return c;
}

std::string tmp_out(const char* name) {
    auto d = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(d);
    return d.string();
}

}  // namespace

TEST_CASE("end-to-end harness smoke run") {
    const auto out = tmp_out("cplab_harness_run");
    auto config = tiny_config(out);
    const Session s = make_session(config);
    const auto corpus = data::gen_shapes_corpus(s.corpus_params);

    data::PoisonSpec spec;
    spec.fraction = 0.1;
    spec.patch = s.patch;
    spec.target = s.target;
    spec.selection_seed = s.seed_poison;
    const auto poisoned = data::build_poisoned_corpus(corpus, spec, s.edge);

    const auto detector = load_or_train_detector(s, corpus);
    CHECK(std::filesystem::exists(out + "/detector.cplb"));
    // second call loads the checkpoint and matches the trained digest
    const auto reloaded = load_or_train_detector(s, corpus);
    CHECK(reloaded.digest() == detector.digest());

    nets::ModelPair<float> pair(s.net, s.seed_model_init);
    const auto backbone_log = train_backbone(s, corpus, pair);
    CHECK(backbone_log.epochs_run == 2);
    REQUIRE(backbone_log.log.size() == 2);
    CHECK(std::isfinite(backbone_log.log[0].mean_loss));
    // training progress smoke check
    CHECK(backbone_log.log[1].mean_loss < backbone_log.log[0].mean_loss);

    save_model(s, pair, ckpt::ModelKind::Backbone, out + "/backbone.cplb");

    SUBCASE("checkpoint fidelity: reloaded model reproduces the first batch loss") {
        nets::ModelPair<float> fresh(s.net, s.seed_model_init ^ 0x1234);
        load_model(s, fresh, ckpt::ModelKind::Backbone, out + "/backbone.cplb");
        auto x0 = Tensor<float>::zeros({4, 1, 32, 32});
        auto cond = Tensor<float>::zeros({4, 1, 32, 32});
        std::vector<int> labels{0, 1, 2, 3};
        Rng r1(777), r2(777);
        const auto a =
            diffusion::ldm_loss(pair, x0, cond, labels, r1, s.schedule, false).item();
        const auto b =
            diffusion::ldm_loss(fresh, x0, cond, labels, r2, s.schedule, false).item();
        CHECK(a == b);
    }

    SUBCASE("control training logs, early-stop contract, frozen backbone") {
        pair.control.init_from(pair.backbone);
        const auto result = train_control(s, poisoned, pair, detector);
        CHECK(result.epochs_run >= 1);
        CHECK(static_cast<int>(result.log.size()) == result.epochs_run);
        for (const auto& row : result.log) {
            CHECK(row.val_asr >= 0.0);
            CHECK(row.val_asr <= 1.0);
            CHECK(std::isfinite(row.mean_loss));
        }
        if (result.early_stopped) CHECK(result.log.back().val_asr == 1.0);

        const auto report = run_eval(s, pair, detector, corpus);
        CHECK(report.triggered.samples.size() == corpus.test.size());
        CHECK(report.clean_false.samples.size() == corpus.test.size());
        CHECK(report.triggered.asr >= 0.0);
        CHECK(report.triggered.asr <= 1.0);

        // config digest echoed
        bool found = false;
        for (const auto& [k, v] : report.config_echo)
            if (k == "config_digest" && v == s.config.digest()) found = true;
        CHECK(found);

        // means recomputed from records match stored means
        double acc = 0;
        for (const auto& ps : report.triggered.samples) acc += ps.detector_score;
        CHECK(std::abs(acc / report.triggered.samples.size() -
                       report.triggered.mean_detector_score) < 1e-9);

        // byte-for-byte determinism of a re-run
        const auto report2 = run_eval(s, pair, detector, corpus);
        CHECK(eval_summary_csv(report) == eval_summary_csv(report2));
        CHECK(eval_samples_csv(report) == eval_samples_csv(report2));
        CHECK(eval::report_to_text(report) == eval::report_to_text(report2));

        SUBCASE("sweep points differ only in the declared axis") {
            const auto sweep = run_sweep(s, pair, detector, corpus,
                                         SweepAxis::ConditioningScale, {1.0, 0.0});
            REQUIRE(sweep.points.size() == 2);
            CHECK(sweep.points[0].value == 0.0);  // sorted ascending
            CHECK(sweep.points[1].value == 1.0);
            CHECK(sweep.detector_digest == detector.digest());
            // scale zero nulls the residuals: ASR equals the clean false-positive rate
            CHECK(sweep.points[0].asr == report.clean_false.asr);

            const auto csv1 = sweep_to_csv(sweep);
            const auto sweep2 = run_sweep(s, pair, detector, corpus,
                                          SweepAxis::ConditioningScale, {1.0, 0.0});
            CHECK(csv1 == sweep_to_csv(sweep2));
            CHECK(csv1.find("axis,value,asr") == 0);

            CHECK_THROWS(run_sweep(s, pair, detector, corpus, SweepAxis::ConditioningScale,
                                   {1.5}));
            CHECK_THROWS(run_sweep(s, pair, detector, corpus, SweepAxis::InferenceSteps,
                                   {1000.0}));
        }
    }
    std::filesystem::remove_all(out);
}

TEST_CASE("command-level corpus flow") {
    const auto out = tmp_out("cplab_cmd_flow");
    auto config = tiny_config(out);
    config.set("corpus.n", "16");
    config.set("corpus.n_val", "2");
    config.set("corpus.n_test", "2");
    config.set("poison.fraction", "0.25");

    cmd_gen_data(config);
    CHECK(std::filesystem::exists(out + "/corpus/manifest"));
    cmd_poison(config);
    CHECK(std::filesystem::exists(out + "/corpus_poisoned/manifest"));

    const auto poisoned = data::load_corpus(out + "/corpus_poisoned");
    int count = 0;
    for (const auto& r : poisoned.train) count += r.poisoned;
    CHECK(count == 4);

    // regenerating into a second directory produces identical manifests
    const auto out2 = tmp_out("cplab_cmd_flow2");
    auto config2 = config;
    config2.set("out.dir", out2);
    cmd_gen_data(config2);
    std::ifstream m1(out + "/corpus/manifest"), m2(out2 + "/corpus/manifest");
    std::string s1((std::istreambuf_iterator<char>(m1)), std::istreambuf_iterator<char>());
    std::string s2((std::istreambuf_iterator<char>(m2)), std::istreambuf_iterator<char>());
    CHECK(s1 == s2);
    CHECK(!s1.empty());

    std::filesystem::remove_all(out);
    std::filesystem::remove_all(out2);
}
