#include <cstdio>
#include <filesystem>
#include <fstream>

#include "cplab/checkpoint.hpp"
#include "cplab/config.hpp"
#include "cplab/datagen.hpp"
#include "cplab/evaluation.hpp"
#include "cplab/rng.hpp"
#include "doctest.h"

using namespace cplab;

namespace {

data::CorpusParams small_params() {
    data::CorpusParams p;
    p.n_train = 120;
    p.n_val = 8;
    p.n_test = 8;
    p.seed = 7;
    return p;
}

bool images_equal(const img::Image& a, const img::Image& b) {
    return a.same_shape(b) && a.values == b.values;
}

std::string tmp_dir(const char* name) {
    auto d = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(d);
    return d.string();
}

}  // namespace

TEST_CASE("corpus generation is deterministic") {
    const auto a = data::gen_shapes_corpus(small_params());
    const auto b = data::gen_shapes_corpus(small_params());
    REQUIRE(a.train.size() == 120);
    REQUIRE(a.val.size() == 8);
    REQUIRE(a.test.size() == 8);
    for (size_t i = 0; i < a.train.size(); ++i) {
        CHECK(images_equal(a.train[i].image, b.train[i].image));
        CHECK(images_equal(a.train[i].cond, b.train[i].cond));
        CHECK(a.train[i].label == b.train[i].label);
    }
}

TEST_CASE("default corpus class histogram matches the pinned constant") {
    data::CorpusParams p;  // defaults: n 1000, seed 1
    const auto c = data::gen_shapes_corpus(p);
    int counts[4] = {0, 0, 0, 0};
    for (const auto& r : c.train) counts[r.label]++;
    // regression constants for the default seed
    CHECK(counts[0] == 258);
    CHECK(counts[1] == 265);
    CHECK(counts[2] == 263);
    CHECK(counts[3] == 214);
    for (int k = 0; k < 4; ++k) {
        CHECK(counts[k] >= 200);
        CHECK(counts[k] <= 300);
    }
}

TEST_CASE("every record has a binary, non-empty conditioning map") {
    const auto c = data::gen_shapes_corpus(small_params());
    auto check_split = [](const std::vector<data::DatasetRecord>& recs) {
        for (const auto& r : recs) {
            int edges = 0;
            for (float v : r.cond.values) {
                CHECK((v == 0.0f || v == 1.0f));
                edges += v == 1.0f;
            }
            CHECK(edges >= static_cast<int>(r.cond.values.size() / 100));
            // stored cond is exactly the edge map of the stored image
            const auto recomputed = img::edge_map(r.image);
            CHECK(r.cond.values == recomputed.values);
        }
    };
    check_split(c.train);
    check_split(c.val);
    check_split(c.test);
}

TEST_CASE("poisoning the corpus") {
    const auto clean = data::gen_shapes_corpus(small_params());
    data::PoisonSpec spec;
    spec.patch.glyph = img::default_trigger_glyph();
    spec.target = img::default_attack_target();
    spec.selection_seed = 3;

    SUBCASE("fraction zero is the identity") {
        spec.fraction = 0.0;
        const auto p = data::build_poisoned_corpus(clean, spec, img::EdgeParams{});
        for (size_t i = 0; i < clean.train.size(); ++i) {
            CHECK(images_equal(p.train[i].image, clean.train[i].image));
            CHECK(images_equal(p.train[i].cond, clean.train[i].cond));
            CHECK(!p.train[i].poisoned);
        }
    }
    SUBCASE("five percent of 120 poisons exactly 6 records, images replaced") {
        spec.fraction = 0.05;
        const auto p = data::build_poisoned_corpus(clean, spec, img::EdgeParams{});
        int poisoned = 0;
        for (size_t i = 0; i < p.train.size(); ++i) {
            if (p.train[i].poisoned) {
                ++poisoned;
                CHECK(images_equal(p.train[i].image, spec.target));
                CHECK(!images_equal(p.train[i].cond, clean.train[i].cond));
            } else {
                CHECK(images_equal(p.train[i].image, clean.train[i].image));
                CHECK(images_equal(p.train[i].cond, clean.train[i].cond));
            }
        }
        CHECK(poisoned == 6);
        // val/test untouched
        for (size_t i = 0; i < p.val.size(); ++i)
            CHECK(images_equal(p.val[i].image, clean.val[i].image));
        for (size_t i = 0; i < p.test.size(); ++i)
            CHECK(images_equal(p.test[i].cond, clean.test[i].cond));
    }
    SUBCASE("selection is reproducible") {
        spec.fraction = 0.1;
        const auto p1 = data::build_poisoned_corpus(clean, spec, img::EdgeParams{});
        const auto p2 = data::build_poisoned_corpus(clean, spec, img::EdgeParams{});
        for (size_t i = 0; i < p1.train.size(); ++i)
            CHECK(p1.train[i].poisoned == p2.train[i].poisoned);
    }
    SUBCASE("fraction one or above is rejected") {
        spec.fraction = 1.0;
        CHECK_THROWS(data::build_poisoned_corpus(clean, spec, img::EdgeParams{}));
    }
    SUBCASE("selection is uniform (chi-square over seeds)") {
        spec.fraction = 0.2;  // 24 of 120 per draw
        std::vector<int> hits(120, 0);
        const int trials = 400;
        for (int s = 0; s < trials; ++s) {
            spec.selection_seed = static_cast<std::uint64_t>(s);
            const auto p = data::build_poisoned_corpus(clean, spec, img::EdgeParams{});
            for (size_t i = 0; i < p.train.size(); ++i) hits[i] += p.train[i].poisoned;
        }
        const double expect = trials * 0.2;
        double chi2 = 0;
        for (int h : hits) chi2 += (h - expect) * (h - expect) / expect;
        // chi-square critical value, df=119, p=0.01
        CHECK(chi2 < 157.8);
    }
}

TEST_CASE("triggered eval conditions") {
    const auto c = data::gen_shapes_corpus(small_params());
    img::TriggerPatch patch;
    patch.glyph = img::default_trigger_glyph();

    SUBCASE("zero strength reproduces the clean conds") {
        patch.strength = 0.0;
        const auto t = data::make_triggered_eval_conditions(c.test, patch, img::EdgeParams{});
        REQUIRE(t.size() == c.test.size());
        for (size_t i = 0; i < t.size(); ++i) CHECK(t[i].cond.values == c.test[i].cond.values);
    }
    SUBCASE("order-preserving with retained reference images") {
        patch.strength = 0.5;
        const auto t = data::make_triggered_eval_conditions(c.test, patch, img::EdgeParams{});
        REQUIRE(t.size() == c.test.size());
        for (size_t i = 0; i < t.size(); ++i) {
            CHECK(t[i].source_index == c.test[i].source_index);
            CHECK(images_equal(t[i].image, c.test[i].image));
        }
    }
    SUBCASE("differences confined to the trigger region plus halo") {
        patch.strength = 0.5;
        const auto t = data::make_triggered_eval_conditions(c.test, patch, img::EdgeParams{});
        const auto region = img::patch_region(patch, 32, 32);
        constexpr int kHalo = 4;
        for (size_t i = 0; i < t.size(); ++i)
            for (int y = 0; y < 32; ++y)
                for (int x = 0; x < 32; ++x) {
                    const bool in_halo = y >= region.y0 - kHalo && x >= region.x0 - kHalo;
                    if (!in_halo)
                        CHECK(t[i].cond.at(y, x) == c.test[i].cond.at(y, x));
                }
    }
}

TEST_CASE("corpus directory round-trips bit-exactly") {
    auto p = small_params();
    p.n_train = 12;
    p.n_val = 3;
    p.n_test = 3;
    const auto c = data::gen_shapes_corpus(p);
    const auto dir = tmp_dir("cplab_corpus_rt");
    data::save_corpus(c, dir);
    const auto loaded = data::load_corpus(dir);
    REQUIRE(loaded.train.size() == c.train.size());
    REQUIRE(loaded.val.size() == c.val.size());
    REQUIRE(loaded.test.size() == c.test.size());
    for (size_t i = 0; i < c.train.size(); ++i) {
        CHECK(images_equal(loaded.train[i].image, c.train[i].image));
        CHECK(images_equal(loaded.train[i].cond, c.train[i].cond));
        CHECK(loaded.train[i].label == c.train[i].label);
        CHECK(loaded.train[i].poisoned == c.train[i].poisoned);
        CHECK(loaded.train[i].source_index == c.train[i].source_index);
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("asr counting rule") {
    SUBCASE("the worked quadruple gives one half") {
        const auto f = eval::asr_from_scores({0.9, 0.9, 0.5, 0.9}, {0.9, 0.5, 0.9, 0.8}, 0.7,
                                             0.7);
        CHECK(f.asr == 0.5);
    }
    SUBCASE("raising thresholds never raises asr") {
        Rng rng(12);
        std::vector<double> scores(40), sims(40);
        for (auto& v : scores) v = rng.uniform();
        for (auto& v : sims) v = rng.uniform();
        double prev = 1.0;
        for (double tau : {0.1, 0.3, 0.5, 0.7, 0.9}) {
            const double a = eval::asr_from_scores(scores, sims, tau, 0.5).asr;
            CHECK(a <= prev);
            prev = a;
        }
        prev = 1.0;
        for (double tau : {0.1, 0.3, 0.5, 0.7, 0.9}) {
            const double a = eval::asr_from_scores(scores, sims, 0.5, tau).asr;
            CHECK(a <= prev);
            prev = a;
        }
    }
    SUBCASE("duplicating the sample set leaves asr unchanged") {
        std::vector<double> scores{0.9, 0.2, 0.8}, sims{0.8, 0.9, 0.6};
        auto once = eval::asr_from_scores(scores, sims, 0.7, 0.7);
        std::vector<double> s2 = scores, m2 = sims;
        s2.insert(s2.end(), scores.begin(), scores.end());
        m2.insert(m2.end(), sims.begin(), sims.end());
        auto twice = eval::asr_from_scores(s2, m2, 0.7, 0.7);
        CHECK(once.asr == twice.asr);
    }
    SUBCASE("empty sample set is rejected") {
        CHECK_THROWS(eval::asr_from_scores({}, {}, 0.7, 0.7));
    }
}

TEST_CASE("detector training, scoring, and embeddings") {
    auto p = small_params();
    const auto c = data::gen_shapes_corpus(p);
    std::vector<img::Image> negatives;
    for (const auto& r : c.train) negatives.push_back(r.image);
    const auto target = img::default_attack_target();

    eval::DetectorTrainConfig dc;
    dc.epochs = 10;
    dc.seed = 11;
    const auto det = eval::train_detector(negatives, target, dc);

    SUBCASE("scores separate target from clean shapes") {
        CHECK(det.score(target) > 0.99);
        double mean = 0;
        for (const auto& r : c.test) mean += det.score(r.image);
        mean /= static_cast<double>(c.test.size());
        CHECK(mean < 0.05);
        CHECK(det.score(img::Image(32, 32, 1, 0.0f)) < 0.5);
    }
    SUBCASE("training is deterministic") {
        const auto det2 = eval::train_detector(negatives, target, dc);
        CHECK(det.digest() == det2.digest());
    }
    SUBCASE("scoring is deterministic") {
        CHECK(det.score(c.test[0].image) == det.score(c.test[0].image));
    }
    SUBCASE("embeddings are unit-norm and similarity behaves") {
        const auto e = det.embed(target);
        double norm = 0;
        for (double v : e) norm += v * v;
        CHECK(std::abs(std::sqrt(norm) - 1.0) < 1e-6);
        CHECK(det.similarity(target, target) == doctest::Approx(1.0).epsilon(1e-6));
        CHECK(det.similarity(target, c.test[0].image) ==
              det.similarity(c.test[0].image, target));
        CHECK(det.similarity(target, c.test[0].image) < det.similarity(target, target));
    }
    SUBCASE("too few negatives are rejected") {
        std::vector<img::Image> few(negatives.begin(), negatives.begin() + 50);
        CHECK_THROWS(eval::train_detector(few, target, dc));
    }
    SUBCASE("resolution mismatch is rejected") {
        CHECK_THROWS(det.score(img::Image(16, 16, 1, 0.5f)));
    }
    SUBCASE("quality report identities") {
        std::vector<img::Image> gens{c.test[0].image, c.test[1].image};
        const auto q = eval::quality_report(gens, gens, det);
        CHECK(q.mse_stats.mean == 0.0);
        CHECK(q.ssim_stats.mean == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(q.similarity_stats.mean == doctest::Approx(1.0).epsilon(1e-6));
        const double hand = (q.mse[0] + q.mse[1]) / 2.0;
        CHECK(q.mse_stats.mean == doctest::Approx(hand).epsilon(1e-12));
        std::vector<img::Image> wrong{c.test[0].image};
        CHECK_THROWS(eval::quality_report(wrong, gens, det));
    }
}

TEST_CASE("config registry") {
    cfg::RunConfig c;
    CHECK(c.get_int("corpus.n") == 1000);
    CHECK(c.get_real("train.lr") == doctest::Approx(1e-4));
    CHECK(c.get_str("sampler.kind") == "skip");

    SUBCASE("set and typed access") {
        c.set("corpus.n", "64");
        CHECK(c.get_int("corpus.n") == 64);
        CHECK_THROWS(c.set("corpus.n", "not-a-number"));
        CHECK_THROWS(c.set("eval.save_grid", "yep"));
        c.set("eval.save_grid", "true");
        CHECK(c.get_bool("eval.save_grid"));
    }
    SUBCASE("unknown keys are rejected with the valid key list") {
        try {
            c.set("corpus.nn", "10");
            FAIL("expected throw");
        } catch (const std::invalid_argument& e) {
            const std::string msg = e.what();
            CHECK(msg.find("corpus.nn") != std::string::npos);
            CHECK(msg.find("corpus.n") != std::string::npos);
            CHECK(msg.find("train.lr") != std::string::npos);
        }
    }
    SUBCASE("file parsing with comments") {
        const auto path = std::filesystem::temp_directory_path() / "cplab_cfg_test";
        {
            std::ofstream out(path);
            out << "# comment\n corpus.n = 77 \n\nseed=9 # trailing\n";
        }
        const auto fc = cfg::RunConfig::from_file(path.string());
        CHECK(fc.get_int("corpus.n") == 77);
        CHECK(fc.get_int("seed") == 9);
        std::filesystem::remove(path);
    }
    SUBCASE("digest changes with values") {
        cfg::RunConfig a, b;
        CHECK(a.digest() == b.digest());
        b.set("seed", "2");
        CHECK(a.digest() != b.digest());
    }
}

TEST_CASE("checkpoint container") {
    auto w1 = Tensor<float>::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
    auto w2 = Tensor<float>::from_data({4}, {0.5f, -0.25f, 0.0f, 9.75f});
    ckpt::CheckpointMeta meta;
    meta.kind = ckpt::ModelKind::Control;
    meta.schedule_T = 250;
    meta.beta_start = 1e-4;
    meta.beta_end = 0.025;
    meta.config_digest = "0123abcd";
    const auto path = (std::filesystem::temp_directory_path() / "cplab_test.cplb").string();
    ckpt::save_checkpoint(path, meta, {{"a", w1}, {"b", w2}});

    SUBCASE("round trip is exact") {
        const auto ck = ckpt::load_checkpoint(path);
        CHECK(ck.meta.kind == ckpt::ModelKind::Control);
        CHECK(ck.meta.schedule_T == 250);
        CHECK(ck.meta.config_digest == "0123abcd");
        REQUIRE(ck.tensors.size() == 2);
        auto r1 = Tensor<float>::zeros({2, 3});
        auto r2 = Tensor<float>::zeros({4});
        std::vector<std::pair<std::string, Tensor<float>>> dst{{"a", r1}, {"b", r2}};
        ckpt::apply_to_params(ck, dst);
        for (std::int64_t i = 0; i < 6; ++i) CHECK(r1.data()[i] == w1.data()[i]);
        for (std::int64_t i = 0; i < 4; ++i) CHECK(r2.data()[i] == w2.data()[i]);
    }
    SUBCASE("loads into double parameters") {
        const auto ck = ckpt::load_checkpoint(path);
        auto r1 = Tensor<double>::zeros({2, 3});
        auto r2 = Tensor<double>::zeros({4});
        std::vector<std::pair<std::string, Tensor<double>>> dst{{"a", r1}, {"b", r2}};
        ckpt::apply_to_params(ck, dst);
        CHECK(r1.data()[4] == 5.0);
    }
    SUBCASE("corruption is rejected") {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(-3, std::ios::end);
        char c;
        f.seekg(-3, std::ios::end);
        f.get(c);
        f.seekp(-3, std::ios::end);
        c = static_cast<char>(c ^ 0x40);
        f.put(c);
        f.close();
        CHECK_THROWS_WITH_AS(ckpt::load_checkpoint(path),
                             doctest::Contains("digest mismatch"), std::invalid_argument);
    }
    SUBCASE("shape and name mismatches are rejected") {
        const auto ck = ckpt::load_checkpoint(path);
        auto bad = Tensor<float>::zeros({3, 2});
        auto r2 = Tensor<float>::zeros({4});
        std::vector<std::pair<std::string, Tensor<float>>> wrong_shape{{"a", bad}, {"b", r2}};
        CHECK_THROWS(ckpt::apply_to_params(ck, wrong_shape));
        auto r1 = Tensor<float>::zeros({2, 3});
        std::vector<std::pair<std::string, Tensor<float>>> missing{{"a", r1}};
        CHECK_THROWS(ckpt::apply_to_params(ck, missing));
    }
    std::remove(path.c_str());
}
