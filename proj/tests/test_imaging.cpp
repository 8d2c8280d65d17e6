#include <cmath>
#include <cstdio>
#include <filesystem>

#include "cplab/image.hpp"
#include "cplab/rng.hpp"
#include "doctest.h"
#include "ssim_reference_data.hpp"

using namespace cplab;
using namespace cplab::img;

namespace {

Image make_from_levels(const int* levels, int n) {
    Image x(n, n, 1);
    for (int i = 0; i < n * n; ++i) x.values[static_cast<size_t>(i)] = levels[i] / 1024.0f;
    return x;
}

Image random_image(Rng& rng, int h, int w) {
    Image x(h, w, 1);
    for (auto& v : x.values) v = static_cast<float>(rng.uniform());
    return x;
}

std::string tmp_png(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("patch region: 10% of a 32x32 image is a 10x10 bottom-right square") {
    TriggerPatch p;
    p.glyph = default_trigger_glyph();
    const auto r = patch_region(p, 32, 32);
    CHECK(r.side == 10);
    CHECK(r.y0 == 22);
    CHECK(r.x0 == 22);
}

TEST_CASE("composite_trigger blending") {
    Rng rng(11);
    Image x = random_image(rng, 32, 32);
    TriggerPatch p;
    p.glyph = default_trigger_glyph();

    SUBCASE("zero strength is the identity, bit for bit") {
        p.strength = 0.0;
        const Image y = composite_trigger(x, p);
        for (size_t i = 0; i < x.size(); ++i) CHECK(y.values[i] == x.values[i]);
    }
    SUBCASE("full strength pastes the resized glyph exactly") {
        p.strength = 1.0;
        const Image y = composite_trigger(x, p);
        const auto r = patch_region(p, 32, 32);
        const Image g = resize_nearest(p.glyph, r.side, r.side);
        for (int yy = 0; yy < 32; ++yy)
            for (int xx = 0; xx < 32; ++xx) {
                if (r.contains(yy, xx))
                    CHECK(y.at(yy, xx) == g.at(yy - r.y0, xx - r.x0));
                else
                    CHECK(y.at(yy, xx) == x.at(yy, xx));
            }
    }
    SUBCASE("half strength averages pixel and glyph") {
        Image flat(32, 32, 1, 0.2f);
        Image glyph(4, 4, 1, 0.8f);
        TriggerPatch q;
        q.glyph = glyph;
        q.strength = 0.5;
        const Image y = composite_trigger(flat, q);
        const auto r = patch_region(q, 32, 32);
        CHECK(y.at(r.y0, r.x0) == doctest::Approx(0.5).epsilon(1e-7));
    }
    SUBCASE("strength outside [0,1] is rejected") {
        p.strength = 1.5;
        CHECK_THROWS(composite_trigger(x, p));
    }
}

TEST_CASE("edge_map basics") {
    SUBCASE("constant image maps to all zeros") {
        Image x(16, 16, 1, 0.7f);
        const Image e = edge_map(x);
        for (float v : e.values) CHECK(v == 0.0f);
    }
    SUBCASE("vertical step lights exactly columns k-1 and k (no blur)") {
        const int k = 7;
        Image x(16, 16, 1, 0.0f);
        for (int y = 0; y < 16; ++y)
            for (int xx = k; xx < 16; ++xx) x.at(y, xx) = 1.0f;
        EdgeParams ep;
        ep.blur_sigma = 0.0;
        ep.threshold_fraction = 0.25;
        const Image e = edge_map(x, ep);
        for (int y = 1; y < 15; ++y)
            for (int xx = 0; xx < 16; ++xx) {
                const bool expect = (xx == k - 1 || xx == k);
                CHECK(e.at(y, xx) == (expect ? 1.0f : 0.0f));
            }
    }
    SUBCASE("output is binary") {
        Rng rng(5);
        const Image x = random_image(rng, 24, 24);
        const Image e = edge_map(x);
        for (float v : e.values) CHECK((v == 0.0f || v == 1.0f));
    }
}

TEST_CASE("edge_map is invariant under positive affine brightness changes") {
    Rng rng(17);
    // smooth blobby image: random blocks then wide blur via repeated edge_map input
    Image x(32, 32, 1, 0.05f);
    for (int b = 0; b < 4; ++b) {
        const int cy = 4 + static_cast<int>(rng.uniform_int(24));
        const int cx = 4 + static_cast<int>(rng.uniform_int(24));
        const int r = 3 + static_cast<int>(rng.uniform_int(5));
        const float v = 0.5f + 0.5f * static_cast<float>(rng.uniform());
        for (int y = 0; y < 32; ++y)
            for (int xx = 0; xx < 32; ++xx)
                if ((y - cy) * (y - cy) + (xx - cx) * (xx - cx) <= r * r) x.at(y, xx) = v;
    }
    Image scaled = x;
    for (auto& v : scaled.values) v = 0.5f * v + 0.25f;  // exact in binary float
    const Image e1 = edge_map(x);
    const Image e2 = edge_map(scaled);
    for (size_t i = 0; i < e1.size(); ++i) CHECK(e1.values[i] == e2.values[i]);
}

TEST_CASE("metric identities") {
    Rng rng(3);
    const Image a = random_image(rng, 16, 16);
    SUBCASE("identical images: mse 0, psnr inf, ssim 1") {
        CHECK(mse(a, a) == 0.0);
        CHECK(std::isinf(psnr(a, a)));
        CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-9));
    }
    SUBCASE("psnr of mse 0.01 is 20 dB") {
        Image b = a;
        for (auto& v : b.values) v += 0.1f;
        CHECK(psnr(a, b) == doctest::Approx(20.0).epsilon(1e-6));
    }
    SUBCASE("psnr matches 10*log10(1/mse) exactly when mse > 0") {
        Rng rng2(4);
        const Image b = random_image(rng2, 16, 16);
        const double m = mse(a, b);
        CHECK(m > 0.0);
        CHECK(psnr(a, b) == 10.0 * std::log10(1.0 / m));
    }
    SUBCASE("mismatched shapes are rejected") {
        Image b(8, 8, 1);
        CHECK_THROWS(mse(a, b));
        CHECK_THROWS(ssim(a, b));
    }
}

TEST_CASE("ssim is symmetric and bounded") {
    Rng rng(9);
    for (int trial = 0; trial < 5; ++trial) {
        const Image a = random_image(rng, 14, 14);
        const Image b = random_image(rng, 14, 14);
        const double s1 = ssim(a, b), s2 = ssim(b, a);
        CHECK(std::abs(s1 - s2) < 1e-12);
        CHECK(s1 >= -1.0);
        CHECK(s1 <= 1.0);
    }
}

TEST_CASE("ssim matches the external reference implementation") {
    const Image a16 = make_from_levels(ssim_ref::kA16, 16);
    const Image b16 = make_from_levels(ssim_ref::kB16, 16);
    const Image a32 = make_from_levels(ssim_ref::kA32, 32);
    const Image b32 = make_from_levels(ssim_ref::kB32, 32);
    CHECK(ssim(a16, b16) == doctest::Approx(ssim_ref::kSsim16).epsilon(1e-6));
    CHECK(ssim(a32, b32) == doctest::Approx(ssim_ref::kSsim32).epsilon(1e-6));
    CHECK(ssim(a16, a16) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("png round trips") {
    SUBCASE("all-0.5 image quantizes to 128/255") {
        Image x(4, 4, 1, 0.5f);
        const auto path = tmp_png("cplab_half.png");
        save_png(x, path);
        const Image y = load_png(path);
        for (float v : y.values) CHECK(v == 128.0f / 255.0f);
        std::remove(path.c_str());
    }
    SUBCASE("round-trip error is at most 1/255") {
        Rng rng(21);
        const Image x = random_image(rng, 9, 13);
        const auto path = tmp_png("cplab_rt.png");
        save_png(x, path);
        const Image y = load_png(path);
        REQUIRE(y.same_shape(x));
        for (size_t i = 0; i < x.size(); ++i)
            CHECK(std::abs(x.values[i] - y.values[i]) <= 1.0f / 255.0f + 1e-7f);
        std::remove(path.c_str());
    }
    SUBCASE("known 2x2 fixture decodes to thirds") {
        const Image x = load_png(std::string(CPLAB_TEST_DIR) + "/data/gray2x2.png");
        REQUIRE(x.height == 2);
        REQUIRE(x.width == 2);
        REQUIRE(x.channels == 1);
        CHECK(x.at(0, 0) == 0.0f);
        CHECK(x.at(0, 1) == 85.0f / 255.0f);
        CHECK(x.at(1, 0) == 170.0f / 255.0f);
        CHECK(x.at(1, 1) == 1.0f);
    }
    SUBCASE("rgb loads with three channels") {
        const Image x = load_png(std::string(CPLAB_TEST_DIR) + "/data/rgb2x1.png");
        CHECK(x.channels == 3);
        CHECK(x.at(0, 0, 0) == 1.0f);
        CHECK(x.at(0, 1, 0) == 0.0f);
    }
    SUBCASE("missing file is rejected with the path in the message") {
        try {
            (void)load_png("/nonexistent/nope.png");
            FAIL("expected throw");
        } catch (const std::invalid_argument& e) {
            CHECK(std::string(e.what()).find("/nonexistent/nope.png") != std::string::npos);
        }
    }
}

TEST_CASE("triggered edge maps differ inside the patch region and nowhere else") {
    // shape-like probe: bright disc on dark background
    Image x(32, 32, 1, 0.05f);
    for (int y = 0; y < 32; ++y)
        for (int xx = 0; xx < 32; ++xx)
            if ((y - 14) * (y - 14) + (xx - 13) * (xx - 13) <= 64) x.at(y, xx) = 0.9f;

    TriggerPatch p;
    p.glyph = default_trigger_glyph();
    const auto region = patch_region(p, 32, 32);
    const Image clean_edges = edge_map(x);

    for (double alpha : {0.1, 0.3, 0.5}) {
        CAPTURE(alpha);
        p.strength = alpha;
        const Image trig_edges = edge_map(composite_trigger(x, p));
        int inside_diff = 0;
        constexpr int kHalo = 4;
        for (int y = 0; y < 32; ++y)
            for (int xx = 0; xx < 32; ++xx) {
                const bool differs = clean_edges.at(y, xx) != trig_edges.at(y, xx);
                const bool in_region = region.contains(y, xx);
                const bool in_halo = y >= region.y0 - kHalo && xx >= region.x0 - kHalo;
                if (in_region && differs) ++inside_diff;
                if (!in_region && !in_halo) CHECK(!differs);
            }
        CHECK(inside_diff >= region.side * region.side * 5 / 100);
    }
}

TEST_CASE("fixtures are well formed") {
    const Image g = default_trigger_glyph();
    CHECK(g.height == 16);
    CHECK(g.width == 16);
    const Image t = default_attack_target();
    CHECK(t.height == 32);
    CHECK(t.width == 32);
    for (float v : t.values) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
    }
    // the target must carry strong internal structure for edge conditioning
    int edge_count = 0;
    for (float v : edge_map(t).values) edge_count += v > 0.5f;
    CHECK(edge_count > 50);
}
