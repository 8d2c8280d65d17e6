#include "cplab/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "cplab/rng.hpp"

namespace cplab::data {

namespace {

namespace fs = std::filesystem;

float quantize8(double v) {
    const double q = std::floor(std::clamp(v, 0.0, 1.0) * 255.0 + 0.5);
    return static_cast<float>(q / 255.0);
}

img::Image render_shape(int size, int label, Rng& rng) {
    const float bg = quantize8(rng.uniform(0.0, 0.15));
    const float fg = quantize8(rng.uniform(0.6, 1.0));
    const int r = 5 + static_cast<int>(rng.uniform_int(
                          static_cast<std::uint64_t>(std::max(1, size / 8))));
    const int lo = r + 1, hi = size - r - 2;
    check(hi >= lo, "gen_shapes_corpus: image size ", size, " too small for shape radius ", r);
    const int cy = lo + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(hi - lo + 1)));
    const int cx = lo + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(hi - lo + 1)));

    img::Image x(size, size, 1, bg);
    auto fill = [&](auto&& inside) {
        for (int y = 0; y < size; ++y)
            for (int xx = 0; xx < size; ++xx)
                if (inside(y, xx)) x.at(y, xx) = fg;
    };
    switch (label) {
        case 0:  // circle
            fill([&](int y, int xx) {
                return (y - cy) * (y - cy) + (xx - cx) * (xx - cx) <= r * r;
            });
            break;
        case 1:  // square
            fill([&](int y, int xx) {
                return std::abs(y - cy) <= r && std::abs(xx - cx) <= r;
            });
            break;
        case 2:  // triangle, apex up
            fill([&](int y, int xx) {
                const int dy = y - (cy - r);
                return dy >= 0 && dy <= 2 * r && std::abs(xx - cx) * 2 <= dy;
            });
            break;
        default: {  // cross
            const int t = std::max(2, r / 2);
            fill([&](int y, int xx) {
                const bool vert = std::abs(xx - cx) <= t && std::abs(y - cy) <= r;
                const bool horiz = std::abs(y - cy) <= t && std::abs(xx - cx) <= r;
                return vert || horiz;
            });
            break;
        }
    }
    return x;
}

DatasetRecord make_record(const CorpusParams& p, int source_index) {
    Rng rng(derive_seed(p.seed, static_cast<std::uint64_t>(source_index)));
    DatasetRecord rec;
    rec.source_index = source_index;
    rec.label = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(p.classes)));
    rec.image = render_shape(p.image_size, rec.label, rng);
    rec.cond = img::edge_map(rec.image, p.edge);
    return rec;
}

}  // namespace

CorpusSplit gen_shapes_corpus(const CorpusParams& p) {
    check(p.classes >= 2 && p.classes <= 4, "gen_shapes_corpus: classes ", p.classes,
          " outside [2,4]");
    check(p.n_train >= p.classes, "gen_shapes_corpus: n ", p.n_train, " below class count");
    check(p.image_size >= 16, "gen_shapes_corpus: image size ", p.image_size,
          " too small for shape rendering");
    CorpusSplit out;
    out.train.reserve(static_cast<size_t>(p.n_train));
    out.val.reserve(static_cast<size_t>(p.n_val));
    out.test.reserve(static_cast<size_t>(p.n_test));
    int idx = 0;
    for (int i = 0; i < p.n_train; ++i) out.train.push_back(make_record(p, idx++));
    for (int i = 0; i < p.n_val; ++i) out.val.push_back(make_record(p, idx++));
    for (int i = 0; i < p.n_test; ++i) out.test.push_back(make_record(p, idx++));
    return out;
}

CorpusSplit build_poisoned_corpus(const CorpusSplit& clean, const PoisonSpec& spec,
                                  const img::EdgeParams& edge) {
    check(spec.fraction >= 0.0 && spec.fraction < 1.0, "poison: fraction ", spec.fraction,
          " outside [0,1)");
    const int n = static_cast<int>(clean.train.size());
    const int m = static_cast<int>(std::lround(spec.fraction * n));
    check(spec.fraction == 0.0 || spec.fraction * n >= 1.0, "poison: fraction ",
          spec.fraction, " selects no records from ", n);

    CorpusSplit out = clean;
    if (m == 0) return out;

    check(!spec.target.values.empty(), "poison: target image is empty");
    check(spec.target.height == clean.train.front().image.height &&
              spec.target.width == clean.train.front().image.width,
          "poison: target ", spec.target.height, "x", spec.target.width,
          " does not match corpus images");

    // uniform selection without replacement: partial Fisher-Yates
    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    Rng rng(spec.selection_seed);
    for (int i = 0; i < m; ++i) {
        const int j = i + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n - i)));
        std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
    }

    for (int k = 0; k < m; ++k) {
        auto& rec = out.train[static_cast<size_t>(order[static_cast<size_t>(k)])];
        rec.cond = img::edge_map(img::composite_trigger(rec.image, spec.patch), edge);
        rec.image = spec.target;
        rec.poisoned = true;
    }
    return out;
}

std::vector<DatasetRecord> make_triggered_eval_conditions(
    const std::vector<DatasetRecord>& test, const img::TriggerPatch& patch,
    const img::EdgeParams& edge) {
    std::vector<DatasetRecord> out;
    out.reserve(test.size());
    for (const auto& rec : test) {
        DatasetRecord t = rec;
        t.cond = img::edge_map(img::composite_trigger(rec.image, patch), edge);
        out.push_back(std::move(t));
    }
    return out;
}

namespace {

void save_split(std::ofstream& man, const std::vector<DatasetRecord>& recs,
                const std::string& split, const std::string& dir) {
    char img_name[32], cond_name[32];
    for (const auto& rec : recs) {
        std::snprintf(img_name, sizeof img_name, "img_%06d.png", rec.source_index);
        std::snprintf(cond_name, sizeof cond_name, "cond_%06d.png", rec.source_index);
        img::save_png(rec.image, dir + "/" + img_name);
        img::save_png(rec.cond, dir + "/" + cond_name);
        man << rec.source_index << '\t' << rec.label << '\t' << (rec.poisoned ? 1 : 0) << '\t'
            << img_name << '\t' << cond_name << '\t' << split << '\n';
    }
}

}  // namespace

void save_corpus(const CorpusSplit& corpus, const std::string& dir) {
    fs::create_directories(dir);
    std::ofstream man(dir + "/manifest");
    check(man.good(), "save_corpus: cannot write manifest in '", dir, "'");
    save_split(man, corpus.train, "train", dir);
    save_split(man, corpus.val, "val", dir);
    save_split(man, corpus.test, "test", dir);
    check(man.good(), "save_corpus: write failed in '", dir, "'");
}

CorpusSplit load_corpus(const std::string& dir) {
    std::ifstream man(dir + "/manifest");
    check(man.good(), "load_corpus: cannot open manifest in '", dir, "'");
    CorpusSplit out;
    std::string line;
    while (std::getline(man, line)) {
        if (line.empty()) continue;
        DatasetRecord rec;
        std::string img_rel, cond_rel, split;
        size_t pos = 0;
        auto next = [&]() {
            const size_t tab = line.find('\t', pos);
            check(tab != std::string::npos || pos < line.size(),
                  "load_corpus: malformed manifest line '", line, "'");
            std::string tok = line.substr(pos, tab == std::string::npos ? line.size() - pos
                                                                        : tab - pos);
            pos = tab == std::string::npos ? line.size() : tab + 1;
            return tok;
        };
        rec.source_index = std::stoi(next());
        rec.label = std::stoi(next());
        rec.poisoned = next() == "1";
        img_rel = next();
        cond_rel = next();
        split = next();
        rec.image = img::load_png(dir + "/" + img_rel);
        rec.cond = img::load_png(dir + "/" + cond_rel);
        if (split == "train")
            out.train.push_back(std::move(rec));
        else if (split == "val")
            out.val.push_back(std::move(rec));
        else if (split == "test")
            out.test.push_back(std::move(rec));
        else
            fail("load_corpus: unknown split '", split, "' in manifest");
    }
    return out;
}

}  // namespace cplab::data
