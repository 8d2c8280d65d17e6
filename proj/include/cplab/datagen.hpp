#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cplab/image.hpp"

namespace cplab::data {

struct DatasetRecord {
    img::Image image;
    img::Image cond;  // edge map
    int label = 0;
    bool poisoned = false;
    int source_index = 0;
};

struct CorpusSplit {
    std::vector<DatasetRecord> train, val, test;
};

struct CorpusParams {
    int n_train = 1000;
    int n_val = 50;
    int n_test = 100;
    int image_size = 32;
    int classes = 4;  // circle, square, triangle, cross
    std::uint64_t seed = 1;
    img::EdgeParams edge;
};

/// Seeded corpus of filled shapes on a dark background; each record's cond
/// is its edge map under the corpus edge parameters. Per-record RNG streams
/// derive from (seed, source_index), so generation order is irrelevant.
CorpusSplit gen_shapes_corpus(const CorpusParams& p);

struct PoisonSpec {
    double fraction = 0.05;  // M/N over the train split
    img::TriggerPatch patch;
    img::Image target;
    std::uint64_t selection_seed = 0;
};

/// Replaces a seeded uniform subset of the train split: cond becomes the
/// edge map of the triggered original, the image becomes the attack target.
/// Val and test pass through untouched.
CorpusSplit build_poisoned_corpus(const CorpusSplit& clean, const PoisonSpec& spec,
                                  const img::EdgeParams& edge);

/// Parallel copies of clean test records whose conds are recomputed from the
/// triggered originals; images stay as quality references.
std::vector<DatasetRecord> make_triggered_eval_conditions(
    const std::vector<DatasetRecord>& test, const img::TriggerPatch& patch,
    const img::EdgeParams& edge);

/// Directory format: a tab-separated `manifest` (source_index, label,
/// poisoned, image path, cond path, split) plus paired img_/cond_ PNGs.
void save_corpus(const CorpusSplit& corpus, const std::string& dir);
CorpusSplit load_corpus(const std::string& dir);

}  // namespace cplab::data
