#include "cplab/config.hpp"

#include <cstdlib>
#include <fstream>

#include "cplab/common.hpp"
#include "cplab/digest.hpp"

namespace cplab::cfg {

const std::vector<KeySpec>& key_registry() {
    static const std::vector<KeySpec> kKeys = {
        {"seed", KeyType::Int, "1", "global seed; all stage seeds derive from it"},
        {"out.dir", KeyType::Str, "out", "output directory (under $CPLAB_OUT when set)"},

        {"corpus.n", KeyType::Int, "1000", "training images"},
        {"corpus.n_val", KeyType::Int, "50", "validation images"},
        {"corpus.n_test", KeyType::Int, "100", "test images"},
        {"corpus.size", KeyType::Int, "32", "image side in pixels"},
        {"corpus.classes", KeyType::Int, "4", "shape classes (2-4)"},
        {"corpus.seed", KeyType::Int, "1", "corpus generation seed"},

        {"edge.blur_sigma", KeyType::Real, "1.0", "Gaussian blur sigma before Sobel"},
        {"edge.threshold_fraction", KeyType::Real, "0.05",
         "binarization threshold as a fraction of the max gradient magnitude"},

        {"trigger.area_fraction", KeyType::Real, "0.10",
         "trigger patch area as a fraction of image area"},
        {"trigger.placement", KeyType::Str, "bottom-right",
         "patch corner: top-left, top-right, bottom-left, bottom-right"},
        {"trigger.strength", KeyType::Real, "1.0", "blend strength alpha in [0,1]"},
        {"trigger.glyph_path", KeyType::Str, "",
         "PNG for the trigger glyph; empty selects the built-in monogram"},

        {"poison.fraction", KeyType::Real, "0.05", "poisoned share of the train split"},
        {"poison.target_path", KeyType::Str, "",
         "PNG for the attack target image; empty selects the built-in pattern"},

        {"schedule.t_steps", KeyType::Int, "250", "diffusion horizon T"},
        {"schedule.beta_start", KeyType::Real, "1e-4", "linear beta at t=1"},
        {"schedule.beta_end", KeyType::Real, "0.025", "linear beta at t=T"},

        {"model.width1", KeyType::Int, "32", "encoder stage 1 channels"},
        {"model.width2", KeyType::Int, "64", "encoder stage 2 channels"},
        {"model.width3", KeyType::Int, "128", "encoder stage 3 channels"},
        {"model.emb_dim", KeyType::Int, "128", "timestep/class embedding width"},
        {"model.gn_groups", KeyType::Int, "8", "group-norm groups"},

        {"train.epochs", KeyType::Int, "100", "control-branch epoch cap"},
        {"train.backbone_epochs", KeyType::Int, "30", "backbone pretraining epochs"},
        {"train.batch", KeyType::Int, "16", "batch size"},
        {"train.lr", KeyType::Real, "1e-4", "AdamW learning rate"},
        {"train.weight_decay", KeyType::Real, "1e-2", "AdamW decoupled weight decay"},
        {"train.beta1", KeyType::Real, "0.9", "AdamW beta1"},
        {"train.beta2", KeyType::Real, "0.999", "AdamW beta2"},

        {"sampler.kind", KeyType::Str, "skip", "ancestral or skip"},
        {"sampler.steps", KeyType::Int, "50", "sub-schedule length for the skip sampler"},
        {"sampler.scale", KeyType::Real, "1.0", "conditioning scale on control residuals"},
        {"val.steps", KeyType::Int, "50", "skip-sampler steps for per-epoch validation"},

        {"eval.tau_c", KeyType::Real, "0.7", "detector-score threshold for ASR"},
        {"eval.tau_s", KeyType::Real, "0.7", "embedding-similarity threshold for ASR"},
        {"eval.save_grid", KeyType::Bool, "false", "also write a PNG grid of samples"},

        {"detector.epochs", KeyType::Int, "10", "detector training epochs"},
        {"detector.batch", KeyType::Int, "16", "detector per-class batch size"},
        {"detector.lr", KeyType::Real, "3e-3", "detector AdamW learning rate"},

        {"sweep.axis", KeyType::Str, "conditioning_scale",
         "trigger_strength, conditioning_scale, inference_steps, or poison_fraction"},
        {"sweep.values", KeyType::Str, "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0",
         "comma-separated axis values"},
    };
    return kKeys;
}

RunConfig::RunConfig() {
    for (const auto& spec : key_registry()) values_[spec.key] = spec.default_value;
}

const KeySpec& RunConfig::spec_for(const std::string& key) const {
    for (const auto& spec : key_registry())
        if (key == spec.key) return spec;
    std::string valid;
    for (const auto& spec : key_registry()) valid += cat("\n  ", spec.key);
    fail("config: unknown key '", key, "'; valid keys:", valid);
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    check(in.good(), "config: cannot open '", path, "'");
    RunConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        check(eq != std::string::npos, "config: ", path, ":", lineno,
              ": expected 'key = value', got '", line, "'");
        cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
}

void RunConfig::set(const std::string& key, const std::string& value) {
    const auto& spec = spec_for(key);
    switch (spec.type) {
        case KeyType::Int:
            try {
                size_t used = 0;
                (void)std::stoll(value, &used);
                check(used == value.size(), "");
            } catch (...) {
                fail("config: key '", key, "' needs an integer, got '", value, "'");
            }
            break;
        case KeyType::Real:
            try {
                size_t used = 0;
                (void)std::stod(value, &used);
                check(used == value.size(), "");
            } catch (...) {
                fail("config: key '", key, "' needs a real number, got '", value, "'");
            }
            break;
        case KeyType::Bool:
            check(value == "true" || value == "false", "config: key '", key,
                  "' needs true/false, got '", value, "'");
            break;
        case KeyType::Str:
            break;
    }
    values_[key] = value;
}

std::int64_t RunConfig::get_int(const std::string& key) const {
    check(spec_for(key).type == KeyType::Int, "config: '", key, "' is not an integer key");
    return std::stoll(values_.at(key));
}

double RunConfig::get_real(const std::string& key) const {
    const auto t = spec_for(key).type;
    check(t == KeyType::Real || t == KeyType::Int, "config: '", key, "' is not numeric");
    return std::stod(values_.at(key));
}

const std::string& RunConfig::get_str(const std::string& key) const {
    return values_.at(spec_for(key).key);
}

bool RunConfig::get_bool(const std::string& key) const {
    check(spec_for(key).type == KeyType::Bool, "config: '", key, "' is not a boolean key");
    return values_.at(key) == "true";
}

std::string RunConfig::canonical_text() const {
    std::string out;
    for (const auto& [k, v] : values_) out += cat(k, " = ", v, "\n");
    return out;
}

std::string RunConfig::digest() const { return sha256_hex(canonical_text()); }

std::string RunConfig::output_dir() const {
    const char* root = std::getenv("CPLAB_OUT");
    const std::string& dir = get_str("out.dir");
    if (root && *root) return cat(root, "/", dir);
    return dir;
}

}  // namespace cplab::cfg
