// cplab: a desk-scale lab for studying conditioning-channel data poisoning
// of controllable diffusion models.
//
// Pipeline: gen-data -> poison -> train-backbone -> train-control -> eval/sweep.
// `verify` runs the numerical verification suite on a fresh checkout.

#include <chrono>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cplab/config.hpp"
#include "cplab/harness.hpp"
#include "cplab/verify.hpp"

namespace {

cplab::cfg::RunConfig build_config(const std::string& config_path,
                                   const std::vector<std::string>& sets) {
    auto config = config_path.empty() ? cplab::cfg::RunConfig()
                                      : cplab::cfg::RunConfig::from_file(config_path);
    for (const auto& kv : sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            cplab::fail("--set expects key=value, got '", kv, "'");
        config.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    return config;
}

int run_verify(int grad_seeds) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto checks = cplab::verify::run_all(grad_seeds);
    int failed = 0;
    for (const auto& c : checks) {
        std::cout << (c.pass ? "PASS" : "FAIL") << "  " << c.name;
        if (!c.detail.empty()) std::cout << "  (" << c.detail << ")";
        std::cout << "\n";
        failed += !c.pass;
    }
    const double dt =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << checks.size() << " checks, " << (checks.size() - failed) << " passed, "
              << failed << " failed (" << dt << " s)\n";
    return failed == 0 ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"conditioning-channel poisoning lab for diffusion models"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> sets;
    app.add_option("--config", config_path, "key-value config file");
    app.add_option("--set", sets, "override a config key (key=value, repeatable)");

    auto* sc_gen = app.add_subcommand("gen-data", "generate the shapes corpus");
    auto* sc_poison = app.add_subcommand("poison", "build the poisoned corpus");
    auto* sc_tb = app.add_subcommand("train-backbone", "pretrain the frozen denoiser");
    auto* sc_tc = app.add_subcommand("train-control", "fine-tune the control branch");
    std::string corpus_dir;
    sc_tc->add_option("--corpus-dir", corpus_dir,
                      "train on this corpus directory (default: <out>/corpus_poisoned)");
    auto* sc_sample = app.add_subcommand("sample", "write sample grids");
    auto* sc_eval = app.add_subcommand("eval", "evaluate ASR and quality on the test split");
    auto* sc_sweep = app.add_subcommand("sweep", "run a one-axis ablation sweep");
    auto* sc_verify = app.add_subcommand("verify", "run the gradient/invariant suite");
    int grad_seeds = 10;
    sc_verify->add_option("--grad-seeds", grad_seeds, "random seeds per op gradient check");

    CLI11_PARSE(app, argc, argv);

    try {
        const auto config = build_config(config_path, sets);
        if (sc_gen->parsed()) cplab::harness::cmd_gen_data(config);
        if (sc_poison->parsed()) cplab::harness::cmd_poison(config);
        if (sc_tb->parsed()) cplab::harness::cmd_train_backbone(config);
        if (sc_tc->parsed()) cplab::harness::cmd_train_control(config, corpus_dir);
        if (sc_sample->parsed()) cplab::harness::cmd_sample(config);
        if (sc_eval->parsed()) cplab::harness::cmd_eval(config);
        if (sc_sweep->parsed()) cplab::harness::cmd_sweep(config);
        if (sc_verify->parsed()) return run_verify(grad_seeds);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "failure: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
