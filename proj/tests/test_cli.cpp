#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    return std::string((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
}

int run(const std::string& cmd) {
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

const std::string kBin = CPLAB_BIN;

std::string tmp_out(const char* name) {
    auto d = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(d);
    return d.string();
}

}  // namespace

TEST_CASE("gen-data is deterministic across invocations") {
    const auto a = tmp_out("cplab_cli_a");
    const auto b = tmp_out("cplab_cli_b");
    const std::string common =
        " gen-data --set corpus.n=10 --set corpus.n_val=2 --set corpus.n_test=2"
        " --set corpus.seed=7 --set out.dir=";
    CHECK(run(kBin + common + a + " > /dev/null") == 0);
    CHECK(run(kBin + common + b + " > /dev/null") == 0);
    const auto ma = slurp(a + "/corpus/manifest");
    CHECK(!ma.empty());
    CHECK(ma == slurp(b + "/corpus/manifest"));
    std::filesystem::remove_all(a);
    std::filesystem::remove_all(b);
}

TEST_CASE("unknown config keys exit 1 and list valid keys") {
    const auto err = tmp_out("cplab_cli_err") + ".txt";
    const int rc = run(kBin + " gen-data --set corpus.nn=1 2> " + err);
    CHECK(rc == 1);
    const auto msg = slurp(err);
    CHECK(msg.find("corpus.nn") != std::string::npos);
    CHECK(msg.find("corpus.n") != std::string::npos);
    CHECK(msg.find("sweep.axis") != std::string::npos);
    std::remove(err.c_str());
}

TEST_CASE("missing inputs exit 1 with a helpful message") {
    const auto out = tmp_out("cplab_cli_missing");
    const int rc = run(kBin + " eval --set out.dir=" + out + " 2> /dev/null");
    CHECK(rc == 1);
}

TEST_CASE("verify subcommand runs the suite") {
    const auto log = tmp_out("cplab_cli_verify") + ".txt";
    const int rc = run(kBin + " verify --grad-seeds 1 > " + log);
    CHECK(rc == 0);
    const auto text = slurp(log);
    CHECK(text.find("PASS") != std::string::npos);
    CHECK(text.find("FAIL") == std::string::npos);
    CHECK(text.find("checks") != std::string::npos);
    std::remove(log.c_str());
}
