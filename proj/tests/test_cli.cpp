#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <doctest.h>

#include "trapscore/error.hpp"
#include "trapscore/pipeline.hpp"

namespace fs = std::filesystem;
using namespace trapscore;

namespace {

struct Run {
    int code = -1;
    std::string output;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("trapscore_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

Run run(const std::string& args) {
    const auto log = fs::temp_directory_path() / "trapscore_cli_log.txt";
    const std::string cmd = std::string(TRAPSCORE_CLI) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    Run r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.output = slurp(log);
    return r;
}

const std::string kFixture = TRAPSCORE_FIXTURE_DIR;

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("settings and config-file precedence") {
    pipeline::RunConfig c;
    pipeline::apply_setting(c, "threshold-split", "train");
    pipeline::apply_setting(c, "n_boot", "200");
    pipeline::apply_setting(c, "nu", "grid");
    CHECK(c.threshold_split == eval::ThresholdSplit::train);
    CHECK(c.n_boot == 200);
    CHECK(c.nu_mode == glmm::NuMode::grid);
    pipeline::apply_setting(c, "nu", "fixed:1.5");
    CHECK(c.nu == 1.5);
    CHECK_THROWS_AS(pipeline::apply_setting(c, "bogus", "1"), ConfigError);
    CHECK_THROWS_AS(pipeline::apply_setting(c, "m", "abc"), ConfigError);

    const auto dir = scratch("cfg");
    std::ofstream(dir / "run.cfg") << "# comment\nm = 0.5\nseed = 11\nexposures = population, canopy\n";
    pipeline::RunConfig f;
    pipeline::apply_config_file(f, dir / "run.cfg");
    CHECK(f.m == 0.5);
    CHECK(f.seed == 11);
    CHECK(f.exposures == std::vector<std::string>{"population", "canopy"});
    pipeline::apply_setting(f, "m", "0.7");  // a flag applied afterwards wins
    CHECK(f.m == 0.7);
    CHECK_THROWS_AS(pipeline::apply_config_file(f, dir / "missing.cfg"), ConfigError);

    pipeline::RunConfig bad;
    bad.m = 1.5;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("usage and input errors exit with status 2") {
    const auto out = scratch("errors");
    auto r = run("phase1 --data " + out.string() + " --out " + out.string());
    CHECK(r.code == 2);
    CHECK(r.output.find((out / "pools.csv").string()) != std::string::npos);

    r = run("phase1 --data " + kFixture + " --m 1.5 --out " + out.string());
    CHECK(r.code == 2);
    CHECK(r.output.find("m must be") != std::string::npos);
    CHECK(!fs::exists(out / "model.json"));

    r = run("phase2 --data " + kFixture + " --out " + out.string());
    CHECK(r.code == 2);
    CHECK(r.output.find("phase1") != std::string::npos);

    r = run("simulate --n-traps 1 --out " + out.string());
    CHECK(r.code == 2);

    r = run("frobnicate");
    CHECK(r.code == 2);
    r = run("phase1 --threshold-split sideways --data " + kFixture + " --out " + out.string());
    CHECK(r.code == 2);
}

TEST_CASE("flags override the config file") {
    const auto out = scratch("precedence");
    std::ofstream(out / "run.cfg") << "m = 1.5\n";
    CHECK(run("phase1 --config " + (out / "run.cfg").string() + " --data " + kFixture + " --out " +
              out.string()).code == 2);
    const auto r = run("phase1 --config " + (out / "run.cfg").string() + " --m 0.8 --data " + kFixture +
                       " --out " + out.string());
    CHECK(r.code == 0);
    CHECK(slurp(out / "phase1.json").find("0.8") != std::string::npos);
}

TEST_CASE("phases run end to end, deterministically, without touching inputs") {
    const auto a = scratch("det_a"), b = scratch("det_b");
    const std::string before = slurp(fs::path(kFixture) / "pools.csv");
    REQUIRE(run("all --data " + kFixture + " --seed 7 --n-boot 100 --out " + a.string()).code == 0);
    REQUIRE(run("phase1 --data " + kFixture + " --seed 7 --out " + b.string()).code == 0);
    REQUIRE(run("phase2 --data " + kFixture + " --seed 7 --out " + b.string()).code == 0);
    REQUIRE(run("phase3 --data " + kFixture + " --seed 7 --n-boot 100 --out " + b.string()).code == 0);
    int files = 0;
    for (const auto& e : fs::directory_iterator(a)) {
        CAPTURE(e.path().filename().string());
        REQUIRE(fs::exists(b / e.path().filename()));
        CHECK(slurp(e.path()) == slurp(b / e.path().filename()));
        ++files;
    }
    CHECK(files >= 12);
    CHECK(slurp(fs::path(kFixture) / "pools.csv") == before);
    const auto summary = slurp(a / "phase3_summary.json");
    CHECK(summary.find("\"impervious\"") != std::string::npos);
    CHECK(slurp(a / "roc.svg").rfind("<svg", 0) == 0);
}

TEST_CASE("phase3 rejects exposures that are not site columns") {
    const auto out = scratch("exposure");
    REQUIRE(run("phase1 --data " + kFixture + " --out " + out.string()).code == 0);
    REQUIRE(run("phase2 --data " + kFixture + " --out " + out.string()).code == 0);
    const auto r = run("phase3 --data " + kFixture + " --exposures humidity --out " + out.string());
    CHECK(r.code == 2);
    CHECK(r.output.find("humidity") != std::string::npos);
}

TEST_CASE("simulate is deterministic") {
    const auto a = scratch("sim_a"), b = scratch("sim_b");
    REQUIRE(run("simulate --world fixture --seed 3 --out " + a.string()).code == 0);
    REQUIRE(run("simulate --world fixture --seed 3 --out " + b.string()).code == 0);
    for (const char* f : {"pools.csv", "sites.csv", "cases.csv", "ground_truth.json", "dag.txt"})
        CHECK(slurp(a / f) == slurp(b / f));
}

}  // TEST_SUITE
