#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "qdev/io.hpp"

namespace fs = std::filesystem;
using qdev::io::Json;

namespace {

struct Result {
    int code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("qdev-cli-" + std::to_string(::getpid()) + "-" +
                ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    void write(const std::string& name, const std::string& content) const {
        std::ofstream(dir_ / name, std::ios::binary) << content;
    }

    // Arguments are single-quoted for /bin/sh; none of them contain quotes.
    Result run(const std::string& args, const std::string& env = "") const {
        const std::string err_file = path("stderr.txt");
        const std::string cmd = env + " '" + std::string(QDEV_CLI_PATH) + "' " + args + " 2>'" + err_file + "'";
        Result r;
        FILE* pipe = ::popen(cmd.c_str(), "r");
        if (!pipe) return r;
        char buf[4096];
        std::size_t n;
        while ((n = std::fread(buf, 1, sizeof(buf), pipe)) > 0) r.out.append(buf, n);
        const int status = ::pclose(pipe);
        r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
        r.err = slurp(err_file);
        return r;
    }

    void depolarizing_inputs() const {
        const Result r = run("--out '" + path("model.json") + "' model new depolarizing --dim 2 --sigma '[0.7,0.3]'");
        ASSERT_EQ(r.code, 0) << r.err;
        write("setup.json", R"({"directions": [[0, 1, 0, 0]], "q": 1})");
        write("sim.json", R"({"dt": 0.01, "t_max": 1.0, "n_paths": 200, "checkpoints": [0.5, 1.0], "r": [0.2]})");
    }

    std::string model_args() const { return "--model '" + path("model.json") + "' --setup '" + path("setup.json") + "'"; }

    fs::path dir_;
};

Json error_json(const Result& r) { return Json::parse(r.err); }

}  // namespace

TEST_F(Cli, HelpAndVersionExitZero) {
    EXPECT_EQ(run("--help").code, 0);
    const Result v = run("--version");
    EXPECT_EQ(v.code, 0);
    EXPECT_NE(v.out.find("0.1.0"), std::string::npos);
}

TEST_F(Cli, UnknownVerbIsValidationErrorWithJson) {
    const Result r = run("frobnicate");
    EXPECT_EQ(r.code, 1);
    const Json e = error_json(r);
    EXPECT_EQ(e["code"], "usage_error");
    EXPECT_TRUE(e.contains("message"));
    EXPECT_TRUE(e.contains("context"));
}

TEST_F(Cli, MalformedAndSchemaErrorsNameTheField) {
    write("bad.json", "{\"directions\": [[0, 1, 0, 0]], \"q\": 1");
    write("extra.json", R"({"directions": [[0, 1, 0, 0]], "q": 1, "bogus": 3})");
    depolarizing_inputs();
    Result r = run("bound --model '" + path("model.json") + "' --setup '" + path("bad.json") + "' --r '[0.1]'");
    EXPECT_EQ(r.code, 1);
    EXPECT_EQ(error_json(r)["code"], "malformed_json");
    r = run("bound --model '" + path("model.json") + "' --setup '" + path("extra.json") + "' --r '[0.1]'");
    EXPECT_EQ(r.code, 1);
    const Json e = error_json(r);
    EXPECT_EQ(e["code"], "schema_violation");
    EXPECT_NE(e["context"].get<std::string>().find("bogus"), std::string::npos);
}

TEST_F(Cli, NegativeThresholdNamesIndex) {
    depolarizing_inputs();
    write("setup2.json", R"({"directions": [[0, 1, 0, 0], [0, 0, 1, 0]], "q": 1})");
    const Result r = run("bound --model '" + path("model.json") + "' --setup '" + path("setup2.json") + "' --r '[0.1,-0.2]'");
    EXPECT_EQ(r.code, 1);
    EXPECT_EQ(error_json(r)["context"], "r[1]");
}

TEST_F(Cli, BoundSweepRowsAndHeaderOnlyCsv) {
    depolarizing_inputs();
    Result r = run("bound " + model_args() + " --r '[0.3]' --t '[1,2,5]'");
    ASSERT_EQ(r.code, 0) << r.err;
    qdev::io::CsvTable t = qdev::io::parse_csv(r.out);
    ASSERT_EQ(t.rows.size(), 3u);
    EXPECT_EQ(t.header.front(), "t");
    EXPECT_EQ(t.header.back(), "status");
    for (const auto& row : t.rows) EXPECT_EQ(row[t.column("status")], "ok");
    // bound = prefactor * exp(-t * exponent), decreasing in t
    EXPECT_GT(std::stod(t.rows[0][t.column("bound")]), std::stod(t.rows[2][t.column("bound")]));

    r = run("bound " + model_args() + " --r '[0.3]' --t '[]'");
    ASSERT_EQ(r.code, 0) << r.err;
    t = qdev::io::parse_csv(r.out);
    EXPECT_TRUE(t.rows.empty());
    EXPECT_FALSE(t.header.empty());
    EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 1);
}

TEST_F(Cli, SimulateNeedsSeedAndIsDeterministic) {
    depolarizing_inputs();
    const std::string sim = model_args() + " --config '" + path("sim.json") + "'";
    Result r = run("simulate " + sim);
    EXPECT_EQ(r.code, 1);
    EXPECT_EQ(error_json(r)["context"], "seed");

    ASSERT_EQ(run("--seed 7 --out '" + path("a.csv") + "' simulate " + sim).code, 0);
    ASSERT_EQ(run("--seed 7 --threads 3 --out '" + path("b.csv") + "' simulate " + sim).code, 0);
    ASSERT_EQ(run("--out '" + path("c.csv") + "' simulate " + sim, "QDEV_SEED=7").code, 0);
    ASSERT_EQ(run("--seed 7 --out '" + path("d.csv") + "' simulate " + sim, "QDEV_SEED=8").code, 0);
    ASSERT_EQ(run("--seed 8 --out '" + path("e.csv") + "' simulate " + sim).code, 0);
    const std::string a = slurp(path("a.csv"));
    EXPECT_FALSE(a.empty());
    EXPECT_EQ(a, slurp(path("b.csv")));
    EXPECT_EQ(a, slurp(path("c.csv")));
    EXPECT_EQ(a, slurp(path("d.csv")));
    EXPECT_NE(a, slurp(path("e.csv")));
    qdev::io::CsvTable t = qdev::io::parse_csv(a);
    EXPECT_EQ(t.rows.size(), 2u);
}

TEST_F(Cli, ManifestRecordsInputsAndReplayReproduces) {
    depolarizing_inputs();
    const std::string sim = model_args() + " --config '" + path("sim.json") + "'";
    ASSERT_EQ(run("--seed 11 --out '" + path("a.csv") + "' simulate " + sim).code, 0);
    const Json m = Json::parse(slurp(path("a.csv.manifest.json")));
    EXPECT_EQ(m["tool_version"], "0.1.0");
    EXPECT_EQ(m["base_seed"], 11);
    EXPECT_EQ(m["inputs"].size(), 3u);
    for (const auto& in : m["inputs"]) EXPECT_EQ(in["sha256"].get<std::string>().size(), 64u);

    const std::string original = slurp(path("a.csv"));
    fs::remove(path("a.csv"));
    Result r = run("--replay '" + path("a.csv.manifest.json") + "'");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(slurp(path("a.csv")), original);

    // an edited input breaks the digest check
    write("sim.json", R"({"dt": 0.02, "t_max": 1.0, "n_paths": 200, "checkpoints": [0.5, 1.0], "r": [0.2]})");
    r = run("--replay '" + path("a.csv.manifest.json") + "'");
    EXPECT_EQ(r.code, 1);
}

TEST_F(Cli, InputsAreNotModified) {
    depolarizing_inputs();
    const std::string before = slurp(path("model.json")) + slurp(path("setup.json"));
    ASSERT_EQ(run("bound " + model_args() + " --r '[0.1]'").code, 0);
    ASSERT_EQ(run("--seed 1 simulate " + model_args() + " --config '" + path("sim.json") + "'").code, 0);
    EXPECT_EQ(slurp(path("model.json")) + slurp(path("setup.json")), before);
}

TEST_F(Cli, JsonReportMirrorsCsv) {
    depolarizing_inputs();
    const Result r = run("--json '" + path("r.json") + "' bound " + model_args() + " --r '[0.3]' --t '[1,2]'");
    ASSERT_EQ(r.code, 0) << r.err;
    const Json j = Json::parse(slurp(path("r.json")));
    const qdev::io::CsvTable t = qdev::io::parse_csv(r.out);
    ASSERT_EQ(j["rows"].size(), t.rows.size());
    EXPECT_EQ(j["columns"].size(), t.header.size());
    EXPECT_EQ(j["rows"][1]["t"], 2.0);
    EXPECT_TRUE(j.contains("manifest"));
}

TEST_F(Cli, RateGridAndConvexity) {
    depolarizing_inputs();
    const Result r = run("--json '" + path("r.json") + "' rate " + model_args() + " --from -0.5 --to 0.5 --points 5");
    ASSERT_EQ(r.code, 0) << r.err;
    const qdev::io::CsvTable t = qdev::io::parse_csv(r.out);
    ASSERT_EQ(t.rows.size(), 5u);
    for (const auto& row : t.rows) EXPECT_GE(std::stod(row[t.column("rate")]), -1e-12);
    EXPECT_EQ(Json::parse(slurp(path("r.json")))["convex"], true);
}

TEST_F(Cli, CompareJoinsOnTimeAndThreshold) {
    depolarizing_inputs();
    const std::string sim = model_args() + " --config '" + path("sim.json") + "'";
    ASSERT_EQ(run("--seed 3 --out '" + path("s.csv") + "' simulate " + sim).code, 0);
    ASSERT_EQ(run("--out '" + path("b.csv") + "' bound " + model_args() + " --r '[0.2]' --t '[1]'").code, 0);
    const Result r = run("compare --simulate '" + path("s.csv") + "' --bound '" + path("b.csv") + "'");
    ASSERT_EQ(r.code, 0) << r.err;
    const qdev::io::CsvTable t = qdev::io::parse_csv(r.out);
    ASSERT_EQ(t.rows.size(), 2u);
    EXPECT_EQ(t.rows[0][t.column("status")], "unmatched");  // t = 0.5 has no bound row
    EXPECT_EQ(t.rows[1][t.column("status")], "ok");
    EXPECT_EQ(t.rows[1][t.column("consistent")], "true");
}

TEST_F(Cli, InequalitiesReport) {
    depolarizing_inputs();
    const Result r = run("inequalities --model '" + path("model.json") + "'");
    ASSERT_EQ(r.code, 0) << r.err;
    const qdev::io::CsvTable t = qdev::io::parse_csv(r.out);
    bool saw_gap = false;
    for (const auto& row : t.rows)
        if (row[0] == "spectral_gap") {
            saw_gap = true;
            EXPECT_NEAR(std::stod(row[1]), 1.0, 1e-10);
            EXPECT_EQ(row[2], "computed");
        }
    EXPECT_TRUE(saw_gap);
    EXPECT_EQ(run("inequalities --model '" + path("model.json") + "' --alpha2 5").code, 1);
}

TEST_F(Cli, ConcentrateGridAndMissingInput) {
    Result r = run("concentrate --variant ti_gaussian --inputs '{\"prefactor\": 1, \"ti_hypothesis_attested\": true}' "
                   "--t '[1,2]' --r '[0.5,1]'");
    ASSERT_EQ(r.code, 0) << r.err;
    const qdev::io::CsvTable t = qdev::io::parse_csv(r.out);
    ASSERT_EQ(t.rows.size(), 4u);
    EXPECT_NEAR(std::stod(t.rows[3][t.column("exponent")]), 0.25 * 2.0 * 1.0, 1e-15);
    r = run("concentrate --variant poincare --inputs '{\"prefactor\": 1, \"gap\": 1}'");
    EXPECT_EQ(r.code, 1);
    EXPECT_EQ(error_json(r)["context"], "sup_norm");
}

TEST_F(Cli, ModelTemplates) {
    EXPECT_EQ(run("--out '" + path("c.json") + "' model new classical --rates '[[-1,1],[2,-2]]'").code, 0);
    EXPECT_EQ(run("--out '" + path("t.json") + "' model new tensor --factors 2 --dim 2").code, 0);
    EXPECT_EQ(run("--out '" + path("h.json") + "' model new heat-bath --sites 2 --beta 0.5").code, 0);
    EXPECT_EQ(run("--out '" + path("p.json") + "' model new appendix-b --which psi").code, 0);
    const Result bad = run("--out '" + path("x.json") + "' model new nonsense");
    EXPECT_EQ(bad.code, 1);
    const Result r = run("inequalities --model '" + path("t.json") + "'");
    EXPECT_EQ(r.code, 0) << r.err;
}
