#include "app.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

struct Result {
    int code;
    std::string err;
};

Result cli(std::vector<std::string> args) {
    args.insert(args.begin(), "dgcast");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    testing::internal::CaptureStdout();
    testing::internal::CaptureStderr();
    const int code = dgcast::app::run(static_cast<int>(argv.size()), argv.data());
    testing::internal::GetCapturedStdout();
    return {code, testing::internal::GetCapturedStderr()};
}

class CliTest : public testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("dgcast_cli_" + std::string(testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
        config_ = dir_ / "config.json";
        std::ofstream(config_) << json{
            {"synthetic", {{"num_domains", 4}, {"series_per_domain", 2}, {"length", 60}, {"seed", 1}}},
            {"train",
             {{"T", 12}, {"h", 3}, {"d_z", 4}, {"hidden", 4}, {"kernel", 3}, {"batch_size", 16},
              {"epochs_stage1", 2}, {"epochs_stage2", 2}, {"stride", 3}, {"sample_paths", 20},
              {"test_fraction", 0.25}}}}
                                      .dump();
    }
    void TearDown() override { fs::remove_all(dir_); }

    fs::path out(const std::string& name) const { return dir_ / name; }
    std::string config() const { return config_.string(); }

    fs::path dir_;
    fs::path config_;
};

} // namespace

TEST_F(CliTest, synth_writes_requested_domains_deterministically) {
    ASSERT_EQ(cli({"synth", "-c", config(), "-o", out("a").string(), "--domains", "5"}).code, 0);
    ASSERT_EQ(cli({"synth", "-c", config(), "-o", out("b").string(), "--domains", "5"}).code, 0);
    const std::string a = slurp(out("a") / "data.csv");
    EXPECT_EQ(a, slurp(out("b") / "data.csv"));
    std::set<std::string> domains;
    std::istringstream lines(a);
    std::string line;
    std::getline(lines, line);
    while (std::getline(lines, line)) domains.insert(line.substr(0, line.find(',')));
    EXPECT_EQ(domains.size(), 5u);
    EXPECT_TRUE(fs::exists(out("a") / "manifest.synth.json"));
}

TEST_F(CliTest, invalid_spec_names_the_field) {
    const Result r = cli({"synth", "-c", config(), "-o", out("bad").string(), "--series", "0"});
    EXPECT_NE(r.code, 0);
    EXPECT_NE(r.err.find("series_per_domain"), std::string::npos) << r.err;
}

TEST_F(CliTest, rerun_requires_overwrite) {
    ASSERT_EQ(cli({"synth", "-c", config(), "-o", out("r").string()}).code, 0);
    EXPECT_EQ(cli({"synth", "-c", config(), "-o", out("r").string()}).code, dgcast::app::kUsage);
    EXPECT_EQ(cli({"synth", "-c", config(), "-o", out("r").string(), "--overwrite"}).code, 0);
}

TEST_F(CliTest, unknown_config_key_is_a_usage_error) {
    std::ofstream(dir_ / "typo.json") << R"({"train": {"betta": 3}})";
    const Result r = cli({"synth", "-c", (dir_ / "typo.json").string(), "-o", out("t").string()});
    EXPECT_EQ(r.code, dgcast::app::kUsage);
    EXPECT_NE(r.err.find("betta"), std::string::npos) << r.err;
}

TEST_F(CliTest, decompose_columns_sum_back) {
    ASSERT_EQ(cli({"decompose", "-c", config(), "-o", out("d").string(), "--kernel", "5"}).code, 0);
    std::istringstream in(slurp(out("d") / "decompose.csv"));
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "domain,series,timestamp,value,trend,seasonal");
    int rows = 0;
    while (std::getline(in, line)) {
        std::vector<std::string> f;
        std::stringstream ss(line);
        for (std::string c; std::getline(ss, c, ',');) f.push_back(c);
        ASSERT_EQ(f.size(), 6u);
        EXPECT_NEAR(std::stod(f[4]) + std::stod(f[5]), std::stod(f[3]), 1e-12);
        ++rows;
    }
    EXPECT_EQ(rows, 4 * 2 * 60);
}

TEST_F(CliTest, pipeline_pretrain_train_evaluate_forecast_dump) {
    const std::string o = out("p").string();
    ASSERT_EQ(cli({"pretrain", "-c", config(), "-o", o, "--variant", "no_reg"}).code, 0);
    ASSERT_EQ(cli({"train", "-c", config(), "-o", o, "--variant", "no_reg"}).code, 0);
    ASSERT_EQ(cli({"evaluate", "-c", config(), "-o", o}).code, 0);
    ASSERT_EQ(cli({"forecast", "-c", config(), "-o", o}).code, 0);
    ASSERT_EQ(cli({"dump-latents", "-c", config(), "-o", o, "--set", "train"}).code, 0);
    // A single test domain has no inter-domain pairs: latents are written, the score is not.
    ASSERT_EQ(cli({"dump-latents", "-c", config(), "-o", o, "--set", "test", "--overwrite"}).code, 0);

    for (const char* cmd : {"pretrain", "train"})
        EXPECT_EQ(read_json(out("p") / ("manifest." + std::string(cmd) + ".json")).at("variant"), "no_reg");
    const json train = read_json(out("p") / "report_train.json");
    const json test = read_json(out("p") / "report_test.json");
    EXPECT_NE(slurp(out("p") / "report_train.json"), slurp(out("p") / "report_test.json"));
    EXPECT_EQ(test.at("variant"), "no_reg");
    for (const char* m : {"nrmse", "smape", "q50", "qmean"}) {
        EXPECT_TRUE(train.at("average").contains(m));
        EXPECT_GE(test.at("average").at(m).get<double>(), 0.0);
    }
    EXPECT_TRUE(fs::exists(out("p") / "report_test.csv"));
    EXPECT_TRUE(fs::exists(out("p") / "report_test.txt"));

    const std::string fc = slurp(out("p") / "forecast_test.csv");
    EXPECT_EQ(fc.substr(0, fc.find('\n')), "domain,series,origin_timestamp,step,q10,q20,q30,q40,q50,q60,q70,q80,q90,point");
    EXPECT_TRUE(fs::exists(out("p") / "latents_test.csv"));
    EXPECT_FALSE(fs::exists(out("p") / "separation_test.json"));
    EXPECT_TRUE(read_json(out("p") / "separation_train.json").contains("specific_ratio"));
    EXPECT_NE(slurp(out("p") / "report_train.txt").find("separation"), std::string::npos);
}

TEST_F(CliTest, missing_checkpoint_names_the_path) {
    const Result r = cli({"train", "-c", config(), "-o", out("m").string()});
    EXPECT_EQ(r.code, dgcast::app::kData);
    EXPECT_NE(r.err.find((out("m") / "stage1.ckpt.json").string()), std::string::npos) << r.err;
    EXPECT_EQ(cli({"evaluate", "-c", config(), "-o", out("m").string()}).code, dgcast::app::kData);
}

TEST_F(CliTest, e2e_and_no_latent_train_without_checkpoint) {
    EXPECT_EQ(cli({"train", "-c", config(), "-o", out("e").string(), "--variant", "e2e"}).code, 0);
    EXPECT_EQ(cli({"train", "-c", config(), "-o", out("n").string(), "--no-latent"}).code, 0);
}

TEST_F(CliTest, ablate_table_and_failed_rows) {
    // One training domain: the regularized variant cannot run, the unregularized one can.
    std::ofstream(dir_ / "one.json") << json{
        {"synthetic", {{"num_domains", 4}, {"series_per_domain", 2}, {"length", 60}}},
        {"train",
         {{"T", 12}, {"h", 3}, {"d_z", 4}, {"hidden", 4}, {"kernel", 3}, {"batch_size", 16}, {"epochs_stage1", 1},
          {"epochs_stage2", 1}, {"stride", 3}, {"sample_paths", 20}, {"test_fraction", 0.75}}}}
                                            .dump();
    const Result r = cli({"ablate", "-c", (dir_ / "one.json").string(), "-o", out("a").string(), "--variants",
                          "full,no_reg", "--seeds", "0,1"});
    EXPECT_EQ(r.code, dgcast::app::kTraining);
    const std::string table = slurp(out("a") / "ablate.txt");
    std::istringstream lines(table);
    std::string header, full, no_reg;
    std::getline(lines, header);
    std::getline(lines, full);
    std::getline(lines, no_reg);
    EXPECT_NE(full.find("failed"), std::string::npos) << table;
    EXPECT_NE(no_reg.find("ok"), std::string::npos) << table;
    EXPECT_NE(no_reg.find("+-"), std::string::npos) << table;
    const json j = read_json(out("a") / "ablate.json");
    EXPECT_EQ(j.at("variants").size(), 2u);
}

TEST_F(CliTest, ablate_is_deterministic_and_rejects_unknown_variants) {
    for (const char* name : {"x", "y"})
        ASSERT_EQ(cli({"ablate", "-c", config(), "-o", out(name).string(), "--variants", "full,no_reg", "--seeds",
                       "0,1"})
                      .code,
                  0);
    EXPECT_EQ(slurp(out("x") / "ablate.txt"), slurp(out("y") / "ablate.txt"));
    const Result bad = cli({"ablate", "-c", config(), "-o", out("z").string(), "--variants", "full,nope"});
    EXPECT_EQ(bad.code, dgcast::app::kUsage);
    EXPECT_NE(bad.err.find("shared_only"), std::string::npos) << bad.err;
}
