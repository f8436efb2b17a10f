#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() / ("levyband_cli_" + std::to_string(::getpid()) + "_" +
                                            ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::create_directories(dir_);
        write("model.json", R"({"sigma":1,"jump_scale":1,"discount":1,"C":1,"c":0.1,"D":1,"d":0.1})");
        write("creep.json", R"({"mu":-2,"sigma":0,"jump_scale":1,"discount":1,"C":1,"D":1})");
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    void write(const std::string& name, const std::string& text) const { std::ofstream(path(name)) << text; }

    std::string read(const std::string& name) const {
        std::ifstream in(path(name));
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    // Runs the CLI with stdout to out.txt and stderr to err.txt, returns the exit code.
    int run(const std::string& args) const {
        const std::string cmd = std::string(LEVYBAND_CLI_PATH) + " " + args + " > " + path("out.txt") + " 2> " +
                                path("err.txt");
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }

    std::string first_line(const std::string& name) const {
        std::istringstream in(read(name));
        std::string line;
        std::getline(in, line);
        return line;
    }

    fs::path dir_;
};

}  // namespace

TEST_F(CliTest, SolveThenVerifyReproducesReport) {
    ASSERT_EQ(run("solve --config " + path("model.json") + " --out " + path("sol.json")), 0);
    const auto sol = nlohmann::json::parse(read("sol.json"));
    EXPECT_EQ(sol.at("status"), "certified");
    ASSERT_EQ(run("verify --config " + path("model.json") + " --policy " + path("sol.json")), 0);
    const auto report = nlohmann::json::parse(read("out.txt"));
    EXPECT_EQ(report, sol.at("report"));
}

TEST_F(CliTest, CsvCommandsHaveHeaders) {
    ASSERT_EQ(run("solve --config " + path("model.json") + " --out " + path("sol.json")), 0);
    ASSERT_EQ(run("value --config " + path("model.json") + " --policy " + path("sol.json") + " --points 11"), 0);
    EXPECT_EQ(first_line("out.txt"), "x,h,Mh,residual");
    ASSERT_EQ(run("scale --config " + path("model.json") + " --q 0.5 --points 5"), 0);
    EXPECT_EQ(first_line("out.txt"), "x,W,Z");
    ASSERT_EQ(run("stationary --config " + path("creep.json") + " --bands 0,0.5,1.5,2 --points 5"), 0);
    EXPECT_EQ(first_line("out.txt"), "y,density,cdf");
    EXPECT_NE(read("err.txt").find("normalizer,"), std::string::npos);
    ASSERT_EQ(run("occupation --config " + path("creep.json") + " --bands 0,0.5,1.5,2 --bins 4 --horizon 50"), 0);
    EXPECT_EQ(first_line("out.txt"), "bin_lo,bin_hi,mass,cdf");
}

TEST_F(CliTest, TransientAndSimulateEmitJson) {
    ASSERT_EQ(run("transient --config " + path("model.json") +
                  " --bands -2,-1,1,2 --q 1 --x 0 --lo -2 --hi 2"),
              0);
    EXPECT_NEAR(nlohmann::json::parse(read("out.txt")).at("analytic").get<double>(), 1.0, 1e-8);
    ASSERT_EQ(run("simulate --config " + path("model.json") + " --bands -2,-1,1,2 --x0 0 --paths 50 --horizon 2" +
                  " --paths-csv " + path("paths.csv")),
              0);
    const auto j = nlohmann::json::parse(read("out.txt"));
    EXPECT_EQ(j.at("paths"), 50);
    EXPECT_EQ(first_line("paths.csv"), "path,discounted_cost,running_cost,interventions");
}

TEST_F(CliTest, UsageErrorsExitWithTwo) {
    EXPECT_EQ(run(""), 2);
    EXPECT_EQ(run("solve"), 2);
    EXPECT_EQ(run("frobnicate"), 2);
    EXPECT_EQ(run("solve --config " + path("missing.json")), 2);
    write("bad.json", R"({"sigma":1,"jump_scale":-1,"discount":1,"C":1,"D":1})");
    EXPECT_EQ(run("solve --config " + path("bad.json")), 2);
    write("junk.json", "{not json");
    EXPECT_EQ(run("solve --config " + path("junk.json")), 2);
    EXPECT_EQ(run("simulate --config " + path("model.json") + " --bands 1,0,0.5,2 --x0 0"), 2);
}

TEST_F(CliTest, UnsupportedModelFailsWithOne) {
    write("drift.json", R"({"mu":0.3,"sigma":1,"jump_scale":1,"discount":1,"C":1,"D":1})");
    EXPECT_EQ(run("solve --config " + path("drift.json")), 1);
}
