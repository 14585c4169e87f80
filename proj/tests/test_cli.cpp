/**
 * @file test_cli.cpp
 * @brief End-to-end runs of the command-line tool.
 */

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mrcmt/config.hpp"

namespace fs = std::filesystem;
using namespace mrcmt;

namespace {

const std::string kCli = MRCMT_CLI_PATH;
const std::string kPaperCfg = std::string(MRCMT_SOURCE_DIR) + "/configs/paper_disk.cfg";

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() / ("mrcmt_cli_" + std::string(info->name()) + "_" +
                                            std::to_string(::getpid()));
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    /// Runs the tool, returns its exit code; stderr goes to err.log.
    int run(const std::string& args) const {
        const std::string cmd = "cd '" + dir_.string() + "' && '" + kCli + "' " + args + " > out.log 2> err.log";
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }

    std::string read(const std::string& name) const {
        std::ifstream in(path(name));
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    std::string write_config(const std::string& name, const std::string& text) const {
        std::ofstream(path(name)) << text;
        return path(name);
    }

    std::string device(const std::string& extra = "") const {
        return "[device]\nR = 5\nw_c = 0\nw_s = 0.4\ng1 = 0.2\ng2 = 0.2\nn_c = 1.5\nn_s = 1.5\nn_b = 1.0\n" + extra;
    }

    fs::path dir_;
};

std::vector<std::vector<std::string>> csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) {
        std::vector<std::string> cells;
        std::istringstream ls(line);
        for (std::string cell; std::getline(ls, cell, ',');) cells.push_back(cell);
        rows.push_back(cells);
    }
    return rows;
}

std::string g12(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

}  // namespace

TEST_F(Cli, ModesTableOrderedByLoss) {
    ASSERT_EQ(run("modes --config '" + kPaperCfg + "' --lambda 1.043 --out modes.csv"), 0) << read("err.log");
    const auto rows = csv(read("modes.csv"));
    ASSERT_EQ(rows.size(), 5u);
    EXPECT_EQ(rows[0], (std::vector<std::string>{"kind", "order", "re_gamma_per_um", "im_gamma_per_um", "n_eff",
                                                 "roundtrip_survival"}));
    double prev_loss = 0.0;
    for (int p = 0; p < 3; ++p) {
        EXPECT_EQ(rows[1 + p][0], "bend");
        EXPECT_EQ(rows[1 + p][1], std::to_string(p));
        const double loss = -std::stod(rows[1 + p][3]);
        EXPECT_GT(loss, prev_loss);
        prev_loss = loss;
        const double survival = std::stod(rows[1 + p][5]);
        EXPECT_GT(survival, 0.0);
        EXPECT_LT(survival, 1.0);
    }
    EXPECT_EQ(rows[4][0], "straight");
    const std::string first = read("modes.csv");
    ASSERT_EQ(run("modes --config '" + kPaperCfg + "' --lambda 1.043 --out modes.csv"), 0);
    EXPECT_EQ(read("modes.csv"), first);
}

TEST_F(Cli, DegenerateScanGivesOneLine) {
    const auto cfg = write_config("one.cfg", device("[scan]\nlambda_start = 1.043\nlambda_stop = 1.043\n"));
    ASSERT_EQ(run("spectrum --config '" + cfg + "' --out s.csv"), 0) << read("err.log");
    const auto rows = csv(read("s.csv"));
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0], (std::vector<std::string>{"lambda_um", "P_T_q0", "P_D_q0", "P_cav_p0", "P_cav_p1",
                                                 "P_cav_p2"}));

    const auto c = config::load_config(cfg);
    const auto direct = resonator::spectrum_point(
        resonator::solve_device(c.device, 1.043, resonator::unit_input(c.device), resonator::Vector::Zero(1)));
    EXPECT_EQ(rows[1][0], "1.043");
    EXPECT_EQ(rows[1][1], g12(direct.transmitted[0]));
    EXPECT_EQ(rows[1][2], g12(direct.dropped[0]));
    for (int p = 0; p < 3; ++p) EXPECT_EQ(rows[1][3 + p], g12(direct.cavity[static_cast<std::size_t>(p)]));
}

TEST_F(Cli, ParallelAndRepeatedRunsAreByteIdentical) {
    const auto cfg = write_config(
        "s.cfg", device("[scan]\nlambda_start = 1.042\nlambda_stop = 1.044\nlambda_step = 5e-4\n[numerics]\nN_b = 1\n"));
    ASSERT_EQ(run("spectrum --config '" + cfg + "' --out serial.csv"), 0) << read("err.log");
    ASSERT_EQ(run("spectrum --config '" + cfg + "' --workers 3 --out parallel.csv"), 0);
    ASSERT_EQ(run("spectrum --config '" + cfg + "' --out again.csv"), 0);
    const std::string serial = read("serial.csv");
    EXPECT_EQ(csv(serial).size(), 6u);
    EXPECT_EQ(read("parallel.csv"), serial);
    EXPECT_EQ(read("again.csv"), serial);
}

TEST_F(Cli, EchoedConfigReproducesRun) {
    const auto cfg = write_config(
        "orig.cfg",
        device("[scan]\nlambda_start = 1.0431\nlambda_stop = 1.0432\nlambda_step = 1e-4\n[numerics]\nN_b = 2\n"));
    ASSERT_EQ(run("config --config '" + cfg + "' --out echo.cfg"), 0);
    ASSERT_EQ(run("spectrum --config '" + cfg + "' --out a.csv"), 0) << read("err.log");
    ASSERT_EQ(run("spectrum --config echo.cfg --out b.csv"), 0) << read("err.log");
    EXPECT_EQ(read("a.csv"), read("b.csv"));
    EXPECT_EQ(csv(read("a.csv")).size(), 3u);
    ASSERT_EQ(run("config --config echo.cfg --out echo2.cfg"), 0);
    EXPECT_EQ(read("echo.cfg"), read("echo2.cfg"));
}

TEST_F(Cli, RunLogEchoesDefaults) {
    ASSERT_EQ(run("modes --config '" + kPaperCfg + "' --lambda 1.043 --out m.csv"), 0);
    const std::string log = read("err.log");
    EXPECT_NE(log.find("z_step = 0.05"), std::string::npos) << log;
    EXPECT_NE(log.find("x_step = 0.005"), std::string::npos);
}

TEST_F(Cli, ConfigErrorsExitTwo) {
    const auto bad = write_config("bad.cfg", device().replace(device().find("g1 = 0.2"), 8, "g1 = -0.1"));
    EXPECT_EQ(run("spectrum --config '" + bad + "' --out s.csv"), 2);
    EXPECT_NE(read("err.log").find("bad.cfg:5: [device] g1 = -0.1"), std::string::npos) << read("err.log");
    EXPECT_FALSE(fs::exists(path("s.csv")));

    EXPECT_EQ(run("spectrum --config missing.cfg"), 2);
    EXPECT_EQ(run("spectrum"), 2);
    EXPECT_EQ(run("--config '" + kPaperCfg + "'"), 2);
    EXPECT_EQ(run("fieldmap --config '" + kPaperCfg + "'"), 2);  // --lambda missing
    EXPECT_EQ(run("spectrum --config '" + kPaperCfg + "' --workers 0"), 2);

    const auto zero_grid = write_config("grid.cfg", device("[outputs]\ngrid_nx = 0\n"));
    EXPECT_EQ(run("fieldmap --config '" + zero_grid + "' --lambda 1.043 --out f.csv"), 2);
    const auto wide_grid = write_config("wide.cfg", device("[outputs]\ngrid_x_min = -30\n"));
    EXPECT_EQ(run("fieldmap --config '" + wide_grid + "' --lambda 1.043 --out f.csv"), 2);
    EXPECT_FALSE(fs::exists(path("f.csv")));
}

TEST_F(Cli, NumericalFailureExitsThreeAndRemovesPartialFile) {
    const auto cfg = write_config("n.cfg", device("[scan]\nlambda_start = 1.043\nlambda_stop = 1.044\n"
                                                  "[numerics]\nN_s = 3\n"));
    EXPECT_EQ(run("spectrum --config '" + cfg + "' --out s.csv"), 3);
    EXPECT_FALSE(fs::exists(path("s.csv")));
    EXPECT_NE(read("err.log").find("at lambda = 1.043"), std::string::npos) << read("err.log");
}

TEST_F(Cli, FieldMapMatchesLibraryAndShowsResonantEnhancement) {
    const auto cfg = write_config("f.cfg", device("[outputs]\ngrid_x_min = -6\ngrid_x_max = 6\ngrid_z_min = -6\n"
                                                  "grid_z_max = 6\ngrid_nx = 49\ngrid_nz = 49\n"));
    auto cavity_max = [&](const std::string& file) {
        double m = 0.0;
        const auto rows = csv(read(file));
        for (std::size_t i = 1; i < rows.size(); ++i) {
            const double x = std::stod(rows[i][0]), z = std::stod(rows[i][1]);
            if (std::hypot(x, z) < 5.0) m = std::max(m, std::stod(rows[i][2]));
        }
        return m;
    };
    ASSERT_EQ(run("fieldmap --config '" + cfg + "' --lambda 1.043 --out on.csv"), 0) << read("err.log");
    ASSERT_EQ(run("fieldmap --config '" + cfg + "' --lambda 1.055 --out off.csv"), 0) << read("err.log");
    const auto rows = csv(read("on.csv"));
    ASSERT_EQ(rows.size(), 1u + 49u * 49u);
    EXPECT_EQ(rows[0], (std::vector<std::string>{"x_um", "z_um", "abs_Ey", "re_Ey", "im_Ey"}));

    const auto c = config::load_config(cfg);
    const auto s = resonator::solve_device(c.device, 1.043, resonator::unit_input(c.device), resonator::Vector::Zero(1));
    const auto m = resonator::compose_field_map(s, c.outputs.grid);
    for (const std::size_t k : {std::size_t{1}, std::size_t{600}, std::size_t{1200}, std::size_t{2401}}) {
        const std::size_t j = (k - 1) / 49, i = (k - 1) % 49;
        const cplx v = m.values(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
        EXPECT_EQ(rows[k][0], g12(m.x[i]));
        EXPECT_EQ(rows[k][1], g12(m.z[j]));
        EXPECT_EQ(rows[k][3], g12(v.real()));
        EXPECT_EQ(rows[k][4], g12(v.imag()));
    }
    EXPECT_GE(cavity_max("on.csv"), 5.0 * cavity_max("off.csv"));
}

TEST_F(Cli, CouplerMatrixRows) {
    const auto cfg = write_config("c.cfg", device("[numerics]\nN_b = 2\n"));
    ASSERT_EQ(run("coupler --config '" + cfg + "' --lambda 1.043 --out c.csv"), 0) << read("err.log");
    const auto rows = csv(read("c.csv"));
    ASSERT_EQ(rows.size(), 1u + 2u * 9u);
    EXPECT_EQ(rows[0][0], "coupler");
    EXPECT_EQ(rows[1][0], "1");
    EXPECT_EQ(rows[1][1], "bend_p0");
    EXPECT_EQ(rows[9][1], "straight_q0");
    EXPECT_EQ(rows[9][2], "straight_q0");
    EXPECT_EQ(rows[10][0], "2");
    // Equal gaps: both couplers share one matrix.
    for (int r = 1; r <= 9; ++r) {
        EXPECT_EQ(std::vector<std::string>(rows[r].begin() + 1, rows[r].end()),
                  std::vector<std::string>(rows[r + 9].begin() + 1, rows[r + 9].end()));
    }
}
