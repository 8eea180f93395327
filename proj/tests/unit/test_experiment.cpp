#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <gtest/gtest.h>

#include "xfer/experiment.hpp"

using namespace xfer;
namespace fs = std::filesystem;

namespace {

// Small enough to run every command in a few seconds.
const char* kSmallConfig = R"({
  "duration": 1.0,
  "trajectories": ["circle", "lemniscate"],
  "learn": {"iterations": 2},
  "transfer": {"source": "circle", "target": "lemniscate", "iterations": 1},
  "repeat": {"repetitions": 2},
  "matrix": {"iterations": 1}
})";

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::string at(std::size_t row, const std::string& column) const {
        for (std::size_t c = 0; c < header.size(); ++c)
            if (header[c] == column) return rows.at(row).at(c);
        throw std::out_of_range("no column " + column);
    }
};

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
}

Table read_csv(const fs::path& path) {
    std::ifstream in(path);
    std::string line;
    Table t;
    std::getline(in, line);
    EXPECT_EQ(line.rfind("# config=", 0), 0u) << path;
    std::getline(in, line);
    t.header = split(line);
    while (std::getline(in, line)) t.rows.push_back(split(line));
    return t;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        path_ = fs::temp_directory_path() /
                ("xfer-test-" + tag + "-" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "-" +
                 std::to_string(reinterpret_cast<std::uintptr_t>(this)));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

ExperimentConfig small_config() { return parse_config(kSmallConfig); }

}  // namespace

TEST(Config, EmptyObjectGivesDefaults) {
    EXPECT_EQ(config_to_json(parse_config("{}")), config_to_json(ExperimentConfig::defaults()));
    EXPECT_NO_THROW(ExperimentConfig::defaults().validate());
}

TEST(Config, ShippedDefaultFileMatchesDefaults) {
    const fs::path file = fs::path(XFER_CONFIG_DIR) / "default.json";
    EXPECT_EQ(config_to_json(load_config(file)), config_to_json(ExperimentConfig::defaults()));
}

TEST(Config, ScalarsBroadcastOverAxes) {
    const auto cfg = parse_config(R"({"source": {"l1": {"m": 4, "omega": [10, 11, 12]}}, "diff_ref": {"m": 7}})");
    EXPECT_EQ(cfg.source.l1.m, VectorXd::Constant(3, 4.0));
    EXPECT_EQ(cfg.source.l1.omega(2), 12.0);
    EXPECT_EQ(cfg.diff_ref_m, VectorXd::Constant(3, 7.0));
}

TEST(Config, RejectsBadInput) {
    const char* bad[] = {
        R"({"sed": 1})",
        R"({"source": {"l1": {"m": [1, 2]}}})",
        R"({"source": {"plant": "hovercraft"}})",
        R"({"source": {"plant": {"tau": -1}}})",
        R"({"trajectories": ["circle", "spiral"]})",
        R"({"trajectories": []})",
        R"({"transfer": {"variant": "neural"}})",
        R"({"seed": -4})",
        R"({"duration": 1.005})",
        R"({"learn": {"iterations": 0}})",
        R"({"dt": "fast"})",
        R"({"seed": 1,})",
    };
    for (const char* text : bad) EXPECT_THROW(parse_config(text), ConfigError) << text;
}

TEST(Config, AcceptsCommentsAndUnboundedLimits) {
    const auto cfg = parse_config(R"({
      // plants
      "target": {"plant": {"preset": "target-like", "delay": 3, "disturbance": false}},
      "ilc": {"u_max": 2.5, "y_max": null}
    })");
    EXPECT_EQ(cfg.target.plant.vehicle.delay, 3);
    EXPECT_FALSE(cfg.target.plant.disturbance.enabled);
    EXPECT_EQ(cfg.u_max, 2.5);
    EXPECT_TRUE(std::isinf(cfg.y_max));
}

TEST(Config, ResolvedJsonRoundTrips) {
    const auto cfg = parse_config(R"({"seed": 99, "target": {"plant": "ideal"}, "transfer": {"variant": "io"}})");
    const auto text = config_to_json(cfg);
    EXPECT_EQ(config_to_json(parse_config(text)), text);
    EXPECT_EQ(text.find("workers"), std::string::npos);
}

TEST(Seeds, DerivationIsStableAndSeparatesStreams) {
    EXPECT_EQ(derive_seed(1, {2, 3}), derive_seed(1, {2, 3}));
    EXPECT_NE(derive_seed(1, {2, 3}), derive_seed(1, {3, 2}));
    EXPECT_NE(derive_seed(1, {2, 3}), derive_seed(2, {2, 3}));
    EXPECT_NE(derive_seed(1, {}), derive_seed(1, {0}));
}

TEST(ParallelFor, RunsEveryIndexAndRethrowsLowestFailure) {
    std::vector<std::atomic<int>> hits(50);
    parallel_for(50, 4, [&](std::size_t i) { hits[i]++; });
    for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
    try {
        parallel_for(20, 3, [](std::size_t i) {
            if (i == 7 || i == 13) throw std::runtime_error("index " + std::to_string(i));
        });
        FAIL() << "expected rethrow";
    } catch (const std::runtime_error& e) {
        EXPECT_STREQ(e.what(), "index 7");
    }
}

TEST(ExitCodes, MapErrorsToCodes) {
    EXPECT_EQ(exit_code_for(ConfigError("x")), kExitConfig);
    EXPECT_EQ(exit_code_for(ExperimentFailure("x", kExitConfig)), kExitConfig);
    EXPECT_EQ(exit_code_for(RolloutDiverged("x", 3)), kExitFault);
    EXPECT_EQ(exit_code_for(std::runtime_error("x")), kExitFault);
}

TEST(Learned, PairRoundTripsThroughFiles) {
    TempDir dir("learned");
    LearnedPair pair{"circle", Signal::Random(3, 11), Signal::Random(3, 10)};
    save_learned(dir.path(), pair);
    const auto back = load_learned(dir.path(), "circle");
    EXPECT_TRUE((back.u.array() == pair.u.array()).all());
    EXPECT_TRUE((back.y_desired.array() == pair.y_desired.array()).all());
}

TEST(Commands, SingleLearningIterationWritesOneRow) {
    TempDir dir("learn1");
    auto cfg = small_config();
    cfg.learn_iterations = 1;
    const auto res = cmd_learn(cfg, dir.path());
    for (const auto& name : cfg.trajectories) {
        const auto t = read_csv(dir.path() / "learn" / (name + ".csv"));
        ASSERT_EQ(t.rows.size(), 1u);
        EXPECT_EQ(t.header, (std::vector<std::string>{"iteration", "error", "max_input", "active_constraints"}));
        EXPECT_EQ(t.at(0, "iteration"), "1");
        EXPECT_TRUE(fs::exists(learned_input_path(dir.path(), name)));
    }
    EXPECT_FALSE(res.reports.empty());
}

TEST(Commands, LearningReducesError) {
    TempDir dir("learn");
    auto cfg = small_config();
    cfg.learn_iterations = 4;
    cmd_learn(cfg, dir.path());
    const auto t = read_csv(dir.path() / "learn" / "circle.csv");
    ASSERT_EQ(t.rows.size(), 4u);
    EXPECT_LT(std::stod(t.at(3, "error")), 0.5 * std::stod(t.at(0, "error")));
}

TEST(Commands, TransferNeedsLearnedArtifacts) {
    TempDir dir("missing");
    try {
        cmd_transfer(small_config(), dir.path());
        FAIL() << "expected ExperimentFailure";
    } catch (const ExperimentFailure& e) {
        EXPECT_EQ(e.exit_code(), kExitConfig);
        EXPECT_NE(std::string(e.what()).find("circle"), std::string::npos);
    }
    EXPECT_THROW(cmd_matrix(small_config(), dir.path()), ExperimentFailure);
}

TEST(Commands, OutputIsByteIdenticalAcrossRunsAndWorkerCounts) {
    TempDir a("det-a"), b("det-b");
    auto cfg = small_config();
    cfg.workers = 1;
    cmd_learn(cfg, a.path());
    cmd_transfer(cfg, a.path());
    cmd_matrix(cfg, a.path());
    cfg.workers = 4;
    cmd_learn(cfg, b.path());
    cmd_transfer(cfg, b.path());
    cmd_matrix(cfg, b.path());
    int compared = 0;
    for (const auto& entry : fs::recursive_directory_iterator(a.path())) {
        if (!entry.is_regular_file()) continue;
        const auto rel = fs::relative(entry.path(), a.path());
        ASSERT_TRUE(fs::exists(b.path() / rel)) << rel;
        EXPECT_EQ(slurp(entry.path()), slurp(b.path() / rel)) << rel;
        ++compared;
    }
    EXPECT_GE(compared, 9);
}

TEST(Commands, TransferWarmStartHelpsOnFirstTrial) {
    TempDir dir("transfer");
    const auto cfg = small_config();
    cmd_learn(cfg, dir.path());
    cmd_transfer(cfg, dir.path());
    const auto t = read_csv(dir.path() / "transfer" / "transfer.csv");
    ASSERT_EQ(t.rows.size(), static_cast<std::size_t>(1 + cfg.transfer_iterations));
    EXPECT_LT(std::stod(t.at(0, "error_with_transfer")), std::stod(t.at(0, "error_without_transfer")));
    EXPECT_TRUE(fs::exists(dir.path() / "transfer" / "map.json"));
}

TEST(Commands, MatrixControlArmShowsNoReduction) {
    TempDir dir("matrix-off");
    auto cfg = small_config();
    cfg.matrix_transfer = false;
    cmd_learn(cfg, dir.path());
    cmd_matrix(cfg, dir.path());
    const auto t = read_csv(dir.path() / "matrix" / "matrix.csv");
    ASSERT_EQ(t.rows.size(), cfg.trajectories.size() * cfg.trajectories.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r) EXPECT_EQ(std::stod(t.at(r, "reduction_percent")), 0.0);
}

TEST(Commands, SingleRepetitionHasZeroSpread) {
    TempDir dir("repeat");
    auto cfg = small_config();
    cfg.repetitions = 1;
    cmd_learn(cfg, dir.path());
    cmd_repeat(cfg, dir.path());
    const auto t = read_csv(dir.path() / "repeat" / "repeat.csv");
    ASSERT_FALSE(t.rows.empty());
    for (std::size_t r = 0; r < t.rows.size(); ++r)
        for (const auto& col : t.header)
            if (col.find("std") != std::string::npos) {
                EXPECT_EQ(std::stod(t.at(r, col)), 0.0) << col;
            }
}

TEST(Commands, DiffRefWithSameModelMatchesMatrix) {
    TempDir dir("diffref");
    auto cfg = small_config();
    cfg.diff_ref_m = cfg.target.l1.m;
    cfg.diff_ref_kp = cfg.target.l1.kp;
    cmd_learn(cfg, dir.path());
    cmd_matrix(cfg, dir.path());
    cmd_diff_ref(cfg, dir.path());
    const auto m = read_csv(dir.path() / "matrix" / "matrix.csv");
    const auto d = read_csv(dir.path() / "diff_ref" / "diff_ref.csv");
    ASSERT_EQ(m.rows.size(), d.rows.size());
    for (std::size_t r = 0; r < m.rows.size(); ++r) {
        const double a = std::stod(m.at(r, "error_with"));
        for (const char* col : {"error_mapped", "error_naive"})
            EXPECT_NEAR(std::stod(d.at(r, col)), a, 1e-6) << col;
    }
}

TEST(Commands, RelativeDegreeReportIsConsistent) {
    TempDir dir("rd");
    cmd_relative_degree(small_config(), dir.path());
    const auto t = read_csv(dir.path() / "relative_degree" / "relative_degree.csv");
    ASSERT_EQ(t.rows.size(), 9u);
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        EXPECT_EQ(t.at(r, "r_analytic"), t.at(r, "r_step"));
        EXPECT_EQ(t.at(r, "minimum_phase"), "1");
    }
    const auto l1 = read_csv(dir.path() / "relative_degree" / "l1_condition.csv");
    ASSERT_EQ(l1.rows.size(), 2u);
    for (std::size_t r = 0; r < 2; ++r) EXPECT_EQ(l1.at(r, "satisfied"), "1");
}
