#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "rproj/experiment.hpp"

using namespace rproj;

namespace {

template <class Fn>
void expect_error(ErrorKind kind, Fn&& fn) {
    try {
        fn();
        ADD_FAILURE() << "expected an error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), kind) << e.what();
    }
}

ExperimentConfig config(const std::string& text) { return make_config(parse_config_text(text)); }

const char* kSmall = R"(
# small sweep
dataset = sphere
n_factor = 2
grid = 16x1, 32x2
frames_per_cell = 6
gaussian_m = 64
gaussian_reps = 2
eps_list = 0.05, 3.0
c_const = 2
master_seed = 9
)";

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::filesystem::path scratch(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("rproj_harness_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(RPROJ_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

} // namespace

TEST(Config, ParsesListsCommentsAndGrid) {
    const auto c = config(kSmall);
    ASSERT_EQ(c.grid.size(), 2u);
    EXPECT_EQ(c.grid[1], (Cell{32, 2}));
    EXPECT_EQ(c.eps_list.size(), 2u);
    EXPECT_EQ(c.frames_per_cell, 6);
    EXPECT_EQ(c.master_seed, 9u);
    EXPECT_EQ(*c.c_const, 2.0);
}

TEST(Config, KRules) {
    const auto a = config("d_list = 100, 10000\nk_rule = log\nk_const = 0.5\n");
    EXPECT_EQ(a.grid[0].k, static_cast<int>(std::ceil(0.5 * std::log(100.0))));
    EXPECT_EQ(a.grid[1].k, static_cast<int>(std::ceil(0.5 * std::log(10000.0))));
    const auto b = config("d_list = 100\nk_rule = sqrt_log\nk_const = 1\n");
    EXPECT_EQ(b.grid[0].k, static_cast<int>(std::ceil(std::sqrt(std::log(100.0)))));
    const auto f = config("d_list = 8, 9\nk = 3\n");
    EXPECT_EQ(f.grid[1], (Cell{9, 3}));
}

TEST(Config, Errors) {
    expect_error(ErrorKind::config, [] { config("grid = 4x5\n"); });
    expect_error(ErrorKind::config, [] { config("grid = 8x2\nframes_per_cell = 0\n"); });
    expect_error(ErrorKind::config, [] { config("grid = 8x2\nunknown_key = 1\n"); });
    expect_error(ErrorKind::config, [] { config("grid = 8x2\nc_const = 1\n"); });
    expect_error(ErrorKind::config, [] { config("grid = 8x2\ngrid = 8x1\n"); });
    expect_error(ErrorKind::config, [] { config("grid = 8x2\nmaster_seed = abc\n"); });
    expect_error(ErrorKind::config, [] { config("d_list = 8\n"); });
    expect_error(ErrorKind::config, [] { config("grid = 8x2\nline without equals\n"); });
}

TEST(Config, EmptySteinGridIsConfigError) {
    auto c = config("grid = 8x2\n");
    c.stein_eps.clear();
    expect_error(ErrorKind::config, [&] { run_stein_check(c, 1); });
}

TEST(Seeds, FrameSeedsAreIndependentOfOtherCells) {
    const auto a = run_concentration(config(kSmall), 1);
    auto text = std::string(kSmall);
    text.replace(text.find("grid = 16x1, 32x2"), 17, "grid = 32x2");
    const auto b = run_concentration(config(text), 1);
    for (int i = 0; i < 6; ++i) {
        EXPECT_EQ(a.records[6 + i], b.records[i]);
    }
}

TEST(Concentration, RecordsAreWellFormed) {
    const auto cfg = config(kSmall);
    const auto res = run_concentration(cfg, 1);
    ASSERT_EQ(res.records.size(), 12u);
    for (std::size_t i = 0; i < res.records.size(); ++i) {
        const auto& r = res.records[i];
        EXPECT_EQ(r.frame_index, static_cast<int>(i % 6));
        EXPECT_EQ(r.frame_seed, frame_seed(9, r.d, r.k, r.frame_index));
        EXPECT_LE(r.bl_est, 2.0 + 1e-9);
        EXPECT_GE(r.bl_est, 0.0);
        EXPECT_GE(r.bl_stderr, 0.0);
        if (r.k >= 2) {
            // Matched reference samples: BL never exceeds W1.
            EXPECT_LE(r.bl_est, r.w1_est + 1e-12);
        } else {
            // W1 is exact at k = 1; allow for the reference sample's own distance.
            const auto ref = gaussian_sample(1, 1.0, cfg.gaussian_m, reference_seed(reference_seed_for_cell(9, {r.d, 1}), 0));
            const double allowance = w1_exact_1d(ref, 1.0).value;
            EXPECT_LE(r.bl_est, r.w1_est + 2.0 * (r.bl_stderr + allowance));
        }
        EXPECT_EQ(r.runtime_ms, 0);
    }
}

TEST(Concentration, SummaryShape) {
    const auto res = run_concentration(config(kSmall), 1);
    const auto& cells = res.summary["cells"];
    ASSERT_EQ(cells.size(), 2u);
    for (const auto& c : cells) {
        for (const char* key : {"d", "k", "mean_bl", "median_bl", "iqr_bl", "std_bl", "tails", "annealed"}) {
            EXPECT_TRUE(c.contains(key)) << key;
        }
        ASSERT_EQ(c["tails"].size(), 2u);
        const auto& low = c["tails"][0];
        EXPECT_TRUE(low["combined_bound"].is_null());
        EXPECT_TRUE(low.contains("conc_bound"));
        for (const char* key : {"w1", "bound", "noise_floor"}) {
            EXPECT_TRUE(c["annealed"].contains(key)) << key;
        }
    }
    EXPECT_TRUE(res.summary["metadata"].contains("master_seed"));
}

TEST(Concentration, SingleFrame) {
    auto text = std::string(kSmall);
    text.replace(text.find("frames_per_cell = 6"), 19, "frames_per_cell = 1");
    const auto res = run_concentration(config(text), 1);
    for (const auto& c : res.cells) {
        EXPECT_EQ(c.iqr_bl, 0.0);
        for (const auto& t : c.tails) {
            const double e = t["empirical"].get<double>();
            EXPECT_TRUE(e == 0.0 || e == 1.0);
        }
    }
}

TEST(Concentration, DeterministicAcrossRunsAndThreads) {
    const auto cfg = config(kSmall);
    const auto a = run_concentration(cfg, 1);
    const auto b = run_concentration(cfg, 3);
    EXPECT_EQ(records_to_csv(a.records), records_to_csv(b.records));
    EXPECT_EQ(a.summary.dump(), b.summary.dump());
}

TEST(Records, HeaderAndRoundTrip) {
    const auto res = run_concentration(config(kSmall), 1);
    const auto dir = scratch("records");
    const auto path = (dir / "records.csv").string();
    write_records(res.records, path);
    const auto text = read_file(path);
    EXPECT_EQ(text.substr(0, text.find('\n')), "d,k,frame_index,frame_seed,bl_est,bl_stderr,w1_est,runtime_ms");
    EXPECT_EQ(read_records(path), res.records);
    std::filesystem::remove_all(dir);
}

TEST(Records, BadHeaderIsParseError) {
    const auto dir = scratch("badheader");
    const auto path = (dir / "r.csv").string();
    std::ofstream(path) << "d,k,frame\n1,1,0\n";
    expect_error(ErrorKind::parse, [&] { read_records(path); });
    std::filesystem::remove_all(dir);
}

TEST(Annealed, GaussianCloudWithinBound) {
    const auto cfg = config("dataset = gaussian\ngrid = 100x1\nframes_per_cell = 100\nmaster_seed = 3\n");
    const auto j = run_annealed(cfg, 1);
    const auto& a = j["cells"][0]["annealed"];
    EXPECT_LE(a["w1"].get<double>(), a["bound"].get<double>()) << j.dump();
    EXPECT_EQ(a["pooled_size"].get<int>(), 100000);
}

TEST(Annealed, TwoDimensionalCellUsesThinnedPool) {
    const auto cfg = config("dataset = sphere\ngrid = 40x2\nframes_per_cell = 20\ngaussian_m = 256\nmaster_seed = 4\n");
    const auto j = run_annealed(cfg, 1);
    const auto& a = j["cells"][0]["annealed"];
    EXPECT_EQ(a["used_size"].get<int>(), 256);
    EXPECT_GT(a["noise_floor"].get<double>(), 0.0);
    EXPECT_TRUE(a["within_bound_plus_2_noise"].get<bool>()) << j.dump();
}

TEST(SteinCheck, QMomentsOnlyForSmallD) {
    auto cfg = config("grid = 8x2\nstein_d = 6\nstein_trials = 20000\nq_trials = 2000\nstein_eps = 0.2, 0.1\n");
    const auto small = run_stein_check(cfg, 1);
    EXPECT_TRUE(small.contains("q_moment_check"));
    ASSERT_EQ(small["remainder_table"].size(), 2u);
    EXPECT_TRUE(small["remainder_table"][0]["ratio_to_previous"].is_null());
    cfg.stein_d = 13;
    EXPECT_FALSE(run_stein_check(cfg, 1).contains("q_moment_check"));
}

TEST(Cli, ExitCodes) {
    const auto dir = scratch("cli");
    const auto out = dir.string();
    EXPECT_EQ(run_cli("bounds -d 100 -k 1 --sigma 1 --B 1 --eps 1"), 0);
    EXPECT_EQ(run_cli("gen --kind sphere -n 20 -d 5 --out " + out + " --file c.csv"), 0);
    EXPECT_EQ(run_cli("stats " + (dir / "c.csv").string() + " --eps 0.5"), 0);
    EXPECT_EQ(run_cli("cover --dim 1 --smooth-m 2 --radius 1 --eps 3 --norm sup"), 3);
    EXPECT_EQ(run_cli("--no-such-flag"), 2);
    EXPECT_EQ(run_cli("concentration --config " + (dir / "missing.cfg").string()), 2);
    std::ofstream(dir / "bad.cfg") << "grid = 4x5\n";
    EXPECT_EQ(run_cli("concentration --config " + (dir / "bad.cfg").string()), 2);
    std::ofstream(dir / "ok.cfg") << "dataset = sphere\nn_factor = 2\ngrid = 8x1\nframes_per_cell = 3\n"
                                     "gaussian_m = 32\ngaussian_reps = 2\nmaster_seed = 1\n";
    EXPECT_EQ(run_cli("concentration --config " + (dir / "ok.cfg").string() + " --out " + out), 0);
    EXPECT_TRUE(std::filesystem::exists(dir / "records.csv"));
    EXPECT_TRUE(std::filesystem::exists(dir / "summary.json"));
    std::filesystem::remove_all(dir);
}
