#include <gtest/gtest.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "../common/small_run.hpp"
#include "moce/cli.hpp"
#include "moce/errors.hpp"

namespace fs = std::filesystem;

namespace moce {
namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

struct Invocation {
    int code = 0;
    std::string out;
    std::string err;
};

Invocation moce_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "moce");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    testing::internal::CaptureStdout();
    testing::internal::CaptureStderr();
    Invocation r;
    r.code = cli::run(static_cast<int>(argv.size()), argv.data());
    r.out = testing::internal::GetCapturedStdout();
    r.err = testing::internal::GetCapturedStderr();
    return r;
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("moce_cli_" + std::to_string(::getpid())) / name;
    fs::remove_all(p);
    fs::create_directories(p.parent_path());
    return p;
}

using test::kSmallData;
using test::kSmallModel;
using test::with;

/// Generates and trains the small run once per test binary.
struct SmallRun {
    fs::path data;
    fs::path run;
    fs::path checkpoint;
};

const SmallRun& small_run() {
    static const SmallRun r = [] {
        SmallRun s{scratch("data"), scratch("run"), {}};
        const auto gen = moce_cli(with({"gen-data", "--out", s.data.string()}, kSmallData));
        if (gen.code != 0) throw std::runtime_error("gen-data failed: " + gen.err);
        const auto train = moce_cli(with({"train", "--data", s.data.string(), "--out", s.run.string()}, kSmallModel));
        if (train.code != 0) throw std::runtime_error("train failed: " + train.err);
        s.checkpoint = s.run / "model.ckpt";
        return s;
    }();
    return r;
}

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

TEST(Config, ParsesKeyValueLines) {
    const auto map = cli::parse_config_text("# comment\nembed_dim = 32\n\n  gamma=2.5  # weight\n", "run.cfg");
    EXPECT_EQ(map.at("embed_dim"), "32");
    EXPECT_EQ(map.at("gamma"), "2.5");
    const auto cfg = cli::resolve_config(map);
    EXPECT_EQ(cfg.model.embed_dim, 32u);
    EXPECT_DOUBLE_EQ(cfg.train.gamma, 2.5);
}

TEST(Config, UnknownAndDuplicateKeysNameTheLine) {
    try {
        cli::parse_config_text("gamma = 1\nlearning_rat = 0.1\n", "run.cfg");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("run.cfg:2"), std::string::npos) << e.what();
    }
    EXPECT_THROW(cli::parse_config_text("gamma = 1\ngamma = 2\n", "run.cfg"), ConfigError);
    EXPECT_THROW(cli::parse_config_text("gamma\n", "run.cfg"), ConfigError);
}

TEST(Config, ResolveValidates) {
    EXPECT_THROW(cli::resolve_config({{"noise_rate", "0.6"}}), ConfigError);
    EXPECT_THROW(cli::resolve_config({{"embed_dim", "many"}}), ConfigError);
    EXPECT_THROW(cli::resolve_config({{"learning_rate", "-1"}}), ConfigError);
    EXPECT_NO_THROW(cli::resolve_config({}));
}

TEST(Config, SnapshotRoundTrips) {
    const auto cfg = cli::resolve_config({{"gamma", "7"}, {"num_experts", "6"}});
    const auto again = cli::resolve_config(cli::snapshot(cfg));
    EXPECT_EQ(cli::snapshot(again), cli::snapshot(cfg));
}

TEST(Config, ReferenceListsEveryKey) {
    const std::string ref = cli::config_reference();
    for (const auto& key : cli::config_keys()) EXPECT_NE(ref.find("`" + key.name + "`"), std::string::npos) << key.name;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

TEST(Cli, UsageErrorsExitOne) {
    EXPECT_EQ(moce_cli({"no-such-command"}).code, 1);
    EXPECT_EQ(moce_cli({"--help"}).code, 0);
    EXPECT_EQ(moce_cli({"flops", "--embed-dim", "lots"}).code, 1);
}

TEST(GenData, IsByteIdenticalForASeed) {
    const auto a = scratch("gen_a"), b = scratch("gen_b");
    ASSERT_EQ(moce_cli(with({"gen-data", "--out", a.string()}, kSmallData)).code, 0);
    ASSERT_EQ(moce_cli(with({"gen-data", "--out", b.string()}, kSmallData)).code, 0);
    for (const char* f : {"train.csv", "dev.csv", "test.csv", "schema.json", "generator.json", "manifest.json"}) {
        EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    }
    EXPECT_FALSE(fs::exists(a / ".lock"));
}

TEST(GenData, RejectsNoiseOutOfRange) {
    const auto r = moce_cli({"gen-data", "--out", scratch("noise").string(), "--noise-rate", "0.9"});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("noise_rate"), std::string::npos) << r.err;
}

TEST(Train, MissingDataDirectoryIsAnInputError) {
    const auto r = moce_cli({"train", "--data", scratch("nowhere").string(), "--out", scratch("t").string()});
    EXPECT_EQ(r.code, 1);
}

TEST(Train, WritesReportWithOneRowPerEpoch) {
    const auto& s = small_run();
    const std::string report = slurp(s.run / "train_report.csv");
    EXPECT_EQ(std::count(report.begin(), report.end(), '\n'), 3);
    for (const char* f : {"model.ckpt", "train_summary.json", "thresholds.json", "manifest.json"}) {
        EXPECT_TRUE(fs::exists(s.run / f)) << f;
    }
}

TEST(Eval, NullRunsAreByteIdentical) {
    const auto& s = small_run();
    const auto a = scratch("eval_a"), b = scratch("eval_b");
    const std::vector<std::string> base{"eval", "--checkpoint", s.checkpoint.string(), "--data", s.data.string(),
                                        "--mode", "null"};
    ASSERT_EQ(moce_cli(with(base, {"--out", a.string()})).code, 0);
    ASSERT_EQ(moce_cli(with(base, {"--out", b.string()})).code, 0);
    EXPECT_EQ(slurp(a / "metrics.csv"), slurp(b / "metrics.csv"));
    const std::string metrics = slurp(a / "metrics.csv");
    EXPECT_EQ(metrics.substr(0, metrics.find('\n')), "metric,pre,post,improvement");
}

TEST(Eval, OracleWithoutConceptLabelsExitsTwo) {
    const auto& s = small_run();
    const auto data = scratch("unlabeled");
    fs::copy(s.data, data);
    // Keep only the text and label columns of the test split.
    std::istringstream in(slurp(data / "test.csv"));
    std::string line, out;
    std::getline(in, line);
    out = "text,label\n";
    while (std::getline(in, line)) {
        const auto quote_end = line.find("\",");
        const std::string text = line.substr(0, quote_end + 1);
        out += text + "," + line.substr(line.rfind(',') + 1) + "\n";
    }
    spit(data / "test.csv", out);
    const auto r = moce_cli({"eval", "--checkpoint", s.checkpoint.string(), "--data", data.string(), "--mode",
                             "oracle", "--out", scratch("eval_oracle").string()});
    EXPECT_EQ(r.code, 2) << r.err;
    EXPECT_NE(r.err.find("concept labels"), std::string::npos) << r.err;
}

TEST(Eval, LeavesTheCheckpointUntouched) {
    const auto& s = small_run();
    const std::string before = slurp(s.checkpoint);
    for (const char* mode : {"metacog", "oracle", "max"}) {
        ASSERT_EQ(moce_cli({"eval", "--checkpoint", s.checkpoint.string(), "--data", s.data.string(), "--mode", mode,
                            "--out", scratch(std::string("eval_") + mode).string()})
                      .code,
                  0);
    }
    EXPECT_EQ(slurp(s.checkpoint), before);
}

TEST(Explain, UnknownIdListsTheValidRange) {
    const auto& s = small_run();
    const auto r = moce_cli({"explain", "--checkpoint", s.checkpoint.string(), "--data", s.data.string(),
                             "--example-id", "5000"});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("valid ids are 0..199"), std::string::npos) << r.err;
}

TEST(Explain, NullModeHasNoDiff) {
    const auto& s = small_run();
    const auto out = scratch("explain_null");
    const auto r = moce_cli({"explain", "--checkpoint", s.checkpoint.string(), "--data", s.data.string(),
                             "--example-id", "160", "--format", "json", "--out", out.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(fs::exists(out / "pathway_pre.json"));
    EXPECT_FALSE(fs::exists(out / "pathway_post.json"));
    EXPECT_FALSE(fs::exists(out / "diff.json"));
}

TEST(Explain, RejectsUnknownFormat) {
    const auto& s = small_run();
    EXPECT_EQ(moce_cli({"explain", "--checkpoint", s.checkpoint.string(), "--data", s.data.string(), "--example-id",
                        "160", "--format", "yaml"})
                  .code,
              1);
}

/// Compares `actual` with a file under tests/golden, or rewrites it when
/// MOCE_UPDATE_GOLDEN=1.
void expect_golden(const std::string& name, const std::string& actual) {
    const fs::path path = fs::path(MOCE_GOLDEN_DIR) / name;
    const char* update = std::getenv("MOCE_UPDATE_GOLDEN");
    if (update && std::string(update) == "1") {
        fs::create_directories(path.parent_path());
        spit(path, actual);
        return;
    }
    ASSERT_TRUE(fs::exists(path)) << path << " missing; run with MOCE_UPDATE_GOLDEN=1";
    EXPECT_EQ(slurp(path), actual) << name;
}

TEST(Explain, MatchesGoldenFiles) {
    const auto& s = small_run();
    const auto out = scratch("explain_golden");
    const std::vector<std::string> base{"explain",      "--checkpoint",      s.checkpoint.string(), "--data",
                                        s.data.string(), "--example-id",     test::kGoldenExample,  "--mode",
                                        test::kGoldenMode};
    const auto r = moce_cli(with(base, {"--format", "text"}));
    ASSERT_EQ(r.code, 0) << r.err;
    expect_golden("explain_163_max.txt", r.out);
    const auto j = moce_cli(with(base, {"--format", "json", "--out", out.string()}));
    ASSERT_EQ(j.code, 0) << j.err;
    expect_golden("pathway_pre_163.json", slurp(out / "pathway_pre.json"));
    expect_golden("diff_163_max.json", slurp(out / "diff.json"));
}

TEST(Flops, RowsGrowLinearlyWithBudget) {
    const auto r = moce_cli({"flops", "--num-experts", "8"});
    ASSERT_EQ(r.code, 0) << r.err;
    std::istringstream in(r.out);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "budget,attention,routers,experts,projector,head,total");
    std::vector<double> x, y, total;
    while (std::getline(in, line)) {
        std::vector<double> cols;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cols.push_back(std::stod(cell));
        ASSERT_EQ(cols.size(), 7u);
        x.push_back(cols[0]);
        y.push_back(cols[3]);
        total.push_back(cols[6]);
    }
    ASSERT_EQ(x.size(), 8u);
    for (std::size_t i = 1; i < total.size(); ++i) EXPECT_GT(total[i], total[i - 1]);
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i] / 8;
        my += y[i] / 8;
    }
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    EXPECT_GE(sxy * sxy / (sxx * syy), 0.999);
}

TEST(Flops, BudgetAboveMIsAUsageError) {
    EXPECT_EQ(moce_cli({"flops", "--num-experts", "8", "--budgets", "2,9"}).code, 1);
    EXPECT_EQ(moce_cli({"flops", "--budgets", "two"}).code, 1);
    const auto r = moce_cli({"flops", "--num-experts", "8", "--budgets", "4,2,4"});
    EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 3);
}

TEST(Lock, HeldDirectoryIsRefusedAndReleasedAfterwards) {
    const auto out = scratch("locked");
    fs::create_directories(out);
    spit(out / ".lock", "123\n");
    const auto r = moce_cli({"flops", "--out", out.string()});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("in use"), std::string::npos) << r.err;
    EXPECT_TRUE(fs::exists(out / ".lock"));
    fs::remove(out / ".lock");
    EXPECT_EQ(moce_cli({"flops", "--out", out.string()}).code, 0);
    EXPECT_FALSE(fs::exists(out / ".lock"));
    EXPECT_TRUE(fs::exists(out / "flops.csv"));
    EXPECT_TRUE(fs::exists(out / "manifest.json"));
}

TEST(ConfigReference, WritesMarkdown) {
    const auto file = scratch("ref") / "cli_reference.md";
    fs::create_directories(file.parent_path());
    ASSERT_EQ(moce_cli({"config-reference", "--out", file.string()}).code, 0);
    EXPECT_EQ(slurp(file), cli::config_reference());
}

TEST(ConfigFile, FlagsBeatSetWhichBeatsTheFile) {
    const auto dir = scratch("cfg");
    fs::create_directories(dir);
    spit(dir / "run.cfg", "num_experts = 6\nexperts_active = 1\n");
    auto r = moce_cli({"flops", "--config", (dir / "run.cfg").string()});
    EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 7);
    r = moce_cli({"flops", "--config", (dir / "run.cfg").string(), "--set", "num_experts=5"});
    EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 6);
    r = moce_cli({"flops", "--config", (dir / "run.cfg").string(), "--set", "num_experts=5", "--num-experts", "4"});
    EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 5);
    EXPECT_EQ(moce_cli({"flops", "--set", "num_experts"}).code, 1);
}

}  // namespace
}  // namespace moce
