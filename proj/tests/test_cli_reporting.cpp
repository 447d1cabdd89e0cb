#include "qlb/cli_reporting.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

using namespace qlb;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("qlb_cli_test_" + name);
    fs::remove_all(dir);
    return dir;
}

std::vector<ConfigIssue> issues_of(const std::string& raw) {
    try {
        validate_config(raw);
    } catch (const ConfigError& e) {
        return e.issues();
    }
    return {};
}

bool has_issue(const std::vector<ConfigIssue>& issues, const std::string& path,
               const std::string& fragment = "") {
    return std::any_of(issues.begin(), issues.end(), [&](const ConfigIssue& i) {
        return i.path == path && i.message.find(fragment) != std::string::npos;
    });
}

const char* kTransform = R"({"schema_version": 1, "task": "verify_transform",
                             "params": {"p": 2, "gamma": 1, "dim": 1}})";

std::string radial_config(double q, const std::string& extra = "") {
    return R"({"schema_version": 1, "task": "solve_radial",
               "params": {"p": 2, "gamma": 0.6, "dim": 3},
               "nonlinearity": {"kind": "power", "q": )" +
           std::to_string(q) + R"(},
               "potential": {"kind": "radial_profile", "base": {"c0": 1}},
               "numerics": {"alpha": 1, "r_max": 5, "nodes": 513, "tol": 1e-10)" +
           extra + "}}";
}

RunReport run_in(const std::string& raw, const fs::path& dir, RunOptions opt = {}) {
    auto cfg = validate_config(raw);
    cfg.out_dir = dir;
    opt.record_timing = false;
    return run(cfg, opt);
}

}  // namespace

TEST(Config, Defaults) {
    const auto cfg = validate_config(kTransform);
    EXPECT_EQ(cfg.task, Task::verify_transform);
    EXPECT_EQ(cfg.tol, 1e-8);
    EXPECT_EQ(cfg.r_max, 100.0);
    EXPECT_EQ(cfg.nodes, 4097u);
    EXPECT_EQ(cfg.mesh_h, 0.1);
    EXPECT_EQ(cfg.out_dir, fs::path("out"));
    EXPECT_FALSE(cfg.nonlinearity);
    EXPECT_STREQ(to_string(Task::full_pipeline), "full_pipeline");
}

TEST(Config, RangeMessages) {
    const auto issues = issues_of(R"({"schema_version": 1, "task": "verify_transform",
                                      "params": {"p": 1, "gamma": 0.5, "dim": 0}})");
    EXPECT_TRUE(has_issue(issues, "/params/gamma", "γ > 1/2 required"));
    EXPECT_TRUE(has_issue(issues, "/params/p", "p > 1 required"));
    EXPECT_TRUE(has_issue(issues, "/params/dim", "N >= 1 required"));
}

TEST(Config, EmptyObjectListsEveryMissingField) {
    const auto issues = issues_of("{}");
    EXPECT_TRUE(has_issue(issues, "/schema_version"));
    EXPECT_TRUE(has_issue(issues, "/task"));
    EXPECT_TRUE(has_issue(issues, "/params"));
}

TEST(Config, UnknownKeyPath) {
    const auto issues = issues_of(radial_config(0.5, R"(, "bogus": 3)"));
    ASSERT_EQ(issues.size(), 1u);
    EXPECT_EQ(issues[0].path, "/numerics/bogus");
}

TEST(Config, MalformedAndDuplicateJson) {
    const auto bad = issues_of(R"({"schema_version": 1,)");
    ASSERT_FALSE(bad.empty());
    EXPECT_EQ(bad[0].path, "");
    const auto dup = issues_of(R"({"schema_version": 1, "schema_version": 1, "task": "verify_transform",
                                   "params": {"p": 2, "gamma": 1, "dim": 1}})");
    ASSERT_FALSE(dup.empty());
    EXPECT_NE(dup[0].message.find("schema_version"), std::string::npos);
}

TEST(Config, TabulatedMustBeNondecreasing) {
    const auto issues = issues_of(R"({"schema_version": 1, "task": "check_hypotheses",
        "params": {"p": 2, "gamma": 0.6, "dim": 3},
        "nonlinearity": {"kind": "tabulated", "samples": [[1, 1], [2, 0.5], [3, 2]]},
        "potential": {"kind": "radial_profile", "base": {"c0": 1}}})");
    EXPECT_TRUE(has_issue(issues, "/nonlinearity/samples", "g must be nondecreasing with g(0) = 0"));
}

TEST(Config, TaskRequirements) {
    const auto issues = issues_of(R"({"schema_version": 1, "task": "ball_solve",
        "params": {"p": 2, "gamma": 0.51, "dim": 3},
        "nonlinearity": {"kind": "power", "q": 0.1},
        "potential": {"kind": "radial_profile", "base": {"c0": 1}}})");
    EXPECT_TRUE(has_issue(issues, "/numerics/alpha"));
    EXPECT_TRUE(has_issue(issues, "/numerics/ball_radii"));
    EXPECT_TRUE(has_issue(issues, "/params/dim", "N = 2"));
}

TEST(Config, ReadsFileAndResolvesOutput) {
    const fs::path dir = scratch("load");
    fs::create_directories(dir);
    {
        std::ofstream(dir / "c.json") << R"({"schema_version": 1, "task": "verify_transform",
            "params": {"p": 2, "gamma": 1, "dim": 1}, "output": {"dir": "res"}})";
    }
    const auto cfg = load_config(dir / "c.json");
    EXPECT_EQ(cfg.out_dir, dir / "res");
    EXPECT_THROW(load_config(dir / "missing.json"), ConfigError);
    fs::remove_all(dir);
}

TEST(Format, NumbersAndHashes) {
    EXPECT_EQ(format_number(0.1), "0.10000000000000001");
    EXPECT_EQ(format_number(2.0), "2");
    const fs::path dir = scratch("hash");
    fs::create_directories(dir);
    {
        std::ofstream(dir / "abc.txt", std::ios::binary) << "abc";
    }
    EXPECT_EQ(sha256_file(dir / "abc.txt"),
              "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    fs::remove_all(dir);
}

TEST(Run, VerifyTransformReport) {
    const fs::path dir = scratch("transform");
    const auto rep = run_in(kTransform, dir);
    EXPECT_EQ(rep.exit_code(), 0);
    EXPECT_EQ(rep.body["transform"]["pass_count"], 10);
    EXPECT_NEAR(rep.body["transform"]["f_inverse_at_1"].get<double>(), 1.2712738985, 1e-9);
    ASSERT_TRUE(fs::exists(dir / "report.json"));
    EXPECT_FALSE(rep.files.empty());
    for (const auto& f : rep.files) {
        EXPECT_EQ(sha256_file(dir / f.name), f.sha256) << f.name;
        EXPECT_EQ(fs::file_size(dir / f.name), f.bytes) << f.name;
    }
    fs::remove_all(dir);
}

TEST(Run, IncompatiblePowerIsReportedNotBlocked) {
    const fs::path dir = scratch("incompatible");
    const auto rep = run_in(R"({"schema_version": 1, "task": "check_hypotheses",
        "params": {"p": 2, "gamma": 1, "dim": 3},
        "nonlinearity": {"kind": "power", "q": 2},
        "potential": {"kind": "radial_profile", "base": {"c0": 1}}})", dir);
    EXPECT_EQ(rep.exit_code(), 0);
    EXPECT_TRUE(rep.body["hypotheses"]["pure_power_family_incompatible"].get<bool>());
    EXPECT_FALSE(rep.body["hypotheses"]["thm11_hypotheses_hold"].get<bool>());
    fs::remove_all(dir);
}

TEST(Run, DeterministicOutputs) {
    const fs::path a = scratch("det_a"), b = scratch("det_b");
    const auto ra = run_in(radial_config(0.5), a, RunOptions{false, 1, false});
    const auto rb = run_in(radial_config(0.5), b, RunOptions{false, 4, false});
    ASSERT_EQ(ra.exit_code(), 0);
    ASSERT_EQ(ra.files.size(), rb.files.size());
    for (std::size_t i = 0; i < ra.files.size(); ++i) {
        EXPECT_EQ(ra.files[i].name, rb.files[i].name);
        EXPECT_EQ(ra.files[i].sha256, rb.files[i].sha256) << ra.files[i].name;
    }
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST(Run, FailedKellerOssermanBlocksUnlessOverridden) {
    const fs::path dir = scratch("blocked");
    const auto blocked = run_in(radial_config(3), dir);
    EXPECT_EQ(blocked.status, RunStatus::hypothesis_blocked);
    EXPECT_EQ(blocked.exit_code(), 2);
    EXPECT_TRUE(fs::exists(dir / "report.json"));
    const auto forced = run_in(radial_config(3), dir, RunOptions{true, 1, false});
    EXPECT_EQ(forced.exit_code(), 0);
    EXPECT_TRUE(forced.override_used);
    EXPECT_FALSE(forced.theorem_covered);
    fs::remove_all(dir);
}

TEST(Run, PartialFailureStillReports) {
    const fs::path dir = scratch("partial");
    const auto rep = run_in(R"({"schema_version": 1, "task": "sandwich",
        "params": {"p": 2, "gamma": 0.51, "dim": 3},
        "nonlinearity": {"kind": "power", "q": 0.1, "delta": 0.1},
        "potential": {"kind": "radial_times_angular", "base": {"c0": 1},
                      "amplitude": {"c0": 0, "c1": 1, "decay": 5}, "frequency": 1},
        "numerics": {"alpha": 2, "r_max": 0.5, "nodes": 257}})", dir);
    EXPECT_EQ(rep.status, RunStatus::compute_error);
    EXPECT_EQ(rep.exit_code(), 1);
    ASSERT_FALSE(rep.errors.empty());
    EXPECT_EQ(rep.errors[0].type, "IntegrityError");
    EXPECT_TRUE(rep.body.contains("sandwich"));
    EXPECT_TRUE(fs::exists(dir / "report.json"));
    fs::remove_all(dir);
}

TEST(Run, FailureReportForBadConfig) {
    const fs::path dir = scratch("failure");
    try {
        validate_config("{}");
        FAIL();
    } catch (const ConfigError& e) {
        const auto rep = write_failure_report(dir, e);
        EXPECT_EQ(rep.exit_code(), 1);
        std::ifstream in(dir / "report.json");
        const auto body = nlohmann::json::parse(in);
        EXPECT_EQ(body["exit_code"], 1);
        EXPECT_FALSE(body["errors"].empty());
    }
    fs::remove_all(dir);
}
