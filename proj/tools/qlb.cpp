#include "qlb/cli_reporting.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <thread>

namespace {

unsigned default_threads() {
    if (const char* env = std::getenv("QLB_THREADS")) {
        try {
            const long v = std::stol(env);
            if (v >= 1) return static_cast<unsigned>(v);
        } catch (const std::exception&) {
        }
        std::cerr << "qlb: ignoring QLB_THREADS=" << env << " (expected a positive integer)\n";
    }
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Radial and ball solvers for quasilinear p-Laplacian blow-up problems"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    bool override_hypotheses = false;
    unsigned threads = default_threads();

    auto* solve = app.add_subcommand("solve", "Validate a JSON config and run its task");
    solve->add_option("--config", config_path, "Path to the JSON config")->required();
    solve->add_option("--out", out_dir, "Output directory (overrides output.dir)");
    solve->add_flag("--override-hypotheses", override_hypotheses,
                    "Proceed when a gating hypothesis fails; results are marked not covered");
    solve->add_option("--threads", threads, "Worker threads (default: QLB_THREADS or 1)")
        ->check(CLI::PositiveNumber);
    solve->footer(
        "Exit codes: 0 success, 2 hypothesis failure without override, 1 config or compute error.");

    CLI11_PARSE(app, argc, argv);

    qlb::RunConfig cfg;
    try {
        cfg = qlb::load_config(config_path);
    } catch (const std::exception& e) {
        std::cerr << "qlb: " << e.what() << '\n';
        const auto rep = qlb::write_failure_report(out_dir.empty() ? "out" : out_dir, e);
        std::cerr << "qlb: report written to " << rep.report_path.string() << '\n';
        return 1;
    }
    if (!out_dir.empty()) cfg.out_dir = out_dir;

    qlb::RunOptions opt;
    opt.override_hypotheses = override_hypotheses;
    opt.threads = threads;
    const auto rep = qlb::run(cfg, opt);

    for (const auto& e : rep.errors) std::cerr << "qlb: [" << e.stage << "] " << e.message << '\n';
    if (rep.status == qlb::RunStatus::hypothesis_blocked) {
        std::cerr << "qlb: a gating hypothesis failed; rerun with --override-hypotheses to proceed\n";
    }
    std::cout << "report: " << rep.report_path.string() << '\n';
    for (const auto& f : rep.files) std::cout << f.sha256 << "  " << f.name << '\n';
    return rep.exit_code();
}
