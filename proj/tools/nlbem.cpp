// Command-line front end: run <scenario>, self-test, version.
#include "nlbem/cli_runner.hpp"

#include "CLI11.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <iostream>

namespace {

void configure_logging() {
    auto logger = spdlog::stderr_color_mt("nlbem");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%l] %v");
    const char* env = std::getenv("NLBEM_LOG");
    const std::string level = env ? env : "error";
    if (level == "error") {
        spdlog::set_level(spdlog::level::err);
    } else if (level == "info") {
        spdlog::set_level(spdlog::level::info);
    } else if (level == "debug") {
        spdlog::set_level(spdlog::level::debug);
    } else {
        spdlog::set_level(spdlog::level::warn);
        spdlog::warn("NLBEM_LOG must be error, info or debug; got '{}'", level);
        spdlog::set_level(spdlog::level::err);
    }
}

}  // namespace

int main(int argc, char** argv) {
    configure_logging();
    CLI::App app{"Non-local shell interaction solver"};
    app.require_subcommand(1);

    std::string scenario;
    nlbem::RunOptions options;
    auto* run = app.add_subcommand("run", "Execute a scenario file");
    run->add_option("scenario", scenario, "Scenario file (JSON)")->required()->check(CLI::ExistingFile);
    run->add_option("--out", options.out_dir, "Output directory");
    run->add_option("--threads", options.threads, "Worker thread cap")->check(CLI::PositiveNumber);
    run->add_option("--dump-operators", options.dump_dir, "Write S, W, Wt and M as CSV into this directory");

    auto* self = app.add_subcommand("self-test", "Run the embedded invariant checks");
    auto* version = app.add_subcommand("version", "Print the tool version");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (version->parsed()) {
        std::cout << "nlbem " << nlbem::tool_version() << '\n';
        return 0;
    }
    if (self->parsed()) {
        bool ok = true;
        for (const auto& c : nlbem::self_tests()) {
            std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << "  value " << nlbem::format_double(c.value)
                      << "  tolerance " << nlbem::format_double(c.tolerance) << '\n';
            ok = ok && c.pass;
        }
        return ok ? 0 : 1;
    }

    const nlbem::RunReport r = nlbem::run_scenario(scenario, options);
    if (r.report.contains("summary")) {
        for (const auto& line : r.report["summary"]) std::cout << line.get<std::string>() << '\n';
    }
    if (r.exit_code != 0) std::cerr << "error: " << r.error << '\n';
    return r.exit_code;
}
