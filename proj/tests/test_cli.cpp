#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include "nlbem/cli_runner.hpp"
#include "nlbem/errors.hpp"
#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/tools/roots.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace nlbem;
namespace fs = std::filesystem;

namespace {

const std::string kScenarios = NLBEM_SCENARIO_DIR;

fs::path fresh_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("nlbem_cli_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

int run_tool(const std::string& args, const fs::path& log) {
    const std::string cmd = std::string(NLBEM_TOOL) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// Message of the SchemaError raised by the text, empty when it parses.
std::string schema_error(const std::string& text) {
    try {
        parse_scenario_text(text);
    } catch (const Error& e) {
        return e.code() == ErrorCode::SchemaError ? e.what() : std::string("other error: ") + e.what();
    }
    return "";
}

double shell_root(double eta) {
    using boost::math::cyl_bessel_i;
    using boost::math::cyl_bessel_k;
    const auto f = [&](double k) { return 1.0 + eta * cyl_bessel_i(0, k) * cyl_bessel_k(0, k); };
    const auto r = boost::math::tools::bisect(f, 1.0, 1.1, [](double a, double b) { return std::abs(a - b) < 1e-15; });
    const double k = 0.5 * (r.first + r.second);
    return -k * k;
}

}  // namespace

TEST_CASE("free circle scenario: no eigenvalues, exit 0") {
    const fs::path out = fresh_dir("free");
    const RunReport r = run_scenario(kScenarios + "/free_circle.json", {out.string(), 0, ""});
    REQUIRE(r.exit_code == 0);
    const auto doc = nlohmann::json::parse(slurp(out / "eigenvalues.json"));
    CHECK(doc["eigenvalues"].empty());
    CHECK(doc["N"] == 128);
    for (const auto& name : r.report["outputs"]) CHECK(fs::exists(out / name.get<std::string>()));
    CHECK(fs::exists(out / "report.json"));
}

TEST_CASE("delta shell scenario: one record at the transcendental root") {
    const fs::path out = fresh_dir("shell");
    const RunReport r = run_scenario(kScenarios + "/delta_shell_circle.json", {out.string(), 0, ""});
    REQUIRE(r.exit_code == 0);
    const auto doc = nlohmann::json::parse(slurp(out / "eigenvalues.json"));
    REQUIRE(doc["eigenvalues"].size() == 1);
    const auto& rec = doc["eigenvalues"][0];
    const double oracle = shell_root(-2.0);
    CHECK(std::abs(rec["w_star"].get<double>() - oracle) <= 1e-4 * std::abs(oracle));
    CHECK(rec["multiplicity"] == 1);
    for (const char* key : {"w_star", "multiplicity", "residuals", "spec_hash", "N"}) CHECK(rec.contains(key));
}

TEST_CASE("outputs are byte-identical across runs and thread caps") {
    const fs::path a = fresh_dir("det_a"), b = fresh_dir("det_b");
    REQUIRE(run_scenario(kScenarios + "/delta_shell_circle.json", {a.string(), 1, ""}).exit_code == 0);
    REQUIRE(run_scenario(kScenarios + "/delta_shell_circle.json", {b.string(), 2, ""}).exit_code == 0);
    CHECK(slurp(a / "eigenvalues.json") == slurp(b / "eigenvalues.json"));
    CHECK(slurp(a / "scan.csv") == slurp(b / "scan.csv"));
}

TEST_CASE("schema validation names the offending key") {
    const std::string misspelt = schema_error(slurp(kScenarios + "/misspelt_key.json"));
    CHECK(misspelt.find("curve.knd") != std::string::npos);
    CHECK(misspelt.find("line 3") != std::string::npos);

    const std::string base = R"({"task": "eigenvalues", "curve": {"kind": "circle"}, )";
    CHECK(schema_error(base + R"("interaction": {"variant": "none"}})").empty());
    CHECK(schema_error(base + R"("interaction": {"variant": "none"}, "eigenvalues": {"w_min": -1, "w_max": -2}})")
              .find("eigenvalues.w_min") != std::string::npos);
    CHECK(schema_error(base + R"("interaction": {"variant": "elementary", "alpha": "x"}})").find("interaction.alpha") !=
          std::string::npos);
    CHECK(schema_error(base + R"("interaction": {"variant": "delta_shell", "eta": -2, "beta_re": 1}})")
              .find("interaction.beta_re") != std::string::npos);
    CHECK(schema_error(base + R"("interaction": {"variant": "none"}, "dirac": {}})").find("'dirac'") !=
          std::string::npos);
    CHECK(schema_error(R"({"task": "eigenvalues", "curve": {"kind": "circle"}})").find("interaction") !=
          std::string::npos);
    CHECK(schema_error(R"({"task": "spectra", "curve": {"kind": "circle"}})").find("task") != std::string::npos);
    CHECK(schema_error(R"({"task": "dirac_nrl", "curve": {"kind": "circle"}, "dirac": {"F": "missing.csv", "G": [[[1, 0], [0, 1]]]}})")
              .find("does not exist") != std::string::npos);
    CHECK(schema_error(R"({"task": "self_tests", "curve": {"kind": "ellipse", "params": {"a": -1, "b": 1}}})")
              .find("curve.params") != std::string::npos);
    CHECK(schema_error("{\"task\": ").find("malformed") != std::string::npos);
}

TEST_CASE("numerical failures exit 3 with the module error in the report") {
    const fs::path dir = fresh_dir("asym");
    fs::create_directories(dir);
    // a non-symmetric (F, G) pair is rejected by the Dirac module, not by the schema
    std::ofstream(dir / "bad.json") << R"({"task": "dirac_nrl", "curve": {"kind": "circle", "n_nodes": 32},
        "dirac": {"F": [[[1, 0], [0, 0.5]]], "G": [[[-0.8, [0.2, 0.1]], [[0.2, -0.1], 0.3]]], "c_list": [8, 16]}})";
    const RunReport r = run_scenario((dir / "bad.json").string(), {(dir / "out").string(), 0, ""});
    CHECK(r.exit_code == 3);
    const auto rep = nlohmann::json::parse(slurp(dir / "out" / "report.json"));
    CHECK(rep["status"] == "failed");
    CHECK(rep["error"].get<std::string>().find("SymmetryViolation") != std::string::npos);
}

TEST_CASE("command line: exit codes, sweep table and operator dump") {
    const fs::path out = fresh_dir("tool");
    fs::create_directories(out);
    CHECK(run_tool("version", out / "v.log") == 0);
    CHECK(slurp(out / "v.log").find(tool_version()) != std::string::npos);
    CHECK(run_tool("run " + kScenarios + "/misspelt_key.json --out " + (out / "m").string(), out / "m.log") == 2);
    CHECK(slurp(out / "m.log").find("curve.knd") != std::string::npos);
    CHECK(run_tool("run " + kScenarios + "/free_circle.json --threads 0", out / "t.log") == 2);

    const std::string args = "run " + kScenarios + "/condition_s_sweep.json --out " + (out / "s").string() +
                             " --dump-operators " + (out / "ops").string();
    REQUIRE(run_tool(args, out / "s.log") == 0);
    const std::string sweep = slurp(out / "s" / "sweep.csv");
    CHECK(sweep.rfind("N,lowest_eigenvalue,richardson,order\n", 0) == 0);
    const auto rep = nlohmann::json::parse(slurp(out / "s" / "report.json"));
    CHECK(rep["convergence_sweep"].size() == 3);
    for (const char* m : {"S.csv", "W.csv", "Wt.csv", "M.csv"}) CHECK(fs::exists(out / "ops" / m));
    // M is 2N x 2N with N = 64: 128 rows of 128 complex pairs
    std::istringstream mcsv(slurp(out / "ops" / "M.csv"));
    std::string line, last;
    int rows = 0;
    while (std::getline(mcsv, line)) {
        ++rows;
        last = line;
    }
    CHECK(rows == 128);
    CHECK(std::count(last.begin(), last.end(), ',') == 2 * 128 - 1);
}

TEST_CASE("dirac scenario writes the rate table") {
    const fs::path out = fresh_dir("dirac");
    const RunReport r = run_scenario(kScenarios + "/dirac_nrl.json", {out.string(), 0, ""});
    REQUIRE(r.exit_code == 0);
    std::istringstream csv(slurp(out / "rates.csv"));
    std::string header;
    std::getline(csv, header);
    CHECK(header == "c,discrepancy,slope_so_far,leakage");
    CHECK(std::abs(r.report["fit"]["slope"].get<double>() + 1.0) <= 0.15);
}

TEST_CASE("seventeen significant digits") {
    CHECK(format_double(0.1) == "0.10000000000000001");
    CHECK(dump_json(nlohmann::json{{"x", 1.0 / 3.0}}).find("0.33333333333333331") != std::string::npos);
    CHECK(dump_json(nlohmann::json{{"x", std::nan("")}}).find("null") != std::string::npos);
}

TEST_CASE("self tests pass on a fresh build") {
    for (const auto& c : self_tests()) {
        INFO(c.name << " " << c.value);
        CHECK(c.pass);
    }
}
