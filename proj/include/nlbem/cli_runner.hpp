#pragma once

#include "nlbem/geometry.hpp"
#include "nlbem/interactions.hpp"

#include "json.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace nlbem {

const char* tool_version();

enum class Task { Eigenvalues, Resolvent, AsymptoticS, AsymptoticW, SchurBounds, DiracNRL, SelfTests };

const char* task_name(Task task);

// Validated scenario. Node-sampled data is kept raw and turned into an
// InteractionSpec per discretization, so resolution sweeps can rebuild it.
struct Scenario {
    std::string path;
    std::string hash;       // SHA-256 of the file bytes
    std::string spec_hash;  // SHA-256 of the canonical curve + interaction blocks
    CurveDescriptor curve;
    int n_nodes = 128;
    Task task = Task::Eigenvalues;
    std::function<InteractionSpec(const DiscretizedCurve&)> interaction;
    nlohmann::json params;  // task block with defaults filled in
    std::vector<int> resolution_sweep;
};

// Throws Error(SchemaError) naming the offending key and its line.
Scenario parse_scenario(const std::string& path);
Scenario parse_scenario_text(const std::string& text, const std::string& base_dir = ".");

struct RunOptions {
    std::string out_dir = ".";
    int threads = 0;           // 0 keeps the default
    std::string dump_dir;      // empty: no operator dump
};

struct RunReport {
    int exit_code = 0;
    std::string error;
    nlohmann::json report;     // also written to out_dir/report.json when the scenario parsed
};

// 0 on success, 2 on validation failure, 3 on numerical failure.
RunReport run_scenario(const std::string& path, const RunOptions& options);

struct SelfCheck {
    std::string name;
    double value = 0.0;      // measured error
    double tolerance = 0.0;
    bool pass = false;
};

std::vector<SelfCheck> self_tests();

// JSON text with every double printed to 17 significant digits, keys sorted.
std::string dump_json(const nlohmann::json& j);
std::string format_double(double x);

// Row-major complex pairs, one matrix row per line.
void write_matrix_csv(const std::string& path, const Eigen::MatrixXcd& m);

}  // namespace nlbem
