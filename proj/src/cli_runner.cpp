#include "nlbem/cli_runner.hpp"

#include "nlbem/dirac_nrl.hpp"
#include "nlbem/errors.hpp"
#include "nlbem/layer_operators.hpp"
#include "nlbem/parallel.hpp"
#include "nlbem/special_functions.hpp"
#include "nlbem/spectral_solver.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <openssl/evp.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

namespace nlbem {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

std::string sha256_hex(const std::string& bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr);
    std::string out;
    char buf[3];
    for (unsigned int k = 0; k < len; ++k) {
        std::snprintf(buf, sizeof buf, "%02x", md[k]);
        out += buf;
    }
    return out;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::SchemaError, "cannot read scenario file '" + path + "'");
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// Line of the first occurrence of "key" in the source, 0 when absent.
int line_of(const std::string& text, const std::string& key) {
    const size_t pos = text.find('"' + key + '"');
    if (pos == std::string::npos) return 0;
    return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(pos), '\n'));
}

// A JSON object whose keys are consumed one by one; anything left over is unknown.
class Block {
public:
    Block(const json& j, std::string path, const std::string* text) : j_(j), path_(std::move(path)), text_(text) {
        if (!j_.is_object()) fail("", "expected an object");
    }

    [[noreturn]] void fail(const std::string& key, const std::string& what) const {
        const std::string full = key.empty() ? path_ : (path_.empty() ? key : path_ + "." + key);
        std::string msg = "key '" + full + "': " + what;
        const int line = line_of(*text_, key.empty() ? path_.substr(path_.rfind('.') + 1) : key);
        if (line > 0) msg += " (line " + std::to_string(line) + ")";
        throw Error(ErrorCode::SchemaError, msg);
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    // Rejects keys outside `keys` before anything else is read, so a misspelt key
    // is reported as unknown rather than as a missing neighbour.
    void allow(std::initializer_list<const char*> keys) const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return it.key() == k; })) {
                fail(it.key(), "unknown key");
            }
        }
    }

    const json& at(const std::string& key) {
        if (!j_.contains(key)) fail(key, "missing");
        used_.insert(key);
        return j_.at(key);
    }

    double number(const std::string& key, std::optional<double> fallback = std::nullopt) {
        if (!has(key)) {
            if (!fallback) fail(key, "missing");
            return *fallback;
        }
        const json& v = at(key);
        if (!v.is_number()) fail(key, "must be a number");
        return v.get<double>();
    }

    int integer(const std::string& key, std::optional<int> fallback = std::nullopt) {
        if (!has(key)) {
            if (!fallback) fail(key, "missing");
            return *fallback;
        }
        const json& v = at(key);
        if (!v.is_number_integer()) fail(key, "must be an integer");
        return v.get<int>();
    }

    bool flag(const std::string& key, bool fallback) {
        if (!has(key)) return fallback;
        const json& v = at(key);
        if (!v.is_boolean()) fail(key, "must be true or false");
        return v.get<bool>();
    }

    std::string text(const std::string& key, std::optional<std::string> fallback = std::nullopt) {
        if (!has(key)) {
            if (!fallback) fail(key, "missing");
            return *fallback;
        }
        const json& v = at(key);
        if (!v.is_string()) fail(key, "must be a string");
        return v.get<std::string>();
    }

    std::vector<double> numbers(const std::string& key, std::optional<std::vector<double>> fallback = std::nullopt) {
        if (!has(key)) {
            if (!fallback) fail(key, "missing");
            return *fallback;
        }
        const json& v = at(key);
        if (!v.is_array() || v.empty()) fail(key, "must be a non-empty array of numbers");
        std::vector<double> out;
        for (const auto& x : v) {
            if (!x.is_number()) fail(key, "must be a non-empty array of numbers");
            out.push_back(x.get<double>());
        }
        return out;
    }

    std::vector<cplx> points(const std::string& key, std::vector<cplx> fallback) {
        if (!has(key)) return fallback;
        const json& v = at(key);
        if (!v.is_array() || v.empty()) fail(key, "must be a non-empty array of [x, y] pairs");
        std::vector<cplx> out;
        for (const auto& p : v) {
            if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
                fail(key, "must be a non-empty array of [x, y] pairs");
            }
            out.emplace_back(p[0].get<double>(), p[1].get<double>());
        }
        return out;
    }

    Block child(const std::string& key, bool optional = false) {
        static const json empty = json::object();
        if (!has(key)) {
            if (!optional) fail(key, "missing");
            return Block(empty, path_.empty() ? key : path_ + "." + key, text_);
        }
        const json& v = at(key);
        if (!v.is_object()) fail(key, "expected an object");
        return Block(v, path_.empty() ? key : path_ + "." + key, text_);
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (!used_.count(it.key())) fail(it.key(), "unknown key");
        }
    }

    const std::string& path() const { return path_; }

private:
    const json& j_;
    std::string path_;
    const std::string* text_;
    std::set<std::string> used_;
};

Task parse_task(Block& top) {
    const std::string name = top.text("task");
    for (Task t : {Task::Eigenvalues, Task::Resolvent, Task::AsymptoticS, Task::AsymptoticW, Task::SchurBounds,
                   Task::DiracNRL, Task::SelfTests}) {
        if (name == task_name(t)) return t;
    }
    top.fail("task", "unknown task '" + name + "'");
}

// Scenario block holding the parameters of a task.
const char* task_block(Task t) {
    switch (t) {
        case Task::Eigenvalues: return "eigenvalues";
        case Task::Resolvent: return "resolvent";
        case Task::AsymptoticS: return "asymptotic_S";
        case Task::AsymptoticW: return "asymptotic_W";
        case Task::SchurBounds: return "schur_bounds";
        case Task::DiracNRL: return "dirac";
        case Task::SelfTests: return "self_tests";
    }
    return "";
}

CurveDescriptor parse_curve(Block& cb, int& n_nodes) {
    cb.allow({"kind", "params", "n_nodes"});
    const std::string kind = cb.text("kind");
    Block p = cb.child("params", true);
    if (kind == "circle") p.allow({"radius"});
    if (kind == "ellipse") p.allow({"a", "b"});
    if (kind == "star") p.allow({"r0", "eps", "lobes"});
    if (kind == "trigonometric") p.allow({"xc", "xs", "yc", "ys"});
    n_nodes = cb.integer("n_nodes", 128);
    if (n_nodes < 8) cb.fail("n_nodes", "must be at least 8");
    CurveDescriptor d;
    if (kind == "circle") {
        d = CurveDescriptor::circle(p.number("radius", 1.0));
    } else if (kind == "ellipse") {
        d = CurveDescriptor::ellipse(p.number("a"), p.number("b"));
    } else if (kind == "star") {
        d = CurveDescriptor::star(p.number("r0", 1.0), p.number("eps"), p.integer("lobes"));
    } else if (kind == "trigonometric") {
        d = CurveDescriptor::trigonometric(p.numbers("xc"), p.numbers("xs", std::vector<double>{0.0}), p.numbers("yc", std::vector<double>{0.0}),
                                           p.numbers("ys"));
    } else {
        cb.fail("kind", "unknown curve kind '" + kind + "'");
    }
    p.finish();
    try {
        d.validate();
    } catch (const Error& e) {
        cb.fail("params", e.what());
    }
    return d;
}

cplx parse_entry(Block& b, const std::string& key, const json& e) {
    if (e.is_number()) return e.get<double>();
    if (e.is_array() && e.size() == 2 && e[0].is_number() && e[1].is_number()) {
        return {e[0].get<double>(), e[1].get<double>()};
    }
    b.fail(key, "matrix entries must be numbers or [re, im] pairs");
}

// Node-sampled 2x2 matrices: an inline array (one matrix is broadcast to every
// node) or the name of a CSV file with rows re/im of A11, A12, A21, A22.
std::vector<Eigen::Matrix2cd> parse_matrices(Block& b, const std::string& key, const std::string& base_dir) {
    const json& v = b.at(key);
    std::vector<Eigen::Matrix2cd> out;
    if (v.is_string()) {
        const fs::path file = fs::path(base_dir) / v.get<std::string>();
        if (!fs::exists(file)) b.fail(key, "referenced file '" + file.string() + "' does not exist");
        std::ifstream in(file);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#') continue;
            std::replace(line.begin(), line.end(), ',', ' ');
            std::istringstream s(line);
            double x[8];
            for (double& e : x) {
                if (!(s >> e)) b.fail(key, "CSV rows need 8 numbers (re, im of A11, A12, A21, A22)");
            }
            Eigen::Matrix2cd m;
            m << cplx(x[0], x[1]), cplx(x[2], x[3]), cplx(x[4], x[5]), cplx(x[6], x[7]);
            out.push_back(m);
        }
    } else if (v.is_array()) {
        for (const auto& m : v) {
            if (!m.is_array() || m.size() != 2 || !m[0].is_array() || !m[1].is_array() || m[0].size() != 2 ||
                m[1].size() != 2) {
                b.fail(key, "expected an array of 2x2 matrices");
            }
            Eigen::Matrix2cd a;
            for (int r = 0; r < 2; ++r)
                for (int c = 0; c < 2; ++c) a(r, c) = parse_entry(b, key, m[r][c]);
            out.push_back(a);
        }
    } else {
        b.fail(key, "expected an array of 2x2 matrices or a CSV file name");
    }
    if (out.empty()) b.fail(key, "no matrices given");
    return out;
}

std::vector<Eigen::Matrix2cd> at_nodes(const std::vector<Eigen::Matrix2cd>& a, int n) {
    if (a.size() == 1) return std::vector<Eigen::Matrix2cd>(static_cast<size_t>(n), a[0]);
    if (static_cast<int>(a.size()) != n) {
        throw Error(ErrorCode::InvalidArgument, "node-sampled matrices do not match the discretization");
    }
    return a;
}

void check_node_count(Block& b, const std::string& key, size_t size, int n_nodes, bool sweep) {
    if (size == 1) return;
    if (static_cast<int>(size) != n_nodes) b.fail(key, "needs one matrix or n_nodes matrices");
    if (sweep) b.fail(key, "a resolution sweep needs a single broadcast matrix");
}

std::function<InteractionSpec(const DiscretizedCurve&)> parse_interaction(Block& ib, int n_nodes, bool sweep,
                                                                          const std::string& base_dir) {
    const std::string variant = ib.text("variant");
    if (variant == "none") ib.allow({"variant"});
    if (variant == "elementary") ib.allow({"variant", "alpha", "beta_re", "beta_im", "gamma"});
    if (variant == "delta_shell" || variant == "oblique") ib.allow({"variant", "eta", "truncation"});
    if (variant == "condition_s") ib.allow({"variant", "law", "ratio", "exponent", "count"});
    if (variant == "dirac_induced") ib.allow({"variant", "F", "G"});
    if (variant == "none") {
        return [](const DiscretizedCurve&) -> InteractionSpec { return Elementary{}; };
    }
    if (variant == "elementary") {
        Elementary e;
        e.alpha = ib.number("alpha", 0.0);
        e.beta = cplx(ib.number("beta_re", 0.0), ib.number("beta_im", 0.0));
        e.gamma = ib.number("gamma", 0.0);
        return [e](const DiscretizedCurve&) -> InteractionSpec { return e; };
    }
    if (variant == "delta_shell" || variant == "oblique") {
        const double eta = ib.number("eta");
        const int k = ib.integer("truncation", 16);
        if (k < 0) ib.fail("truncation", "must be non-negative");
        if (variant == "delta_shell") {
            return [=](const DiscretizedCurve&) -> InteractionSpec { return DeltaShellCompact{eta, k}; };
        }
        return [=](const DiscretizedCurve&) -> InteractionSpec { return ObliqueType{eta, k}; };
    }
    if (variant == "condition_s") {
        const std::string law = ib.text("law", std::string("geometric"));
        DecayLaw dl;
        double param;
        if (law == "geometric") {
            dl = DecayLaw::Geometric;
            param = ib.number("ratio");
            if (!(param > 0.0 && param < 1.0)) ib.fail("ratio", "must lie in (0, 1)");
        } else if (law == "power") {
            dl = DecayLaw::Power;
            param = ib.number("exponent");
            if (!(param > 0.0)) ib.fail("exponent", "must be positive");
        } else {
            ib.fail("law", "unknown law '" + law + "'");
        }
        const int count = ib.integer("count");
        if (count < 1) ib.fail("count", "must be at least 1");
        return [=](const DiscretizedCurve& c) -> InteractionSpec { return condition_s_family(dl, param, count, c); };
    }
    if (variant == "dirac_induced") {
        auto F = parse_matrices(ib, "F", base_dir);
        auto G = parse_matrices(ib, "G", base_dir);
        check_node_count(ib, "F", F.size(), n_nodes, sweep);
        check_node_count(ib, "G", G.size(), n_nodes, sweep);
        return [F, G](const DiscretizedCurve& c) -> InteractionSpec {
            return DiracInduced{at_nodes(F, c.n), at_nodes(G, c.n)};
        };
    }
    ib.fail("variant", "unknown interaction variant '" + variant + "'");
}

json complex_list(const std::vector<cplx>& z) {
    json out = json::array();
    for (cplx p : z) out.push_back({p.real(), p.imag()});
    return out;
}

json matrices_json(const std::vector<Eigen::Matrix2cd>& a) {
    json out = json::array();
    for (const auto& m : a) {
        json mj = json::array();
        for (int r = 0; r < 2; ++r) {
            json row = json::array();
            for (int c = 0; c < 2; ++c) row.push_back({m(r, c).real(), m(r, c).imag()});
            mj.push_back(row);
        }
        out.push_back(mj);
    }
    return out;
}

// Reads the task block and records every parameter, defaults included.
json parse_task_params(Task task, Block& b, int n_nodes, const std::string& base_dir) {
    json p = json::object();
    auto w_list = [&](std::vector<double> fallback) {
        std::vector<double> w = b.numbers("w_list", fallback);
        for (double x : w) {
            if (!(x < 0.0)) b.fail("w_list", "entries must be negative");
        }
        return w;
    };
    auto grid = [&](double hw, int n) {
        p["half_width"] = b.number("half_width", hw);
        p["grid_n"] = b.integer("grid_n", n);
        if (!(p["half_width"].get<double>() > 0.0)) b.fail("half_width", "must be positive");
        if (p["grid_n"].get<int>() < 8) b.fail("grid_n", "must be at least 8");
    };
    switch (task) {
        case Task::Eigenvalues: b.allow({"w_min", "w_max", "points", "rel_tol", "mode", "mu_count", "residuals"}); break;
        case Task::Resolvent: b.allow({"w_re", "w_im", "half_width", "grid_n", "centres", "sigma", "mode"}); break;
        case Task::AsymptoticS: b.allow({"w_list", "density_modes", "compact_modes"}); break;
        case Task::AsymptoticW: b.allow({"w_list", "tau"}); break;
        case Task::SchurBounds: b.allow({"w_re", "w_im", "kernels"}); break;
        case Task::DiracNRL: b.allow({"F", "G", "c_list", "w_re", "w_im", "half_width", "grid_n", "centres", "sigma"}); break;
        case Task::SelfTests: b.allow({}); break;
    }
    switch (task) {
        case Task::Eigenvalues: {
            if (b.has("w_min")) p["w_min"] = b.number("w_min");
            p["w_max"] = b.number("w_max", -1e-4);
            p["points"] = b.integer("points", 128);
            p["rel_tol"] = b.number("rel_tol", 1e-10);
            p["mode"] = b.text("mode", std::string("rank"));
            p["mu_count"] = b.integer("mu_count", 0);
            p["residuals"] = b.flag("residuals", true);
            if (!(p["w_max"].get<double>() < 0.0)) b.fail("w_max", "must be negative");
            if (p.contains("w_min") && !(p["w_min"].get<double>() < p["w_max"].get<double>())) {
                b.fail("w_min", "range [w_min, w_max] is empty");
            }
            if (p["points"].get<int>() < 4) b.fail("points", "must be at least 4");
            if (p["mode"] != "rank" && p["mode"] != "sqrt") b.fail("mode", "must be 'rank' or 'sqrt'");
            if (p["mu_count"].get<int>() < 0) b.fail("mu_count", "must be non-negative");
            break;
        }
        case Task::Resolvent: {
            p["w_re"] = b.number("w_re", -1.0);
            p["w_im"] = b.number("w_im", 1.0);
            grid(3.0, 64);
            p["centres"] = complex_list(b.points("centres", {cplx(0.2, 0.1)}));
            p["sigma"] = b.number("sigma", 0.3);
            p["mode"] = b.text("mode", std::string("rank"));
            if (p["mode"] != "rank" && p["mode"] != "sqrt") b.fail("mode", "must be 'rank' or 'sqrt'");
            if (!(p["sigma"].get<double>() > 0.0)) b.fail("sigma", "must be positive");
            break;
        }
        case Task::AsymptoticS: {
            p["w_list"] = w_list({-1e2, -1e3, -1e4, -1e5});
            std::vector<double> modes = b.numbers("density_modes", std::vector<double>{0.0, 1.0, 3.0});
            for (double m : modes) {
                if (m != std::floor(m)) b.fail("density_modes", "entries must be integers");
            }
            p["density_modes"] = modes;
            p["compact_modes"] = b.integer("compact_modes", 2);
            if (p["compact_modes"].get<int>() < 0 || 2 * p["compact_modes"].get<int>() + 1 > n_nodes) {
                b.fail("compact_modes", "out of range for n_nodes");
            }
            break;
        }
        case Task::AsymptoticW: {
            p["w_list"] = w_list({-1e2, -1e3, -1e4, -1e5});
            p["tau"] = b.number("tau", 0.25);
            if (!(p["tau"].get<double>() > 0.0)) b.fail("tau", "must be positive");
            break;
        }
        case Task::SchurBounds: {
            p["w_re"] = b.number("w_re", -1.0);
            p["w_im"] = b.number("w_im", 0.0);
            std::vector<std::string> kernels;
            if (b.has("kernels")) {
                const json& k = b.at("kernels");
                if (!k.is_array() || k.empty()) b.fail("kernels", "must be a non-empty array of names");
                for (const auto& e : k) {
                    if (!e.is_string() || (e != "k0_modulus" && e != "k1_remainder")) {
                        b.fail("kernels", "entries must be 'k0_modulus' or 'k1_remainder'");
                    }
                    kernels.push_back(e.get<std::string>());
                }
            } else {
                kernels = {"k0_modulus", "k1_remainder"};
            }
            p["kernels"] = kernels;
            break;
        }
        case Task::DiracNRL: {
            auto F = parse_matrices(b, "F", base_dir);
            auto G = parse_matrices(b, "G", base_dir);
            check_node_count(b, "F", F.size(), n_nodes, false);
            check_node_count(b, "G", G.size(), n_nodes, false);
            p["F"] = matrices_json(F);
            p["G"] = matrices_json(G);
            std::vector<double> cs = b.numbers("c_list", default_c_list());
            if (cs.size() < 2) b.fail("c_list", "needs at least two values");
            for (double c : cs) {
                if (!(c > 0.0)) b.fail("c_list", "entries must be positive");
            }
            p["c_list"] = cs;
            p["w_re"] = b.number("w_re", -1.0);
            p["w_im"] = b.number("w_im", 1.0);
            grid(2.5, 64);
            p["centres"] = complex_list(b.points("centres", {cplx(0.0, 0.0), cplx(0.5, 0.2), cplx(-0.3, -0.6),
                                                             cplx(0.85, -0.85), cplx(-0.2, 0.9)}));
            p["sigma"] = b.number("sigma", 0.3);
            if (!(p["sigma"].get<double>() > 0.0)) b.fail("sigma", "must be positive");
            break;
        }
        case Task::SelfTests: break;
    }
    b.finish();
    return p;
}

std::vector<Eigen::Matrix2cd> matrices_from_json(const json& j) {
    std::vector<Eigen::Matrix2cd> out;
    for (const auto& m : j) {
        Eigen::Matrix2cd a;
        for (int r = 0; r < 2; ++r)
            for (int c = 0; c < 2; ++c) a(r, c) = cplx(m[r][c][0].get<double>(), m[r][c][1].get<double>());
        out.push_back(a);
    }
    return out;
}

std::vector<cplx> points_from_json(const json& j) {
    std::vector<cplx> out;
    for (const auto& p : j) out.emplace_back(p[0].get<double>(), p[1].get<double>());
    return out;
}

void dump_value(std::ostream& os, const json& j, int indent) {
    const std::string pad(static_cast<size_t>(indent), ' ');
    const std::string inner(static_cast<size_t>(indent + 2), ' ');
    switch (j.type()) {
        case json::value_t::object: {
            if (j.empty()) {
                os << "{}";
                return;
            }
            os << "{\n";
            size_t k = 0;
            for (auto it = j.begin(); it != j.end(); ++it, ++k) {
                os << inner << json(it.key()).dump() << ": ";
                dump_value(os, it.value(), indent + 2);
                os << (k + 1 < j.size() ? ",\n" : "\n");
            }
            os << pad << "}";
            return;
        }
        case json::value_t::array: {
            if (j.empty()) {
                os << "[]";
                return;
            }
            bool flat = true;
            for (const auto& e : j) flat = flat && !e.is_structured();
            if (flat) {
                os << "[";
                for (size_t k = 0; k < j.size(); ++k) {
                    if (k) os << ", ";
                    dump_value(os, j[k], indent);
                }
                os << "]";
                return;
            }
            os << "[\n";
            for (size_t k = 0; k < j.size(); ++k) {
                os << inner;
                dump_value(os, j[k], indent + 2);
                os << (k + 1 < j.size() ? ",\n" : "\n");
            }
            os << pad << "]";
            return;
        }
        case json::value_t::number_float: {
            const double x = j.get<double>();
            os << (std::isfinite(x) ? format_double(x) : "null");
            return;
        }
        default: os << j.dump();
    }
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write '" + path.string() + "'");
    out << text;
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Richardson estimate from three successive values; the order follows from the
// ratio of consecutive differences.
void sweep_columns(const std::vector<int>& n, const std::vector<double>& v, std::vector<double>& limit,
                   std::vector<double>& order) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    limit.assign(v.size(), nan);
    order.assign(v.size(), nan);
    for (size_t k = 2; k < v.size(); ++k) {
        const double e1 = v[k - 1] - v[k - 2], e2 = v[k] - v[k - 1];
        if (!std::isfinite(e1) || !std::isfinite(e2)) continue;
        if (e2 == 0.0) {
            limit[k] = v[k];
            continue;
        }
        const double r = static_cast<double>(n[k]) / n[k - 1];
        const double p = std::log(std::abs(e1 / e2)) / std::log(r);
        order[k] = p;
        const double f = std::pow(r, p) - 1.0;
        if (f > 0.0) limit[k] = v[k] + e2 / f;
    }
}

struct TaskContext {
    const Scenario& sc;
    fs::path out;
    json& report;
    std::vector<std::string> summary;

    fs::path output(const std::string& name) {
        report["outputs"].push_back(name);
        return out / name;
    }
};

ScanOptions scan_options(const json& p, const DiscretizedCurve& curve, const InteractionSpec& spec) {
    ScanOptions o;
    o.w_min = p.contains("w_min") ? p["w_min"].get<double>() : default_scan_floor(curve, spec);
    o.w_max = p["w_max"].get<double>();
    if (!(o.w_min < o.w_max)) throw Error(ErrorCode::SchemaError, "scan floor lies above w_max");
    o.points = p["points"].get<int>();
    o.rel_tol = p["rel_tol"].get<double>();
    o.mode = p["mode"] == "sqrt" ? FactorMode::Sqrt : FactorMode::Rank;
    o.mu_count = p["mu_count"].get<int>();
    o.compute_residuals = p["residuals"].get<bool>();
    return o;
}

void run_eigenvalues(TaskContext& ctx) {
    const auto& sc = ctx.sc;
    const json& p = sc.params;
    const DiscretizedCurve curve = discretize(sc.curve, sc.n_nodes);
    const InteractionSpec spec = sc.interaction(curve);
    ScanOptions o = scan_options(p, curve, spec);
    o.cache = std::make_shared<WeylCache>();
    spdlog::info("eigenvalue scan on [{}, {}] with {} points, N = {}", o.w_min, o.w_max, o.points, curve.n);
    const EigenSearch s = find_eigenvalues(curve, spec, o);

    json records = json::array();
    for (const auto& e : s.eigenvalues) {
        json r;
        r["w_star"] = e.w_star;
        r["multiplicity"] = e.multiplicity;
        r["residuals"] = {{"bs", e.residual_bs}, {"pde", e.residual_pde}, {"tc", e.residual_tc}};
        r["spec_hash"] = sc.spec_hash;
        r["N"] = curve.n;
        records.push_back(r);
    }
    json tracked = json::array();
    for (const auto& t : s.tracked) {
        json r = {{"k", t.k}, {"found", t.found}};
        r["w"] = t.found ? json(t.w) : json(nullptr);
        tracked.push_back(r);
    }
    json doc;
    doc["spec"] = interaction_name(spec);
    doc["spec_hash"] = sc.spec_hash;
    doc["N"] = curve.n;
    doc["w_range"] = {o.w_min, o.w_max};
    doc["eigenvalues"] = records;
    doc["tracked_roots"] = tracked;
    doc["warnings"] = s.warnings;
    write_text(ctx.output("eigenvalues.json"), dump_json(doc));

    std::ostringstream csv;
    csv << "w,indicator,negative_count\n";
    for (const auto& b : s.scan) csv << format_double(b.w) << ',' << format_double(b.indicator) << ',' << b.negative_count << '\n';
    write_text(ctx.output("scan.csv"), csv.str());

    ctx.summary.push_back(std::to_string(s.eigenvalues.size()) + " eigenvalue(s) in [" + format_double(o.w_min) + ", " +
                          format_double(o.w_max) + "]");
    for (const auto& e : s.eigenvalues) {
        ctx.summary.push_back("  w = " + format_double(e.w_star) + "  multiplicity " + std::to_string(e.multiplicity));
    }
    for (const auto& w : s.warnings) ctx.summary.push_back("  warning: " + w);

    if (sc.resolution_sweep.empty()) return;
    std::vector<double> lowest;
    for (int n : sc.resolution_sweep) {
        const DiscretizedCurve cn = discretize(sc.curve, n);
        ScanOptions on = scan_options(p, cn, sc.interaction(cn));
        on.compute_residuals = false;
        on.mu_count = 0;
        const EigenSearch sn = find_eigenvalues(cn, sc.interaction(cn), on);
        lowest.push_back(sn.eigenvalues.empty() ? std::numeric_limits<double>::quiet_NaN() : sn.eigenvalues.front().w_star);
        spdlog::info("sweep N = {}: lowest eigenvalue {}", n, lowest.back());
    }
    std::vector<double> limit, order;
    sweep_columns(sc.resolution_sweep, lowest, limit, order);
    std::ostringstream sw;
    sw << "N,lowest_eigenvalue,richardson,order\n";
    json table = json::array();
    for (size_t k = 0; k < lowest.size(); ++k) {
        sw << sc.resolution_sweep[k] << ',' << format_double(lowest[k]) << ',' << format_double(limit[k]) << ','
           << format_double(order[k]) << '\n';
        table.push_back({{"N", sc.resolution_sweep[k]}, {"lowest_eigenvalue", lowest[k]}, {"richardson", limit[k]},
                         {"order", order[k]}});
    }
    write_text(ctx.output("sweep.csv"), sw.str());
    ctx.report["convergence_sweep"] = table;
}

void run_resolvent(TaskContext& ctx) {
    const auto& sc = ctx.sc;
    const json& p = sc.params;
    const DiscretizedCurve curve = discretize(sc.curve, sc.n_nodes);
    const InteractionSpec spec = sc.interaction(curve);
    const cplx w(p["w_re"].get<double>(), p["w_im"].get<double>());
    const Grid2D grid = Grid2D::centered(p["half_width"].get<double>(), p["grid_n"].get<int>());
    KreinOptions ko;
    ko.mode = p["mode"] == "sqrt" ? FactorMode::Sqrt : FactorMode::Rank;
    const KreinResolvent res(curve, spec, w, grid, ko);
    const auto panel = gaussian_panel(grid, points_from_json(p["centres"]), p["sigma"].get<double>());
    std::ostringstream csv;
    csv << "entry,i,j,x,y,re,im\n";
    json fields = json::array();
    for (size_t e = 0; e < panel.size(); ++e) {
        const KreinResult r = res.apply(panel[e]);
        double peak = 0.0, l2 = 0.0;
        for (int a = 0; a < grid.n; ++a) {
            for (int b = 0; b < grid.n; ++b) {
                if (!r.valid(a, b)) continue;
                const cplx x = grid.point(a, b);
                csv << e << ',' << a << ',' << b << ',' << format_double(x.real()) << ',' << format_double(x.imag()) << ','
                    << format_double(r.u(a, b).real()) << ',' << format_double(r.u(a, b).imag()) << '\n';
                peak = std::max(peak, std::abs(r.u(a, b)));
                l2 += std::norm(r.u(a, b)) * grid.cell_area();
            }
        }
        fields.push_back({{"entry", e}, {"max_abs", peak}, {"l2_norm", std::sqrt(l2)}});
        ctx.summary.push_back("  entry " + std::to_string(e) + ": max |u| = " + format_double(peak));
    }
    write_text(ctx.output("resolvent.csv"), csv.str());
    ctx.report["resolvent"] = {{"indicator", res.indicator()}, {"fields", fields}};
    ctx.summary.insert(ctx.summary.begin(), "resolvent at w = " + format_double(w.real()) + " + " +
                                                format_double(w.imag()) + "i, indicator " + format_double(res.indicator()));
}

template <class Row, class F>
bool strictly_decreasing(const std::vector<Row>& rows, F value) {
    for (size_t k = 1; k < rows.size(); ++k) {
        if (!(value(rows[k]) < value(rows[k - 1]))) return false;
    }
    return true;
}

void run_asymptotic_S(TaskContext& ctx) {
    const auto& sc = ctx.sc;
    const json& p = sc.params;
    const DiscretizedCurve curve = discretize(sc.curve, sc.n_nodes);
    std::vector<Eigen::VectorXcd> densities;
    for (double m : p["density_modes"].get<std::vector<double>>()) {
        densities.push_back(std::sqrt(curve.length) * fourier_mode_nodes(curve, static_cast<int>(m)));
    }
    const Eigen::MatrixXcd q = fourier_basis_l2(curve, p["compact_modes"].get<int>());
    const auto rows = asymptotic_study_S(curve, densities, q * q.adjoint(), p["w_list"].get<std::vector<double>>());
    std::ostringstream csv;
    csv << "w";
    for (size_t k = 0; k < densities.size(); ++k) csv << ",density_error_" << k;
    csv << ",scaled_norm,compact_error\n";
    for (const auto& r : rows) {
        csv << format_double(r.w);
        for (double e : r.density_errors) csv << ',' << format_double(e);
        csv << ',' << format_double(r.scaled_norm) << ',' << format_double(r.compact_error) << '\n';
    }
    write_text(ctx.output("asymptotic_S.csv"), csv.str());
    bool decreasing = true;
    for (size_t k = 0; k < densities.size(); ++k) {
        decreasing = decreasing && strictly_decreasing(rows, [k](const SAsymptoticRow& r) { return r.density_errors[k]; });
    }
    ctx.report["density_errors_decreasing"] = decreasing;
    ctx.summary.push_back(std::string("density errors strictly decreasing: ") + (decreasing ? "yes" : "no"));
}

void run_asymptotic_W(TaskContext& ctx) {
    const auto& sc = ctx.sc;
    const json& p = sc.params;
    const DiscretizedCurve curve = discretize(sc.curve, sc.n_nodes);
    const auto rows = asymptotic_study_W(curve, p["tau"].get<double>(), p["w_list"].get<std::vector<double>>());
    std::ostringstream csv;
    csv << "w,norm_W,scaled\n";
    for (const auto& r : rows) csv << format_double(r.w) << ',' << format_double(r.norm_W) << ',' << format_double(r.scaled) << '\n';
    write_text(ctx.output("asymptotic_W.csv"), csv.str());
    const bool decreasing = strictly_decreasing(rows, [](const WAsymptoticRow& r) { return r.scaled; });
    ctx.report["scaled_norm_decreasing"] = decreasing;
    ctx.summary.push_back(std::string("|w|^-tau ||W|| strictly decreasing: ") + (decreasing ? "yes" : "no"));
}

void run_schur(TaskContext& ctx) {
    const auto& sc = ctx.sc;
    const json& p = sc.params;
    const DiscretizedCurve curve = discretize(sc.curve, sc.n_nodes);
    const cplx w(p["w_re"].get<double>(), p["w_im"].get<double>());
    std::ostringstream csv;
    csv << "kernel,discrete_norm,analytic_bound,c_zeta,holds\n";
    for (const auto& name : p["kernels"].get<std::vector<std::string>>()) {
        const SchurKernel k = name == "k0_modulus" ? SchurKernel::K0Modulus : SchurKernel::K1RemainderModulus;
        const SchurResult r = schur_bound_check(curve, k, w);
        csv << name << ',' << format_double(r.discrete_norm) << ',' << format_double(r.analytic_bound) << ','
            << format_double(r.c_zeta) << ',' << (r.holds ? 1 : 0) << '\n';
        ctx.summary.push_back("  " + name + ": norm " + format_double(r.discrete_norm) + " <= bound " +
                              format_double(r.analytic_bound) + (r.holds ? "" : "  VIOLATED"));
    }
    write_text(ctx.output("schur.csv"), csv.str());
}

void run_dirac(TaskContext& ctx) {
    const auto& sc = ctx.sc;
    const json& p = sc.params;
    const DiscretizedCurve curve = discretize(sc.curve, sc.n_nodes);
    const auto F = at_nodes(matrices_from_json(p["F"]), curve.n);
    const auto G = at_nodes(matrices_from_json(p["G"]), curve.n);
    const cplx w(p["w_re"].get<double>(), p["w_im"].get<double>());
    const Grid2D grid = Grid2D::centered(p["half_width"].get<double>(), p["grid_n"].get<int>());
    const auto panel = gaussian_panel(grid, points_from_json(p["centres"]), p["sigma"].get<double>());
    spdlog::info("non-relativistic study over {} values of c", p["c_list"].size());
    const NRStudy s = nr_limit_study(curve, F, G, w, grid, panel, p["c_list"].get<std::vector<double>>());
    std::ostringstream csv;
    csv << "c,discrepancy,slope_so_far,leakage\n";
    for (const auto& r : s.rows) {
        csv << format_double(r.c) << ',' << format_double(r.discrepancy) << ',' << format_double(r.slope_so_far) << ','
            << format_double(r.leakage) << '\n';
    }
    write_text(ctx.output("rates.csv"), csv.str());
    ctx.report["fit"] = {{"slope", s.fit.slope}, {"intercept", s.fit.intercept}, {"r2", s.fit.r2},
                         {"constant", std::exp(s.fit.intercept)}};
    ctx.report["leakage_fit"] = {{"slope", s.leakage_fit.slope}, {"r2", s.leakage_fit.r2}};
    ctx.summary.push_back("discrepancy slope " + format_double(s.fit.slope) + " (R^2 " + format_double(s.fit.r2) + ")");
    ctx.summary.push_back("leakage slope " + format_double(s.leakage_fit.slope));
}

void run_self_tests(TaskContext& ctx) {
    const auto checks = self_tests();
    json doc = json::array();
    std::string failed;
    for (const auto& c : checks) {
        doc.push_back({{"name", c.name}, {"value", c.value}, {"tolerance", c.tolerance}, {"pass", c.pass}});
        ctx.summary.push_back(std::string(c.pass ? "PASS " : "FAIL ") + c.name + "  " + format_double(c.value) + " <= " +
                              format_double(c.tolerance));
        if (!c.pass) failed += (failed.empty() ? "" : ", ") + c.name;
    }
    write_text(ctx.output("self_tests.json"), dump_json(doc));
    if (!failed.empty()) throw Error(ErrorCode::InvalidArgument, "self-test failures: " + failed);
}

// Spectral parameter at which --dump-operators assembles the layer matrices.
cplx dump_parameter(const Scenario& sc) {
    const json& p = sc.params;
    switch (sc.task) {
        case Task::Eigenvalues: return p["w_max"].get<double>();
        case Task::Resolvent:
        case Task::SchurBounds:
        case Task::DiracNRL: return {p["w_re"].get<double>(), p["w_im"].get<double>()};
        case Task::AsymptoticS:
        case Task::AsymptoticW: return p["w_list"][0].get<double>();
        case Task::SelfTests: break;
    }
    return -1.0;
}

void dump_operators(const Scenario& sc, const fs::path& dir, json& report) {
    fs::create_directories(dir);
    const DiscretizedCurve curve = discretize(sc.curve, sc.n_nodes);
    const cplx w = dump_parameter(sc);
    const LayerMatrices l = assemble_layers(curve, w);
    write_matrix_csv((dir / "S.csv").string(), l.S);
    write_matrix_csv((dir / "W.csv").string(), l.W);
    write_matrix_csv((dir / "Wt.csv").string(), l.Wt);
    write_matrix_csv((dir / "M.csv").string(), weyl_matrix(l, w));
    for (const char* name : {"S.csv", "W.csv", "Wt.csv", "M.csv"}) report["operators"].push_back((dir / name).string());
    report["operators_w"] = {w.real(), w.imag()};
}

}  // namespace

const char* tool_version() {
#ifdef NLBEM_VERSION
    return NLBEM_VERSION;
#else
    return "0.0.0";
#endif
}

const char* task_name(Task task) {
    switch (task) {
        case Task::Eigenvalues: return "eigenvalues";
        case Task::Resolvent: return "resolvent";
        case Task::AsymptoticS: return "asymptotic_S";
        case Task::AsymptoticW: return "asymptotic_W";
        case Task::SchurBounds: return "schur_bounds";
        case Task::DiracNRL: return "dirac_nrl";
        case Task::SelfTests: return "self_tests";
    }
    return "";
}

std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string dump_json(const json& j) {
    std::ostringstream os;
    dump_value(os, j, 0);
    os << '\n';
    return os.str();
}

void write_matrix_csv(const std::string& path, const Eigen::MatrixXcd& m) {
    std::ostringstream os;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            if (c) os << ',';
            os << format_double(m(r, c).real()) << ',' << format_double(m(r, c).imag());
        }
        os << '\n';
    }
    write_text(path, os.str());
}

Scenario parse_scenario_text(const std::string& text, const std::string& base_dir) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::SchemaError, std::string("malformed scenario: ") + e.what());
    }
    if (!root.is_object()) throw Error(ErrorCode::SchemaError, "scenario must be an object");
    Scenario sc;
    Block top(root, "", &text);
    sc.task = parse_task(top);
    const std::string block = task_block(sc.task);
    for (auto it = root.begin(); it != root.end(); ++it) {
        const std::string& k = it.key();
        if (k != "task" && k != "curve" && k != "interaction" && k != "resolution_sweep" && k != "label" && k != block) {
            top.fail(k, "unknown key");
        }
    }
    if (top.has("resolution_sweep")) {
        if (sc.task != Task::Eigenvalues) top.fail("resolution_sweep", "only the eigenvalues task supports a sweep");
        for (double n : top.numbers("resolution_sweep")) {
            if (n != std::floor(n) || n < 8) top.fail("resolution_sweep", "entries must be integers >= 8");
            sc.resolution_sweep.push_back(static_cast<int>(n));
        }
    }
    Block cb = top.child("curve");
    sc.curve = parse_curve(cb, sc.n_nodes);
    cb.finish();

    const bool needs_interaction = sc.task == Task::Eigenvalues || sc.task == Task::Resolvent;
    json canonical = {{"curve", root["curve"]}};
    if (needs_interaction || top.has("interaction")) {
        Block ib = top.child("interaction");
        sc.interaction = parse_interaction(ib, sc.n_nodes, !sc.resolution_sweep.empty(), base_dir);
        ib.finish();
        canonical["interaction"] = root["interaction"];
    } else {
        sc.interaction = [](const DiscretizedCurve&) -> InteractionSpec { return Elementary{}; };
    }
    Block tb = top.child(task_block(sc.task), true);
    sc.params = parse_task_params(sc.task, tb, sc.n_nodes, base_dir);
    if (top.has("label")) top.text("label");
    top.finish();
    sc.hash = sha256_hex(text);
    sc.spec_hash = sha256_hex(canonical.dump());
    return sc;
}

Scenario parse_scenario(const std::string& path) {
    const std::string text = read_file(path);
    Scenario sc = parse_scenario_text(text, fs::path(path).parent_path().string());
    sc.path = path;
    return sc;
}

RunReport run_scenario(const std::string& path, const RunOptions& options) {
    RunReport rr;
    const auto t0 = Clock::now();
    Scenario sc;
    try {
        sc = parse_scenario(path);
    } catch (const Error& e) {
        rr.exit_code = 2;
        rr.error = e.what();
        return rr;
    }
    if (options.threads > 0) set_thread_limit(options.threads);
    const double parse_s = seconds_since(t0);

    json& report = rr.report;
    report["scenario"] = path;
    report["scenario_hash"] = sc.hash;
    report["spec_hash"] = sc.spec_hash;
    report["version"] = tool_version();
    report["task"] = task_name(sc.task);
    report["parameters"] = sc.params;
    report["outputs"] = json::array();

    const fs::path out(options.out_dir);
    TaskContext ctx{sc, out, report, {}};
    const auto t1 = Clock::now();
    try {
        fs::create_directories(out);
        if (!options.dump_dir.empty()) dump_operators(sc, options.dump_dir, report);
        switch (sc.task) {
            case Task::Eigenvalues: run_eigenvalues(ctx); break;
            case Task::Resolvent: run_resolvent(ctx); break;
            case Task::AsymptoticS: run_asymptotic_S(ctx); break;
            case Task::AsymptoticW: run_asymptotic_W(ctx); break;
            case Task::SchurBounds: run_schur(ctx); break;
            case Task::DiracNRL: run_dirac(ctx); break;
            case Task::SelfTests: run_self_tests(ctx); break;
        }
        report["status"] = "ok";
    } catch (const std::exception& e) {
        rr.exit_code = 3;
        rr.error = std::string("task ") + task_name(sc.task) + " of scenario '" + path + "' failed: " + e.what();
        report["status"] = "failed";
        report["error"] = e.what();
    }
    report["summary"] = ctx.summary;
    report["timings"] = {{"parse_s", parse_s}, {"task_s", seconds_since(t1)}, {"total_s", seconds_since(t0)}};
    report["exit_code"] = rr.exit_code;
    try {
        fs::create_directories(out);
        write_text(out / "report.json", dump_json(report));
    } catch (const std::exception& e) {
        spdlog::error("cannot write the report: {}", e.what());
        if (rr.exit_code == 0) {
            rr.exit_code = 3;
            rr.error = e.what();
        }
    }
    return rr;
}

std::vector<SelfCheck> self_tests() {
    std::vector<SelfCheck> out;
    auto add = [&](std::string name, double value, double tol) { out.push_back({std::move(name), value, tol, value <= tol}); };

    {
        // int_0^inf K0 = pi/2, split at 1 so each piece has one endpoint feature
        auto k0 = [](double s) { return std::real(bessel_k(0, cplx(s, 0.0))); };
        boost::math::quadrature::tanh_sinh<double> ts;
        boost::math::quadrature::exp_sinh<double> es;
        const double v = ts.integrate(k0, 0.0, 1.0) + es.integrate(k0, 1.0, std::numeric_limits<double>::infinity());
        add("integral_K0", std::abs(v - kPi / 2.0), 1e-8);
    }
    {
        double err = 0.0;
        const double h = 1e-4;
        for (cplx t : {cplx(0.5, 0.0), cplx(1.0, 0.5), cplx(3.0, -2.0), cplx(10.0, 4.0)}) {
            const cplx d = (bessel_k(0, t + h) - bessel_k(0, t - h)) / (2.0 * h);
            err = std::max(err, std::abs(d + bessel_k(1, t)) / std::abs(bessel_k(1, t)));
        }
        add("derivative_K0_is_minus_K1", err, 1e-6);
    }
    {
        double err = 0.0;
        for (cplx t : {cplx(0.3, 0.0), cplx(2.0, 1.0), cplx(7.0, -3.0)}) {
            err = std::max(err, std::abs(t * (bessel_i(0, t) * bessel_k(1, t) + bessel_i(1, t) * bessel_k(0, t)) - 1.0));
        }
        add("wronskian_I_K", err, 1e-12);
    }
    const DiscretizedCurve ellipse = discretize(CurveDescriptor::ellipse(1.5, 1.0), 64);
    {
        const Eigen::MatrixXcd m = assemble_M(ellipse, -1.0);
        add("weyl_symmetry_M(-1)", (m - m.adjoint()).norm(), 1e-8);
        const cplx w(1.0, 1.0);
        const Eigen::MatrixXcd d = assemble_W_tilde(ellipse, w) + assemble_W(ellipse, std::conj(w)).adjoint();
        add("W_tilde_adjoint_identity", d.norm(), 1e-8);
    }
    {
        const DiscretizedCurve c = discretize(CurveDescriptor::circle(1.0), 128);
        const cplx w(-1.0, 0.0);
        Eigen::VectorXcd phi(c.n);
        const Eigen::VectorXcd zero = Eigen::VectorXcd::Zero(c.n);
        for (int j = 0; j < c.n; ++j) phi(j) = std::exp(std::sin(c.params(j))) * cplx(1.0, 0.3);
        const auto in2 = one_sided_traces(c, w, zero, phi, Side::Interior);
        const auto out2 = one_sided_traces(c, w, zero, phi, Side::Exterior);
        const Eigen::VectorXcd jump = 2.0 * c.normals.cwiseProduct(in2.f - out2.f);
        double err = ((jump - phi).cwiseAbs().array() / phi.cwiseAbs().array()).maxCoeff();
        const auto in1 = one_sided_traces(c, w, phi, zero, Side::Interior);
        const auto out1 = one_sided_traces(c, w, phi, zero, Side::Exterior);
        err = std::max(err, ((in1.f - out1.f).cwiseAbs().array() / in1.f.cwiseAbs().array()).maxCoeff());
        add("jump_relations", err, 1e-4);
    }
    {
        const DiscretizedCurve star = discretize(CurveDescriptor::star(1.0, 0.2, 3), 64);
        const Grid2D g = Grid2D::centered(3.0, 64);
        const cplx w(-1.0, 1.0);
        const double sigma = 0.3;
        const std::vector<cplx> centres = {cplx(0.2, 0.1), cplx(-0.9, 0.4)};
        const auto panel = gaussian_panel(g, centres, sigma);
        const KreinResolvent res(star, Elementary{}, w, g);
        double err = 0.0;
        for (size_t e = 0; e < panel.size(); ++e) {
            const KreinResult r = res.apply(panel[e]);
            double diff = 0.0, peak = 0.0;
            for (int a = 0; a < g.n; a += 3) {
                for (int b = 0; b < g.n; b += 3) {
                    if (!r.valid(a, b)) continue;
                    const cplx ref = gaussian_resolvent_reference(w, sigma, std::abs(g.point(a, b) - centres[e])).u;
                    diff = std::max(diff, std::abs(r.u(a, b) - ref));
                    peak = std::max(peak, std::abs(ref));
                }
            }
            err = std::max(err, diff / peak);
        }
        add("free_resolvent_B0", err, 1e-4);
    }
    return out;
}

}  // namespace nlbem
