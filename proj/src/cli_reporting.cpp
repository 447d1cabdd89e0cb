#include "qlb/cli_reporting.hpp"

#include "qlb/ball_sandwich_solver.hpp"
#include "qlb/condition_checker.hpp"
#include "qlb/dual_transform.hpp"
#include "qlb/problem_model.hpp"
#include "qlb/radial_solver.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <future>
#include <iomanip>
#include <memory>
#include <set>
#include <sstream>

namespace qlb {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr std::array<std::pair<Task, const char*>, 7> kTaskNames{{
    {Task::verify_transform, "verify_transform"},
    {Task::check_hypotheses, "check_hypotheses"},
    {Task::solve_radial, "solve_radial"},
    {Task::sweep_family, "sweep_family"},
    {Task::sandwich, "sandwich"},
    {Task::ball_solve, "ball_solve"},
    {Task::full_pipeline, "full_pipeline"},
}};

std::string join_issues(const std::vector<ConfigIssue>& issues) {
    std::string s = "invalid config";
    for (const auto& i : issues) s += "\n  " + (i.path.empty() ? "/" : i.path) + ": " + i.message;
    return s;
}

std::string child(const std::string& path, const std::string& key) { return path + "/" + key; }

// Field readers that record problems instead of stopping at the first one.
class Reader {
public:
    std::vector<ConfigIssue> issues;

    void add(std::string path, std::string message) {
        issues.push_back({std::move(path), std::move(message)});
    }

    bool require_object(const json& j, const std::string& path) {
        if (j.is_object()) return true;
        add(path, "must be an object");
        return false;
    }

    void allow_keys(const json& obj, const std::string& path,
                    std::initializer_list<const char*> keys) {
        for (auto it = obj.begin(); it != obj.end(); ++it) {
            const bool known = std::any_of(keys.begin(), keys.end(),
                                           [&](const char* k) { return it.key() == k; });
            if (!known) add(child(path, it.key()), "unknown key");
        }
    }

    const json* field(const json& obj, const char* key, const std::string& path, bool required) {
        const auto it = obj.find(key);
        if (it == obj.end()) {
            if (required) add(child(path, key), "missing required field");
            return nullptr;
        }
        return &*it;
    }

    std::optional<double> number(const json& obj, const char* key, const std::string& path,
                                 bool required) {
        const json* v = field(obj, key, path, required);
        if (!v) return std::nullopt;
        if (!v->is_number()) {
            add(child(path, key), "must be a number");
            return std::nullopt;
        }
        const double x = v->get<double>();
        if (!std::isfinite(x)) {
            add(child(path, key), "must be finite");
            return std::nullopt;
        }
        return x;
    }

    std::optional<long long> integer(const json& obj, const char* key, const std::string& path,
                                     bool required) {
        const json* v = field(obj, key, path, required);
        if (!v) return std::nullopt;
        if (!v->is_number_integer()) {
            add(child(path, key), "must be an integer");
            return std::nullopt;
        }
        return v->get<long long>();
    }

    std::optional<std::string> string(const json& obj, const char* key, const std::string& path,
                                      bool required) {
        const json* v = field(obj, key, path, required);
        if (!v) return std::nullopt;
        if (!v->is_string()) {
            add(child(path, key), "must be a string");
            return std::nullopt;
        }
        return v->get<std::string>();
    }

    std::optional<std::vector<double>> numbers(const json& obj, const char* key,
                                               const std::string& path, bool required) {
        const json* v = field(obj, key, path, required);
        if (!v) return std::nullopt;
        if (!v->is_array() || v->empty()) {
            add(child(path, key), "must be a nonempty array of numbers");
            return std::nullopt;
        }
        std::vector<double> out;
        for (std::size_t i = 0; i < v->size(); ++i) {
            const json& e = (*v)[i];
            if (!e.is_number()) {
                add(child(path, key) + "/" + std::to_string(i), "must be a number");
                return std::nullopt;
            }
            out.push_back(e.get<double>());
        }
        return out;
    }

    std::optional<std::vector<std::pair<double, double>>> pairs(const json& obj, const char* key,
                                                                const std::string& path,
                                                                bool required) {
        const json* v = field(obj, key, path, required);
        if (!v) return std::nullopt;
        if (!v->is_array() || v->empty()) {
            add(child(path, key), "must be a nonempty array of [x, y] pairs");
            return std::nullopt;
        }
        std::vector<std::pair<double, double>> out;
        for (std::size_t i = 0; i < v->size(); ++i) {
            const json& e = (*v)[i];
            if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number()) {
                add(child(path, key) + "/" + std::to_string(i), "must be a [x, y] pair of numbers");
                return std::nullopt;
            }
            out.emplace_back(e[0].get<double>(), e[1].get<double>());
        }
        return out;
    }

    void positive(const std::optional<double>& v, const std::string& path) {
        if (v && !(*v > 0)) add(path, "must be > 0");
    }
};

DecaySpec read_decay(Reader& rd, const json& obj, const char* key, const std::string& path,
                     bool required) {
    DecaySpec d;
    const json* v = rd.field(obj, key, path, required);
    if (!v) return d;
    const std::string here = child(path, key);
    if (!rd.require_object(*v, here)) return d;
    rd.allow_keys(*v, here, {"c0", "c1", "decay"});
    if (auto x = rd.number(*v, "c0", here, false)) d.c0 = *x;
    if (auto x = rd.number(*v, "c1", here, false)) d.c1 = *x;
    if (auto x = rd.number(*v, "decay", here, false)) {
        if (*x < 0) rd.add(child(here, "decay"), "must be >= 0");
        d.decay = *x;
    }
    return d;
}

DecayProfile to_profile(const DecaySpec& d) { return DecayProfile{d.c0, d.c1, d.decay}; }

Nonlinearity make_nonlinearity(const NonlinearitySpec& s) {
    Nonlinearity g = s.kind == "power"       ? Nonlinearity::power(s.lambda, s.q)
                     : s.kind == "power_log" ? Nonlinearity::power_log(s.lambda, s.q)
                                             : Nonlinearity::tabulated(s.xs, s.ys);
    if (s.delta) g.set_delta(*s.delta);
    return g;
}

Potential make_potential(const PotentialSpec& s, int dim) {
    if (s.kind == "radial_profile") return Potential::radial(to_profile(s.base), dim);
    if (s.kind == "radial_times_angular") {
        return Potential::separable(to_profile(s.base), to_profile(s.terms.front().amplitude),
                                    s.terms.front().frequency, dim, s.angular_samples);
    }
    const DecayProfile base = to_profile(s.base);
    std::vector<std::pair<DecayProfile, int>> terms;
    for (const auto& t : s.terms) terms.emplace_back(to_profile(t.amplitude), t.frequency);
    return Potential::sampled(
        [base, terms](double r, double theta) {
            double v = base(r);
            if (r == 0) return v;
            for (const auto& [m, k] : terms) v += m(r) * std::cos(k * theta);
            return v;
        },
        dim, s.angular_samples);
}

std::optional<NonlinearitySpec> read_nonlinearity(Reader& rd, const json& root,
                                                  const fs::path& base_dir,
                                                  std::optional<double> gamma) {
    const json* v = rd.field(root, "nonlinearity", "", false);
    if (!v) return std::nullopt;
    const std::string here = "/nonlinearity";
    if (!rd.require_object(*v, here)) return std::nullopt;
    rd.allow_keys(*v, here, {"kind", "lambda", "q", "delta", "samples", "csv"});
    NonlinearitySpec s;
    const auto kind = rd.string(*v, "kind", here, true);
    if (!kind) return std::nullopt;
    s.kind = *kind;
    const std::size_t before = rd.issues.size();
    if (s.kind == "power" || s.kind == "power_log") {
        if (auto x = rd.number(*v, "lambda", here, false)) s.lambda = *x;
        rd.positive(s.lambda, here + "/lambda");
        if (auto x = rd.number(*v, "q", here, true)) {
            if (*x < 0) rd.add(here + "/q", "must be >= 0");
            s.q = *x;
        }
        if (v->contains("samples")) rd.add(here + "/samples", "only allowed for tabulated kind");
        if (v->contains("csv")) rd.add(here + "/csv", "only allowed for tabulated kind");
    } else if (s.kind == "tabulated") {
        if (v->contains("lambda")) rd.add(here + "/lambda", "not allowed for tabulated kind");
        if (v->contains("q")) rd.add(here + "/q", "not allowed for tabulated kind");
        const bool has_samples = v->contains("samples");
        const bool has_csv = v->contains("csv");
        if (has_samples == has_csv) {
            rd.add(here, "tabulated kind needs exactly one of samples or csv");
        } else if (has_samples) {
            if (auto pts = rd.pairs(*v, "samples", here, true)) {
                for (const auto& [x, y] : *pts) {
                    s.xs.push_back(x);
                    s.ys.push_back(y);
                }
            }
        } else if (auto path = rd.string(*v, "csv", here, true)) {
            fs::path p(*path);
            if (p.is_relative()) p = base_dir / p;
            s.csv_path = p.string();
            try {
                std::tie(s.xs, s.ys) = read_samples_csv(s.csv_path);
            } catch (const std::exception& e) {
                rd.add(here + "/csv", e.what());
            }
        }
    } else {
        rd.add(here + "/kind", "must be one of power, power_log, tabulated");
        return std::nullopt;
    }
    if (auto d = rd.number(*v, "delta", here, false)) {
        if (gamma && *d < 2 * *gamma - 1) rd.add(here + "/delta", "δ >= 2γ-1 required");
        s.delta = *d;
    }
    if (rd.issues.size() != before) return std::nullopt;
    try {
        make_nonlinearity(s);
    } catch (const std::exception& e) {
        const std::string where = s.kind != "tabulated" ? here
                                  : s.csv_path.empty()  ? here + "/samples"
                                                        : here + "/csv";
        rd.add(where, std::string("g must be nondecreasing with g(0) = 0: ") + e.what());
        return std::nullopt;
    }
    return s;
}

std::optional<PotentialSpec> read_potential(Reader& rd, const json& root,
                                            std::optional<int> dim) {
    const json* v = rd.field(root, "potential", "", false);
    if (!v) return std::nullopt;
    const std::string here = "/potential";
    if (!rd.require_object(*v, here)) return std::nullopt;
    rd.allow_keys(*v, here,
                  {"kind", "base", "amplitude", "frequency", "terms", "angular_samples"});
    PotentialSpec s;
    const auto kind = rd.string(*v, "kind", here, true);
    if (!kind) return std::nullopt;
    s.kind = *kind;
    const std::size_t before = rd.issues.size();
    s.base = read_decay(rd, *v, "base", here, false);
    if (auto n = rd.integer(*v, "angular_samples", here, false)) {
        if (*n < 8) rd.add(here + "/angular_samples", "must be >= 8");
        s.angular_samples = static_cast<int>(*n);
    }
    auto frequency = [&](const json& obj, const std::string& path) {
        int k = 1;
        if (auto f = rd.integer(obj, "frequency", path, false)) {
            if (*f < 0) rd.add(path + "/frequency", "must be >= 0");
            k = static_cast<int>(*f);
        }
        return k;
    };
    if (s.kind == "radial_profile") {
        for (const char* k : {"amplitude", "frequency", "terms"}) {
            if (v->contains(k)) rd.add(child(here, k), "not allowed for radial_profile kind");
        }
    } else if (s.kind == "radial_times_angular") {
        if (v->contains("terms")) rd.add(here + "/terms", "not allowed for radial_times_angular");
        AngularTerm t;
        t.amplitude = read_decay(rd, *v, "amplitude", here, true);
        t.frequency = frequency(*v, here);
        s.terms.push_back(t);
    } else if (s.kind == "general_sampled") {
        for (const char* k : {"amplitude", "frequency"}) {
            if (v->contains(k)) rd.add(child(here, k), "use terms for general_sampled");
        }
        const json* terms = rd.field(*v, "terms", here, true);
        if (terms && (!terms->is_array() || terms->empty())) {
            rd.add(here + "/terms", "must be a nonempty array");
        } else if (terms) {
            for (std::size_t i = 0; i < terms->size(); ++i) {
                const std::string path = here + "/terms/" + std::to_string(i);
                if (!rd.require_object((*terms)[i], path)) continue;
                rd.allow_keys((*terms)[i], path, {"amplitude", "frequency"});
                AngularTerm t;
                t.amplitude = read_decay(rd, (*terms)[i], "amplitude", path, true);
                t.frequency = frequency((*terms)[i], path);
                s.terms.push_back(t);
            }
        }
    } else {
        rd.add(here + "/kind", "must be one of radial_profile, radial_times_angular, general_sampled");
        return std::nullopt;
    }
    if (rd.issues.size() != before || !dim) return std::nullopt;
    try {
        make_potential(s, *dim).validate(log_grid(1e-3, 1e6, 91));
    } catch (const std::exception& e) {
        rd.add(here, std::string("a must be finite and nonnegative: ") + e.what());
        return std::nullopt;
    }
    return s;
}

json parse_strict(const std::string& raw) {
    std::vector<std::set<std::string>> keys;
    std::string duplicate;
    json::parser_callback_t cb = [&](int, json::parse_event_t ev, json& parsed) {
        if (ev == json::parse_event_t::object_start) {
            keys.emplace_back();
        } else if (ev == json::parse_event_t::object_end) {
            if (!keys.empty()) keys.pop_back();
        } else if (ev == json::parse_event_t::key && !keys.empty()) {
            const auto k = parsed.get<std::string>();
            if (!keys.back().insert(k).second && duplicate.empty()) duplicate = k;
        }
        return true;
    };
    json j;
    try {
        j = json::parse(raw, cb);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::vector<ConfigIssue>{{"", std::string("malformed JSON: ") + e.what()}});
    }
    if (!duplicate.empty()) throw ConfigError(std::vector<ConfigIssue>{{"", "duplicate key \"" + duplicate + "\""}});
    return j;
}

bool needs_problem_data(Task t) { return t != Task::verify_transform; }

}  // namespace

const char* to_string(Task t) {
    for (const auto& [task, name] : kTaskNames) {
        if (task == t) return name;
    }
    return "unknown";
}

ConfigError::ConfigError(std::vector<ConfigIssue> issues)
    : Error(join_issues(issues)), issues_(std::move(issues)) {}

RunConfig validate_config(const std::string& raw, const fs::path& base_dir) {
    const json root = parse_strict(raw);
    Reader rd;
    if (!root.is_object()) throw ConfigError(std::vector<ConfigIssue>{{"", "config must be a JSON object"}});
    rd.allow_keys(root, "",
                  {"schema_version", "task", "params", "nonlinearity", "potential", "numerics",
                   "output"});

    RunConfig cfg;
    cfg.raw = root;
    if (auto v = rd.integer(root, "schema_version", "", true)) {
        if (*v != kSchemaVersion) {
            rd.add("/schema_version", "unsupported version (expected " +
                                          std::to_string(kSchemaVersion) + ")");
        }
    }
    std::optional<Task> task;
    if (auto name = rd.string(root, "task", "", true)) {
        for (const auto& [t, n] : kTaskNames) {
            if (*name == n) task = t;
        }
        if (!task) rd.add("/task", "unknown task \"" + *name + "\"");
    }
    if (task) cfg.task = *task;

    std::optional<double> gamma;
    std::optional<int> dim;
    if (const json* params = rd.field(root, "params", "", true)) {
        if (rd.require_object(*params, "/params")) {
            rd.allow_keys(*params, "/params", {"p", "gamma", "dim"});
            if (auto p = rd.number(*params, "p", "/params", true)) {
                if (*p > 1) cfg.p = *p;
                else rd.add("/params/p", "p > 1 required");
            }
            if (auto g = rd.number(*params, "gamma", "/params", true)) {
                if (*g > 0.5) gamma = cfg.gamma = *g;
                else rd.add("/params/gamma", "γ > 1/2 required");
            }
            if (auto n = rd.integer(*params, "dim", "/params", true)) {
                if (*n >= 1 && *n <= 64) dim = cfg.dim = static_cast<int>(*n);
                else rd.add("/params/dim", "N >= 1 required");
            }
        }
    }

    const bool data = task && needs_problem_data(*task);
    cfg.nonlinearity = read_nonlinearity(rd, root, base_dir, gamma);
    cfg.potential = read_potential(rd, root, dim);
    if (data && !root.contains("nonlinearity")) rd.add("/nonlinearity", "missing required field");
    if (data && !root.contains("potential")) rd.add("/potential", "missing required field");

    const bool radial_task = task && (*task == Task::solve_radial || *task == Task::sweep_family);
    const bool needs_alpha = task && (*task == Task::solve_radial || *task == Task::sandwich ||
                                      *task == Task::ball_solve || *task == Task::full_pipeline);
    json numerics = json::object();
    if (const json* n = rd.field(root, "numerics", "", false)) {
        if (rd.require_object(*n, "/numerics")) numerics = *n;
    }
    const std::string np = "/numerics";
    rd.allow_keys(numerics, np,
                  {"tol", "r_max", "nodes", "grading", "alpha", "alphas", "epsilon", "beta",
                   "hbar_radius", "mesh_h", "ball_radii", "probes", "limit_tol",
                   "transform_accuracy", "grid", "residual_lo", "threshold_r_max"});
    auto positive = [&](const char* key, double& slot, bool required = false) {
        if (auto x = rd.number(numerics, key, np, required)) {
            if (*x > 0) slot = *x;
            else rd.add(child(np, key), "must be > 0");
        }
    };
    positive("tol", cfg.tol);
    positive("r_max", cfg.r_max);
    positive("epsilon", cfg.epsilon);
    positive("mesh_h", cfg.mesh_h);
    positive("limit_tol", cfg.limit_tol);
    positive("transform_accuracy", cfg.transform_accuracy);
    if (auto n = rd.integer(numerics, "nodes", np, false)) {
        if (*n >= 17) cfg.nodes = static_cast<std::size_t>(*n);
        else rd.add(np + "/nodes", "must be >= 17");
    }
    if (auto x = rd.number(numerics, "grading", np, false)) {
        if (*x >= 0) cfg.grading = *x;
        else rd.add(np + "/grading", "must be >= 0");
    }
    if (auto x = rd.number(numerics, "residual_lo", np, false)) {
        if (*x >= 0) cfg.residual_lo = *x;
        else rd.add(np + "/residual_lo", "must be >= 0");
    }
    if (auto x = rd.number(numerics, "threshold_r_max", np, false)) {
        if (*x >= 0) cfg.threshold_r_max = *x;
        else rd.add(np + "/threshold_r_max", "must be >= 0");
    }
    if (auto x = rd.number(numerics, "alpha", np, needs_alpha)) {
        if (*x > 0) cfg.alpha = *x;
        else rd.add(np + "/alpha", "must be > 0");
    }
    for (const char* key : {"beta", "hbar_radius"}) {
        if (auto x = rd.number(numerics, key, np, false)) {
            if (!(*x > 0)) rd.add(child(np, key), "must be > 0");
            else if (std::string(key) == "beta") cfg.beta = *x;
            else cfg.hbar_radius = *x;
        }
    }
    if (auto xs = rd.numbers(numerics, "alphas", np, task && *task == Task::sweep_family)) {
        for (std::size_t i = 0; i < xs->size(); ++i) {
            if (!((*xs)[i] > 0)) rd.add(np + "/alphas/" + std::to_string(i), "must be > 0");
        }
        cfg.alphas = *xs;
    }
    if (const json* radii = rd.field(numerics, "ball_radii", np, task && *task == Task::ball_solve)) {
        if (!radii->is_array() || radii->empty()) {
            rd.add(np + "/ball_radii", "must be a nonempty array of integers");
        } else {
            for (std::size_t i = 0; i < radii->size(); ++i) {
                const json& e = (*radii)[i];
                if (!e.is_number_integer() || e.get<long long>() < 1) {
                    rd.add(np + "/ball_radii/" + std::to_string(i), "must be an integer >= 1");
                } else {
                    cfg.ball_radii.push_back(static_cast<int>(e.get<long long>()));
                }
            }
            std::sort(cfg.ball_radii.begin(), cfg.ball_radii.end());
            if (std::adjacent_find(cfg.ball_radii.begin(), cfg.ball_radii.end()) !=
                cfg.ball_radii.end()) {
                rd.add(np + "/ball_radii", "radii must be distinct");
            }
        }
    }
    if (auto pr = rd.pairs(numerics, "probes", np, false)) cfg.probes = *pr;
    if (const json* grid = rd.field(numerics, "grid", np, false)) {
        const std::string gp = np + "/grid";
        if (rd.require_object(*grid, gp)) {
            rd.allow_keys(*grid, gp, {"lo", "hi", "points"});
            if (auto x = rd.number(*grid, "lo", gp, false)) cfg.grid_lo = *x;
            if (auto x = rd.number(*grid, "hi", gp, false)) cfg.grid_hi = *x;
            if (auto n = rd.integer(*grid, "points", gp, false)) {
                if (*n >= 2) cfg.grid_points = static_cast<std::size_t>(*n);
                else rd.add(gp + "/points", "must be >= 2");
            }
            if (!(cfg.grid_lo > 0) || !(cfg.grid_hi > cfg.grid_lo)) {
                rd.add(gp, "0 < lo < hi required");
            }
        }
    }

    if (radial_task && cfg.potential && cfg.potential->kind != "radial_profile") {
        rd.add("/potential/kind", std::string(to_string(*task)) + " needs a radial_profile potential");
    }
    if (task && *task == Task::ball_solve && dim && *dim != 2) {
        rd.add("/params/dim", "ball_solve needs N = 2");
    }
    if (!cfg.ball_radii.empty()) {
        const double r_min = cfg.ball_radii.front();
        if (cfg.mesh_h > r_min / 4) rd.add(np + "/mesh_h", "must be <= smallest ball radius / 4");
        for (std::size_t i = 0; i < cfg.probes.size(); ++i) {
            if (std::hypot(cfg.probes[i].first, cfg.probes[i].second) >= r_min) {
                rd.add(np + "/probes/" + std::to_string(i), "must lie inside the smallest ball");
            }
        }
    }

    if (const json* out = rd.field(root, "output", "", false)) {
        if (rd.require_object(*out, "/output")) {
            rd.allow_keys(*out, "/output", {"dir"});
            if (auto d = rd.string(*out, "dir", "/output", false)) {
                fs::path p(*d);
                cfg.out_dir = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
            }
        }
    }

    if (!rd.issues.empty()) throw ConfigError(std::move(rd.issues));
    return cfg;
}

RunConfig load_config(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(std::vector<ConfigIssue>{{"", "cannot read config file " + path.string()}});
    std::ostringstream ss;
    ss << in.rdbuf();
    return validate_config(ss.str(), path.parent_path());
}

std::string format_number(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

std::string sha256_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IntegrityError("cannot hash " + path.string());
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
        throw IntegrityError("SHA-256 unavailable");
    }
    std::array<char, 1 << 16> buf;
    while (in) {
        in.read(buf.data(), buf.size());
        if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), md, &len);
    std::ostringstream hex;
    for (unsigned i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
    return hex.str();
}

int RunReport::exit_code() const noexcept {
    switch (status) {
        case RunStatus::ok: return 0;
        case RunStatus::hypothesis_blocked: return 2;
        case RunStatus::compute_error: return 1;
    }
    return 1;
}

namespace {

const char* error_type(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e)) return "ConfigError";
    if (dynamic_cast<const DomainError*>(&e)) return "DomainError";
    if (dynamic_cast<const PreconditionError*>(&e)) return "PreconditionError";
    if (dynamic_cast<const SingularValueError*>(&e)) return "SingularValueError";
    if (dynamic_cast<const InvertibilityError*>(&e)) return "InvertibilityError";
    if (dynamic_cast<const DataError*>(&e)) return "DataError";
    if (dynamic_cast<const IntegrityError*>(&e)) return "IntegrityError";
    if (dynamic_cast<const HypothesisError*>(&e)) return "HypothesisError";
    if (dynamic_cast<const NonConvergenceError*>(&e)) return "NonConvergenceError";
    if (dynamic_cast<const Error*>(&e)) return "Error";
    return "std::exception";
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json to_json(const ConditionVerdict& v) {
    json probes = json::array();
    for (const auto& pt : v.probe_values) probes.push_back({pt.R, number_or_null(pt.value)});
    json j = {{"condition_id", to_string(v.condition_id)},
              {"verdict", to_string(v.verdict)},
              {"fitted_tail_exponent", number_or_null(v.fitted_tail_exponent)},
              {"score", number_or_null(v.score)},
              {"note", v.note},
              {"probes", probes}};
    if (v.hbar_value) {
        j["hbar_value"] = number_or_null(*v.hbar_value);
        j["hbar_finite"] = std::isfinite(*v.hbar_value);
    }
    if (v.hbar_truncated) j["hbar_truncated"] = number_or_null(*v.hbar_truncated);
    if (v.hbar_tail) j["hbar_tail"] = number_or_null(*v.hbar_tail);
    if (v.hbar_cutoff > 0) j["hbar_cutoff"] = v.hbar_cutoff;
    return j;
}

class Runner {
public:
    Runner(const RunConfig& cfg, const RunOptions& opt) : cfg_(cfg), opt_(opt) {}

    RunReport execute();

private:
    template <class F>
    bool stage(const std::string& name, const char* module, F&& fn);
    void record(const std::string& stage, const char* module, const std::exception& e);
    void emit_table(const std::string& stem, const std::vector<std::string>& header,
                    const std::vector<const std::vector<double>*>& columns);
    void emit_ball(const BallSolution& s);
    void register_file(const std::string& name);

    bool gate(bool hypothesis_holds, const std::string& what);
    json summarize(const RadialSolution& s, const ResidualProfile* res,
                   const LowerBoundReport* bound) const;
    std::vector<double> residual_column(const RadialSolution& s, ResidualProfile& res) const;
    RadialFunction radial_potential() const;
    RadialOptions radial_options() const;
    std::optional<double> budget_for(double radius);

    void do_transform();
    void do_hypotheses();
    void do_radial();
    void do_family();
    void do_sandwich();
    void do_ball();

    const RunConfig& cfg_;
    RunOptions opt_;
    RunReport rep_;
    json& body_ = rep_.body;
    std::optional<ProblemParams> params_;
    std::optional<Nonlinearity> g_;
    std::optional<Potential> a_;
    std::unique_ptr<DualTransform> dual_;
    std::optional<CompatibilityReport> hyp_;
    bool blocked_{false};
    std::vector<std::string> emitted_;
};

template <class F>
bool Runner::stage(const std::string& name, const char* module, F&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = true;
    try {
        fn();
    } catch (const std::exception& e) {
        record(name, module, e);
        ok = false;
    }
    json s = {{"name", name}, {"module", module}, {"ok", ok}};
    if (opt_.record_timing) {
        s["seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    body_["stages"].push_back(s);
    return ok;
}

void Runner::record(const std::string& stage, const char* module, const std::exception& e) {
    rep_.errors.push_back({stage, module, error_type(e), std::string(module) + ": " + e.what()});
}

void Runner::register_file(const std::string& name) { emitted_.push_back(name); }

void Runner::emit_table(const std::string& stem, const std::vector<std::string>& header,
                        const std::vector<const std::vector<double>*>& columns) {
    const std::size_t rows = columns.front()->size();
    for (const auto* c : columns) {
        if (c->size() != rows) throw IntegrityError("column length mismatch in " + stem);
    }
    std::ofstream csv(cfg_.out_dir / (stem + ".csv"), std::ios::binary);
    std::ofstream dat(cfg_.out_dir / (stem + ".dat"), std::ios::binary);
    if (!csv || !dat) throw IntegrityError("cannot write " + stem + " into " + cfg_.out_dir.string());
    dat << '#';
    for (std::size_t k = 0; k < header.size(); ++k) {
        csv << (k ? "," : "") << header[k];
        dat << ' ' << header[k];
    }
    csv << '\n';
    dat << '\n';
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t k = 0; k < columns.size(); ++k) {
            const std::string v = format_number((*columns[k])[i]);
            csv << (k ? "," : "") << v;
            dat << (k ? " " : "") << v;
        }
        csv << '\n';
        dat << '\n';
    }
    register_file(stem + ".csv");
    register_file(stem + ".dat");
}

// Node values as CSV plus the full square lattice (NaN outside the ball) for
// gnuplot's grid format, one blank line between x rows.
void Runner::emit_ball(const BallSolution& s) {
    const std::string stem = "ball_n" + std::to_string(s.n);
    emit_table(stem, {"x", "y", "w", "w_sub", "w_super"},
               {&s.x, &s.y, &s.w_n, &s.sub_values, &s.super_values});
    std::ofstream grid(cfg_.out_dir / (stem + "_grid.dat"), std::ios::binary);
    if (!grid) throw IntegrityError("cannot write " + stem + "_grid.dat");
    const int m = s.half_width;
    const auto side = static_cast<std::size_t>(2 * m + 1);
    grid << "# x y w\n";
    for (int i = -m; i <= m; ++i) {
        for (int j = -m; j <= m; ++j) {
            const long k = s.grid_index[static_cast<std::size_t>(i + m) * side +
                                        static_cast<std::size_t>(j + m)];
            const double w = k >= 0 ? s.w_n[static_cast<std::size_t>(k)]
                                    : std::numeric_limits<double>::quiet_NaN();
            grid << format_number(i * s.mesh_h) << ' ' << format_number(j * s.mesh_h) << ' '
                 << format_number(w) << '\n';
        }
        grid << '\n';
    }
    register_file(stem + "_grid.dat");
}

RadialFunction Runner::radial_potential() const {
    const Potential* a = &*a_;
    return [a](double r) { return (*a)(r, 0.0); };
}

RadialOptions Runner::radial_options() const {
    RadialOptions o;
    o.nodes = cfg_.nodes;
    o.grading = cfg_.grading;
    return o;
}

bool Runner::gate(bool hypothesis_holds, const std::string& what) {
    json& g = body_["hypothesis_gate"];
    g["checks"].push_back({{"hypothesis", what}, {"holds", hypothesis_holds}});
    if (hypothesis_holds) return true;
    if (opt_.override_hypotheses) {
        rep_.override_used = true;
        rep_.theorem_covered = false;
        return true;
    }
    blocked_ = true;
    return false;
}

std::vector<double> Runner::residual_column(const RadialSolution& s, ResidualProfile& res) const {
    std::vector<double> col(s.radii.size(), std::numeric_limits<double>::quiet_NaN());
    if (s.u.size() != s.w.size()) return col;
    res = residual_original(s, radial_potential(), *g_, *params_, cfg_.residual_lo);
    std::size_t j = 0;
    for (std::size_t i = 0; i < s.radii.size() && j < res.radii.size(); ++i) {
        if (s.radii[i] == res.radii[j]) col[i] = res.residual[j++];
    }
    return col;
}

json Runner::summarize(const RadialSolution& s, const ResidualProfile* res,
                       const LowerBoundReport* bound) const {
    json j = {{"alpha", s.alpha},
              {"status", to_string(s.status)},
              {"method", s.method},
              {"iterations", s.iterations},
              {"picard_residual", number_or_null(s.picard_residual)},
              {"monotone_iterates", s.monotone_iterates},
              {"r_end", s.radii.empty() ? 0.0 : s.radii.back()},
              {"w_end", s.w.empty() ? 0.0 : s.w.back()},
              {"u_centre", s.u.empty() ? json(nullptr) : json(s.u.front())},
              {"ode_crosscheck_deviation", number_or_null(s.ode_crosscheck_deviation)}};
    if (s.gamma_alpha_estimate) j["gamma_alpha_estimate"] = *s.gamma_alpha_estimate;
    if (res) j["residual_max"] = number_or_null(res->max_abs);
    if (bound) {
        j["M"] = bound->M;
        j["M_displayed"] = bound->M_displayed;
        j["A1"] = bound->A1;
        j["A2"] = bound->A2;
        j["inf_ratio"] = bound->inf_ratio;
        j["envelope_min_margin"] = bound->min_margin;
        j["envelope_holds"] = bound->holds;
    }
    return j;
}

void Runner::do_transform() {
    stage("verify_transform", "dual_transform", [&] {
        const auto grid = log_grid(cfg_.grid_lo, cfg_.grid_hi, cfg_.grid_points, true);
        const double delta = g_ && g_->delta() ? *g_->delta() : 2 * params_->gamma() - 1;
        const auto report = verify_properties(*dual_, grid, delta);
        json props = json::array();
        for (const auto& c : report.checks) {
            props.push_back({{"name", c.name},
                             {"passed", c.passed},
                             {"worst_margin", number_or_null(c.worst_margin)},
                             {"evaluated", c.evaluated},
                             {"violations", c.violations},
                             {"note", c.note}});
        }
        double roundtrip = 0;
        for (double t : log_grid(cfg_.grid_lo, cfg_.grid_hi, cfg_.grid_points)) {
            roundtrip = std::max(roundtrip, std::abs(dual_->f_inverse(dual_->f(t)) - t));
        }
        body_["transform"] = {{"pass_count", report.pass_count()},
                              {"property_count", kPropertyCount},
                              {"all_passed", report.all_passed()},
                              {"delta", delta},
                              {"asymptotic_A", report.asymptotic_A},
                              {"f8_constant", report.f8_constant},
                              {"f_inverse_at_1", dual_->f_inverse(1.0)},
                              {"roundtrip_max_abs", roundtrip},
                              {"properties", props}};
        std::vector<double> t, f, fp;
        std::vector<std::vector<double>> margins(kPropertyCount);
        for (const auto& row : report.rows) {
            t.push_back(row.t);
            f.push_back(row.f);
            fp.push_back(row.f_prime);
            for (std::size_t k = 0; k < kPropertyCount; ++k) margins[k].push_back(row.margin[k]);
        }
        std::vector<std::string> header{"t", "f", "f_prime"};
        std::vector<const std::vector<double>*> cols{&t, &f, &fp};
        for (std::size_t k = 0; k < kPropertyCount; ++k) {
            header.push_back(std::string("margin_") + kPropertyNames[k]);
            cols.push_back(&margins[k]);
        }
        emit_table("transform", header, cols);
    });
}

void Runner::do_hypotheses() {
    stage("check_hypotheses", "condition_checker", [&] {
        auto cr = hypothesis_matrix(*params_, *g_, *a_, g_->delta());
        json j = {{"keller_osserman", to_json(cr.keller_osserman)},
                  {"growth", to_json(cr.growth)},
                  {"potential", to_json(cr.potential)},
                  {"potential_upper", to_json(cr.potential_upper)},
                  {"a_radial", cr.a_radial},
                  {"p_at_least_2", cr.p_at_least_2},
                  {"calG_invertible", cr.calG_invertible},
                  {"calG_note", cr.calG_note},
                  {"pure_power_family_incompatible", cr.pure_power_family_incompatible},
                  {"g_and_G_jointly_hold", cr.g_and_G_jointly_hold},
                  {"thm11_hypotheses_hold", cr.thm11_hypotheses_hold},
                  {"thm12_hypotheses_hold", cr.thm12_hypotheses_hold},
                  {"failed", cr.failed}};
        if (cr.lair) j["lair"] = to_json(*cr.lair);
        if (cr.hbar) j["hbar"] = to_json(*cr.hbar);
        if (cr.delta_check) j["delta_monotone"] = to_json(*cr.delta_check);
        body_["hypotheses"] = j;
        hyp_ = std::move(cr);
    });
}

void Runner::do_radial() {
    if (!hyp_ || !gate(hyp_->keller_osserman.verdict == Verdict::holds, "KO_G")) return;
    if (!hyp_->thm11_hypotheses_hold) rep_.theorem_covered = false;
    std::optional<RadialSolution> sol;
    const auto a_rad = radial_potential();
    if (!stage("solve_radial", "radial_solver", [&] {
            sol = picard_solve(*params_, a_rad, *g_, *dual_, *cfg_.alpha, cfg_.r_max, cfg_.tol,
                               radial_options());
            if (sol->status == RadialStatus::converged) {
                const auto ode = ode_shoot(*params_, a_rad, *g_, *dual_, *cfg_.alpha, cfg_.r_max,
                                           cfg_.tol, radial_options());
                if (ode.status == RadialStatus::converged) {
                    sol->ode_crosscheck_deviation = sup_deviation(*sol, ode);
                }
            }
        })) {
        return;
    }
    std::optional<LowerBoundReport> bound;
    if (sol->status == RadialStatus::converged) {
        stage("lower_bound", "radial_solver", [&] {
            bound = blowup_lower_bound(*sol, a_rad, *dual_, *g_, *params_);
        });
    }
    stage("radial_output", "cli_reporting", [&] {
        ResidualProfile res;
        const auto residual = residual_column(*sol, res);
        json j = summarize(*sol, &res, bound ? &*bound : nullptr);
        j["theorem_covered"] = rep_.theorem_covered;
        body_["radial"] = j;
        emit_table("radial", {"r", "w", "u", "residual"}, {&sol->radii, &sol->w, &sol->u, &residual});
    });
}

void Runner::do_family() {
    if (!hyp_ || !gate(hyp_->keller_osserman.verdict == Verdict::holds, "KO_G")) return;
    if (!hyp_->thm11_hypotheses_hold) rep_.theorem_covered = false;
    std::optional<FamilyResult> fam;
    if (!stage("sweep_family", "radial_solver", [&] {
            fam = sweep_family(*params_, radial_potential(), *g_, *dual_, cfg_.alphas, cfg_.r_max,
                               cfg_.tol, radial_options(), opt_.threads, cfg_.threshold_r_max);
        })) {
        return;
    }
    stage("family_output", "cli_reporting", [&] {
        json members = json::array();
        for (std::size_t k = 0; k < fam->members.size(); ++k) {
            const auto& m = fam->members[k];
            if (!m.error.empty()) {
                rep_.errors.push_back({"sweep_family[" + std::to_string(k) + "]", "radial_solver",
                                       "Error", "radial_solver: " + m.error});
                members.push_back({{"alpha", cfg_.alphas[k]}, {"error", m.error}});
                continue;
            }
            ResidualProfile res;
            const auto residual = residual_column(m.solution, res);
            members.push_back(summarize(m.solution, &res, m.bound ? &*m.bound : nullptr));
            emit_table("family_" + std::to_string(k), {"r", "w", "u", "residual"},
                       {&m.solution.radii, &m.solution.w, &m.solution.u, &residual});
        }
        json violations = json::array();
        for (const auto& [alpha, r] : fam->ordering_violations) violations.push_back({alpha, r});
        std::vector<bool> probe_ok(fam->threshold.probe_ok.begin(), fam->threshold.probe_ok.end());
        body_["family"] = {{"members", members},
                           {"ordered", fam->ordered},
                           {"ordering_violations", violations},
                           {"theorem_covered", rep_.theorem_covered},
                           {"threshold",
                            {{"calA", fam->threshold.calA},
                             {"A1", fam->threshold.A1},
                             {"A2", fam->threshold.A2},
                             {"resolution", fam->threshold.resolution},
                             {"probe_alphas", fam->threshold.probe_alphas},
                             {"probe_ok", probe_ok}}}};
    });
}

// The oscillation budget handed to the bracketing pair: the configured
// truncation, else H̄ from the hypothesis stage when finite, else (override
// only) the budget consumed up to `radius`.
std::optional<double> Runner::budget_for(double radius) {
    if (cfg_.beta) return std::nullopt;
    if (cfg_.hbar_radius) return truncated_Hbar(*a_, *g_, *params_, *cfg_.hbar_radius);
    if (hyp_ && hyp_->hbar && hyp_->hbar->hbar_value && std::isfinite(*hyp_->hbar->hbar_value)) {
        return *hyp_->hbar->hbar_value;
    }
    if (hyp_ && hyp_->a_radial) return 0.0;
    body_["sandwich_budget_note"] = "H̄ not finite; budget truncated to radius " + format_number(radius);
    return truncated_Hbar(*a_, *g_, *params_, radius);
}

void Runner::do_sandwich() {
    if (!hyp_ || !gate(hyp_->keller_osserman.verdict == Verdict::holds, "KO_G")) return;
    const bool finite_budget = cfg_.hbar_radius || cfg_.beta || hyp_->a_radial ||
                               (hyp_->hbar && hyp_->hbar->verdict == Verdict::holds);
    if (!gate(finite_budget, "oscillation_Hbar")) return;
    if (!hyp_->thm12_hypotheses_hold) rep_.theorem_covered = false;
    std::optional<BracketingPair> pair;
    if (!stage("sandwich", "ball_sandwich_solver", [&] {
            const auto hbar = budget_for(cfg_.r_max);
            pair = build_bracketing_pair(*params_, *a_, *g_, *dual_, *cfg_.alpha, cfg_.epsilon,
                                         cfg_.tol, cfg_.r_max, hbar, cfg_.beta, radial_options());
        })) {
        return;
    }
    std::optional<GrowthBound> growth;
    stage("calG_growth_bound", "ball_sandwich_solver", [&] {
        growth = calG_growth_bound(pair->w_alpha, *a_, *g_, *params_);
    });
    stage("sandwich_output", "cli_reporting", [&] {
        const auto& r = pair->report;
        json violations = r.ordering_violations;
        body_["sandwich"] = {{"alpha", r.alpha},
                             {"epsilon", r.epsilon},
                             {"hbar", r.hbar},
                             {"beta", r.beta},
                             {"beta_overridden", r.beta_overridden},
                             {"min_gap", r.min_gap},
                             {"ordered", r.ordering_violations.empty()},
                             {"ordering_violations", violations},
                             {"S_beta_estimate", number_or_null(r.S_beta_estimate)},
                             {"r_max", r.r_max},
                             {"u_alpha_centre", r.u_alpha_centre},
                             {"u_beta_centre", r.u_beta_centre},
                             {"hbar_note", r.hbar_note},
                             {"w_alpha", summarize(pair->w_alpha, nullptr, nullptr)},
                             {"w_beta", summarize(pair->w_beta, nullptr, nullptr)},
                             {"theorem_covered", rep_.theorem_covered}};
        if (growth) {
            body_["sandwich"]["growth_bound"] = {{"holds", growth->holds},
                                                 {"crossover_radius", growth->crossover_radius}};
        }
        const std::vector<double> nan_col(pair->w_alpha.radii.size(),
                                          std::numeric_limits<double>::quiet_NaN());
        const auto& majorant = growth ? growth->majorant : nan_col;
        emit_table("sandwich", {"r", "w_alpha", "w_beta", "u_alpha", "u_beta", "calG_majorant"},
                   {&pair->w_alpha.radii, &pair->w_alpha.w, &pair->w_beta.w, &pair->w_alpha.u,
                    &pair->w_beta.u, &majorant});
    });
}

void Runner::do_ball() {
    if (!hyp_ || !gate(hyp_->keller_osserman.verdict == Verdict::holds, "KO_G")) return;
    if (!hyp_->thm12_hypotheses_hold) rep_.theorem_covered = false;
    const double R = cfg_.ball_radii.back();
    std::optional<BracketingPair> pair;
    std::optional<double> hbar;
    if (!stage("ball_bracketing", "ball_sandwich_solver", [&] {
            if (!cfg_.beta) {
                hbar = truncated_Hbar(*a_, *g_, *params_, cfg_.hbar_radius.value_or(R));
            }
            pair = build_bracketing_pair(*params_, *a_, *g_, *dual_, *cfg_.alpha, cfg_.epsilon,
                                         cfg_.tol, R, hbar, cfg_.beta, radial_options());
        })) {
        return;
    }
    std::vector<std::optional<BallSolution>> balls(cfg_.ball_radii.size());
    stage("ball_solve", "ball_sandwich_solver", [&] {
        auto solve = [&](std::size_t k) {
            return dirichlet_monotone_solve(*params_, *a_, *g_, *dual_, cfg_.ball_radii[k],
                                            pair->w_alpha, pair->w_beta, cfg_.mesh_h, cfg_.tol);
        };
        const std::size_t width = std::max(1u, opt_.threads);
        for (std::size_t start = 0; start < balls.size(); start += width) {
            std::vector<std::future<BallSolution>> jobs;
            const std::size_t stop = std::min(balls.size(), start + width);
            for (std::size_t k = start; k < stop; ++k) {
                jobs.push_back(std::async(width > 1 ? std::launch::async : std::launch::deferred,
                                          solve, k));
            }
            for (std::size_t k = start; k < stop; ++k) balls[k] = jobs[k - start].get();
        }
    });
    stage("ball_output", "cli_reporting", [&] {
        json list = json::array();
        for (const auto& b : balls) {
            if (!b) continue;
            list.push_back({{"n", b->n},
                            {"mesh_h", b->mesh_h},
                            {"nodes", b->w_n.size()},
                            {"iterations", b->iterations},
                            {"converged", b->converged},
                            {"sandwich_ok", b->sandwich_ok},
                            {"bracket_violations", b->bracket_violations},
                            {"ascent_violations", b->ascent_violations},
                            {"bracket_slack", b->bracket_slack},
                            {"consistency_error", b->consistency_error},
                            {"boundary_value", b->boundary_value},
                            {"w_centre", b->value_at(0, 0)},
                            {"diagnostic", b->diagnostic}});
            if (!b->converged) {
                rep_.errors.push_back({"ball_solve", "ball_sandwich_solver", "NonConvergenceError",
                                       "ball_sandwich_solver: n = " + std::to_string(b->n) +
                                           " did not converge. " + b->diagnostic});
            }
            emit_ball(*b);
        }
        body_["ball"] = {{"alpha", *cfg_.alpha},
                         {"beta", pair->report.beta},
                         {"hbar_budget", hbar ? json(*hbar) : json(nullptr)},
                         {"budget_radius", cfg_.hbar_radius.value_or(R)},
                         {"balls", list},
                         {"theorem_covered", rep_.theorem_covered}};
    });
    const bool all = std::all_of(balls.begin(), balls.end(), [](const auto& b) { return b.has_value(); });
    if (all && balls.size() >= 3) {
        stage("limit_extraction", "ball_sandwich_solver", [&] {
            std::vector<const BallSolution*> ptrs;
            for (const auto& b : balls) ptrs.push_back(&*b);
            auto probes = cfg_.probes;
            if (probes.empty()) {
                const double r = cfg_.ball_radii.front();
                probes = {{0, 0}, {r / 4, 0}, {0, r / 2}, {r / 4, r / 4}};
            }
            const auto lim = extract_limit(ptrs, probes, cfg_.limit_tol);
            json pj = json::array();
            for (const auto& [x, y] : lim.probes) pj.push_back({x, y});
            body_["ball"]["limit"] = {{"probes", pj},
                                      {"values", lim.values},
                                      {"differences", lim.differences},
                                      {"last_difference", lim.last_difference},
                                      {"stabilized", lim.stabilized},
                                      {"decreasing", lim.decreasing},
                                      {"tol", cfg_.limit_tol}};
        });
    }
}

RunReport Runner::execute() {
    body_ = json::object();
    body_["schema_version"] = kSchemaVersion;
    body_["task"] = to_string(cfg_.task);
    body_["config"] = cfg_.raw;
    body_["override_hypotheses"] = opt_.override_hypotheses;
    body_["stages"] = json::array();
    body_["hypothesis_gate"] = {{"checks", json::array()}};
    const auto t0 = std::chrono::steady_clock::now();

    std::error_code ec;
    fs::create_directories(cfg_.out_dir, ec);

    const bool setup = stage("setup", "problem_model", [&] {
        params_.emplace(cfg_.p, cfg_.gamma, cfg_.dim);
        if (cfg_.nonlinearity) g_ = make_nonlinearity(*cfg_.nonlinearity);
        if (cfg_.potential) a_ = make_potential(*cfg_.potential, cfg_.dim);
        dual_ = std::make_unique<DualTransform>(*params_, cfg_.transform_accuracy);
    });

    if (setup) {
        const Task t = cfg_.task;
        const bool pipeline = t == Task::full_pipeline;
        if (t == Task::verify_transform || pipeline) do_transform();
        if (t != Task::verify_transform) do_hypotheses();
        if (t == Task::solve_radial || (pipeline && a_->is_radial())) do_radial();
        if (t == Task::sweep_family || (pipeline && a_->is_radial() && !cfg_.alphas.empty())) {
            do_family();
        }
        if (t == Task::sandwich || (pipeline && !a_->is_radial())) do_sandwich();
        if (t == Task::ball_solve || (pipeline && cfg_.dim == 2 && !cfg_.ball_radii.empty())) {
            do_ball();
        }
    }

    if (!rep_.errors.empty()) rep_.status = RunStatus::compute_error;
    else if (blocked_) rep_.status = RunStatus::hypothesis_blocked;
    rep_.body["hypothesis_gate"]["blocked"] = blocked_;
    rep_.body["theorem_covered"] = rep_.theorem_covered;
    rep_.body["override_used"] = rep_.override_used;
    if (opt_.record_timing) {
        rep_.body["timing_seconds"] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }

    for (const auto& name : emitted_) {
        const fs::path path = cfg_.out_dir / name;
        rep_.files.push_back({name, sha256_file(path), fs::file_size(path)});
    }
    json files = json::array();
    for (const auto& f : rep_.files) {
        files.push_back({{"name", f.name}, {"sha256", f.sha256}, {"bytes", f.bytes}});
    }
    json errors = json::array();
    for (const auto& e : rep_.errors) {
        errors.push_back({{"stage", e.stage}, {"module", e.module}, {"type", e.type},
                          {"message", e.message}});
    }
    const char* status = rep_.status == RunStatus::ok                   ? "ok"
                         : rep_.status == RunStatus::hypothesis_blocked ? "hypothesis_blocked"
                                                                         : "compute_error";
    rep_.body["status"] = status;
    rep_.body["exit_code"] = rep_.exit_code();
    rep_.body["errors"] = errors;
    json out = rep_.body;
    out["files"] = files;
    rep_.report_path = cfg_.out_dir / "report.json";
    std::ofstream f(rep_.report_path, std::ios::binary);
    if (!f) {
        rep_.status = RunStatus::compute_error;
        rep_.errors.push_back({"report", "cli_reporting", "IntegrityError",
                               "cli_reporting: cannot write " + rep_.report_path.string()});
        return rep_;
    }
    f << out.dump(2) << '\n';
    return rep_;
}

}  // namespace

RunReport run(const RunConfig& config, const RunOptions& options) {
    return Runner(config, options).execute();
}

RunReport write_failure_report(const fs::path& out_dir, const std::exception& error) {
    RunReport rep;
    rep.status = RunStatus::compute_error;
    rep.theorem_covered = false;
    json issues = json::array();
    if (const auto* ce = dynamic_cast<const ConfigError*>(&error)) {
        for (const auto& i : ce->issues()) issues.push_back({{"path", i.path}, {"message", i.message}});
    }
    rep.errors.push_back({"config", "cli_reporting", error_type(error), error.what()});
    rep.body = {{"schema_version", kSchemaVersion},
                {"status", "config_error"},
                {"exit_code", 1},
                {"errors",
                 {{{"stage", "config"},
                   {"module", "cli_reporting"},
                   {"type", error_type(error)},
                   {"message", error.what()},
                   {"issues", issues}}}},
                {"files", json::array()}};
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    rep.report_path = out_dir / "report.json";
    std::ofstream f(rep.report_path, std::ios::binary);
    if (f) f << rep.body.dump(2) << '\n';
    return rep;
}

}  // namespace qlb
