#pragma once

// Experiment definitions behind the `exanneal` command line: a JSON config,
// the five table-producing commands, CSV output and the run manifest.

#include "exanneal/dynamics.hpp"
#include "exanneal/optimize.hpp"
#include "exanneal/schemes.hpp"
#include "exanneal/spin_star.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace exanneal {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kCsvSchemaVersion = 1;
inline constexpr int kConfigSchemaVersion = 1;

/// Bad or inconsistent experiment configuration (exit code 1).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ProblemCase { detuned, nearly_degenerate, custom };

inline const char* to_string(ProblemCase c) {
    switch (c) {
        case ProblemCase::detuned: return "detuned";
        case ProblemCase::nearly_degenerate: return "nearly_degenerate";
        case ProblemCase::custom: return "custom";
    }
    return "?";
}

/// 12 log-spaced relaxation times from 1e2 to 1e5 (units of 1/h).
inline std::vector<double> default_t1_grid() {
    std::vector<double> out;
    for (int i = 0; i < 12; ++i) out.push_back(100.0 * std::pow(1000.0, i / 11.0));
    out.front() = 1e2;
    out.back() = 1e5;
    return out;
}

struct ExperimentConfig {
    ProblemCase problem_case = ProblemCase::detuned;
    int N = 5;
    double h = 1.0;
    double J = 0.0;  // read only for the custom case
    std::vector<Scheme> schemes{Scheme::nonadiabatic, Scheme::adiabatic};
    std::vector<double> b{0.1, 0.5, 0.9};
    std::vector<double> T1 = default_t1_grid();
    /// Coarse optimization grid; unset means SweepGrid::default_for(T1, h) per T1.
    std::optional<SweepGrid> grid;
    /// T grid of the fidelity-curve command.
    SweepGrid curve_grid{1.0, 300.0, 300, Spacing::linear};
    double rel_tol = 1e-3;
    int zoom_points = 24;
    IntegratorPolicy policy;
    bool include_central_spin = false;
    CentralSpinInit central_init = CentralSpinInit::plus;
    double nonadiabatic_central_field = 0.0;
    /// Evolution time of the populations command; unset means the optimized tau.
    std::optional<double> population_T;
    int population_samples = 201;
    int population_levels = 4;
    std::string out_dir = "exanneal-out";
    int jobs = 1;

    SpinStarParams params() const {
        switch (problem_case) {
            case ProblemCase::detuned: return SpinStarParams::detuned(N, h);
            case ProblemCase::nearly_degenerate: return SpinStarParams::nearly_degenerate(N, h);
            case ProblemCase::custom: return {N, h, J};
        }
        return {};
    }

    OptimizerOptions optimizer() const { return {rel_tol, zoom_points, 1}; }

    NoiseSpec noise(double t1) const {
        if (std::isinf(t1)) return NoiseSpec::none();
        return NoiseSpec::satellites(N, t1, include_central_spin);
    }

    SweepGrid grid_for(double t1) const { return grid.value_or(SweepGrid::default_for(t1, h)); }

    SchemeRun run(Scheme scheme, double b_value, double t1, double T = 1.0) const {
        SchemeRun r = scheme == Scheme::adiabatic
                          ? SchemeRun::adiabatic(params(), b_value, T, noise(t1))
                          : SchemeRun::nonadiabatic(params(), T, noise(t1), nonadiabatic_central_field);
        r.central = central_init;
        return r;
    }

    /// Throws ConfigError naming the offending field.
    void validate() const {
        auto fail = [](const std::string& field, const std::string& what) {
            throw ConfigError("config field '" + field + "': " + what);
        };
        try {
            params().validate();
        } catch (const std::invalid_argument& e) {
            fail("params", e.what());
        }
        if (schemes.empty()) fail("schemes", "must name at least one scheme");
        for (std::size_t i = 0; i < b.size(); ++i) {
            if (!(b[i] > 0.0 && b[i] < 1.0)) fail("b[" + std::to_string(i) + "]", "must lie in (0, 1)");
        }
        const bool adiabatic = std::find(schemes.begin(), schemes.end(), Scheme::adiabatic) != schemes.end();
        if (adiabatic && b.empty()) fail("b", "the adiabatic scheme needs at least one b");
        if (T1.empty()) fail("T1", "must hold at least one relaxation time");
        for (std::size_t i = 0; i < T1.size(); ++i) {
            if (!(T1[i] > 0.0)) fail("T1[" + std::to_string(i) + "]", "must be > 0 or \"inf\"");
        }
        try {
            if (grid) grid->validate();
        } catch (const std::invalid_argument& e) {
            fail("grid", e.what());
        }
        try {
            curve_grid.validate();
        } catch (const std::invalid_argument& e) {
            fail("curve_grid", e.what());
        }
        try {
            optimizer().validate();
        } catch (const std::invalid_argument& e) {
            fail("optimizer", e.what());
        }
        try {
            policy.validate();
        } catch (const std::invalid_argument& e) {
            fail("policy", e.what());
        }
        if (!(nonadiabatic_central_field >= 0.0 && nonadiabatic_central_field <= 1.0)) {
            fail("nonadiabatic_central_field", "must lie in [0, 1]");
        }
        if (population_T && !(*population_T > 0.0 && std::isfinite(*population_T))) {
            fail("populations.T", "must be positive and finite");
        }
        if (population_samples < 2) fail("populations.samples", "must be >= 2");
        if (population_levels < 1) fail("populations.levels", "must be >= 1");
        if (jobs < 1) fail("jobs", "must be >= 1");
    }

    bool operator==(const ExperimentConfig&) const = default;
};

// ---------------------------------------------------------------------------
// JSON

namespace detail {

using nlohmann::json;

inline json number_or_inf(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

inline json grid_json(const SweepGrid& g) {
    return {{"T_min", g.T_min}, {"T_max", g.T_max}, {"points", g.points},
            {"spacing", to_string(g.spacing)}};
}

/// Field-path aware reader over a JSON object; unknown keys are rejected.
class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError("config field '" + where() + "': expected an object");
    }

    bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

    double number(const std::string& key, bool allow_inf = false) const {
        return as_number(j_.at(key), field(key), allow_inf);
    }

    int integer(const std::string& key) const {
        const json& v = j_.at(key);
        if (!v.is_number_integer()) error(key, "expected an integer");
        return v.get<int>();
    }

    bool boolean(const std::string& key) const {
        const json& v = j_.at(key);
        if (!v.is_boolean()) error(key, "expected true or false");
        return v.get<bool>();
    }

    std::string string(const std::string& key) const {
        const json& v = j_.at(key);
        if (!v.is_string()) error(key, "expected a string");
        return v.get<std::string>();
    }

    std::vector<double> numbers(const std::string& key, bool allow_inf = false) const {
        const json& v = j_.at(key);
        if (!v.is_array()) error(key, "expected an array");
        std::vector<double> out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            out.push_back(as_number(v[i], field(key) + "[" + std::to_string(i) + "]", allow_inf));
        }
        return out;
    }

    Reader object(const std::string& key) const { return Reader(j_.at(key), field(key)); }
    const json& raw(const std::string& key) const { return j_.at(key); }

    void reject_unknown(std::initializer_list<const char*> known) const {
        for (const auto& [key, value] : j_.items()) {
            bool ok = false;
            for (const char* k : known) ok = ok || key == k;
            if (!ok) throw ConfigError("config field '" + field(key) + "': unknown field");
        }
    }

    [[noreturn]] void error(const std::string& key, const std::string& what) const {
        throw ConfigError("config field '" + field(key) + "': " + what);
    }

    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

private:
    std::string where() const { return path_.empty() ? "<root>" : path_; }

    static double as_number(const json& v, const std::string& name, bool allow_inf) {
        if (v.is_number()) return v.get<double>();
        if (allow_inf && v.is_string() && (v == "inf" || v == "infinity")) {
            return std::numeric_limits<double>::infinity();
        }
        throw ConfigError("config field '" + name + "': expected a number" +
                          std::string(allow_inf ? " or \"inf\"" : ""));
    }

    const json& j_;
    std::string path_;
};

inline SweepGrid grid_from(const Reader& r) {
    r.reject_unknown({"T_min", "T_max", "points", "spacing"});
    SweepGrid g;
    if (r.has("T_min")) g.T_min = r.number("T_min");
    if (r.has("T_max")) g.T_max = r.number("T_max");
    if (r.has("points")) g.points = r.integer("points");
    if (r.has("spacing")) {
        const std::string s = r.string("spacing");
        if (s == "log") g.spacing = Spacing::log;
        else if (s == "linear") g.spacing = Spacing::linear;
        else r.error("spacing", "expected \"log\" or \"linear\"");
    }
    return g;
}

}  // namespace detail

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
    using nlohmann::json;
    json params = {{"case", to_string(c.problem_case)}, {"N", c.N}, {"h", c.h}};
    if (c.problem_case == ProblemCase::custom) params["J"] = c.J;
    json schemes = json::array();
    for (Scheme s : c.schemes) schemes.push_back(to_string(s));
    json t1 = json::array();
    for (double v : c.T1) t1.push_back(detail::number_or_inf(v));
    json policy = {{"max_step", detail::number_or_inf(c.policy.max_step)},
                   {"min_substeps", c.policy.min_substeps ? json(*c.policy.min_substeps) : json()},
                   {"sample_count", c.policy.sample_count},
                   {"exchange_reduction", c.policy.exchange_reduction}};
    return {
        {"schema_version", kConfigSchemaVersion},
        {"params", params},
        {"schemes", schemes},
        {"b", c.b},
        {"T1", t1},
        {"grid", c.grid ? detail::grid_json(*c.grid) : json()},
        {"curve_grid", detail::grid_json(c.curve_grid)},
        {"optimizer", {{"rel_tol", c.rel_tol}, {"zoom_points", c.zoom_points}}},
        {"policy", policy},
        {"noise", {{"include_central_spin", c.include_central_spin}}},
        {"nonadiabatic",
         {{"central_init", c.central_init == CentralSpinInit::plus ? "plus" : "down"},
          {"central_field", c.nonadiabatic_central_field}}},
        {"populations",
         {{"T", c.population_T ? json(*c.population_T) : json()},
          {"samples", c.population_samples},
          {"levels", c.population_levels}}},
        {"out_dir", c.out_dir},
        {"jobs", c.jobs},
    };
}

/// Fields absent from the JSON keep their defaults. A run manifest is accepted
/// too: its "config" member is read.
inline ExperimentConfig config_from_json(const nlohmann::json& root) {
    using detail::Reader;
    const nlohmann::json& j = root.is_object() && root.contains("config") && root.contains("command")
                                  ? root.at("config")
                                  : root;
    const Reader r(j, "");
    r.reject_unknown({"schema_version", "params", "schemes", "b", "T1", "grid", "curve_grid",
                      "optimizer", "policy", "noise", "nonadiabatic", "populations", "out_dir",
                      "jobs"});
    ExperimentConfig c;
    if (r.has("schema_version") && r.integer("schema_version") != kConfigSchemaVersion) {
        r.error("schema_version", "unsupported version (expected " +
                                      std::to_string(kConfigSchemaVersion) + ")");
    }
    if (r.has("params")) {
        const Reader p = r.object("params");
        p.reject_unknown({"case", "N", "h", "J"});
        if (p.has("case")) {
            const std::string s = p.string("case");
            if (s == "detuned") c.problem_case = ProblemCase::detuned;
            else if (s == "nearly_degenerate" || s == "nearly-degenerate") c.problem_case = ProblemCase::nearly_degenerate;
            else if (s == "custom") c.problem_case = ProblemCase::custom;
            else p.error("case", "expected detuned, nearly_degenerate or custom");
        }
        if (p.has("N")) c.N = p.integer("N");
        if (p.has("h")) c.h = p.number("h");
        if (p.has("J")) {
            if (c.problem_case != ProblemCase::custom) p.error("J", "only allowed with case \"custom\"");
            c.J = p.number("J");
        }
    }
    if (r.has("schemes")) {
        const auto& arr = r.raw("schemes");
        if (!arr.is_array()) r.error("schemes", "expected an array");
        c.schemes.clear();
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const std::string name = "schemes[" + std::to_string(i) + "]";
            if (arr[i] == "adiabatic") c.schemes.push_back(Scheme::adiabatic);
            else if (arr[i] == "nonadiabatic") c.schemes.push_back(Scheme::nonadiabatic);
            else throw ConfigError("config field '" + name + "': expected adiabatic or nonadiabatic");
        }
    }
    if (r.has("b")) c.b = r.numbers("b");
    if (r.has("T1")) c.T1 = r.numbers("T1", true);
    if (r.has("grid")) c.grid = detail::grid_from(r.object("grid"));
    if (r.has("curve_grid")) c.curve_grid = detail::grid_from(r.object("curve_grid"));
    if (r.has("optimizer")) {
        const Reader o = r.object("optimizer");
        o.reject_unknown({"rel_tol", "zoom_points"});
        if (o.has("rel_tol")) c.rel_tol = o.number("rel_tol");
        if (o.has("zoom_points")) c.zoom_points = o.integer("zoom_points");
    }
    if (r.has("policy")) {
        const Reader p = r.object("policy");
        p.reject_unknown({"max_step", "min_substeps", "sample_count", "exchange_reduction"});
        if (p.has("max_step")) c.policy.max_step = p.number("max_step", true);
        if (p.has("min_substeps")) c.policy.min_substeps = p.integer("min_substeps");
        if (p.has("sample_count")) c.policy.sample_count = p.integer("sample_count");
        if (p.has("exchange_reduction")) c.policy.exchange_reduction = p.boolean("exchange_reduction");
    }
    if (r.has("noise")) {
        const Reader n = r.object("noise");
        n.reject_unknown({"include_central_spin"});
        if (n.has("include_central_spin")) c.include_central_spin = n.boolean("include_central_spin");
    }
    if (r.has("nonadiabatic")) {
        const Reader n = r.object("nonadiabatic");
        n.reject_unknown({"central_init", "central_field"});
        if (n.has("central_init")) {
            const std::string s = n.string("central_init");
            if (s == "plus") c.central_init = CentralSpinInit::plus;
            else if (s == "down") c.central_init = CentralSpinInit::down;
            else n.error("central_init", "expected \"plus\" or \"down\"");
        }
        if (n.has("central_field")) c.nonadiabatic_central_field = n.number("central_field");
    }
    if (r.has("populations")) {
        const Reader p = r.object("populations");
        p.reject_unknown({"T", "samples", "levels"});
        if (p.has("T")) c.population_T = p.number("T");
        if (p.has("samples")) c.population_samples = p.integer("samples");
        if (p.has("levels")) c.population_levels = p.integer("levels");
    }
    if (r.has("out_dir")) c.out_dir = r.string("out_dir");
    if (r.has("jobs")) c.jobs = r.integer("jobs");
    c.validate();
    return c;
}

/// Parses JSON text; syntax errors carry the parser's line and column.
inline ExperimentConfig parse_config(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config syntax error: ") + e.what());
    }
    return config_from_json(j);
}

inline std::string render_config(const ExperimentConfig& c) { return config_to_json(c).dump(2); }

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return parse_config(ss.str());
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Tables

/// %.12g, with "inf"/"-inf"/"nan" spelled out.
inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

struct CsvTable {
    std::string command;
    std::vector<std::string> columns;
    std::vector<std::string> comments;  // extra "# ..." lines after the schema line
    std::vector<std::vector<std::string>> rows;

    void write(std::ostream& out) const {
        out << "# exanneal " << command << " schema_version=" << kCsvSchemaVersion << '\n';
        for (const auto& c : comments) out << "# " << c << '\n';
        for (std::size_t i = 0; i < columns.size(); ++i) out << (i ? "," : "") << columns[i];
        out << '\n';
        for (const auto& row : rows) {
            for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
            out << '\n';
        }
    }

    std::string str() const {
        std::ostringstream ss;
        write(ss);
        return ss.str();
    }
};

struct CommandOutput {
    CsvTable table;
    nlohmann::json diagnostics = nlohmann::json::object();
    bool integrity_ok = true;
};

inline std::string half_integer_label(int twice) {
    if (twice % 2 == 0) return std::to_string(twice / 2);
    return std::to_string(twice) + "/2";
}

// ---------------------------------------------------------------------------
// Commands

/// Numeric spectrum of H_P with every analytic level of the S = N/2 sector
/// placed directly after the numeric level it matches.
inline CommandOutput cmd_spectrum(const ExperimentConfig& config) {
    config.validate();
    const SpinStarParams p = config.params();
    const EigenSystem es = hermitian_eigensystem(build_problem_hamiltonian(p));
    const std::vector<AnalyticLevel> analytic = analytic_spectrum(p);

    std::vector<int> match(static_cast<std::size_t>(es.size()), -1);
    double worst = 0.0;
    for (std::size_t a = 0; a < analytic.size(); ++a) {
        Eigen::Index best = -1;
        for (Eigen::Index k = 0; k < es.size(); ++k) {
            if (match[static_cast<std::size_t>(k)] >= 0) continue;
            if (best < 0 || std::abs(es.eigenvalues(k) - analytic[a].energy) <
                                std::abs(es.eigenvalues(best) - analytic[a].energy)) {
                best = k;
            }
        }
        match[static_cast<std::size_t>(best)] = static_cast<int>(a);
        worst = std::max(worst, std::abs(es.eigenvalues(best) - analytic[a].energy));
    }

    CommandOutput out;
    out.table.command = "spectrum";
    out.table.columns = {"index", "energy", "S_label", "Sz_label", "branch", "source"};
    const double gap_numeric = es.eigenvalues(1) - es.eigenvalues(0);
    out.table.comments = {"N=" + std::to_string(p.N) + " h=" + format_number(p.h) +
                              " J=" + format_number(p.J),
                          "gap_numeric=" + format_number(gap_numeric) +
                              " gap_analytic=" + format_number(p.gap())};
    for (Eigen::Index k = 0; k < es.size(); ++k) {
        const int a = match[static_cast<std::size_t>(k)];
        const std::string idx = std::to_string(k);
        if (a < 0) {
            out.table.rows.push_back({idx, format_number(es.eigenvalues(k)), "", "", "", "numeric"});
            continue;
        }
        const AnalyticLevel& lv = analytic[static_cast<std::size_t>(a)];
        const std::string s = half_integer_label(lv.two_S);
        const std::string sz = half_integer_label(lv.two_Sz);
        out.table.rows.push_back({idx, format_number(es.eigenvalues(k)), s, sz, to_string(lv.branch), "numeric"});
        out.table.rows.push_back({idx, format_number(lv.energy), s, sz, to_string(lv.branch), "analytic"});
    }
    out.diagnostics = {{"max_analytic_numeric_difference", worst},
                       {"gap_numeric", gap_numeric},
                       {"gap_analytic", p.gap()},
                       {"analytic_levels", analytic.size()}};
    if (auto w = p.regime_warning()) out.diagnostics["warning"] = *w;
    return out;
}

struct OptimumTask {
    Scheme scheme;
    double b;  // NaN for the nonadiabatic scheme
    double T1;
};

inline std::vector<OptimumTask> optimum_tasks(const ExperimentConfig& c) {
    std::vector<OptimumTask> tasks;
    for (Scheme s : c.schemes) {
        if (s == Scheme::nonadiabatic) {
            for (double t1 : c.T1) tasks.push_back({s, std::numeric_limits<double>::quiet_NaN(), t1});
        } else {
            for (double bv : c.b) {
                for (double t1 : c.T1) tasks.push_back({s, bv, t1});
            }
        }
    }
    return tasks;
}

struct OptimumRow {
    OptimumTask task;
    std::optional<OptimumResult> result;
    std::string error;
};

inline std::vector<OptimumRow> compute_optima(const ExperimentConfig& c) {
    c.validate();
    const std::vector<OptimumTask> tasks = optimum_tasks(c);
    return parallel_map(tasks.size(), c.jobs, [&](std::size_t i) {
        const OptimumTask& t = tasks[i];
        OptimumRow row{t, std::nullopt, ""};
        try {
            row.result = maximize_fidelity(c.run(t.scheme, std::isnan(t.b) ? 0.5 : t.b, t.T1),
                                           c.grid_for(t.T1), c.optimizer(), c.policy);
        } catch (const NumericalError& e) {
            row.error = e.what();
        }
        return row;
    });
}

inline nlohmann::json optimum_diagnostics(const OptimumRow& row) {
    using nlohmann::json;
    json d = {{"scheme", to_string(row.task.scheme)},
              {"b", std::isnan(row.task.b) ? json() : json(row.task.b)},
              {"T1", detail::number_or_inf(row.task.T1)}};
    if (!row.result) {
        d["valid"] = false;
        d["error"] = row.error;
        return d;
    }
    const OptimumResult& r = *row.result;
    double drift = 0.0, herm = 0.0;
    json failures = json::array();
    for (const auto& rec : r.grid_table) {
        drift = std::max(drift, rec.trace_drift);
        herm = std::max(herm, rec.hermiticity_defect);
        if (!rec.ok) failures.push_back({{"T", rec.T}, {"error", rec.error}});
    }
    for (const auto& rec : r.failures) failures.push_back({{"T", rec.T}, {"error", rec.error}});
    json peaks = json::array();
    for (const auto& pk : r.peaks) peaks.push_back({{"tau", pk.tau}, {"F", pk.F}});
    d.update({{"valid", true},
              {"tau", r.tau},
              {"F_max", r.F_max},
              {"evaluations", r.evaluations},
              {"boundary_optimum", r.boundary},
              {"grid_max_trace_drift", drift},
              {"grid_max_hermiticity_defect", herm},
              {"refined_peaks", peaks},
              {"failures", failures}});
    return d;
}

inline CommandOutput optimum_command(const ExperimentConfig& c, const std::string& name,
                                     bool with_evaluations) {
    CommandOutput out;
    out.table.command = name;
    out.table.columns = {"scheme", "b", "T1", "tau", "F_max"};
    if (with_evaluations) out.table.columns.push_back("evaluations");
    out.table.comments = {"case=" + std::string(to_string(c.problem_case)) +
                          " N=" + std::to_string(c.N) + " h=" + format_number(c.h) +
                          " J=" + format_number(c.params().J)};
    out.diagnostics["points"] = nlohmann::json::array();
    for (const OptimumRow& row : compute_optima(c)) {
        const bool valid = row.result.has_value();
        const bool clean = valid && row.result->failures.empty() &&
                           std::all_of(row.result->grid_table.begin(), row.result->grid_table.end(),
                                       [](const SweepRecord& r) { return r.ok; });
        out.integrity_ok = out.integrity_ok && clean;
        std::vector<std::string> cells = {
            to_string(row.task.scheme),
            std::isnan(row.task.b) ? "" : format_number(row.task.b),
            format_number(row.task.T1),
            valid ? format_number(row.result->tau) : "nan",
            valid ? format_number(row.result->F_max) : "nan"};
        if (with_evaluations) cells.push_back(valid ? std::to_string(row.result->evaluations) : "0");
        out.table.rows.push_back(std::move(cells));
        out.diagnostics["points"].push_back(optimum_diagnostics(row));
    }
    return out;
}

inline CommandOutput cmd_max_fidelity(const ExperimentConfig& c) {
    return optimum_command(c, "max-fidelity", true);
}

inline CommandOutput cmd_optimal_tau(const ExperimentConfig& c) {
    return optimum_command(c, "optimal-tau", false);
}

/// F(T) of the adiabatic scheme over curve_grid, one curve per b, at the single
/// configured T1.
inline CommandOutput cmd_fidelity_curve(const ExperimentConfig& c) {
    c.validate();
    if (c.T1.size() != 1) throw ConfigError("fidelity-curve needs exactly one T1 (use --t1)");
    if (std::find(c.schemes.begin(), c.schemes.end(), Scheme::adiabatic) == c.schemes.end()) {
        throw ConfigError("fidelity-curve evaluates the adiabatic scheme; add it to 'schemes'");
    }
    const std::vector<double> ts = c.curve_grid.values();
    const std::size_t per_curve = ts.size();
    const auto records = parallel_map(c.b.size() * per_curve, c.jobs, [&](std::size_t i) {
        const double bv = c.b[i / per_curve];
        return evaluate_fidelity(c.run(Scheme::adiabatic, bv, c.T1.front()), ts[i % per_curve], c.policy);
    });
    CommandOutput out;
    out.table.command = "fidelity-curve";
    out.table.columns = {"b", "T", "F"};
    out.table.comments = {"case=" + std::string(to_string(c.problem_case)) +
                          " T1=" + format_number(c.T1.front())};
    nlohmann::json failures = nlohmann::json::array();
    double drift = 0.0;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const SweepRecord& rec = records[i];
        drift = std::max(drift, rec.trace_drift);
        if (!rec.ok) {
            out.integrity_ok = false;
            failures.push_back({{"b", c.b[i / per_curve]}, {"T", rec.T}, {"error", rec.error}});
        }
        out.table.rows.push_back(
            {format_number(c.b[i / per_curve]), format_number(rec.T), format_number(rec.fidelity)});
    }
    out.diagnostics = {{"max_trace_drift", drift}, {"failures", failures},
                       {"evaluations", records.size()}};
    return out;
}

/// Instantaneous-level populations of one (scheme, b, T1) run at T = tau
/// (optimized first) or at the configured populations.T.
inline CommandOutput cmd_populations(const ExperimentConfig& c) {
    c.validate();
    if (c.T1.size() != 1) throw ConfigError("populations needs exactly one T1 (use --t1)");
    const std::vector<OptimumTask> combos = [&] {
        ExperimentConfig single = c;
        single.T1 = {c.T1.front()};
        return optimum_tasks(single);
    }();
    if (combos.size() != 1) {
        throw ConfigError("populations needs exactly one (scheme, b) combination (use --scheme and --b)");
    }
    const OptimumTask task = combos.front();
    const double bv = std::isnan(task.b) ? 0.5 : task.b;
    SchemeRun run = c.run(task.scheme, bv, task.T1);

    CommandOutput out;
    double T = 0.0;
    if (c.population_T) {
        T = *c.population_T;
        out.diagnostics["T_source"] = "config";
    } else {
        const OptimumResult opt = maximize_fidelity(run, c.grid_for(task.T1), c.optimizer(), c.policy);
        T = opt.tau;
        out.diagnostics["T_source"] = "optimized";
        out.diagnostics["F_max"] = opt.F_max;
        out.diagnostics["evaluations"] = opt.evaluations;
    }
    run.T = T;
    IntegratorPolicy policy = c.policy;
    policy.sample_count = c.population_samples;
    const SchemeResult result = run_scheme(run, policy);
    const PopulationTrace trace = instantaneous_populations(result.trajectory, run, c.population_levels);

    out.table.command = "populations";
    out.table.columns = {"t", "level_label", "population"};
    out.table.comments = {"scheme=" + std::string(to_string(task.scheme)) +
                          (std::isnan(task.b) ? std::string() : " b=" + format_number(task.b)) +
                          " T1=" + format_number(task.T1) + " T=" + format_number(T)};
    double worst_total = 0.0;
    for (std::size_t i = 0; i < trace.times.size(); ++i) {
        worst_total = std::max(worst_total, std::abs(trace.total(i) - 1.0));
        const auto& levels = trace.levels[i];
        const std::size_t shown = std::min<std::size_t>(levels.size(), static_cast<std::size_t>(c.population_levels));
        for (std::size_t k = 0; k < shown; ++k) {
            std::string label = PopulationTrace::label(k);
            if (levels[k].degeneracy > 1) label += "[x" + std::to_string(levels[k].degeneracy) + "]";
            out.table.rows.push_back({format_number(trace.times[i]), label, format_number(levels[k].population)});
        }
    }
    out.diagnostics.update({{"T", T},
                            {"fidelity", result.fidelity},
                            {"max_trace_drift", result.trajectory.max_trace_drift},
                            {"max_population_sum_error", worst_total}});
    return out;
}

// ---------------------------------------------------------------------------
// Running a command end to end

inline const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names = {"spectrum", "max-fidelity", "optimal-tau",
                                                   "fidelity-curve", "populations"};
    return names;
}

inline CommandOutput run_command(const std::string& name, const ExperimentConfig& c) {
    if (name == "spectrum") return cmd_spectrum(c);
    if (name == "max-fidelity") return cmd_max_fidelity(c);
    if (name == "optimal-tau") return cmd_optimal_tau(c);
    if (name == "fidelity-curve") return cmd_fidelity_curve(c);
    if (name == "populations") return cmd_populations(c);
    throw ConfigError("unknown command '" + name + "'");
}

inline std::string csv_file_name(const std::string& command) {
    std::string out = command;
    std::replace(out.begin(), out.end(), '-', '_');
    return out + ".csv";
}

enum ExitCode : int { exit_ok = 0, exit_config_error = 1, exit_integrity_failure = 2 };

/// Runs the command, writes <out_dir>/<command>.csv and <out_dir>/manifest.json.
/// Config errors propagate as ConfigError before anything is written.
inline int execute(const std::string& name, const ExperimentConfig& c) {
    const auto start = std::chrono::steady_clock::now();
    c.validate();
    const CommandOutput out = run_command(name, c);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    const std::filesystem::path dir(c.out_dir);
    std::filesystem::create_directories(dir);
    const std::string csv = csv_file_name(name);
    {
        std::ofstream f(dir / csv);
        out.table.write(f);
    }
    const int code = out.integrity_ok ? exit_ok : exit_integrity_failure;
    const nlohmann::json assumptions = {
        {"coarse_grid_default", "40 log-spaced points over [0.5/h, min(20*T1, 2000/h)]"},
        {"T1_grid_default", "12 log-spaced points over [1e2, 1e5] (units of 1/h)"},
        {"integrator_default_substeps", "max(2000, ceil(40*T*h)) fixed RK4 steps"},
        {"bracket_zoom", "each coarse bracket re-sampled on zoom_points linear points before Brent"}};
    const nlohmann::json manifest = {
        {"tool", "exanneal"},
        {"tool_version", kToolVersion},
        {"command", name},
        {"csv", csv},
        {"csv_schema_version", kCsvSchemaVersion},
        {"columns", out.table.columns},
        {"config", config_to_json(c)},
        {"assumptions", assumptions},
        {"diagnostics", out.diagnostics},
        {"integrity_ok", out.integrity_ok},
        {"exit_code", code},
        {"wall_time_seconds", wall}};
    std::ofstream(dir / "manifest.json") << manifest.dump(2) << '\n';
    return code;
}

}  // namespace exanneal
