#include "exanneal/experiments.hpp"

#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

using namespace exanneal;
using Catch::Approx;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("exanneal_test_" + name);
    fs::remove_all(dir);
    return dir;
}

/// Rows whose `source` column equals `source`, as (index, energy).
std::vector<std::pair<int, double>> rows_from(const CsvTable& t, const std::string& source) {
    std::vector<std::pair<int, double>> out;
    for (const auto& row : t.rows) {
        if (row[5] == source) out.emplace_back(std::stoi(row[0]), std::stod(row[1]));
    }
    return out;
}

ExperimentConfig small_config() {
    ExperimentConfig c;
    c.N = 2;
    c.schemes = {Scheme::adiabatic};
    c.b = {0.5};
    c.T1 = {100.0};
    c.curve_grid = {1.0, 8.0, 8, Spacing::linear};
    c.grid = SweepGrid{0.5, 40.0, 10, Spacing::log};
    c.zoom_points = 4;
    return c;
}

}  // namespace

TEST_CASE("config render/parse round trip") {
    ExperimentConfig c;
    CHECK(parse_config(render_config(c)) == c);

    c.problem_case = ProblemCase::custom;
    c.N = 3;
    c.h = 0.5;
    c.J = 0.125;
    c.schemes = {Scheme::nonadiabatic};
    c.T1 = {100.0, std::numeric_limits<double>::infinity()};
    c.grid = SweepGrid{1.0, 50.0, 9, Spacing::linear};
    c.policy.min_substeps = 3000;
    c.policy.max_step = 0.01;
    c.include_central_spin = true;
    c.central_init = CentralSpinInit::down;
    c.nonadiabatic_central_field = 0.25;
    c.population_T = 12.5;
    c.rel_tol = 1e-4;
    c.jobs = 3;
    CHECK(parse_config(render_config(c)) == c);
    // Doubles survive the text form bit for bit.
    c.b = {0.1 + 0.2, 1.0 / 3.0};
    CHECK(parse_config(render_config(c)).b == c.b);
}

TEST_CASE("default config matches the documented defaults") {
    const ExperimentConfig c;
    CHECK(c.params() == SpinStarParams::detuned(5, 1.0));
    REQUIRE(c.T1.size() == 12);
    CHECK(c.T1.front() == 1e2);
    CHECK(c.T1.back() == 1e5);
    CHECK(c.T1[1] / c.T1[0] == Approx(c.T1[11] / c.T1[10]));
    CHECK(c.grid_for(1e3) == SweepGrid{0.5, 2000.0, 40, Spacing::log});
    CHECK(c.grid_for(10.0).T_max == 200.0);
    ExperimentConfig nd;
    nd.problem_case = ProblemCase::nearly_degenerate;
    CHECK(nd.params().gap() == Approx(0.2));
}

TEST_CASE("config errors name the line or the field") {
    try {
        parse_config("{\n  \"params\": {\"N\": 5,}\n}");
        FAIL("expected a syntax error");
    } catch (const ConfigError& e) {
        CHECK_THAT(e.what(), Catch::Matchers::ContainsSubstring("line 2"));
    }
    auto message = [](const std::string& text) {
        try {
            parse_config(text);
        } catch (const ConfigError& e) {
            return std::string(e.what());
        }
        return std::string("no error");
    };
    CHECK_THAT(message(R"({"params": {"N": "five"}})"), Catch::Matchers::ContainsSubstring("params.N"));
    CHECK_THAT(message(R"({"b": [0.5, 1.5]})"), Catch::Matchers::ContainsSubstring("b[1]"));
    CHECK_THAT(message(R"({"T1": [100, "soon"]})"), Catch::Matchers::ContainsSubstring("T1[1]"));
    CHECK_THAT(message(R"({"policy": {"min_step": 3}})"), Catch::Matchers::ContainsSubstring("policy.min_step"));
    CHECK_THAT(message(R"({"params": {"J": 0.1}})"), Catch::Matchers::ContainsSubstring("params.J"));
    CHECK_THAT(message(R"({"schema_version": 2})"), Catch::Matchers::ContainsSubstring("schema_version"));
    CHECK(parse_config(R"({"T1": ["inf"]})").T1.front() == std::numeric_limits<double>::infinity());
}

TEST_CASE("numbers are written with 12 significant digits") {
    CHECK(format_number(1.0 / 3.0) == "0.333333333333");
    CHECK(format_number(-3.0) == "-3");
    CHECK(format_number(1e5) == "100000");
    CHECK(format_number(std::numeric_limits<double>::infinity()) == "inf");
    CHECK(format_number(std::numeric_limits<double>::quiet_NaN()) == "nan");
}

TEST_CASE("spectrum table interleaves numeric and analytic rows") {
    ExperimentConfig c;
    const CommandOutput out = cmd_spectrum(c);
    CHECK(out.table.columns == std::vector<std::string>{"index", "energy", "S_label", "Sz_label", "branch", "source"});
    const auto numeric = rows_from(out.table, "numeric");
    const auto analytic = rows_from(out.table, "analytic");
    CHECK(numeric.size() == 64);
    CHECK(analytic.size() == 12);
    CHECK(numeric[0].second == Approx(-3.0).margin(1e-9));
    CHECK(analytic[0].second == Approx(-3.0).margin(1e-9));
    // Every analytic row directly follows the numeric row with the same index.
    for (std::size_t i = 0; i < out.table.rows.size(); ++i) {
        if (out.table.rows[i][5] != "analytic") continue;
        REQUIRE(i > 0);
        CHECK(out.table.rows[i - 1][0] == out.table.rows[i][0]);
        CHECK(std::abs(std::stod(out.table.rows[i - 1][1]) - std::stod(out.table.rows[i][1])) < 1e-9);
    }
    CHECK(out.diagnostics["gap_numeric"].get<double>() == Approx(0.5).epsilon(1e-10));
    CHECK_THAT(out.table.str(), Catch::Matchers::ContainsSubstring("gap_numeric=0.5 "));
    CHECK(out.table.str().rfind("# exanneal spectrum schema_version=1\n", 0) == 0);

    c.problem_case = ProblemCase::nearly_degenerate;
    CHECK(cmd_spectrum(c).diagnostics["gap_numeric"].get<double>() == Approx(0.2).epsilon(1e-10));

    c.problem_case = ProblemCase::custom;
    c.J = 0.0;
    const auto free = rows_from(cmd_spectrum(c).table, "numeric");
    CHECK(free[1].second == free[2].second);  // J = 0: Zeeman levels are degenerate
}

TEST_CASE("optimum tasks cover every scheme, b and T1") {
    ExperimentConfig c;
    c.T1 = {1e2, 1e3};
    const auto tasks = optimum_tasks(c);
    REQUIRE(tasks.size() == 2 + 3 * 2);
    CHECK(std::isnan(tasks[0].b));
    CHECK(tasks[2].scheme == Scheme::adiabatic);
    CHECK(tasks[2].b == 0.1);
}

TEST_CASE("max-fidelity and optimal-tau share their optimum") {
    ExperimentConfig c = small_config();
    c.schemes = {Scheme::nonadiabatic, Scheme::adiabatic};
    const CommandOutput mf = cmd_max_fidelity(c);
    const CommandOutput ot = cmd_optimal_tau(c);
    CHECK(mf.table.columns.back() == "evaluations");
    REQUIRE(mf.table.rows.size() == 2);
    CHECK(mf.table.rows[0][1].empty());  // nonadiabatic rows carry no b
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(mf.table.rows[i][3] == ot.table.rows[i][3]);
        CHECK(mf.table.rows[i][4] == ot.table.rows[i][4]);
    }
    CHECK(mf.integrity_ok);
    CHECK(mf.diagnostics["points"].size() == 2);
}

TEST_CASE("fidelity-curve and populations enforce a single T1 and combination") {
    ExperimentConfig c = small_config();
    const CommandOutput curve = cmd_fidelity_curve(c);
    CHECK(curve.table.rows.size() == 8);
    CHECK(curve.table.columns == std::vector<std::string>{"b", "T", "F"});

    c.population_samples = 11;
    const CommandOutput pops = cmd_populations(c);
    CHECK(pops.table.rows.front()[0] == "0");
    CHECK(pops.table.rows.front()[1] == "GS");
    CHECK(pops.table.rows[1][1] == "1ES");
    CHECK(std::stod(pops.table.rows[1][2]) == Approx(1.0).epsilon(1e-10));
    CHECK(pops.diagnostics["max_population_sum_error"].get<double>() < 1e-6);

    ExperimentConfig two = c;
    two.T1 = {100.0, 1000.0};
    CHECK_THROWS_AS(cmd_fidelity_curve(two), ConfigError);
    ExperimentConfig many = c;
    many.b = {0.1, 0.5};
    CHECK_THROWS_AS(cmd_populations(many), ConfigError);
}

TEST_CASE("a run is reproduced byte for byte from its manifest") {
    ExperimentConfig c = small_config();
    c.out_dir = scratch("first").string();
    REQUIRE(execute("max-fidelity", c) == exit_ok);
    const std::string first = slurp(fs::path(c.out_dir) / "max_fidelity.csv");
    const nlohmann::json manifest = nlohmann::json::parse(slurp(fs::path(c.out_dir) / "manifest.json"));
    CHECK(manifest["command"] == "max-fidelity");
    CHECK(manifest["csv_schema_version"] == kCsvSchemaVersion);
    CHECK(manifest.contains("wall_time_seconds"));

    ExperimentConfig again = config_from_json(manifest);
    CHECK(again == c);
    again.out_dir = scratch("second").string();
    again.jobs = 4;
    REQUIRE(execute(manifest["command"].get<std::string>(), again) == exit_ok);
    CHECK(slurp(fs::path(again.out_dir) / "max_fidelity.csv") == first);
}

TEST_CASE("integrity failures map to exit code 2") {
    ExperimentConfig c = small_config();
    c.curve_grid = {100.0, 800.0, 8, Spacing::linear};
    c.policy.min_substeps = 2;
    c.out_dir = scratch("broken").string();
    CHECK(execute("fidelity-curve", c) == exit_integrity_failure);
    const nlohmann::json manifest = nlohmann::json::parse(slurp(fs::path(c.out_dir) / "manifest.json"));
    CHECK_FALSE(manifest["integrity_ok"].get<bool>());
    CHECK(manifest["diagnostics"]["failures"].size() > 0);
}
