// exanneal: command-line front end for the spin-star annealing experiments.
//
//   exanneal <command> [--config FILE] [overrides...]
//
// Every run writes <out>/<command>.csv and <out>/manifest.json. Exit codes:
// 0 success, 1 configuration error, 2 numerical integrity failure.

#include "exanneal/experiments.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

struct Overrides {
    std::string config_path;
    std::optional<std::string> out_dir;
    std::optional<int> jobs;
    std::optional<std::string> problem_case;
    std::optional<int> n;
    std::optional<double> h;
    std::optional<double> j;
    std::vector<std::string> schemes;
    std::vector<double> b;
    std::vector<std::string> t1;
    bool include_central_noise = false;
    std::optional<std::string> central_init;
    std::optional<double> central_field;
    std::optional<double> population_T;
    bool print_config = false;
};

void add_options(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--config", o.config_path, "JSON config file (a manifest.json is accepted)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", o.out_dir, "Output directory");
    cmd->add_option("--jobs", o.jobs, "Worker threads (default: $EXANNEAL_JOBS or 1)")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--case", o.problem_case, "Problem case")
        ->check(CLI::IsMember({"detuned", "nearly_degenerate", "nearly-degenerate"}));
    cmd->add_option("--n", o.n, "Number of satellite spins");
    cmd->add_option("--zeeman", o.h, "Zeeman energy h");
    cmd->add_option("--J", o.j, "Coupling J (switches to the custom case)");
    cmd->add_option("--scheme", o.schemes, "Scheme(s) to run")
        ->check(CLI::IsMember({"adiabatic", "nonadiabatic"}))
        ->delimiter(',');
    cmd->add_option("--b", o.b, "Central-spin driver field(s) of the adiabatic scheme")->delimiter(',');
    cmd->add_option("--t1", o.t1, "Relaxation time(s) in units of 1/h, or inf")->delimiter(',');
    cmd->add_flag("--include-central-noise", o.include_central_noise,
                  "Apply depolarizing noise to the central spin as well");
    cmd->add_option("--central-init", o.central_init, "Nonadiabatic central-spin preparation")
        ->check(CLI::IsMember({"plus", "down"}));
    cmd->add_option("--central-field", o.central_field,
                    "Nonadiabatic driver field on the central spin, in [0, 1]");
    cmd->add_option("--T", o.population_T, "Evolution time of the populations command");
    cmd->add_flag("--print-config", o.print_config, "Print the effective config and exit");
}

double parse_t1(const std::string& s) {
    if (s == "inf" || s == "infinity") return std::numeric_limits<double>::infinity();
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != s.size()) throw exanneal::ConfigError("--t1: cannot parse '" + s + "'");
    return v;
}

exanneal::ExperimentConfig effective_config(const Overrides& o) {
    using namespace exanneal;
    ExperimentConfig c = o.config_path.empty() ? ExperimentConfig{} : load_config(o.config_path);
    if (const char* env = std::getenv("EXANNEAL_JOBS"); env && *env && !o.jobs) {
        try {
            c.jobs = std::stoi(env);
        } catch (const std::exception&) {
            throw ConfigError(std::string("EXANNEAL_JOBS: cannot parse '") + env + "'");
        }
    }
    if (o.out_dir) c.out_dir = *o.out_dir;
    if (o.jobs) c.jobs = *o.jobs;
    if (o.problem_case) {
        c.problem_case = *o.problem_case == "detuned" ? ProblemCase::detuned : ProblemCase::nearly_degenerate;
    }
    if (o.n) c.N = *o.n;
    if (o.h) c.h = *o.h;
    if (o.j) {
        c.problem_case = ProblemCase::custom;
        c.J = *o.j;
    }
    if (!o.schemes.empty()) {
        c.schemes.clear();
        for (const auto& s : o.schemes) {
            c.schemes.push_back(s == "adiabatic" ? Scheme::adiabatic : Scheme::nonadiabatic);
        }
    }
    if (!o.b.empty()) c.b = o.b;
    if (!o.t1.empty()) {
        c.T1.clear();
        for (const auto& s : o.t1) c.T1.push_back(parse_t1(s));
    }
    if (o.include_central_noise) c.include_central_spin = true;
    if (o.central_init) c.central_init = *o.central_init == "plus" ? CentralSpinInit::plus : CentralSpinInit::down;
    if (o.central_field) c.nonadiabatic_central_field = *o.central_field;
    if (o.population_T) c.population_T = *o.population_T;
    c.validate();
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Excited-state quantum annealing on the spin-star model"};
    app.require_subcommand(1);
    app.set_version_flag("--version", exanneal::kToolVersion);

    Overrides overrides;
    const std::vector<std::pair<std::string, std::string>> commands = {
        {"spectrum", "Numeric and analytic spectrum of the problem Hamiltonian"},
        {"max-fidelity", "Maximum first-excited-state fidelity over T, per scheme, b and T1"},
        {"optimal-tau", "Optimal annealing time per scheme, b and T1"},
        {"fidelity-curve", "Adiabatic-scheme fidelity as a function of T at one T1"},
        {"populations", "Instantaneous-level populations along one run"},
    };
    for (const auto& [name, help] : commands) add_options(app.add_subcommand(name, help), overrides);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exanneal::exit_config_error;
    }
    const std::string command = app.get_subcommands().front()->get_name();

    try {
        const exanneal::ExperimentConfig config = effective_config(overrides);
        if (overrides.print_config) {
            std::cout << exanneal::render_config(config) << '\n';
            return exanneal::exit_ok;
        }
        const int code = exanneal::execute(command, config);
        std::cerr << "exanneal " << command << ": wrote " << config.out_dir << '/'
                  << exanneal::csv_file_name(command) << " and manifest.json";
        if (code == exanneal::exit_integrity_failure) std::cerr << " (numerical integrity failure, see manifest)";
        std::cerr << '\n';
        return code;
    } catch (const exanneal::ConfigError& e) {
        std::cerr << "exanneal: " << e.what() << '\n';
        return exanneal::exit_config_error;
    } catch (const std::invalid_argument& e) {
        std::cerr << "exanneal: invalid configuration: " << e.what() << '\n';
        return exanneal::exit_config_error;
    } catch (const exanneal::NumericalError& e) {
        std::cerr << "exanneal: numerical failure: " << e.what() << '\n';
        return exanneal::exit_integrity_failure;
    }
}
