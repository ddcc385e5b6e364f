// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
//
//   acceptance [--full] [--jobs N]
//
// --full uses the 12-point T1 grid for the scheme-ordering and tau-stability
// checks; the default is the 4-point grid {1e2, 1e3, 1e4, 1e5}.

#include "exanneal/experiments.hpp"

#include <Eigen/Eigenvalues>

#include <chrono>
#include <cstdio>
#include <cstring>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <thread>

using namespace exanneal;

namespace {

int failures = 0;

void report(bool pass, const std::string& name, const std::string& detail) {
    std::cout << (pass ? "PASS " : "FAIL ") << name << ": " << detail << std::endl;
    if (!pass) ++failures;
}

void note(const std::string& name, const std::string& detail) {
    std::cout << "INFO " << name << ": " << detail << std::endl;
}

std::string fmt(const char* format, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, format, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

double min_eigenvalue(const ComplexMatrix& m) {
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> s(m, Eigen::EigenvaluesOnly);
    return s.eigenvalues()(0);
}

void spectrum_oracle() {
    const auto start = std::chrono::steady_clock::now();
    double worst = 0.0;
    bool counts = true;
    for (int n = 1; n <= 6; ++n) {
        for (double h : {0.5, 1.0}) {
            const double sq = std::sqrt(static_cast<double>(n));
            for (double J : {0.0, h / (2 * sq), 4 * h / (5 * sq)}) {
                const SpinStarParams p{n, h, J};
                const EigenSystem es = hermitian_eigensystem(build_problem_hamiltonian(p));
                const auto levels = analytic_spectrum(p);
                counts = counts && static_cast<int>(levels.size()) == 2 * (n + 1);
                for (const auto& level : levels) {
                    double best = 1e300;
                    for (Eigen::Index k = 0; k < es.size(); ++k) {
                        best = std::min(best, std::abs(es.eigenvalues(k) - level.energy));
                    }
                    worst = std::max(worst, best);
                }
            }
        }
    }
    const double elapsed = seconds_since(start);
    report(worst <= 1e-9 && counts && elapsed < 5.0, "spectrum oracle",
           fmt("max |analytic - numeric| = %.2e over 36 parameter sets, sector sizes 2(2S+1) %s, %.2f s",
               worst, counts ? "ok" : "WRONG", elapsed));
}

void gap_formula() {
    double worst = 0.0;
    std::string values;
    for (const auto& p : {SpinStarParams::detuned(5), SpinStarParams::nearly_degenerate(5)}) {
        const EigenSystem es = hermitian_eigensystem(build_problem_hamiltonian(p));
        const double gap = es.eigenvalues(1) - es.eigenvalues(0);
        worst = std::max(worst, std::abs(gap - (p.h - p.J * std::sqrt(5.0))));
        values += fmt(" %.12f", gap);
    }
    const auto d = SpinStarParams::detuned(5), nd = SpinStarParams::nearly_degenerate(5);
    const bool pass = worst <= 1e-10 && std::abs(d.gap() - 0.5) <= 1e-10 && std::abs(nd.gap() - 0.2) <= 1e-10;
    report(pass, "gap formula", "numeric gaps (detuned, nearly-degenerate) =" + values + fmt(", max deviation %.1e", worst));
}

void driver_spectrum() {
    double worst = 0.0;
    for (double b : {0.1, 0.5, 0.9}) {
        const SpinStarParams p = SpinStarParams::detuned(5);
        const EigenSystem es = hermitian_eigensystem(build_driver(DriverSpec::adiabatic(b), p));
        const double expected[3] = {-5 - b, -5 + b, -5 - b + 2};
        for (int k = 0; k < 3; ++k) worst = std::max(worst, std::abs(es.eigenvalues(k) - expected[k]));
    }
    report(worst <= 1e-10, "driver spectrum", fmt("lowest three levels within %.1e of (-N-b, -N+b, -N-b+2)", worst));
}

void integrator_integrity() {
    const auto start = std::chrono::steady_clock::now();
    const SpinStarParams p = SpinStarParams::detuned(2);
    const SchemeRun run = SchemeRun::adiabatic(p, 0.5, 10.0, NoiseSpec::satellites(p.N, 100.0));
    auto final_state = [&](int steps, double* drift, double* min_eig) {
        IntegratorPolicy policy;
        policy.min_substeps = steps;
        if (min_eig) policy.sample_count = 21;  // only the production-step run is sampled
        const SchemeResult r = run_scheme(run, policy);
        if (drift) *drift = r.trajectory.max_trace_drift;
        if (min_eig) {
            *min_eig = 1.0;
            for (const auto& rho : r.trajectory.states) *min_eig = std::min(*min_eig, min_eigenvalue(rho.matrix()));
        }
        return r.final_state.matrix();
    };
    double drift = 0.0, min_eig = 0.0;
    final_state(2000, &drift, &min_eig);
    const ComplexMatrix coarse = final_state(40, nullptr, nullptr);
    const ComplexMatrix half = final_state(80, nullptr, nullptr);
    const ComplexMatrix reference = final_state(160, nullptr, nullptr);
    const double factor = (coarse - reference).norm() / (half - reference).norm();
    const double elapsed = seconds_since(start);
    report(drift <= 1e-8 && min_eig >= -1e-7 && factor >= 12 && factor <= 20 && elapsed < 30,
           "integrator integrity",
           fmt("trace drift %.1e, min eigenvalue %.1e, step-halving factor %.2f, %.2f s", drift, min_eig,
               factor, elapsed));
}

void unitary_cross_oracle() {
    const SpinStarParams p = SpinStarParams::detuned(5);
    const SchemeRun run = SchemeRun::adiabatic(p, 0.5, 50.0, NoiseSpec::none());
    // Fixed-step RK4 needs a step resolving the absolute energies here.
    IntegratorPolicy fine;
    fine.min_substeps = 20000;
    const SchemeResult lind = run_scheme(run, fine);
    const SchrodingerResult psi =
        evolve_schrodinger_checked(initial_state(run), AnnealingPath::spin_star(p, run.driver), run.T, fine);
    const double f = psi.state.amplitudes().dot(lind.final_state.matrix() * psi.state.amplitudes()).real();
    report(f >= 1 - 1e-6 && psi.norm_drift <= 1e-8, "unitary-limit cross-oracle",
           fmt("fidelity(Lindblad, Schrodinger) = 1 - %.1e, norm drift %.1e", 1 - f, psi.norm_drift));
}

void depolarizing_closed_form() {
    const double T1 = 40.0;
    const Trajectory traj = evolve_lindblad(DensityMatrix::pure(spin_up()),
                                            AnnealingPath::constant(HermitianOperator::zero(2)), T1 / 4,
                                            NoiseSpec{T1, {0}}, {});
    const double rz = expectation(traj.final_state(), pauli_matrix(Pauli::z));
    report(std::abs(rz - std::exp(-1.0)) <= 1e-4, "depolarizing closed form",
           fmt("r_z(T1/4) = %.10f vs exp(-1) = %.10f", rz, std::exp(-1.0)));
}

void noiseless_adiabatic_success() {
    const SpinStarParams p = SpinStarParams::detuned(5);
    bool pass = true;
    std::string detail;
    for (double b : {0.5, 0.9}) {
        auto F = [&](double T) { return run_scheme(SchemeRun::adiabatic(p, b, T, NoiseSpec::none()), {}).fidelity; };
        // Double T until three consecutive doublings all stay at or above 0.99.
        double T = 12.5, threshold = 0.0;
        std::vector<double> seq;
        while (T <= 3200.0) {
            seq.push_back(F(T));
            const std::size_t k = seq.size();
            if (k >= 3 && seq[k - 1] >= 0.99 && seq[k - 2] >= 0.99 && seq[k - 3] >= 0.99) {
                threshold = T / 4;
                break;
            }
            T *= 2;
        }
        pass = pass && threshold > 0.0;
        detail += fmt("b=%.1f: F >= 0.99 from T=%.1f (F=%.5f, %.5f, %.5f); ", b, threshold,
                      seq[seq.size() - 3], seq[seq.size() - 2], seq.back());
    }
    report(pass, "noiseless adiabatic success", detail);
}

struct Optimum {
    double tau, F;
};

using OptimumTable = std::map<std::pair<double, double>, Optimum>;  // (b or -1, T1) -> optimum

OptimumTable optimize_grid(const ExperimentConfig& c) {
    OptimumTable table;
    for (const OptimumRow& row : compute_optima(c)) {
        if (!row.result) throw NumericalError("optimization failed: " + row.error);
        table[{std::isnan(row.task.b) ? -1.0 : row.task.b, row.task.T1}] = {row.result->tau, row.result->F_max};
    }
    return table;
}

void fig4a(const OptimumTable& t, const std::vector<double>& t1s) {
    bool ordered = true;
    std::string violations;
    for (double T1 : t1s) {
        const double nonad = t.at({-1.0, T1}).F;
        for (double b : {0.1, 0.5, 0.9}) {
            const double f = t.at({b, T1}).F;
            if (f < nonad) {
                ordered = false;
                violations += fmt(" [T1=%g b=%.1f: %.4f < %.4f]", T1, b, f, nonad);
            }
        }
    }
    const double top = t1s.back();
    double best_high = 0.0;
    for (double b : {0.1, 0.5, 0.9}) best_high = std::max(best_high, t.at({b, top}).F);
    std::string table;
    for (double T1 : t1s) {
        table += fmt(" T1=%g: nonad %.4f, b=0.1 %.4f, b=0.5 %.4f, b=0.9 %.4f;", T1, t.at({-1.0, T1}).F,
                     t.at({0.1, T1}).F, t.at({0.5, T1}).F, t.at({0.9, T1}).F);
    }
    report(ordered, "Fig. 4a ordering (adiabatic F_max >= nonadiabatic F_max at every T1)",
           ordered ? "holds;" + table : "violated at" + violations);
    report(best_high >= 0.99, "Fig. 4a convergence (adiabatic F_max at T1=1e5 >= 0.99)",
           fmt("best adiabatic F_max at T1=%g is %.5f", top, best_high));
    note("Fig. 4a F_max table", table);
}

void fig7(const OptimumTable& t) {
    const double tau3 = t.at({0.1, 1e3}).tau;
    const double tau4 = t.at({0.1, 1e4}).tau;
    const bool tau_ok = std::abs(tau3 / 17.21 - 1) <= 0.1 && std::abs(tau4 / 196.0 - 1) <= 0.1;
    report(tau_ok, "Fig. 7 optimal times (b=0.1, within 10% of 17.21 and 196.0)",
           fmt("tau(T1=1e3) = %.3f (%+.1f%%), tau(T1=1e4) = %.3f (%+.1f%%)", tau3, 100 * (tau3 / 17.21 - 1), tau4,
               100 * (tau4 / 196.0 - 1)));

    const SpinStarParams p = SpinStarParams::detuned(5);
    IntegratorPolicy policy;
    policy.sample_count = 201;
    auto trace_stats = [&](double T1, double T) {
        const SchemeRun run = SchemeRun::adiabatic(p, 0.1, T, NoiseSpec::satellites(5, T1));
        const PopulationTrace tr = instantaneous_populations(run_scheme(run, policy).trajectory, run);
        double lo = 1.0, gs_max = 0.0;
        for (std::size_t i = 0; i < tr.times.size(); ++i) {
            lo = std::min(lo, tr.levels[i][1].population);
            gs_max = std::max(gs_max, tr.levels[i][0].population);
        }
        return std::array<double, 3>{lo, tr.levels.back()[1].population, gs_max};
    };
    const auto a = trace_stats(1e3, tau3);
    const auto b = trace_stats(1e4, tau4);
    const bool revival = a[0] < 0.5 && a[1] > 0.8;
    const bool absent = !(b[0] < 0.5 && b[1] > 0.8) && b[0] >= 0.5;
    report(revival && absent, "Fig. 7 revival (T1=1e3: min P_1ES < 0.5 and P_1ES(T) > 0.8; T1=1e4: none)",
           fmt("T1=1e3: min P_1ES %.3f, P_1ES(T) %.3f, max P_GS %.3f; T1=1e4: min P_1ES %.3f, P_1ES(T) %.3f, "
               "max P_GS %.3f",
               a[0], a[1], a[2], b[0], b[1], b[2]));
}

void nonadiabatic_tau_stability(const OptimumTable& t, const std::vector<double>& t1s) {
    std::vector<double> taus;
    for (double T1 : t1s) taus.push_back(t.at({-1.0, T1}).tau);
    const double mean = std::accumulate(taus.begin(), taus.end(), 0.0) / static_cast<double>(taus.size());
    double var = 0.0;
    for (double x : taus) var += (x - mean) * (x - mean);
    const double cv = std::sqrt(var / static_cast<double>(taus.size())) / mean;
    std::string list;
    for (double x : taus) list += fmt(" %.2f", x);
    report(cv < 0.2, "nonadiabatic tau stability (CV < 0.2)", fmt("CV = %.3f, tau =", cv) + list);
}

void multi_peak(int jobs) {
    ExperimentConfig c;
    c.schemes = {Scheme::adiabatic};
    c.b = {0.1};
    c.T1 = {1e3};
    c.curve_grid = {1.0, 300.0, 300, Spacing::linear};
    c.jobs = jobs;
    const CommandOutput out = cmd_fidelity_curve(c);
    std::vector<double> F;
    for (const auto& row : out.table.rows) F.push_back(std::stod(row[2]));
    std::string peaks;
    int count = 0;
    for (std::size_t i = 1; i + 1 < F.size(); ++i) {
        if (F[i] > F[i - 1] && F[i] >= F[i + 1]) {
            ++count;
            if (count <= 6) peaks += " T=" + out.table.rows[i][1] + " F=" + fmt("%.4f", F[i]);
        }
    }
    report(count >= 2 && out.integrity_ok, "multi-peak (b=0.1, T1=1e3, T in [1, 300])",
           fmt("%d local maxima;", count) + peaks);
}

void central_noise_quote(int jobs) {
    ExperimentConfig c;
    c.T1 = {1e3};
    c.include_central_spin = true;
    c.jobs = jobs;
    const OptimumTable t = optimize_grid(c);
    note("central-spin noise on, T1=1e3",
         fmt("nonad F=%.4f tau=%.2f; b=0.1 F=%.4f tau=%.2f; b=0.5 F=%.4f tau=%.2f; b=0.9 F=%.4f tau=%.2f",
             t.at({-1.0, 1e3}).F, t.at({-1.0, 1e3}).tau, t.at({0.1, 1e3}).F, t.at({0.1, 1e3}).tau,
             t.at({0.5, 1e3}).F, t.at({0.5, 1e3}).tau, t.at({0.9, 1e3}).F, t.at({0.9, 1e3}).tau));
}

}  // namespace

int main(int argc, char** argv) {
    bool full = false;
    int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    if (const char* env = std::getenv("EXANNEAL_JOBS")) jobs = std::max(1, std::atoi(env));
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--full") == 0) full = true;
        else if (std::strcmp(argv[i], "--jobs") == 0 && i + 1 < argc) jobs = std::max(1, std::atoi(argv[++i]));
        else {
            std::cerr << "usage: acceptance [--full] [--jobs N]\n";
            return 2;
        }
    }
    const auto start = std::chrono::steady_clock::now();
    try {
        spectrum_oracle();
        gap_formula();
        driver_spectrum();
        integrator_integrity();
        unitary_cross_oracle();
        depolarizing_closed_form();
        noiseless_adiabatic_success();

        ExperimentConfig c;
        c.T1 = full ? default_t1_grid() : std::vector<double>{1e2, 1e3, 1e4, 1e5};
        if (full) {
            // Fig. 7 needs T1 = 1e3 and 1e4 exactly, which the 12-point grid skips.
            c.T1.push_back(1e3);
            c.T1.push_back(1e4);
        }
        c.jobs = jobs;
        const auto sweep_start = std::chrono::steady_clock::now();
        const OptimumTable table = optimize_grid(c);
        note("scheme sweep", fmt("%zu T1 points, %.1f s", c.T1.size(), seconds_since(sweep_start)));
        std::vector<double> grid = full ? default_t1_grid() : c.T1;
        fig4a(table, grid);
        fig7(table);
        nonadiabatic_tau_stability(table, grid);
        multi_peak(jobs);
        central_noise_quote(jobs);
    } catch (const std::exception& e) {
        report(false, "suite", std::string("aborted: ") + e.what());
    }
    std::cout << (failures == 0 ? "ALL PASS" : fmt("%d criteria FAILED", failures))
              << fmt(" (%.1f s)", seconds_since(start)) << std::endl;
    return failures == 0 ? 0 : 1;
}
