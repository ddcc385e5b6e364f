#pragma once

// The two first-excited-state search protocols.
//
// adiabatic: start in the nondegenerate first excited state |->_0 |+...+> of
//   the inhomogeneous driver and anneal slowly.
// nonadiabatic: start in |+...+> (ground of the transverse driver) and rely on
//   Landau-Zener transitions into the first excited state.

#include "exanneal/dynamics.hpp"
#include "exanneal/linalg.hpp"
#include "exanneal/spin_star.hpp"

#include <string>
#include <vector>

namespace exanneal {

enum class Scheme { adiabatic, nonadiabatic };

inline const char* to_string(Scheme s) {
    return s == Scheme::adiabatic ? "adiabatic" : "nonadiabatic";
}

/// Central-spin preparation for the nonadiabatic scheme; the transverse driver
/// leaves the central spin free, so its ground state is twofold degenerate.
enum class CentralSpinInit { plus, down };

struct SchemeRun {
    Scheme scheme = Scheme::adiabatic;
    SpinStarParams params;
    DriverSpec driver;
    double T = 1.0;
    NoiseSpec noise;
    CentralSpinInit central = CentralSpinInit::plus;

    static SchemeRun adiabatic(const SpinStarParams& p, double b, double T, NoiseSpec noise) {
        return {Scheme::adiabatic, p, DriverSpec::adiabatic(b), T, std::move(noise),
                CentralSpinInit::plus};
    }
    static SchemeRun nonadiabatic(const SpinStarParams& p, double T, NoiseSpec noise,
                                  double central_field = 0.0) {
        return {Scheme::nonadiabatic, p, DriverSpec::nonadiabatic(central_field), T,
                std::move(noise), CentralSpinInit::plus};
    }

    void validate() const {
        params.validate();
        driver.validate();
        noise.validate(params.n_sites());
        if (!(T > 0.0) || !std::isfinite(T)) throw std::invalid_argument("SchemeRun: T must be > 0");
        const bool matches = (scheme == Scheme::adiabatic) ==
                             (driver.kind == DriverKind::adiabatic_inhomogeneous);
        if (!matches) {
            throw std::invalid_argument(std::string("SchemeRun: ") + to_string(scheme) +
                                        " scheme paired with the wrong driver kind");
        }
    }

    SchemeRun with_T(double t) const {
        SchemeRun copy = *this;
        copy.T = t;
        return copy;
    }
};

inline StateVector initial_state(const SchemeRun& run) {
    run.validate();
    const StateVector satellites = product_state(spin_plus(), run.params.N);
    if (run.scheme == Scheme::adiabatic) return spin_minus().tensor(satellites);
    const StateVector central =
        run.central == CentralSpinInit::plus ? spin_plus() : spin_down();
    return central.tensor(satellites);
}

/// <target|rho|target>.
inline double fidelity(const DensityMatrix& rho, const StateVector& target) {
    if (rho.dim() != target.dim()) throw std::invalid_argument("fidelity: dimension mismatch");
    const Complex value = target.amplitudes().dot(rho.matrix() * target.amplitudes());
    return detail::real_checked(value, "fidelity");
}

struct SchemeResult {
    DensityMatrix final_state;
    Trajectory trajectory;
    double fidelity = 0.0;  // against the first excited state of H_P
};

inline SchemeResult run_scheme(const SchemeRun& run, const IntegratorPolicy& policy) {
    run.validate();
    const DensityMatrix rho0 = DensityMatrix::pure(initial_state(run));
    Trajectory traj = evolve_lindblad(rho0, AnnealingPath::spin_star(run.params, run.driver),
                                      run.T, run.noise, policy);
    const StateVector target = target_state(run.params, TargetLevel::first_excited);
    const double f = fidelity(traj.final_state(), target);
    DensityMatrix final_state = traj.final_state();
    return {std::move(final_state), std::move(traj), f};
}

struct LevelPopulation {
    double energy = 0.0;
    double population = 0.0;
    int degeneracy = 1;
};

/// Populations of the instantaneous eigenstates of H(t). Levels whose energies
/// agree within 1e-8 (relative to the spectral scale) are merged and reported
/// as one subspace total with its degeneracy.
struct PopulationTrace {
    std::vector<double> times;
    std::vector<std::vector<LevelPopulation>> levels;  // all levels at each sample, ascending
    int reported_levels = 4;

    static std::string label(std::size_t k) {
        if (k == 0) return "GS";
        return std::to_string(k) + "ES";
    }

    /// Sum over every level at sample i; equals Tr rho(t_i).
    double total(std::size_t i) const {
        double sum = 0.0;
        for (const auto& l : levels[i]) sum += l.population;
        return sum;
    }
};

inline std::vector<LevelPopulation> level_populations(const DensityMatrix& rho,
                                                      const HermitianOperator& h) {
    const EigenSystem es = hermitian_eigensystem(h);
    const double tol = 1e-8 * std::max(1.0, std::abs(es.eigenvalues(0)) +
                                                std::abs(es.eigenvalues(es.size() - 1)));
    std::vector<LevelPopulation> out;
    for (Eigen::Index k = 0; k < es.size(); ++k) {
        const ComplexVector v = es.eigenvectors.col(k);
        const double p = v.dot(rho.matrix() * v).real();
        if (!out.empty() && es.eigenvalues(k) - out.back().energy <= tol) {
            out.back().population += p;
            ++out.back().degeneracy;
        } else {
            out.push_back({es.eigenvalues(k), p, 1});
        }
    }
    return out;
}

inline PopulationTrace instantaneous_populations(const Trajectory& traj, const SchemeRun& run,
                                                 int levels = 4) {
    run.validate();
    if (levels < 1) throw std::invalid_argument("instantaneous_populations: levels must be >= 1");
    const AnnealingPath path = AnnealingPath::spin_star(run.params, run.driver);
    PopulationTrace trace;
    trace.reported_levels = levels;
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        const double t = std::min(traj.times[i], run.T);
        trace.times.push_back(t);
        trace.levels.push_back(level_populations(traj.states[i], path.at(t, run.T)));
    }
    return trace;
}

}  // namespace exanneal
