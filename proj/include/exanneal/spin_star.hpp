#pragma once

// Spin-star model: one central spin (site 0) flip-flop coupled to N satellite
// spins (sites 1..N) under a uniform longitudinal field h/2.

#include "exanneal/linalg.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace exanneal {

struct SpinStarParams {
    int N = 5;
    double h = 1.0;
    double J = 0.0;

    int n_sites() const { return N + 1; }
    Eigen::Index dim() const { return hilbert_dim(N + 1); }

    /// J = h / (2 sqrt(N)): ground/first-excited gap h/2.
    static SpinStarParams detuned(int n, double h = 1.0) {
        return {n, h, h / (2.0 * std::sqrt(static_cast<double>(n)))};
    }
    /// J = 4h / (5 sqrt(N)): ground/first-excited gap h/5.
    static SpinStarParams nearly_degenerate(int n, double h = 1.0) {
        return {n, h, 4.0 * h / (5.0 * std::sqrt(static_cast<double>(n)))};
    }

    /// Throws std::invalid_argument for N < 1, N + 1 > kMaxSites, or h <= 0.
    void validate() const {
        if (N < 1) throw std::invalid_argument("SpinStarParams: N must be >= 1");
        if (N + 1 > kMaxSites) {
            throw std::invalid_argument("SpinStarParams: N + 1 = " + std::to_string(N + 1) +
                                        " sites exceeds dense storage limit of " +
                                        std::to_string(kMaxSites));
        }
        if (!(h > 0.0) || !std::isfinite(h)) {
            throw std::invalid_argument("SpinStarParams: h must be positive and finite");
        }
        if (!std::isfinite(J)) throw std::invalid_argument("SpinStarParams: J must be finite");
    }

    /// Warning text when J sqrt(N) >= h, i.e. the first excited level is no
    /// longer guaranteed to sit directly above the ground state.
    std::optional<std::string> regime_warning() const {
        if (std::abs(J) * std::sqrt(static_cast<double>(N)) >= h) {
            return "J*sqrt(N) >= h: outside the regime where the first excited state is "
                   "the S = N/2, Sz = -S+1 level";
        }
        return std::nullopt;
    }

    double gap() const { return h - J * std::sqrt(static_cast<double>(N)); }

    bool operator==(const SpinStarParams&) const = default;
};

enum class Branch { minus, plus, edge };

inline const char* to_string(Branch b) {
    switch (b) {
        case Branch::minus: return "minus";
        case Branch::plus: return "plus";
        case Branch::edge: return "edge";
    }
    return "?";
}

/// One closed-form level of the S = N/2 sector. Half-integers are stored
/// doubled (two_S = 2S, two_Sz = 2Sz) so they stay exact.
struct AnalyticLevel {
    int two_S = 0;
    int two_Sz = 0;
    Branch branch = Branch::edge;
    double energy = 0.0;

    double S() const { return two_S / 2.0; }
    double Sz() const { return two_Sz / 2.0; }
};

enum class DriverKind { adiabatic_inhomogeneous, nonadiabatic_transverse };

/// Both drivers have the form V = h(-b sx_0 - sum_{i>=1} sx_i). The adiabatic
/// one needs b in (0, 1) so that its first excited state is nondegenerate. The
/// nonadiabatic one defaults to b = 0 (no central-spin field); b = 1 gives the
/// uniform transverse field on every spin.
struct DriverSpec {
    DriverKind kind = DriverKind::adiabatic_inhomogeneous;
    double b = 0.5;

    static DriverSpec adiabatic(double b) { return {DriverKind::adiabatic_inhomogeneous, b}; }
    static DriverSpec nonadiabatic(double central_field = 0.0) {
        return {DriverKind::nonadiabatic_transverse, central_field};
    }

    void validate() const {
        if (kind == DriverKind::adiabatic_inhomogeneous && !(b > 0.0 && b < 1.0)) {
            throw std::invalid_argument("DriverSpec: b must lie in (0, 1) for the adiabatic driver");
        }
        if (kind == DriverKind::nonadiabatic_transverse && !(b >= 0.0 && b <= 1.0)) {
            throw std::invalid_argument(
                "DriverSpec: central field must lie in [0, 1] for the nonadiabatic driver");
        }
    }

    bool operator==(const DriverSpec&) const = default;
};

inline HermitianOperator build_problem_hamiltonian(const SpinStarParams& p) {
    p.validate();
    const int n = p.n_sites();
    const Eigen::Index dim = p.dim();
    ComplexMatrix h = ComplexMatrix::Zero(dim, dim);
    for (int i = 0; i <= p.N; ++i) h += 0.5 * p.h * embed_site(Pauli::z, i, n);
    if (p.J != 0.0) {
        const ComplexMatrix up0 = embed_site(Pauli::plus, 0, n);
        const ComplexMatrix down0 = embed_site(Pauli::minus, 0, n);
        for (int i = 1; i <= p.N; ++i) {
            h += p.J * (up0 * embed_site(Pauli::minus, i, n) +
                        down0 * embed_site(Pauli::plus, i, n));
        }
    }
    return HermitianOperator(std::move(h));
}

/// All 2(2S+1) closed-form levels of the S = N/2 sector: the paired branches
/// E+-(Sz) = h(Sz - 1/2) +- J sqrt(S(S+1) - Sz(Sz-1)) for Sz = -S+1..S, and the
/// edge levels -h(S + 1/2) (Sz = -S) and +h(S + 1/2) (Sz = S). Sorted by energy.
inline std::vector<AnalyticLevel> analytic_spectrum(const SpinStarParams& p) {
    p.validate();
    const int two_S = p.N;
    const double S = two_S / 2.0;
    std::vector<AnalyticLevel> levels;
    levels.push_back({two_S, -two_S, Branch::edge, -p.h * (S + 0.5)});
    for (int two_Sz = -two_S + 2; two_Sz <= two_S; two_Sz += 2) {
        const double Sz = two_Sz / 2.0;
        const double split = p.J * std::sqrt(S * (S + 1.0) - Sz * (Sz - 1.0));
        const double centre = p.h * (Sz - 0.5);
        levels.push_back({two_S, two_Sz, Branch::minus, centre - split});
        levels.push_back({two_S, two_Sz, Branch::plus, centre + split});
    }
    levels.push_back({two_S, two_S, Branch::edge, p.h * (S + 0.5)});
    std::stable_sort(levels.begin(), levels.end(),
                     [](const AnalyticLevel& a, const AnalyticLevel& b) { return a.energy < b.energy; });
    return levels;
}

/// |S = N/2, Sz = k - N/2> on N spins: equal-amplitude superposition of the
/// basis states with exactly k spins up (k zero bits).
inline StateVector dicke_state(int n, int k) {
    if (n < 1 || n > kMaxSites) throw std::invalid_argument("dicke_state: N out of range");
    if (k < 0 || k > n) {
        throw std::out_of_range("dicke_state: k = " + std::to_string(k) + " outside [0, " +
                                std::to_string(n) + "]");
    }
    const Eigen::Index dim = hilbert_dim(n);
    ComplexVector v = ComplexVector::Zero(dim);
    for (Eigen::Index idx = 0; idx < dim; ++idx) {
        const int downs = std::popcount(static_cast<unsigned>(idx));
        if (n - downs == k) v(idx) = 1.0;
    }
    return StateVector::normalized(std::move(v));
}

inline StateVector spin_up() { return StateVector::basis(2, 0); }
inline StateVector spin_down() { return StateVector::basis(2, 1); }
inline StateVector spin_plus() {
    return StateVector::normalized(ComplexVector::Ones(2));
}
inline StateVector spin_minus() {
    ComplexVector v(2);
    v << 1.0, -1.0;
    return StateVector::normalized(std::move(v));
}

/// |s>^(x)count, for count >= 1.
inline StateVector product_state(const StateVector& single, int count) {
    StateVector out = single;
    for (int i = 1; i < count; ++i) out = out.tensor(single);
    return out;
}

enum class TargetLevel { ground, first_excited };

namespace detail {
inline double eigen_residual(const HermitianOperator& h, const StateVector& psi, double energy) {
    return (h.matrix() * psi.amplitudes() - energy * psi.amplitudes()).norm();
}
}  // namespace detail

/// ground: |down>_0 (x) |N/2, -N/2>.
/// first_excited: (|down>_0 (x) |N/2, -N/2+1> - |up>_0 (x) |N/2, -N/2>) / sqrt(2).
/// Checked against the brute-force Hamiltonian; a residual above 1e-10
/// throws NumericalError.
inline StateVector target_state(const SpinStarParams& p, TargetLevel level) {
    p.validate();
    const double S = p.N / 2.0;
    StateVector psi = spin_down().tensor(dicke_state(p.N, 0));
    double energy = -p.h * (S + 0.5);
    if (level == TargetLevel::first_excited) {
        const ComplexVector a = spin_down().tensor(dicke_state(p.N, 1)).amplitudes();
        const ComplexVector b = spin_up().tensor(dicke_state(p.N, 0)).amplitudes();
        psi = StateVector::normalized(a - b);
        energy = -p.h * (S - 0.5) - p.J * std::sqrt(static_cast<double>(p.N));
    }
    const HermitianOperator hp = build_problem_hamiltonian(p);
    const double residual = detail::eigen_residual(hp, psi, energy);
    if (residual > 1e-10 * std::max(1.0, max_abs(hp.matrix()))) {
        throw NumericalError("target_state: eigen-residual " + std::to_string(residual));
    }
    return psi;
}

/// V = h(-b sx_0 - sum_{i>=1} sx_i). With the default nonadiabatic spec this
/// is -h sum_{i>=1} sx_i, with no central-spin term.
inline HermitianOperator build_driver(const DriverSpec& spec, const SpinStarParams& p) {
    spec.validate();
    p.validate();
    const int n = p.n_sites();
    ComplexMatrix v = ComplexMatrix::Zero(p.dim(), p.dim());
    for (int i = 1; i <= p.N; ++i) v -= p.h * embed_site(Pauli::x, i, n);
    if (spec.b != 0.0) v -= p.h * spec.b * embed_site(Pauli::x, 0, n);
    return HermitianOperator(std::move(v));
}

/// H(t) = (t/T) H_P + (1 - t/T) V.
inline HermitianOperator total_hamiltonian(double t, double T, const HermitianOperator& problem,
                                           const HermitianOperator& driver) {
    if (!(T > 0.0)) throw std::invalid_argument("total_hamiltonian: T must be positive");
    if (!(t >= 0.0 && t <= T)) {
        throw std::out_of_range("total_hamiltonian: t = " + std::to_string(t) +
                                " outside [0, T]");
    }
    if (problem.dim() != driver.dim()) {
        throw std::invalid_argument("total_hamiltonian: dimension mismatch");
    }
    const double s = t / T;
    return HermitianOperator(s * problem.matrix() + (1.0 - s) * driver.matrix());
}

}  // namespace exanneal
