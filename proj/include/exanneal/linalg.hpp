#pragma once

// Dense complex linear algebra for small spin systems (dimension <= 2^8).
//
// Basis convention used throughout the library: site 0 is the leftmost
// (most significant) tensor factor, and a basis bit of 0 is |up> (sigma^z
// eigenvalue +1) while a bit of 1 is |down>.

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace exanneal {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ComplexVector = Eigen::Matrix<Complex, Eigen::Dynamic, 1>;
using RealVector = Eigen::VectorXd;

inline constexpr int kMaxSites = 8;

/// Raised when a computed quantity violates a physical invariant (trace,
/// Hermiticity, norm, eigen-residual). Distinct from bad caller input.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline double max_abs(const ComplexMatrix& m) {
    return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            const Complex z = m(i, j);
            if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
        }
    }
    return true;
}

/// Max-norm distance between m and its adjoint.
inline double hermiticity_defect(const ComplexMatrix& m) {
    return max_abs(m - m.adjoint());
}

inline ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
    ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
    }
    return out;
}

inline ComplexVector kron(const ComplexVector& a, const ComplexVector& b) {
    ComplexVector out(a.size() * b.size());
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        out.segment(i * b.size(), b.size()) = a(i) * b;
    }
    return out;
}

enum class Pauli { identity, x, y, z, plus, minus };

/// Single-qubit matrix. plus/minus are the ladder operators (x +- iy)/2, so
/// plus = |up><down| in the bit-0-is-up basis.
inline ComplexMatrix pauli_matrix(Pauli p) {
    using namespace std::complex_literals;
    ComplexMatrix m = ComplexMatrix::Zero(2, 2);
    switch (p) {
        case Pauli::identity: m(0, 0) = 1.0; m(1, 1) = 1.0; break;
        case Pauli::x: m(0, 1) = 1.0; m(1, 0) = 1.0; break;
        case Pauli::y: m(0, 1) = -1i; m(1, 0) = 1i; break;
        case Pauli::z: m(0, 0) = 1.0; m(1, 1) = -1.0; break;
        case Pauli::plus: m(0, 1) = 1.0; break;
        case Pauli::minus: m(1, 0) = 1.0; break;
    }
    return m;
}

inline Eigen::Index hilbert_dim(int n_sites) { return Eigen::Index{1} << n_sites; }

/// Number of qubits for a 2^n dimension, or -1 if dim is not a power of two.
inline int sites_for_dim(Eigen::Index dim) {
    int n = 0;
    while ((Eigen::Index{1} << n) < dim) ++n;
    return (Eigen::Index{1} << n) == dim ? n : -1;
}

/// Bit mask selecting `site` inside a basis index of an n_sites register.
inline std::size_t site_mask(int site, int n_sites) {
    return std::size_t{1} << (n_sites - 1 - site);
}

/// I (x) ... (x) P (x) ... (x) I with P in tensor slot `site`.
inline ComplexMatrix embed_site(Pauli p, int site, int n_sites) {
    if (n_sites < 1 || n_sites > kMaxSites) {
        throw std::invalid_argument("embed_site: n_sites must be in [1, " +
                                    std::to_string(kMaxSites) + "]");
    }
    if (site < 0 || site >= n_sites) {
        throw std::out_of_range("embed_site: site " + std::to_string(site) +
                                " outside [0, " + std::to_string(n_sites) + ")");
    }
    const ComplexMatrix left = ComplexMatrix::Identity(hilbert_dim(site), hilbert_dim(site));
    const int right_sites = n_sites - site - 1;
    const ComplexMatrix right =
        ComplexMatrix::Identity(hilbert_dim(right_sites), hilbert_dim(right_sites));
    return kron(kron(left, pauli_matrix(p)), right);
}

// ---------------------------------------------------------------------------
// Strong types

/// Unit-norm pure state.
class StateVector {
public:
    static constexpr double kNormTolerance = 1e-10;

    explicit StateVector(ComplexVector amplitudes) : amps_(std::move(amplitudes)) {
        if (amps_.size() == 0) throw std::invalid_argument("StateVector: empty");
        if (!all_finite(amps_)) throw std::invalid_argument("StateVector: non-finite amplitude");
        if (std::abs(amps_.norm() - 1.0) > kNormTolerance) {
            throw std::invalid_argument("StateVector: norm " + std::to_string(amps_.norm()) +
                                        " is not 1");
        }
    }

    static StateVector normalized(ComplexVector v) {
        const double n = v.norm();
        if (!(n > 0.0) || !std::isfinite(n)) {
            throw std::invalid_argument("StateVector::normalized: zero or non-finite vector");
        }
        v /= n;
        return StateVector(std::move(v));
    }

    static StateVector basis(Eigen::Index dim, Eigen::Index index) {
        ComplexVector v = ComplexVector::Zero(dim);
        v(index) = 1.0;
        return StateVector(std::move(v));
    }

    const ComplexVector& amplitudes() const { return amps_; }
    Eigen::Index dim() const { return amps_.size(); }
    Complex operator[](Eigen::Index i) const { return amps_(i); }

    Complex inner(const StateVector& other) const { return amps_.dot(other.amps_); }

    StateVector tensor(const StateVector& right) const {
        return StateVector::normalized(kron(amps_, right.amps_));
    }

private:
    ComplexVector amps_;
};

/// Hermitian matrix (Hamiltonians, observables).
class HermitianOperator {
public:
    static constexpr double kTolerance = 1e-10;

    explicit HermitianOperator(ComplexMatrix m) : m_(std::move(m)) {
        if (m_.rows() != m_.cols()) throw std::invalid_argument("HermitianOperator: not square");
        if (!all_finite(m_)) throw std::invalid_argument("HermitianOperator: non-finite entry");
        const double defect = hermiticity_defect(m_);
        if (defect > kTolerance * std::max(1.0, max_abs(m_))) {
            throw std::invalid_argument("HermitianOperator: not Hermitian (defect " +
                                        std::to_string(defect) + ")");
        }
        // Remove the rounding-level anti-Hermitian part.
        m_ = (0.5 * (m_ + m_.adjoint())).eval();
    }

    static HermitianOperator zero(Eigen::Index dim) {
        return HermitianOperator(ComplexMatrix::Zero(dim, dim));
    }

    const ComplexMatrix& matrix() const { return m_; }
    Eigen::Index dim() const { return m_.rows(); }

    HermitianOperator operator+(const HermitianOperator& o) const {
        return HermitianOperator(m_ + o.m_);
    }
    HermitianOperator scaled(double s) const { return HermitianOperator(s * m_); }

private:
    ComplexMatrix m_;
};

/// Smallest eigenvalue bound check without a full eigendecomposition:
/// rho + eps*I admits a Cholesky factor iff every eigenvalue exceeds -eps.
inline bool eigenvalues_at_least(const ComplexMatrix& m, double minus_bound) {
    ComplexMatrix shifted = m;
    shifted.diagonal().array() += minus_bound;
    Eigen::LLT<ComplexMatrix> llt(shifted);
    return llt.info() == Eigen::Success;
}

/// Hermitian, unit-trace, numerically positive-semidefinite matrix.
class DensityMatrix {
public:
    struct Tolerances {
        double hermiticity = 1e-10;
        double trace = 1e-8;
        double negativity = 1e-8;
    };

    explicit DensityMatrix(ComplexMatrix m) : DensityMatrix(std::move(m), Tolerances{}) {}

    DensityMatrix(ComplexMatrix m, const Tolerances& tol) : m_(std::move(m)) {
        if (m_.rows() != m_.cols() || m_.rows() == 0) {
            throw std::invalid_argument("DensityMatrix: not a non-empty square matrix");
        }
        if (!all_finite(m_)) throw NumericalError("DensityMatrix: non-finite entry");
        const double herm = hermiticity_defect(m_);
        if (herm > tol.hermiticity) {
            throw NumericalError("DensityMatrix: Hermiticity defect " + std::to_string(herm));
        }
        const Complex tr = m_.trace();
        if (std::abs(tr - 1.0) > tol.trace) {
            throw NumericalError("DensityMatrix: trace " + std::to_string(tr.real()) + " + " +
                                 std::to_string(tr.imag()) + "i");
        }
        if (!eigenvalues_at_least(m_, tol.negativity)) {
            throw NumericalError("DensityMatrix: eigenvalue below -" +
                                 std::to_string(tol.negativity));
        }
    }

    static DensityMatrix pure(const StateVector& psi) {
        const ComplexMatrix m = psi.amplitudes() * psi.amplitudes().adjoint();
        return DensityMatrix(m);
    }

    static DensityMatrix maximally_mixed(Eigen::Index dim) {
        return DensityMatrix(ComplexMatrix::Identity(dim, dim) / static_cast<double>(dim));
    }

    const ComplexMatrix& matrix() const { return m_; }
    Eigen::Index dim() const { return m_.rows(); }
    double purity() const { return (m_ * m_).trace().real(); }

private:
    ComplexMatrix m_;
};

// ---------------------------------------------------------------------------
// Hermitian eigensolver

struct EigenSystem {
    RealVector eigenvalues;       // ascending
    ComplexMatrix eigenvectors;   // column k pairs with eigenvalues(k)

    Eigen::Index size() const { return eigenvalues.size(); }
    ComplexVector vector(Eigen::Index k) const { return eigenvectors.col(k); }
};

namespace detail {

inline double off_diagonal_norm(const ComplexMatrix& a) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            if (i != j) sum += std::norm(a(i, j));
        }
    }
    return std::sqrt(sum);
}

/// Rotate column k so that its largest-magnitude component is real-positive.
/// Near-ties resolve to the lowest index so the choice is stable under rounding.
inline void fix_phase(ComplexMatrix& v, Eigen::Index k) {
    double largest = 0.0;
    for (Eigen::Index i = 0; i < v.rows(); ++i) largest = std::max(largest, std::abs(v(i, k)));
    if (largest == 0.0) return;
    for (Eigen::Index i = 0; i < v.rows(); ++i) {
        const double mag = std::abs(v(i, k));
        if (mag >= largest * (1.0 - 1e-9)) {
            const Complex phase = std::conj(v(i, k)) / mag;
            v.col(k) *= phase;
            v(i, k) = mag;
            return;
        }
    }
}

}  // namespace detail

/// Cyclic Jacobi diagonalization of a Hermitian matrix by complex 2x2 unitary
/// rotations. Sweeps until the off-diagonal Frobenius norm drops below
/// 1e-12 * max(1, ||H||_F).
inline EigenSystem hermitian_eigensystem(const ComplexMatrix& h) {
    if (h.rows() != h.cols()) throw std::invalid_argument("hermitian_eigensystem: not square");
    if (!all_finite(h)) throw std::invalid_argument("hermitian_eigensystem: non-finite entry");
    const double scale = std::max(1.0, max_abs(h));
    if (hermiticity_defect(h) > 1e-10 * scale) {
        throw std::invalid_argument("hermitian_eigensystem: input is not Hermitian");
    }

    const Eigen::Index n = h.rows();
    ComplexMatrix a = 0.5 * (h + h.adjoint());
    ComplexMatrix v = ComplexMatrix::Identity(n, n);
    const double threshold = 1e-12 * std::max(1.0, a.norm());

    constexpr int kMaxSweeps = 100;
    int sweep = 0;
    for (; sweep < kMaxSweeps && detail::off_diagonal_norm(a) > threshold; ++sweep) {
        for (Eigen::Index p = 0; p < n - 1; ++p) {
            for (Eigen::Index q = p + 1; q < n; ++q) {
                const Complex apq = a(p, q);
                const double r = std::abs(apq);
                if (r < 1e-300) continue;
                const double app = a(p, p).real();
                const double aqq = a(q, q).real();
                // Skip elements already negligible against both diagonals.
                if (sweep > 3 && std::abs(app) + 100.0 * r == std::abs(app) &&
                    std::abs(aqq) + 100.0 * r == std::abs(aqq)) {
                    a(p, q) = 0.0;
                    a(q, p) = 0.0;
                    continue;
                }
                // W = [[c, s e^{i phi}], [-s e^{-i phi}, c]] zeroes a_pq, where
                // a_pq = r e^{i phi} and tan(theta) follows the real symmetric case.
                const Complex phase = apq / r;
                const double theta = (aqq - app) / (2.0 * r);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                const Complex wpp = c;
                const Complex wpq = s * phase;
                const Complex wqp = -s * std::conj(phase);
                const Complex wqq = c;

                for (Eigen::Index k = 0; k < n; ++k) {
                    const Complex akp = a(k, p);
                    const Complex akq = a(k, q);
                    a(k, p) = akp * wpp + akq * wqp;
                    a(k, q) = akp * wpq + akq * wqq;
                }
                for (Eigen::Index k = 0; k < n; ++k) {
                    const Complex apk = a(p, k);
                    const Complex aqk = a(q, k);
                    a(p, k) = std::conj(wpp) * apk + std::conj(wqp) * aqk;
                    a(q, k) = std::conj(wpq) * apk + std::conj(wqq) * aqk;
                }
                a(p, q) = 0.0;
                a(q, p) = 0.0;
                a(p, p) = a(p, p).real();
                a(q, q) = a(q, q).real();
                for (Eigen::Index k = 0; k < n; ++k) {
                    const Complex vkp = v(k, p);
                    const Complex vkq = v(k, q);
                    v(k, p) = vkp * wpp + vkq * wqp;
                    v(k, q) = vkp * wpq + vkq * wqq;
                }
            }
        }
    }
    if (detail::off_diagonal_norm(a) > threshold) {
        throw NumericalError("hermitian_eigensystem: Jacobi sweeps did not converge");
    }

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index i, Eigen::Index j) {
        return a(i, i).real() < a(j, j).real();
    });

    EigenSystem out;
    out.eigenvalues.resize(n);
    out.eigenvectors.resize(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const Eigen::Index src = order[static_cast<std::size_t>(k)];
        out.eigenvalues(k) = a(src, src).real();
        out.eigenvectors.col(k) = v.col(src);
        detail::fix_phase(out.eigenvectors, k);
    }
    return out;
}

inline EigenSystem hermitian_eigensystem(const HermitianOperator& h) {
    return hermitian_eigensystem(h.matrix());
}

// ---------------------------------------------------------------------------
// Expectation values

namespace detail {
inline double real_checked(Complex value, const char* what) {
    if (std::abs(value.imag()) > 1e-10) {
        throw NumericalError(std::string(what) + ": imaginary residue " +
                             std::to_string(value.imag()));
    }
    return value.real();
}
}  // namespace detail

/// Tr(rho O).
inline double expectation(const DensityMatrix& rho, const ComplexMatrix& op) {
    if (rho.dim() != op.rows() || op.rows() != op.cols()) {
        throw std::invalid_argument("expectation: dimension mismatch");
    }
    // Tr(rho O) = sum_ij rho_ij O_ji, without forming the product.
    const Complex tr = (rho.matrix().array() * op.transpose().array()).sum();
    return detail::real_checked(tr, "expectation");
}

/// <psi|O|psi>.
inline double expectation(const StateVector& psi, const ComplexMatrix& op) {
    if (psi.dim() != op.rows() || op.rows() != op.cols()) {
        throw std::invalid_argument("expectation: dimension mismatch");
    }
    const Complex value = psi.amplitudes().dot(op * psi.amplitudes());
    return detail::real_checked(value, "expectation");
}

inline double expectation(const DensityMatrix& rho, const HermitianOperator& op) {
    return expectation(rho, op.matrix());
}
inline double expectation(const StateVector& psi, const HermitianOperator& op) {
    return expectation(psi, op.matrix());
}

}  // namespace exanneal
