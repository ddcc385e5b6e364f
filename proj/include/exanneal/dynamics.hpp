#pragma once

// Time integration of the annealing dynamics:
//   d rho/dt = -i[H(t), rho] + (1/T1) sum_{i in noisy} sum_{a=x,y,z} (s_i^a rho s_i^a - rho)
// with H(t) = (t/T) H_P + (1 - t/T) V, by fixed-step classical RK4.

#include "exanneal/exchange_symmetry.hpp"
#include "exanneal/linalg.hpp"
#include "exanneal/spin_star.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace exanneal {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Depolarizing noise of strength 1/T1 on a set of sites.
struct NoiseSpec {
    double T1 = kInfinity;
    std::vector<int> noisy_sites;

    /// Sites 1..N, plus the central spin when include_central is set.
    static NoiseSpec satellites(int n, double t1, bool include_central = false) {
        NoiseSpec spec;
        spec.T1 = t1;
        if (include_central) spec.noisy_sites.push_back(0);
        for (int i = 1; i <= n; ++i) spec.noisy_sites.push_back(i);
        return spec;
    }

    static NoiseSpec none() { return {}; }

    double rate() const { return std::isinf(T1) ? 0.0 : 1.0 / T1; }
    bool active() const { return rate() > 0.0 && !noisy_sites.empty(); }

    void validate(int n_sites) const {
        if (!(T1 > 0.0)) throw std::invalid_argument("NoiseSpec: T1 must be positive");
        for (std::size_t k = 0; k < noisy_sites.size(); ++k) {
            const int s = noisy_sites[k];
            if (s < 0 || s >= n_sites) {
                throw std::out_of_range("NoiseSpec: noisy site " + std::to_string(s) +
                                        " outside [0, " + std::to_string(n_sites) + ")");
            }
            if (std::find(noisy_sites.begin(), noisy_sites.begin() + static_cast<long>(k), s) !=
                noisy_sites.begin() + static_cast<long>(k)) {
                throw std::invalid_argument("NoiseSpec: duplicate noisy site");
            }
        }
    }

    bool operator==(const NoiseSpec&) const = default;
};

struct IntegratorPolicy {
    double max_step = kInfinity;
    /// Unset means max(2000, ceil(40 T h)) with h the path's energy scale.
    std::optional<int> min_substeps;
    int sample_count = 2;
    /// Integrate in the satellite-exchange-invariant subspace when the path,
    /// noise and initial state allow it. Results agree with the full-space
    /// integrator to rounding.
    bool exchange_reduction = true;

    void validate() const {
        if (!(max_step > 0.0)) throw std::invalid_argument("IntegratorPolicy: max_step must be > 0");
        if (min_substeps && *min_substeps < 1) {
            throw std::invalid_argument("IntegratorPolicy: min_substeps must be >= 1");
        }
        if (sample_count < 2) throw std::invalid_argument("IntegratorPolicy: sample_count must be >= 2");
    }

    int default_substeps(double T, double energy_scale) const {
        return std::max(2000, static_cast<int>(std::ceil(40.0 * T * energy_scale)));
    }

    /// Number of RK4 steps over [0, T]: the step is min(max_step, T/min_substeps),
    /// rounded so that the sample times land on step boundaries.
    long steps(double T, double energy_scale) const {
        const int substeps = min_substeps.value_or(default_substeps(T, energy_scale));
        const double dt = std::min(max_step, T / substeps);
        long n = static_cast<long>(std::ceil(T / dt - 1e-9));
        n = std::max(n, 1L);
        const long intervals = sample_count - 1;
        return ((n + intervals - 1) / intervals) * intervals;
    }

    bool operator==(const IntegratorPolicy&) const = default;
};

/// The two endpoints of a linear anneal.
struct AnnealingPath {
    HermitianOperator problem;
    HermitianOperator driver;
    double energy_scale = 1.0;  // sets the default step count
    /// Sites the Hamiltonians are symmetric under permuting (checked before use).
    std::vector<int> exchangeable_sites;

    AnnealingPath(HermitianOperator problem_, HermitianOperator driver_, double scale,
                  std::vector<int> exchangeable = {})
        : problem(std::move(problem_)), driver(std::move(driver_)), energy_scale(scale),
          exchangeable_sites(std::move(exchangeable)) {
        if (problem.dim() != driver.dim()) {
            throw std::invalid_argument("AnnealingPath: dimension mismatch");
        }
    }

    static AnnealingPath spin_star(const SpinStarParams& p, const DriverSpec& d) {
        std::vector<int> satellites;
        for (int i = 1; i <= p.N; ++i) satellites.push_back(i);
        return AnnealingPath(build_problem_hamiltonian(p), build_driver(d, p), p.h,
                             std::move(satellites));
    }

    /// Frozen Hamiltonian H at every t.
    static AnnealingPath constant(const HermitianOperator& h, double scale = 1.0) {
        return AnnealingPath(h, h, scale);
    }

    Eigen::Index dim() const { return problem.dim(); }

    HermitianOperator at(double t, double T) const {
        return total_hamiltonian(t, T, problem, driver);
    }
};

struct Trajectory {
    std::vector<double> times;
    std::vector<DensityMatrix> states;
    long steps = 0;
    double max_trace_drift = 0.0;
    double max_hermiticity_defect = 0.0;
    bool exchange_reduced = false;

    const DensityMatrix& final_state() const { return states.back(); }
};

inline constexpr double kDriftErrorThreshold = 1e-6;

/// Reference right-hand side built from explicit dense Pauli matrices.
inline ComplexMatrix lindblad_rhs(const ComplexMatrix& rho, const HermitianOperator& h,
                                  const NoiseSpec& noise) {
    using namespace std::complex_literals;
    if (rho.rows() != rho.cols() || rho.rows() != h.dim()) {
        throw std::invalid_argument("lindblad_rhs: dimension mismatch");
    }
    ComplexMatrix out = -1i * (h.matrix() * rho - rho * h.matrix());
    if (noise.active()) {
        const int n_sites = sites_for_dim(rho.rows());
        noise.validate(n_sites);
        for (int site : noise.noisy_sites) {
            for (Pauli a : {Pauli::x, Pauli::y, Pauli::z}) {
                const ComplexMatrix s = embed_site(a, site, n_sites);
                out += noise.rate() * (s * rho * s - rho);
            }
        }
    }
    return out;
}

inline ComplexMatrix lindblad_rhs(const DensityMatrix& rho, const HermitianOperator& h,
                                  const NoiseSpec& noise) {
    return lindblad_rhs(rho.matrix(), h, noise);
}

/// Fast generator for a linear anneal. Any matrix splits into "XOR groups"
/// H = sum_x D_x F_x, where F_x flips the basis bits in mask x and D_x is
/// diagonal; the spin-star Hamiltonians have a dozen nonzero groups. Both
/// H rho and rho H then reduce to scaled, index-permuted row sweeps, and each
/// Pauli conjugation s^a rho s^a is a sign-weighted double flip. No dense
/// products are formed. Requires Hermitian rho; the output is exactly Hermitian.
class LindbladGenerator {
public:
    LindbladGenerator(const AnnealingPath& path, const NoiseSpec& noise)
        : n_(static_cast<std::size_t>(path.dim())), rate_(noise.rate()) {
        const int n_sites = sites_for_dim(path.dim());
        if (n_sites < 1) throw std::invalid_argument("LindbladGenerator: dimension is not 2^n");
        noise.validate(n_sites);

        const ComplexMatrix& hp = path.problem.matrix();
        const ComplexMatrix& hv = path.driver.matrix();
        for (std::size_t x = 0; x < n_; ++x) {
            Group g;
            g.mask = x;
            bool nonzero = false;
            for (std::size_t a = 0; a < n_; ++a) {
                const auto r = static_cast<Eigen::Index>(a);
                const auto c = static_cast<Eigen::Index>(a ^ x);
                g.problem.push_back(hp(r, c));
                g.driver.push_back(hv(r, c));
                nonzero = nonzero || hp(r, c) != 0.0 || hv(r, c) != 0.0;
                real_ = real_ && hp(r, c).imag() == 0.0 && hv(r, c).imag() == 0.0;
            }
            if (nonzero) groups_.push_back(std::move(g));
        }
        coeff_re_.resize(groups_.size() * n_);
        coeff_im_.resize(groups_.size() * n_);

        if (noise.active()) {
            std::size_t all = 0;
            for (int site : noise.noisy_sites) {
                masks_.push_back(site_mask(site, n_sites));
                all |= masks_.back();
            }
            // Diagonal decay of rho_ab: 2 per noisy site where a and b agree, 4 where they differ.
            decay_.resize(n_ * n_);
            for (std::size_t a = 0; a < n_; ++a) {
                for (std::size_t b = 0; b < n_; ++b) {
                    decay_[a * n_ + b] = rate_ * (2.0 * static_cast<double>(masks_.size()) +
                                                  2.0 * std::popcount((a ^ b) & all));
                }
            }
        }
        product_.resize(2 * n_ * n_);
    }

    Eigen::Index dim() const { return static_cast<Eigen::Index>(n_); }
    std::size_t group_count() const { return groups_.size(); }

    /// out = L(rho) with H = s H_P + (1 - s) V.
    void apply(double s, const ComplexMatrix& rho, ComplexMatrix& out) {
        const std::size_t n = n_;
        const std::size_t w = 2 * n;
        for (std::size_t g = 0; g < groups_.size(); ++g) {
            for (std::size_t a = 0; a < n; ++a) {
                const Complex c = s * groups_[g].problem[a] + (1.0 - s) * groups_[g].driver[a];
                coeff_re_[g * n + a] = c.real();
                coeff_im_[g * n + a] = c.imag();
            }
        }

        // P = H rho, one output row at a time: P_ab = sum_x D_x(a) rho_{a^x, b}.
        const double* __restrict src = reinterpret_cast<const double*>(rho.data());
        double* __restrict prod = product_.data();
        for (std::size_t a = 0; a < n; ++a) {
            double* __restrict o = prod + w * a;
            std::fill(o, o + w, 0.0);
            for (std::size_t g = 0; g < groups_.size(); ++g) {
                const double* __restrict row = src + w * (a ^ groups_[g].mask);
                const double hr = coeff_re_[g * n + a];
                if (real_) {
                    for (std::size_t j = 0; j < w; ++j) o[j] += hr * row[j];
                } else {
                    const double hi = coeff_im_[g * n + a];
                    for (std::size_t j = 0; j < w; j += 2) {
                        o[j] += hr * row[j] - hi * row[j + 1];
                        o[j + 1] += hr * row[j + 1] + hi * row[j];
                    }
                }
            }
        }

        // For Hermitian rho, rho H = P^dagger, so -i[H, rho] = -i (P - P^dagger).
        // Fill the upper triangle and mirror it, folding in the diagonal decay.
        out.resize(dim(), dim());
        double* __restrict dst = reinterpret_cast<double*>(out.data());
        const bool noisy = !decay_.empty();
        for (std::size_t a = 0; a < n; ++a) {
            for (std::size_t b = a; b < n; ++b) {
                const std::size_t ab = 2 * (n * a + b);
                const std::size_t ba = 2 * (n * b + a);
                double re = prod[ab + 1] + prod[ba + 1];
                double im = prod[ba] - prod[ab];
                if (noisy) {
                    const double d = decay_[n * a + b];
                    re -= d * src[ab];
                    im -= d * src[ab + 1];
                }
                dst[ab] = re;
                dst[ab + 1] = im;
                dst[ba] = re;
                dst[ba + 1] = -im;
            }
        }
        if (!noisy) return;

        // x and y conjugations both map rho_ab to rho_{a^m, b^m} (y with a minus
        // sign when the site bits of a and b differ); z keeps rho_ab with that
        // same sign. The differing-bit terms cancel, leaving 2 rho_{a^m,b^m}.
        const double twice_rate = 2.0 * rate_;
        for (std::size_t m : masks_) {
            for (std::size_t a = 0; a < n; ++a) {
                double* __restrict o = dst + w * a;
                const double* __restrict flipped = src + w * (a ^ m);
                const std::size_t bit = a & m;
                for (std::size_t base = 0; base < n; base += 2 * m) {
                    double* __restrict lo = o + 2 * (base + bit);
                    const double* __restrict hi = flipped + 2 * (base + (bit ^ m));
                    for (std::size_t j = 0; j < 2 * m; ++j) lo[j] += twice_rate * hi[j];
                }
            }
        }
    }

private:
    struct Group {
        std::size_t mask = 0;
        std::vector<Complex> problem;  // H_P(a, a^mask)
        std::vector<Complex> driver;   // V(a, a^mask)
    };

    std::size_t n_;
    double rate_;
    bool real_ = true;
    std::vector<Group> groups_;
    std::vector<double> coeff_re_;
    std::vector<double> coeff_im_;
    std::vector<std::size_t> masks_;
    std::vector<double> decay_;
    std::vector<double> product_;
};

/// The generator restricted to operators invariant under permutations of the
/// exchangeable sites, acting on one value per orbit of basis pairs. It is a
/// sparse matrix over orbits, L(s) = s L_P + (1 - s) L_V + L_noise, assembled
/// from the same Lindblad formula evaluated at each orbit representative.
class ReducedLindbladGenerator {
public:
    ReducedLindbladGenerator(const ExchangeSymmetry& sym, const AnnealingPath& path,
                             const NoiseSpec& noise) {
        using namespace std::complex_literals;
        const std::size_t n = sym.dim();
        const std::size_t orbits = sym.orbit_count();
        noise.validate(sym.n_sites());
        if (!sym.admits_noise_sites(noise.noisy_sites)) {
            throw std::invalid_argument("ReducedLindbladGenerator: noise breaks exchange symmetry");
        }
        const double rate = noise.rate();
        std::vector<std::size_t> masks;
        std::size_t all = 0;
        if (noise.active()) {
            for (int site : noise.noisy_sites) {
                masks.push_back(site_mask(site, sym.n_sites()));
                all |= masks.back();
            }
        }

        const ComplexMatrix& hp = path.problem.matrix();
        const ComplexMatrix& hv = path.driver.matrix();
        std::vector<Complex> p(orbits), v(orbits), d(orbits);
        std::vector<bool> used(orbits, false);
        std::vector<std::uint32_t> touched;
        auto touch = [&](std::uint32_t o) {
            if (!used[o]) {
                used[o] = true;
                touched.push_back(o);
            }
        };

        std::vector<Complex> problem_part, driver_part, noise_part;
        row_start_.push_back(0);
        for (std::size_t o = 0; o < orbits; ++o) {
            const auto [a, b] = sym.representative(o);
            const auto ia = static_cast<Eigen::Index>(a);
            const auto ib = static_cast<Eigen::Index>(b);
            for (std::size_t c = 0; c < n; ++c) {
                const auto ic = static_cast<Eigen::Index>(c);
                // -i (H rho)_ab = -i sum_c H_ac rho_cb
                if (hp(ia, ic) != 0.0 || hv(ia, ic) != 0.0) {
                    const std::uint32_t k = sym.orbit(c, b);
                    touch(k);
                    p[k] += -1i * hp(ia, ic);
                    v[k] += -1i * hv(ia, ic);
                }
                // +i (rho H)_ab = +i sum_c rho_ac H_cb
                if (hp(ic, ib) != 0.0 || hv(ic, ib) != 0.0) {
                    const std::uint32_t k = sym.orbit(a, c);
                    touch(k);
                    p[k] += 1i * hp(ic, ib);
                    v[k] += 1i * hv(ic, ib);
                }
            }
            if (!masks.empty()) {
                const std::uint32_t self = static_cast<std::uint32_t>(o);
                touch(self);
                d[self] -= rate * (2.0 * static_cast<double>(masks.size()) +
                                   2.0 * std::popcount((a ^ b) & all));
                for (std::size_t m : masks) {
                    if (((a ^ b) & m) != 0) continue;
                    const std::uint32_t k = sym.orbit(a ^ m, b ^ m);
                    touch(k);
                    d[k] += 2.0 * rate;
                }
            }
            std::sort(touched.begin(), touched.end());
            for (std::uint32_t k : touched) {
                if (p[k] != 0.0 || v[k] != 0.0 || d[k] != 0.0) {
                    col_.push_back(k);
                    problem_part.push_back(p[k]);
                    driver_part.push_back(v[k]);
                    noise_part.push_back(d[k]);
                }
                p[k] = v[k] = d[k] = 0.0;
                used[k] = false;
            }
            touched.clear();
            row_start_.push_back(col_.size());
        }
        // L(s) = base + s * slope with base = L_V + L_noise and slope = L_P - L_V.
        for (std::size_t k = 0; k < col_.size(); ++k) {
            const Complex base = driver_part[k] + noise_part[k];
            const Complex slope = problem_part[k] - driver_part[k];
            base_re_.push_back(base.real());
            base_im_.push_back(base.imag());
            slope_re_.push_back(slope.real());
            slope_im_.push_back(slope.imag());
        }
    }

    std::size_t size() const { return row_start_.size() - 1; }
    std::size_t nonzeros() const { return col_.size(); }

    void apply(double s, const ComplexVector& x, ComplexVector& out) const {
        out.resize(static_cast<Eigen::Index>(size()));
        const double* __restrict in = reinterpret_cast<const double*>(x.data());
        double* __restrict dst = reinterpret_cast<double*>(out.data());
        const std::uint32_t* __restrict col = col_.data();
        const double* __restrict br = base_re_.data();
        const double* __restrict bi = base_im_.data();
        const double* __restrict sr = slope_re_.data();
        const double* __restrict si = slope_im_.data();
        for (std::size_t r = 0; r + 1 < row_start_.size(); ++r) {
            // Four independent partial sums per component keep the FMA
            // pipeline busy; a single accumulator is latency bound.
            double re0 = 0.0, re1 = 0.0, im0 = 0.0, im1 = 0.0;
            double re2 = 0.0, re3 = 0.0, im2 = 0.0, im3 = 0.0;
            std::size_t k = row_start_[r];
            const std::size_t end = row_start_[r + 1];
            for (; k + 1 < end; k += 2) {
                const double cr0 = br[k] + s * sr[k];
                const double ci0 = bi[k] + s * si[k];
                const double cr1 = br[k + 1] + s * sr[k + 1];
                const double ci1 = bi[k + 1] + s * si[k + 1];
                const double xr0 = in[2 * col[k]], xi0 = in[2 * col[k] + 1];
                const double xr1 = in[2 * col[k + 1]], xi1 = in[2 * col[k + 1] + 1];
                re0 += cr0 * xr0;
                re1 -= ci0 * xi0;
                im0 += cr0 * xi0;
                im1 += ci0 * xr0;
                re2 += cr1 * xr1;
                re3 -= ci1 * xi1;
                im2 += cr1 * xi1;
                im3 += ci1 * xr1;
            }
            if (k < end) {
                const double cr = br[k] + s * sr[k];
                const double ci = bi[k] + s * si[k];
                const double xr = in[2 * col[k]], xi = in[2 * col[k] + 1];
                re0 += cr * xr;
                re1 -= ci * xi;
                im0 += cr * xi;
                im1 += ci * xr;
            }
            dst[2 * r] = (re0 + re1) + (re2 + re3);
            dst[2 * r + 1] = (im0 + im1) + (im2 + im3);
        }
    }

private:
    std::vector<std::size_t> row_start_;
    std::vector<std::uint32_t> col_;
    std::vector<double> base_re_, base_im_, slope_re_, slope_im_;
};

namespace detail {

inline double trace_drift(const ComplexMatrix& rho) {
    return std::abs(rho.trace() - Complex(1.0, 0.0));
}

/// Fixed-step classical RK4 over [0, T] with the generator evaluated at the
/// stage fractions t/T, (t + dt/2)/T, (t + dt)/T. `sample(step, y)` is called
/// every `stride` steps.
template <typename State, typename Apply, typename Sample>
void rk4(State y, long steps, long stride, double T, Apply&& apply, Sample&& sample) {
    const double dt = T / static_cast<double>(steps);
    State k1 = y, k2 = y, k3 = y, k4 = y, stage = y;
    auto fraction = [T](double t) { return std::clamp(t / T, 0.0, 1.0); };
    for (long step = 0; step < steps; ++step) {
        const double t = dt * static_cast<double>(step);
        apply(fraction(t), y, k1);
        stage = y + (0.5 * dt) * k1;
        apply(fraction(t + 0.5 * dt), stage, k2);
        stage = y + (0.5 * dt) * k2;
        apply(fraction(t + 0.5 * dt), stage, k3);
        stage = y + dt * k3;
        apply(fraction(t + dt), stage, k4);
        y += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if ((step + 1) % stride == 0) sample(step + 1, y);
    }
}

}  // namespace detail

/// Classical RK4 with fixed step; H is re-evaluated at the stage times
/// t, t + dt/2, t + dt. The state is never renormalized: a trace or
/// Hermiticity drift above 1e-6 throws NumericalError.
inline Trajectory evolve_lindblad(const DensityMatrix& rho0, const AnnealingPath& path, double T,
                                  const NoiseSpec& noise, const IntegratorPolicy& policy,
                                  const DensityMatrix::Tolerances& sample_tolerances = {}) {
    if (!(T > 0.0) || !std::isfinite(T)) {
        throw std::invalid_argument("evolve_lindblad: T must be positive and finite");
    }
    if (rho0.dim() != path.dim()) throw std::invalid_argument("evolve_lindblad: dimension mismatch");
    policy.validate();
    const int n_sites = sites_for_dim(path.dim());
    if (n_sites < 1) throw std::invalid_argument("evolve_lindblad: dimension is not 2^n");
    noise.validate(n_sites);

    const long steps = policy.steps(T, path.energy_scale);
    const long stride = steps / (policy.sample_count - 1);
    const double dt = T / static_cast<double>(steps);

    Trajectory traj;
    traj.steps = steps;
    traj.times.push_back(0.0);
    traj.states.push_back(rho0);
    auto record = [&](long step, const ComplexMatrix& rho) {
        const double t = step == steps ? T : dt * static_cast<double>(step);
        const double drift = detail::trace_drift(rho);
        const double herm = hermiticity_defect(rho);
        traj.max_trace_drift = std::max(traj.max_trace_drift, drift);
        traj.max_hermiticity_defect = std::max(traj.max_hermiticity_defect, herm);
        if (!(drift <= kDriftErrorThreshold) || !(herm <= kDriftErrorThreshold)) {
            throw NumericalError("evolve_lindblad: drift at t = " + std::to_string(t) +
                                 " (trace " + std::to_string(drift) + ", Hermiticity " +
                                 std::to_string(herm) + "); tighten the integrator policy");
        }
        traj.times.push_back(t);
        traj.states.emplace_back(rho, sample_tolerances);
    };

    bool reduced = false;
    if (policy.exchange_reduction && path.exchangeable_sites.size() > 1) {
        ExchangeSymmetry sym(n_sites, path.exchangeable_sites);
        if (sym.admits_noise_sites(noise.noisy_sites) && sym.is_invariant(path.problem.matrix()) &&
            sym.is_invariant(path.driver.matrix()) && sym.is_invariant(rho0.matrix())) {
            ReducedLindbladGenerator generator(sym, path, noise);
            detail::rk4(
                sym.reduce(rho0.matrix()), steps, stride, T,
                [&](double s, const ComplexVector& x, ComplexVector& out) { generator.apply(s, x, out); },
                [&](long step, const ComplexVector& x) { record(step, sym.expand(x)); });
            reduced = true;
        }
    }
    if (!reduced) {
        LindbladGenerator generator(path, noise);
        detail::rk4(
            ComplexMatrix(rho0.matrix()), steps, stride, T,
            [&](double s, const ComplexMatrix& x, ComplexMatrix& out) { generator.apply(s, x, out); },
            [&](long step, const ComplexMatrix& x) { record(step, x); });
    }
    traj.exchange_reduced = reduced;
    return traj;
}

inline Trajectory evolve_lindblad(const DensityMatrix& rho0, const SpinStarParams& p,
                                  const DriverSpec& driver, double T, const NoiseSpec& noise,
                                  const IntegratorPolicy& policy) {
    return evolve_lindblad(rho0, AnnealingPath::spin_star(p, driver), T, noise, policy);
}

struct SchrodingerResult {
    StateVector state;
    double norm_drift = 0.0;  // before the final renormalization
};

/// RK4 on d psi/dt = -i H(t) psi. Fixed-step RK4 shrinks a component of energy
/// E by about (E dt)^6 / 144 per step, so the policy must resolve the absolute
/// energies, not only the gaps. Norm drift above 1e-8 throws NumericalError.
inline SchrodingerResult evolve_schrodinger_checked(const StateVector& psi0,
                                                    const AnnealingPath& path, double T,
                                                    const IntegratorPolicy& policy) {
    using namespace std::complex_literals;
    if (!(T > 0.0) || !std::isfinite(T)) {
        throw std::invalid_argument("evolve_schrodinger: T must be positive and finite");
    }
    if (psi0.dim() != path.dim()) throw std::invalid_argument("evolve_schrodinger: dimension mismatch");
    policy.validate();

    const long steps = policy.steps(T, path.energy_scale);
    const ComplexMatrix& hp = path.problem.matrix();
    const ComplexMatrix& hv = path.driver.matrix();
    ComplexVector psi;
    detail::rk4(
        ComplexVector(psi0.amplitudes()), steps, steps, T,
        [&](double s, const ComplexVector& x, ComplexVector& out) {
            out.noalias() = -1i * (s * (hp * x) + (1.0 - s) * (hv * x));
        },
        [&](long, const ComplexVector& x) { psi = x; });
    const double drift = std::abs(psi.norm() - 1.0);
    if (!(drift <= 1e-8)) {
        throw NumericalError("evolve_schrodinger: norm drift " + std::to_string(drift) +
                             " exceeds 1e-8; tighten the integrator policy");
    }
    return {StateVector::normalized(psi), drift};
}

inline StateVector evolve_schrodinger(const StateVector& psi0, const AnnealingPath& path, double T,
                                      const IntegratorPolicy& policy) {
    return evolve_schrodinger_checked(psi0, path, T, policy).state;
}

inline StateVector evolve_schrodinger(const StateVector& psi0, const SpinStarParams& p,
                                      const DriverSpec& driver, double T,
                                      const IntegratorPolicy& policy) {
    return evolve_schrodinger(psi0, AnnealingPath::spin_star(p, driver), T, policy);
}

}  // namespace exanneal
