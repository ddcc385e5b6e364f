#pragma once

// Optimal evolution time: a coarse sweep of F(T) over a grid, followed by a
// Brent refinement of every interior grid maximum.

#include "exanneal/dynamics.hpp"
#include "exanneal/schemes.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <string>
#include <thread>
#include <vector>

namespace exanneal {

enum class Spacing { linear, log };

inline const char* to_string(Spacing s) { return s == Spacing::log ? "log" : "linear"; }

struct SweepGrid {
    double T_min = 0.5;
    double T_max = 2000.0;
    int points = 40;
    Spacing spacing = Spacing::log;

    /// 40 log-spaced points over [0.5/h, min(20 T1, 2000/h)].
    static SweepGrid default_for(double T1, double h = 1.0) {
        return {0.5 / h, std::min(20.0 * T1, 2000.0 / h), 40, Spacing::log};
    }

    void validate() const {
        if (!(T_min > 0.0) || !std::isfinite(T_max) || !(T_max > T_min)) {
            throw std::invalid_argument("SweepGrid: need 0 < T_min < T_max < inf");
        }
        if (points < 8) throw std::invalid_argument("SweepGrid: points must be >= 8");
    }

    std::vector<double> values() const {
        validate();
        std::vector<double> out(static_cast<std::size_t>(points));
        for (int i = 0; i < points; ++i) {
            const double u = static_cast<double>(i) / (points - 1);
            out[static_cast<std::size_t>(i)] =
                spacing == Spacing::log ? T_min * std::pow(T_max / T_min, u)
                                        : T_min + (T_max - T_min) * u;
        }
        out.front() = T_min;
        out.back() = T_max;
        return out;
    }

    bool operator==(const SweepGrid&) const = default;
};

/// One evaluated point. A failed integration leaves ok = false, fidelity NaN
/// and the message in error.
struct SweepRecord {
    double T = 0.0;
    double fidelity = std::numeric_limits<double>::quiet_NaN();
    double trace_drift = 0.0;
    double hermiticity_defect = 0.0;
    long steps = 0;
    bool ok = false;
    std::string error;
};

struct LocalPeak {
    double tau = 0.0;
    double F = 0.0;
    int evaluations = 0;
};

struct OptimumResult {
    double tau = 0.0;
    double F_max = 0.0;
    int evaluations = 0;
    /// No interior grid maximum: tau is the best grid point, at an end of the grid.
    bool boundary = false;
    std::vector<SweepRecord> grid_table;
    std::vector<LocalPeak> peaks;  // one per refined bracket, in grid order
    std::vector<SweepRecord> failures;  // failed refinement evaluations
};

/// Runs fn(0..count-1) on up to `jobs` threads and returns the results in index
/// order. The first exception (by index) is rethrown after all workers finish.
template <typename Fn>
auto parallel_map(std::size_t count, int jobs, Fn&& fn) -> std::vector<decltype(fn(std::size_t{}))> {
    using Result = decltype(fn(std::size_t{}));
    std::vector<Result> results(count);
    std::vector<std::exception_ptr> errors(count);
    const auto workers = static_cast<std::size_t>(std::max(1, jobs));
    if (workers == 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) results[i] = fn(i);
        return results;
    }
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            try {
                results[i] = fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < std::min(workers, count); ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return results;
}

struct BrentResult {
    double x = 0.0;
    double fx = 0.0;
    int evaluations = 0;
};

/// Maximizes f on [a, b] from an interior point x0 with known f(x0) >= f(a), f(b).
/// Parabolic steps with golden-section fallback; stops once x is within 2 tol
/// (absolute) of the maximizer's bracket midpoint.
template <typename F>
BrentResult brent_maximize(F&& f, double a, double x0, double fx0, double b, double tol,
                           int max_iterations = 100) {
    constexpr double golden = 0.3819660112501051;
    double x = x0, w = x0, v = x0;
    double fx = -fx0, fw = -fx0, fv = -fx0;  // minimize -f
    double d = 0.0, e = 0.0;
    int evaluations = 0;
    for (int iter = 0; iter < max_iterations; ++iter) {
        const double mid = 0.5 * (a + b);
        const double tol1 = tol;
        const double tol2 = 2.0 * tol1;
        if (std::abs(x - mid) <= tol2 - 0.5 * (b - a)) break;
        bool golden_step = true;
        if (std::abs(e) > tol1) {
            double r = (x - w) * (fx - fv);
            double q = (x - v) * (fx - fw);
            double p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if (q > 0.0) p = -p;
            q = std::abs(q);
            const double e_prev = e;
            e = d;
            if (std::abs(p) < std::abs(0.5 * q * e_prev) && p > q * (a - x) && p < q * (b - x)) {
                d = p / q;
                const double u = x + d;
                if (u - a < tol2 || b - u < tol2) d = std::copysign(tol1, mid - x);
                golden_step = false;
            }
        }
        if (golden_step) {
            e = (x >= mid) ? a - x : b - x;
            d = golden * e;
        }
        const double u = std::abs(d) >= tol1 ? x + d : x + std::copysign(tol1, d);
        const double fu = -f(u);
        ++evaluations;
        if (fu <= fx) {
            if (u >= x) a = x; else b = x;
            v = w; fv = fw;
            w = x; fw = fx;
            x = u; fx = fu;
        } else {
            if (u < x) a = u; else b = u;
            if (fu <= fw || w == x) {
                v = w; fv = fw;
                w = u; fw = fu;
            } else if (fu <= fv || v == x || v == w) {
                v = u; fv = fu;
            }
        }
    }
    return {x, -fx, evaluations};
}

/// Indices i with a valid F[i] strictly above F[i-1] and not below F[i+1].
inline std::vector<std::size_t> interior_maxima(const std::vector<SweepRecord>& records) {
    std::vector<std::size_t> out;
    for (std::size_t i = 1; i + 1 < records.size(); ++i) {
        const auto& l = records[i - 1];
        const auto& c = records[i];
        const auto& r = records[i + 1];
        if (l.ok && c.ok && r.ok && c.fidelity > l.fidelity && c.fidelity >= r.fidelity) {
            out.push_back(i);
        }
    }
    return out;
}

inline SweepRecord evaluate_fidelity(const SchemeRun& run_template, double T,
                                     const IntegratorPolicy& policy) {
    SweepRecord rec;
    rec.T = T;
    try {
        const SchemeResult result = run_scheme(run_template.with_T(T), policy);
        rec.fidelity = result.fidelity;
        rec.trace_drift = result.trajectory.max_trace_drift;
        rec.hermiticity_defect = result.trajectory.max_hermiticity_defect;
        rec.steps = result.trajectory.steps;
        rec.ok = true;
    } catch (const NumericalError& err) {
        rec.error = err.what();
    }
    return rec;
}

inline std::vector<SweepRecord> sweep_fidelity(const SchemeRun& run_template, const SweepGrid& grid,
                                               const IntegratorPolicy& policy = {}, int jobs = 1) {
    run_template.validate();
    const std::vector<double> ts = grid.values();
    return parallel_map(ts.size(), jobs,
                        [&](std::size_t i) { return evaluate_fidelity(run_template, ts[i], policy); });
}

struct OptimizerOptions {
    /// Relative tolerance on T for the Brent refinement, in [1e-5, 1e-2].
    double rel_tol = 1e-3;
    /// Linear sub-grid points sampled inside each coarse bracket before the
    /// Brent stage; 0 refines the coarse bracket directly. A log grid is coarse
    /// at large T, where F(T) can oscillate faster than the grid spacing.
    int zoom_points = 24;
    int jobs = 1;

    void validate() const {
        if (!(rel_tol >= 1e-5 && rel_tol <= 1e-2)) {
            throw std::invalid_argument("OptimizerOptions: rel_tol must lie in [1e-5, 1e-2]");
        }
        if (zoom_points < 0) throw std::invalid_argument("OptimizerOptions: zoom_points must be >= 0");
    }

    bool operator==(const OptimizerOptions&) const = default;
};

namespace detail {

struct BracketOutcome {
    std::vector<LocalPeak> peaks;
    std::vector<SweepRecord> failures;
    int evaluations = 0;
};

/// Brent in ln T over (l, r) starting at the interior record c.
template <typename Objective>
LocalPeak refine_bracket(const SweepRecord& l, const SweepRecord& c, const SweepRecord& r,
                         Objective& evaluate, double rel_tol, BracketOutcome& out) {
    auto objective = [&](double x) {
        const SweepRecord rec = evaluate(std::exp(x));
        if (!rec.ok) {
            out.failures.push_back(rec);
            return -std::numeric_limits<double>::infinity();
        }
        return rec.fidelity;
    };
    const BrentResult br = brent_maximize(objective, std::log(l.T), std::log(c.T), c.fidelity,
                                          std::log(r.T), 0.5 * rel_tol);
    out.evaluations += br.evaluations;
    // Never report less than the sampled point the bracket started from.
    if (c.fidelity > br.fx) return {c.T, c.fidelity, br.evaluations};
    return {std::exp(br.x), br.fx, br.evaluations};
}

}  // namespace detail

/// Refines a swept table of any objective T -> SweepRecord: every interior
/// maximum of the table is zoomed and Brent-refined, and the global best of all
/// refined peaks and table points is returned.
template <typename Objective>
OptimumResult maximize_sweep(std::vector<SweepRecord> table, Objective&& evaluate,
                             const OptimizerOptions& options = {}) {
    options.validate();
    OptimumResult result;
    result.evaluations = static_cast<int>(table.size());
    const std::vector<std::size_t> brackets = interior_maxima(table);

    const auto outcomes = parallel_map(brackets.size(), options.jobs, [&](std::size_t k) {
        const std::size_t i = brackets[k];
        detail::BracketOutcome out;
        if (options.zoom_points == 0) {
            out.peaks.push_back(detail::refine_bracket(table[i - 1], table[i], table[i + 1], evaluate,
                                                       options.rel_tol, out));
            return out;
        }
        std::vector<SweepRecord> local{table[i - 1], table[i], table[i + 1]};
        const double lo = table[i - 1].T;
        const double hi = table[i + 1].T;
        for (int j = 1; j <= options.zoom_points; ++j) {
            local.push_back(evaluate(lo + (hi - lo) * j / (options.zoom_points + 1)));
            ++out.evaluations;
            if (!local.back().ok) out.failures.push_back(local.back());
        }
        std::stable_sort(local.begin(), local.end(),
                         [](const SweepRecord& x, const SweepRecord& y) { return x.T < y.T; });
        for (std::size_t j : interior_maxima(local)) {
            out.peaks.push_back(detail::refine_bracket(local[j - 1], local[j], local[j + 1], evaluate,
                                                       options.rel_tol, out));
        }
        if (out.peaks.empty()) out.peaks.push_back({table[i].T, table[i].fidelity, 0});
        return out;
    });

    for (const auto& o : outcomes) {
        result.peaks.insert(result.peaks.end(), o.peaks.begin(), o.peaks.end());
        result.evaluations += o.evaluations;
        result.failures.insert(result.failures.end(), o.failures.begin(), o.failures.end());
    }

    result.F_max = -std::numeric_limits<double>::infinity();
    for (const auto& peak : result.peaks) {
        if (peak.F > result.F_max) {
            result.F_max = peak.F;
            result.tau = peak.tau;
        }
    }
    // Without interior maxima, or when F keeps rising to a grid end, the best
    // table point wins and the result is flagged as a boundary optimum.
    result.boundary = result.peaks.empty();
    for (const auto& rec : table) {
        if (rec.ok && rec.fidelity > result.F_max) {
            result.F_max = rec.fidelity;
            result.tau = rec.T;
            result.boundary = true;
        }
    }
    if (!std::isfinite(result.F_max)) throw NumericalError("maximize: every grid point failed");
    result.grid_table = std::move(table);
    return result;
}

inline OptimumResult maximize_fidelity(const SchemeRun& run_template, const SweepGrid& grid,
                                       const OptimizerOptions& options = {},
                                       const IntegratorPolicy& policy = {}) {
    std::vector<SweepRecord> table = sweep_fidelity(run_template, grid, policy, options.jobs);
    return maximize_sweep(
        std::move(table), [&](double T) { return evaluate_fidelity(run_template, T, policy); },
        options);
}

}  // namespace exanneal
