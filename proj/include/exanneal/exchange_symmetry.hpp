#pragma once

// Orbits of basis-index pairs (a, b) under simultaneous permutations of a set of
// exchangeable sites. An operator invariant under those permutations is fully
// described by one value per orbit.

#include "exanneal/linalg.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <vector>

namespace exanneal {

class ExchangeSymmetry {
public:
    ExchangeSymmetry(int n_sites, std::vector<int> exchangeable)
        : n_sites_(n_sites), dim_(static_cast<std::size_t>(hilbert_dim(n_sites))),
          exchangeable_(std::move(exchangeable)) {
        if (n_sites < 1 || n_sites > kMaxSites) {
            throw std::invalid_argument("ExchangeSymmetry: n_sites out of range");
        }
        std::vector<bool> is_exchangeable(static_cast<std::size_t>(n_sites), false);
        for (int s : exchangeable_) {
            if (s < 0 || s >= n_sites || is_exchangeable[static_cast<std::size_t>(s)]) {
                throw std::invalid_argument("ExchangeSymmetry: bad exchangeable site list");
            }
            is_exchangeable[static_cast<std::size_t>(s)] = true;
        }
        for (int s = 0; s < n_sites; ++s) {
            if (!is_exchangeable[static_cast<std::size_t>(s)]) fixed_.push_back(s);
        }

        // Key: the bit pairs of fixed sites, then the counts of each (a_i, b_i)
        // pair type over the exchangeable sites.
        std::map<std::vector<int>, std::uint32_t> index;
        table_.resize(dim_ * dim_);
        for (std::size_t a = 0; a < dim_; ++a) {
            for (std::size_t b = 0; b < dim_; ++b) {
                std::vector<int> key;
                key.reserve(fixed_.size() + 4);
                for (int s : fixed_) key.push_back(pair_type(a, b, s));
                std::array<int, 4> counts{};
                for (int s : exchangeable_) ++counts[static_cast<std::size_t>(pair_type(a, b, s))];
                key.insert(key.end(), counts.begin(), counts.end());
                auto [it, inserted] =
                    index.emplace(std::move(key), static_cast<std::uint32_t>(reps_.size()));
                if (inserted) reps_.emplace_back(a, b);
                table_[a * dim_ + b] = it->second;
            }
        }
    }

    int n_sites() const { return n_sites_; }
    std::size_t dim() const { return dim_; }
    std::size_t orbit_count() const { return reps_.size(); }
    std::uint32_t orbit(std::size_t a, std::size_t b) const { return table_[a * dim_ + b]; }
    std::pair<std::size_t, std::size_t> representative(std::size_t o) const { return reps_[o]; }
    const std::vector<int>& exchangeable_sites() const { return exchangeable_; }

    /// Largest spread of entries of m within any orbit.
    double invariance_defect(const ComplexMatrix& m) const {
        double worst = 0.0;
        for (std::size_t a = 0; a < dim_; ++a) {
            for (std::size_t b = 0; b < dim_; ++b) {
                const auto [ra, rb] = reps_[orbit(a, b)];
                worst = std::max(worst, std::abs(m(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) -
                                                 m(static_cast<Eigen::Index>(ra), static_cast<Eigen::Index>(rb))));
            }
        }
        return worst;
    }

    bool is_invariant(const ComplexMatrix& m, double tol = 1e-12) const {
        return invariance_defect(m) <= tol * std::max(1.0, max_abs(m));
    }

    /// True when the noisy set contains all exchangeable sites or none of them.
    bool admits_noise_sites(const std::vector<int>& sites) const {
        std::size_t hit = 0;
        for (int s : exchangeable_) {
            if (std::find(sites.begin(), sites.end(), s) != sites.end()) ++hit;
        }
        return hit == 0 || hit == exchangeable_.size();
    }

    ComplexVector reduce(const ComplexMatrix& m) const {
        ComplexVector v(static_cast<Eigen::Index>(reps_.size()));
        for (std::size_t o = 0; o < reps_.size(); ++o) {
            v(static_cast<Eigen::Index>(o)) = m(static_cast<Eigen::Index>(reps_[o].first),
                                                static_cast<Eigen::Index>(reps_[o].second));
        }
        return v;
    }

    ComplexMatrix expand(const ComplexVector& v) const {
        ComplexMatrix m(static_cast<Eigen::Index>(dim_), static_cast<Eigen::Index>(dim_));
        Complex* out = m.data();  // row-major
        for (std::size_t k = 0; k < dim_ * dim_; ++k) out[k] = v(table_[k]);
        return m;
    }

private:
    int pair_type(std::size_t a, std::size_t b, int site) const {
        const std::size_t m = site_mask(site, n_sites_);
        return ((a & m) ? 2 : 0) + ((b & m) ? 1 : 0);
    }

    int n_sites_;
    std::size_t dim_;
    std::vector<int> exchangeable_;
    std::vector<int> fixed_;
    std::vector<std::uint32_t> table_;
    std::vector<std::pair<std::size_t, std::size_t>> reps_;
};

}  // namespace exanneal
