#pragma once

// Independent oracles and hand-rolled generators shared by the test suites.

#include <popshape/popshape.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <utility>
#include <vector>

namespace popshape::testing {

/// Seeded source of random test inputs.
class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
    std::size_t index(std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_); }
    double normal(double sigma) { return std::normal_distribution<double>(0.0, sigma)(rng_); }

    std::vector<double> series(std::size_t n, double lo = 0.0, double hi = 1.0) {
        std::vector<double> out(n);
        for (auto& v : out) {
            v = uniform(lo, hi);
        }
        return out;
    }

    /// Symmetric zero-diagonal matrix. With `levels` > 0 the entries are small integers, which forces ties.
    DistanceMatrix matrix(std::size_t n, std::size_t levels = 0) {
        DistanceMatrix d(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                d.set(i, j, levels ? static_cast<double>(index(1, levels)) : uniform(0.0, 10.0));
            }
        }
        return d;
    }

    std::mt19937_64& engine() { return rng_; }

private:
    std::mt19937_64 rng_;
};

inline NormalizedSeries as_series(std::vector<double> values, std::string name = "s") {
    NormalizedSeries s;
    s.values = std::move(values);
    s.species_name = std::move(name);
    return s;
}

// ---------------------------------------------------------------------------
// DTW by explicit enumeration of every monotone warping path.
// ---------------------------------------------------------------------------

namespace detail {

inline void enumerate_paths(std::span<const double> a, std::span<const double> b, std::size_t i, std::size_t j,
                            double acc, double& best) {
    const double d = a[i] - b[j];
    acc += d * d;
    if (i + 1 == a.size() && j + 1 == b.size()) {
        best = std::min(best, acc);
        return;
    }
    if (i + 1 < a.size()) {
        enumerate_paths(a, b, i + 1, j, acc, best);
    }
    if (j + 1 < b.size()) {
        enumerate_paths(a, b, i, j + 1, acc, best);
    }
    if (i + 1 < a.size() && j + 1 < b.size()) {
        enumerate_paths(a, b, i + 1, j + 1, acc, best);
    }
}

} // namespace detail

inline double brute_force_dtw(std::span<const double> a, std::span<const double> b) {
    double best = std::numeric_limits<double>::infinity();
    detail::enumerate_paths(a, b, 0, 0, 0.0, best);
    return std::sqrt(best);
}

// ---------------------------------------------------------------------------
// Complete linkage recomputed from explicit member lists.
// ---------------------------------------------------------------------------

inline Dendrogram naive_linkage(const DistanceMatrix& d) {
    const std::size_t n = d.size();
    struct Node {
        std::size_t id;
        std::vector<std::size_t> members;
    };
    std::vector<Node> live;
    for (std::size_t i = 0; i < n; ++i) {
        live.push_back({i, {i}});
    }
    auto diameter_between = [&](const Node& x, const Node& y) {
        double worst = 0.0;
        for (auto p : x.members) {
            for (auto q : y.members) {
                worst = std::max(worst, d(p, q));
            }
        }
        return worst;
    };
    auto first_leaf = [](const Node& x) { return *std::min_element(x.members.begin(), x.members.end()); };

    Dendrogram tree;
    tree.leaf_count = n;
    while (live.size() > 1) {
        std::size_t bx = 0;
        std::size_t by = 1;
        double best = std::numeric_limits<double>::infinity();
        std::pair<std::size_t, std::size_t> best_key{n, n};
        for (std::size_t x = 0; x < live.size(); ++x) {
            for (std::size_t y = 0; y < live.size(); ++y) {
                if (x == y) {
                    continue;
                }
                const auto key = std::make_pair(first_leaf(live[x]), first_leaf(live[y]));
                if (key.first > key.second) {
                    continue;
                }
                const double h = diameter_between(live[x], live[y]);
                if (h < best || (h == best && key < best_key)) {
                    best = h;
                    best_key = key;
                    bx = x;
                    by = y;
                }
            }
        }
        Node merged{n + tree.merges.size(), live[bx].members};
        merged.members.insert(merged.members.end(), live[by].members.begin(), live[by].members.end());
        tree.merges.push_back({live[bx].id, live[by].id, best, merged.members.size()});
        const std::size_t hi = std::max(bx, by);
        const std::size_t lo = std::min(bx, by);
        live.erase(live.begin() + static_cast<std::ptrdiff_t>(hi));
        live.erase(live.begin() + static_cast<std::ptrdiff_t>(lo));
        live.push_back(std::move(merged));
    }
    return tree;
}

/// Largest pairwise distance inside a member list.
inline double diameter(std::span<const std::size_t> members, const DistanceMatrix& d) {
    double worst = 0.0;
    for (auto p : members) {
        for (auto q : members) {
            worst = std::max(worst, d(p, q));
        }
    }
    return worst;
}

/// Relative error with an absolute floor for values near zero.
inline double relative_error(double got, double want) {
    return std::abs(got - want) / std::max(std::abs(want), 1e-12);
}

} // namespace popshape::testing
