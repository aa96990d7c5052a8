#pragma once

// Agglomerative complete-linkage clustering over a precomputed distance matrix,
// threshold flattening, medoids and purity labeling; plus k-means and silhouette
// diagnostics over raw vectors.

#include "dtw.hpp"
#include "labels.hpp"

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace popshape {

inline constexpr double kDefaultClusterThreshold = 30.0;
inline constexpr double kDefaultPurityThreshold = 0.55;

struct Merge {
    /// Cluster ids: leaves are 0..n-1, the k-th merge creates id n+k.
    /// `left` is the child whose smallest leaf index is lower.
    std::size_t left;
    std::size_t right;
    double height;
    std::size_t size;

    friend bool operator==(const Merge&, const Merge&) = default;
};

struct Dendrogram {
    std::size_t leaf_count = 0;
    std::vector<Merge> merges;
};

/// Complete linkage: repeatedly merge the globally closest pair of clusters, where the distance
/// between clusters is the largest cross-pair distance. Ties go to the pair whose smallest leaf
/// indices are lexicographically lowest.
inline Dendrogram linkage(const DistanceMatrix& d) {
    const std::size_t n = d.size();
    Dendrogram tree;
    tree.leaf_count = n;
    if (n < 2) {
        return tree;
    }
    // Slot i holds the cluster whose smallest leaf is i.
    std::vector<double> dist(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            dist[i * n + j] = d(i, j);
        }
    }
    std::vector<std::size_t> ids(n);
    std::iota(ids.begin(), ids.end(), std::size_t{0});
    std::vector<std::size_t> sizes(n, 1);
    std::vector<std::size_t> active(n);
    std::iota(active.begin(), active.end(), std::size_t{0});

    tree.merges.reserve(n - 1);
    for (std::size_t step = 0; step + 1 < n; ++step) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t bi = active[0];
        std::size_t bj = active[1];
        for (std::size_t x = 0; x < active.size(); ++x) {
            const std::size_t i = active[x];
            const double* row = dist.data() + i * n;
            for (std::size_t y = x + 1; y < active.size(); ++y) {
                const std::size_t j = active[y];
                if (row[j] < best) {
                    best = row[j];
                    bi = i;
                    bj = j;
                }
            }
        }
        tree.merges.push_back({ids[bi], ids[bj], best, sizes[bi] + sizes[bj]});
        for (std::size_t k : active) {
            if (k != bi && k != bj) {
                const double merged = std::max(dist[bi * n + k], dist[bj * n + k]);
                dist[bi * n + k] = merged;
                dist[k * n + bi] = merged;
            }
        }
        ids[bi] = n + step;
        sizes[bi] += sizes[bj];
        active.erase(std::find(active.begin(), active.end(), bj));
    }
    return tree;
}

struct FlatClustering {
    /// Leaf index -> cluster id. Cluster ids follow the order of each cluster's first leaf.
    std::vector<std::size_t> assignments;
    double threshold = 0.0;
    /// Members of each cluster in ascending leaf order.
    std::vector<std::vector<std::size_t>> clusters;
};

/// Cuts the tree into the maximal subtrees whose merge heights are all <= threshold.
inline FlatClustering flatten(const Dendrogram& tree, double threshold) {
    if (threshold < 0.0) {
        throw std::invalid_argument("flatten threshold must be non-negative");
    }
    const std::size_t n = tree.leaf_count;
    // For each node: whether the whole subtree sits at or below the threshold, and its parent.
    const std::size_t nodes = n + tree.merges.size();
    std::vector<bool> within(nodes, true);
    std::vector<std::size_t> parent(nodes, nodes);
    for (std::size_t k = 0; k < tree.merges.size(); ++k) {
        const auto& m = tree.merges[k];
        const std::size_t id = n + k;
        within[id] = within[m.left] && within[m.right] && m.height <= threshold;
        parent[m.left] = id;
        parent[m.right] = id;
    }

    FlatClustering flat;
    flat.threshold = threshold;
    flat.assignments.assign(n, 0);
    std::vector<std::size_t> cluster_of_root(nodes, nodes);
    for (std::size_t leaf = 0; leaf < n; ++leaf) {
        std::size_t root = leaf;
        while (parent[root] != nodes && within[parent[root]]) {
            root = parent[root];
        }
        if (cluster_of_root[root] == nodes) {
            cluster_of_root[root] = flat.clusters.size();
            flat.clusters.emplace_back();
        }
        flat.assignments[leaf] = cluster_of_root[root];
        flat.clusters[cluster_of_root[root]].push_back(leaf);
    }
    return flat;
}

/// Member with the smallest total distance to the other members; lowest leaf index on ties.
inline std::size_t medoid(std::span<const std::size_t> members, const DistanceMatrix& d) {
    if (members.empty()) {
        throw std::invalid_argument("medoid of an empty cluster");
    }
    std::size_t best = members.front();
    double best_sum = std::numeric_limits<double>::infinity();
    for (std::size_t candidate : members) {
        double sum = 0.0;
        for (std::size_t other : members) {
            sum += d(candidate, other);
        }
        if (sum < best_sum || (sum == best_sum && candidate < best)) {
            best_sum = sum;
            best = candidate;
        }
    }
    return best;
}

struct LabeledCluster {
    std::size_t id = 0;
    std::size_t medoid = 0;
    /// Final label: the medoid's fit label, or Outlier when the cluster is not pure enough.
    CurveLabel label = CurveLabel::Outlier;
    /// The medoid's fit label before any demotion.
    CurveLabel medoid_label = CurveLabel::Outlier;
    double purity = 0.0;
    std::vector<std::size_t> members;

    bool demoted() const noexcept { return label != medoid_label; }
};

/// Labels each cluster with its medoid's fit label when strictly more than `purity_threshold`
/// of the members share it; otherwise the whole cluster becomes Outlier.
inline std::vector<LabeledCluster> label_clusters(const FlatClustering& flat, const DistanceMatrix& d,
                                                  std::span<const CurveLabel> fit_labels,
                                                  double purity_threshold = kDefaultPurityThreshold) {
    if (fit_labels.size() != flat.assignments.size()) {
        throw std::invalid_argument("label_clusters needs one fit label per leaf");
    }
    std::vector<LabeledCluster> out;
    out.reserve(flat.clusters.size());
    for (std::size_t c = 0; c < flat.clusters.size(); ++c) {
        LabeledCluster lc;
        lc.id = c;
        lc.members = flat.clusters[c];
        lc.medoid = medoid(lc.members, d);
        lc.medoid_label = fit_labels[lc.medoid];
        const auto matching = std::count_if(lc.members.begin(), lc.members.end(),
                                            [&](std::size_t m) { return fit_labels[m] == lc.medoid_label; });
        lc.purity = static_cast<double>(matching) / static_cast<double>(lc.members.size());
        lc.label = lc.purity > purity_threshold ? lc.medoid_label : CurveLabel::Outlier;
        out.push_back(std::move(lc));
    }
    return out;
}

// ---------------------------------------------------------------------------
// k-means and silhouette
// ---------------------------------------------------------------------------

class InsufficientClustersError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct KMeansResult {
    std::vector<std::size_t> assignments;
    std::vector<std::vector<double>> centroids;
    double inertia = 0.0;
    std::size_t iterations = 0;
};

namespace detail {

inline double squared_euclidean(std::span<const double> a, std::span<const double> b) noexcept {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        sum += d * d;
    }
    return sum;
}

} // namespace detail

/// Lloyd's algorithm with k-means++ seeding. Stops at an assignment fixpoint or after
/// max_iterations. A cluster that empties keeps its previous centroid.
inline KMeansResult kmeans(std::span<const std::vector<double>> xs, std::size_t k, std::uint64_t seed,
                           std::size_t max_iterations = 300) {
    const std::size_t n = xs.size();
    if (k == 0 || k > n) {
        throw std::invalid_argument("kmeans needs 1 <= k <= n");
    }
    const std::size_t dim = xs.front().size();
    for (const auto& x : xs) {
        if (x.size() != dim) {
            throw LengthMismatchError("kmeans needs equal-length vectors");
        }
    }

    std::mt19937_64 rng(seed);
    KMeansResult result;
    std::vector<std::size_t> chosen;
    chosen.push_back(std::uniform_int_distribution<std::size_t>(0, n - 1)(rng));
    std::vector<double> nearest(n);
    for (std::size_t i = 0; i < n; ++i) {
        nearest[i] = detail::squared_euclidean(xs[i], xs[chosen[0]]);
    }
    while (chosen.size() < k) {
        const double total = std::accumulate(nearest.begin(), nearest.end(), 0.0);
        std::size_t pick = n;
        if (total > 0.0) {
            double target = std::uniform_real_distribution<double>(0.0, total)(rng);
            for (std::size_t i = 0; i < n; ++i) {
                if (nearest[i] <= 0.0) {
                    continue;
                }
                pick = i;
                target -= nearest[i];
                if (target < 0.0) {
                    break;
                }
            }
        } else {
            // Every point coincides with a chosen centre.
            for (std::size_t i = 0; i < n; ++i) {
                if (std::find(chosen.begin(), chosen.end(), i) == chosen.end()) {
                    pick = i;
                    break;
                }
            }
        }
        chosen.push_back(pick);
        for (std::size_t i = 0; i < n; ++i) {
            nearest[i] = std::min(nearest[i], detail::squared_euclidean(xs[i], xs[pick]));
        }
    }
    for (std::size_t c : chosen) {
        result.centroids.push_back(xs[c]);
    }

    result.assignments.assign(n, k);
    for (result.iterations = 0; result.iterations < max_iterations; ++result.iterations) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < k; ++c) {
                const double dist = detail::squared_euclidean(xs[i], result.centroids[c]);
                if (dist < best_d) {
                    best_d = dist;
                    best = c;
                }
            }
            changed = changed || result.assignments[i] != best;
            result.assignments[i] = best;
        }
        if (!changed) {
            break;
        }
        std::vector<std::vector<double>> sums(k, std::vector<double>(dim, 0.0));
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            auto& s = sums[result.assignments[i]];
            for (std::size_t t = 0; t < dim; ++t) {
                s[t] += xs[i][t];
            }
            ++counts[result.assignments[i]];
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] > 0) {
                for (std::size_t t = 0; t < dim; ++t) {
                    result.centroids[c][t] = sums[c][t] / static_cast<double>(counts[c]);
                }
            }
        }
    }
    result.inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        result.inertia += detail::squared_euclidean(xs[i], result.centroids[result.assignments[i]]);
    }
    return result;
}

/// Mean silhouette (b - a) / max(a, b) over all samples, where a is the mean distance to the
/// sample's own cluster and b the smallest mean distance to another cluster. Samples in
/// singleton clusters score 0. `dist(i, j)` supplies pairwise distances.
template <class Distance>
    requires std::invocable<Distance&, std::size_t, std::size_t>
double silhouette(std::span<const std::size_t> assignments, Distance&& dist) {
    const std::size_t n = assignments.size();
    std::vector<std::size_t> ids(assignments.begin(), assignments.end());
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    if (ids.size() < 2) {
        throw InsufficientClustersError("silhouette needs at least two non-empty clusters");
    }
    auto dense = [&](std::size_t label) {
        return static_cast<std::size_t>(std::lower_bound(ids.begin(), ids.end(), label) - ids.begin());
    };
    std::vector<std::size_t> cluster(n);
    std::vector<std::size_t> counts(ids.size(), 0);
    for (std::size_t i = 0; i < n; ++i) {
        cluster[i] = dense(assignments[i]);
        ++counts[cluster[i]];
    }

    double total = 0.0;
    std::vector<double> sums(ids.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (counts[cluster[i]] == 1) {
            continue;
        }
        std::fill(sums.begin(), sums.end(), 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) {
                sums[cluster[j]] += dist(i, j);
            }
        }
        const double a = sums[cluster[i]] / static_cast<double>(counts[cluster[i]] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < ids.size(); ++c) {
            if (c != cluster[i]) {
                b = std::min(b, sums[c] / static_cast<double>(counts[c]));
            }
        }
        const double denom = std::max(a, b);
        total += denom > 0.0 ? (b - a) / denom : 0.0;
    }
    return total / static_cast<double>(n);
}

inline double silhouette(std::span<const std::size_t> assignments, const DistanceMatrix& d) {
    if (assignments.size() != d.size()) {
        throw std::invalid_argument("silhouette needs one assignment per matrix row");
    }
    return silhouette(assignments, [&d](std::size_t i, std::size_t j) { return d(i, j); });
}

/// Silhouette under plain Euclidean distance between raw vectors.
inline double silhouette(std::span<const std::size_t> assignments, std::span<const std::vector<double>> xs) {
    if (assignments.size() != xs.size()) {
        throw std::invalid_argument("silhouette needs one assignment per vector");
    }
    return silhouette(assignments,
                      [xs](std::size_t i, std::size_t j) { return std::sqrt(detail::squared_euclidean(xs[i], xs[j])); });
}

struct SilhouettePoint {
    std::size_t k;
    double score;
};

/// k-means silhouette scores over k = k_min..k_max (clamped to the sample count).
inline std::vector<SilhouettePoint> silhouette_sweep(std::span<const std::vector<double>> xs, std::size_t k_min,
                                                     std::size_t k_max, std::uint64_t seed) {
    std::vector<SilhouettePoint> out;
    k_min = std::max<std::size_t>(k_min, 2);
    k_max = std::min(k_max, xs.size());
    for (std::size_t k = k_min; k <= k_max; ++k) {
        const auto km = kmeans(xs, k, seed);
        std::vector<std::size_t> used(km.assignments);
        std::sort(used.begin(), used.end());
        if (std::unique(used.begin(), used.end()) - used.begin() < 2) {
            continue;
        }
        out.push_back({k, silhouette(km.assignments, xs)});
    }
    return out;
}

} // namespace popshape
