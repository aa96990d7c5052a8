#pragma once

// 1-nearest-medoid classification with an outlier distance cutoff.

#include "clustering.hpp"
#include "dtw.hpp"
#include "labels.hpp"
#include "series.hpp"

#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace popshape {

inline constexpr double kDefaultKnnThreshold = 5.0;

class EmptyIndexError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct MedoidEntry {
    std::vector<double> values;
    CurveLabel label = CurveLabel::Outlier;
    std::size_t cluster_id = 0;
};

struct MedoidIndex {
    std::vector<MedoidEntry> entries;

    bool empty() const noexcept { return entries.empty(); }
    std::size_t size() const noexcept { return entries.size(); }
};

/// One entry per labeled cluster, demoted clusters included (they carry Outlier).
/// `series` is indexed by leaf.
inline MedoidIndex build_medoid_index(std::span<const LabeledCluster> clusters, std::span<const NormalizedSeries> series) {
    MedoidIndex index;
    for (const auto& c : clusters) {
        index.entries.push_back({series[c.medoid].values, c.label, c.id});
    }
    return index;
}

struct KnnResult {
    CurveLabel label = CurveLabel::Outlier;
    /// Cluster id of the nearest medoid.
    std::size_t nearest = 0;
    double distance = std::numeric_limits<double>::infinity();
};

/// Nearest medoid by DTW; Outlier when even the nearest is farther than the threshold.
/// Equal distances resolve to the lowest cluster id, so entry order does not matter.
inline KnnResult classify_knn(std::span<const double> s, const MedoidIndex& index,
                              double min_distance_threshold = kDefaultKnnThreshold, const DtwOptions& options = {}) {
    if (index.empty()) {
        throw EmptyIndexError("medoid index is empty");
    }
    KnnResult best;
    bool first = true;
    for (const auto& entry : index.entries) {
        const double d = dtw_distance(s, entry.values, options);
        if (first || d < best.distance || (d == best.distance && entry.cluster_id < best.nearest)) {
            best.distance = d;
            best.nearest = entry.cluster_id;
            best.label = entry.label;
            first = false;
        }
    }
    if (best.distance > min_distance_threshold) {
        best.label = CurveLabel::Outlier;
    }
    return best;
}

inline KnnResult classify_knn(const NormalizedSeries& s, const MedoidIndex& index,
                              double min_distance_threshold = kDefaultKnnThreshold, const DtwOptions& options = {}) {
    return classify_knn(s.view(), index, min_distance_threshold, options);
}

} // namespace popshape
