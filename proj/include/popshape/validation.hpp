#pragma once

// Two-method agreement experiment: curve-fit labels versus hierarchical clustering
// with 1-nearest-medoid classification of a held-out split.

#include "clustering.hpp"
#include "curve_fit.hpp"
#include "dtw.hpp"
#include "knn.hpp"
#include "labels.hpp"
#include "parallel.hpp"
#include "series.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace popshape {

inline constexpr double kDefaultSplitRatio = 0.70;

struct ExperimentConfig {
    std::size_t sim_length = kDefaultSimLength;
    double split_ratio = kDefaultSplitRatio;
    double cluster_threshold = kDefaultClusterThreshold;
    double purity_threshold = kDefaultPurityThreshold;
    double knn_threshold = kDefaultKnnThreshold;
    double fit_error_threshold = kDefaultFitErrorThreshold;
    double dying_epsilon = kDefaultDyingEpsilon;
    std::uint64_t rng_seed = 0;

    /// Throws std::invalid_argument describing the first bad field.
    void validate() const {
        if (sim_length == 0) {
            throw std::invalid_argument("sim_length must be positive");
        }
        if (!(split_ratio > 0.0 && split_ratio < 1.0)) {
            throw std::invalid_argument("split_ratio must lie in (0, 1)");
        }
        // A zero cut height is allowed: it leaves every series in its own cluster.
        if (!(cluster_threshold >= 0.0) || !std::isfinite(cluster_threshold)) {
            throw std::invalid_argument("cluster_threshold must be finite and non-negative");
        }
        if (!(purity_threshold > 0.0 && purity_threshold < 1.0)) {
            throw std::invalid_argument("purity_threshold must lie in (0, 1)");
        }
        if (!(knn_threshold > 0.0)) {
            throw std::invalid_argument("knn_threshold must be positive");
        }
        if (!(fit_error_threshold > 0.0)) {
            throw std::invalid_argument("fit_error_threshold must be positive");
        }
        if (!(dying_epsilon > 0.0 && dying_epsilon < 1.0)) {
            throw std::invalid_argument("dying_epsilon must lie in (0, 1)");
        }
    }

    FitOptions fit_options() const {
        FitOptions options;
        options.fit_error_threshold = fit_error_threshold;
        options.dying_epsilon = dying_epsilon;
        return options;
    }
};

class EmptyMatrixError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Rows are the curve-fit ("expected") label, columns the clustering/KNN classification.
class ConfusionMatrix {
public:
    void add(CurveLabel expected, CurveLabel predicted, std::size_t count = 1) noexcept {
        counts_[index_of(expected)][index_of(predicted)] += count;
    }

    std::size_t at(CurveLabel expected, CurveLabel predicted) const noexcept {
        return counts_[index_of(expected)][index_of(predicted)];
    }

    std::size_t row_total(CurveLabel expected) const noexcept {
        const auto& row = counts_[index_of(expected)];
        return std::accumulate(row.begin(), row.end(), std::size_t{0});
    }

    std::size_t correct(CurveLabel expected) const noexcept { return at(expected, expected); }
    std::size_t incorrect(CurveLabel expected) const noexcept { return row_total(expected) - correct(expected); }

    std::size_t trace() const noexcept {
        std::size_t sum = 0;
        for (auto label : kAllLabels) {
            sum += correct(label);
        }
        return sum;
    }

    std::size_t total() const noexcept {
        std::size_t sum = 0;
        for (auto label : kAllLabels) {
            sum += row_total(label);
        }
        return sum;
    }

    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

private:
    std::array<std::array<std::size_t, kLabelCount>, kLabelCount> counts_{};
};

/// Percentage of series on the diagonal: 100 * trace / total.
inline double agreement(const ConfusionMatrix& cm) {
    const std::size_t total = cm.total();
    if (total == 0) {
        throw EmptyMatrixError("confusion matrix is empty");
    }
    return 100.0 * static_cast<double>(cm.trace()) / static_cast<double>(total);
}

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/// Seeded uniform partition of 0..n-1. The test share is rounded down; both halves come back sorted.
inline SplitIndices split(std::size_t n, double ratio, std::uint64_t seed) {
    if (n == 0) {
        throw std::invalid_argument("cannot split an empty dataset");
    }
    if (!(ratio > 0.0 && ratio < 1.0)) {
        throw std::invalid_argument("split ratio must lie in (0, 1)");
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    // The epsilon absorbs representation error such as 10 * (1 - 0.7) = 3.0000000000000004.
    const auto test_count = static_cast<std::size_t>(std::floor(static_cast<double>(n) * (1.0 - ratio) + 1e-9));
    SplitIndices out;
    out.test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(test_count));
    out.train.assign(order.begin() + static_cast<std::ptrdiff_t>(test_count), order.end());
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

struct ClusterSummary {
    std::size_t id = 0;
    std::size_t size = 0;
    /// Index of the medoid in the experiment's input list.
    std::size_t medoid = 0;
    CurveLabel medoid_label = CurveLabel::Outlier;
    CurveLabel label = CurveLabel::Outlier;
    double purity = 0.0;
    /// Members as indices into the experiment's input list.
    std::vector<std::size_t> members;
};

struct TestPrediction {
    std::size_t series = 0;
    CurveLabel expected = CurveLabel::Outlier;
    CurveLabel predicted = CurveLabel::Outlier;
    /// Nearest medoid's cluster id and distance; empty when the constant rule decided.
    std::optional<std::size_t> nearest_cluster;
    std::optional<double> distance;
};

struct ValidationReport {
    std::string dataset_tag;
    std::size_t series_count = 0;
    std::size_t train_size = 0;
    std::size_t test_size = 0;
    /// Training series that entered clustering (constants removed).
    std::size_t clustered_size = 0;
    std::size_t cluster_count = 0;
    std::size_t demoted_count = 0;
    std::vector<ClusterSummary> clusters;
    /// Percentage of clustered training series whose fit label equals their final cluster label.
    std::optional<double> training_agreement;
    double test_agreement = 0.0;
    ConfusionMatrix confusion;
    std::vector<TestPrediction> predictions;
};

struct ExperimentResult {
    ValidationReport report;
    std::vector<FitResult> fits;
    SplitIndices split;
    /// Input indices of the clustered training series; leaf i of the dendrogram is clustered[i].
    std::vector<std::size_t> clustered;
    Dendrogram dendrogram;
    FlatClustering flat;
    MedoidIndex medoids;
};

/// Receives (stage name, elapsed seconds) after each stage.
using StageObserver = std::function<void(std::string_view, double)>;

/// Full pipeline: fit-label every series, split, cluster the non-constant training series
/// (DTW, complete linkage, threshold cut, medoids, purity labels), then classify the test
/// series by nearest medoid (constants short-circuit to Constant) and compare with the fit labels.
inline ExperimentResult run_experiment(std::span<const NormalizedSeries> xs, const ExperimentConfig& cfg,
                                       std::size_t jobs = 1, const StageObserver& observe = {}) {
    cfg.validate();
    if (xs.empty()) {
        throw std::invalid_argument("run_experiment needs at least one series");
    }
    for (const auto& s : xs) {
        if (s.size() != cfg.sim_length) {
            throw LengthMismatchError("series '" + s.species_name + "' does not have sim_length points");
        }
    }

    using clock = std::chrono::steady_clock;
    auto stage_start = clock::now();
    auto end_stage = [&](std::string_view name) {
        const auto now = clock::now();
        if (observe) {
            observe(name, std::chrono::duration<double>(now - stage_start).count());
        }
        stage_start = now;
    };

    ExperimentResult result;
    auto& report = result.report;
    report.dataset_tag = xs.front().dataset_tag;
    report.series_count = xs.size();

    const auto fit_options = cfg.fit_options();
    result.fits.resize(xs.size());
    parallel_for(xs.size(), jobs, [&](std::size_t i) { result.fits[i] = classify_by_fit(xs[i], fit_options); });
    end_stage("fit");

    result.split = split(xs.size(), cfg.split_ratio, cfg.rng_seed);
    report.train_size = result.split.train.size();
    report.test_size = result.split.test.size();
    if (report.test_size == 0) {
        throw std::invalid_argument("test split is empty; provide more series or lower split_ratio");
    }

    std::vector<NormalizedSeries> train_series;
    std::vector<CurveLabel> train_labels;
    for (std::size_t i : result.split.train) {
        if (!detect_constant(xs[i])) {
            result.clustered.push_back(i);
            train_series.push_back(xs[i]);
            train_labels.push_back(result.fits[i].label);
        }
    }
    report.clustered_size = result.clustered.size();

    const DistanceMatrix d = distance_matrix(train_series, jobs);
    end_stage("distance_matrix");

    result.dendrogram = linkage(d);
    result.flat = flatten(result.dendrogram, cfg.cluster_threshold);
    const auto labeled = label_clusters(result.flat, d, train_labels, cfg.purity_threshold);
    result.medoids = build_medoid_index(labeled, train_series);
    end_stage("clustering");

    std::size_t training_matches = 0;
    for (const auto& c : labeled) {
        ClusterSummary summary;
        summary.id = c.id;
        summary.size = c.members.size();
        summary.medoid = result.clustered[c.medoid];
        summary.medoid_label = c.medoid_label;
        summary.label = c.label;
        summary.purity = c.purity;
        for (std::size_t leaf : c.members) {
            summary.members.push_back(result.clustered[leaf]);
            training_matches += train_labels[leaf] == c.label ? 1 : 0;
        }
        report.demoted_count += c.demoted() ? 1 : 0;
        report.clusters.push_back(std::move(summary));
    }
    report.cluster_count = labeled.size();
    if (!result.clustered.empty()) {
        report.training_agreement =
            100.0 * static_cast<double>(training_matches) / static_cast<double>(result.clustered.size());
    }

    report.predictions.resize(result.split.test.size());
    parallel_for(result.split.test.size(), jobs, [&](std::size_t k) {
        const std::size_t i = result.split.test[k];
        TestPrediction p;
        p.series = i;
        p.expected = result.fits[i].label;
        if (detect_constant(xs[i])) {
            p.predicted = CurveLabel::Constant;
        } else if (result.medoids.empty()) {
            // Nothing was clustered, so nothing can be near.
            p.predicted = CurveLabel::Outlier;
        } else {
            const auto knn = classify_knn(xs[i], result.medoids, cfg.knn_threshold);
            p.predicted = knn.label;
            p.nearest_cluster = knn.nearest;
            p.distance = knn.distance;
        }
        report.predictions[k] = p;
    });
    for (const auto& p : report.predictions) {
        report.confusion.add(p.expected, p.predicted);
    }
    report.test_agreement = agreement(report.confusion);
    end_stage("knn");
    return result;
}

} // namespace popshape
