#pragma once

// JSON and CSV views of the library's results.

#include "clustering.hpp"
#include "curve_fit.hpp"
#include "knn.hpp"
#include "labels.hpp"
#include "series.hpp"
#include "validation.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <cstddef>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace popshape {

using json = nlohmann::ordered_json;

/// Shortest text that round-trips the double exactly.
inline std::string format_number(double value) {
    char buf[32];
    const auto result = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, result.ptr);
}

inline json to_json(const ExperimentConfig& cfg) {
    return json{
        {"sim_length", cfg.sim_length},
        {"split_ratio", cfg.split_ratio},
        {"cluster_threshold", cfg.cluster_threshold},
        {"purity_threshold", cfg.purity_threshold},
        {"knn_threshold", cfg.knn_threshold},
        {"fit_error_threshold", cfg.fit_error_threshold},
        {"dying_epsilon", cfg.dying_epsilon},
        {"seed", cfg.rng_seed},
    };
}

/// {species, model, label, family, params, rss}; params is keyed by parameter name.
inline json fit_record(const NormalizedSeries& s, const FitResult& fit) {
    json record;
    record["species"] = s.species_name;
    record["model"] = s.model_id;
    record["label"] = to_string(fit.label);
    if (fit.family && !fit.params.empty()) {
        record["family"] = to_string(*fit.family);
        const auto family = describe_family(*fit.family);
        json params = json::object();
        for (std::size_t i = 0; i < fit.params.size(); ++i) {
            params[std::string(family.param_names[i])] = fit.params[i];
        }
        record["params"] = std::move(params);
    } else {
        record["family"] = nullptr;
        record["params"] = nullptr;
    }
    if (fit.rss && std::isfinite(*fit.rss)) {
        record["rss"] = *fit.rss;
    } else {
        record["rss"] = nullptr;
    }
    return record;
}

inline void write_fit_csv_header(std::ostream& out) { out << "model,species,label,family,rss,params\n"; }

/// One CSV row; params are space-separated name=value pairs.
inline void write_fit_csv_row(std::ostream& out, const NormalizedSeries& s, const FitResult& fit) {
    out << s.model_id << ',' << s.species_name << ',' << to_string(fit.label) << ',';
    if (fit.family && !fit.params.empty()) {
        out << to_string(*fit.family);
    }
    out << ',';
    if (fit.rss && std::isfinite(*fit.rss)) {
        out << format_number(*fit.rss);
    }
    out << ',';
    if (fit.family && !fit.params.empty()) {
        const auto family = describe_family(*fit.family);
        for (std::size_t i = 0; i < fit.params.size(); ++i) {
            out << (i ? " " : "") << family.param_names[i] << '=' << format_number(fit.params[i]);
        }
    }
    out << '\n';
}

/// Merge list with heights. `leaves` maps leaf index to the caller's series index.
inline json dendrogram_json(const Dendrogram& tree, std::span<const std::size_t> leaves = {}) {
    json merges = json::array();
    for (const auto& m : tree.merges) {
        merges.push_back({{"left", m.left}, {"right", m.right}, {"height", m.height}, {"size", m.size}});
    }
    json out{{"leaf_count", tree.leaf_count}};
    if (!leaves.empty()) {
        out["leaves"] = std::vector<std::size_t>(leaves.begin(), leaves.end());
    }
    out["merges"] = std::move(merges);
    return out;
}

inline Dendrogram dendrogram_from_json(const json& j) {
    Dendrogram tree;
    tree.leaf_count = j.at("leaf_count").get<std::size_t>();
    for (const auto& m : j.at("merges")) {
        tree.merges.push_back({m.at("left").get<std::size_t>(), m.at("right").get<std::size_t>(),
                               m.at("height").get<double>(), m.at("size").get<std::size_t>()});
    }
    return tree;
}

inline json medoid_index_json(const MedoidIndex& index) {
    json medoids = json::array();
    for (const auto& e : index.entries) {
        medoids.push_back({{"cluster_id", e.cluster_id}, {"label", to_string(e.label)}, {"values", e.values}});
    }
    return json{{"medoids", std::move(medoids)}};
}

inline MedoidIndex medoid_index_from_json(const json& j) {
    MedoidIndex index;
    for (const auto& m : j.at("medoids")) {
        const auto name = m.at("label").get<std::string>();
        const auto label = label_from_string(name);
        if (!label) {
            throw std::invalid_argument("unknown curve label '" + name + "' in medoid index");
        }
        index.entries.push_back({m.at("values").get<std::vector<double>>(), *label, m.at("cluster_id").get<std::size_t>()});
    }
    return index;
}

inline json confusion_json(const ConfusionMatrix& cm) {
    json labels = json::array();
    json counts = json::array();
    json totals = json::array();
    json correct = json::array();
    json incorrect = json::array();
    for (auto row : kAllLabels) {
        labels.push_back(to_string(row));
        json r = json::array();
        for (auto col : kAllLabels) {
            r.push_back(cm.at(row, col));
        }
        counts.push_back(std::move(r));
        totals.push_back(cm.row_total(row));
        correct.push_back(cm.correct(row));
        incorrect.push_back(cm.incorrect(row));
    }
    return json{{"labels", std::move(labels)}, {"counts", std::move(counts)},     {"row_totals", std::move(totals)},
                {"correct", std::move(correct)}, {"incorrect", std::move(incorrect)}, {"trace", cm.trace()},
                {"total", cm.total()}};
}

/// Rows are expected (curve-fit) labels, columns are the final classification.
inline void write_confusion_csv(std::ostream& out, const ConfusionMatrix& cm) {
    out << "expected";
    for (auto col : kAllLabels) {
        out << ',' << to_string(col);
    }
    out << ",total,correct,incorrect\n";
    for (auto row : kAllLabels) {
        out << to_string(row);
        for (auto col : kAllLabels) {
            out << ',' << cm.at(row, col);
        }
        out << ',' << cm.row_total(row) << ',' << cm.correct(row) << ',' << cm.incorrect(row) << '\n';
    }
}

inline json report_json(const ValidationReport& report, std::span<const NormalizedSeries> xs) {
    json clusters = json::array();
    json demoted = json::array();
    for (const auto& c : report.clusters) {
        clusters.push_back({{"id", c.id},
                            {"size", c.size},
                            {"medoid", c.medoid},
                            {"medoid_species", xs[c.medoid].species_name},
                            {"medoid_model", xs[c.medoid].model_id},
                            {"medoid_label", to_string(c.medoid_label)},
                            {"label", to_string(c.label)},
                            {"purity", c.purity}});
        if (c.label != c.medoid_label) {
            demoted.push_back(c.id);
        }
    }
    json j;
    j["dataset"] = report.dataset_tag;
    j["series_count"] = report.series_count;
    j["train_size"] = report.train_size;
    j["test_size"] = report.test_size;
    j["clustered_size"] = report.clustered_size;
    j["cluster_count"] = report.cluster_count;
    j["demoted_count"] = report.demoted_count;
    j["demoted_clusters"] = std::move(demoted);
    j["training_agreement"] = report.training_agreement ? json(*report.training_agreement) : json(nullptr);
    j["test_agreement"] = report.test_agreement;
    j["agreement_definition"] = "100 * trace / total of the test confusion matrix";
    j["confusion"] = confusion_json(report.confusion);
    j["clusters"] = std::move(clusters);
    return j;
}

/// One row per clustered training series: leaf id, cluster id, medoid flag, labels.
inline void write_clusters_csv(std::ostream& out, const ExperimentResult& result, std::span<const NormalizedSeries> xs) {
    out << "leaf_id,series,model,species,cluster_id,is_medoid,fit_label,cluster_label\n";
    for (std::size_t leaf = 0; leaf < result.clustered.size(); ++leaf) {
        const std::size_t series = result.clustered[leaf];
        const auto& cluster = result.report.clusters[result.flat.assignments[leaf]];
        out << leaf << ',' << series << ',' << xs[series].model_id << ',' << xs[series].species_name << ','
            << cluster.id << ',' << (cluster.medoid == series ? 1 : 0) << ',' << to_string(result.fits[series].label)
            << ',' << to_string(cluster.label) << '\n';
    }
}

inline void write_cluster_summary_csv(std::ostream& out, const ValidationReport& report) {
    out << "cluster_id,size,medoid_series,medoid_label,label,purity,demoted\n";
    for (const auto& c : report.clusters) {
        out << c.id << ',' << c.size << ',' << c.medoid << ',' << to_string(c.medoid_label) << ','
            << to_string(c.label) << ',' << format_number(c.purity) << ',' << (c.label != c.medoid_label ? 1 : 0)
            << '\n';
    }
}

inline void write_predictions_csv(std::ostream& out, const ValidationReport& report, std::span<const NormalizedSeries> xs) {
    out << "series,model,species,expected,predicted,nearest_cluster,distance\n";
    for (const auto& p : report.predictions) {
        out << p.series << ',' << xs[p.series].model_id << ',' << xs[p.series].species_name << ','
            << to_string(p.expected) << ',' << to_string(p.predicted) << ',';
        if (p.nearest_cluster) {
            out << *p.nearest_cluster;
        }
        out << ',';
        if (p.distance) {
            out << format_number(*p.distance);
        }
        out << '\n';
    }
}

/// Writes series as the ingest schema: a time column then one column per series.
inline void write_series_csv(std::ostream& out, std::span<const RawSeries> series) {
    std::size_t rows = 0;
    out << 't';
    for (const auto& s : series) {
        out << ',' << s.species_name;
        rows = std::max(rows, s.values.size());
    }
    out << '\n';
    for (std::size_t t = 0; t < rows; ++t) {
        out << t;
        for (const auto& s : series) {
            if (s.values.size() != rows) {
                throw std::invalid_argument("write_series_csv needs equal-length series");
            }
            out << ',' << format_number(s.values[t]);
        }
        out << '\n';
    }
}

} // namespace popshape
