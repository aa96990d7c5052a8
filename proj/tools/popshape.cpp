// popshape command line: classify, validate, synth, knn, silhouette.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.

#include "popshape/popshape.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace popshape;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitInternal = 3;
constexpr std::size_t kMinValidateSeries = 20;

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Failure {
    std::string file;
    std::string species;
    std::string message;
};

struct LoadedCorpus {
    std::vector<NormalizedSeries> series;
    std::vector<std::string> files;
    std::vector<Failure> failures;
};

class StageClock {
public:
    void record(std::string_view stage, double seconds) { timings_[std::string(stage)] += seconds; }

    template <class Fn>
    auto time(std::string_view stage, Fn&& fn) {
        const auto start = std::chrono::steady_clock::now();
        auto finish = [&] {
            record(stage, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
        };
        if constexpr (std::is_void_v<decltype(fn())>) {
            fn();
            finish();
        } else {
            auto value = fn();
            finish();
            return value;
        }
    }

    json to_json() const {
        json j = json::object();
        for (const auto& [k, v] : timings_) {
            j[k] = v;
        }
        return j;
    }

private:
    std::map<std::string, double> timings_;
};

/// Reads every *.csv in a directory (sorted by name), normalizing each species column.
LoadedCorpus load_directory(const fs::path& dir, std::size_t sim_length) {
    if (!fs::is_directory(dir)) {
        throw DataError("input directory '" + dir.string() + "' does not exist");
    }
    std::vector<fs::path> paths;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".csv") {
            paths.push_back(entry.path());
        }
    }
    std::sort(paths.begin(), paths.end());

    LoadedCorpus corpus;
    const std::string tag = dir.filename().empty() ? dir.parent_path().filename().string() : dir.filename().string();
    for (const auto& path : paths) {
        const auto name = path.filename().string();
        corpus.files.push_back(name);
        std::vector<RawSeries> raws;
        try {
            raws = ingest_csv(path, tag);
        } catch (const std::exception& e) {
            corpus.failures.push_back({name, "", e.what()});
            continue;
        }
        for (const auto& raw : raws) {
            try {
                corpus.series.push_back(preprocess(raw, sim_length));
            } catch (const std::exception& e) {
                corpus.failures.push_back({name, raw.species_name, e.what()});
            }
        }
    }
    if (corpus.series.empty()) {
        std::string detail = paths.empty() ? "no CSV files found" : "no usable series";
        throw DataError(detail + " in '" + dir.string() + "'");
    }
    return corpus;
}

json failures_json(const std::vector<Failure>& failures) {
    json out = json::array();
    for (const auto& f : failures) {
        out.push_back({{"file", f.file}, {"species", f.species}, {"error", f.message}});
    }
    return out;
}

void report_failures(const std::vector<Failure>& failures) {
    for (const auto& f : failures) {
        std::cerr << "skipped " << f.file;
        if (!f.species.empty()) {
            std::cerr << " [" << f.species << "]";
        }
        std::cerr << ": " << f.message << '\n';
    }
}

/// Deterministic part of the run manifest; embedded in every report.
json manifest_json(const std::string& command, const std::string& input, const std::vector<std::string>& files,
                   const json& config) {
    return json{{"tool", "popshape"},       {"version", kVersion}, {"command", command},
                {"input", input},           {"input_files", files}, {"config", config}};
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << text;
}

template <class Writer>
void write_file(const fs::path& path, Writer&& writer) {
    std::ostringstream buffer;
    writer(buffer);
    write_text(path, buffer.str());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

/// `doc` with the manifest prepended as its first key.
json with_manifest(const json& manifest, const json& doc) {
    json out{{"manifest", manifest}};
    out.update(doc);
    return out;
}

/// Writes manifest.json: the deterministic manifest plus timings and worker count.
void write_run_manifest(const fs::path& out_dir, json manifest, const StageClock& clock, std::size_t jobs) {
    manifest["jobs"] = jobs;
    manifest["timings_seconds"] = clock.to_json();
    write_json(out_dir / "manifest.json", manifest);
}

struct CommonOptions {
    ExperimentConfig config;
    std::size_t jobs = 1;
    std::string out = "out";
};

/// Experiment flags live on the root command so a plain key=value config file can set them;
/// subcommands fall through to them.
void add_config_flags(CLI::App& app, CommonOptions& o) {
    app.add_option("--sim-length", o.config.sim_length, "Points kept per series")->capture_default_str();
    app.add_option("--fit-error-threshold", o.config.fit_error_threshold, "Largest rss still given a family label")
        ->capture_default_str();
    app.add_option("--dying-epsilon", o.config.dying_epsilon, "Near-zero level for the dying rule (fraction of max)")
        ->capture_default_str();
    app.add_option("--split-ratio", o.config.split_ratio, "Training share of the series")->capture_default_str();
    app.add_option("--cluster-threshold", o.config.cluster_threshold, "Dendrogram cut height (DTW distance)")
        ->capture_default_str();
    app.add_option("--purity-threshold", o.config.purity_threshold, "Medoid-label share a cluster must exceed")
        ->capture_default_str();
    app.add_option("--knn-threshold", o.config.knn_threshold, "Largest medoid distance before Outlier")
        ->capture_default_str();
    app.add_option("--seed", o.config.rng_seed, "Split and k-means seed")->capture_default_str();
    app.add_option("--jobs", o.jobs, "Worker threads for fitting and DTW")->capture_default_str();
    app.add_option("--out", o.out, "Output directory")->capture_default_str();
}

// ---------------------------------------------------------------------------

int cmd_classify(const std::string& input, bool strict, const CommonOptions& o) {
    StageClock clock;
    o.config.validate();
    const auto corpus = clock.time("load", [&] { return load_directory(input, o.config.sim_length); });
    report_failures(corpus.failures);

    const auto options = o.config.fit_options();
    std::vector<FitResult> fits(corpus.series.size());
    clock.time("fit", [&] {
        parallel_for(corpus.series.size(), o.jobs,
                     [&](std::size_t i) { fits[i] = classify_by_fit(corpus.series[i], options); });
    });

    const fs::path out_dir(o.out);
    fs::create_directories(out_dir);
    json config = {{"sim_length", o.config.sim_length},
                   {"fit_error_threshold", o.config.fit_error_threshold},
                   {"dying_epsilon", o.config.dying_epsilon}};
    auto manifest = manifest_json("classify", input, corpus.files, config);

    json records = json::array();
    for (std::size_t i = 0; i < fits.size(); ++i) {
        records.push_back(fit_record(corpus.series[i], fits[i]));
    }
    write_json(out_dir / "fits.json",
               json{{"manifest", manifest}, {"failures", failures_json(corpus.failures)}, {"records", records}});
    write_file(out_dir / "fits.csv", [&](std::ostream& out) {
        write_fit_csv_header(out);
        for (std::size_t i = 0; i < fits.size(); ++i) {
            write_fit_csv_row(out, corpus.series[i], fits[i]);
        }
    });
    manifest["failures"] = failures_json(corpus.failures);
    write_run_manifest(out_dir, manifest, clock, o.jobs);

    std::cout << "classified " << fits.size() << " series";
    if (!corpus.failures.empty()) {
        std::cout << ", " << corpus.failures.size() << " failures";
    }
    std::cout << " -> " << (out_dir / "fits.json").string() << '\n';
    return strict && !corpus.failures.empty() ? kExitData : kExitOk;
}

int cmd_validate(const std::string& input, bool plots, bool export_matrix, const CommonOptions& o) {
    StageClock clock;
    o.config.validate();
    const auto corpus = clock.time("load", [&] { return load_directory(input, o.config.sim_length); });
    report_failures(corpus.failures);
    if (corpus.series.size() < kMinValidateSeries) {
        throw DataError("validate needs at least " + std::to_string(kMinValidateSeries) + " usable series, found " +
                        std::to_string(corpus.series.size()));
    }

    const auto result = run_experiment(corpus.series, o.config, o.jobs,
                                       [&](std::string_view stage, double s) { clock.record(stage, s); });
    const auto& report = result.report;

    const fs::path out_dir(o.out);
    fs::create_directories(out_dir);
    auto manifest = manifest_json("validate", input, corpus.files, to_json(o.config));
    manifest["failures"] = failures_json(corpus.failures);

    clock.time("write", [&] {
        write_json(out_dir / "report.json", with_manifest(manifest, report_json(report, corpus.series)));
        write_file(out_dir / "confusion.csv", [&](std::ostream& out) { write_confusion_csv(out, report.confusion); });
        write_file(out_dir / "clusters.csv",
                   [&](std::ostream& out) { write_clusters_csv(out, result, corpus.series); });
        write_file(out_dir / "cluster_summary.csv",
                   [&](std::ostream& out) { write_cluster_summary_csv(out, report); });
        write_file(out_dir / "predictions.csv",
                   [&](std::ostream& out) { write_predictions_csv(out, report, corpus.series); });
        write_json(out_dir / "dendrogram.json",
                   with_manifest(manifest, dendrogram_json(result.dendrogram, result.clustered)));
        json medoids{{"sim_length", o.config.sim_length}, {"medoids", medoid_index_json(result.medoids)["medoids"]}};
        write_json(out_dir / "medoids.json", with_manifest(manifest, medoids));
        if (export_matrix) {
            std::vector<NormalizedSeries> clustered;
            for (std::size_t i : result.clustered) {
                clustered.push_back(corpus.series[i]);
            }
            const auto d = distance_matrix(clustered, o.jobs);
            write_file(out_dir / "distance_matrix.csv", [&](std::ostream& out) { write_matrix_csv(out, d); });
        }
        if (plots) {
            const auto plot_dir = out_dir / "plots";
            fs::create_directories(plot_dir);
            for (const auto& c : report.clusters) {
                std::vector<std::vector<double>> members;
                for (std::size_t m : c.members) {
                    members.push_back(corpus.series[m].values);
                }
                const std::string title = "cluster " + std::to_string(c.id) + ": " + std::string(to_string(c.label)) +
                                          " (" + std::to_string(c.size) + " series)";
                write_file(plot_dir / ("cluster_" + std::to_string(c.id) + ".svg"), [&](std::ostream& out) {
                    write_cluster_svg(out, members, corpus.series[c.medoid].values, title);
                });
            }
        }
    });
    write_run_manifest(out_dir, manifest, clock, o.jobs);

    std::cout << "clusters: " << report.cluster_count << " (" << report.demoted_count << " demoted to outlier)\n";
    if (report.training_agreement) {
        std::cout << "training agreement: " << *report.training_agreement << "%\n";
    }
    std::cout << "test agreement: " << report.test_agreement << "% (" << report.confusion.trace() << "/"
              << report.confusion.total() << ")\n";
    return kExitOk;
}

struct SynthOptions {
    std::size_t per_class = 100;
    double noise = 0.02;
    std::uint64_t seed = 7;
    bool table1_mix = false;
    std::size_t total = 971;
    std::size_t sim_length = kDefaultSimLength;
    std::size_t species_per_file = 4;
    std::string out = "corpus";
};

int cmd_synth(const SynthOptions& o) {
    if (o.species_per_file == 0) {
        throw UsageError("--species-per-file must be positive");
    }
    const auto counts = o.table1_mix ? table1_mix(o.total) : equal_mix(o.per_class);
    std::vector<GeneratedSeries> corpus;
    try {
        corpus = generate_corpus(counts, o.noise, o.seed, o.sim_length);
    } catch (const InvalidSpecError& e) {
        throw UsageError(e.what());
    }

    const fs::path out_dir(o.out);
    const fs::path series_dir = out_dir / "series";
    fs::create_directories(series_dir);
    std::ostringstream labels;
    labels << "file,species,label\n";
    std::vector<std::string> files;
    for (std::size_t start = 0, file_no = 0; start < corpus.size(); start += o.species_per_file, ++file_no) {
        char name[32];
        std::snprintf(name, sizeof(name), "model_%04zu.csv", file_no);
        std::vector<RawSeries> group;
        for (std::size_t i = start; i < std::min(corpus.size(), start + o.species_per_file); ++i) {
            group.push_back(corpus[i].raw);
            labels << name << ',' << corpus[i].raw.species_name << ',' << to_string(corpus[i].label) << '\n';
        }
        write_file(series_dir / name, [&](std::ostream& out) { write_series_csv(out, group); });
        files.emplace_back(name);
    }
    write_text(out_dir / "labels.csv", labels.str());

    json class_counts = json::object();
    for (auto label : kAllLabels) {
        class_counts[std::string(to_string(label))] = counts[index_of(label)];
    }
    json manifest = {{"tool", "popshape"},
                     {"version", kVersion},
                     {"command", "synth"},
                     {"config",
                      {{"per_class", o.per_class},
                       {"noise", o.noise},
                       {"seed", o.seed},
                       {"table1_mix", o.table1_mix},
                       {"total", o.total},
                       {"sim_length", o.sim_length},
                       {"species_per_file", o.species_per_file}}},
                     {"class_counts", class_counts},
                     {"files", files}};
    write_json(out_dir / "manifest.json", manifest);
    std::cout << "wrote " << corpus.size() << " series in " << files.size() << " files to " << series_dir.string()
              << '\n';
    return kExitOk;
}

int cmd_knn(const std::string& input, const std::string& medoids_path, const CommonOptions& o) {
    StageClock clock;
    std::ifstream in(medoids_path);
    if (!in) {
        throw DataError("cannot open medoid index '" + medoids_path + "'");
    }
    MedoidIndex index;
    try {
        index = medoid_index_from_json(json::parse(in));
    } catch (const std::exception& e) {
        throw DataError("bad medoid index: " + std::string(e.what()));
    }
    if (index.empty()) {
        throw DataError("medoid index is empty");
    }
    const auto corpus = clock.time("load", [&] { return load_directory(input, o.config.sim_length); });
    report_failures(corpus.failures);

    struct Row {
        CurveLabel label;
        std::optional<KnnResult> knn;
    };
    std::vector<Row> rows(corpus.series.size());
    clock.time("knn", [&] {
        parallel_for(corpus.series.size(), o.jobs, [&](std::size_t i) {
            if (detect_constant(corpus.series[i])) {
                rows[i] = {CurveLabel::Constant, std::nullopt};
            } else {
                const auto r = classify_knn(corpus.series[i], index, o.config.knn_threshold);
                rows[i] = {r.label, r};
            }
        });
    });

    const fs::path out_dir(o.out);
    fs::create_directories(out_dir);
    write_file(out_dir / "knn.csv", [&](std::ostream& out) {
        out << "model,species,label,nearest_cluster,distance\n";
        for (std::size_t i = 0; i < rows.size(); ++i) {
            out << corpus.series[i].model_id << ',' << corpus.series[i].species_name << ',' << to_string(rows[i].label)
                << ',';
            if (rows[i].knn) {
                out << rows[i].knn->nearest << ',' << format_number(rows[i].knn->distance);
            } else {
                out << ',';
            }
            out << '\n';
        }
    });
    auto manifest = manifest_json("knn", input, corpus.files,
                                  {{"sim_length", o.config.sim_length},
                                   {"knn_threshold", o.config.knn_threshold},
                                   {"medoids", medoids_path}});
    manifest["failures"] = failures_json(corpus.failures);
    write_run_manifest(out_dir, manifest, clock, o.jobs);
    std::cout << "classified " << rows.size() << " series -> " << (out_dir / "knn.csv").string() << '\n';
    return kExitOk;
}

int cmd_silhouette(const std::string& input, std::size_t k_min, std::size_t k_max, const CommonOptions& o) {
    StageClock clock;
    const auto corpus = clock.time("load", [&] { return load_directory(input, o.config.sim_length); });
    report_failures(corpus.failures);
    std::vector<std::vector<double>> vectors;
    for (const auto& s : corpus.series) {
        vectors.push_back(s.values);
    }
    const auto sweep = clock.time("kmeans", [&] { return silhouette_sweep(vectors, k_min, k_max, o.config.rng_seed); });

    const fs::path out_dir(o.out);
    fs::create_directories(out_dir);
    write_file(out_dir / "silhouette.csv", [&](std::ostream& out) {
        out << "clusters,silhouette\n";
        for (const auto& p : sweep) {
            out << p.k << ',' << format_number(p.score) << '\n';
        }
    });
    auto manifest = manifest_json("silhouette", input, corpus.files,
                                  {{"sim_length", o.config.sim_length},
                                   {"k_min", k_min},
                                   {"k_max", k_max},
                                   {"seed", o.config.rng_seed}});
    write_run_manifest(out_dir, manifest, clock, o.jobs);
    for (const auto& p : sweep) {
        std::cout << "k=" << p.k << " silhouette=" << p.score << '\n';
    }
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"popshape: classify population time series by curve shape"};
    app.set_config("--config", "", "key=value file using the long flag names; flags given on the command line win");
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", kVersion);

    CommonOptions common;
    std::string input;
    bool strict = false;
    bool plots = false;
    bool export_matrix = false;
    std::string medoids_path;
    std::size_t k_min = 2;
    std::size_t k_max = 10;
    SynthOptions synth;
    add_config_flags(app, common);

    auto* classify = app.add_subcommand("classify", "Label every series in a directory by curve fitting");
    classify->add_option("input", input, "Directory of CSV exports")->required();
    classify->add_flag("--strict", strict, "Exit with a data error if any file or series was skipped");

    auto* validate = app.add_subcommand("validate", "Run the curve-fit versus clustering agreement experiment");
    validate->add_option("input", input, "Directory of CSV exports")->required();
    validate->add_flag("--plots", plots, "Write one SVG per cluster");
    validate->add_flag("--export-matrix", export_matrix, "Also write the training DTW distance matrix");

    auto* synth_cmd = app.add_subcommand("synth", "Generate a labeled synthetic corpus");
    synth_cmd->add_option("--per-class", synth.per_class, "Series per curve label")->capture_default_str();
    synth_cmd->add_option("--noise", synth.noise, "Gaussian noise sigma on the unit scale")->capture_default_str();
    synth_cmd->add_option("--seed", synth.seed, "Generator seed")->capture_default_str();
    synth_cmd->add_flag("--table1-mix", synth.table1_mix, "Use the field census label mix instead of equal classes");
    synth_cmd->add_option("--total", synth.total, "Corpus size with --table1-mix")->capture_default_str();
    synth_cmd->add_option("--sim-length", synth.sim_length, "Points per series")->capture_default_str();
    synth_cmd->add_option("--species-per-file", synth.species_per_file, "Species columns per CSV file")
        ->capture_default_str();
    synth_cmd->add_option("--out", synth.out, "Output directory")->capture_default_str();

    auto* knn = app.add_subcommand("knn", "Classify series against a saved medoid index");
    knn->add_option("input", input, "Directory of CSV exports")->required();
    knn->add_option("--medoids", medoids_path, "medoids.json written by validate")->required();

    auto* sil = app.add_subcommand("silhouette", "k-means silhouette scores over a range of cluster counts");
    sil->add_option("input", input, "Directory of CSV exports")->required();
    sil->add_option("--k-min", k_min, "Smallest cluster count")->capture_default_str();
    sil->add_option("--k-max", k_max, "Largest cluster count")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (classify->parsed()) {
            return cmd_classify(input, strict, common);
        }
        if (validate->parsed()) {
            return cmd_validate(input, plots, export_matrix, common);
        }
        if (synth_cmd->parsed()) {
            return cmd_synth(synth);
        }
        if (knn->parsed()) {
            return cmd_knn(input, medoids_path, common);
        }
        if (sil->parsed()) {
            return cmd_silhouette(input, k_min, k_max, common);
        }
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return kExitInternal;
    }
    return kExitUsage;
}
