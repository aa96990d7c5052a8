// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include "support.hpp"

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <thread>

namespace fs = std::filesystem;
using namespace popshape;
using popshape::testing::Gen;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail += (detail.empty() ? "" : "; ") + what;
        }
    }
};

std::string fmt(double v, int digits = 2) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

int run_cli(const std::string& args, const fs::path& log) {
    const std::string cmd = std::string(POPSHAPE_CLI) + " " + args + " >" + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::size_t workers() { return std::max(1u, std::thread::hardware_concurrency()); }

// ---------------------------------------------------------------------------

struct CliRuns {
    bool ok = false;
    std::string error;
    double seconds = 0.0;
    fs::path first;
    fs::path second;
};

/// synth, then validate twice with identical flags.
CliRuns run_pipeline() {
    CliRuns runs;
    const fs::path root = fs::path(ACCEPTANCE_WORKDIR);
    fs::remove_all(root);
    fs::create_directories(root);
    if (run_cli("synth --per-class 100 --noise 0.02 --seed 7 --out " + (root / "corpus").string(), root / "synth.log") !=
        0) {
        runs.error = "synth failed: " + slurp(root / "synth.log");
        return runs;
    }
    const std::string flags = " --cluster-threshold 2 --knn-threshold 2 --seed 7 --jobs 4";
    runs.first = root / "run_a";
    runs.second = root / "run_b";
    const auto start = std::chrono::steady_clock::now();
    if (run_cli("validate " + (root / "corpus" / "series").string() + flags + " --out " + runs.first.string(),
                root / "run_a.log") != 0) {
        runs.error = "validate failed: " + slurp(root / "run_a.log");
        return runs;
    }
    runs.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (run_cli("validate " + (root / "corpus" / "series").string() + flags + " --out " + runs.second.string(),
                root / "run_b.log") != 0) {
        runs.error = "second validate failed: " + slurp(root / "run_b.log");
        return runs;
    }
    runs.ok = true;
    return runs;
}

Outcome synthetic_agreement(const CliRuns& runs) {
    Outcome o;
    if (!runs.ok) {
        o.require(false, runs.error);
        return o;
    }
    const auto report = json::parse(slurp(runs.first / "report.json"));
    const double agreement_pct = report["test_agreement"].get<double>();
    o.require(agreement_pct >= 85.0, "agreement below 85%");
    o.require(runs.seconds <= 600.0, "runtime above 10 minutes");
    o.detail = "test agreement " + fmt(agreement_pct) + "% (>= 85%), " +
               std::to_string(report["confusion"]["trace"].get<std::size_t>()) + "/" +
               std::to_string(report["confusion"]["total"].get<std::size_t>()) + ", validate took " +
               fmt(runs.seconds, 1) + " s with --jobs 4 (<= 600 s)" + (o.detail.empty() ? "" : "; " + o.detail);
    return o;
}

Outcome determinism(const CliRuns& runs) {
    Outcome o;
    if (!runs.ok) {
        o.require(false, runs.error);
        return o;
    }
    for (const char* name : {"report.json", "confusion.csv"}) {
        const auto a = slurp(runs.first / name);
        const auto b = slurp(runs.second / name);
        o.require(!a.empty() && a == b, std::string(name) + " differs between runs");
    }
    if (o.pass) {
        o.detail = "report.json and confusion.csv byte-identical across two validate runs";
    }
    return o;
}

// ---------------------------------------------------------------------------

/// Linear parameters scale with 1/max after normalization; shape parameters do not.
std::vector<double> normalized_truth(FamilyId id, std::vector<double> params, std::size_t n) {
    const auto curve = sample_family(id, params, n);
    const double m = *std::max_element(curve.begin(), curve.end());
    const auto family = describe_family(id);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto name = family.param_names[i];
        if (name == "a" || name == "c" || name == "L") {
            params[i] /= m;
        }
    }
    return params;
}

Outcome fit_recovery() {
    Outcome o;
    const std::array families{FamilyId::ExponentialGrowth, FamilyId::CappedGrowth, FamilyId::Gaussian,
                              FamilyId::Oscillation};
    std::string summary;
    for (auto id : families) {
        const auto label = label_of(id);
        std::vector<int> noisy_ok(100, 0);
        std::vector<double> clean_rss(100, 0.0);
        std::vector<double> clean_err(100, 0.0);
        parallel_for(100, workers(), [&](std::size_t i) {
            GenSpec spec;
            spec.label = label;
            spec.seed = 50'000 + 1000 * index_of(label) + i;
            spec.noise_sigma = 0.02;
            noisy_ok[i] = classify_by_fit(preprocess(generate(spec).raw)).label == label;

            spec.noise_sigma = 0.0;
            const auto g = generate(spec);
            const auto fit = fit_family(preprocess(g.raw), id);
            clean_rss[i] = *fit.rss;
            const auto truth = normalized_truth(id, g.params, kDefaultSimLength);
            const auto family = describe_family(id);
            double worst = 0.0;
            for (std::size_t p = 0; p < truth.size(); ++p) {
                double got = fit.params[p];
                double want = truth[p];
                if (family.param_names[p] == "phi") {
                    got = std::fmod(got, 2.0 * std::numbers::pi);
                    want = std::fmod(want, 2.0 * std::numbers::pi);
                }
                worst = std::max(worst, testing::relative_error(got, want));
            }
            clean_err[i] = worst;
        });
        const int correct = std::accumulate(noisy_ok.begin(), noisy_ok.end(), 0);
        const double max_rss = *std::max_element(clean_rss.begin(), clean_rss.end());
        const double max_err = *std::max_element(clean_err.begin(), clean_err.end());
        const std::string name(to_string(label));
        o.require(correct >= 95, name + " recovered only " + std::to_string(correct) + "/100");
        o.require(max_rss <= 1e-6, name + " noise-free rss " + std::to_string(max_rss));
        o.require(max_err <= 0.01, name + " parameter error " + fmt(100.0 * max_err, 3) + "%");
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%s%s %d/100, rss<=%.1e, param err<=%.2e", summary.empty() ? "" : "; ",
                      name.c_str(), correct, max_rss, max_err);
        summary += buf;
    }
    o.detail = summary + (o.pass ? "" : "; " + o.detail);
    return o;
}

// ---------------------------------------------------------------------------

Outcome rule_classifiers() {
    Outcome o;
    const std::size_t n = kDefaultSimLength;
    std::size_t cases = 0;
    std::size_t right = 0;
    auto expect = [&](bool got, bool want, const std::string& what) {
        ++cases;
        right += got == want ? 1 : 0;
        o.require(got == want, what);
    };

    expect(detect_dying(std::vector<double>(n, 0.0)), true, "all-zero not dying");
    expect(detect_constant(std::vector<double>(n, 0.0)), false, "all-zero constant");

    Gen gen(3);
    for (int trial = 0; trial < 200; ++trial) {
        const double level = gen.uniform(0.05, 1.0);
        std::vector<double> flat(n, level);
        expect(detect_constant(flat), true, "flat series not constant");
        expect(detect_dying(flat), false, "flat series dying");

        auto bumped = flat;
        bumped[gen.index(0, n - 1)] = level * gen.uniform(0.5, 0.999);
        expect(detect_constant(bumped), false, "one deviating point still constant");

        // Decay that reaches the epsilon band and stays there.
        std::vector<double> decay(n);
        const double rate = gen.uniform(4.0, 20.0);
        for (std::size_t t = 0; t < n; ++t) {
            decay[t] = std::exp(-rate * normalized_time(t, n));
        }
        const std::size_t onset = gen.index(n / 2, n - 1);
        for (std::size_t t = onset; t < n; ++t) {
            decay[t] = std::min(decay[t], gen.uniform(0.0, 0.04));
        }
        decay.back() = trial % 4 == 0 ? 0.04 : decay.back();
        expect(detect_dying(decay), true, "decay to the epsilon band not dying");

        auto recovering = decay;
        recovering.back() = gen.uniform(0.0401, 1.0);
        expect(detect_dying(recovering), false, "tail above epsilon still dying");
    }
    o.detail = std::to_string(right) + "/" + std::to_string(cases) +
               " rule cases correct, including all-zero, tail at exactly 0.04 and single-point deviations" +
               (o.pass ? "" : "; " + o.detail);
    return o;
}

// ---------------------------------------------------------------------------

Outcome dtw_kernel() {
    Outcome o;
    Gen gen(4);
    std::size_t failures = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const auto a = gen.series(gen.index(1, 50));
        const auto b = gen.series(gen.index(1, 50));
        const double ab = dtw_distance(a, b);
        const bool ok = ab == dtw_distance(b, a) && ab >= 0.0 && dtw_distance(a, a) == 0.0;
        failures += ok ? 0 : 1;
    }
    o.require(failures == 0, std::to_string(failures) + " symmetry/identity/non-negativity failures");

    double worst_oracle = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const auto a = gen.series(gen.index(1, 6));
        const auto b = gen.series(gen.index(1, 6));
        worst_oracle = std::max(worst_oracle, std::abs(dtw_distance(a, b) - testing::brute_force_dtw(a, b)));
    }
    o.require(worst_oracle <= 1e-12, "path-enumeration mismatch " + std::to_string(worst_oracle));

    std::size_t above_l2 = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = gen.index(1, 50);
        const auto a = gen.series(n);
        const auto b = gen.series(n);
        double l2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            l2 += (a[i] - b[i]) * (a[i] - b[i]);
        }
        above_l2 += dtw_distance(a, b) <= std::sqrt(l2) + 1e-12 ? 0 : 1;
    }
    o.require(above_l2 == 0, std::to_string(above_l2) + " pairs above the aligned L2 distance");
    o.detail = "1000 pairs symmetric/identical/non-negative, 200 oracle pairs max |diff| " + fmt(worst_oracle, 3) +
               ", 1000 equal-length pairs within L2" + (o.pass ? "" : "; " + o.detail);
    return o;
}

Outcome linkage_oracle() {
    Outcome o;
    Gen gen(5);
    std::size_t mismatches = 0;
    std::size_t diameter_violations = 0;
    std::size_t refinement_violations = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = gen.index(2, 8);
        const auto d = gen.matrix(n, trial % 2 == 0 ? 0 : 3);
        const auto tree = linkage(d);
        mismatches += tree.merges == testing::naive_linkage(d).merges ? 0 : 1;

        const double t1 = gen.uniform(0.0, 10.0);
        const double t2 = t1 + gen.uniform(0.0, 5.0);
        const auto fine = flatten(tree, t1);
        const auto coarse = flatten(tree, t2);
        for (const auto& members : fine.clusters) {
            diameter_violations += testing::diameter(members, d) <= t1 ? 0 : 1;
            for (auto m : members) {
                refinement_violations += coarse.assignments[m] == coarse.assignments[members.front()] ? 0 : 1;
            }
        }
        for (const auto& members : coarse.clusters) {
            diameter_violations += testing::diameter(members, d) <= t2 ? 0 : 1;
        }
    }
    o.require(mismatches == 0, std::to_string(mismatches) + " merge trees differ from the naive oracle");
    o.require(diameter_violations == 0, std::to_string(diameter_violations) + " diameter violations");
    o.require(refinement_violations == 0, std::to_string(refinement_violations) + " refinement violations");
    o.detail = "200 random matrices (n<=8, half with tied entries): merge trees identical to the naive oracle, "
               "diameter <= T and T1<=T2 refinement hold" +
               (o.pass ? "" : "; " + o.detail);
    return o;
}

// ---------------------------------------------------------------------------

Outcome medoid_knn() {
    Outcome o;
    std::vector<NormalizedSeries> xs;
    for (const auto& g : generate_corpus(equal_mix(10), 0.02, 11, 100)) {
        xs.push_back(preprocess(g.raw, 100));
    }
    ExperimentConfig cfg;
    cfg.sim_length = 100;
    cfg.cluster_threshold = 1.0;
    cfg.knn_threshold = 1.0;
    const auto result = run_experiment(xs, cfg, workers());
    std::size_t self_ok = 0;
    for (const auto& c : result.report.clusters) {
        const auto r = classify_knn(xs[c.medoid], result.medoids, cfg.knn_threshold);
        self_ok += r.distance == 0.0 && r.nearest == c.id && r.label == c.label ? 1 : 0;
    }
    o.require(self_ok == result.report.clusters.size(), "a medoid did not self-classify");

    DistanceMatrix d(10);
    for (std::size_t i = 0; i < 10; ++i) {
        for (std::size_t j = i + 1; j < 10; ++j) {
            d.set(i, j, 1.0);
        }
    }
    const auto flat = flatten(linkage(d), 1.0);
    std::vector<CurveLabel> labels(10, CurveLabel::Gaussian);
    std::fill(labels.begin() + 6, labels.end(), CurveLabel::Oscillation);
    const auto sixty = label_clusters(flat, d, labels).front();
    labels[5] = CurveLabel::Oscillation;
    const auto fifty = label_clusters(flat, d, labels).front();
    o.require(sixty.label == CurveLabel::Gaussian, "60%-pure cluster demoted");
    o.require(fifty.label == CurveLabel::Outlier, "50%-pure cluster kept");
    o.detail = std::to_string(self_ok) + "/" + std::to_string(result.report.clusters.size()) +
               " medoids self-classify at distance 0; 60%-pure cluster keeps " + std::string(to_string(sixty.label)) +
               ", 50%-pure cluster becomes " + std::string(to_string(fifty.label)) + (o.pass ? "" : "; " + o.detail);
    return o;
}

// ---------------------------------------------------------------------------

bool conserved(const ValidationReport& report) {
    std::array<std::size_t, kLabelCount> expected{};
    for (const auto& p : report.predictions) {
        ++expected[index_of(p.expected)];
    }
    for (auto label : kAllLabels) {
        if (report.confusion.row_total(label) != expected[index_of(label)]) {
            return false;
        }
    }
    return report.confusion.total() == report.test_size && report.test_agreement == agreement(report.confusion);
}

bool conserved(const fs::path& run_dir) {
    const auto report = json::parse(slurp(run_dir / "report.json"));
    std::map<std::string, std::size_t> expected;
    std::istringstream in(slurp(run_dir / "predictions.csv"));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        std::istringstream cells(line);
        std::string cell;
        for (int c = 0; c < 4 && std::getline(cells, cell, ','); ++c) {
        }
        ++expected[cell];
    }
    const auto& cm = report["confusion"];
    std::size_t trace = 0;
    std::size_t total = 0;
    for (std::size_t r = 0; r < kLabelCount; ++r) {
        const auto name = cm["labels"][r].get<std::string>();
        if (cm["row_totals"][r].get<std::size_t>() != expected[name]) {
            return false;
        }
        trace += cm["counts"][r][r].get<std::size_t>();
        total += cm["row_totals"][r].get<std::size_t>();
    }
    return total > 0 && report["test_agreement"].get<double>() == 100.0 * static_cast<double>(trace) /
                                                                       static_cast<double>(total);
}

Outcome confusion_conservation(const CliRuns& runs) {
    Outcome o;
    std::size_t checked = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        std::vector<NormalizedSeries> xs;
        for (const auto& g : generate_corpus(table1_mix(60), 0.02, seed, 80)) {
            xs.push_back(preprocess(g.raw, 80));
        }
        ExperimentConfig cfg;
        cfg.sim_length = 80;
        cfg.cluster_threshold = 1.5;
        cfg.knn_threshold = 1.5;
        cfg.rng_seed = seed;
        o.require(conserved(run_experiment(xs, cfg, workers()).report), "library run " + std::to_string(seed));
        ++checked;
    }
    if (runs.ok) {
        o.require(conserved(runs.first) && conserved(runs.second), "CLI report not conserved");
        checked += 2;
    }

    const std::size_t table[7][7] = {
        {3, 2, 6, 1, 0, 0, 0},  {0, 8, 0, 1, 0, 1, 0},  {0, 0, 22, 0, 0, 0, 1}, {0, 0, 0, 117, 0, 3, 0},
        {0, 0, 0, 0, 15, 4, 0}, {0, 1, 1, 2, 4, 42, 0}, {0, 0, 0, 0, 0, 0, 54},
    };
    ConfusionMatrix published;
    for (std::size_t r = 0; r < 7; ++r) {
        for (std::size_t c = 0; c < 7; ++c) {
            published.add(kAllLabels[r], kAllLabels[c], table[r][c]);
        }
    }
    const double recomputed = agreement(published);
    o.require(published.trace() == 261 && published.total() == 288 && std::abs(recomputed - 90.625) < 1e-12,
              "published matrix does not give 261/288");
    o.detail = std::to_string(checked) + " runs conserve row totals and trace/total; published superset matrix gives " +
               std::to_string(published.trace()) + "/" + std::to_string(published.total()) + " = " +
               fmt(recomputed, 3) + "%" + (o.pass ? "" : "; " + o.detail);
    return o;
}

// ---------------------------------------------------------------------------

Outcome silhouette_checks() {
    Outcome o;
    Gen gen(9);
    std::vector<std::vector<double>> xs;
    for (int blob = 0; blob < 2; ++blob) {
        for (int i = 0; i < 30; ++i) {
            // Spread 1 within a blob, gap 10 between centres.
            xs.push_back({blob * 10.0 + gen.uniform(-0.5, 0.5), gen.uniform(-0.5, 0.5)});
        }
    }
    const auto km = kmeans(xs, 2, 1);
    const double score = silhouette(km.assignments, xs);
    o.require(score > 0.9, "two-blob silhouette " + fmt(score, 3));

    double lo = 1.0;
    double hi = -1.0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = gen.index(3, 30);
        std::vector<std::vector<double>> pts;
        std::vector<std::size_t> labels;
        for (std::size_t i = 0; i < n; ++i) {
            pts.push_back({gen.uniform(0, 1), gen.uniform(0, 1)});
            labels.push_back(i < 2 ? i : gen.index(0, 4));
        }
        const double s = silhouette(labels, pts);
        lo = std::min(lo, s);
        hi = std::max(hi, s);
    }
    for (const auto& p : silhouette_sweep(xs, 2, 8, 3)) {
        lo = std::min(lo, p.score);
        hi = std::max(hi, p.score);
    }
    o.require(lo >= -1.0 && hi <= 1.0, "score outside [-1, 1]");
    o.detail = "two-blob k=2 score " + fmt(score, 3) + " (> 0.9); 207 scores within [" + fmt(lo, 3) + ", " +
               fmt(hi, 3) + "]" + (o.pass ? "" : "; " + o.detail);
    return o;
}

} // namespace

int main() {
    std::cout << "popshape acceptance suite\n" << std::flush;
    const auto runs = run_pipeline();

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"1 synthetic agreement", [&] { return synthetic_agreement(runs); }},
        {"2 fit recovery", fit_recovery},
        {"3 rule classifiers", rule_classifiers},
        {"4 DTW kernel", dtw_kernel},
        {"5 linkage oracle", linkage_oracle},
        {"6 medoid/KNN", medoid_knn},
        {"7 confusion conservation", [&] { return confusion_conservation(runs); }},
        {"8 determinism", [&] { return determinism(runs); }},
        {"9 silhouette", silhouette_checks},
    };
    int failed = 0;
    for (const auto& [name, check] : criteria) {
        Outcome outcome;
        try {
            outcome = check();
        } catch (const std::exception& e) {
            outcome.pass = false;
            outcome.detail = std::string("threw: ") + e.what();
        }
        failed += outcome.pass ? 0 : 1;
        std::cout << (outcome.pass ? "[PASS] " : "[FAIL] ") << name << ": " << outcome.detail << '\n' << std::flush;
    }
    std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed\n";
    return failed == 0 ? 0 : 1;
}
