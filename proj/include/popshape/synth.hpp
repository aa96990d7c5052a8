#pragma once

// Labeled synthetic population traces for oracle tests and desk-scale runs.

#include "curve_fit.hpp"
#include "labels.hpp"
#include "series.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace popshape {

class InvalidSpecError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Ranges that random parameter draws come from, on the unit (pre-ceiling) scale.
/// Every range lies inside the fitting bounds of the matching family.
namespace synth_ranges {
inline constexpr double kExpRateLo = 3.0, kExpRateHi = 8.0;
inline constexpr double kExpOffsetLo = 0.05, kExpOffsetHi = 0.3;
inline constexpr double kCapRateLo = 8.0, kCapRateHi = 40.0;
inline constexpr double kCapMidLo = 0.2, kCapMidHi = 0.6;
inline constexpr double kGaussMeanLo = 0.3, kGaussMeanHi = 0.7;
inline constexpr double kGaussWidthLo = 0.05, kGaussWidthHi = 0.15;
inline constexpr double kGaussFloorLo = 0.15, kGaussFloorHi = 0.4;
inline constexpr double kOscFreqLo = 2.0, kOscFreqHi = 8.0;
inline constexpr double kOscAmpLo = 0.2, kOscAmpHi = 0.4;
inline constexpr double kOscPhaseLo = 0.5, kOscPhaseHi = 5.5;
inline constexpr double kOscFloorMargin = 0.15;
inline constexpr double kDecayRateLo = 8.0, kDecayRateHi = 20.0;
inline constexpr double kExtinctionLevel = 0.02;
inline constexpr double kConstantLo = 0.2, kConstantHi = 1.0;
inline constexpr double kWalkStep = 0.12;
inline constexpr double kWalkFloor = 0.1;
inline constexpr double kCeilingLo = 10.0, kCeilingHi = 25000.0;
} // namespace synth_ranges

inline constexpr double kMaxNoiseSigma = 0.2;

struct GenSpec {
    CurveLabel label = CurveLabel::Gaussian;
    /// Family parameters on the unit scale; drawn at random when empty.
    /// Fitted families use the curve_fit parameter order, Dying takes {decay_rate},
    /// Constant takes {level}. Outlier ignores this field.
    std::optional<std::vector<double>> params;
    double noise_sigma = 0.0;
    std::size_t length = kDefaultSimLength;
    std::uint64_t seed = 0;
};

struct GeneratedSeries {
    RawSeries raw;
    CurveLabel label;
    /// Generating parameters on the unit scale (empty for Outlier).
    std::vector<double> params;
    double ceiling = 1.0;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30U)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27U)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31U);
}

inline std::size_t expected_param_count(CurveLabel label) {
    switch (label) {
        case CurveLabel::ExponentialGrowth: return ExponentialModel::dim;
        case CurveLabel::CappedGrowth: return CappedGrowthModel::dim;
        case CurveLabel::Gaussian: return GaussianModel::dim;
        case CurveLabel::Oscillation: return OscillationModel::dim;
        case CurveLabel::Dying: return 1;
        case CurveLabel::Constant: return 1;
        case CurveLabel::Outlier: return 0;
    }
    return 0;
}

inline std::vector<double> draw_params(CurveLabel label, std::mt19937_64& rng) {
    namespace r = synth_ranges;
    auto uniform = [&rng](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
    switch (label) {
        case CurveLabel::ExponentialGrowth: {
            const double b = uniform(r::kExpRateLo, r::kExpRateHi);
            const double c = uniform(r::kExpOffsetLo, r::kExpOffsetHi);
            return {(1.0 - c) * std::exp(-b), b, c};
        }
        case CurveLabel::CappedGrowth: {
            const double k = uniform(r::kCapRateLo, r::kCapRateHi);
            const double u0 = uniform(r::kCapMidLo, r::kCapMidHi);
            return {1.0, k, u0};
        }
        case CurveLabel::Gaussian: {
            const double mu = uniform(r::kGaussMeanLo, r::kGaussMeanHi);
            const double sigma = uniform(r::kGaussWidthLo, r::kGaussWidthHi);
            const double c = uniform(r::kGaussFloorLo, r::kGaussFloorHi);
            return {1.0 - c, mu, sigma, c};
        }
        case CurveLabel::Oscillation: {
            const double a = uniform(r::kOscAmpLo, r::kOscAmpHi);
            const double omega = uniform(r::kOscFreqLo, r::kOscFreqHi);
            const double phi = uniform(r::kOscPhaseLo, r::kOscPhaseHi);
            const double c = uniform(a + r::kOscFloorMargin, 1.0 - a);
            return {a, omega, phi, c};
        }
        case CurveLabel::Dying: return {uniform(r::kDecayRateLo, r::kDecayRateHi)};
        case CurveLabel::Constant: return {uniform(r::kConstantLo, r::kConstantHi)};
        case CurveLabel::Outlier: return {};
    }
    return {};
}

inline void validate(const GenSpec& spec) {
    if (spec.length == 0) {
        throw InvalidSpecError("length must be positive");
    }
    if (!std::isfinite(spec.noise_sigma) || spec.noise_sigma < 0.0 || spec.noise_sigma >= kMaxNoiseSigma) {
        throw InvalidSpecError("noise_sigma must lie in [0, 0.2)");
    }
    if (spec.params && spec.label != CurveLabel::Outlier) {
        if (spec.params->size() != expected_param_count(spec.label)) {
            throw InvalidSpecError("wrong number of parameters for " + std::string(to_string(spec.label)));
        }
        for (double v : *spec.params) {
            if (!std::isfinite(v)) {
                throw InvalidSpecError("parameters must be finite");
            }
        }
    }
}

} // namespace detail

/// Evaluates the spec's curve, adds seeded noise, clamps to >= 0 and scales to a random population ceiling.
inline GeneratedSeries generate(const GenSpec& spec) {
    namespace r = synth_ranges;
    detail::validate(spec);
    std::mt19937_64 rng(detail::splitmix64(spec.seed));
    std::normal_distribution<double> noise(0.0, spec.noise_sigma > 0.0 ? spec.noise_sigma : 1.0);
    auto draw_noise = [&]() { return spec.noise_sigma > 0.0 ? noise(rng) : 0.0; };

    GeneratedSeries out;
    out.label = spec.label;
    out.params = spec.params ? *spec.params : detail::draw_params(spec.label, rng);
    out.ceiling = std::uniform_real_distribution<double>(r::kCeilingLo, r::kCeilingHi)(rng);

    const std::size_t n = spec.length;
    std::vector<double> unit(n, 0.0);
    switch (spec.label) {
        case CurveLabel::ExponentialGrowth:
        case CurveLabel::CappedGrowth:
        case CurveLabel::Gaussian:
        case CurveLabel::Oscillation: {
            FamilyId id = FamilyId::ExponentialGrowth;
            for (auto f : kAllFamilies) {
                if (label_of(f) == spec.label) {
                    id = f;
                }
            }
            for (std::size_t t = 0; t < n; ++t) {
                unit[t] = evaluate_family(id, out.params, normalized_time(t, n)) + draw_noise();
            }
            break;
        }
        case CurveLabel::Dying: {
            // Decay until extinction, then stay extinct.
            const double rate = out.params[0];
            bool extinct = false;
            for (std::size_t t = 0; t < n; ++t) {
                const double clean = std::exp(-rate * normalized_time(t, n));
                extinct = extinct || clean <= r::kExtinctionLevel;
                unit[t] = extinct ? 0.0 : clean + draw_noise();
            }
            break;
        }
        case CurveLabel::Constant: {
            // Abiotic components are exactly flat; noise does not apply.
            std::fill(unit.begin(), unit.end(), out.params[0]);
            break;
        }
        case CurveLabel::Outlier: {
            std::normal_distribution<double> step(0.0, r::kWalkStep);
            double level = std::uniform_real_distribution<double>(0.3, 0.9)(rng);
            for (std::size_t t = 0; t < n; ++t) {
                unit[t] = level;
                level = std::clamp(level + step(rng), r::kWalkFloor, 1.0);
            }
            break;
        }
    }

    out.raw.values.resize(n);
    for (std::size_t t = 0; t < n; ++t) {
        out.raw.values[t] = std::max(unit[t], 0.0) * out.ceiling;
    }
    out.raw.species_name = std::string(to_string(spec.label));
    return out;
}

/// Per-label series counts, indexed by CurveLabel.
using ClassCounts = std::array<std::size_t, kLabelCount>;

/// Equal counts for every label.
inline ClassCounts equal_mix(std::size_t per_class) {
    ClassCounts counts{};
    counts.fill(per_class);
    return counts;
}

/// Splits `total` in proportion to a field census of curve types
/// (29 exponential, 75 capped, 420 dying, 69 oscillation, 162 constant, 169 gaussian,
/// 47 outlier of 971), using largest remainders.
inline ClassCounts table1_mix(std::size_t total) {
    ClassCounts weights{};
    weights[index_of(CurveLabel::ExponentialGrowth)] = 29;
    weights[index_of(CurveLabel::CappedGrowth)] = 75;
    weights[index_of(CurveLabel::Dying)] = 420;
    weights[index_of(CurveLabel::Oscillation)] = 69;
    weights[index_of(CurveLabel::Constant)] = 162;
    weights[index_of(CurveLabel::Gaussian)] = 169;
    weights[index_of(CurveLabel::Outlier)] = 47;
    const std::size_t weight_sum = 971;

    ClassCounts counts{};
    std::array<std::size_t, kLabelCount> remainder{};
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < kLabelCount; ++i) {
        counts[i] = total * weights[i] / weight_sum;
        remainder[i] = total * weights[i] % weight_sum;
        assigned += counts[i];
    }
    std::array<std::size_t, kLabelCount> order{};
    for (std::size_t i = 0; i < kLabelCount; ++i) {
        order[i] = i;
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    for (std::size_t i = 0; assigned < total; ++i, ++assigned) {
        ++counts[order[i % kLabelCount]];
    }
    return counts;
}

/// Generates a labeled corpus: for each label in CurveLabel order, counts[label] series with
/// seeds derived from `seed` and the running series index.
inline std::vector<GeneratedSeries> generate_corpus(const ClassCounts& counts, double noise_sigma, std::uint64_t seed,
                                                    std::size_t length = kDefaultSimLength) {
    std::vector<GeneratedSeries> corpus;
    std::uint64_t index = 0;
    for (auto label : kAllLabels) {
        for (std::size_t i = 0; i < counts[index_of(label)]; ++i, ++index) {
            GenSpec spec;
            spec.label = label;
            spec.noise_sigma = noise_sigma;
            spec.length = length;
            spec.seed = detail::splitmix64(seed) ^ detail::splitmix64(index + 1);
            auto series = generate(spec);
            series.raw.species_name = std::string(to_string(label)) + "_" + std::to_string(i);
            corpus.push_back(std::move(series));
        }
    }
    return corpus;
}

} // namespace popshape
