#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>

namespace popshape {

/// Seven-way population curve classification outcome.
///
/// Enumerator order is the row/column order used by confusion matrices.
enum class CurveLabel : std::size_t {
    Outlier = 0,
    ExponentialGrowth,
    CappedGrowth,
    Dying,
    Oscillation,
    Gaussian,
    Constant,
};

inline constexpr std::size_t kLabelCount = 7;

inline constexpr std::array<CurveLabel, kLabelCount> kAllLabels{
    CurveLabel::Outlier,     CurveLabel::ExponentialGrowth, CurveLabel::CappedGrowth,
    CurveLabel::Dying,       CurveLabel::Oscillation,       CurveLabel::Gaussian,
    CurveLabel::Constant,
};

constexpr std::size_t index_of(CurveLabel label) noexcept { return static_cast<std::size_t>(label); }

constexpr std::string_view to_string(CurveLabel label) noexcept {
    switch (label) {
        case CurveLabel::Outlier: return "outlier";
        case CurveLabel::ExponentialGrowth: return "exponential_growth";
        case CurveLabel::CappedGrowth: return "capped_growth";
        case CurveLabel::Dying: return "dying";
        case CurveLabel::Oscillation: return "oscillation";
        case CurveLabel::Gaussian: return "gaussian";
        case CurveLabel::Constant: return "constant";
    }
    return "outlier";
}

constexpr std::optional<CurveLabel> label_from_string(std::string_view name) noexcept {
    for (auto label : kAllLabels) {
        if (to_string(label) == name) {
            return label;
        }
    }
    return std::nullopt;
}

} // namespace popshape
