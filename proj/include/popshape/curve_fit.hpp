#pragma once

// Top-down curve classification.
//
// Constant and dying series are caught by rules. Everything else is fitted
// against four parametric families over normalized time u = t / (n - 1) and
// labeled by the family with the smallest residual sum of squares, or as an
// outlier when even the best fit is too poor.

#include "labels.hpp"
#include "series.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace popshape {

inline constexpr double kDefaultFitErrorThreshold = 5.7;
inline constexpr double kDefaultDyingEpsilon = 0.04;

// ---------------------------------------------------------------------------
// Rules
// ---------------------------------------------------------------------------

/// Every value equals the first and that value is positive.
inline bool detect_constant(std::span<const double> values) noexcept {
    if (values.empty() || !(values.front() > 0.0)) {
        return false;
    }
    return std::all_of(values.begin(), values.end(), [&](double v) { return v == values.front(); });
}

inline bool detect_constant(const NormalizedSeries& s) noexcept { return detect_constant(s.view()); }

/// First index from which the series never again exceeds epsilon, if any.
inline std::optional<std::size_t> dying_onset(std::span<const double> values, double epsilon) noexcept {
    std::size_t t0 = values.size();
    while (t0 > 0 && values[t0 - 1] <= epsilon) {
        --t0;
    }
    if (t0 == values.size()) {
        return std::nullopt;
    }
    return t0;
}

inline bool detect_dying(std::span<const double> values, double epsilon = kDefaultDyingEpsilon) noexcept {
    return !detect_constant(values) && dying_onset(values, epsilon).has_value();
}

inline bool detect_dying(const NormalizedSeries& s, double epsilon = kDefaultDyingEpsilon) noexcept {
    return detect_dying(s.view(), epsilon);
}

// ---------------------------------------------------------------------------
// Families
// ---------------------------------------------------------------------------

enum class FamilyId : std::size_t { ExponentialGrowth = 0, CappedGrowth, Gaussian, Oscillation };

inline constexpr std::array<FamilyId, 4> kAllFamilies{FamilyId::ExponentialGrowth, FamilyId::CappedGrowth,
                                                      FamilyId::Gaussian, FamilyId::Oscillation};

constexpr CurveLabel label_of(FamilyId id) noexcept {
    switch (id) {
        case FamilyId::ExponentialGrowth: return CurveLabel::ExponentialGrowth;
        case FamilyId::CappedGrowth: return CurveLabel::CappedGrowth;
        case FamilyId::Gaussian: return CurveLabel::Gaussian;
        case FamilyId::Oscillation: return CurveLabel::Oscillation;
    }
    return CurveLabel::Outlier;
}

constexpr std::string_view to_string(FamilyId id) noexcept { return to_string(label_of(id)); }

enum class AxisScale { Linear, Log };

/// Shape axes are gridded and subdivided; linear axes are seeded by least squares.
enum class AxisRole { Shape, Linear };

struct ParamAxis {
    std::string_view name;
    double lo;
    double hi;
    AxisScale scale;
    AxisRole role;
};

/// Normalized-time coordinate of sample t in a series of n samples.
inline double normalized_time(std::size_t t, std::size_t n) noexcept {
    return n > 1 ? static_cast<double>(t) / static_cast<double>(n - 1) : 0.0;
}

namespace detail {

/// Solves the dense system a x = b in place with partial pivoting. Returns false if singular.
template <std::size_t N>
bool solve_dense(std::array<std::array<double, N>, N> a, std::array<double, N> b, std::array<double, N>& x) {
    for (std::size_t col = 0; col < N; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < N; ++r) {
            if (std::abs(a[r][col]) > std::abs(a[pivot][col])) {
                pivot = r;
            }
        }
        if (!(std::abs(a[pivot][col]) > 1e-300)) {
            return false;
        }
        std::swap(a[pivot], a[col]);
        std::swap(b[pivot], b[col]);
        for (std::size_t r = col + 1; r < N; ++r) {
            const double f = a[r][col] / a[col][col];
            for (std::size_t c = col; c < N; ++c) {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    for (std::size_t i = N; i-- > 0;) {
        double acc = b[i];
        for (std::size_t c = i + 1; c < N; ++c) {
            acc -= a[i][c] * x[c];
        }
        x[i] = acc / a[i][i];
    }
    for (double v : x) {
        if (!std::isfinite(v)) {
            return false;
        }
    }
    return true;
}

/// Ordinary least squares y ~ sum_k coef_k * basis_k(u).
template <std::size_t K, class Basis>
bool linear_least_squares(std::span<const double> u, std::span<const double> y, Basis&& basis,
                          std::array<double, K>& coef) {
    std::array<std::array<double, K>, K> ata{};
    std::array<double, K> aty{};
    std::array<double, K> row{};
    for (std::size_t t = 0; t < y.size(); ++t) {
        basis(u[t], row);
        for (std::size_t i = 0; i < K; ++i) {
            aty[i] += row[i] * y[t];
            for (std::size_t j = 0; j < K; ++j) {
                ata[i][j] += row[i] * row[j];
            }
        }
    }
    return solve_dense<K>(ata, aty, coef);
}

inline double logistic(double z) noexcept {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

} // namespace detail

/// f = c + a * exp(b * u)
struct ExponentialModel {
    static constexpr FamilyId id = FamilyId::ExponentialGrowth;
    static constexpr std::size_t dim = 3;
    using Params = std::array<double, dim>;
    static constexpr std::array<ParamAxis, dim> axes{{
        {"a", 1e-12, 2.0, AxisScale::Linear, AxisRole::Linear},
        {"b", 0.5, 25.0, AxisScale::Log, AxisRole::Shape},
        {"c", -1.0, 1.0, AxisScale::Linear, AxisRole::Linear},
    }};
    static constexpr std::size_t grid_per_cell = 4;

    static double value(double u, const Params& p) noexcept { return p[2] + p[0] * std::exp(p[1] * u); }

    static double value_and_gradient(double u, const Params& p, Params& g) noexcept {
        const double e = std::exp(p[1] * u);
        g = {e, p[0] * u * e, 1.0};
        return p[2] + p[0] * e;
    }

    static void seed(std::span<const double> u, std::span<const double> y, Params& p) {
        std::array<double, 2> coef{};
        const double b = p[1];
        if (detail::linear_least_squares<2>(u, y, [b](double x, std::array<double, 2>& row) { row = {std::exp(b * x), 1.0}; },
                                            coef)) {
            p[0] = coef[0];
            p[2] = coef[1];
        }
    }
};

/// f = L / (1 + exp(-k * (u - u0)))
struct CappedGrowthModel {
    static constexpr FamilyId id = FamilyId::CappedGrowth;
    static constexpr std::size_t dim = 3;
    using Params = std::array<double, dim>;
    static constexpr std::array<ParamAxis, dim> axes{{
        {"L", 1e-9, 1.2, AxisScale::Linear, AxisRole::Linear},
        {"k", 1.0, 200.0, AxisScale::Log, AxisRole::Shape},
        {"u0", -0.5, 1.0, AxisScale::Linear, AxisRole::Shape},
    }};
    static constexpr std::size_t grid_per_cell = 3;

    static double value(double u, const Params& p) noexcept { return p[0] * detail::logistic(p[1] * (u - p[2])); }

    static double value_and_gradient(double u, const Params& p, Params& g) noexcept {
        const double d = u - p[2];
        const double s = detail::logistic(p[1] * d);
        const double slope = p[0] * s * (1.0 - s);
        g = {s, slope * d, -slope * p[1]};
        return p[0] * s;
    }

    static void seed(std::span<const double> u, std::span<const double> y, Params& p) {
        std::array<double, 1> coef{};
        const double k = p[1];
        const double u0 = p[2];
        if (detail::linear_least_squares<1>(
                u, y, [k, u0](double x, std::array<double, 1>& row) { row = {detail::logistic(k * (x - u0))}; }, coef)) {
            p[0] = coef[0];
        }
    }
};

/// f = a * exp(-(u - mu)^2 / (2 sigma^2)) + c
struct GaussianModel {
    static constexpr FamilyId id = FamilyId::Gaussian;
    static constexpr std::size_t dim = 4;
    using Params = std::array<double, dim>;
    static constexpr std::array<ParamAxis, dim> axes{{
        {"a", 1e-9, 1.5, AxisScale::Linear, AxisRole::Linear},
        {"mu", 0.0, 1.0, AxisScale::Linear, AxisRole::Shape},
        {"sigma", 0.005, 1.0, AxisScale::Log, AxisRole::Shape},
        {"c", -0.5, 1.0, AxisScale::Linear, AxisRole::Linear},
    }};
    static constexpr std::size_t grid_per_cell = 3;

    static double value(double u, const Params& p) noexcept {
        const double d = (u - p[1]) / p[2];
        return p[0] * std::exp(-0.5 * d * d) + p[3];
    }

    static double value_and_gradient(double u, const Params& p, Params& g) noexcept {
        const double d = u - p[1];
        const double inv_s2 = 1.0 / (p[2] * p[2]);
        const double e = std::exp(-0.5 * d * d * inv_s2);
        const double ae = p[0] * e;
        g = {e, ae * d * inv_s2, ae * d * d * inv_s2 / p[2], 1.0};
        return ae + p[3];
    }

    static void seed(std::span<const double> u, std::span<const double> y, Params& p) {
        std::array<double, 2> coef{};
        const double mu = p[1];
        const double sigma = p[2];
        if (detail::linear_least_squares<2>(
                u, y,
                [mu, sigma](double x, std::array<double, 2>& row) {
                    const double d = (x - mu) / sigma;
                    row = {std::exp(-0.5 * d * d), 1.0};
                },
                coef)) {
            p[0] = coef[0];
            p[3] = coef[1];
        }
    }
};

/// f = c + a * sin(2 pi omega u + phi), omega in cycles per window
struct OscillationModel {
    static constexpr FamilyId id = FamilyId::Oscillation;
    static constexpr std::size_t dim = 4;
    using Params = std::array<double, dim>;
    static constexpr double two_pi = 2.0 * std::numbers::pi;
    static constexpr std::array<ParamAxis, dim> axes{{
        {"a", 1e-9, 1.5, AxisScale::Linear, AxisRole::Linear},
        {"omega", 0.5, 40.0, AxisScale::Linear, AxisRole::Shape},
        // Room on both sides of [0, 2pi) so the phase never pins against a bound.
        {"phi", -2.0 * std::numbers::pi, 4.0 * std::numbers::pi, AxisScale::Linear, AxisRole::Linear},
        {"c", -0.5, 1.0, AxisScale::Linear, AxisRole::Linear},
    }};
    // Two starts per cycle-per-window; a frequency lobe is about one cycle wide on each side.
    static constexpr std::size_t grid_per_cell = 40;

    static double value(double u, const Params& p) noexcept { return p[3] + p[0] * std::sin(two_pi * p[1] * u + p[2]); }

    static double value_and_gradient(double u, const Params& p, Params& g) noexcept {
        const double theta = two_pi * p[1] * u + p[2];
        const double s = std::sin(theta);
        const double ac = p[0] * std::cos(theta);
        g = {s, ac * two_pi * u, ac, 1.0};
        return p[3] + p[0] * s;
    }

    static void seed(std::span<const double> u, std::span<const double> y, Params& p) {
        std::array<double, 3> coef{};
        const double omega = p[1];
        if (detail::linear_least_squares<3>(
                u, y,
                [omega](double x, std::array<double, 3>& row) {
                    const double theta = two_pi * omega * x;
                    row = {std::sin(theta), std::cos(theta), 1.0};
                },
                coef)) {
            p[0] = std::hypot(coef[0], coef[1]);
            double phi = std::atan2(coef[1], coef[0]);
            if (phi < 0.0) {
                phi += two_pi;
            }
            p[2] = phi;
            p[3] = coef[2];
        }
    }

    /// Canonical phase in [0, 2pi).
    static void canonicalize(Params& p) noexcept {
        p[2] = std::fmod(p[2], two_pi);
        if (p[2] < 0.0) {
            p[2] += two_pi;
        }
    }
};

template <class Model>
concept FittableModel = requires(double u, const typename Model::Params& p, typename Model::Params& g,
                                 std::span<const double> span, typename Model::Params& out) {
    { Model::value(u, p) } -> std::convertible_to<double>;
    { Model::value_and_gradient(u, p, g) } -> std::convertible_to<double>;
    Model::seed(span, span, out);
    Model::axes;
    Model::grid_per_cell;
};

/// Runtime description of a family: bounds and the full list of prototypical starts.
struct CurveFamily {
    FamilyId id;
    std::vector<std::string_view> param_names;
    std::vector<double> lower;
    std::vector<double> upper;
    /// Number of independent parameter-space cells searched.
    std::size_t cell_count;
    /// Grid values of the shape parameters, one entry per start, each sized like the parameter vector
    /// (linear parameters are filled in by least squares before refinement).
    std::vector<std::vector<double>> starts;
};

// ---------------------------------------------------------------------------
// Fit results
// ---------------------------------------------------------------------------

struct FitResult {
    CurveLabel label = CurveLabel::Outlier;
    std::optional<FamilyId> family;
    std::vector<double> params;
    /// Residual sum of squares of the reported family; empty when a rule decided the label.
    std::optional<double> rss;
    /// Best rss per family, in FamilyId order; empty when a rule decided the label.
    std::vector<double> family_rss;
};

struct FitOptions {
    double fit_error_threshold = kDefaultFitErrorThreshold;
    double dying_epsilon = kDefaultDyingEpsilon;
    std::size_t max_iterations = 200;
};

namespace detail {

inline double axis_position(const ParamAxis& axis, double lo, double hi, double fraction) noexcept {
    if (axis.scale == AxisScale::Log) {
        return std::exp(std::log(lo) + fraction * (std::log(hi) - std::log(lo)));
    }
    return lo + fraction * (hi - lo);
}

/// Bounds of half `which` (0 or 1) of an axis.
inline std::pair<double, double> axis_half(const ParamAxis& axis, int which) noexcept {
    const double mid = axis_position(axis, axis.lo, axis.hi, 0.5);
    return which == 0 ? std::pair{axis.lo, mid} : std::pair{mid, axis.hi};
}

template <class Model>
std::vector<std::size_t> shape_indices() {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < Model::dim; ++i) {
        if (Model::axes[i].role == AxisRole::Shape) {
            idx.push_back(i);
        }
    }
    return idx;
}

template <class Model>
double residual_sum_of_squares(std::span<const double> u, std::span<const double> y,
                               const typename Model::Params& p) noexcept {
    double rss = 0.0;
    for (std::size_t t = 0; t < y.size(); ++t) {
        const double r = y[t] - Model::value(u[t], p);
        rss += r * r;
    }
    return rss;
}

template <class Model>
void clamp_into(typename Model::Params& p, const typename Model::Params& lo, const typename Model::Params& hi) noexcept {
    for (std::size_t i = 0; i < Model::dim; ++i) {
        if (!std::isfinite(p[i])) {
            p[i] = 0.5 * (lo[i] + hi[i]);
        }
        p[i] = std::clamp(p[i], lo[i], hi[i]);
    }
}

/// Box-constrained Levenberg-Marquardt with Marquardt diagonal scaling.
/// Parameters resting on a bound with the descent direction pointing outward are held fixed
/// for the iteration; other steps are projected onto the box. Only strict rss decreases are accepted.
template <class Model>
double levenberg_marquardt(std::span<const double> u, std::span<const double> y, typename Model::Params& p,
                           const typename Model::Params& lo, const typename Model::Params& hi,
                           std::size_t max_iterations, double relative_tolerance = 1e-10) {
    constexpr std::size_t D = Model::dim;
    using Params = typename Model::Params;

    double rss = residual_sum_of_squares<Model>(u, y, p);
    if (!std::isfinite(rss)) {
        return rss;
    }
    double lambda = 1e-3;
    Params grad{};
    for (std::size_t iter = 0; iter < max_iterations; ++iter) {
        std::array<std::array<double, D>, D> jtj{};
        std::array<double, D> jtr{};
        for (std::size_t t = 0; t < y.size(); ++t) {
            const double r = y[t] - Model::value_and_gradient(u[t], p, grad);
            for (std::size_t i = 0; i < D; ++i) {
                jtr[i] += grad[i] * r;
                for (std::size_t j = 0; j <= i; ++j) {
                    jtj[i][j] += grad[i] * grad[j];
                }
            }
        }
        for (std::size_t i = 0; i < D; ++i) {
            for (std::size_t j = 0; j < i; ++j) {
                jtj[j][i] = jtj[i][j];
            }
        }
        // jtr[i] > 0 means increasing p[i] lowers the rss.
        std::array<bool, D> frozen{};
        for (std::size_t i = 0; i < D; ++i) {
            frozen[i] = (p[i] <= lo[i] && jtr[i] <= 0.0) || (p[i] >= hi[i] && jtr[i] >= 0.0);
            if (frozen[i]) {
                for (std::size_t j = 0; j < D; ++j) {
                    jtj[i][j] = 0.0;
                    jtj[j][i] = 0.0;
                }
                jtj[i][i] = 1.0;
                jtr[i] = 0.0;
            }
        }

        bool accepted = false;
        double new_rss = rss;
        Params candidate = p;
        while (lambda < 1e12) {
            auto damped = jtj;
            for (std::size_t i = 0; i < D; ++i) {
                damped[i][i] += lambda * std::max(jtj[i][i], 1e-12);
            }
            Params step{};
            if (solve_dense<D>(damped, jtr, step)) {
                for (std::size_t i = 0; i < D; ++i) {
                    candidate[i] = frozen[i] ? p[i] : p[i] + step[i];
                }
                clamp_into<Model>(candidate, lo, hi);
                new_rss = residual_sum_of_squares<Model>(u, y, candidate);
                if (std::isfinite(new_rss) && new_rss < rss) {
                    accepted = true;
                    break;
                }
            }
            lambda *= 4.0;
        }
        if (!accepted) {
            break;
        }
        const double improvement = rss - new_rss;
        p = candidate;
        rss = new_rss;
        lambda = std::max(lambda / 5.0, 1e-12);
        if (improvement <= relative_tolerance * rss || rss < 1e-28) {
            break;
        }
    }
    return rss;
}

/// Calls fn(cell_lo, cell_hi, start) for every prototypical start of every parameter-space cell.
/// Each shape axis is split into two halves; within a cell every shape axis carries grid_per_cell
/// evenly spaced values (in the axis scale). Linear parameters start at their axis midpoint.
template <class Model, class Fn>
void for_each_start(Fn&& fn) {
    using Params = typename Model::Params;
    Params family_lo{};
    Params family_hi{};
    for (std::size_t i = 0; i < Model::dim; ++i) {
        family_lo[i] = Model::axes[i].lo;
        family_hi[i] = Model::axes[i].hi;
    }
    const auto shape = shape_indices<Model>();
    const std::size_t cells = std::size_t{1} << shape.size();
    const std::size_t per_cell = Model::grid_per_cell;
    std::size_t per_cell_total = 1;
    for (std::size_t k = 0; k < shape.size(); ++k) {
        per_cell_total *= per_cell;
    }

    for (std::size_t cell = 0; cell < cells; ++cell) {
        Params lo = family_lo;
        Params hi = family_hi;
        for (std::size_t k = 0; k < shape.size(); ++k) {
            const auto [a, b] = axis_half(Model::axes[shape[k]], static_cast<int>((cell >> k) & 1U));
            lo[shape[k]] = a;
            hi[shape[k]] = b;
        }
        for (std::size_t g = 0; g < per_cell_total; ++g) {
            Params p{};
            for (std::size_t i = 0; i < Model::dim; ++i) {
                p[i] = axis_position(Model::axes[i], Model::axes[i].lo, Model::axes[i].hi, 0.5);
            }
            std::size_t rem = g;
            for (std::size_t k = 0; k < shape.size(); ++k) {
                const std::size_t slot = rem % per_cell;
                rem /= per_cell;
                const double fraction = (static_cast<double>(slot) + 0.5) / static_cast<double>(per_cell);
                p[shape[k]] = axis_position(Model::axes[shape[k]], lo[shape[k]], hi[shape[k]], fraction);
            }
            fn(lo, hi, p);
        }
    }
}

template <class Model>
CurveFamily describe_family() {
    CurveFamily family;
    family.id = Model::id;
    for (const auto& axis : Model::axes) {
        family.param_names.push_back(axis.name);
        family.lower.push_back(axis.lo);
        family.upper.push_back(axis.hi);
    }
    family.cell_count = std::size_t{1} << shape_indices<Model>().size();
    for_each_start<Model>([&](const auto&, const auto&, const auto& p) {
        family.starts.emplace_back(p.begin(), p.end());
    });
    return family;
}

template <class Model>
FitResult fit_model(std::span<const double> y, const FitOptions& options) {
    using Params = typename Model::Params;
    std::vector<double> u(y.size());
    for (std::size_t t = 0; t < y.size(); ++t) {
        u[t] = normalized_time(t, y.size());
    }

    Params best{};
    double best_rss = std::numeric_limits<double>::infinity();
    bool found = false;
    for_each_start<Model>([&](const Params& lo, const Params& hi, Params p) {
        Model::seed(u, y, p);
        clamp_into<Model>(p, lo, hi);
        const double rss = levenberg_marquardt<Model>(u, y, p, lo, hi, options.max_iterations);
        bool finite = std::isfinite(rss);
        for (double v : p) {
            finite = finite && std::isfinite(v);
        }
        if (finite && rss < best_rss) {
            best_rss = rss;
            best = p;
            found = true;
        }
    });

    FitResult result;
    result.label = label_of(Model::id);
    result.family = Model::id;
    if (!found) {
        result.rss = std::numeric_limits<double>::infinity();
        return result;
    }
    if constexpr (requires(Params& q) { Model::canonicalize(q); }) {
        Model::canonicalize(best);
    }
    result.params.assign(best.begin(), best.end());
    result.rss = residual_sum_of_squares<Model>(u, y, best);
    return result;
}

} // namespace detail

inline CurveFamily describe_family(FamilyId id) {
    switch (id) {
        case FamilyId::ExponentialGrowth: return detail::describe_family<ExponentialModel>();
        case FamilyId::CappedGrowth: return detail::describe_family<CappedGrowthModel>();
        case FamilyId::Gaussian: return detail::describe_family<GaussianModel>();
        case FamilyId::Oscillation: return detail::describe_family<OscillationModel>();
    }
    return detail::describe_family<ExponentialModel>();
}

/// Evaluates a family curve at normalized time u.
inline double evaluate_family(FamilyId id, std::span<const double> params, double u) {
    auto eval = [&]<class Model>() {
        typename Model::Params p{};
        std::copy_n(params.begin(), Model::dim, p.begin());
        return Model::value(u, p);
    };
    switch (id) {
        case FamilyId::ExponentialGrowth: return eval.template operator()<ExponentialModel>();
        case FamilyId::CappedGrowth: return eval.template operator()<CappedGrowthModel>();
        case FamilyId::Gaussian: return eval.template operator()<GaussianModel>();
        case FamilyId::Oscillation: return eval.template operator()<OscillationModel>();
    }
    return std::numeric_limits<double>::quiet_NaN();
}

/// Samples a family curve on the n-point normalized time grid.
inline std::vector<double> sample_family(FamilyId id, std::span<const double> params, std::size_t n) {
    std::vector<double> out(n);
    for (std::size_t t = 0; t < n; ++t) {
        out[t] = evaluate_family(id, params, normalized_time(t, n));
    }
    return out;
}

/// Best parameters of one family, refined from every prototypical start in every parameter-space cell.
/// rss is +inf when no start produced finite parameters.
inline FitResult fit_family(std::span<const double> values, FamilyId id, const FitOptions& options = {}) {
    switch (id) {
        case FamilyId::ExponentialGrowth: return detail::fit_model<ExponentialModel>(values, options);
        case FamilyId::CappedGrowth: return detail::fit_model<CappedGrowthModel>(values, options);
        case FamilyId::Gaussian: return detail::fit_model<GaussianModel>(values, options);
        case FamilyId::Oscillation: return detail::fit_model<OscillationModel>(values, options);
    }
    return {};
}

inline FitResult fit_family(const NormalizedSeries& s, FamilyId id, const FitOptions& options = {}) {
    return fit_family(s.view(), id, options);
}

/// Rules first (constant, then dying), then the minimum-rss family, then the outlier cutoff.
inline FitResult classify_by_fit(std::span<const double> values, const FitOptions& options = {}) {
    FitResult result;
    if (detect_constant(values)) {
        result.label = CurveLabel::Constant;
        return result;
    }
    if (detect_dying(values, options.dying_epsilon)) {
        result.label = CurveLabel::Dying;
        return result;
    }

    std::optional<FitResult> best;
    std::vector<double> family_rss;
    for (auto id : kAllFamilies) {
        auto fit = fit_family(values, id, options);
        family_rss.push_back(*fit.rss);
        // Strict comparison keeps the earlier family on ties.
        if (!best || *fit.rss < *best->rss) {
            best = std::move(fit);
        }
    }
    result = std::move(*best);
    result.family_rss = std::move(family_rss);
    if (!std::isfinite(*result.rss) || *result.rss > options.fit_error_threshold) {
        result.label = CurveLabel::Outlier;
    }
    return result;
}

inline FitResult classify_by_fit(const NormalizedSeries& s, const FitOptions& options = {}) {
    return classify_by_fit(s.view(), options);
}

} // namespace popshape
