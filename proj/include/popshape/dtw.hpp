#pragma once

// Dynamic time warping with squared-difference local cost.

#include "parallel.hpp"
#include "series.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <vector>

namespace popshape {

class LengthMismatchError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct DtwOptions {
    /// Sakoe-Chiba radius in samples; unconstrained when empty. The radius is widened to
    /// the length difference so the end cell stays reachable.
    std::optional<std::size_t> window;
};

/// sqrt of the minimum, over monotone warping paths from (0,0) to (n-1,m-1) with unit steps
/// right, down and diagonal, of the summed squared differences along the path.
/// Two empty inputs have distance 0; one empty input has infinite distance.
inline double dtw_distance(std::span<const double> a, std::span<const double> b, const DtwOptions& options = {}) {
    const std::size_t n = a.size();
    const std::size_t m = b.size();
    if (n == 0 || m == 0) {
        return n == m ? 0.0 : std::numeric_limits<double>::infinity();
    }
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> prev(m);
    std::vector<double> curr(m);

    if (!options.window) {
        double acc = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            const double d = a[0] - b[j];
            acc += d * d;
            prev[j] = acc;
        }
        for (std::size_t i = 1; i < n; ++i) {
            const double ai = a[i];
            const double d0 = ai - b[0];
            double left = prev[0] + d0 * d0;
            curr[0] = left;
            for (std::size_t j = 1; j < m; ++j) {
                const double d = ai - b[j];
                const double up = std::min(prev[j], prev[j - 1]);
                left = d * d + std::min(up, left);
                curr[j] = left;
            }
            std::swap(prev, curr);
        }
        return std::sqrt(prev[m - 1]);
    }

    const std::size_t radius = std::max(*options.window, n > m ? n - m : m - n);
    std::fill(prev.begin(), prev.end(), inf);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j_lo = i > radius ? i - radius : 0;
        const std::size_t j_hi = std::min(m, i + radius + 1);
        std::fill(curr.begin(), curr.end(), inf);
        const double ai = a[i];
        for (std::size_t j = j_lo; j < j_hi; ++j) {
            const double d = ai - b[j];
            double best;
            if (i == 0 && j == 0) {
                best = 0.0;
            } else {
                best = prev[j];
                if (j > 0) {
                    best = std::min(best, std::min(prev[j - 1], curr[j - 1]));
                }
            }
            curr[j] = best + d * d;
        }
        std::swap(prev, curr);
    }
    return std::sqrt(prev[m - 1]);
}

inline double dtw_distance(const NormalizedSeries& a, const NormalizedSeries& b, const DtwOptions& options = {}) {
    return dtw_distance(a.view(), b.view(), options);
}

/// Symmetric n x n matrix of pairwise distances with a zero diagonal.
class DistanceMatrix {
public:
    DistanceMatrix() = default;
    explicit DistanceMatrix(std::size_t n) : n_(n), data_(n * n, 0.0) {}

    std::size_t size() const noexcept { return n_; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * n_ + j]; }

    void set(std::size_t i, std::size_t j, double value) noexcept {
        data_[i * n_ + j] = value;
        data_[j * n_ + i] = value;
    }

    std::span<const double> row(std::size_t i) const noexcept { return {data_.data() + i * n_, n_}; }

    friend bool operator==(const DistanceMatrix&, const DistanceMatrix&) = default;

private:
    std::size_t n_ = 0;
    std::vector<double> data_;
};

/// Pairwise DTW over equal-length series, computed in parallel over rows.
inline DistanceMatrix distance_matrix(std::span<const NormalizedSeries> xs, std::size_t jobs = 1,
                                      const DtwOptions& options = {}) {
    DistanceMatrix d(xs.size());
    for (const auto& s : xs) {
        if (s.size() != xs.front().size()) {
            throw LengthMismatchError("distance_matrix needs equal-length series");
        }
    }
    parallel_for(xs.size(), jobs, [&](std::size_t i) {
        for (std::size_t j = i + 1; j < xs.size(); ++j) {
            d.set(i, j, dtw_distance(xs[i], xs[j], options));
        }
    });
    return d;
}

/// Square CSV with a header of column indices.
inline void write_matrix_csv(std::ostream& out, const DistanceMatrix& d) {
    const auto old_precision = out.precision(17);
    out << "index";
    for (std::size_t j = 0; j < d.size(); ++j) {
        out << ',' << j;
    }
    out << '\n';
    for (std::size_t i = 0; i < d.size(); ++i) {
        out << i;
        for (std::size_t j = 0; j < d.size(); ++j) {
            out << ',' << d(i, j);
        }
        out << '\n';
    }
    out.precision(old_precision);
}

} // namespace popshape
