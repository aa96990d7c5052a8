#pragma once

// Raw population traces, CSV ingest and max-normalization.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace popshape {

inline constexpr std::size_t kDefaultSimLength = 400;

struct RawSeries {
    std::vector<double> values;
    std::string species_name;
    std::string model_id;
    std::string dataset_tag;
};

/// Fixed-length trace scaled into [0, 1].
///
/// max(values) == 1 unless the source was all zero, in which case every value is 0.
struct NormalizedSeries {
    std::vector<double> values;
    std::string species_name;
    std::string model_id;
    std::string dataset_tag;

    std::size_t size() const noexcept { return values.size(); }
    double operator[](std::size_t i) const noexcept { return values[i]; }
    std::span<const double> view() const noexcept { return values; }
};

class TooShortError : public std::runtime_error {
public:
    TooShortError(std::size_t have, std::size_t need)
        : std::runtime_error("series has " + std::to_string(have) + " points, need at least " +
                             std::to_string(need)),
          have_(have), need_(need) {}

    std::size_t have() const noexcept { return have_; }
    std::size_t need() const noexcept { return need_; }

private:
    std::size_t have_;
    std::size_t need_;
};

class MalformedCsvError : public std::runtime_error {
public:
    MalformedCsvError(const std::string& what, std::size_t row, std::size_t column)
        : std::runtime_error(what + " (row " + std::to_string(row) + ", column " +
                             std::to_string(column) + ")"),
          row_(row), column_(column) {}

    /// 1-based, header is row 1.
    std::size_t row() const noexcept { return row_; }
    /// 1-based, time column is column 1.
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t row_;
    std::size_t column_;
};

class EmptyFileError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Divides a span by its maximum. All-zero input is copied unchanged.
inline std::vector<double> scale_to_unit_max(std::span<const double> values) {
    std::vector<double> out(values.begin(), values.end());
    if (out.empty()) {
        return out;
    }
    const double peak = *std::max_element(out.begin(), out.end());
    if (peak > 0.0) {
        for (auto& v : out) {
            v /= peak;
        }
        // Guarantee an exact 1.0 at the peak regardless of rounding.
        for (std::size_t i = 0; i < out.size(); ++i) {
            if (values[i] == peak) {
                out[i] = 1.0;
            }
        }
    }
    return out;
}

inline NormalizedSeries preprocess(const RawSeries& raw, std::size_t sim_length = kDefaultSimLength) {
    if (sim_length == 0) {
        throw std::invalid_argument("sim_length must be positive");
    }
    if (raw.values.size() < sim_length) {
        throw TooShortError(raw.values.size(), sim_length);
    }
    for (double v : raw.values) {
        if (!std::isfinite(v) || v < 0.0) {
            throw std::invalid_argument("raw series '" + raw.species_name +
                                        "' contains a negative or non-finite value");
        }
    }
    std::span<const double> window(raw.values.data(), sim_length);
    return NormalizedSeries{scale_to_unit_max(window), raw.species_name, raw.model_id, raw.dataset_tag};
}

/// Re-normalizes an already normalized series; a no-op on valid input.
inline NormalizedSeries preprocess(const NormalizedSeries& s) {
    return NormalizedSeries{scale_to_unit_max(s.values), s.species_name, s.model_id, s.dataset_tag};
}

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            cells.push_back(trim(line.substr(start)));
            break;
        }
        cells.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
    return cells;
}

inline bool parse_double(std::string_view cell, double& out) {
    if (cell.empty()) {
        return false;
    }
    if (cell.front() == '+') {
        cell.remove_prefix(1);
    }
    const auto* first = cell.data();
    const auto* last = cell.data() + cell.size();
    const auto result = std::from_chars(first, last, out);
    return result.ec == std::errc{} && result.ptr == last;
}

} // namespace detail

/// Parses CSV text: header row, time column first, one column per species.
inline std::vector<RawSeries> parse_csv(std::string_view text, const std::string& model_id = {},
                                        const std::string& dataset_tag = {}) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        auto pos = text.find('\n', start);
        if (pos == std::string_view::npos) {
            pos = text.size();
        }
        auto line = text.substr(start, pos - start);
        if (!detail::trim(line).empty()) {
            lines.push_back(line);
        }
        start = pos + 1;
    }
    if (lines.empty()) {
        throw EmptyFileError("CSV input is empty");
    }
    // Strip a UTF-8 byte order mark.
    if (lines.front().substr(0, 3) == "\xEF\xBB\xBF") {
        lines.front().remove_prefix(3);
    }

    const auto header = detail::split_commas(lines.front());
    if (header.size() < 2) {
        throw MalformedCsvError("header needs a time column and at least one species column", 1,
                                header.size());
    }
    std::vector<RawSeries> series(header.size() - 1);
    for (std::size_t c = 1; c < header.size(); ++c) {
        series[c - 1].species_name = std::string(header[c]);
        series[c - 1].model_id = model_id;
        series[c - 1].dataset_tag = dataset_tag;
    }
    if (lines.size() == 1) {
        throw EmptyFileError("CSV input has a header but no data rows");
    }

    for (std::size_t r = 1; r < lines.size(); ++r) {
        const auto cells = detail::split_commas(lines[r]);
        if (cells.size() != header.size()) {
            throw MalformedCsvError("ragged row: expected " + std::to_string(header.size()) +
                                        " cells, found " + std::to_string(cells.size()),
                                    r + 1, std::min(cells.size(), header.size()) + 1);
        }
        for (std::size_t c = 0; c < cells.size(); ++c) {
            double value = 0.0;
            if (!detail::parse_double(cells[c], value)) {
                throw MalformedCsvError("non-numeric cell '" + std::string(cells[c]) + "'", r + 1, c + 1);
            }
            if (c == 0) {
                continue;
            }
            if (!std::isfinite(value) || value < 0.0) {
                throw MalformedCsvError("population must be finite and non-negative", r + 1, c + 1);
            }
            series[c - 1].values.push_back(value);
        }
    }
    return series;
}

/// Reads one simulation export. model_id defaults to the file stem.
inline std::vector<RawSeries> ingest_csv(const std::filesystem::path& path, const std::string& dataset_tag = {}) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (text.empty()) {
        throw EmptyFileError(path.string() + " is empty");
    }
    return parse_csv(text, path.stem().string(), dataset_tag);
}

} // namespace popshape
