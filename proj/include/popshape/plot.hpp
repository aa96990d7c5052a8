#pragma once

// Minimal SVG overlays of cluster members and their medoid.

#include "labels.hpp"

#include <algorithm>
#include <cstddef>
#include <cstdio>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace popshape {

struct PlotStyle {
    int width = 640;
    int height = 320;
    int margin = 32;
};

namespace detail {

inline void svg_polyline(std::ostream& out, std::span<const double> values, const PlotStyle& style, const char* stroke,
                         double stroke_width, double opacity) {
    const double w = style.width - 2.0 * style.margin;
    const double h = style.height - 2.0 * style.margin;
    const std::size_t n = values.size();
    out << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"" << stroke_width
        << "\" stroke-opacity=\"" << opacity << "\" points=\"";
    char buf[48];
    for (std::size_t t = 0; t < n; ++t) {
        const double x = style.margin + (n > 1 ? w * static_cast<double>(t) / static_cast<double>(n - 1) : 0.0);
        const double y = style.margin + h * (1.0 - std::clamp(values[t], 0.0, 1.0));
        std::snprintf(buf, sizeof(buf), "%s%.1f,%.1f", t ? " " : "", x, y);
        out << buf;
    }
    out << "\"/>\n";
}

} // namespace detail

/// Members drawn thin and translucent, the medoid thick on top. Values are expected in [0, 1].
inline void write_cluster_svg(std::ostream& out, std::span<const std::vector<double>> members,
                              std::span<const double> medoid, const std::string& title, const PlotStyle& style = {}) {
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << style.width << "\" height=\"" << style.height
        << "\" viewBox=\"0 0 " << style.width << ' ' << style.height << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<rect x=\"" << style.margin << "\" y=\"" << style.margin << "\" width=\"" << style.width - 2 * style.margin
        << "\" height=\"" << style.height - 2 * style.margin << "\" fill=\"none\" stroke=\"#999\"/>\n";
    out << "<text x=\"" << style.margin << "\" y=\"" << style.margin - 10 << "\" font-family=\"sans-serif\" "
        << "font-size=\"13\">" << title << "</text>\n";
    for (const auto& m : members) {
        detail::svg_polyline(out, m, style, "#4a7ab5", 0.6, 0.35);
    }
    detail::svg_polyline(out, medoid, style, "#c0392b", 2.5, 1.0);
    out << "</svg>\n";
}

} // namespace popshape
