#pragma once

// Minimal self-contained SVG charts for the report command.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

namespace coinprune::tools {

struct Series {
    std::string label;
    std::vector<std::pair<double, double>> points;
};

struct ChartSpec {
    std::string title;
    std::string x_label;
    std::string y_label;
    double x_min = 0, x_max = 1;
    double y_min = 0, y_max = 1;
    std::string note; // small text under the title, e.g. the seed
};

inline std::string escape_xml(const std::string& s)
{
    std::string out;
    for (const char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

inline std::string num(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string line_chart(const ChartSpec& spec, const std::vector<Series>& series)
{
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};
    constexpr double W = 640, H = 420, L = 70, R = 150, T = 50, B = 55;
    const double pw = W - L - R, ph = H - T - B;
    const auto sx = [&](double x) { return L + (x - spec.x_min) / (spec.x_max - spec.x_min) * pw; };
    const auto sy = [&](double y) { return T + ph - (y - spec.y_min) / (spec.y_max - spec.y_min) * ph; };

    std::string s;
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(W) + "\" height=\"" + num(H) +
         "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    s += "<desc>" + escape_xml(spec.note) + "</desc>\n";
    s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s += "<text x=\"" + num(L) + "\" y=\"20\" font-size=\"14\">" + escape_xml(spec.title) + "</text>\n";
    s += "<text x=\"" + num(L) + "\" y=\"36\" fill=\"#555\">" + escape_xml(spec.note) + "</text>\n";
    s += "<rect x=\"" + num(L) + "\" y=\"" + num(T) + "\" width=\"" + num(pw) + "\" height=\"" + num(ph) +
         "\" fill=\"none\" stroke=\"#333\"/>\n";
    for (int i = 0; i <= 5; ++i) {
        const double xv = spec.x_min + (spec.x_max - spec.x_min) * i / 5;
        const double yv = spec.y_min + (spec.y_max - spec.y_min) * i / 5;
        s += "<line x1=\"" + num(sx(xv)) + "\" y1=\"" + num(T + ph) + "\" x2=\"" + num(sx(xv)) + "\" y2=\"" +
             num(T + ph + 4) + "\" stroke=\"#333\"/>\n";
        s += "<text x=\"" + num(sx(xv)) + "\" y=\"" + num(T + ph + 16) + "\" text-anchor=\"middle\">" + num(xv) +
             "</text>\n";
        s += "<line x1=\"" + num(L - 4) + "\" y1=\"" + num(sy(yv)) + "\" x2=\"" + num(L) + "\" y2=\"" + num(sy(yv)) +
             "\" stroke=\"#333\"/>\n";
        s += "<text x=\"" + num(L - 6) + "\" y=\"" + num(sy(yv) + 4) + "\" text-anchor=\"end\">" + num(yv) +
             "</text>\n";
    }
    s += "<text x=\"" + num(L + pw / 2) + "\" y=\"" + num(H - 12) + "\" text-anchor=\"middle\">" +
         escape_xml(spec.x_label) + "</text>\n";
    s += "<text transform=\"translate(18," + num(T + ph / 2) + ") rotate(-90)\" text-anchor=\"middle\">" +
         escape_xml(spec.y_label) + "</text>\n";

    for (std::size_t i = 0; i < series.size(); ++i) {
        const char* c = colors[i % std::size(colors)];
        std::string pts;
        for (const auto& [x, y] : series[i].points) {
            if (!std::isfinite(y)) continue;
            pts += num(sx(x)) + "," + num(sy(std::clamp(y, spec.y_min, spec.y_max))) + " ";
        }
        s += "<polyline fill=\"none\" stroke=\"" + std::string(c) + "\" stroke-width=\"1.5\" points=\"" + pts +
             "\"/>\n";
        const double ly = T + 14 + 16.0 * static_cast<double>(i);
        s += "<line x1=\"" + num(W - R + 10) + "\" y1=\"" + num(ly) + "\" x2=\"" + num(W - R + 30) + "\" y2=\"" +
             num(ly) + "\" stroke=\"" + c + "\" stroke-width=\"2\"/>\n";
        s += "<text x=\"" + num(W - R + 35) + "\" y=\"" + num(ly + 4) + "\">" + escape_xml(series[i].label) +
             "</text>\n";
    }
    s += "</svg>\n";
    return s;
}

} // namespace coinprune::tools
