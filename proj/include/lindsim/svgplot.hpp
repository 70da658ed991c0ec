// Minimal static SVG line plots: axes, ticks, legend, multiple series,
// optional log10 ordinate. No display, files only.
#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace lindsim {

struct PlotSeries {
    std::string name;
    std::vector<double> x, y;
};

struct PlotOptions {
    std::string title;
    std::string x_label = "t";
    std::string y_label;
    bool log_y = false;
    int width = 760;
    int height = 440;
};

inline void write_svg_plot(const std::string& path, const std::vector<PlotSeries>& series,
                           const PlotOptions& opts = {}) {
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                   "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
    const double ml = 64, mr = 16, mt = opts.title.empty() ? 16 : 34, mb = 44;
    const double pw = opts.width - ml - mr, ph = opts.height - mt - mb;

    auto ylog = [&](double v) { return opts.log_y ? std::log10(std::max(v, 1e-300)) : v; };

    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, ylog(s.y[i]));
            ymax = std::max(ymax, ylog(s.y[i]));
        }
    if (xmin >= xmax) xmax = xmin + 1;
    if (ymin >= ymax) ymax = ymin + 1;
    const double ypad = 0.05 * (ymax - ymin);
    ymin -= ypad;
    ymax += ypad;

    auto px = [&](double x) { return ml + pw * (x - xmin) / (xmax - xmin); };
    auto py = [&](double y) { return mt + ph * (1.0 - (ylog(y) - ymin) / (ymax - ymin)); };

    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open plot file: " + path);
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << opts.width << "' height='"
        << opts.height << "'>\n<rect width='100%' height='100%' fill='white'/>\n";
    if (!opts.title.empty())
        out << "<text x='" << opts.width / 2 << "' y='20' text-anchor='middle' font-size='14'>"
            << opts.title << "</text>\n";

    // frame and ticks
    out << "<rect x='" << ml << "' y='" << mt << "' width='" << pw << "' height='" << ph
        << "' fill='none' stroke='black'/>\n";
    const int ticks = 5;
    for (int i = 0; i <= ticks; ++i) {
        const double fx = xmin + (xmax - xmin) * i / ticks;
        const double fy = ymin + (ymax - ymin) * i / ticks;
        out << "<line x1='" << px(fx) << "' y1='" << mt + ph << "' x2='" << px(fx) << "' y2='"
            << mt + ph + 4 << "' stroke='black'/>\n";
        out << "<text x='" << px(fx) << "' y='" << mt + ph + 16
            << "' text-anchor='middle' font-size='10'>" << static_cast<float>(fx) << "</text>\n";
        const double yv = opts.log_y ? std::pow(10.0, fy) : fy;
        out << "<line x1='" << ml - 4 << "' y1='" << mt + ph * (1.0 - double(i) / ticks) << "' x2='"
            << ml << "' y2='" << mt + ph * (1.0 - double(i) / ticks) << "' stroke='black'/>\n";
        out << "<text x='" << ml - 6 << "' y='" << mt + ph * (1.0 - double(i) / ticks) + 3
            << "' text-anchor='end' font-size='10'>" << static_cast<float>(opts.log_y ? yv : fy)
            << "</text>\n";
    }
    out << "<text x='" << ml + pw / 2 << "' y='" << opts.height - 8
        << "' text-anchor='middle' font-size='12'>" << opts.x_label << "</text>\n";
    if (!opts.y_label.empty())
        out << "<text x='14' y='" << mt + ph / 2 << "' text-anchor='middle' font-size='12' "
            << "transform='rotate(-90 14 " << mt + ph / 2 << ")'>" << opts.y_label << "</text>\n";

    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* color = colors[s % 8];
        out << "<polyline fill='none' stroke='" << color << "' stroke-width='1.2' points='";
        for (std::size_t i = 0; i < series[s].x.size(); ++i) {
            if (!std::isfinite(series[s].x[i]) || !std::isfinite(series[s].y[i])) continue;
            out << px(series[s].x[i]) << ',' << py(series[s].y[i]) << ' ';
        }
        out << "'/>\n";
        out << "<text x='" << ml + pw - 6 << "' y='" << mt + 14 + 13 * s
            << "' text-anchor='end' font-size='11' fill='" << color << "'>" << series[s].name
            << "</text>\n";
    }
    out << "</svg>\n";
}

}  // namespace lindsim
