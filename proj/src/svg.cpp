#include "qscope/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace qscope {

namespace {

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    void add(double v) {
        if (!std::isfinite(v)) return;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    void pad() {
        if (lo > hi) { lo = 0.0; hi = 1.0; }
        if (lo == hi) { lo -= 0.5; hi += 0.5; }
        double m = 0.05 * (hi - lo);
        lo -= m;
        hi += m;
    }
};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

}  // namespace

void write_svg_plot(const std::filesystem::path& path, const PlotSpec& spec) {
    const double ml = 70, mr = 20, mt = 36, mb = 52;
    const double pw = spec.width - ml - mr, ph = spec.height - mt - mb;

    auto txv = [&](double v) { return spec.logx ? std::log10(std::max(v, 1e-300)) : v; };
    auto tyv = [&](double v) { return spec.logy ? std::log10(std::max(v, 1e-300)) : v; };

    Range rx, ry;
    for (const auto& s : spec.series) {
        for (double v : s.x) rx.add(txv(v));
        for (double v : s.y) ry.add(tyv(v));
    }
    rx.pad();
    ry.pad();

    auto px = [&](double v) { return ml + (txv(v) - rx.lo) / (rx.hi - rx.lo) * pw; };
    auto py = [&](double v) { return mt + ph - (tyv(v) - ry.lo) / (ry.hi - ry.lo) * ph; };

    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write SVG: " + path.string());
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << spec.width << "' height='"
        << spec.height << "'>\n<rect width='100%' height='100%' fill='white'/>\n";
    out << "<text x='" << spec.width / 2 << "' y='20' text-anchor='middle' font-size='14'>"
        << spec.title << "</text>\n";

    // frame
    out << "<rect x='" << ml << "' y='" << mt << "' width='" << pw << "' height='" << ph
        << "' fill='none' stroke='black'/>\n";

    const int nticks = 5;
    for (int i = 0; i <= nticks; ++i) {
        double fx = rx.lo + (rx.hi - rx.lo) * i / nticks;
        double fy = ry.lo + (ry.hi - ry.lo) * i / nticks;
        double gx = ml + pw * i / nticks;
        double gy = mt + ph - ph * i / nticks;
        double labx = spec.logx ? std::pow(10.0, fx) : fx;
        double laby = spec.logy ? std::pow(10.0, fy) : fy;
        out << "<line x1='" << gx << "' y1='" << mt + ph << "' x2='" << gx << "' y2='"
            << mt + ph + 5 << "' stroke='black'/>\n";
        out << "<text x='" << gx << "' y='" << mt + ph + 18
            << "' text-anchor='middle' font-size='11'>" << fmt(labx) << "</text>\n";
        out << "<line x1='" << ml - 5 << "' y1='" << gy << "' x2='" << ml << "' y2='" << gy
            << "' stroke='black'/>\n";
        out << "<text x='" << ml - 8 << "' y='" << gy + 4
            << "' text-anchor='end' font-size='11'>" << fmt(laby) << "</text>\n";
    }
    out << "<text x='" << ml + pw / 2 << "' y='" << spec.height - 8
        << "' text-anchor='middle' font-size='12'>" << spec.xlabel << "</text>\n";
    out << "<text x='16' y='" << mt + ph / 2
        << "' text-anchor='middle' font-size='12' transform='rotate(-90 16 " << mt + ph / 2
        << ")'>" << spec.ylabel << "</text>\n";

    for (const auto& s : spec.series) {
        out << "<polyline fill='none' stroke='" << s.color << "' stroke-width='1.5' points='";
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            out << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
        }
        out << "'/>\n";
    }
    out << "</svg>\n";
}

}  // namespace qscope
