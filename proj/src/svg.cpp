#include "grbm/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace grbm::svg {

namespace {

constexpr double kWidth = 800.0;
constexpr double kHeight = 600.0;
constexpr double kLeft = 80.0;
constexpr double kRight = 160.0;
constexpr double kTop = 50.0;
constexpr double kBottom = 70.0;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string tick_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
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

struct Axis {
    bool log = false;
    double lo = 0.0;
    double hi = 1.0;

    double map(double v) const { return log ? std::log10(v) : v; }
    double unit(double v) const { return (map(v) - lo) / (hi - lo); }
};

Axis make_axis(const std::vector<Series>& series, bool x, bool log) {
    Axis a;
    a.log = log;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& s : series) {
        for (double v : x ? s.x : s.y) {
            if (!std::isfinite(v) || (log && v <= 0.0)) continue;
            lo = std::min(lo, a.map(v));
            hi = std::max(hi, a.map(v));
        }
    }
    if (!std::isfinite(lo)) {
        lo = 0.0;
        hi = 1.0;
    }
    if (hi == lo) {
        lo -= 0.5;
        hi += 0.5;
    }
    const double pad = 0.04 * (hi - lo);
    a.lo = lo - pad;
    a.hi = hi + pad;
    return a;
}

}  // namespace

std::string line_chart(const std::vector<Series>& series, const ChartOptions& opts) {
    const Axis ax = make_axis(series, true, opts.log_x);
    const Axis ay = make_axis(series, false, opts.log_y);
    const double pw = kWidth - kLeft - kRight;
    const double ph = kHeight - kTop - kBottom;
    auto px = [&](double v) { return kLeft + ax.unit(v) * pw; };
    auto py = [&](double v) { return kTop + (1.0 - ay.unit(v)) * ph; };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 800 600\" width=\"800\" height=\"600\">\n";
    os << "<rect x=\"0\" y=\"0\" width=\"800\" height=\"600\" fill=\"white\"/>\n";
    os << "<text x=\"400\" y=\"28\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"18\">" << escape(opts.title) << "</text>\n";
    os << "<rect x=\"" << num(kLeft) << "\" y=\"" << num(kTop) << "\" width=\"" << num(pw) << "\" height=\"" << num(ph)
       << "\" fill=\"none\" stroke=\"black\"/>\n";

    constexpr int kTicks = 5;
    for (int k = 0; k <= kTicks; ++k) {
        const double fx = ax.lo + (ax.hi - ax.lo) * k / kTicks;
        const double fy = ay.lo + (ay.hi - ay.lo) * k / kTicks;
        const double vx = ax.log ? std::pow(10.0, fx) : fx;
        const double vy = ay.log ? std::pow(10.0, fy) : fy;
        const double sx = kLeft + pw * k / kTicks;
        const double sy = kTop + ph - ph * k / kTicks;
        os << "<line x1=\"" << num(sx) << "\" y1=\"" << num(kTop + ph) << "\" x2=\"" << num(sx) << "\" y2=\"" << num(kTop + ph + 6)
           << "\" stroke=\"black\"/>\n";
        os << "<text x=\"" << num(sx) << "\" y=\"" << num(kTop + ph + 22) << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
           << tick_label(vx) << "</text>\n";
        os << "<line x1=\"" << num(kLeft - 6) << "\" y1=\"" << num(sy) << "\" x2=\"" << num(kLeft) << "\" y2=\"" << num(sy)
           << "\" stroke=\"black\"/>\n";
        os << "<text x=\"" << num(kLeft - 10) << "\" y=\"" << num(sy + 4) << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\">"
           << tick_label(vy) << "</text>\n";
    }
    os << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"" << num(kHeight - 20)
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">" << escape(opts.x_label)
       << (opts.log_x ? " (log)" : "") << "</text>\n";
    os << "<text x=\"20\" y=\"" << num(kTop + ph / 2) << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\" transform=\"rotate(-90 20 "
       << num(kTop + ph / 2) << ")\">" << escape(opts.y_label) << (opts.log_y ? " (log)" : "") << "</text>\n";

    for (std::size_t s = 0; s < series.size(); ++s) {
        const auto& ser = series[s];
        const char* color = kPalette[s % (sizeof kPalette / sizeof *kPalette)];
        std::ostringstream pts;
        bool any = false;
        for (std::size_t i = 0; i < std::min(ser.x.size(), ser.y.size()); ++i) {
            const double x = ser.x[i];
            const double y = ser.y[i];
            if (!std::isfinite(x) || !std::isfinite(y) || (opts.log_x && x <= 0.0) || (opts.log_y && y <= 0.0)) continue;
            pts << (any ? " " : "") << num(px(x)) << "," << num(py(y));
            any = true;
            if (ser.markers)
                os << "<circle cx=\"" << num(px(x)) << "\" cy=\"" << num(py(y)) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
        }
        if (any) os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"" << pts.str() << "\"/>\n";
        const double ly = kTop + 16 + 20.0 * static_cast<double>(s);
        os << "<line x1=\"" << num(kWidth - kRight + 12) << "\" y1=\"" << num(ly) << "\" x2=\"" << num(kWidth - kRight + 36) << "\" y2=\""
           << num(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        os << "<text x=\"" << num(kWidth - kRight + 42) << "\" y=\"" << num(ly + 4) << "\" font-family=\"sans-serif\" font-size=\"12\">"
           << escape(ser.name) << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

}  // namespace grbm::svg
