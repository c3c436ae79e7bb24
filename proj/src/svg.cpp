#include "trapscore/svg.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

namespace trapscore::svg {
namespace {

constexpr double kW = 640, kH = 420, kLeft = 70, kRight = 20, kTop = 40, kBottom = 55;

std::string num(double v, int precision = 2) {
    if (!std::isfinite(v)) return "0";
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, precision);
    std::string s(buf, r.ptr);
    if (s == "-0.00" || s == "-0.0" || s == "-0") s = s.substr(1);
    return s;
}

std::string tick_label(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 4);
    std::string s(buf, r.ptr);
    return s == "-0" ? "0" : s;
}

std::string esc(const std::string& s) {
    std::string o;
    for (char c : s) {
        switch (c) {
        case '&': o += "&amp;"; break;
        case '<': o += "&lt;"; break;
        case '>': o += "&gt;"; break;
        case '"': o += "&quot;"; break;
        default: o += c;
        }
    }
    return o;
}

struct Frame {
    double x0, x1, y0, y1;
    double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kW - kLeft - kRight); }
    double py(double y) const { return kH - kBottom - (y - y0) / (y1 - y0) * (kH - kTop - kBottom); }
};

void widen(double& lo, double& hi) {
    if (!(lo < hi)) {
        const double pad = lo == 0.0 ? 1.0 : std::abs(lo) * 0.05;
        lo -= pad;
        hi += pad;
    } else {
        const double pad = (hi - lo) * 0.04;
        lo -= pad;
        hi += pad;
    }
}

// "Nice" tick positions covering [lo, hi].
std::vector<double> ticks(double lo, double hi) {
    const double span = hi - lo;
    const double raw = span / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 2.5, 5.0, 10.0})
        if (raw <= m * mag) {
            step = m * mag;
            break;
        }
    std::vector<double> t;
    for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * span; v += step) t.push_back(std::abs(v) < 1e-12 * step ? 0.0 : v);
    return t;
}

void header(std::ostringstream& o, const std::string& title) {
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(kW, 0) << "\" height=\"" << num(kH, 0)
      << "\" viewBox=\"0 0 " << num(kW, 0) << ' ' << num(kH, 0) << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << num(kW / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << esc(title) << "</text>\n";
}

void axes(std::ostringstream& o, const Frame& f, const std::string& xl, const std::string& yl) {
    o << "<g stroke=\"#333\" fill=\"none\">\n";
    o << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(kH - kBottom) << "\" x2=\"" << num(kW - kRight) << "\" y2=\""
      << num(kH - kBottom) << "\"/>\n";
    o << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(kTop) << "\" x2=\"" << num(kLeft) << "\" y2=\""
      << num(kH - kBottom) << "\"/>\n";
    o << "</g>\n<g fill=\"#333\">\n";
    for (double t : ticks(f.x0, f.x1)) {
        const double x = f.px(t);
        o << "<line x1=\"" << num(x) << "\" y1=\"" << num(kH - kBottom) << "\" x2=\"" << num(x) << "\" y2=\""
          << num(kH - kBottom + 5) << "\" stroke=\"#333\"/>";
        o << "<text x=\"" << num(x) << "\" y=\"" << num(kH - kBottom + 18) << "\" text-anchor=\"middle\">"
          << tick_label(t) << "</text>\n";
    }
    for (double t : ticks(f.y0, f.y1)) {
        const double y = f.py(t);
        o << "<line x1=\"" << num(kLeft - 5) << "\" y1=\"" << num(y) << "\" x2=\"" << num(kLeft) << "\" y2=\"" << num(y)
          << "\" stroke=\"#333\"/>";
        o << "<text x=\"" << num(kLeft - 8) << "\" y=\"" << num(y + 4) << "\" text-anchor=\"end\">" << tick_label(t)
          << "</text>\n";
    }
    o << "<text x=\"" << num((kLeft + kW - kRight) / 2) << "\" y=\"" << num(kH - 12)
      << "\" text-anchor=\"middle\">" << esc(xl) << "</text>\n";
    o << "<text x=\"16\" y=\"" << num((kTop + kH - kBottom) / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << num((kTop + kH - kBottom) / 2) << ")\">" << esc(yl) << "</text>\n</g>\n";
}

}  // namespace

const std::vector<std::string>& quintile_palette() {
    static const std::vector<std::string> p{"#d7191c", "#fdae61", "#ffffbf", "#a6d96a", "#1a9641"};
    return p;
}

std::string render(const LinePlot& plot) {
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    auto span = [&](const std::vector<double>& xs, const std::vector<double>& ys) {
        for (double v : xs) x0 = std::min(x0, v), x1 = std::max(x1, v);
        for (double v : ys) y0 = std::min(y0, v), y1 = std::max(y1, v);
    };
    for (const auto& s : plot.series) span(s.x, s.y);
    for (const auto& b : plot.bands) {
        span(b.x, b.lower);
        span(b.x, b.upper);
    }
    if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    widen(x0, x1);
    widen(y0, y1);
    const Frame f{x0, x1, y0, y1};

    std::ostringstream o;
    header(o, plot.title);
    axes(o, f, plot.x_label, plot.y_label);
    if (plot.diagonal) {
        const double a = std::max(x0, y0), b = std::min(x1, y1);
        o << "<line x1=\"" << num(f.px(a)) << "\" y1=\"" << num(f.py(a)) << "\" x2=\"" << num(f.px(b)) << "\" y2=\""
          << num(f.py(b)) << "\" stroke=\"#999\" stroke-dasharray=\"4 4\"/>\n";
    }
    for (const auto& b : plot.bands) {
        o << "<polygon fill=\"" << b.color << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
        for (std::size_t i = 0; i < b.x.size(); ++i) o << num(f.px(b.x[i])) << ',' << num(f.py(b.upper[i])) << ' ';
        for (std::size_t i = b.x.size(); i-- > 0;) o << num(f.px(b.x[i])) << ',' << num(f.py(b.lower[i])) << (i ? " " : "");
        o << "\"/>\n";
    }
    double legend_y = kTop + 10;
    for (const auto& s : plot.series) {
        if (s.points) {
            for (std::size_t i = 0; i < s.x.size(); ++i)
                o << "<circle cx=\"" << num(f.px(s.x[i])) << "\" cy=\"" << num(f.py(s.y[i])) << "\" r=\"2.5\" fill=\""
                  << s.color << "\"/>\n";
        } else {
            o << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.8\" points=\"";
            for (std::size_t i = 0; i < s.x.size(); ++i)
                o << num(f.px(s.x[i])) << ',' << num(f.py(s.y[i])) << (i + 1 < s.x.size() ? " " : "");
            o << "\"/>\n";
        }
        if (!s.label.empty()) {
            o << "<rect x=\"" << num(kW - kRight - 150) << "\" y=\"" << num(legend_y - 9) << "\" width=\"12\" height=\"3\" fill=\""
              << s.color << "\"/><text x=\"" << num(kW - kRight - 132) << "\" y=\"" << num(legend_y - 4) << "\">"
              << esc(s.label) << "</text>\n";
            legend_y += 16;
        }
    }
    o << "</svg>\n";
    return o.str();
}

std::string histogram(const std::vector<int>& counts, double lo, double hi, const std::string& title,
                      const std::string& x_label) {
    const int peak = counts.empty() ? 1 : std::max(1, *std::max_element(counts.begin(), counts.end()));
    const Frame f{lo, hi, 0.0, peak * 1.05};
    std::ostringstream o;
    header(o, title);
    axes(o, f, x_label, "traps");
    const double w = (hi - lo) / static_cast<double>(std::max<std::size_t>(counts.size(), 1));
    o << "<g fill=\"#4c78a8\" stroke=\"white\">\n";
    for (std::size_t i = 0; i < counts.size(); ++i) {
        const double a = lo + w * static_cast<double>(i);
        const double top = f.py(counts[i]);
        o << "<rect x=\"" << num(f.px(a)) << "\" y=\"" << num(top) << "\" width=\"" << num(f.px(a + w) - f.px(a))
          << "\" height=\"" << num(f.py(0) - top) << "\"/>\n";
    }
    o << "</g>\n</svg>\n";
    return o.str();
}

std::string scatter(const std::vector<ScatterPoint>& points, const std::vector<std::string>& legend,
                    const std::string& title, const std::string& x_label, const std::string& y_label) {
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& p : points) {
        x0 = std::min(x0, p.x), x1 = std::max(x1, p.x);
        y0 = std::min(y0, p.y), y1 = std::max(y1, p.y);
    }
    if (points.empty()) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    widen(x0, x1);
    widen(y0, y1);
    const Frame f{x0, x1, y0, y1};
    const auto& pal = quintile_palette();
    std::ostringstream o;
    header(o, title);
    axes(o, f, x_label, y_label);
    for (const auto& p : points)
        o << "<circle cx=\"" << num(f.px(p.x)) << "\" cy=\"" << num(f.py(p.y)) << "\" r=\"4\" stroke=\"#333\" stroke-width=\"0.5\" fill=\""
          << pal[static_cast<std::size_t>(std::clamp(p.group, 0, 4))] << "\"/>\n";
    for (std::size_t i = 0; i < legend.size() && i < pal.size(); ++i)
        o << "<circle cx=\"" << num(kW - kRight - 140) << "\" cy=\"" << num(kTop + 8 + 16.0 * static_cast<double>(i))
          << "\" r=\"4\" fill=\"" << pal[i] << "\" stroke=\"#333\" stroke-width=\"0.5\"/><text x=\"" << num(kW - kRight - 130)
          << "\" y=\"" << num(kTop + 12 + 16.0 * static_cast<double>(i)) << "\">" << esc(legend[i]) << "</text>\n";
    o << "</svg>\n";
    return o.str();
}

}  // namespace trapscore::svg
