#pragma once

// Minimal hand-written SVG charts. Coordinates are printed with fixed
// precision so the same data always produces the same text.

#include <string>
#include <vector>

namespace trapscore::svg {

struct Series {
    std::vector<double> x, y;
    std::string color = "#1f77b4";
    std::string label;
    bool points = false;  // markers instead of a polyline
};

struct Band {
    std::vector<double> x, lower, upper;
    std::string color = "#1f77b4";
};

struct LinePlot {
    std::string title, x_label, y_label;
    std::vector<Series> series;
    std::vector<Band> bands;
    bool diagonal = false;  // dashed y = x reference (ROC charts)
};

std::string render(const LinePlot& plot);

// Bars over equal-width bins on [lo, hi].
std::string histogram(const std::vector<int>& counts, double lo, double hi, const std::string& title,
                      const std::string& x_label);

struct ScatterPoint {
    double x = 0.0, y = 0.0;
    int group = 0;  // color index
};

std::string scatter(const std::vector<ScatterPoint>& points, const std::vector<std::string>& legend,
                    const std::string& title, const std::string& x_label, const std::string& y_label);

// Five-step sequential palette used for quintile coloring.
const std::vector<std::string>& quintile_palette();

}  // namespace trapscore::svg
