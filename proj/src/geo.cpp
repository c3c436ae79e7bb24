#include "trapscore/geo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "trapscore/kernels.hpp"

namespace trapscore::geo {
namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

struct UnitVectors {
    std::vector<double> x, y, z;
};

UnitVectors to_unit(std::span<const LatLon> pts) {
    UnitVectors u;
    u.x.reserve(pts.size());
    u.y.reserve(pts.size());
    u.z.reserve(pts.size());
    for (const auto& p : pts) {
        const double phi = p.lat * kDegToRad, lam = p.lon * kDegToRad;
        u.x.push_back(std::cos(phi) * std::cos(lam));
        u.y.push_back(std::cos(phi) * std::sin(lam));
        u.z.push_back(std::sin(phi));
    }
    return u;
}

// chord length c on the unit sphere subtends the central angle 2 asin(c/2)
inline double chord_to_km(double chord) {
    return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, 0.5 * chord));
}

}  // namespace

double haversine_km(LatLon a, LatLon b) {
    const double dphi = (b.lat - a.lat) * kDegToRad;
    const double dlam = (b.lon - a.lon) * kDegToRad;
    const double s1 = std::sin(0.5 * dphi), s2 = std::sin(0.5 * dlam);
    const double h = s1 * s1 + std::cos(a.lat * kDegToRad) * std::cos(b.lat * kDegToRad) * s2 * s2;
    return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(h)));
}

std::vector<double> distances_from(LatLon p, std::span<const LatLon> qs) {
    const auto u = to_unit(qs);
    const LatLon one[] = {p};
    const auto up = to_unit(one);
    std::vector<double> out(qs.size());
    kernels::chord_distances(up.x[0], up.y[0], up.z[0], u.x, u.y, u.z, out);
    for (auto& d : out) d = chord_to_km(d);
    return out;
}

Eigen::MatrixXd distance_matrix(std::span<const LatLon> points) {
    const auto n = static_cast<Eigen::Index>(points.size());
    const auto u = to_unit(points);
    Eigen::MatrixXd d(n, n);
    std::vector<double> row(points.size());
    for (Eigen::Index i = 0; i < n; ++i) {
        kernels::chord_distances(u.x[i], u.y[i], u.z[i], u.x, u.y, u.z, row);
        for (Eigen::Index j = 0; j < n; ++j) d(i, j) = chord_to_km(row[j]);
    }
    // symmetrize exactly and pin the diagonal
    for (Eigen::Index i = 0; i < n; ++i) {
        d(i, i) = 0.0;
        for (Eigen::Index j = i + 1; j < n; ++j) d(j, i) = d(i, j);
    }
    return d;
}

}  // namespace trapscore::geo
