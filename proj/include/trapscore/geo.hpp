#pragma once

#include <compare>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace trapscore::geo {

// Mean Earth radius of the WGS-84 ellipsoid.
inline constexpr double kEarthRadiusKm = 6371.0088;

struct LatLon {
    double lat = 0.0;
    double lon = 0.0;
    auto operator<=>(const LatLon&) const = default;
};

double haversine_km(LatLon a, LatLon b);

// Great-circle distances from p to each of qs, in km.
std::vector<double> distances_from(LatLon p, std::span<const LatLon> qs);

// Symmetric matrix of great-circle distances, zero diagonal.
Eigen::MatrixXd distance_matrix(std::span<const LatLon> points);

}  // namespace trapscore::geo
