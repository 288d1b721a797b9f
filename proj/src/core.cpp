#include "crowdperc/core.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <numbers>

namespace crowdperc {

double normalize_angle(double theta) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double r = std::fmod(theta, two_pi);
    if (r <= -std::numbers::pi) r += two_pi;
    if (r > std::numbers::pi) r -= two_pi;
    return r;
}

bool Box3D::valid() const {
    return std::isfinite(x) && std::isfinite(y) && std::isfinite(z) && std::isfinite(theta) &&
           std::isfinite(l) && std::isfinite(w) && std::isfinite(h) && l > 0 && w > 0 && h > 0;
}

Box3D Box3D::normalized() const {
    Box3D b = *this;
    b.theta = normalize_angle(theta);
    return b;
}

bool Detection::valid() const {
    if (!std::isfinite(score)) return false;
    if (velocity && !velocity->allFinite()) return false;
    return box3d.valid();
}

double center_distance(const Box3D& a, const Box3D& b, DistanceMode mode) {
    if (mode == DistanceMode::BEV2D) return (a.center_bev() - b.center_bev()).norm();
    return (a.center() - b.center()).norm();
}

std::array<Eigen::Vector2d, 4> box_corners_bev(const Box3D& b) {
    const Eigen::Rotation2Dd rot(b.theta);
    const double hl = 0.5 * b.l, hw = 0.5 * b.w;
    const std::array<Eigen::Vector2d, 4> local = {
        Eigen::Vector2d(hl, -hw), Eigen::Vector2d(hl, hw), Eigen::Vector2d(-hl, hw),
        Eigen::Vector2d(-hl, -hw)};
    std::array<Eigen::Vector2d, 4> out;
    for (std::size_t i = 0; i < 4; ++i) out[i] = b.center_bev() + rot * local[i];
    return out;
}

}  // namespace crowdperc
