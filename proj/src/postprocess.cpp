#include "crowdperc/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace crowdperc {

std::vector<Detection> circle_nms(std::span<const Detection> dets, double radius) {
    std::vector<std::size_t> order(dets.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });

    const double r2 = radius * radius;
    std::vector<Detection> kept;
    for (std::size_t idx : order) {
        const Eigen::Vector2d c = dets[idx].box3d.center_bev();
        const bool clear = std::none_of(kept.begin(), kept.end(), [&](const Detection& k) {
            return (k.box3d.center_bev() - c).squaredNorm() < r2;
        });
        if (clear) kept.push_back(dets[idx]);
    }
    return kept;
}

std::size_t count_points_in_box(const PointCloud& pc, const Box3D& b) {
    const double c = std::cos(b.theta), s = std::sin(b.theta);
    const double hl = 0.5 * b.l, hw = 0.5 * b.w, hh = 0.5 * b.h;
    std::size_t n = 0;
    for (Eigen::Index i = 0; i < pc.size(); ++i) {
        const double dx = pc.points(i, 0) - b.x;
        const double dy = pc.points(i, 1) - b.y;
        const double dz = pc.points(i, 2) - b.z;
        // R(-theta) applied to (dx, dy)
        const double lx = c * dx + s * dy;
        const double ly = -s * dx + c * dy;
        if (std::abs(lx) <= hl && std::abs(ly) <= hw && std::abs(dz) <= hh) ++n;
    }
    return n;
}

std::vector<Detection> filter_min_points(std::span<const Detection> dets, const PointCloud& pc,
                                         int min_points) {
    std::vector<Detection> out;
    out.reserve(dets.size());
    for (const auto& d : dets) {
        if (min_points <= 0 || count_points_in_box(pc, d.box3d) >= static_cast<std::size_t>(min_points)) {
            out.push_back(d);
        }
    }
    return out;
}

std::vector<Detection> postprocess(std::span<const Detection> dets, const PointCloud& pc,
                                   const NmsConfig& cfg) {
    const auto kept = circle_nms(dets, cfg.radius);
    return filter_min_points(kept, pc, cfg.min_points);
}

}  // namespace crowdperc
