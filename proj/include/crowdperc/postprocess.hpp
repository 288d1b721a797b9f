#pragma once

#include "crowdperc/core.hpp"
#include "crowdperc/dataset_io.hpp"

#include <span>
#include <vector>

namespace crowdperc {

struct NmsConfig {
    double radius = 0.3;  // meters, BEV
    int min_points = 5;

    bool valid() const { return radius > 0 && min_points >= 0; }
};

/// Greedy circle NMS. Detections are visited by descending score (ties keep
/// input order); one is accepted iff its BEV center is at least `radius` from
/// every accepted detection. Output is in acceptance order.
std::vector<Detection> circle_nms(std::span<const Detection> dets, double radius);

/// Points within the box: |R(-theta)(p - c)|_xy <= (l/2, w/2) and
/// |p_z - z| <= h/2, boundaries inclusive.
std::size_t count_points_in_box(const PointCloud& pc, const Box3D& b);

/// Keeps detections holding at least `min_points` cloud points; order preserved.
std::vector<Detection> filter_min_points(std::span<const Detection> dets, const PointCloud& pc,
                                         int min_points);

/// circle_nms followed by filter_min_points.
std::vector<Detection> postprocess(std::span<const Detection> dets, const PointCloud& pc,
                                   const NmsConfig& cfg);

}  // namespace crowdperc
