#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace crowdperc {

/// Wraps an angle into (-pi, pi].
double normalize_angle(double theta);

/// Oriented 3D box. Yaw is counterclockwise about +z, zero along sensor +x.
struct Box3D {
    double x = 0, y = 0, z = 0;
    double l = 1, w = 1, h = 1;
    double theta = 0;

    Eigen::Vector3d center() const { return {x, y, z}; }
    Eigen::Vector2d center_bev() const { return {x, y}; }
    Eigen::Vector3d extent() const { return {l, w, h}; }

    /// Positive finite extents and finite pose.
    bool valid() const;
    /// Same box with theta wrapped into (-pi, pi].
    Box3D normalized() const;

    friend bool operator==(const Box3D&, const Box3D&) = default;
};

struct Box2D {
    double x = 0, y = 0;  // top-left, pixels
    double w = 1, h = 1;

    bool valid() const { return w > 0 && h > 0; }
    friend bool operator==(const Box2D&, const Box2D&) = default;
};

/// 0: not occluded, 1: at most half the body, 2: more than half.
enum class OcclusionLevel : std::uint8_t { None = 0, Partial = 1, Heavy = 2 };

inline constexpr std::array<OcclusionLevel, 3> kOcclusionLevels = {
    OcclusionLevel::None, OcclusionLevel::Partial, OcclusionLevel::Heavy};

/// Annotated pedestrians in real data carry at least this many LiDAR points.
inline constexpr int kMinAnnotatedPoints = 15;

struct Instance {
    std::int64_t track_id = 0;
    Box3D box3d;
    std::optional<Box2D> box2d;
    OcclusionLevel occlusion = OcclusionLevel::None;
    std::int64_t num_points = 0;

    friend bool operator==(const Instance&, const Instance&) = default;
};

struct Frame {
    std::int64_t frame_index = 0;
    double timestamp = 0;
    std::string pointcloud_ref;
    std::vector<Instance> instances;

    friend bool operator==(const Frame&, const Frame&) = default;
};

struct Detection {
    Box3D box3d;
    double score = 0;
    std::optional<Eigen::Vector2d> velocity;

    bool valid() const;
};

struct TrajectoryPoint {
    double t = 0;
    Eigen::Vector2d position = Eigen::Vector2d::Zero();
};

struct Trajectory {
    std::int64_t track_id = 0;
    std::vector<TrajectoryPoint> points;
};

enum class DistanceMode { Euclid3D, BEV2D };

double center_distance(const Box3D& a, const Box3D& b, DistanceMode mode = DistanceMode::Euclid3D);

/// Footprint corners of the rotated l x w rectangle, counterclockwise,
/// starting at the local (+l/2, -w/2) corner.
std::array<Eigen::Vector2d, 4> box_corners_bev(const Box3D& b);

}  // namespace crowdperc
