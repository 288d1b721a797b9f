#pragma once

#include "crowdperc/dataset_io.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <map>
#include <vector>

namespace crowdperc {

struct AxisRange {
    double min = 0, max = 0;
    double span() const { return max - min; }
    /// Half-open: min inclusive, max exclusive.
    bool contains(double v) const { return v >= min && v < max; }
    friend bool operator==(const AxisRange&, const AxisRange&) = default;
};

/// Discretization of the detection range into voxels. Each extent must be an
/// exact multiple (within 1e-6 cells) of the voxel size.
class GridSpec {
public:
    GridSpec(AxisRange x, AxisRange y, AxisRange z, const Eigen::Vector3d& voxel_size);

    const AxisRange& x_range() const { return x_; }
    const AxisRange& y_range() const { return y_; }
    const AxisRange& z_range() const { return z_; }
    const Eigen::Vector3d& voxel_size() const { return voxel_; }
    const Eigen::Vector3i& dims() const { return dims_; }
    int nx() const { return dims_.x(); }
    int ny() const { return dims_.y(); }
    int nz() const { return dims_.z(); }

    bool contains(const Eigen::Vector3d& p) const {
        return x_.contains(p.x()) && y_.contains(p.y()) && z_.contains(p.z());
    }
    bool contains_bev(const Eigen::Vector2d& p) const {
        return x_.contains(p.x()) && y_.contains(p.y());
    }

    friend bool operator==(const GridSpec& a, const GridSpec& b) {
        return a.x_ == b.x_ && a.y_ == b.y_ && a.z_ == b.z_ && a.voxel_ == b.voxel_;
    }

private:
    AxisRange x_, y_, z_;
    Eigen::Vector3d voxel_;
    Eigen::Vector3i dims_;
};

/// x in [0, 30.72), y in [-20.48, 20.48), z in [-4, 1) with 0.12 x 0.16 x 0.2 m
/// voxels: 256 x 256 x 25 cells.
GridSpec default_grid();

struct VoxelKey {
    int ix = 0, iy = 0, iz = 0;
    friend auto operator<=>(const VoxelKey&, const VoxelKey&) = default;
};

struct PillarKey {
    int ix = 0, iy = 0;
    friend auto operator<=>(const PillarKey&, const PillarKey&) = default;
};

inline constexpr std::size_t kDefaultMaxPointsPerCell = 32;

template <typename Key>
struct CellAssignment {
    /// Point indices per occupied cell, in original point order.
    std::map<Key, std::vector<Eigen::Index>> cells;
    std::size_t dropped_out_of_range = 0;
    std::size_t dropped_over_cap = 0;

    std::size_t kept() const {
        std::size_t n = 0;
        for (const auto& [k, v] : cells) n += v.size();
        return n;
    }
};

using VoxelGrid = CellAssignment<VoxelKey>;
using PillarGrid = CellAssignment<PillarKey>;

/// Assigns every in-range point to floor((p - min) / size). Range bounds are
/// compared at float32 precision. Cells keep the first `max_points_per_cell`
/// points in cloud order.
VoxelGrid voxelize(const PointCloud& pc, const GridSpec& g,
                   std::size_t max_points_per_cell = kDefaultMaxPointsPerCell);
/// Same as voxelize but cells span the full z range.
PillarGrid pillarize(const PointCloud& pc, const GridSpec& g,
                     std::size_t max_points_per_cell = kDefaultMaxPointsPerCell);

/// Continuous heatmap coordinates (u along x, v along y) at a level whose cells
/// are `stride` regular cells wide. Throws OutOfRange outside the BEV range.
Eigen::Vector2d world_to_heatmap(const Eigen::Vector2d& xy, const GridSpec& g, double stride);
Eigen::Vector2d heatmap_to_world(const Eigen::Vector2d& uv, const GridSpec& g, double stride);

}  // namespace crowdperc
