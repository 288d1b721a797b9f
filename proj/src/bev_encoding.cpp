#include "crowdperc/bev_encoding.hpp"

#include "crowdperc/errors.hpp"

#include <algorithm>
#include <cmath>

namespace crowdperc {

namespace {

int exact_cells(const AxisRange& r, double size, const char* axis) {
    if (!(size > 0) || !(r.max > r.min)) {
        throw ConfigInvalid(std::string("grid axis ") + axis + ": empty range or non-positive voxel size");
    }
    const double q = r.span() / size;
    const double n = std::round(q);
    if (std::abs(q - n) > 1e-6 || n < 1) {
        throw ConfigInvalid(std::string("grid axis ") + axis + ": range " + std::to_string(r.span()) +
                            " is not a multiple of voxel size " + std::to_string(size));
    }
    return static_cast<int>(n);
}

// floor((v - min) / size), clamped against rounding at the exclusive upper bound.
int cell_index(double v, const AxisRange& r, double size, int n) {
    const int i = static_cast<int>(std::floor((v - r.min) / size));
    return std::clamp(i, 0, n - 1);
}

template <typename Key, typename MakeKey>
CellAssignment<Key> assign(const PointCloud& pc, const GridSpec& g, std::size_t cap, MakeKey make_key) {
    CellAssignment<Key> out;
    for (Eigen::Index i = 0; i < pc.size(); ++i) {
        // Bounds compared in float32, the precision of the stored cloud, so a
        // point written at the upper bound stays outside.
        auto inside = [](const AxisRange& r, float v) {
            return v >= static_cast<float>(r.min) && v < static_cast<float>(r.max);
        };
        if (!inside(g.x_range(), pc.points(i, 0)) || !inside(g.y_range(), pc.points(i, 1)) ||
            !inside(g.z_range(), pc.points(i, 2))) {
            out.dropped_out_of_range++;
            continue;
        }
        const Eigen::Vector3d p = pc.points.row(i).head<3>().cast<double>().transpose();
        auto& cell = out.cells[make_key(p)];
        if (cell.size() >= cap) {
            out.dropped_over_cap++;
            continue;
        }
        cell.push_back(i);
    }
    return out;
}

}  // namespace

GridSpec::GridSpec(AxisRange x, AxisRange y, AxisRange z, const Eigen::Vector3d& voxel_size)
    : x_(x), y_(y), z_(z), voxel_(voxel_size) {
    dims_ = {exact_cells(x_, voxel_.x(), "x"), exact_cells(y_, voxel_.y(), "y"),
             exact_cells(z_, voxel_.z(), "z")};
}

GridSpec default_grid() {
    return GridSpec({0.0, 30.72}, {-20.48, 20.48}, {-4.0, 1.0}, {0.12, 0.16, 0.2});
}

VoxelGrid voxelize(const PointCloud& pc, const GridSpec& g, std::size_t cap) {
    return assign<VoxelKey>(pc, g, cap, [&](const Eigen::Vector3d& p) {
        return VoxelKey{cell_index(p.x(), g.x_range(), g.voxel_size().x(), g.nx()),
                        cell_index(p.y(), g.y_range(), g.voxel_size().y(), g.ny()),
                        cell_index(p.z(), g.z_range(), g.voxel_size().z(), g.nz())};
    });
}

PillarGrid pillarize(const PointCloud& pc, const GridSpec& g, std::size_t cap) {
    return assign<PillarKey>(pc, g, cap, [&](const Eigen::Vector3d& p) {
        return PillarKey{cell_index(p.x(), g.x_range(), g.voxel_size().x(), g.nx()),
                         cell_index(p.y(), g.y_range(), g.voxel_size().y(), g.ny())};
    });
}

Eigen::Vector2d world_to_heatmap(const Eigen::Vector2d& xy, const GridSpec& g, double stride) {
    if (!g.contains_bev(xy)) {
        throw OutOfRange("point (" + std::to_string(xy.x()) + ", " + std::to_string(xy.y()) +
                         ") outside BEV grid");
    }
    return {(xy.x() - g.x_range().min) / (g.voxel_size().x() * stride),
            (xy.y() - g.y_range().min) / (g.voxel_size().y() * stride)};
}

Eigen::Vector2d heatmap_to_world(const Eigen::Vector2d& uv, const GridSpec& g, double stride) {
    return {g.x_range().min + uv.x() * g.voxel_size().x() * stride,
            g.y_range().min + uv.y() * g.voxel_size().y() * stride};
}

}  // namespace crowdperc
