#pragma once

#include "crowdperc/core.hpp"

#include <array>
#include <span>
#include <vector>

namespace crowdperc {

/// Scene-level crowd level from the per-frame pedestrian count:
/// 0: <10, 1: [10,20), 2: [20,30), 3: >=30. Boundary counts go to the higher level.
enum class CrowdLevel : std::uint8_t { Sparse = 0, Moderate = 1, Dense = 2, VeryDense = 3 };

CrowdLevel crowd_level(std::size_t pedestrian_count);
inline CrowdLevel crowd_level(const Frame& frame) { return crowd_level(frame.instances.size()); }

/// Mean over pedestrians of the number of *other* pedestrians whose BEV
/// center lies within `radius`. Zero for an empty frame.
double density_k(const Frame& frame, double radius);

double person_per_range(const Frame& frame, double scan_diameter);

struct DistanceBin {
    int index = 0;
    double lower = 0, upper = 0;  // meters
    std::size_t count = 0;
    double mean_points = 0;
};

/// Populated bins only, sorted by distance.
std::vector<DistanceBin> points_vs_distance(std::span<const Frame> frames, double bin_width);

struct DensityProfile {
    double density_2 = 0, density_5 = 0, density_10 = 0;
    double person_per_frame = 0;
    double person_per_range = 0;
};

struct DatasetStatistics {
    std::size_t frames = 0;
    std::size_t instances = 0;
    DensityProfile density;
    std::array<std::size_t, 3> occlusion_histogram{};
    std::array<std::size_t, 4> crowd_level_histogram{};
    std::vector<DistanceBin> points_by_distance;
};

/// Density-k values are pooled over every pedestrian of every frame.
DatasetStatistics compute_statistics(std::span<const Frame> frames, double scan_diameter,
                                     double bin_width = 5.0);

}  // namespace crowdperc
