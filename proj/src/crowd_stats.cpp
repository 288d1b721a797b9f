#include "crowdperc/crowd_stats.hpp"

#include <cmath>
#include <map>

namespace crowdperc {

CrowdLevel crowd_level(std::size_t n) {
    if (n < 10) return CrowdLevel::Sparse;
    if (n < 20) return CrowdLevel::Moderate;
    if (n < 30) return CrowdLevel::Dense;
    return CrowdLevel::VeryDense;
}

namespace {

// Sum over pedestrians of neighbors within radius (self excluded).
std::size_t neighbor_total(const Frame& frame, double radius) {
    const auto& inst = frame.instances;
    const double r2 = radius * radius;
    std::size_t total = 0;
    for (std::size_t i = 0; i < inst.size(); ++i) {
        for (std::size_t j = i + 1; j < inst.size(); ++j) {
            const double d2 =
                (inst[i].box3d.center_bev() - inst[j].box3d.center_bev()).squaredNorm();
            if (d2 <= r2) total += 2;
        }
    }
    return total;
}

}  // namespace

double density_k(const Frame& frame, double radius) {
    if (frame.instances.empty()) return 0.0;
    return static_cast<double>(neighbor_total(frame, radius)) /
           static_cast<double>(frame.instances.size());
}

double person_per_range(const Frame& frame, double scan_diameter) {
    return static_cast<double>(frame.instances.size()) / scan_diameter;
}

std::vector<DistanceBin> points_vs_distance(std::span<const Frame> frames, double bin_width) {
    std::map<int, std::pair<std::size_t, double>> acc;
    for (const auto& f : frames) {
        for (const auto& inst : f.instances) {
            const int idx = static_cast<int>(std::floor(inst.box3d.center_bev().norm() / bin_width));
            auto& [n, sum] = acc[idx];
            ++n;
            sum += static_cast<double>(inst.num_points);
        }
    }
    std::vector<DistanceBin> out;
    out.reserve(acc.size());
    for (const auto& [idx, v] : acc) {
        out.push_back({idx, idx * bin_width, (idx + 1) * bin_width, v.first,
                       v.second / static_cast<double>(v.first)});
    }
    return out;
}

DatasetStatistics compute_statistics(std::span<const Frame> frames, double scan_diameter,
                                     double bin_width) {
    DatasetStatistics s;
    s.frames = frames.size();
    std::array<std::size_t, 3> neighbors{};
    constexpr std::array<double, 3> radii = {2.0, 5.0, 10.0};
    double range_sum = 0;
    for (const auto& f : frames) {
        s.instances += f.instances.size();
        for (std::size_t r = 0; r < radii.size(); ++r) neighbors[r] += neighbor_total(f, radii[r]);
        for (const auto& inst : f.instances) s.occlusion_histogram[static_cast<std::size_t>(inst.occlusion)]++;
        s.crowd_level_histogram[static_cast<std::size_t>(crowd_level(f))]++;
        range_sum += person_per_range(f, scan_diameter);
    }
    if (s.instances > 0) {
        const auto n = static_cast<double>(s.instances);
        s.density.density_2 = static_cast<double>(neighbors[0]) / n;
        s.density.density_5 = static_cast<double>(neighbors[1]) / n;
        s.density.density_10 = static_cast<double>(neighbors[2]) / n;
    }
    if (s.frames > 0) {
        s.density.person_per_frame = static_cast<double>(s.instances) / static_cast<double>(s.frames);
        s.density.person_per_range = range_sum / static_cast<double>(s.frames);
    }
    s.points_by_distance = points_vs_distance(frames, bin_width);
    return s;
}

}  // namespace crowdperc
