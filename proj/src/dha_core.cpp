#include "crowdperc/dha_core.hpp"

#include <set>
#include <utility>

namespace crowdperc {

const char* level_name(HeatmapLevel level) {
    switch (level) {
        case HeatmapLevel::Coarse: return "coarse";
        case HeatmapLevel::Regular: return "regular";
        case HeatmapLevel::Fine: return "fine";
    }
    return "?";
}

std::vector<Eigen::Vector2i> assignment_cells(std::span<const Instance> instances, const GridSpec& g,
                                              HeatmapLevel level) {
    const auto dims = level_dims(g, level);
    std::set<std::pair<int, int>> seen;
    std::vector<Eigen::Vector2i> out;
    for (const auto& inst : instances) {
        if (!g.contains_bev(inst.box3d.center_bev())) continue;
        const auto uv = world_to_heatmap(inst.box3d.center_bev(), g, level_stride(level));
        const auto cell = nearest_cell(uv, dims.x(), dims.y());
        if (seen.insert({cell.x(), cell.y()}).second) out.push_back(cell);
    }
    return out;
}

double positive_fraction(std::span<const Instance> instances, const GridSpec& g, HeatmapLevel level) {
    const auto dims = level_dims(g, level);
    return static_cast<double>(assignment_cells(instances, g, level).size()) /
           (static_cast<double>(dims.x()) * dims.y());
}

}  // namespace crowdperc
