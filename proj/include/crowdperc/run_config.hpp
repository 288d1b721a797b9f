#pragma once

#include "crowdperc/bev_encoding.hpp"
#include "crowdperc/dha_core.hpp"
#include "crowdperc/evaluation.hpp"
#include "crowdperc/postprocess.hpp"

#include <json.hpp>

#include <filesystem>
#include <vector>

namespace crowdperc {

struct EvalConfig {
    std::vector<double> thresholds{kDefaultDistanceThresholds.begin(), kDefaultDistanceThresholds.end()};
    double tracking_threshold = kDefaultTrackingThreshold;  // CLEAR MOT gate, meters
    double tracker_threshold = 1.0;                          // association gate of the baseline tracker
    DistanceMode distance_mode = DistanceMode::Euclid3D;
};

/// Every tunable of a run. Defaults follow the published setup where one exists.
struct RunConfig {
    GridSpec grid = default_grid();
    std::size_t max_points_per_cell = kDefaultMaxPointsPerCell;
    NmsConfig nms;
    GaussianTargetParams targets;
    DecodeParams decode;
    EvalConfig eval;
    std::size_t attention_budget = kDefaultAttentionBudget;
    double scan_diameter = 50.0;  // meters, for person-per-range
    double stats_bin_width = 5.0;

    void validate() const;
};

nlohmann::json to_json(const RunConfig& cfg);
/// Fields absent from `j` keep their defaults. Throws ConfigInvalid.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

const char* distance_mode_name(DistanceMode mode);  // "3d" / "bev"
DistanceMode parse_distance_mode(const std::string& name);

}  // namespace crowdperc
