#pragma once

// JSON interchange: prediction files, trajectory files, and reports.
//
// Predictions: {"<sequence_id>": [[{"box3d": {x,y,z,l,w,h,theta}, "score": s,
//   "velocity": [vx, vy], "track_id": id}, ...], ...]} -- one array per frame;
//   "velocity" and "track_id" are optional.
// Trajectories: [{"track_id": id, "points": [[t, x, y], ...]}, ...], or an
//   object mapping sequence id to such an array.

#include "crowdperc/crowd_stats.hpp"
#include "crowdperc/dataset_io.hpp"
#include "crowdperc/evaluation.hpp"
#include "crowdperc/run_config.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace crowdperc {

struct PredictedObject {
    Detection detection;
    std::optional<std::int64_t> track_id;
};

using PredictionFrames = std::vector<std::vector<PredictedObject>>;
using PredictionSet = std::map<std::string, PredictionFrames>;

nlohmann::json to_json(const Box3D& b);
Box3D box3d_from_json(const nlohmann::json& j);

std::string serialize_predictions(const PredictionSet& set);
PredictionSet parse_predictions(const std::string& text, const std::string& origin = "<memory>");
PredictionSet load_predictions(const std::filesystem::path& path);

DetectionFrames detections_of(const PredictionFrames& frames);
/// Throws SchemaViolation when an object carries no track_id.
std::vector<TrackFrame> tracks_of(const PredictionFrames& frames, const std::string& sequence_id = "");

std::string serialize_trajectories(const std::vector<Trajectory>& trajs);
std::vector<Trajectory> parse_trajectories(const std::string& text, const std::string& origin = "<memory>");
std::vector<Trajectory> load_trajectories(const std::filesystem::path& path);

/// Sequence id -> trajectories; a bare array is stored under the empty id.
using TrajectorySet = std::map<std::string, std::vector<Trajectory>>;
std::string serialize_trajectory_set(const TrajectorySet& set);
TrajectorySet parse_trajectory_set(const std::string& text, const std::string& origin = "<memory>");
TrajectorySet load_trajectory_set(const std::filesystem::path& path);


// Reports -----------------------------------------------------------------------

struct DetectionMetrics {
    std::vector<std::pair<double, std::optional<double>>> ap;  // per threshold
    std::optional<double> map;
    std::array<std::optional<double>, 3> ar;  // per occlusion level
};

DetectionMetrics evaluate_detection(std::span<const Frame> gt, std::span<const std::vector<Detection>> dets,
                                    const EvalConfig& cfg);

struct PredictionMetrics {
    std::size_t trajectories = 0;
    double fde = 0;  // mean over trajectories
    double mde = 0;
};

/// Pairs every predicted trajectory with the gt trajectory of the same
/// sequence and track id, restricted to the predicted timestamps, and averages
/// FDE / MDE over pairs. Throws MisalignedFrames for unknown tracks or
/// timestamps absent from the ground truth.
PredictionMetrics evaluate_prediction(const TrajectorySet& gt, const TrajectorySet& pred);

struct EvalReport {
    std::optional<DetectionMetrics> detection;
    std::optional<ClearMotResult> tracking;
    std::optional<PredictionMetrics> prediction;
};

/// Report with a "protocol" block and the resolved run config.
nlohmann::json report_json(const EvalReport& r, const RunConfig& cfg);
nlohmann::json to_json(const ValidationReport& r);
nlohmann::json to_json(const DatasetStatistics& s);

/// Stable text form of a report: 2-space indent, trailing newline.
std::string dump_report(const nlohmann::json& j);

/// Writes through a temporary file and renames.
void write_text_file(const std::string& text, const std::filesystem::path& path);

}  // namespace crowdperc
