#pragma once

#include "crowdperc/bev_encoding.hpp"
#include "crowdperc/dataset_io.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace crowdperc {

/// Synthetic crowd scene parameters. All coordinates are in the sensor frame.
struct SceneConfig {
    std::string sequence_id = "seq_0000";
    int crowd_level = 1;  // 0..3, selects the pedestrian count range
    double group_fraction = 0.5;
    int group_size_min = 2;
    int group_size_max = 4;
    double speed_min = 0.5;  // m/s
    double speed_max = 1.4;
    double heading_noise = 0.1;  // rad/sqrt(s), random-walk heading drift
    double duration = 24.0;  // s
    double frame_rate = 2.5;  // Hz
    Eigen::Vector3d sensor_origin = Eigen::Vector3d::Zero();
    double ground_z = -2.0;  // relative to the sensor (roof mount)
    AxisRange x_region{2.0, 30.5};
    AxisRange y_region{-20.0, 20.0};
    double point_budget = 80000;  // points on a body at 1 m, falling as 1/d^2
    int max_points_per_body = 1500;
    int ground_points = 4000;
    double body_diameter = 0.6;
    double body_height = 1.7;
    double min_separation = 0.65;  // m between body centers
    std::uint64_t seed = 0;
    std::string weather = "clear";
    std::string scene = "synthetic-plaza";

    /// Throws ConfigInvalid.
    void validate() const;
};

/// [min, max] pedestrian count drawn for a crowd level.
std::pair<int, int> crowd_level_count_range(int level);

/// One simulated body at one frame, annotated or not.
struct SimulatedBody {
    std::int64_t track_id = 0;
    Eigen::Vector2d center = Eigen::Vector2d::Zero();  // sensor frame
    double radius = 0;
    double shadowed_fraction = 0;
    std::int64_t num_points = 0;
    bool annotated = false;
};

struct SyntheticScene {
    Sequence sequence;
    std::vector<PointCloud> clouds;                   // one per frame
    std::vector<std::vector<SimulatedBody>> bodies;  // one list per frame
};

SyntheticScene generate_scene(const SceneConfig& cfg);

/// Fraction of the angular extent of body `target` covered by bodies whose
/// centers are nearer to the sensor at `origin`.
double shadowed_fraction(std::span<const SimulatedBody> bodies, std::size_t target,
                         const Eigen::Vector2d& origin = Eigen::Vector2d::Zero());

/// 0 below 10% shadowed, 1 below 50%, 2 otherwise.
OcclusionLevel occlusion_from_shadow(double fraction);

/// Writes the sequence file and point clouds of a scene under `root`.
void write_scene(const SyntheticScene& scene, const std::filesystem::path& root);

struct DatasetConfig {
    SceneConfig scene;  // sequence_id and seed are derived per sequence
    int sequences = 1;
};

/// Generates `sequences` scenes with per-sequence seeds derived from
/// scene.seed, writes them and a 70/15/15 splits.json. Returns the ids.
std::vector<std::string> generate_dataset(const DatasetConfig& cfg, const std::filesystem::path& root);

/// Per-sequence seed derived from a base seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

/// Pinhole camera looking along sensor +x (1920 x 1080, f = 1000 px).
ProjectionMatrix default_camera();

}  // namespace crowdperc
