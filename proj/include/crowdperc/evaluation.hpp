#pragma once

#include "crowdperc/core.hpp"

#include <array>
#include <optional>
#include <span>
#include <vector>

namespace crowdperc {

inline constexpr std::array<double, 3> kDefaultDistanceThresholds = {0.25, 0.5, 1.0};
inline constexpr double kDefaultTrackingThreshold = 0.5;
inline constexpr int kApRecallSamples = 101;

// Detection --------------------------------------------------------------------

struct MatchPair {
    std::size_t gt = 0;
    std::size_t det = 0;
    double distance = 0;
};

struct MatchResult {
    std::vector<MatchPair> pairs;
    std::vector<std::size_t> unmatched_gt;
    std::vector<std::size_t> unmatched_det;
};

/// Greedy center-distance matching: detections in descending score order
/// (ties by index) each take the nearest unmatched gt within `threshold`.
MatchResult match_detections(std::span<const Instance> gt, std::span<const Detection> dets,
                             double threshold, DistanceMode mode = DistanceMode::Euclid3D);

using DetectionFrames = std::vector<std::vector<Detection>>;

/// 101-point AP over detections pooled across frames, precision interpolated
/// as the running max from the right. Absent when there is no ground truth.
/// Throws MisalignedFrames when frame counts differ.
std::optional<double> average_precision(std::span<const Frame> gt, std::span<const std::vector<Detection>> dets,
                                        double threshold, DistanceMode mode = DistanceMode::Euclid3D);

/// Arithmetic mean of per-threshold APs.
double mean_ap(std::span<const double> aps);
std::optional<double> mean_ap(std::span<const Frame> gt, std::span<const std::vector<Detection>> dets,
                              std::span<const double> thresholds = kDefaultDistanceThresholds,
                              DistanceMode mode = DistanceMode::Euclid3D);

/// Recall of gt with the given occlusion level averaged over thresholds.
/// Absent when no gt has that level.
std::optional<double> average_recall_occlusion(std::span<const Frame> gt,
                                               std::span<const std::vector<Detection>> dets,
                                               OcclusionLevel level,
                                               std::span<const double> thresholds = kDefaultDistanceThresholds,
                                               DistanceMode mode = DistanceMode::Euclid3D);

// Tracking ----------------------------------------------------------------------

struct TrackedBox {
    std::int64_t track_id = 0;
    Box3D box;
};

using TrackFrame = std::vector<TrackedBox>;

struct ClearMotResult {
    std::optional<double> mota;  // absent when GT == 0
    std::size_t fp = 0, fn = 0, ids = 0, gt = 0, matches = 0;
    std::size_t gt_tracks = 0, mostly_tracked = 0, mostly_lost = 0;
    double mt = 0, ml = 0;
};

/// CLEAR MOT. Per frame, pairs from the previous frame that are still within
/// `threshold` are kept; the rest are assigned by minimum total distance under
/// the gate. An identity switch is counted when a gt is matched to a different
/// predicted id than the last one it had. MT/ML use >80% / <20% of a gt
/// track's frames matched.
ClearMotResult clear_mot(std::span<const TrackFrame> gt, std::span<const TrackFrame> pred,
                         double threshold = kDefaultTrackingThreshold,
                         DistanceMode mode = DistanceMode::Euclid3D);

/// Sums counts of independently evaluated sequences and recomputes the ratios.
ClearMotResult combine(std::span<const ClearMotResult> parts);

struct DetectionFrame {
    double timestamp = 0;
    std::vector<Detection> detections;
};

/// Velocity-propagation tracker: active tracks move by velocity * dt, then
/// (track, detection) pairs within `threshold` BEV meters are accepted nearest
/// first. Unmatched detections start tracks; a track missing for two
/// consecutive frames ends.
std::vector<TrackFrame> greedy_velocity_tracker(std::span<const DetectionFrame> frames, double threshold);

// Prediction --------------------------------------------------------------------

double fde(const Trajectory& pred, const Trajectory& gt);
double mde(const Trajectory& pred, const Trajectory& gt);

// Conversions from annotated frames -----------------------------------------------

std::vector<TrackFrame> track_frames(std::span<const Frame> frames);

/// Per-track trajectories ordered by track id.
std::vector<Trajectory> trajectories(std::span<const Frame> frames);

/// Ground truth as score-1 detections with backward-difference BEV velocity
/// (zero at a track's first appearance).
std::vector<DetectionFrame> perfect_detections(std::span<const Frame> frames);

}  // namespace crowdperc
