#pragma once

#include "crowdperc/core.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace crowdperc {

using ProjectionMatrix = Eigen::Matrix<double, 3, 4, Eigen::RowMajor>;

struct SequenceMeta {
    std::string weather;
    std::string scene;
    friend bool operator==(const SequenceMeta&, const SequenceMeta&) = default;
};

struct Sequence {
    std::string sequence_id;
    std::vector<Frame> frames;
    std::optional<ProjectionMatrix> calibration;
    SequenceMeta meta;

    friend bool operator==(const Sequence&, const Sequence&) = default;
};

/// N x 4 float32 rows of (x, y, z, intensity). Row-major so the buffer
/// matches the on-disk record layout.
using PointMatrix = Eigen::Matrix<float, Eigen::Dynamic, 4, Eigen::RowMajor>;

struct PointCloud {
    PointMatrix points{0, 4};

    Eigen::Index size() const { return points.rows(); }
};

inline constexpr std::size_t kPointRecordBytes = 16;

// Annotation files -----------------------------------------------------------

Sequence load_sequence(const std::filesystem::path& path);
/// Parses an in-memory annotation document; `origin` labels diagnostics.
Sequence parse_sequence(const std::string& text, const std::string& origin = "<memory>");
std::string serialize_sequence(const Sequence& seq);
void write_sequence(const Sequence& seq, const std::filesystem::path& path);

// Point clouds ---------------------------------------------------------------

PointCloud load_pointcloud(const std::filesystem::path& path);
void write_pointcloud(const PointCloud& pc, const std::filesystem::path& path);

// Dataset layout -------------------------------------------------------------

using Splits = std::map<std::string, std::vector<std::string>>;

struct DatasetLayout {
    std::filesystem::path root;

    std::filesystem::path sequences_dir() const { return root / "sequences"; }
    std::filesystem::path sequence_file(const std::string& id) const {
        return sequences_dir() / (id + ".json");
    }
    std::filesystem::path splits_file() const { return root / "splits.json"; }
    /// Relative reference stored in Frame::pointcloud_ref.
    static std::string pointcloud_ref(const std::string& id, std::int64_t frame_index);
    std::filesystem::path resolve(const std::string& ref) const { return root / ref; }
};

Splits load_splits(const std::filesystem::path& path);
void write_splits(const Splits& splits, const std::filesystem::path& path);

/// Sorted sequence ids found under <root>/sequences.
std::vector<std::string> list_sequences(const std::filesystem::path& root);

/// Loads every sequence of a dataset in id order. `threads` <= 1 loads serially.
std::vector<Sequence> load_dataset(const std::filesystem::path& root, int threads = 1);

// Validation -----------------------------------------------------------------

struct ValidationIssue {
    std::string location;
    std::string message;
};

struct ValidationReport {
    std::vector<ValidationIssue> errors;
    std::vector<ValidationIssue> warnings;
    std::size_t sequences_checked = 0;
    std::size_t frames_checked = 0;

    bool ok() const { return errors.empty(); }
};

struct ValidationOptions {
    double nominal_frame_spacing = 0.4;  // 2.5 Hz
    double spacing_tolerance = 0.1;      // relative
    std::size_t min_frames = 50;
    std::size_t max_frames = 800;
    int threads = 1;
};

/// Read-only structural check of a dataset root; never throws for data problems.
ValidationReport validate_dataset(const std::filesystem::path& root,
                                  const ValidationOptions& opts = {});

}  // namespace crowdperc

namespace crowdperc {

/// Image-space bounding rectangle of the projected box corners, clipped to a
/// width x height image. Absent when any corner lies behind the camera or the
/// rectangle misses the image.
std::optional<Box2D> project_box(const ProjectionMatrix& p, const Box3D& b, double width, double height);

}  // namespace crowdperc
