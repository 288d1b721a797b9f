#pragma once

#include "crowdperc/core.hpp"
#include "crowdperc/dataset_io.hpp"

#include <unistd.h>

#include <filesystem>
#include <random>
#include <string>

namespace crowdperc::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("crowdperc_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

struct Rng {
    std::mt19937_64 engine;
    explicit Rng(std::uint64_t seed) : engine(seed) {}
    double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(engine); }
    int integer(int a, int b) { return std::uniform_int_distribution<int>(a, b)(engine); }
    bool coin(double p = 0.5) { return uniform(0, 1) < p; }
};

inline Box3D random_box(Rng& r, double extent = 20.0) {
    return Box3D{r.uniform(-extent, extent), r.uniform(-extent, extent), r.uniform(-2, 1),
                 r.uniform(0.3, 1.2),        r.uniform(0.3, 1.2),        r.uniform(1.2, 2.0),
                 r.uniform(-3.14159, 3.14159)};
}

inline Sequence random_sequence(Rng& r, const std::string& id, int frames) {
    Sequence s;
    s.sequence_id = id;
    s.meta = {r.coin() ? "clear" : "rain", "plaza"};
    if (r.coin()) {
        ProjectionMatrix p;
        for (int i = 0; i < 12; ++i) p.data()[i] = r.uniform(-1000, 1000);
        s.calibration = p;
    }
    for (int f = 0; f < frames; ++f) {
        Frame fr;
        fr.frame_index = f;
        fr.timestamp = 0.4 * f;
        fr.pointcloud_ref = DatasetLayout::pointcloud_ref(id, f);
        const int n = r.integer(0, 6);
        for (int k = 0; k < n; ++k) {
            Instance inst;
            inst.track_id = k;
            inst.box3d = random_box(r);
            if (r.coin()) inst.box2d = Box2D{r.uniform(0, 1800), r.uniform(0, 1000), r.uniform(1, 100), r.uniform(1, 300)};
            inst.occlusion = static_cast<OcclusionLevel>(r.integer(0, 2));
            inst.num_points = r.integer(15, 2000);
            fr.instances.push_back(inst);
        }
        s.frames.push_back(std::move(fr));
    }
    return s;
}

}  // namespace crowdperc::testing
