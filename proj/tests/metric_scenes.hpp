#pragma once
// Random small scenes for metric checks.

#include "crowdperc/evaluation.hpp"

#include "test_support.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace crowdperc::testing {

struct DetectionScene {
    std::vector<Frame> gt;
    DetectionFrames dets;
};

/// 1-4 frames, at most 15 gt and 20 detections in total, packed into a few
/// meters so that every threshold matters. Scores are coarse so ties occur.
inline DetectionScene random_detection_scene(Rng& r) {
    DetectionScene s;
    const int frames = r.integer(1, 4);
    int gt_left = r.integer(0, 15), det_left = 20;
    for (int f = 0; f < frames; ++f) {
        Frame fr;
        fr.frame_index = f;
        fr.timestamp = 0.4 * f;
        const int n = f + 1 == frames ? gt_left : r.integer(0, gt_left);
        gt_left -= n;
        for (int k = 0; k < n; ++k) {
            Instance inst;
            inst.track_id = k;
            inst.box3d = Box3D{r.uniform(0, 4), r.uniform(0, 4), r.uniform(-1, 0), 0.6, 0.6, 1.7, 0};
            inst.occlusion = static_cast<OcclusionLevel>(r.integer(0, 2));
            inst.num_points = 100;
            fr.instances.push_back(inst);
        }
        std::vector<Detection> dets;
        const int m = f + 1 == frames ? r.integer(0, det_left) : r.integer(0, det_left / 2);
        det_left -= m;
        for (int k = 0; k < m; ++k) {
            Detection d;
            if (!fr.instances.empty() && r.coin(0.7)) {
                const auto& g = fr.instances[static_cast<std::size_t>(r.integer(0, n - 1))].box3d;
                d.box3d = g;
                d.box3d.x += r.uniform(-0.6, 0.6);
                d.box3d.y += r.uniform(-0.6, 0.6);
                d.box3d.z += r.uniform(-0.3, 0.3);
            } else {
                d.box3d = Box3D{r.uniform(0, 4), r.uniform(0, 4), r.uniform(-1, 0), 0.6, 0.6, 1.7, 0};
            }
            d.score = std::round(r.uniform(0, 1) * 10) / 10;
            dets.push_back(d);
        }
        s.gt.push_back(std::move(fr));
        s.dets.push_back(std::move(dets));
    }
    return s;
}

struct TrackingScene {
    std::vector<TrackFrame> gt, pred;
};

/// Up to 15 walking gt tracks and up to 20 predictions per frame, with
/// jitter, dropouts, identity swaps and clutter.
inline TrackingScene random_tracking_scene(Rng& r) {
    TrackingScene s;
    const int frames = r.integer(2, 8);
    const int tracks = r.integer(0, 15);
    struct Walker {
        double x, y, vx, vy;
        int start, end;
        std::int64_t pred_id;
    };
    std::vector<Walker> w;
    for (int k = 0; k < tracks; ++k) {
        const int a = r.integer(0, frames - 1);
        w.push_back({r.uniform(0, 8), r.uniform(0, 8), r.uniform(-0.4, 0.4), r.uniform(-0.4, 0.4), a,
                     r.integer(a, frames - 1), 100 + k});
    }
    std::int64_t clutter_id = 1000;
    for (int f = 0; f < frames; ++f) {
        TrackFrame g, p;
        for (std::size_t k = 0; k < w.size(); ++k) {
            auto& t = w[k];
            if (f < t.start || f > t.end) continue;
            const Box3D box{t.x + t.vx * f, t.y + t.vy * f, -1, 0.6, 0.6, 1.7, 0};
            g.push_back({static_cast<std::int64_t>(k), box});
            if (r.coin(0.1)) t.pred_id = 500 + r.integer(0, 30);  // identity change
            if (r.coin(0.85) && p.size() < 20) {
                Box3D pb = box;
                pb.x += r.uniform(-0.35, 0.35);
                pb.y += r.uniform(-0.35, 0.35);
                const bool clash = std::any_of(p.begin(), p.end(), [&](const TrackedBox& b) { return b.track_id == t.pred_id; });
                p.push_back({clash ? clutter_id++ : t.pred_id, pb});
            }
        }
        const int extra = r.integer(0, 3);
        for (int e = 0; e < extra && p.size() < 20; ++e) {
            p.push_back({clutter_id++, Box3D{r.uniform(0, 8), r.uniform(0, 8), -1, 0.6, 0.6, 1.7, 0}});
        }
        s.gt.push_back(std::move(g));
        s.pred.push_back(std::move(p));
    }
    return s;
}

inline std::pair<Trajectory, Trajectory> random_trajectory_pair(Rng& r) {
    Trajectory gt, pred;
    const int n = r.integer(1, 12);
    double x = r.uniform(-5, 5), y = r.uniform(-5, 5);
    for (int i = 0; i < n; ++i) {
        const double t = 0.4 * i;
        x += r.uniform(-0.5, 0.5);
        y += r.uniform(-0.5, 0.5);
        gt.points.push_back({t, {x, y}});
        pred.points.push_back({t, {x + r.uniform(-1, 1), y + r.uniform(-1, 1)}});
    }
    return {pred, gt};
}

}  // namespace crowdperc::testing
