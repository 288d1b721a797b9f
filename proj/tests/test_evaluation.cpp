#include "crowdperc/evaluation.hpp"
#include "crowdperc/errors.hpp"

#include "metric_scenes.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace crowdperc;
using crowdperc::testing::Rng;

namespace {

Instance gt_at(double x, double y, OcclusionLevel occ = OcclusionLevel::None, std::int64_t id = 0) {
    Instance i;
    i.track_id = id;
    i.box3d = {x, y, 0, 0.6, 0.6, 1.7, 0};
    i.occlusion = occ;
    i.num_points = 100;
    return i;
}

Detection det_at(double x, double y, double score) {
    Detection d;
    d.box3d = {x, y, 0, 0.6, 0.6, 1.7, 0};
    d.score = score;
    return d;
}

Frame frame_of(std::vector<Instance> inst) {
    Frame f;
    f.instances = std::move(inst);
    return f;
}

}  // namespace

TEST(Match, HigherScoreChoosesFirst) {
    const std::vector<Instance> gt = {gt_at(0, 0), gt_at(1, 0)};
    const std::vector<Detection> dets = {det_at(0.2, 0, 0.5), det_at(0.1, 0, 0.9)};
    const auto m = match_detections(gt, dets, 0.5);
    ASSERT_EQ(m.pairs.size(), 1u);
    EXPECT_EQ(m.pairs[0].det, 1u);
    EXPECT_EQ(m.pairs[0].gt, 0u);
    EXPECT_NEAR(m.pairs[0].distance, 0.1, 1e-12);
    EXPECT_EQ(m.unmatched_det, std::vector<std::size_t>{0});
    EXPECT_EQ(m.unmatched_gt, std::vector<std::size_t>{1});
}

TEST(Match, ThresholdIsInclusive) {
    const std::vector<Instance> gt = {gt_at(0, 0)};
    const std::vector<Detection> dets = {det_at(0.5, 0, 1)};
    EXPECT_EQ(match_detections(gt, dets, 0.5).pairs.size(), 1u);
    EXPECT_EQ(match_detections(gt, dets, 0.4999).pairs.size(), 0u);
}

TEST(Match, BevIgnoresHeight) {
    std::vector<Instance> gt = {gt_at(0, 0)};
    gt[0].box3d.z = 3;
    const std::vector<Detection> dets = {det_at(0.1, 0, 1)};
    EXPECT_EQ(match_detections(gt, dets, 0.5, DistanceMode::Euclid3D).pairs.size(), 0u);
    EXPECT_EQ(match_detections(gt, dets, 0.5, DistanceMode::BEV2D).pairs.size(), 1u);
}

TEST(Match, AgreesWithOracle) {
    Rng r(11);
    for (int trial = 0; trial < 500; ++trial) {
        const auto s = crowdperc::testing::random_detection_scene(r);
        for (std::size_t f = 0; f < s.gt.size(); ++f) {
            for (double thr : {0.25, 0.5, 1.0}) {
                const auto m = match_detections(s.gt[f].instances, s.dets[f], thr);
                const auto o = oracle::greedy_pairs(s.gt[f].instances, s.dets[f], thr, DistanceMode::Euclid3D);
                ASSERT_EQ(m.pairs.size(), o.size());
                for (std::size_t k = 0; k < o.size(); ++k) {
                    EXPECT_EQ(m.pairs[k].gt, o[k].first);
                    EXPECT_EQ(m.pairs[k].det, o[k].second);
                }
                EXPECT_EQ(m.pairs.size() + m.unmatched_gt.size(), s.gt[f].instances.size());
                EXPECT_EQ(m.pairs.size() + m.unmatched_det.size(), s.dets[f].size());
            }
        }
    }
}

TEST(AveragePrecision, PerfectIsOne) {
    const std::vector<Frame> gt = {frame_of({gt_at(0, 0), gt_at(3, 3)})};
    const DetectionFrames dets = {{det_at(0, 0, 0.9), det_at(3, 3, 0.8)}};
    EXPECT_EQ(average_precision(gt, dets, 0.5).value(), 1.0);
}

TEST(AveragePrecision, HalfRecall) {
    const std::vector<Frame> gt = {frame_of({gt_at(0, 0), gt_at(3, 3)})};
    const DetectionFrames dets = {{det_at(0, 0, 0.9)}};
    EXPECT_NEAR(average_precision(gt, dets, 0.5).value(), 51.0 / 101.0, 1e-12);
}

TEST(AveragePrecision, FalsePositiveFirst) {
    const std::vector<Frame> gt = {frame_of({gt_at(0, 0)})};
    const DetectionFrames dets = {{det_at(5, 5, 0.9), det_at(0, 0, 0.8)}};
    EXPECT_NEAR(average_precision(gt, dets, 0.5).value(), 0.5, 1e-12);
}

TEST(AveragePrecision, EmptyCases) {
    const std::vector<Frame> no_gt = {frame_of({})};
    EXPECT_FALSE(average_precision(no_gt, DetectionFrames{{det_at(0, 0, 1)}}, 0.5).has_value());
    const std::vector<Frame> gt = {frame_of({gt_at(0, 0)})};
    EXPECT_EQ(average_precision(gt, DetectionFrames{{}}, 0.5).value(), 0.0);
}

TEST(AveragePrecision, MisalignedFrames) {
    const std::vector<Frame> gt = {frame_of({gt_at(0, 0)}), frame_of({})};
    EXPECT_THROW(average_precision(gt, DetectionFrames{{}}, 0.5), MisalignedFrames);
}

TEST(AveragePrecision, AgreesWithOracle) {
    Rng r(12);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto s = crowdperc::testing::random_detection_scene(r);
        for (auto mode : {DistanceMode::Euclid3D, DistanceMode::BEV2D}) {
            for (double thr : {0.25, 0.5, 1.0}) {
                const auto a = average_precision(s.gt, s.dets, thr, mode);
                const auto o = oracle::ap(s.gt, s.dets, thr, mode);
                ASSERT_EQ(a.has_value(), o.has_value());
                if (a) EXPECT_NEAR(*a, *o, 1e-9);
            }
        }
    }
}

TEST(MeanAp, Examples) {
    const std::vector<double> aps = {0.0, 0.5, 1.0};
    EXPECT_EQ(mean_ap(aps), 0.5);
    const std::vector<Frame> gt = {frame_of({gt_at(0, 0)})};
    // matched at 0.5 and 1.0 only
    const DetectionFrames dets = {{det_at(0.4, 0, 1)}};
    EXPECT_NEAR(mean_ap(gt, dets).value(), 2.0 / 3.0, 1e-12);
}

TEST(AverageRecall, PerLevel) {
    const std::vector<Frame> gt = {
        frame_of({gt_at(0, 0), gt_at(3, 0), gt_at(6, 0, OcclusionLevel::Heavy)})};
    const DetectionFrames dets = {{det_at(0, 0, 1), det_at(3.3, 0, 1)}};
    // second none-occluded gt matched only at 0.5 and 1.0
    EXPECT_NEAR(average_recall_occlusion(gt, dets, OcclusionLevel::None).value(), (0.5 + 1 + 1) / 3.0, 1e-12);
    EXPECT_EQ(average_recall_occlusion(gt, dets, OcclusionLevel::Heavy).value(), 0.0);
    EXPECT_FALSE(average_recall_occlusion(gt, dets, OcclusionLevel::Partial).has_value());
}

TEST(AverageRecall, AgreesWithOracle) {
    Rng r(13);
    const std::vector<double> thr = {0.25, 0.5, 1.0};
    for (int trial = 0; trial < 1000; ++trial) {
        const auto s = crowdperc::testing::random_detection_scene(r);
        for (auto level : kOcclusionLevels) {
            const auto a = average_recall_occlusion(s.gt, s.dets, level, thr);
            const auto o = oracle::ar(s.gt, s.dets, level, thr, DistanceMode::Euclid3D);
            ASSERT_EQ(a.has_value(), o.has_value());
            if (a) EXPECT_NEAR(*a, *o, 1e-9);
        }
    }
}

TEST(Displacement, Example) {
    Trajectory gt, pred;
    for (int i = 0; i < 3; ++i) {
        gt.points.push_back({0.4 * i, {double(i), double(i)}});
        pred.points.push_back({0.4 * i, {double(i), 0}});
    }
    EXPECT_DOUBLE_EQ(fde(pred, gt), 2.0);
    EXPECT_DOUBLE_EQ(mde(pred, gt), 1.0);
    EXPECT_EQ(fde(gt, gt), 0.0);
    EXPECT_EQ(mde(gt, gt), 0.0);
}

TEST(Displacement, Errors) {
    Trajectory a, b;
    EXPECT_THROW(fde(a, b), LengthMismatch);
    a.points.push_back({0, {0, 0}});
    EXPECT_THROW(mde(a, b), LengthMismatch);
    b.points.push_back({0.5, {0, 0}});
    EXPECT_THROW(fde(a, b), MisalignedFrames);
}

TEST(Displacement, AgreesWithOracle) {
    Rng r(14);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto [pred, gt] = crowdperc::testing::random_trajectory_pair(r);
        const auto [f, m] = oracle::fde_mde(pred, gt);
        EXPECT_NEAR(fde(pred, gt), f, 1e-9);
        EXPECT_NEAR(mde(pred, gt), m, 1e-9);
    }
}

TEST(Conversions, TrajectoriesAndTracks) {
    std::vector<Frame> frames(3);
    for (int f = 0; f < 3; ++f) {
        frames[f].timestamp = 0.4 * f;
        frames[f].instances = {gt_at(f, 0, OcclusionLevel::None, 7)};
        if (f != 1) frames[f].instances.push_back(gt_at(0, f, OcclusionLevel::None, 2));
    }
    const auto trajs = trajectories(frames);
    ASSERT_EQ(trajs.size(), 2u);
    EXPECT_EQ(trajs[0].track_id, 2);
    EXPECT_EQ(trajs[0].points.size(), 2u);
    EXPECT_EQ(trajs[1].points.size(), 3u);
    EXPECT_DOUBLE_EQ(trajs[1].points[2].t, 0.8);
    EXPECT_EQ(track_frames(frames)[0].size(), 2u);

    const auto perfect = perfect_detections(frames);
    ASSERT_EQ(perfect.size(), 3u);
    EXPECT_EQ(perfect[0].detections[0].velocity->norm(), 0.0);
    EXPECT_NEAR(perfect[1].detections[0].velocity->x(), 2.5, 1e-12);
    // track 2 reappears after a gap: difference over 0.8 s
    EXPECT_NEAR(perfect[2].detections[1].velocity->y(), 2.0 / 0.8, 1e-12);
}
