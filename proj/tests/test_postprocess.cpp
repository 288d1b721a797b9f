#include "crowdperc/postprocess.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <Eigen/Geometry>
#include <numeric>

using namespace crowdperc;
using crowdperc::testing::Rng;

namespace {

Detection det(double x, double y, double score) {
    Detection d;
    d.box3d = {x, y, 0, 0.6, 0.6, 1.7, 0};
    d.score = score;
    return d;
}

std::vector<Detection> random_dets(Rng& r, int n, double extent) {
    std::vector<Detection> out;
    for (int i = 0; i < n; ++i) {
        // Coarse scores so ties occur.
        out.push_back(det(r.uniform(0, extent), r.uniform(0, extent), std::round(r.uniform(0, 1) * 20) / 20));
    }
    return out;
}

/// Reference: repeatedly take the best remaining (first on ties) and delete
/// everything strictly within the radius of it.
std::vector<Detection> reference_nms(std::vector<Detection> dets, double radius) {
    std::vector<Detection> kept;
    std::vector<bool> alive(dets.size(), true);
    while (true) {
        int best = -1;
        for (std::size_t i = 0; i < dets.size(); ++i) {
            if (alive[i] && (best < 0 || dets[i].score > dets[static_cast<std::size_t>(best)].score)) best = static_cast<int>(i);
        }
        if (best < 0) break;
        const auto& b = dets[static_cast<std::size_t>(best)];
        kept.push_back(b);
        for (std::size_t i = 0; i < dets.size(); ++i) {
            if (alive[i] && (b.box3d.center_bev() - dets[i].box3d.center_bev()).norm() < radius) alive[i] = false;
        }
    }
    return kept;
}

bool same(const std::vector<Detection>& a, const std::vector<Detection>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!(a[i].box3d == b[i].box3d) || a[i].score != b[i].score) return false;
    }
    return true;
}

PointCloud cloud_of(const std::vector<Eigen::Vector3d>& pts) {
    PointCloud pc;
    pc.points.resize(static_cast<Eigen::Index>(pts.size()), 4);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        pc.points.row(static_cast<Eigen::Index>(i)) << static_cast<float>(pts[i].x()), static_cast<float>(pts[i].y()),
            static_cast<float>(pts[i].z()), 0.f;
    }
    return pc;
}

}  // namespace

TEST(CircleNms, CloseDetectionsKeepHigherScore) {
    const auto out = circle_nms(std::vector<Detection>{det(0, 0, 0.8), det(0.2, 0, 0.9)}, 0.3);
    ASSERT_EQ(out.size(), 1u);
    EXPECT_EQ(out[0].score, 0.9);
}

TEST(CircleNms, SeparatedDetectionsBothKept) {
    EXPECT_EQ(circle_nms(std::vector<Detection>{det(0, 0, 0.9), det(0.31, 0, 0.8)}, 0.3).size(), 2u);
}

TEST(CircleNms, ExactRadiusSurvives) {
    EXPECT_EQ(circle_nms(std::vector<Detection>{det(0, 0, 0.9), det(0.5, 0, 0.8)}, 0.5).size(), 2u);
}

TEST(CircleNms, TiesKeepInputOrder) {
    const auto out = circle_nms(std::vector<Detection>{det(0, 0, 0.5), det(0.1, 0, 0.5), det(5, 0, 0.5)}, 0.3);
    ASSERT_EQ(out.size(), 2u);
    EXPECT_EQ(out[0].box3d.x, 0.0);
    EXPECT_EQ(out[1].box3d.x, 5.0);
}

TEST(CircleNms, ChainUsesAcceptedSetOnly) {
    // b is suppressed by a, so c (0.25 from b, 0.5 from a) survives.
    const auto out = circle_nms(std::vector<Detection>{det(0, 0, 0.9), det(0.25, 0, 0.8), det(0.5, 0, 0.7)}, 0.3);
    EXPECT_EQ(out.size(), 2u);
}

TEST(CircleNms, MatchesReferenceAndInvariants) {
    Rng r(1);
    for (int k = 0; k < 500; ++k) {
        const auto dets = random_dets(r, r.integer(0, 100), 3.0);
        const auto out = circle_nms(dets, 0.3);
        EXPECT_TRUE(same(out, reference_nms(dets, 0.3)));
        for (std::size_t i = 0; i < out.size(); ++i)
            for (std::size_t j = i + 1; j < out.size(); ++j)
                EXPECT_GE((out[i].box3d.center_bev() - out[j].box3d.center_bev()).norm(), 0.3);
        if (!dets.empty()) {
            double best = 0;
            for (const auto& d : dets) best = std::max(best, d.score);
            EXPECT_EQ(out.front().score, best);
        }
        EXPECT_TRUE(same(circle_nms(out, 0.3), out));
    }
}

TEST(CountPointsInBox, Basics) {
    const Box3D unit{0, 0, 0, 1, 1, 1, 0};
    EXPECT_EQ(count_points_in_box(cloud_of({{0, 0, 0}}), unit), 1u);
    EXPECT_EQ(count_points_in_box(cloud_of({{0.51, 0, 0}}), unit), 0u);
    EXPECT_EQ(count_points_in_box(cloud_of({{0.5, 0.5, 0.5}}), unit), 1u);
    EXPECT_EQ(count_points_in_box(cloud_of({{0, 0, 0.6}}), unit), 0u);
    EXPECT_EQ(count_points_in_box(PointCloud{}, unit), 0u);
}

TEST(CountPointsInBox, MatchesInverseTransformOracle) {
    Rng r(2);
    for (int k = 0; k < 200; ++k) {
        const Box3D b{r.uniform(-3, 3), r.uniform(-3, 3), r.uniform(-1, 1), r.uniform(0.5, 3), r.uniform(0.5, 3),
                      r.uniform(0.5, 2), r.uniform(-3.1, 3.1)};
        std::vector<Eigen::Vector3d> pts;
        for (int i = 0; i < 300; ++i) pts.emplace_back(r.uniform(-6, 6), r.uniform(-6, 6), r.uniform(-3, 3));
        const auto pc = cloud_of(pts);
        // Rotate each stored point into the box frame with an explicit matrix.
        Eigen::Matrix3d rot;
        rot << std::cos(b.theta), std::sin(b.theta), 0, -std::sin(b.theta), std::cos(b.theta), 0, 0, 0, 1;
        std::size_t expect = 0;
        for (Eigen::Index i = 0; i < pc.size(); ++i) {
            const Eigen::Vector3d p = pc.points.row(i).head<3>().cast<double>().transpose();
            const Eigen::Vector3d local = rot * (p - b.center());
            if (std::abs(local.x()) <= b.l / 2 && std::abs(local.y()) <= b.w / 2 && std::abs(local.z()) <= b.h / 2) ++expect;
        }
        EXPECT_EQ(count_points_in_box(pc, b), expect);
    }
}

TEST(CountPointsInBox, RigidTransformInvariant) {
    Rng r(3);
    for (int k = 0; k < 100; ++k) {
        const Box3D b{0.3, -0.2, 0.1, 2, 1, 1.5, r.uniform(-3, 3)};
        const Eigen::Matrix3d to_local = Eigen::AngleAxisd(-b.theta, Eigen::Vector3d::UnitZ()).toRotationMatrix();
        std::vector<Eigen::Vector3d> pts;
        while (pts.size() < 200) {
            const Eigen::Vector3d p(r.uniform(-2, 2), r.uniform(-2, 2), r.uniform(-1, 1));
            const Eigen::Vector3d q = (to_local * (p - b.center())).cwiseAbs() - 0.5 * b.extent();
            if (q.cwiseAbs().minCoeff() > 1e-3) pts.push_back(p);  // clear of every face
        }
        const double a = r.uniform(-3, 3);
        const Eigen::Vector3d t(r.uniform(-5, 5), r.uniform(-5, 5), r.uniform(-1, 1));
        const Eigen::Matrix3d rot = Eigen::AngleAxisd(a, Eigen::Vector3d::UnitZ()).toRotationMatrix();
        std::vector<Eigen::Vector3d> moved;
        for (const auto& p : pts) moved.push_back(rot * p + t);
        Box3D mb = b;
        const Eigen::Vector3d c = rot * b.center() + t;
        mb.x = c.x();
        mb.y = c.y();
        mb.z = c.z();
        mb.theta = b.theta + a;
        EXPECT_EQ(count_points_in_box(cloud_of(pts), b), count_points_in_box(cloud_of(moved), mb));
    }
}

TEST(FilterMinPoints, ZeroIsIdentity) {
    Rng r(4);
    const auto dets = random_dets(r, 30, 5);
    EXPECT_TRUE(same(filter_min_points(dets, PointCloud{}, 0), dets));
}

TEST(FilterMinPoints, DropsSparseBoxes) {
    const auto pc = cloud_of({{0, 0, 0}, {0.1, 0, 0}, {0, 0.1, 0}, {0.1, 0.1, 0}, {5, 5, 0}, {5.1, 5, 0}, {5, 5.1, 0},
                              {5.1, 5.1, 0}, {5.05, 5.05, 0}});
    const auto out = filter_min_points(std::vector<Detection>{det(0, 0, 0.9), det(5, 5, 0.8)}, pc, 5);
    ASSERT_EQ(out.size(), 1u);
    EXPECT_EQ(out[0].box3d.x, 5.0);
}

TEST(Postprocess, NmsThenFilter) {
    const auto pc = cloud_of(std::vector<Eigen::Vector3d>(6, Eigen::Vector3d(0, 0, 0)));
    const std::vector<Detection> dets{det(0.1, 0, 0.5), det(0, 0, 0.9), det(3, 3, 0.8)};
    const auto out = postprocess(dets, pc, NmsConfig{});
    ASSERT_EQ(out.size(), 1u);
    EXPECT_EQ(out[0].score, 0.9);
}
