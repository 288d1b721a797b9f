#include "crowdperc/bev_encoding.hpp"
#include "crowdperc/errors.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace crowdperc;
using crowdperc::testing::Rng;

namespace {

PointCloud cloud_of(const std::vector<Eigen::Vector3d>& pts) {
    PointCloud pc;
    pc.points.resize(static_cast<Eigen::Index>(pts.size()), 4);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        pc.points.row(static_cast<Eigen::Index>(i)) << static_cast<float>(pts[i].x()), static_cast<float>(pts[i].y()),
            static_cast<float>(pts[i].z()), 0.f;
    }
    return pc;
}

PointCloud random_cloud(Rng& r, int n) {
    std::vector<Eigen::Vector3d> pts;
    for (int i = 0; i < n; ++i) pts.emplace_back(r.uniform(-5, 35), r.uniform(-25, 25), r.uniform(-5, 2));
    return cloud_of(pts);
}

}  // namespace

TEST(DefaultGrid, Dimensions) {
    const auto g = default_grid();
    EXPECT_EQ(g.nx(), 256);
    EXPECT_EQ(g.ny(), 256);
    EXPECT_EQ(g.nz(), 25);
}

TEST(GridSpec, RejectsInexactDivision) {
    EXPECT_THROW(GridSpec({0, 1.0}, {0, 1}, {0, 1}, Eigen::Vector3d(0.3, 0.5, 0.5)), ConfigInvalid);
    EXPECT_THROW(GridSpec({1, 0}, {0, 1}, {0, 1}, Eigen::Vector3d(0.5, 0.5, 0.5)), ConfigInvalid);
    EXPECT_THROW(GridSpec({0, 1}, {0, 1}, {0, 1}, Eigen::Vector3d(0, 0.5, 0.5)), ConfigInvalid);
    EXPECT_NO_THROW(GridSpec({0, 1.2}, {0, 1}, {0, 1}, Eigen::Vector3d(0.4, 0.5, 0.5)));
}

TEST(Voxelize, RangeMinimumIsCellZero) {
    const auto v = voxelize(cloud_of({{0, -20.48, -4}}), default_grid());
    ASSERT_EQ(v.cells.size(), 1u);
    EXPECT_EQ(v.cells.begin()->first, (VoxelKey{0, 0, 0}));
}

TEST(Voxelize, UpperBoundIsExclusive) {
    const auto v = voxelize(cloud_of({{30.72, 0, 0}, {0, 20.48, 0}, {0, 0, 1.0}}), default_grid());
    EXPECT_TRUE(v.cells.empty());
    EXPECT_EQ(v.dropped_out_of_range, 3u);
}

TEST(Voxelize, ConservesPoints) {
    Rng r(1);
    const auto g = default_grid();
    auto floor_cell = [](double v, double lo, double size, int n) {
        return std::clamp(static_cast<int>(std::floor((v - lo) / size)), 0, n - 1);
    };
    for (int k = 0; k < 20; ++k) {
        const auto pc = random_cloud(r, 3000);
        const auto v = voxelize(pc, g, 1000000);
        EXPECT_EQ(v.kept() + v.dropped_out_of_range, static_cast<std::size_t>(pc.size()));
        EXPECT_EQ(v.dropped_over_cap, 0u);
        // Each point lands in exactly one cell, and that cell contains it.
        std::vector<int> seen(static_cast<std::size_t>(pc.size()), 0);
        for (const auto& [key, idx] : v.cells) {
            for (auto i : idx) {
                ++seen[static_cast<std::size_t>(i)];
                const double x = pc.points(i, 0), y = pc.points(i, 1), z = pc.points(i, 2);
                EXPECT_EQ(key.ix, floor_cell(x, 0.0, 0.12, 256));
                EXPECT_EQ(key.iy, floor_cell(y, -20.48, 0.16, 256));
                EXPECT_EQ(key.iz, floor_cell(z, -4.0, 0.2, 25));
            }
        }
        for (Eigen::Index i = 0; i < pc.size(); ++i) {
            const bool in = pc.points(i, 0) >= 0.0f && pc.points(i, 0) < 30.72f && pc.points(i, 1) >= -20.48f &&
                            pc.points(i, 1) < 20.48f && pc.points(i, 2) >= -4.0f && pc.points(i, 2) < 1.0f;
            EXPECT_EQ(seen[static_cast<std::size_t>(i)], in ? 1 : 0);
        }
    }
}

TEST(Voxelize, CapKeepsFirstPoints) {
    std::vector<Eigen::Vector3d> pts(40, Eigen::Vector3d(1.01, 0.01, 0.01));
    const auto v = voxelize(cloud_of(pts), default_grid(), 32);
    ASSERT_EQ(v.cells.size(), 1u);
    const auto& idx = v.cells.begin()->second;
    ASSERT_EQ(idx.size(), 32u);
    for (std::size_t i = 0; i < idx.size(); ++i) EXPECT_EQ(idx[i], static_cast<Eigen::Index>(i));
    EXPECT_EQ(v.dropped_over_cap, 8u);
}

TEST(Pillarize, SpansFullHeight) {
    const auto p = pillarize(cloud_of({{1.01, 0.01, -3.9}, {1.01, 0.01, 0.9}, {1.01, 0.01, 1.5}}), default_grid());
    ASSERT_EQ(p.cells.size(), 1u);
    EXPECT_EQ(p.cells.begin()->second.size(), 2u);
    EXPECT_EQ(p.dropped_out_of_range, 1u);
}

TEST(WorldToHeatmap, Corners) {
    const auto g = default_grid();
    for (double stride : {0.5, 1.0, 2.0}) {
        EXPECT_TRUE(world_to_heatmap({0, -20.48}, g, stride).isZero());
    }
    const auto c = world_to_heatmap({15.36, 0}, g, 1);
    EXPECT_NEAR(c.x(), 128, 1e-9);
    EXPECT_NEAR(c.y(), 128, 1e-9);
    EXPECT_THROW(world_to_heatmap({30.72, 0}, g, 1), OutOfRange);
    EXPECT_THROW(world_to_heatmap({-0.01, 0}, g, 1), OutOfRange);
}

TEST(WorldToHeatmap, RoundTripAndAffine) {
    Rng r(2);
    const auto g = default_grid();
    for (int k = 0; k < 1000; ++k) {
        const Eigen::Vector2d a(r.uniform(0, 30.7), r.uniform(-20.4, 20.4));
        const Eigen::Vector2d b(r.uniform(0, 30.7), r.uniform(-20.4, 20.4));
        for (double stride : {0.5, 1.0, 2.0}) {
            const auto ua = world_to_heatmap(a, g, stride);
            EXPECT_LT((heatmap_to_world(ua, g, stride) - a).norm(), 0.12 / 1e6);
            const auto ub = world_to_heatmap(b, g, stride);
            EXPECT_NEAR(ub.x() - ua.x(), (b.x() - a.x()) / (0.12 * stride), 1e-9);
            EXPECT_NEAR(ub.y() - ua.y(), (b.y() - a.y()) / (0.16 * stride), 1e-9);
        }
    }
}
