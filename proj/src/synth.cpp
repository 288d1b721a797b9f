#include "crowdperc/synth.hpp"

#include "crowdperc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include <Eigen/Geometry>

namespace crowdperc {

namespace {

constexpr double kImageWidth = 1920;
constexpr double kImageHeight = 1080;
constexpr double kSimStep = 0.1;  // s

struct Walker {
    std::int64_t id;
    Eigen::Vector2d pos;
    double heading;
    double speed;
    double scale;
    int leader;                    // -1 for free walkers
    Eigen::Vector2d group_offset;  // in the leader frame
};

Eigen::Vector2d unit(double a) { return {std::cos(a), std::sin(a)}; }

// Ray from the sensor (at the 3D origin) to `point` passing through a vertical
// cylinder spanning [z_lo, z_hi].
bool ray_hits_cylinder(const Eigen::Vector3d& point, const Eigen::Vector2d& center, double r, double z_lo,
                       double z_hi) {
    const Eigen::Vector2d d = point.head<2>();
    const double a = d.squaredNorm();
    if (a == 0) return false;
    const double b = -2 * center.dot(d);
    const double c = center.squaredNorm() - r * r;
    const double disc = b * b - 4 * a * c;
    if (disc <= 0) return false;
    const double sq = std::sqrt(disc);
    const double t0 = std::max((-b - sq) / (2 * a), 0.0);
    const double t1 = std::min((-b + sq) / (2 * a), 1.0);
    if (!(t1 > t0)) return false;
    const double za = point.z() * t0, zb = point.z() * t1;
    return std::max(za, zb) >= z_lo && std::min(za, zb) <= z_hi;
}

}  // namespace

void SceneConfig::validate() const {
    auto fail = [](const std::string& m) { throw ConfigInvalid("scene config: " + m); };
    if (crowd_level < 0 || crowd_level > 3) fail("crowd_level must be 0..3");
    if (!(frame_rate > 0)) fail("frame_rate must be > 0");
    if (!(duration > 0)) fail("duration must be > 0");
    if (!(speed_min >= 0) || !(speed_max >= speed_min)) fail("speed range invalid");
    if (!(heading_noise >= 0)) fail("heading_noise must be >= 0");
    if (group_fraction < 0 || group_fraction > 1) fail("group_fraction must be in [0, 1]");
    if (group_size_min < 2 || group_size_max < group_size_min) fail("group size range invalid");
    if (!(x_region.max > x_region.min) || !(y_region.max > y_region.min)) fail("region empty");
    if (!(body_diameter > 0) || !(body_height > 0)) fail("body size must be > 0");
    if (!(point_budget > 0) || max_points_per_body < 0 || ground_points < 0) fail("point budget invalid");
    if (min_separation < 0) fail("min_separation must be >= 0");
}

std::pair<int, int> crowd_level_count_range(int level) {
    switch (level) {
        case 0: return {4, 9};
        case 1: return {10, 19};
        case 2: return {20, 29};
        default: return {30, 40};
    }
}

OcclusionLevel occlusion_from_shadow(double f) {
    if (f < 0.1) return OcclusionLevel::None;
    if (f < 0.5) return OcclusionLevel::Partial;
    return OcclusionLevel::Heavy;
}

double shadowed_fraction(std::span<const SimulatedBody> bodies, std::size_t target, const Eigen::Vector2d& origin) {
    const auto& b = bodies[target];
    const Eigen::Vector2d rel = b.center - origin;
    const double d = rel.norm();
    if (d <= b.radius) return 0.0;
    const double phi = std::atan2(rel.y(), rel.x());
    const double half = std::asin(b.radius / d);

    std::vector<std::pair<double, double>> spans;
    for (std::size_t j = 0; j < bodies.size(); ++j) {
        if (j == target) continue;
        const Eigen::Vector2d rj = bodies[j].center - origin;
        const double dj = rj.norm();
        if (!(dj < d)) continue;
        const double hj = dj <= bodies[j].radius ? std::numbers::pi : std::asin(bodies[j].radius / dj);
        const double delta = normalize_angle(std::atan2(rj.y(), rj.x()) - phi);
        const double lo = std::max(delta - hj, -half), hi = std::min(delta + hj, half);
        if (hi > lo) spans.emplace_back(lo, hi);
    }
    std::sort(spans.begin(), spans.end());
    double covered = 0, cur_lo = 0, cur_hi = 0;
    bool open = false;
    for (const auto& [lo, hi] : spans) {
        if (!open || lo > cur_hi) {
            if (open) covered += cur_hi - cur_lo;
            cur_lo = lo;
            cur_hi = hi;
            open = true;
        } else {
            cur_hi = std::max(cur_hi, hi);
        }
    }
    if (open) covered += cur_hi - cur_lo;
    return std::clamp(covered / (2 * half), 0.0, 1.0);
}

ProjectionMatrix default_camera() {
    Eigen::Matrix3d k;
    k << 1000, 0, kImageWidth / 2, 0, 1000, kImageHeight / 2, 0, 0, 1;
    Eigen::Matrix<double, 3, 4> rt = Eigen::Matrix<double, 3, 4>::Zero();
    // camera x = -sensor y, camera y = -sensor z, camera z = sensor x
    rt(0, 1) = -1;
    rt(1, 2) = -1;
    rt(2, 0) = 1;
    return k * rt;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
    // splitmix64 finalizer
    std::uint64_t z = base + 0x9E3779B97F4A7C15ull * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

SyntheticScene generate_scene(const SceneConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    auto uniform = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
    auto normal = [&](double s) { return std::normal_distribution<double>(0.0, s)(rng); };
    auto uniform_int = [&](int a, int b) { return std::uniform_int_distribution<int>(a, b)(rng); };

    const auto [count_min, count_max] = crowd_level_count_range(cfg.crowd_level);
    const int count = uniform_int(count_min, count_max);
    const double inner_margin = 0.5;
    const AxisRange xr{cfg.x_region.min + inner_margin, cfg.x_region.max - inner_margin};
    const AxisRange yr{cfg.y_region.min + inner_margin, cfg.y_region.max - inner_margin};

    // Population: free walkers and groups sharing a leader.
    std::vector<Walker> walkers;
    auto spawn_clear = [&](const Eigen::Vector2d& want) {
        for (int attempt = 0; attempt < 200; ++attempt) {
            const Eigen::Vector2d p = attempt == 0 ? want : Eigen::Vector2d(uniform(xr.min, xr.max), uniform(yr.min, yr.max));
            const bool clear = std::all_of(walkers.begin(), walkers.end(), [&](const Walker& w) {
                return (w.pos - p).norm() >= cfg.min_separation;
            });
            if (clear && xr.contains(p.x()) && yr.contains(p.y())) return p;
        }
        return Eigen::Vector2d(uniform(xr.min, xr.max), uniform(yr.min, yr.max));
    };
    std::int64_t next_id = 0;
    while (static_cast<int>(walkers.size()) < count) {
        const int remaining = count - static_cast<int>(walkers.size());
        const bool group = remaining >= cfg.group_size_min && uniform(0, 1) < cfg.group_fraction;
        const double heading = uniform(-std::numbers::pi, std::numbers::pi);
        const double speed = uniform(cfg.speed_min, cfg.speed_max);
        const Eigen::Vector2d start = spawn_clear({uniform(xr.min, xr.max), uniform(yr.min, yr.max)});
        const int leader = static_cast<int>(walkers.size());
        walkers.push_back({next_id++, start, heading, speed, uniform(0.9, 1.1), -1, Eigen::Vector2d::Zero()});
        if (!group) continue;
        const int size = std::min(remaining, uniform_int(cfg.group_size_min, cfg.group_size_max));
        for (int m = 1; m < size; ++m) {
            // Side-by-side or trailing slots around the leader.
            const Eigen::Vector2d offset(-0.8 * ((m - 1) / 2) + normal(0.1),
                                         (m % 2 ? 0.8 : -0.8) * ((m + 1) / 2) * 0.9 + normal(0.1));
            const Eigen::Rotation2Dd rot(heading);
            const Eigen::Vector2d p = spawn_clear(start + rot * offset);
            walkers.push_back({next_id++, p, heading, speed, uniform(0.9, 1.1), leader, offset});
        }
    }

    auto step = [&](double dt) {
        for (auto& w : walkers) {
            if (w.leader >= 0) continue;
            w.heading = normalize_angle(w.heading + normal(cfg.heading_noise * std::sqrt(dt)));
            w.speed = std::clamp(w.speed + normal(0.05), cfg.speed_min, cfg.speed_max);
            Eigen::Vector2d next = w.pos + w.speed * dt * unit(w.heading);
            if (!xr.contains(next.x())) {
                w.heading = normalize_angle(std::numbers::pi - w.heading);
                next = w.pos + w.speed * dt * unit(w.heading);
            }
            if (!yr.contains(next.y())) {
                w.heading = normalize_angle(-w.heading);
                next = w.pos + w.speed * dt * unit(w.heading);
            }
            w.pos = next;
        }
        for (auto& w : walkers) {
            if (w.leader < 0) continue;
            const Walker& lead = walkers[static_cast<std::size_t>(w.leader)];
            const Eigen::Vector2d target = lead.pos + Eigen::Rotation2Dd(lead.heading) * w.group_offset;
            const Eigen::Vector2d to_target = target - w.pos;
            const double reach = std::min(to_target.norm(), (cfg.speed_max + 0.5) * dt);
            if (to_target.norm() > 1e-9) w.pos += to_target.normalized() * reach;
            w.heading = lead.heading;
            w.speed = lead.speed;
        }
        // Pairwise separation.
        for (int iter = 0; iter < 3; ++iter) {
            for (std::size_t i = 0; i < walkers.size(); ++i) {
                for (std::size_t j = i + 1; j < walkers.size(); ++j) {
                    Eigen::Vector2d d = walkers[j].pos - walkers[i].pos;
                    const double n = d.norm();
                    if (n >= cfg.min_separation) continue;
                    d = n > 1e-9 ? Eigen::Vector2d(d / n) : Eigen::Vector2d(1, 0);
                    const double push = 0.5 * (cfg.min_separation - n);
                    walkers[i].pos -= push * d;
                    walkers[j].pos += push * d;
                }
            }
        }
        for (auto& w : walkers) {
            w.pos.x() = std::clamp(w.pos.x(), cfg.x_region.min, cfg.x_region.max - 1e-6);
            w.pos.y() = std::clamp(w.pos.y(), cfg.y_region.min, cfg.y_region.max - 1e-6);
        }
    };

    SyntheticScene scene;
    Sequence& seq = scene.sequence;
    seq.sequence_id = cfg.sequence_id;
    seq.meta = {cfg.weather, cfg.scene};
    seq.calibration = default_camera();

    const int frames = std::max(1, static_cast<int>(std::floor(cfg.duration * cfg.frame_rate + 1e-9)));
    const double frame_dt = 1.0 / cfg.frame_rate;
    const int substeps = std::max(1, static_cast<int>(std::ceil(frame_dt / kSimStep - 1e-9)));
    const Eigen::Vector2d origin = cfg.sensor_origin.head<2>();

    for (int k = 0; k < frames; ++k) {
        if (k > 0) {
            for (int s = 0; s < substeps; ++s) step(frame_dt / substeps);
        }
        std::vector<SimulatedBody> bodies;
        bodies.reserve(walkers.size());
        for (const auto& w : walkers) {
            bodies.push_back({w.id, w.pos - origin, 0.5 * cfg.body_diameter * w.scale, 0, 0, false});
        }
        std::vector<Eigen::RowVector4f> points;
        const double ground = cfg.ground_z - cfg.sensor_origin.z();

        for (std::size_t i = 0; i < bodies.size(); ++i) {
            auto& b = bodies[i];
            b.shadowed_fraction = shadowed_fraction(bodies, i);
            const double d = b.center.norm();
            const int budget = std::min(cfg.max_points_per_body,
                                        static_cast<int>(std::lround(cfg.point_budget / std::max(d * d, 1.0))));
            const double facing = std::atan2(-b.center.y(), -b.center.x());
            const double h = cfg.body_height * walkers[i].scale;
            for (int n = 0; n < budget; ++n) {
                const double a = facing + uniform(-0.5 * std::numbers::pi, 0.5 * std::numbers::pi);
                const Eigen::Vector2d p = b.center + 0.98 * b.radius * unit(a);
                const double z = ground + uniform(0.01, h - 0.01);
                const float intensity = static_cast<float>(uniform(0.0, 1.0));
                bool blocked = false;
                for (std::size_t j = 0; j < bodies.size() && !blocked; ++j) {
                    if (j == i) continue;
                    blocked = ray_hits_cylinder({p.x(), p.y(), z}, bodies[j].center, bodies[j].radius, ground,
                                                ground + cfg.body_height * walkers[j].scale);
                }
                if (blocked) continue;
                points.emplace_back(static_cast<float>(p.x()), static_cast<float>(p.y()), static_cast<float>(z),
                                    intensity);
            }
        }

        // Count points per body box from the float cloud so annotations agree
        // with what a point-in-box test on the stored file returns.
        Frame frame;
        frame.frame_index = k;
        frame.timestamp = static_cast<double>(k) / cfg.frame_rate;
        frame.pointcloud_ref = DatasetLayout::pointcloud_ref(cfg.sequence_id, k);

        for (int n = 0; n < cfg.ground_points; ++n) {
            points.emplace_back(static_cast<float>(uniform(cfg.x_region.min, cfg.x_region.max)),
                                static_cast<float>(uniform(cfg.y_region.min, cfg.y_region.max)),
                                static_cast<float>(ground - 0.05), static_cast<float>(uniform(0.0, 0.3)));
        }
        PointCloud cloud;
        cloud.points.resize(static_cast<Eigen::Index>(points.size()), 4);
        for (std::size_t n = 0; n < points.size(); ++n) cloud.points.row(static_cast<Eigen::Index>(n)) = points[n];

        for (std::size_t i = 0; i < bodies.size(); ++i) {
            auto& b = bodies[i];
            const double h = cfg.body_height * walkers[i].scale;
            Box3D box{b.center.x(), b.center.y(), ground + 0.5 * h, 2 * b.radius, 2 * b.radius, h,
                      normalize_angle(walkers[i].heading)};
            std::int64_t inside = 0;
            const double c = std::cos(box.theta), s = std::sin(box.theta);
            for (Eigen::Index n = 0; n < cloud.size(); ++n) {
                const double dx = cloud.points(n, 0) - box.x, dy = cloud.points(n, 1) - box.y;
                const double dz = cloud.points(n, 2) - box.z;
                if (std::abs(c * dx + s * dy) <= 0.5 * box.l && std::abs(-s * dx + c * dy) <= 0.5 * box.w &&
                    std::abs(dz) <= 0.5 * box.h) {
                    ++inside;
                }
            }
            b.num_points = inside;
            if (inside < kMinAnnotatedPoints) continue;
            b.annotated = true;
            Instance inst;
            inst.track_id = b.track_id;
            inst.box3d = box;
            inst.box2d = project_box(*seq.calibration, box, kImageWidth, kImageHeight);
            inst.occlusion = occlusion_from_shadow(b.shadowed_fraction);
            inst.num_points = inside;
            frame.instances.push_back(inst);
        }
        seq.frames.push_back(std::move(frame));
        scene.clouds.push_back(std::move(cloud));
        scene.bodies.push_back(std::move(bodies));
    }
    return scene;
}

void write_scene(const SyntheticScene& scene, const std::filesystem::path& root) {
    const DatasetLayout layout{root};
    for (std::size_t k = 0; k < scene.clouds.size(); ++k) {
        write_pointcloud(scene.clouds[k], layout.resolve(scene.sequence.frames[k].pointcloud_ref));
    }
    write_sequence(scene.sequence, layout.sequence_file(scene.sequence.sequence_id));
}

std::vector<std::string> generate_dataset(const DatasetConfig& cfg, const std::filesystem::path& root) {
    if (cfg.sequences < 1) throw ConfigInvalid("dataset needs at least one sequence");
    std::vector<std::string> ids;
    for (int i = 0; i < cfg.sequences; ++i) {
        SceneConfig sc = cfg.scene;
        char id[32];
        std::snprintf(id, sizeof(id), "seq_%04d", i);
        sc.sequence_id = id;
        sc.seed = derive_seed(cfg.scene.seed, static_cast<std::uint64_t>(i));
        write_scene(generate_scene(sc), root);
        ids.push_back(id);
    }
    const auto n = static_cast<double>(ids.size());
    const auto n_train = static_cast<std::size_t>(std::lround(0.7 * n));
    const auto n_val = std::min(ids.size() - n_train, static_cast<std::size_t>(std::lround(0.15 * n)));
    Splits splits{{"train", {}}, {"val", {}}, {"test", {}}};
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const char* split = i < n_train ? "train" : i < n_train + n_val ? "val" : "test";
        splits[split].push_back(ids[i]);
    }
    write_splits(splits, DatasetLayout{root}.splits_file());
    return ids;
}

}  // namespace crowdperc
