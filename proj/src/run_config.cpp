#include "crowdperc/run_config.hpp"

#include "crowdperc/errors.hpp"

#include <fstream>

namespace crowdperc {

using nlohmann::json;

const char* distance_mode_name(DistanceMode mode) { return mode == DistanceMode::BEV2D ? "bev" : "3d"; }

DistanceMode parse_distance_mode(const std::string& name) {
    if (name == "3d") return DistanceMode::Euclid3D;
    if (name == "bev") return DistanceMode::BEV2D;
    throw ConfigInvalid("distance mode must be '3d' or 'bev', got '" + name + "'");
}

void RunConfig::validate() const {
    if (!nms.valid()) throw ConfigInvalid("nms: radius must be > 0 and min_points >= 0");
    if (!targets.valid()) throw ConfigInvalid("targets: sigma_min, alpha, beta must be > 0");
    if (!decode.valid()) throw ConfigInvalid("decode: k_max >= 1 and agg_weight in [0, 1] required");
    if (eval.thresholds.empty()) throw ConfigInvalid("eval: at least one distance threshold required");
    for (double d : eval.thresholds) {
        if (!(d > 0)) throw ConfigInvalid("eval: thresholds must be > 0");
    }
    if (!(eval.tracking_threshold > 0) || !(eval.tracker_threshold > 0)) {
        throw ConfigInvalid("eval: tracking thresholds must be > 0");
    }
    if (!(scan_diameter > 0) || !(stats_bin_width > 0)) throw ConfigInvalid("stats: values must be > 0");
    if (max_points_per_cell == 0) throw ConfigInvalid("grid: max_points_per_cell must be >= 1");
}

json to_json(const RunConfig& c) {
    const auto& g = c.grid;
    return {
        {"grid",
         {{"x_range", {g.x_range().min, g.x_range().max}},
          {"y_range", {g.y_range().min, g.y_range().max}},
          {"z_range", {g.z_range().min, g.z_range().max}},
          {"voxel_size", {g.voxel_size().x(), g.voxel_size().y(), g.voxel_size().z()}},
          {"dims", {g.nx(), g.ny(), g.nz()}},
          {"max_points_per_cell", c.max_points_per_cell}}},
        {"nms", {{"radius", c.nms.radius}, {"min_points", c.nms.min_points}}},
        {"targets",
         {{"sigma_min", c.targets.sigma_min},
          {"sigma_factor", c.targets.sigma_factor},
          {"alpha", c.targets.alpha},
          {"beta", c.targets.beta}}},
        {"decode",
         {{"k_max", c.decode.k_max}, {"score_thresh", c.decode.score_thresh}, {"agg_weight", c.decode.agg_weight}}},
        {"eval",
         {{"thresholds", c.eval.thresholds},
          {"tracking_threshold", c.eval.tracking_threshold},
          {"tracker_threshold", c.eval.tracker_threshold},
          {"distance_mode", distance_mode_name(c.eval.distance_mode)}}},
        {"attention", {{"budget_bytes", c.attention_budget}}},
        {"stats", {{"scan_diameter", c.scan_diameter}, {"bin_width", c.stats_bin_width}}},
    };
}

namespace {

template <typename T>
void maybe(const json& obj, const char* key, T& out) {
    if (obj.contains(key)) out = obj.at(key).get<T>();
}

AxisRange range_of(const json& j) {
    if (!j.is_array() || j.size() != 2) throw ConfigInvalid("range must be [min, max]");
    return {j[0].get<double>(), j[1].get<double>()};
}

}  // namespace

RunConfig run_config_from_json(const json& j) {
    RunConfig c;
    try {
        if (j.contains("grid")) {
            const auto& g = j.at("grid");
            AxisRange x = c.grid.x_range(), y = c.grid.y_range(), z = c.grid.z_range();
            Eigen::Vector3d v = c.grid.voxel_size();
            if (g.contains("x_range")) x = range_of(g.at("x_range"));
            if (g.contains("y_range")) y = range_of(g.at("y_range"));
            if (g.contains("z_range")) z = range_of(g.at("z_range"));
            if (g.contains("voxel_size")) {
                const auto& vs = g.at("voxel_size");
                if (!vs.is_array() || vs.size() != 3) throw ConfigInvalid("voxel_size must have 3 entries");
                v = {vs[0].get<double>(), vs[1].get<double>(), vs[2].get<double>()};
            }
            c.grid = GridSpec(x, y, z, v);
            maybe(g, "max_points_per_cell", c.max_points_per_cell);
        }
        if (j.contains("nms")) {
            maybe(j.at("nms"), "radius", c.nms.radius);
            maybe(j.at("nms"), "min_points", c.nms.min_points);
        }
        if (j.contains("targets")) {
            const auto& t = j.at("targets");
            maybe(t, "sigma_min", c.targets.sigma_min);
            maybe(t, "sigma_factor", c.targets.sigma_factor);
            maybe(t, "alpha", c.targets.alpha);
            maybe(t, "beta", c.targets.beta);
        }
        if (j.contains("decode")) {
            const auto& d = j.at("decode");
            maybe(d, "k_max", c.decode.k_max);
            maybe(d, "score_thresh", c.decode.score_thresh);
            maybe(d, "agg_weight", c.decode.agg_weight);
        }
        if (j.contains("eval")) {
            const auto& e = j.at("eval");
            maybe(e, "thresholds", c.eval.thresholds);
            maybe(e, "tracking_threshold", c.eval.tracking_threshold);
            maybe(e, "tracker_threshold", c.eval.tracker_threshold);
            if (e.contains("distance_mode")) c.eval.distance_mode = parse_distance_mode(e.at("distance_mode").get<std::string>());
        }
        if (j.contains("attention")) maybe(j.at("attention"), "budget_bytes", c.attention_budget);
        if (j.contains("stats")) {
            maybe(j.at("stats"), "scan_diameter", c.scan_diameter);
            maybe(j.at("stats"), "bin_width", c.stats_bin_width);
        }
    } catch (const json::exception& e) {
        throw ConfigInvalid(std::string("run config: ") + e.what());
    }
    c.validate();
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigInvalid("cannot open config " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ConfigInvalid(path.string() + ": " + e.what());
    }
    return run_config_from_json(j);
}

}  // namespace crowdperc
