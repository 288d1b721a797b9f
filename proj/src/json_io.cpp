#include "crowdperc/json_io.hpp"

#include "crowdperc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace crowdperc {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json parse_or_throw(const std::string& text, const std::string& origin) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        const auto upto = std::min<std::size_t>(e.byte, text.size());
        const auto line = 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + upto, '\n'));
        throw MalformedFile(origin, line, e.what());
    }
}

double finite_number(const json& j, const std::string& origin, const std::string& field) {
    if (!j.is_number()) throw SchemaViolation(origin, field, "expected number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) throw SchemaViolation(origin, field, "non-finite number");
    return v;
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string threshold_key(double d) { return json(d).dump(); }

}  // namespace

json to_json(const Box3D& b) {
    return {{"x", b.x}, {"y", b.y}, {"z", b.z}, {"l", b.l}, {"w", b.w}, {"h", b.h}, {"theta", b.theta}};
}

Box3D box3d_from_json(const json& j) {
    Box3D b{j.at("x").get<double>(), j.at("y").get<double>(), j.at("z").get<double>(), j.at("l").get<double>(),
            j.at("w").get<double>(), j.at("h").get<double>(), normalize_angle(j.at("theta").get<double>())};
    if (!b.valid()) throw ShapeMismatch("box3d must have finite fields and positive extents");
    return b;
}

std::string serialize_predictions(const PredictionSet& set) {
    json doc = json::object();
    for (const auto& [id, frames] : set) {
        json jf = json::array();
        for (const auto& frame : frames) {
            json objs = json::array();
            for (const auto& o : frame) {
                json j = {{"box3d", to_json(o.detection.box3d)}, {"score", o.detection.score}};
                if (o.detection.velocity) j["velocity"] = {o.detection.velocity->x(), o.detection.velocity->y()};
                if (o.track_id) j["track_id"] = *o.track_id;
                objs.push_back(std::move(j));
            }
            jf.push_back(std::move(objs));
        }
        doc[id] = std::move(jf);
    }
    return doc.dump(1) + "\n";
}

PredictionSet parse_predictions(const std::string& text, const std::string& origin) {
    const json doc = parse_or_throw(text, origin);
    if (!doc.is_object()) throw SchemaViolation(origin, "/", "expected object keyed by sequence id");
    PredictionSet set;
    for (const auto& [id, frames] : doc.items()) {
        const std::string base = "/" + id;
        if (!frames.is_array()) throw SchemaViolation(origin, base, "expected array of frames");
        auto& out = set[id];
        for (std::size_t f = 0; f < frames.size(); ++f) {
            const std::string fptr = base + "/" + std::to_string(f);
            if (!frames[f].is_array()) throw SchemaViolation(origin, fptr, "expected array of detections");
            std::vector<PredictedObject> objs;
            for (std::size_t k = 0; k < frames[f].size(); ++k) {
                const std::string ptr = fptr + "/" + std::to_string(k);
                const auto& j = frames[f][k];
                if (!j.is_object() || !j.contains("box3d") || !j.contains("score")) {
                    throw SchemaViolation(origin, ptr, "detection needs box3d and score");
                }
                PredictedObject o;
                try {
                    o.detection.box3d = box3d_from_json(j.at("box3d"));
                } catch (const json::exception& e) {
                    throw SchemaViolation(origin, ptr + "/box3d", e.what());
                } catch (const ShapeMismatch& e) {
                    throw SchemaViolation(origin, ptr + "/box3d", e.what());
                }
                o.detection.score = finite_number(j.at("score"), origin, ptr + "/score");
                if (j.contains("velocity") && !j.at("velocity").is_null()) {
                    const auto& v = j.at("velocity");
                    if (!v.is_array() || v.size() != 2) throw SchemaViolation(origin, ptr + "/velocity", "expected [vx, vy]");
                    o.detection.velocity = Eigen::Vector2d(finite_number(v[0], origin, ptr + "/velocity/0"),
                                                           finite_number(v[1], origin, ptr + "/velocity/1"));
                }
                if (j.contains("track_id") && !j.at("track_id").is_null()) {
                    if (!j.at("track_id").is_number_integer()) {
                        throw SchemaViolation(origin, ptr + "/track_id", "expected integer");
                    }
                    o.track_id = j.at("track_id").get<std::int64_t>();
                }
                objs.push_back(o);
            }
            out.push_back(std::move(objs));
        }
    }
    return set;
}

PredictionSet load_predictions(const fs::path& path) { return parse_predictions(read_file(path), path.string()); }

DetectionFrames detections_of(const PredictionFrames& frames) {
    DetectionFrames out;
    out.reserve(frames.size());
    for (const auto& f : frames) {
        std::vector<Detection> dets;
        dets.reserve(f.size());
        for (const auto& o : f) dets.push_back(o.detection);
        out.push_back(std::move(dets));
    }
    return out;
}

std::vector<TrackFrame> tracks_of(const PredictionFrames& frames, const std::string& sequence_id) {
    std::vector<TrackFrame> out;
    out.reserve(frames.size());
    for (std::size_t f = 0; f < frames.size(); ++f) {
        TrackFrame tf;
        for (std::size_t k = 0; k < frames[f].size(); ++k) {
            const auto& o = frames[f][k];
            if (!o.track_id) {
                throw SchemaViolation("predictions", "/" + sequence_id + "/" + std::to_string(f) + "/" + std::to_string(k),
                                      "track_id required for tracking evaluation");
            }
            tf.push_back({*o.track_id, o.detection.box3d});
        }
        out.push_back(std::move(tf));
    }
    return out;
}

std::string serialize_trajectories(const std::vector<Trajectory>& trajs) {
    json doc = json::array();
    for (const auto& t : trajs) {
        json pts = json::array();
        for (const auto& p : t.points) pts.push_back({p.t, p.position.x(), p.position.y()});
        doc.push_back({{"track_id", t.track_id}, {"points", std::move(pts)}});
    }
    return doc.dump(1) + "\n";
}

namespace {

std::vector<Trajectory> trajectories_from_json(const json& doc, const std::string& origin, const std::string& base) {
    if (!doc.is_array()) throw SchemaViolation(origin, base.empty() ? "/" : base, "expected array of trajectories");
    std::vector<Trajectory> out;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const std::string ptr = base + "/" + std::to_string(i);
        const auto& j = doc[i];
        if (!j.is_object() || !j.contains("track_id") || !j.at("track_id").is_number_integer()) {
            throw SchemaViolation(origin, ptr + "/track_id", "expected integer");
        }
        if (!j.contains("points") || !j.at("points").is_array() || j.at("points").empty()) {
            throw SchemaViolation(origin, ptr + "/points", "expected non-empty array");
        }
        Trajectory t;
        t.track_id = j.at("track_id").get<std::int64_t>();
        const auto& pts = j.at("points");
        for (std::size_t k = 0; k < pts.size(); ++k) {
            const std::string pp = ptr + "/points/" + std::to_string(k);
            if (!pts[k].is_array() || pts[k].size() != 3) throw SchemaViolation(origin, pp, "expected [t, x, y]");
            TrajectoryPoint p;
            p.t = finite_number(pts[k][0], origin, pp + "/0");
            p.position = {finite_number(pts[k][1], origin, pp + "/1"), finite_number(pts[k][2], origin, pp + "/2")};
            if (!t.points.empty() && !(p.t > t.points.back().t)) {
                throw SchemaViolation(origin, pp, "timestamps must be strictly increasing");
            }
            t.points.push_back(p);
        }
        out.push_back(std::move(t));
    }
    return out;
}

}  // namespace

std::vector<Trajectory> parse_trajectories(const std::string& text, const std::string& origin) {
    return trajectories_from_json(parse_or_throw(text, origin), origin, "");
}

std::string serialize_trajectory_set(const TrajectorySet& set) {
    if (set.size() == 1 && set.begin()->first.empty()) return serialize_trajectories(set.begin()->second);
    json doc = json::object();
    for (const auto& [id, trajs] : set) doc[id] = json::parse(serialize_trajectories(trajs));
    return doc.dump(1) + "\n";
}

TrajectorySet parse_trajectory_set(const std::string& text, const std::string& origin) {
    const json doc = parse_or_throw(text, origin);
    TrajectorySet set;
    if (doc.is_array()) {
        set[""] = trajectories_from_json(doc, origin, "");
        return set;
    }
    if (!doc.is_object()) throw SchemaViolation(origin, "/", "expected array or object of trajectories");
    for (const auto& [id, arr] : doc.items()) set[id] = trajectories_from_json(arr, origin, "/" + id);
    return set;
}

TrajectorySet load_trajectory_set(const fs::path& path) { return parse_trajectory_set(read_file(path), path.string()); }

PredictionMetrics evaluate_prediction(const TrajectorySet& gt, const TrajectorySet& pred) {
    PredictionMetrics m;
    double fde_sum = 0, mde_sum = 0;
    for (const auto& [seq, trajs] : pred) {
        auto g = gt.find(seq);
        if (g == gt.end()) throw MisalignedFrames("no ground-truth trajectories for sequence '" + seq + "'");
        for (const auto& p : trajs) {
            auto it = std::find_if(g->second.begin(), g->second.end(),
                                   [&](const Trajectory& t) { return t.track_id == p.track_id; });
            if (it == g->second.end()) {
                throw MisalignedFrames("sequence '" + seq + "': no ground-truth track " + std::to_string(p.track_id));
            }
            Trajectory sliced;
            sliced.track_id = p.track_id;
            for (const auto& pt : p.points) {
                auto at = std::find_if(it->points.begin(), it->points.end(),
                                       [&](const TrajectoryPoint& q) { return std::abs(q.t - pt.t) <= 1e-6; });
                if (at == it->points.end()) {
                    throw MisalignedFrames("sequence '" + seq + "', track " + std::to_string(p.track_id) +
                                           ": no ground truth at t=" + std::to_string(pt.t));
                }
                sliced.points.push_back(*at);
            }
            fde_sum += fde(p, sliced);
            mde_sum += mde(p, sliced);
            ++m.trajectories;
        }
    }
    if (m.trajectories > 0) {
        m.fde = fde_sum / static_cast<double>(m.trajectories);
        m.mde = mde_sum / static_cast<double>(m.trajectories);
    }
    return m;
}

std::vector<Trajectory> load_trajectories(const fs::path& path) {
    return parse_trajectories(read_file(path), path.string());
}

// ---------------------------------------------------------------------------

DetectionMetrics evaluate_detection(std::span<const Frame> gt, std::span<const std::vector<Detection>> dets,
                                    const EvalConfig& cfg) {
    DetectionMetrics m;
    std::vector<double> aps;
    bool complete = true;
    for (double d : cfg.thresholds) {
        const auto ap = average_precision(gt, dets, d, cfg.distance_mode);
        m.ap.emplace_back(d, ap);
        if (ap) aps.push_back(*ap);
        else complete = false;
    }
    if (complete) m.map = mean_ap(aps);
    for (auto level : kOcclusionLevels) {
        m.ar[static_cast<std::size_t>(level)] =
            average_recall_occlusion(gt, dets, level, cfg.thresholds, cfg.distance_mode);
    }
    return m;
}

json report_json(const EvalReport& r, const RunConfig& cfg) {
    json doc;
    doc["protocol"] = {
        {"matching", "greedy by descending score, nearest unmatched ground truth within threshold, single use"},
        {"ap_integration", "101 recall samples, precision = running max from the right, no clipping"},
        {"ar", "same matcher as AP over all ground truth, recall stratified by occlusion level"},
        {"distance_mode", distance_mode_name(cfg.eval.distance_mode)},
        {"thresholds", cfg.eval.thresholds},
        {"tracking_threshold", cfg.eval.tracking_threshold},
        {"mota_gt", "ground-truth boxes summed over frames"},
        {"mostly_tracked", "> 0.8 of frames matched"},
        {"mostly_lost", "< 0.2 of frames matched"},
    };
    doc["config"] = to_json(cfg);
    if (r.detection) {
        json ap = json::object();
        for (const auto& [d, v] : r.detection->ap) ap[threshold_key(d)] = optional_number(v);
        json ar = json::object();
        for (std::size_t i = 0; i < 3; ++i) {
            if (r.detection->ar[i]) ar[std::to_string(i)] = *r.detection->ar[i];
        }
        doc["detection"] = {{"ap", ap}, {"map", optional_number(r.detection->map)}, {"ar", ar}};
    }
    if (r.tracking) {
        const auto& t = *r.tracking;
        doc["tracking"] = {{"mota", optional_number(t.mota)},
                           {"fp", t.fp},
                           {"fn", t.fn},
                           {"ids", t.ids},
                           {"gt", t.gt},
                           {"matches", t.matches},
                           {"gt_tracks", t.gt_tracks},
                           {"mt", t.mt},
                           {"ml", t.ml}};
    }
    if (r.prediction) {
        doc["prediction"] = {
            {"trajectories", r.prediction->trajectories}, {"fde", r.prediction->fde}, {"mde", r.prediction->mde}};
    }
    return doc;
}

json to_json(const ValidationReport& r) {
    auto issues = [](const std::vector<ValidationIssue>& v) {
        json a = json::array();
        for (const auto& i : v) a.push_back({{"location", i.location}, {"message", i.message}});
        return a;
    };
    return {{"ok", r.ok()},
            {"sequences", r.sequences_checked},
            {"frames", r.frames_checked},
            {"errors", issues(r.errors)},
            {"warnings", issues(r.warnings)}};
}

json to_json(const DatasetStatistics& s) {
    json bins = json::array();
    for (const auto& b : s.points_by_distance) {
        bins.push_back({{"lower", b.lower}, {"upper", b.upper}, {"count", b.count}, {"mean_points", b.mean_points}});
    }
    return {{"frames", s.frames},
            {"instances", s.instances},
            {"density_2", s.density.density_2},
            {"density_5", s.density.density_5},
            {"density_10", s.density.density_10},
            {"person_per_frame", s.density.person_per_frame},
            {"person_per_range", s.density.person_per_range},
            {"occlusion_histogram", s.occlusion_histogram},
            {"crowd_level_histogram", s.crowd_level_histogram},
            {"points_vs_distance", bins}};
}

std::string dump_report(const json& j) { return j.dump(2) + "\n"; }

void write_text_file(const std::string& text, const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out << text;
        if (!out) throw Error("write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

}  // namespace crowdperc
