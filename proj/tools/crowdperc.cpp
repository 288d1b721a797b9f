// crowdperc: dataset validation, statistics, synthetic data, heatmap targets,
// decoding, post-processing and evaluation from the command line.
//
// Exit codes: 0 success, 1 data/validation failure, 2 usage or config error.

#include "crowdperc/crowd_stats.hpp"
#include "crowdperc/dataset_io.hpp"
#include "crowdperc/dha_container.hpp"
#include "crowdperc/dha_core.hpp"
#include "crowdperc/errors.hpp"
#include "crowdperc/evaluation.hpp"
#include "crowdperc/json_io.hpp"
#include "crowdperc/postprocess.hpp"
#include "crowdperc/run_config.hpp"
#include "crowdperc/synth.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using namespace crowdperc;
using nlohmann::json;

namespace {

struct CommonOptions {
    std::string config;
    std::string out;
    std::uint64_t seed = 0;
    int threads = 0;
    std::string distance_mode;
};

void add_common(CLI::App* sub, CommonOptions& o) {
    sub->add_option("--config", o.config, "Run config JSON (defaults apply to absent fields)")->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "Output path (stdout when omitted)");
    sub->add_option("--seed", o.seed, "Random seed");
    sub->add_option("--threads", o.threads, "Worker threads (fallback: CROWDPERC_THREADS)")->check(CLI::NonNegativeNumber);
    sub->add_option("--distance-mode", o.distance_mode, "Center distance for matching")
        ->check(CLI::IsMember({"3d", "bev"}));
}

int resolve_threads(const CommonOptions& o) {
    if (o.threads > 0) return o.threads;
    if (const char* env = std::getenv("CROWDPERC_THREADS")) {
        try {
            const int n = std::stoi(env);
            if (n > 0) return n;
        } catch (const std::exception&) {
        }
    }
    return 1;
}

RunConfig resolve_config(const CommonOptions& o) {
    RunConfig cfg = o.config.empty() ? RunConfig{} : load_run_config(o.config);
    if (!o.distance_mode.empty()) cfg.eval.distance_mode = parse_distance_mode(o.distance_mode);
    cfg.validate();
    return cfg;
}

void emit(const std::string& text, const std::string& out) {
    if (out.empty()) {
        std::cout << text;
    } else {
        write_text_file(text, out);
    }
}

struct GtDataset {
    std::vector<Sequence> sequences;
};

GtDataset load_gt(const std::string& root, const std::string& split, int threads) {
    GtDataset gt;
    auto all = load_dataset(root, threads);
    if (split.empty()) {
        gt.sequences = std::move(all);
        return gt;
    }
    const auto splits = load_splits(DatasetLayout{root}.splits_file());
    auto it = splits.find(split);
    if (it == splits.end()) throw ConfigInvalid("unknown split '" + split + "'");
    for (auto& s : all) {
        if (std::find(it->second.begin(), it->second.end(), s.sequence_id) != it->second.end()) {
            gt.sequences.push_back(std::move(s));
        }
    }
    return gt;
}

const PredictionFrames& predictions_for(const PredictionSet& preds, const Sequence& seq) {
    auto it = preds.find(seq.sequence_id);
    if (it == preds.end()) throw MisalignedFrames("no predictions for sequence '" + seq.sequence_id + "'");
    if (it->second.size() != seq.frames.size()) {
        throw MisalignedFrames("sequence '" + seq.sequence_id + "': " + std::to_string(it->second.size()) +
                               " prediction frames for " + std::to_string(seq.frames.size()) + " annotated frames");
    }
    return it->second;
}

void check_no_extra(const PredictionSet& preds, const GtDataset& gt) {
    for (const auto& [id, frames] : preds) {
        const bool known = std::any_of(gt.sequences.begin(), gt.sequences.end(),
                                       [&](const Sequence& s) { return s.sequence_id == id; });
        if (!known) throw MisalignedFrames("predictions for unknown sequence '" + id + "'");
    }
}

// ---------------------------------------------------------------------------

int cmd_validate(const std::string& root, const CommonOptions& o) {
    ValidationOptions opts;
    opts.threads = resolve_threads(o);
    const auto report = validate_dataset(root, opts);
    emit(dump_report(to_json(report)), o.out);
    for (const auto& e : report.errors) std::cerr << "error: " << e.location << ": " << e.message << "\n";
    return report.ok() ? 0 : 1;
}

int cmd_stats(const std::string& root, const std::string& csv_dir, std::optional<double> diameter,
              const CommonOptions& o) {
    RunConfig cfg = resolve_config(o);
    if (diameter) cfg.scan_diameter = *diameter;
    cfg.validate();
    const auto seqs = load_dataset(root, resolve_threads(o));
    std::vector<Frame> frames;
    for (const auto& s : seqs) frames.insert(frames.end(), s.frames.begin(), s.frames.end());
    const auto stats = compute_statistics(frames, cfg.scan_diameter, cfg.stats_bin_width);

    json doc = to_json(stats);
    doc["sequences"] = seqs.size();
    doc["config"] = to_json(cfg);
    if (!csv_dir.empty()) {
        std::ostringstream pts, occ, lvl;
        pts << "lower_m,upper_m,count,mean_points\n";
        for (const auto& b : stats.points_by_distance) {
            pts << b.lower << "," << b.upper << "," << b.count << "," << b.mean_points << "\n";
        }
        occ << "occlusion,count\n";
        for (std::size_t i = 0; i < 3; ++i) occ << i << "," << stats.occlusion_histogram[i] << "\n";
        lvl << "crowd_level,frames\n";
        for (std::size_t i = 0; i < 4; ++i) lvl << i << "," << stats.crowd_level_histogram[i] << "\n";
        write_text_file(pts.str(), fs::path(csv_dir) / "points_vs_distance.csv");
        write_text_file(occ.str(), fs::path(csv_dir) / "occlusion.csv");
        write_text_file(lvl.str(), fs::path(csv_dir) / "crowd_levels.csv");
    }
    emit(dump_report(doc), o.out);
    return 0;
}

struct SynthOptions {
    int level = 1;
    int sequences = 1;
    std::optional<double> duration;
    std::string scene_config;
    bool emit_predictions = false;
};

SceneConfig scene_from_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigInvalid("cannot open scene config " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigInvalid(path + ": " + e.what());
    }
    SceneConfig c;
    auto maybe = [&](const char* key, auto& v) {
        if (j.contains(key)) v = j.at(key).get<std::decay_t<decltype(v)>>();
    };
    try {
        maybe("crowd_level", c.crowd_level);
        maybe("group_fraction", c.group_fraction);
        maybe("group_size_min", c.group_size_min);
        maybe("group_size_max", c.group_size_max);
        maybe("speed_min", c.speed_min);
        maybe("speed_max", c.speed_max);
        maybe("duration", c.duration);
        maybe("frame_rate", c.frame_rate);
        maybe("ground_z", c.ground_z);
        maybe("point_budget", c.point_budget);
        maybe("max_points_per_body", c.max_points_per_body);
        maybe("ground_points", c.ground_points);
        maybe("weather", c.weather);
        maybe("scene", c.scene);
        if (j.contains("sensor_origin")) {
            const auto v = j.at("sensor_origin").get<std::vector<double>>();
            if (v.size() != 3) throw ConfigInvalid("sensor_origin must have 3 entries");
            c.sensor_origin = {v[0], v[1], v[2]};
        }
    } catch (const json::exception& e) {
        throw ConfigInvalid(path + ": " + e.what());
    }
    return c;
}

int cmd_gen_synth(const SynthOptions& s, const CommonOptions& o, bool level_given) {
    if (o.out.empty()) throw ConfigInvalid("gen-synth requires --out <directory>");
    DatasetConfig cfg;
    if (!s.scene_config.empty()) cfg.scene = scene_from_json(s.scene_config);
    if (level_given || s.scene_config.empty()) cfg.scene.crowd_level = s.level;
    if (s.duration) cfg.scene.duration = *s.duration;
    cfg.scene.seed = o.seed;
    cfg.sequences = s.sequences;
    cfg.scene.validate();

    const auto ids = generate_dataset(cfg, o.out);
    if (s.emit_predictions) {
        PredictionSet preds;
        for (const auto& id : ids) {
            const auto seq = load_sequence(DatasetLayout{o.out}.sequence_file(id));
            auto& frames = preds[id];
            const auto dets = perfect_detections(seq.frames);
            for (std::size_t f = 0; f < dets.size(); ++f) {
                std::vector<PredictedObject> objs;
                for (std::size_t k = 0; k < dets[f].detections.size(); ++k) {
                    objs.push_back({dets[f].detections[k], seq.frames[f].instances[k].track_id});
                }
                frames.push_back(std::move(objs));
            }
        }
        write_text_file(serialize_predictions(preds), fs::path(o.out) / "perfect_predictions.json");
    }
    std::cerr << "generated " << ids.size() << " sequence(s) in " << o.out << "\n";
    return 0;
}

const Sequence& find_sequence(const std::vector<Sequence>& seqs, const std::string& id) {
    for (const auto& s : seqs) {
        if (s.sequence_id == id) return s;
    }
    throw ConfigInvalid("unknown sequence '" + id + "'");
}

int cmd_render(const std::string& root, const std::string& seq_id, std::int64_t frame_index, const CommonOptions& o) {
    if (o.out.empty()) throw ConfigInvalid("render-targets requires --out <file.dha>");
    const RunConfig cfg = resolve_config(o);
    const auto seq = load_sequence(DatasetLayout{root}.sequence_file(seq_id));
    if (frame_index < 0 || frame_index >= static_cast<std::int64_t>(seq.frames.size())) {
        throw ConfigInvalid("frame " + std::to_string(frame_index) + " out of range");
    }
    const auto dets = perfect_detections(seq.frames);
    const auto& frame = seq.frames[static_cast<std::size_t>(frame_index)];
    std::vector<Eigen::Vector2d> vel;
    for (const auto& d : dets[static_cast<std::size_t>(frame_index)].detections) vel.push_back(*d.velocity);
    RenderSummary summary;
    const auto pyramid = render_targets<float>(frame.instances, cfg.grid, cfg.targets, vel, &summary);
    write_binary_file(encode_pyramid(pyramid), o.out);
    std::cerr << "rendered " << summary.rendered << " instance(s), skipped " << summary.skipped_out_of_range
              << " out of range\n";
    return 0;
}

int cmd_decode(const std::string& input, const std::string& seq_id, const CommonOptions& o) {
    const RunConfig cfg = resolve_config(o);
    const auto pyramid = decode_pyramid(read_binary_file(input));
    const auto dets = decode_peaks(pyramid, cfg.grid, cfg.decode);
    PredictionSet preds;
    auto& frame = preds[seq_id].emplace_back();
    for (const auto& d : dets) frame.push_back({d, std::nullopt});
    emit(serialize_predictions(preds), o.out);
    return 0;
}

int cmd_nms(const std::string& pred_path, const std::string& root, const CommonOptions& o) {
    const RunConfig cfg = resolve_config(o);
    auto preds = load_predictions(pred_path);
    std::optional<GtDataset> gt;
    if (!root.empty()) gt = load_gt(root, "", resolve_threads(o));

    for (auto& [id, frames] : preds) {
        const Sequence* seq = gt ? &find_sequence(gt->sequences, id) : nullptr;
        if (seq && seq->frames.size() != frames.size()) {
            throw MisalignedFrames("sequence '" + id + "': prediction frame count differs from dataset");
        }
        for (std::size_t f = 0; f < frames.size(); ++f) {
            // Keep track ids attached through suppression.
            std::vector<Detection> dets;
            for (const auto& obj : frames[f]) dets.push_back(obj.detection);
            std::vector<Detection> kept = circle_nms(dets, cfg.nms.radius);
            if (seq) {
                const auto cloud = load_pointcloud(DatasetLayout{root}.resolve(seq->frames[f].pointcloud_ref));
                kept = filter_min_points(kept, cloud, cfg.nms.min_points);
            }
            std::vector<PredictedObject> out;
            std::vector<char> used(frames[f].size(), 0);
            for (const auto& k : kept) {
                for (std::size_t i = 0; i < frames[f].size(); ++i) {
                    const auto& obj = frames[f][i];
                    if (!used[i] && obj.detection.box3d == k.box3d && obj.detection.score == k.score) {
                        used[i] = 1;
                        out.push_back(obj);
                        break;
                    }
                }
            }
            frames[f] = std::move(out);
        }
    }
    emit(serialize_predictions(preds), o.out);
    return 0;
}

int cmd_eval_det(const std::string& root, const std::string& pred_path, const std::string& split,
                 const CommonOptions& o) {
    const RunConfig cfg = resolve_config(o);
    const auto gt = load_gt(root, split, resolve_threads(o));
    const auto preds = load_predictions(pred_path);
    if (split.empty()) check_no_extra(preds, gt);

    std::vector<Frame> gt_frames;
    DetectionFrames det_frames;
    for (const auto& seq : gt.sequences) {
        const auto dets = detections_of(predictions_for(preds, seq));
        gt_frames.insert(gt_frames.end(), seq.frames.begin(), seq.frames.end());
        det_frames.insert(det_frames.end(), dets.begin(), dets.end());
    }
    EvalReport report;
    report.detection = evaluate_detection(gt_frames, det_frames, cfg.eval);
    emit(dump_report(report_json(report, cfg)), o.out);
    return 0;
}

int cmd_eval_track(const std::string& root, const std::string& pred_path, const std::string& split,
                   bool run_tracker, const CommonOptions& o) {
    const RunConfig cfg = resolve_config(o);
    const auto gt = load_gt(root, split, resolve_threads(o));
    const auto preds = load_predictions(pred_path);
    if (split.empty()) check_no_extra(preds, gt);

    std::vector<ClearMotResult> parts;
    for (const auto& seq : gt.sequences) {
        const auto& frames = predictions_for(preds, seq);
        std::vector<TrackFrame> tracks;
        if (run_tracker) {
            std::vector<DetectionFrame> det_frames;
            const auto dets = detections_of(frames);
            for (std::size_t f = 0; f < dets.size(); ++f) det_frames.push_back({seq.frames[f].timestamp, dets[f]});
            tracks = greedy_velocity_tracker(det_frames, cfg.eval.tracker_threshold);
        } else {
            tracks = tracks_of(frames, seq.sequence_id);
        }
        parts.push_back(clear_mot(track_frames(seq.frames), tracks, cfg.eval.tracking_threshold, cfg.eval.distance_mode));
    }
    EvalReport report;
    report.tracking = combine(parts);
    emit(dump_report(report_json(report, cfg)), o.out);
    return 0;
}

int cmd_eval_pred(const std::string& gt_path, const std::string& pred_path, const CommonOptions& o) {
    const RunConfig cfg = resolve_config(o);
    TrajectorySet gt;
    if (fs::is_directory(gt_path)) {
        for (const auto& seq : load_dataset(gt_path, resolve_threads(o))) gt[seq.sequence_id] = trajectories(seq.frames);
    } else {
        gt = load_trajectory_set(gt_path);
    }
    EvalReport report;
    report.prediction = evaluate_prediction(gt, load_trajectory_set(pred_path));
    emit(dump_report(report_json(report, cfg)), o.out);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"crowdperc: crowded-scene pedestrian perception toolkit"};
    app.require_subcommand(1);

    CommonOptions common;
    std::string root, pred, split, csv_dir, input, seq_id = "decoded";
    std::optional<double> diameter;
    std::int64_t frame_index = 0;
    bool run_tracker = false;
    SynthOptions synth;
    double duration = 0;

    auto* validate = app.add_subcommand("validate", "Check a dataset root for schema and reference errors");
    validate->add_option("root", root, "Dataset root")->required()->check(CLI::ExistingDirectory);
    add_common(validate, common);

    auto* stats = app.add_subcommand("stats", "Crowd density and point statistics");
    stats->add_option("root", root, "Dataset root")->required()->check(CLI::ExistingDirectory);
    stats->add_option("--csv", csv_dir, "Also write CSV histograms into this directory");
    stats->add_option("--scan-diameter", diameter, "LiDAR scan diameter in meters");
    add_common(stats, common);

    auto* gen = app.add_subcommand("gen-synth", "Generate a synthetic crowd dataset");
    auto* level_opt = gen->add_option("--level", synth.level, "Crowd level 0..3")->check(CLI::Range(0, 3));
    gen->add_option("--sequences", synth.sequences, "Number of sequences")->check(CLI::PositiveNumber);
    auto* duration_opt = gen->add_option("--duration", duration, "Sequence duration in seconds")->check(CLI::PositiveNumber);
    gen->add_option("--scene-config", synth.scene_config, "Scene config JSON")->check(CLI::ExistingFile);
    gen->add_flag("--emit-predictions", synth.emit_predictions, "Write perfect_predictions.json");
    add_common(gen, common);

    auto* render = app.add_subcommand("render-targets", "Render hierarchical heatmap targets to a DHA1 container");
    render->add_option("--root", root, "Dataset root")->required()->check(CLI::ExistingDirectory);
    render->add_option("--sequence", seq_id, "Sequence id")->required();
    render->add_option("--frame", frame_index, "Frame index")->required();
    add_common(render, common);

    auto* decode = app.add_subcommand("decode", "Decode a DHA1 heatmap pyramid into detections");
    decode->add_option("--input", input, "DHA1 pyramid file")->required()->check(CLI::ExistingFile);
    decode->add_option("--sequence", seq_id, "Sequence id for the output");
    add_common(decode, common);

    auto* nms = app.add_subcommand("nms", "Circle NMS and minimum-point filtering of predictions");
    nms->add_option("--pred", pred, "Predictions JSON")->required()->check(CLI::ExistingFile);
    nms->add_option("--root", root, "Dataset root (enables the minimum-point filter)")->check(CLI::ExistingDirectory);
    add_common(nms, common);

    auto* eval_det = app.add_subcommand("eval-det", "AP / mAP / occlusion AR");
    eval_det->add_option("--gt", root, "Dataset root")->required()->check(CLI::ExistingDirectory);
    eval_det->add_option("--pred", pred, "Predictions JSON")->required()->check(CLI::ExistingFile);
    eval_det->add_option("--split", split, "Evaluate only this split");
    add_common(eval_det, common);

    auto* eval_track = app.add_subcommand("eval-track", "MOTA / MT / ML");
    eval_track->add_option("--gt", root, "Dataset root")->required()->check(CLI::ExistingDirectory);
    eval_track->add_option("--pred", pred, "Tracked predictions JSON (track_id per object)")->required()->check(CLI::ExistingFile);
    eval_track->add_option("--split", split, "Evaluate only this split");
    eval_track->add_flag("--run-tracker", run_tracker, "Associate detections with the velocity tracker first");
    add_common(eval_track, common);

    auto* eval_pred = app.add_subcommand("eval-pred", "FDE / MDE of predicted trajectories");
    eval_pred->add_option("--gt", root, "Trajectory JSON or dataset root")->required()->check(CLI::ExistingPath);
    eval_pred->add_option("--pred", pred, "Predicted trajectory JSON")->required()->check(CLI::ExistingFile);
    add_common(eval_pred, common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        std::cerr << app.help();
        return 2;
    }

    try {
        if (*validate) return cmd_validate(root, common);
        if (*stats) return cmd_stats(root, csv_dir, diameter, common);
        if (*gen) {
            if (*duration_opt) synth.duration = duration;
            return cmd_gen_synth(synth, common, static_cast<bool>(*level_opt));
        }
        if (*render) return cmd_render(root, seq_id, frame_index, common);
        if (*decode) return cmd_decode(input, seq_id, common);
        if (*nms) return cmd_nms(pred, root, common);
        if (*eval_det) return cmd_eval_det(root, pred, split, common);
        if (*eval_track) return cmd_eval_track(root, pred, split, run_tracker, common);
        if (*eval_pred) return cmd_eval_pred(root, pred, common);
    } catch (const ConfigInvalid& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
