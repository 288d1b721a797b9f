#include "crowdperc/evaluation.hpp"

#include "crowdperc/errors.hpp"
#include "crowdperc/hungarian.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <tuple>

namespace crowdperc {

MatchResult match_detections(std::span<const Instance> gt, std::span<const Detection> dets,
                             double threshold, DistanceMode mode) {
    std::vector<std::size_t> order(dets.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });

    MatchResult r;
    std::vector<char> gt_used(gt.size(), 0);
    for (std::size_t d : order) {
        std::size_t best = gt.size();
        double best_dist = threshold;
        for (std::size_t g = 0; g < gt.size(); ++g) {
            if (gt_used[g]) continue;
            const double dist = center_distance(gt[g].box3d, dets[d].box3d, mode);
            if (dist <= threshold && (best == gt.size() || dist < best_dist)) {
                best = g;
                best_dist = dist;
            }
        }
        if (best == gt.size()) {
            r.unmatched_det.push_back(d);
        } else {
            gt_used[best] = 1;
            r.pairs.push_back({best, d, best_dist});
        }
    }
    std::sort(r.unmatched_det.begin(), r.unmatched_det.end());
    for (std::size_t g = 0; g < gt.size(); ++g) {
        if (!gt_used[g]) r.unmatched_gt.push_back(g);
    }
    return r;
}

namespace {

void check_aligned(std::size_t gt, std::size_t det) {
    if (gt != det) {
        throw MisalignedFrames(std::to_string(gt) + " ground-truth frames vs " + std::to_string(det) +
                               " prediction frames");
    }
}

}  // namespace

std::optional<double> average_precision(std::span<const Frame> gt, std::span<const std::vector<Detection>> dets,
                                        double threshold, DistanceMode mode) {
    check_aligned(gt.size(), dets.size());

    struct Scored {
        double score;
        bool tp;
    };
    std::vector<Scored> pooled;
    std::size_t total_gt = 0;
    for (std::size_t f = 0; f < gt.size(); ++f) {
        total_gt += gt[f].instances.size();
        const auto m = match_detections(gt[f].instances, dets[f], threshold, mode);
        std::vector<char> tp(dets[f].size(), 0);
        for (const auto& p : m.pairs) tp[p.det] = 1;
        for (std::size_t d = 0; d < dets[f].size(); ++d) pooled.push_back({dets[f][d].score, tp[d] != 0});
    }
    if (total_gt == 0) return std::nullopt;

    std::stable_sort(pooled.begin(), pooled.end(),
                     [](const Scored& a, const Scored& b) { return a.score > b.score; });

    const std::size_t n = pooled.size();
    std::vector<double> precision(n), recall(n);
    std::size_t tp = 0;
    for (std::size_t k = 0; k < n; ++k) {
        if (pooled[k].tp) ++tp;
        precision[k] = static_cast<double>(tp) / static_cast<double>(k + 1);
        recall[k] = static_cast<double>(tp) / static_cast<double>(total_gt);
    }
    // Running max from the right.
    for (std::size_t k = n; k-- > 1;) precision[k - 1] = std::max(precision[k - 1], precision[k]);

    double sum = 0;
    std::size_t k = 0;
    for (int t = 0; t < kApRecallSamples; ++t) {
        const double r = static_cast<double>(t) / static_cast<double>(kApRecallSamples - 1);
        while (k < n && recall[k] < r) ++k;
        if (k == n) break;
        sum += precision[k];
    }
    return sum / kApRecallSamples;
}

double mean_ap(std::span<const double> aps) {
    if (aps.empty()) return 0.0;
    return std::accumulate(aps.begin(), aps.end(), 0.0) / static_cast<double>(aps.size());
}

std::optional<double> mean_ap(std::span<const Frame> gt, std::span<const std::vector<Detection>> dets,
                              std::span<const double> thresholds, DistanceMode mode) {
    std::vector<double> aps;
    for (double d : thresholds) {
        const auto ap = average_precision(gt, dets, d, mode);
        if (!ap) return std::nullopt;
        aps.push_back(*ap);
    }
    return mean_ap(aps);
}

std::optional<double> average_recall_occlusion(std::span<const Frame> gt,
                                               std::span<const std::vector<Detection>> dets,
                                               OcclusionLevel level, std::span<const double> thresholds,
                                               DistanceMode mode) {
    check_aligned(gt.size(), dets.size());
    std::size_t total = 0;
    for (const auto& f : gt) {
        total += static_cast<std::size_t>(std::count_if(f.instances.begin(), f.instances.end(),
                                                        [&](const Instance& i) { return i.occlusion == level; }));
    }
    if (total == 0 || thresholds.empty()) return std::nullopt;

    double recall_sum = 0;
    for (double d : thresholds) {
        std::size_t matched = 0;
        for (std::size_t f = 0; f < gt.size(); ++f) {
            const auto m = match_detections(gt[f].instances, dets[f], d, mode);
            for (const auto& p : m.pairs) {
                if (gt[f].instances[p.gt].occlusion == level) ++matched;
            }
        }
        recall_sum += static_cast<double>(matched) / static_cast<double>(total);
    }
    return recall_sum / static_cast<double>(thresholds.size());
}

// ---------------------------------------------------------------------------

ClearMotResult clear_mot(std::span<const TrackFrame> gt, std::span<const TrackFrame> pred, double threshold,
                         DistanceMode mode) {
    check_aligned(gt.size(), pred.size());
    ClearMotResult r;
    std::map<std::int64_t, std::int64_t> previous;       // gt id -> pred id, previous frame only
    std::map<std::int64_t, std::int64_t> last_assigned;  // gt id -> last pred id ever
    std::map<std::int64_t, std::pair<std::size_t, std::size_t>> lifetime;  // gt id -> (present, matched)

    for (std::size_t f = 0; f < gt.size(); ++f) {
        const auto& g = gt[f];
        const auto& p = pred[f];
        r.gt += g.size();
        for (const auto& b : g) lifetime[b.track_id].first++;

        std::vector<int> gt_to_pred(g.size(), -1);
        std::vector<char> pred_used(p.size(), 0);

        // Keep last frame's correspondences that are still valid.
        std::map<std::int64_t, std::size_t> pred_index;
        for (std::size_t j = 0; j < p.size(); ++j) pred_index.emplace(p[j].track_id, j);
        for (std::size_t i = 0; i < g.size(); ++i) {
            auto prev = previous.find(g[i].track_id);
            if (prev == previous.end()) continue;
            auto pj = pred_index.find(prev->second);
            if (pj == pred_index.end() || pred_used[pj->second]) continue;
            if (center_distance(g[i].box, p[pj->second].box, mode) <= threshold) {
                gt_to_pred[i] = static_cast<int>(pj->second);
                pred_used[pj->second] = 1;
            }
        }

        std::vector<std::size_t> free_gt, free_pred;
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (gt_to_pred[i] < 0) free_gt.push_back(i);
        }
        for (std::size_t j = 0; j < p.size(); ++j) {
            if (!pred_used[j]) free_pred.push_back(j);
        }
        if (!free_gt.empty() && !free_pred.empty()) {
            Eigen::MatrixXd cost(free_gt.size(), free_pred.size());
            Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> allowed(free_gt.size(), free_pred.size());
            for (std::size_t a = 0; a < free_gt.size(); ++a) {
                for (std::size_t b = 0; b < free_pred.size(); ++b) {
                    const double d = center_distance(g[free_gt[a]].box, p[free_pred[b]].box, mode);
                    cost(a, b) = d;
                    allowed(a, b) = d <= threshold;
                }
            }
            const auto assign = solve_gated_assignment(cost, allowed);
            for (std::size_t a = 0; a < assign.size(); ++a) {
                if (assign[a] >= 0) gt_to_pred[free_gt[a]] = static_cast<int>(free_pred[assign[a]]);
            }
        }

        previous.clear();
        std::size_t matched = 0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (gt_to_pred[i] < 0) {
                r.fn++;
                continue;
            }
            ++matched;
            const auto gid = g[i].track_id;
            const auto pid = p[gt_to_pred[i]].track_id;
            auto last = last_assigned.find(gid);
            if (last != last_assigned.end() && last->second != pid) r.ids++;
            last_assigned[gid] = pid;
            previous[gid] = pid;
            lifetime[gid].second++;
        }
        r.matches += matched;
        r.fp += p.size() - matched;
    }

    if (r.gt > 0) {
        r.mota = 1.0 - static_cast<double>(r.fp + r.ids + r.fn) / static_cast<double>(r.gt);
    }
    r.gt_tracks = lifetime.size();
    for (const auto& [id, counts] : lifetime) {
        const double ratio = static_cast<double>(counts.second) / static_cast<double>(counts.first);
        if (ratio > 0.8) r.mostly_tracked++;
        if (ratio < 0.2) r.mostly_lost++;
    }
    if (r.gt_tracks > 0) {
        r.mt = static_cast<double>(r.mostly_tracked) / static_cast<double>(r.gt_tracks);
        r.ml = static_cast<double>(r.mostly_lost) / static_cast<double>(r.gt_tracks);
    }
    return r;
}

ClearMotResult combine(std::span<const ClearMotResult> parts) {
    ClearMotResult r;
    for (const auto& p : parts) {
        r.fp += p.fp;
        r.fn += p.fn;
        r.ids += p.ids;
        r.gt += p.gt;
        r.matches += p.matches;
        r.gt_tracks += p.gt_tracks;
        r.mostly_tracked += p.mostly_tracked;
        r.mostly_lost += p.mostly_lost;
    }
    if (r.gt > 0) r.mota = 1.0 - static_cast<double>(r.fp + r.ids + r.fn) / static_cast<double>(r.gt);
    if (r.gt_tracks > 0) {
        r.mt = static_cast<double>(r.mostly_tracked) / static_cast<double>(r.gt_tracks);
        r.ml = static_cast<double>(r.mostly_lost) / static_cast<double>(r.gt_tracks);
    }
    return r;
}

std::vector<TrackFrame> greedy_velocity_tracker(std::span<const DetectionFrame> frames, double threshold) {
    struct Track {
        std::int64_t id;
        Eigen::Vector2d position;
        Eigen::Vector2d velocity;
        double last_time;
        int misses;
    };
    std::vector<Track> active;
    std::int64_t next_id = 0;
    std::vector<TrackFrame> out;
    out.reserve(frames.size());

    for (const auto& frame : frames) {
        const auto& dets = frame.detections;
        struct Candidate {
            double dist;
            std::size_t track, det;
        };
        std::vector<Candidate> cands;
        for (std::size_t t = 0; t < active.size(); ++t) {
            const Eigen::Vector2d predicted =
                active[t].position + active[t].velocity * (frame.timestamp - active[t].last_time);
            for (std::size_t d = 0; d < dets.size(); ++d) {
                const double dist = (dets[d].box3d.center_bev() - predicted).norm();
                if (dist <= threshold) cands.push_back({dist, t, d});
            }
        }
        std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
            return std::tie(a.dist, a.track, a.det) < std::tie(b.dist, b.track, b.det);
        });

        std::vector<std::int64_t> det_id(dets.size(), -1);
        std::vector<char> track_hit(active.size(), 0);
        for (const auto& c : cands) {
            if (track_hit[c.track] || det_id[c.det] >= 0) continue;
            track_hit[c.track] = 1;
            det_id[c.det] = active[c.track].id;
            Track& tr = active[c.track];
            const Eigen::Vector2d pos = dets[c.det].box3d.center_bev();
            const double dt = frame.timestamp - tr.last_time;
            if (dets[c.det].velocity) {
                tr.velocity = *dets[c.det].velocity;
            } else if (dt > 0) {
                tr.velocity = (pos - tr.position) / dt;
            }
            tr.position = pos;
            tr.last_time = frame.timestamp;
            tr.misses = 0;
        }

        std::vector<Track> survivors;
        for (std::size_t t = 0; t < active.size(); ++t) {
            if (!track_hit[t] && ++active[t].misses > 1) continue;
            survivors.push_back(active[t]);
        }
        active = std::move(survivors);

        TrackFrame tf;
        for (std::size_t d = 0; d < dets.size(); ++d) {
            if (det_id[d] < 0) {
                det_id[d] = next_id++;
                active.push_back({det_id[d], dets[d].box3d.center_bev(),
                                  dets[d].velocity.value_or(Eigen::Vector2d::Zero()), frame.timestamp, 0});
            }
            tf.push_back({det_id[d], dets[d].box3d});
        }
        out.push_back(std::move(tf));
    }
    return out;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<double> step_errors(const Trajectory& pred, const Trajectory& gt) {
    if (pred.points.size() != gt.points.size() || gt.points.empty()) {
        throw LengthMismatch("trajectory lengths " + std::to_string(pred.points.size()) + " and " +
                             std::to_string(gt.points.size()) + " must be equal and non-zero");
    }
    std::vector<double> err(gt.points.size());
    for (std::size_t i = 0; i < err.size(); ++i) {
        if (std::abs(pred.points[i].t - gt.points[i].t) > 1e-6) {
            throw MisalignedFrames("trajectory timestamps differ at step " + std::to_string(i));
        }
        err[i] = (pred.points[i].position - gt.points[i].position).norm();
    }
    return err;
}

}  // namespace

double fde(const Trajectory& pred, const Trajectory& gt) { return step_errors(pred, gt).back(); }

double mde(const Trajectory& pred, const Trajectory& gt) {
    const auto err = step_errors(pred, gt);
    return std::accumulate(err.begin(), err.end(), 0.0) / static_cast<double>(err.size());
}

std::vector<TrackFrame> track_frames(std::span<const Frame> frames) {
    std::vector<TrackFrame> out;
    out.reserve(frames.size());
    for (const auto& f : frames) {
        TrackFrame tf;
        for (const auto& i : f.instances) tf.push_back({i.track_id, i.box3d});
        out.push_back(std::move(tf));
    }
    return out;
}

std::vector<Trajectory> trajectories(std::span<const Frame> frames) {
    std::map<std::int64_t, Trajectory> by_id;
    for (const auto& f : frames) {
        for (const auto& i : f.instances) {
            auto& t = by_id[i.track_id];
            t.track_id = i.track_id;
            t.points.push_back({f.timestamp, i.box3d.center_bev()});
        }
    }
    std::vector<Trajectory> out;
    for (auto& [id, t] : by_id) out.push_back(std::move(t));
    return out;
}

std::vector<DetectionFrame> perfect_detections(std::span<const Frame> frames) {
    std::map<std::int64_t, std::pair<double, Eigen::Vector2d>> last_seen;
    std::vector<DetectionFrame> out;
    out.reserve(frames.size());
    for (const auto& f : frames) {
        DetectionFrame df;
        df.timestamp = f.timestamp;
        for (const auto& i : f.instances) {
            Detection d;
            d.box3d = i.box3d;
            d.score = 1.0;
            Eigen::Vector2d v = Eigen::Vector2d::Zero();
            auto it = last_seen.find(i.track_id);
            if (it != last_seen.end() && f.timestamp > it->second.first) {
                v = (i.box3d.center_bev() - it->second.second) / (f.timestamp - it->second.first);
            }
            d.velocity = v;
            last_seen[i.track_id] = {f.timestamp, i.box3d.center_bev()};
            df.detections.push_back(d);
        }
        out.push_back(std::move(df));
    }
    return out;
}

}  // namespace crowdperc
