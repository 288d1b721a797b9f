#pragma once
// Brute-force reference implementations of the evaluation metrics, written
// independently of the library code they check.

#include "crowdperc/core.hpp"
#include "crowdperc/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <vector>

namespace crowdperc::oracle {

inline double dist(const Box3D& a, const Box3D& b, DistanceMode mode) {
    const double dx = a.x - b.x, dy = a.y - b.y, dz = mode == DistanceMode::BEV2D ? 0.0 : a.z - b.z;
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

/// (gt, det) pairs of score-ordered greedy matching.
inline std::vector<std::pair<std::size_t, std::size_t>> greedy_pairs(const std::vector<Instance>& gt,
                                                                     const std::vector<Detection>& dets,
                                                                     double thr, DistanceMode mode) {
    std::vector<std::size_t> order;
    for (std::size_t d = 0; d < dets.size(); ++d) order.push_back(d);
    // insertion sort by descending score, stable
    for (std::size_t i = 1; i < order.size(); ++i) {
        for (std::size_t j = i; j > 0 && dets[order[j]].score > dets[order[j - 1]].score; --j) {
            std::swap(order[j], order[j - 1]);
        }
    }
    std::set<std::size_t> taken;
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t d : order) {
        std::vector<std::pair<double, std::size_t>> cands;
        for (std::size_t g = 0; g < gt.size(); ++g) {
            const double e = dist(gt[g].box3d, dets[d].box3d, mode);
            if (!taken.count(g) && e <= thr) cands.emplace_back(e, g);
        }
        if (cands.empty()) continue;
        const auto best = *std::min_element(cands.begin(), cands.end());
        taken.insert(best.second);
        pairs.emplace_back(best.second, d);
    }
    return pairs;
}

inline std::optional<double> ap(const std::vector<Frame>& gt, const std::vector<std::vector<Detection>>& dets,
                                double thr, DistanceMode mode) {
    struct Row {
        double score;
        bool tp;
    };
    std::vector<Row> rows;
    std::size_t n_gt = 0;
    for (std::size_t f = 0; f < gt.size(); ++f) {
        n_gt += gt[f].instances.size();
        std::set<std::size_t> tp;
        for (const auto& [g, d] : greedy_pairs(gt[f].instances, dets[f], thr, mode)) tp.insert(d);
        for (std::size_t d = 0; d < dets[f].size(); ++d) rows.push_back({dets[f][d].score, tp.count(d) > 0});
    }
    if (n_gt == 0) return std::nullopt;
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.score > b.score; });
    std::vector<double> prec, rec;
    double tp = 0;
    for (std::size_t k = 0; k < rows.size(); ++k) {
        tp += rows[k].tp ? 1 : 0;
        prec.push_back(tp / static_cast<double>(k + 1));
        rec.push_back(tp / static_cast<double>(n_gt));
    }
    // Interpolated precision at r = max precision over points with recall >= r.
    double sum = 0;
    for (int t = 0; t <= 100; ++t) {
        const double r = t / 100.0;
        double best = 0;
        for (std::size_t k = 0; k < rows.size(); ++k) {
            if (rec[k] >= r) best = std::max(best, prec[k]);
        }
        sum += best;
    }
    return sum / 101.0;
}

inline std::optional<double> ar(const std::vector<Frame>& gt, const std::vector<std::vector<Detection>>& dets,
                                OcclusionLevel level, const std::vector<double>& thresholds, DistanceMode mode) {
    double total = 0;
    for (const auto& f : gt) {
        for (const auto& i : f.instances) total += i.occlusion == level ? 1 : 0;
    }
    if (total == 0) return std::nullopt;
    double acc = 0;
    for (double thr : thresholds) {
        double hit = 0;
        for (std::size_t f = 0; f < gt.size(); ++f) {
            for (const auto& [g, d] : greedy_pairs(gt[f].instances, dets[f], thr, mode)) {
                hit += gt[f].instances[g].occlusion == level ? 1 : 0;
            }
        }
        acc += hit / total;
    }
    return acc / static_cast<double>(thresholds.size());
}

struct Mot {
    std::size_t fp = 0, fn = 0, ids = 0, gt = 0;
    double mota = 0, mt = 0, ml = 0;
};

/// Best partial matching of one frame's free boxes: most pairs, then least
/// total distance. Exhaustive within each connected component of the gate graph.
inline std::map<std::size_t, std::size_t> best_matching(const std::vector<std::size_t>& gs,
                                                        const std::vector<std::size_t>& ps,
                                                        const std::function<double(std::size_t, std::size_t)>& d,
                                                        double thr) {
    const std::size_t n = gs.size(), m = ps.size();
    std::vector<std::vector<std::size_t>> adj(n);
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < m; ++b)
            if (d(gs[a], ps[b]) <= thr) adj[a].push_back(b);

    // Components over gt nodes linked through shared preds.
    std::vector<int> comp(n, -1);
    int ncomp = 0;
    for (std::size_t s = 0; s < n; ++s) {
        if (comp[s] >= 0) continue;
        std::vector<std::size_t> stack{s};
        comp[s] = ncomp;
        while (!stack.empty()) {
            const auto a = stack.back();
            stack.pop_back();
            for (std::size_t o = 0; o < n; ++o) {
                if (comp[o] >= 0) continue;
                bool share = false;
                for (auto b : adj[a])
                    for (auto c : adj[o]) share = share || b == c;
                if (share) {
                    comp[o] = ncomp;
                    stack.push_back(o);
                }
            }
        }
        ++ncomp;
    }

    std::map<std::size_t, std::size_t> result;
    for (int c = 0; c < ncomp; ++c) {
        std::vector<std::size_t> members;
        for (std::size_t a = 0; a < n; ++a)
            if (comp[a] == c) members.push_back(a);
        int best_n = -1;
        double best_cost = 0;
        std::vector<int> cur(members.size(), -1), best(members.size(), -1);
        std::vector<bool> used(m, false);
        std::function<void(std::size_t, int, double)> rec = [&](std::size_t i, int k, double cost) {
            if (i == members.size()) {
                if (k > best_n || (k == best_n && cost < best_cost)) {
                    best_n = k;
                    best_cost = cost;
                    best = cur;
                }
                return;
            }
            cur[i] = -1;
            rec(i + 1, k, cost);
            for (auto b : adj[members[i]]) {
                if (used[b]) continue;
                used[b] = true;
                cur[i] = static_cast<int>(b);
                rec(i + 1, k + 1, cost + d(gs[members[i]], ps[b]));
                used[b] = false;
                cur[i] = -1;
            }
        };
        rec(0, 0, 0.0);
        for (std::size_t i = 0; i < members.size(); ++i) {
            if (best[i] >= 0) result[gs[members[i]]] = ps[static_cast<std::size_t>(best[i])];
        }
    }
    return result;
}

inline Mot mot(const std::vector<TrackFrame>& gt, const std::vector<TrackFrame>& pred, double thr, DistanceMode mode) {
    Mot r;
    std::map<std::int64_t, std::int64_t> prev, last;
    std::map<std::int64_t, int> seen, hit;
    for (std::size_t f = 0; f < gt.size(); ++f) {
        const auto& g = gt[f];
        const auto& p = pred[f];
        r.gt += g.size();
        std::map<std::size_t, std::size_t> match;  // gt index -> pred index
        std::set<std::size_t> used_p;
        for (std::size_t i = 0; i < g.size(); ++i) {
            seen[g[i].track_id]++;
            auto it = prev.find(g[i].track_id);
            if (it == prev.end()) continue;
            for (std::size_t j = 0; j < p.size(); ++j) {
                if (p[j].track_id == it->second && !used_p.count(j) && dist(g[i].box, p[j].box, mode) <= thr) {
                    match[i] = j;
                    used_p.insert(j);
                    break;
                }
            }
        }
        std::vector<std::size_t> fg, fp;
        for (std::size_t i = 0; i < g.size(); ++i)
            if (!match.count(i)) fg.push_back(i);
        for (std::size_t j = 0; j < p.size(); ++j)
            if (!used_p.count(j)) fp.push_back(j);
        for (const auto& [i, j] : best_matching(fg, fp, [&](std::size_t a, std::size_t b) { return dist(g[a].box, p[b].box, mode); }, thr)) {
            match[i] = j;
        }
        prev.clear();
        for (const auto& [i, j] : match) {
            const auto gid = g[i].track_id, pid = p[j].track_id;
            if (last.count(gid) && last[gid] != pid) r.ids++;
            last[gid] = pid;
            prev[gid] = pid;
            hit[gid]++;
        }
        r.fn += g.size() - match.size();
        r.fp += p.size() - match.size();
    }
    r.mota = r.gt ? 1.0 - static_cast<double>(r.fp + r.fn + r.ids) / static_cast<double>(r.gt) : 0.0;
    double mt = 0, ml = 0;
    for (const auto& [id, n] : seen) {
        const double ratio = static_cast<double>(hit[id]) / n;
        mt += ratio > 0.8;
        ml += ratio < 0.2;
    }
    if (!seen.empty()) {
        r.mt = mt / static_cast<double>(seen.size());
        r.ml = ml / static_cast<double>(seen.size());
    }
    return r;
}

inline std::pair<double, double> fde_mde(const Trajectory& pred, const Trajectory& gt) {
    double sum = 0, last = 0;
    for (std::size_t i = 0; i < gt.points.size(); ++i) {
        const double dx = pred.points[i].position.x() - gt.points[i].position.x();
        const double dy = pred.points[i].position.y() - gt.points[i].position.y();
        last = std::hypot(dx, dy);
        sum += last;
    }
    return {last, sum / static_cast<double>(gt.points.size())};
}

}  // namespace crowdperc::oracle
