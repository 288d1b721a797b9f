#pragma once

// Density-aware hierarchical heatmap kernels: spatial attention over BEV
// tokens, Gaussian target rendering on three resolutions, Gaussian focal loss,
// and multi-level peak decoding. Everything is templated on the scalar type;
// double is used for verification, float for exchanged network outputs.

#include "crowdperc/bev_encoding.hpp"
#include "crowdperc/core.hpp"
#include "crowdperc/errors.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstring>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace crowdperc {

enum class HeatmapLevel { Coarse = 0, Regular = 1, Fine = 2 };

inline constexpr std::array<HeatmapLevel, 3> kHeatmapLevels = {
    HeatmapLevel::Coarse, HeatmapLevel::Regular, HeatmapLevel::Fine};

/// Cell size of a level in units of Regular cells.
constexpr double level_stride(HeatmapLevel level) {
    switch (level) {
        case HeatmapLevel::Coarse: return 2.0;
        case HeatmapLevel::Regular: return 1.0;
        case HeatmapLevel::Fine: return 0.5;
    }
    return 1.0;
}

const char* level_name(HeatmapLevel level);

/// (rows, cols) of a level map: rows run along x, cols along y.
inline Eigen::Vector2i level_dims(const GridSpec& g, HeatmapLevel level) {
    const double s = level_stride(level);
    return {static_cast<int>(std::ceil(g.nx() / s - 1e-9)), static_cast<int>(std::ceil(g.ny() / s - 1e-9))};
}

/// Dense 2D map, row-major so that the buffer is the exchanged payload.
/// Element (i, j) samples continuous heatmap coordinate (u, v) = (i, j).
template <typename Scalar>
using ScoreMap = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using TokenMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// H x W x C features flattened to H*W tokens of C channels; token r*W + c.
template <typename Scalar>
struct FeatureMap {
    int height = 0;
    int width = 0;
    HeatmapLevel level = HeatmapLevel::Regular;
    TokenMatrix<Scalar> tokens;

    FeatureMap() = default;
    FeatureMap(int h, int w, int channels, HeatmapLevel lvl = HeatmapLevel::Regular)
        : height(h), width(w), level(lvl), tokens(TokenMatrix<Scalar>::Zero(h * w, channels)) {}

    Eigen::Index channels() const { return tokens.cols(); }
    Eigen::Index token_count() const { return tokens.rows(); }
    auto at(int r, int c) { return tokens.row(static_cast<Eigen::Index>(r) * width + c); }
    auto at(int r, int c) const { return tokens.row(static_cast<Eigen::Index>(r) * width + c); }
};

template <typename Scalar>
struct AttentionWeights {
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Matrix query, key, value;

    Eigen::Index channels() const { return query.rows(); }
    bool valid() const {
        const auto c = query.rows();
        return c > 0 && query.cols() == c && key.rows() == c && key.cols() == c &&
               value.rows() == c && value.cols() == c && query.allFinite() && key.allFinite() &&
               value.allFinite();
    }
};

/// Bytes allowed for the N x N attention matrix.
inline constexpr std::size_t kDefaultAttentionBudget = std::size_t{512} << 20;

namespace detail {

template <typename Scalar>
void check_attention_inputs(const FeatureMap<Scalar>& x, const AttentionWeights<Scalar>& w,
                            std::size_t budget_bytes) {
    if (!w.valid()) throw ShapeMismatch("attention weights must be finite C x C matrices");
    if (x.channels() != w.channels()) {
        throw ShapeMismatch("feature channels " + std::to_string(x.channels()) +
                            " != weight channels " + std::to_string(w.channels()));
    }
    if (x.token_count() != static_cast<Eigen::Index>(x.height) * x.width) {
        throw ShapeMismatch("token count does not match H x W");
    }
    const auto n = static_cast<std::size_t>(x.token_count());
    if (n != 0 && n * n > budget_bytes / sizeof(Scalar)) {
        throw BudgetExceeded("attention over " + std::to_string(n) + " tokens needs " +
                             std::to_string(n * n * sizeof(Scalar)) + " bytes, budget is " +
                             std::to_string(budget_bytes));
    }
}

/// Token indices sorted by the bytes of each row. The order depends only on
/// the multiset of tokens, so reindexed inputs are processed identically.
template <typename Scalar>
std::vector<Eigen::Index> canonical_token_order(const TokenMatrix<Scalar>& t) {
    std::vector<Eigen::Index> order(static_cast<std::size_t>(t.rows()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    const auto bytes = static_cast<std::size_t>(t.cols()) * sizeof(Scalar);
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        return std::memcmp(t.row(a).data(), t.row(b).data(), bytes) < 0;
    });
    return order;
}

template <typename Scalar>
std::vector<Eigen::Index> inverse_order(const std::vector<Eigen::Index>& order) {
    std::vector<Eigen::Index> rank(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) rank[static_cast<std::size_t>(order[i])] = static_cast<Eigen::Index>(i);
    return rank;
}

/// Softmax attention over tokens already in canonical order.
template <typename Scalar>
TokenMatrix<Scalar> softmax_scores(const TokenMatrix<Scalar>& tokens, const AttentionWeights<Scalar>& w) {
    const TokenMatrix<Scalar> q = tokens * w.query;
    const TokenMatrix<Scalar> k = tokens * w.key;
    TokenMatrix<Scalar> s = q * k.transpose();
    const auto row_max = s.rowwise().maxCoeff().eval();
    s = (s.colwise() - row_max).array().exp().matrix();
    const auto row_sum = s.rowwise().sum().eval();
    s.array().colwise() /= row_sum.array();
    return s;
}

}  // namespace detail

/// Row-wise softmax of Q K^T with Q = X Wq, K = X Wk. Rows sum to one.
/// Exactly equivariant under token reindexing.
template <typename Scalar>
TokenMatrix<Scalar> attention_matrix(const FeatureMap<Scalar>& x, const AttentionWeights<Scalar>& w,
                                     std::size_t budget_bytes = kDefaultAttentionBudget) {
    detail::check_attention_inputs(x, w, budget_bytes);
    const auto order = detail::canonical_token_order(x.tokens);
    const auto rank = detail::inverse_order<Scalar>(order);
    const TokenMatrix<Scalar> canon = x.tokens(order, Eigen::all);
    return detail::softmax_scores(canon, w)(rank, rank);
}

/// softmax(Q K^T) V with V = X Wv, reshaped back to H x W x C. No scaling and
/// no positional encoding.
template <typename Scalar>
FeatureMap<Scalar> spatial_attention(const FeatureMap<Scalar>& x, const AttentionWeights<Scalar>& w,
                                     std::size_t budget_bytes = kDefaultAttentionBudget) {
    detail::check_attention_inputs(x, w, budget_bytes);
    const auto order = detail::canonical_token_order(x.tokens);
    const auto rank = detail::inverse_order<Scalar>(order);
    const TokenMatrix<Scalar> canon = x.tokens(order, Eigen::all);
    const TokenMatrix<Scalar> a = detail::softmax_scores(canon, w);
    TokenMatrix<Scalar> values;
    values.noalias() = a * (canon * w.value);
    FeatureMap<Scalar> out;
    out.height = x.height;
    out.width = x.width;
    out.level = x.level;
    out.tokens = values(rank, Eigen::all);
    return out;
}

// ---------------------------------------------------------------------------
// Targets

struct GaussianTargetParams {
    double sigma_min = 1.0;           // cells
    double sigma_factor = 1.0 / 6.0;  // of the footprint diagonal
    double alpha = 2.0;
    double beta = 4.0;

    bool valid() const { return sigma_min > 0 && sigma_factor >= 0 && alpha > 0 && beta > 0; }
};

enum RegressionChannel : int {
    kOffsetU = 0,
    kOffsetV,
    kCenterZ,
    kSizeL,
    kSizeW,
    kSizeH,
    kYawSin,
    kYawCos,
    kVelocityX,
    kVelocityY,
    kRegressionChannels
};

template <typename Scalar>
struct HeatmapPyramid {
    std::array<ScoreMap<Scalar>, 3> scores;  // indexed by HeatmapLevel
    /// Fine-level regression planes, indexed by RegressionChannel.
    std::array<ScoreMap<Scalar>, kRegressionChannels> regression;

    ScoreMap<Scalar>& score(HeatmapLevel l) { return scores[static_cast<std::size_t>(l)]; }
    const ScoreMap<Scalar>& score(HeatmapLevel l) const { return scores[static_cast<std::size_t>(l)]; }

    static HeatmapPyramid zeros(const GridSpec& g) {
        HeatmapPyramid p;
        for (auto level : kHeatmapLevels) {
            const auto d = level_dims(g, level);
            p.score(level) = ScoreMap<Scalar>::Zero(d.x(), d.y());
        }
        const auto fd = level_dims(g, HeatmapLevel::Fine);
        for (auto& plane : p.regression) plane = ScoreMap<Scalar>::Zero(fd.x(), fd.y());
        return p;
    }

    bool matches(const GridSpec& g) const {
        for (auto level : kHeatmapLevels) {
            const auto d = level_dims(g, level);
            if (score(level).rows() != d.x() || score(level).cols() != d.y()) return false;
        }
        const auto fd = level_dims(g, HeatmapLevel::Fine);
        return std::all_of(regression.begin(), regression.end(), [&](const auto& m) {
            return m.rows() == fd.x() && m.cols() == fd.y();
        });
    }

    template <typename Other>
    HeatmapPyramid<Other> cast() const {
        HeatmapPyramid<Other> out;
        for (std::size_t i = 0; i < scores.size(); ++i) out.scores[i] = scores[i].template cast<Other>();
        for (std::size_t i = 0; i < regression.size(); ++i) {
            out.regression[i] = regression[i].template cast<Other>();
        }
        return out;
    }
};

/// Regular-level Gaussian sigma (in Regular cells) for a box footprint.
inline double base_sigma(const Box3D& b, const GridSpec& g, const GaussianTargetParams& p) {
    const double cell = std::sqrt(g.voxel_size().x() * g.voxel_size().y());
    return std::max(p.sigma_min, p.sigma_factor * std::hypot(b.l, b.w) / cell);
}

/// Sigma in the cells of `level`: fine 2s, regular s, coarse max(s/2, sigma_min).
inline double level_sigma(double sigma, HeatmapLevel level, const GaussianTargetParams& p) {
    switch (level) {
        case HeatmapLevel::Fine: return 2.0 * sigma;
        case HeatmapLevel::Regular: return sigma;
        case HeatmapLevel::Coarse: return std::max(0.5 * sigma, p.sigma_min);
    }
    return sigma;
}

/// Integer cell nearest to a continuous heatmap coordinate, clamped to the map.
inline Eigen::Vector2i nearest_cell(const Eigen::Vector2d& uv, Eigen::Index rows, Eigen::Index cols) {
    return {static_cast<int>(std::clamp<long>(std::lround(uv.x()), 0, rows - 1)),
            static_cast<int>(std::clamp<long>(std::lround(uv.y()), 0, cols - 1))};
}

/// Elementwise-max splat of exp(-|(i,j) - center|^2 / (2 sigma^2)). Values
/// below 1e-12 are not written.
template <typename Scalar>
void splat_gaussian(ScoreMap<Scalar>& map, const Eigen::Vector2d& center, double sigma) {
    const double radius = sigma * std::sqrt(2.0 * std::log(1e12));
    const auto lo_i = std::max<long>(0, static_cast<long>(std::floor(center.x() - radius)));
    const auto hi_i = std::min<long>(map.rows() - 1, static_cast<long>(std::ceil(center.x() + radius)));
    const auto lo_j = std::max<long>(0, static_cast<long>(std::floor(center.y() - radius)));
    const auto hi_j = std::min<long>(map.cols() - 1, static_cast<long>(std::ceil(center.y() + radius)));
    const double inv = 1.0 / (2.0 * sigma * sigma);
    for (long i = lo_i; i <= hi_i; ++i) {
        const double du = static_cast<double>(i) - center.x();
        for (long j = lo_j; j <= hi_j; ++j) {
            const double dv = static_cast<double>(j) - center.y();
            const double g = std::exp(-(du * du + dv * dv) * inv);
            if (g < 1e-12) continue;
            auto& cell = map(i, j);
            cell = std::max(cell, static_cast<Scalar>(g));
        }
    }
}

struct RenderSummary {
    std::size_t rendered = 0;
    std::size_t skipped_out_of_range = 0;
};

/// Renders Gaussian score targets on every level plus Fine-level regression
/// targets. `velocities`, when non-empty, is aligned with `instances`.
/// Regression cells shared by several instances keep the one with the highest
/// track id.
template <typename Scalar = double>
HeatmapPyramid<Scalar> render_targets(std::span<const Instance> instances, const GridSpec& g,
                                      const GaussianTargetParams& p,
                                      std::span<const Eigen::Vector2d> velocities = {},
                                      RenderSummary* summary = nullptr) {
    if (!p.valid()) throw ConfigInvalid("invalid Gaussian target parameters");
    if (!velocities.empty() && velocities.size() != instances.size()) {
        throw ShapeMismatch("velocities must align with instances");
    }
    auto out = HeatmapPyramid<Scalar>::zeros(g);
    RenderSummary local;

    std::vector<std::size_t> order(instances.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return instances[a].track_id < instances[b].track_id;
    });

    for (std::size_t idx : order) {
        const Box3D& box = instances[idx].box3d;
        if (!g.contains_bev(box.center_bev())) {
            local.skipped_out_of_range++;
            continue;
        }
        local.rendered++;
        const double sigma = base_sigma(box, g, p);
        for (auto level : kHeatmapLevels) {
            const auto uv = world_to_heatmap(box.center_bev(), g, level_stride(level));
            splat_gaussian(out.score(level), uv, level_sigma(sigma, level, p));
        }

        const auto uv = world_to_heatmap(box.center_bev(), g, level_stride(HeatmapLevel::Fine));
        const auto& fine = out.score(HeatmapLevel::Fine);
        const auto cell = nearest_cell(uv, fine.rows(), fine.cols());
        const Eigen::Vector2d vel = velocities.empty() ? Eigen::Vector2d::Zero() : velocities[idx];
        const std::array<double, kRegressionChannels> values = {
            uv.x() - cell.x(), uv.y() - cell.y(), box.z, box.l, box.w, box.h,
            std::sin(box.theta), std::cos(box.theta), vel.x(), vel.y()};
        for (int c = 0; c < kRegressionChannels; ++c) {
            out.regression[static_cast<std::size_t>(c)](cell.x(), cell.y()) = static_cast<Scalar>(values[c]);
        }
    }
    if (summary) *summary = local;
    return out;
}

/// Distinct cells nearest to in-range instance centers at `level` (the
/// one-to-one assignment cells), in first-seen order.
std::vector<Eigen::Vector2i> assignment_cells(std::span<const Instance> instances, const GridSpec& g,
                                              HeatmapLevel level);

/// Fraction of the cells of `level` that are assignment cells.
double positive_fraction(std::span<const Instance> instances, const GridSpec& g, HeatmapLevel level);

// ---------------------------------------------------------------------------
// Loss

inline constexpr double kFocalEpsilon = 1e-6;

/// CornerNet-style Gaussian focal loss: target cells equal to 1 are positives
/// contributing (1-p)^a log p, every other cell contributes
/// (1-y)^b p^a log(1-p). Negated sum over max(1, #positives).
template <typename Scalar>
double gaussian_focal_loss(const ScoreMap<Scalar>& pred, const ScoreMap<Scalar>& target,
                           const GaussianTargetParams& p) {
    if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
        throw ShapeMismatch("prediction " + std::to_string(pred.rows()) + "x" + std::to_string(pred.cols()) +
                            " vs target " + std::to_string(target.rows()) + "x" +
                            std::to_string(target.cols()));
    }
    double total = 0;
    std::size_t positives = 0;
    for (Eigen::Index i = 0; i < pred.rows(); ++i) {
        for (Eigen::Index j = 0; j < pred.cols(); ++j) {
            const double q = std::clamp(static_cast<double>(pred(i, j)), kFocalEpsilon, 1.0 - kFocalEpsilon);
            const double y = static_cast<double>(target(i, j));
            if (y == 1.0) {
                ++positives;
                total += std::pow(1.0 - q, p.alpha) * std::log(q);
            } else {
                total += std::pow(1.0 - y, p.beta) * std::pow(q, p.alpha) * std::log(1.0 - q);
            }
        }
    }
    return -total / static_cast<double>(std::max<std::size_t>(1, positives));
}

/// Weighted sum of the per-level focal losses (weights indexed by HeatmapLevel).
template <typename Scalar>
double hierarchical_focal_loss(const HeatmapPyramid<Scalar>& pred, const HeatmapPyramid<Scalar>& target,
                               const GaussianTargetParams& p,
                               const std::array<double, 3>& level_weights = {1.0, 1.0, 1.0}) {
    double total = 0;
    for (auto level : kHeatmapLevels) {
        total += level_weights[static_cast<std::size_t>(level)] *
                 gaussian_focal_loss(pred.score(level), target.score(level), p);
    }
    return total;
}

// ---------------------------------------------------------------------------
// Decoding

struct DecodeParams {
    int k_max = 500;
    double score_thresh = 0.1;
    double agg_weight = 0.3;

    bool valid() const { return k_max >= 1 && agg_weight >= 0 && agg_weight <= 1; }
};

/// Bilinear sample at continuous (u, v), clamped to the map border.
template <typename Scalar>
double sample_bilinear(const ScoreMap<Scalar>& m, double u, double v) {
    if (m.size() == 0) return 0.0;
    u = std::clamp(u, 0.0, static_cast<double>(m.rows() - 1));
    v = std::clamp(v, 0.0, static_cast<double>(m.cols() - 1));
    const auto i0 = static_cast<Eigen::Index>(std::floor(u));
    const auto j0 = static_cast<Eigen::Index>(std::floor(v));
    const auto i1 = std::min<Eigen::Index>(i0 + 1, m.rows() - 1);
    const auto j1 = std::min<Eigen::Index>(j0 + 1, m.cols() - 1);
    const double fu = u - static_cast<double>(i0), fv = v - static_cast<double>(j0);
    return (1 - fu) * (1 - fv) * m(i0, j0) + fu * (1 - fv) * m(i1, j0) + (1 - fu) * fv * m(i0, j1) +
           fu * fv * m(i1, j1);
}

/// Cells with a positive value that is >= every 8-neighbor, row-major order.
template <typename Scalar>
std::vector<Eigen::Vector2i> local_maxima(const ScoreMap<Scalar>& m, double min_value = 0.0) {
    std::vector<Eigen::Vector2i> out;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            const Scalar v = m(i, j);
            if (!(v > 0) || !(static_cast<double>(v) > min_value)) continue;
            bool is_max = true;
            for (Eigen::Index di = -1; di <= 1 && is_max; ++di) {
                for (Eigen::Index dj = -1; dj <= 1; ++dj) {
                    if (di == 0 && dj == 0) continue;
                    const auto ni = i + di, nj = j + dj;
                    if (ni < 0 || nj < 0 || ni >= m.rows() || nj >= m.cols()) continue;
                    if (m(ni, nj) > v) {
                        is_max = false;
                        break;
                    }
                }
            }
            if (is_max) out.emplace_back(static_cast<int>(i), static_cast<int>(j));
        }
    }
    return out;
}

/// Fine-level 3x3 peaks scored as fine^(1-w) * coarse^w, coarse sampled
/// bilinearly at the same world location. Top k_max above score_thresh, by
/// descending score; equal scores keep row-major cell order.
template <typename Scalar>
std::vector<Detection> decode_peaks(const HeatmapPyramid<Scalar>& h, const GridSpec& g,
                                    const DecodeParams& params = {}) {
    if (!params.valid()) throw ConfigInvalid("decode requires k_max >= 1 and agg_weight in [0, 1]");
    if (!h.matches(g)) throw ShapeMismatch("heatmap pyramid does not match grid dimensions");

    const auto& fine = h.score(HeatmapLevel::Fine);
    const auto& coarse = h.score(HeatmapLevel::Coarse);
    const double fine_to_coarse = level_stride(HeatmapLevel::Fine) / level_stride(HeatmapLevel::Coarse);
    const double w = params.agg_weight;

    struct Candidate {
        Eigen::Vector2i cell;
        double score;
    };
    std::vector<Candidate> cands;
    for (const auto& c : local_maxima(fine)) {
        const double f = static_cast<double>(fine(c.x(), c.y()));
        double s = f;
        if (w > 0) {
            const double cs = sample_bilinear(coarse, c.x() * fine_to_coarse, c.y() * fine_to_coarse);
            s = std::pow(f, 1.0 - w) * std::pow(std::max(cs, 0.0), w);
        }
        if (s > params.score_thresh) cands.push_back({c, s});
    }
    std::stable_sort(cands.begin(), cands.end(),
                     [](const Candidate& a, const Candidate& b) { return a.score > b.score; });
    if (cands.size() > static_cast<std::size_t>(params.k_max)) cands.resize(static_cast<std::size_t>(params.k_max));

    auto reg = [&](int ch, const Eigen::Vector2i& c) {
        return static_cast<double>(h.regression[static_cast<std::size_t>(ch)](c.x(), c.y()));
    };
    constexpr double kMinExtent = 1e-6;
    std::vector<Detection> out;
    out.reserve(cands.size());
    for (const auto& cand : cands) {
        const auto& c = cand.cell;
        const Eigen::Vector2d uv(c.x() + reg(kOffsetU, c), c.y() + reg(kOffsetV, c));
        const Eigen::Vector2d xy = heatmap_to_world(uv, g, level_stride(HeatmapLevel::Fine));
        Detection d;
        d.box3d = Box3D{xy.x(),
                        xy.y(),
                        reg(kCenterZ, c),
                        std::max(reg(kSizeL, c), kMinExtent),
                        std::max(reg(kSizeW, c), kMinExtent),
                        std::max(reg(kSizeH, c), kMinExtent),
                        normalize_angle(std::atan2(reg(kYawSin, c), reg(kYawCos, c)))};
        d.score = std::clamp(cand.score, 0.0, 1.0);
        d.velocity = Eigen::Vector2d(reg(kVelocityX, c), reg(kVelocityY, c));
        out.push_back(d);
    }
    return out;
}

}  // namespace crowdperc
