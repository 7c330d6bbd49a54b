// Copyright Contributors to the yysplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "yysplat/core.hpp"
#include "yysplat/decompose.hpp"
#include "yysplat/sphere_geom.hpp"

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace yysplat {

// ---------------------------------------------------------------------------
// Depth candidates: uniform in inverse depth between d_near and d_far.

struct DepthCandidates {
    double d_near = 1.0;
    double d_far = 100.0;
    std::vector<double> values;

    int size() const { return static_cast<int>(values.size()); }

    /// Index of the candidate nearest to `depth` in inverse depth.
    int nearest_index(double depth) const {
        const double step = (1.0 / d_far - 1.0 / d_near) / (size() - 1);
        const double k = std::round((1.0 / depth - 1.0 / d_near) / step);
        return static_cast<int>(std::clamp(k, 0.0, static_cast<double>(size() - 1)));
    }
};

inline DepthCandidates depth_candidates(double d_near, double d_far, int count) {
    if (!(d_near > 0.0) || !(d_far > d_near) || !std::isfinite(d_far)) {
        throw std::invalid_argument("depth_candidates: need 0 < d_near < d_far");
    }
    if (count < 2) throw std::invalid_argument("depth_candidates: need at least 2 candidates");
    DepthCandidates c{d_near, d_far, {}};
    c.values.resize(static_cast<std::size_t>(count));
    const double inv_near = 1.0 / d_near;
    const double inv_far = 1.0 / d_far;
    for (int k = 0; k < count; ++k) {
        c.values[k] = 1.0 / (inv_near + (static_cast<double>(k) / (count - 1)) * (inv_far - inv_near));
    }
    c.values.front() = d_near;
    c.values.back() = d_far;
    return c;
}

// ---------------------------------------------------------------------------
// Analytic window features. Stands in for a learned encoder: per pixel, the
// window's mean-subtracted luma followed by its horizontal and vertical luma
// gradients, L2-normalized. F = 3 * window^2.

inline FieldImage luma(const FieldImage& img) {
    FieldImage out(img.height(), img.width(), 1);
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            const auto p = img.pixel(y, x);
            out(y, x) = img.channels() >= 3 ? 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2] : p[0];
        }
    }
    return out;
}

inline int feature_channels(int window) { return 3 * window * window; }

inline FieldImage extract_features(const FieldImage& img, int window = 5) {
    if (window < 1 || window % 2 == 0) throw std::invalid_argument("extract_features: window must be odd and >= 1");
    if (img.channels() < 1) throw std::invalid_argument("extract_features: image has no channels");
    if (window > img.height() || window > img.width()) {
        throw std::invalid_argument("extract_features: window " + std::to_string(window) + " exceeds image size");
    }
    const int h = img.height();
    const int w = img.width();
    const int r = window / 2;
    const int n = window * window;
    const FieldImage lum = luma(img);
    auto L = [&](int y, int x) { return lum(std::clamp(y, 0, h - 1), std::clamp(x, 0, w - 1)); };
    FieldImage feat(h, w, 3 * n);
    parallel_for(0, h, [&](int y) {
        for (int x = 0; x < w; ++x) {
            auto f = feat.pixel(y, x);
            double mean = 0.0;
            for (int dy = -r; dy <= r; ++dy) {
                for (int dx = -r; dx <= r; ++dx) mean += L(y + dy, x + dx);
            }
            mean /= n;
            int i = 0;
            for (int dy = -r; dy <= r; ++dy) {
                for (int dx = -r; dx <= r; ++dx, ++i) {
                    const int yy = y + dy, xx = x + dx;
                    f[i] = L(yy, xx) - mean;
                    f[n + i] = 0.5 * (L(yy, xx + 1) - L(yy, xx - 1));
                    f[2 * n + i] = 0.5 * (L(yy + 1, xx) - L(yy - 1, xx));
                }
            }
            double norm2 = 0.0;
            for (const double v : f) norm2 += v * v;
            if (norm2 > 1e-24) {
                const double inv = 1.0 / std::sqrt(norm2);
                for (double& v : f) v *= inv;
            } else {
                for (double& v : f) v = 0.0;
            }
        }
    });
    return feat;
}

/// Same feature layout as extract_features, but the window for each pixel of
/// `grid` is laid out on the sphere: taps step by the grid's angular pixel
/// pitch along the east and north directions of the latitude-longitude frame
/// whose pole is `axis` (camera frame), and luma is sampled bilinearly from
/// the equirect image `equirect`. Yin and Yang pixels looking in the same
/// direction get the same feature. With `axis` along the stereo baseline,
/// parallax moves points along meridians and leaves the frame unrotated.
inline FieldImage extract_sphere_features(const FieldImage& equirect, const GridSpec& grid, const Vec3& axis,
                                          int window = 5) {
    if (window < 1 || window % 2 == 0) throw std::invalid_argument("extract_sphere_features: window must be odd and >= 1");
    if (equirect.channels() < 1) throw std::invalid_argument("extract_sphere_features: image has no channels");
    if (equirect.width() != 2 * equirect.height()) {
        throw std::invalid_argument("extract_sphere_features: equirect image must have width = 2 * height");
    }
    grid.validate();
    if (!(axis.norm() > 0.0)) throw std::invalid_argument("extract_sphere_features: zero axis");
    const GridSpec eq = GridSpec::equirect(equirect.height());
    const Vec3 pole = axis.normalized();
    const FieldImage lum = luma(equirect);
    const double step = pixel_angular_extent(grid);
    const int r = window / 2;
    const int n = window * window;
    auto L = [&](const Vec3& d) {
        const PixelCoord p = direction_to_pixel(eq, d.normalized());
        double v = 0.0;
        sample_bilinear(lum, p.u, p.v, true, std::span<double>(&v, 1));
        return v;
    };
    FieldImage feat(grid.height, grid.width, 3 * n);
    parallel_for(0, grid.height, [&](int y) {
        for (int x = 0; x < grid.width; ++x) {
            const Vec3 d = pixel_to_direction(grid, x, y);
            Vec3 east = pole.cross(d);
            if (east.norm() < 1e-9) east = d.unitOrthogonal();
            east = step * east.normalized();
            const Vec3 north = d.cross(east);
            auto f = feat.pixel(y, x);
            double mean = 0.0;
            int i = 0;
            for (int dy = -r; dy <= r; ++dy) {
                for (int dx = -r; dx <= r; ++dx, ++i) {
                    const Vec3 q = d + dx * east - dy * north;
                    f[i] = L(q);
                    f[n + i] = 0.5 * (L(q + east) - L(q - east));
                    f[2 * n + i] = 0.5 * (L(q - north) - L(q + north));
                    mean += f[i];
                }
            }
            mean /= n;
            for (int k = 0; k < n; ++k) f[k] -= mean;
            double norm2 = 0.0;
            for (const double v : f) norm2 += v * v;
            if (norm2 > 1e-24) {
                const double inv = 1.0 / std::sqrt(norm2);
                for (double& v : f) v *= inv;
            } else {
                for (double& v : f) v = 0.0;
            }
        }
    });
    return feat;
}

/// Baseline direction from view 1 to view 2, expressed in `view`'s camera
/// frame; the shared pole for extract_sphere_features.
inline Vec3 baseline_axis(const Pose& p1, const Pose& p2, const Pose& view) {
    const Vec3 b = p2.center() - p1.center();
    if (!(b.norm() > 0.0)) return Vec3::UnitZ();
    return view.rotation * b.normalized();
}

// ---------------------------------------------------------------------------
// Cross-grid warping.

/// Where the point at `depth` along target pixel (u, v)'s ray lands in the
/// source grid of view 2. `inside` is false outside the source grid's
/// angular bounds or when the point coincides with the source camera.
inline PixelCoord warp_coordinate(const GridSpec& target_grid, int u, int v, double depth, const Pose& p1,
                                  const Pose& p2, const GridSpec& source_grid) {
    const Vec3 x_world = p1.to_world(depth * pixel_to_direction(target_grid, u, v));
    const Vec3 x_src = p2.to_camera(x_world);
    if (x_src.squaredNorm() < 1e-24) return {0.0, 0.0, false};
    return direction_to_pixel(source_grid, x_src);
}

/// H x W x D stack of F-channel features; layout [y][x][depth][channel].
struct WarpedFeatures {
    int height = 0;
    int width = 0;
    int channels = 0;
    int depths = 0;
    std::vector<double> data;
    std::vector<double> mask;  // [y][x][depth]

    WarpedFeatures() = default;
    WarpedFeatures(int h, int w, int c, int d)
        : height(h), width(w), channels(c), depths(d),
          data(static_cast<std::size_t>(h) * w * c * d, 0.0), mask(static_cast<std::size_t>(h) * w * d, 0.0) {}

    std::span<double> feature(int y, int x, int k) {
        return {data.data() + ((static_cast<std::size_t>(y) * width + x) * depths + k) * channels,
                static_cast<std::size_t>(channels)};
    }
    std::span<const double> feature(int y, int x, int k) const {
        return {data.data() + ((static_cast<std::size_t>(y) * width + x) * depths + k) * channels,
                static_cast<std::size_t>(channels)};
    }
    double& mask_at(int y, int x, int k) { return mask[(static_cast<std::size_t>(y) * width + x) * depths + k]; }
    double mask_at(int y, int x, int k) const { return mask[(static_cast<std::size_t>(y) * width + x) * depths + k]; }

    bool same_shape(const WarpedFeatures& o) const {
        return height == o.height && width == o.width && channels == o.channels && depths == o.depths;
    }
};

namespace detail {
inline void require_yinyang(const GridSpec& g, const char* what) {
    if (!g.is_yinyang()) throw std::invalid_argument(std::string(what) + ": grid must be Yin or Yang");
    g.validate();
}
}  // namespace detail

/// Warps view-2 features sampled on `source_grid` into `target_grid` of
/// view 1 for every depth candidate. Cells whose sample falls outside the
/// source grid get mask 0 and a zero feature.
inline WarpedFeatures warp_feature(const FieldImage& src_feat, const GridSpec& source_grid,
                                   const GridSpec& target_grid, const Pose& p1, const Pose& p2,
                                   const DepthCandidates& cands) {
    detail::require_yinyang(source_grid, "warp_feature");
    detail::require_yinyang(target_grid, "warp_feature");
    if (src_feat.height() != source_grid.height || src_feat.width() != source_grid.width) {
        throw std::invalid_argument("warp_feature: feature map does not match source grid");
    }
    WarpedFeatures out(target_grid.height, target_grid.width, src_feat.channels(), cands.size());
    parallel_for(0, target_grid.height, [&](int v) {
        for (int u = 0; u < target_grid.width; ++u) {
            for (int k = 0; k < cands.size(); ++k) {
                const PixelCoord p = warp_coordinate(target_grid, u, v, cands.values[k], p1, p2, source_grid);
                if (!p.inside) continue;
                out.mask_at(v, u, k) = 1.0;
                sample_bilinear(src_feat, p.u, p.v, false, out.feature(v, u, k));
            }
        }
    });
    return out;
}

/// Mask-weighted mix of the warps from both source grids. The returned mask
/// holds the summed validity (0, 1 or 2); cells with zero validity are zero.
inline WarpedFeatures blend_warped(const WarpedFeatures& a, const WarpedFeatures& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("blend_warped: shape mismatch");
    WarpedFeatures out(a.height, a.width, a.channels, a.depths);
    for (int y = 0; y < a.height; ++y) {
        for (int x = 0; x < a.width; ++x) {
            for (int k = 0; k < a.depths; ++k) {
                const double ma = a.mask_at(y, x, k);
                const double mb = b.mask_at(y, x, k);
                const double m = ma + mb;
                out.mask_at(y, x, k) = m;
                if (m == 0.0) continue;
                const auto fa = a.feature(y, x, k);
                const auto fb = b.feature(y, x, k);
                auto f = out.feature(y, x, k);
                for (int c = 0; c < a.channels; ++c) f[c] = (fa[c] * ma + fb[c] * mb) / m;
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Cost volume.

struct CostVolume {
    GridSpec grid;
    DepthCandidates candidates;
    std::vector<double> scores;         // [y][x][depth]
    std::vector<std::uint8_t> validity;  // summed warp mask per cell

    int depths() const { return candidates.size(); }
    double& score(int y, int x, int k) {
        return scores[(static_cast<std::size_t>(y) * grid.width + x) * depths() + k];
    }
    double score(int y, int x, int k) const {
        return scores[(static_cast<std::size_t>(y) * grid.width + x) * depths() + k];
    }
    std::uint8_t valid(int y, int x, int k) const {
        return validity[(static_cast<std::size_t>(y) * grid.width + x) * depths() + k];
    }

    /// Depth slice k as a 1-channel raster.
    FieldImage slice(int k) const {
        FieldImage out(grid.height, grid.width, 1);
        for (int y = 0; y < grid.height; ++y) {
            for (int x = 0; x < grid.width; ++x) out(y, x) = score(y, x, k);
        }
        return out;
    }
};

inline CostVolume cost_volume(const FieldImage& target_feat, const GridSpec& grid, const WarpedFeatures& warped,
                              const DepthCandidates& cands) {
    if (target_feat.height() != warped.height || target_feat.width() != warped.width ||
        target_feat.channels() != warped.channels || warped.depths != cands.size() ||
        grid.height != warped.height || grid.width != warped.width) {
        throw std::invalid_argument("cost_volume: shape mismatch");
    }
    CostVolume cv{grid, cands, {}, {}};
    const std::size_t cells = static_cast<std::size_t>(grid.height) * grid.width * cands.size();
    cv.scores.assign(cells, 0.0);
    cv.validity.assign(cells, 0);
    const double inv_sqrt_f = 1.0 / std::sqrt(static_cast<double>(warped.channels));
    for (int y = 0; y < grid.height; ++y) {
        for (int x = 0; x < grid.width; ++x) {
            const auto f1 = target_feat.pixel(y, x);
            for (int k = 0; k < cands.size(); ++k) {
                const auto f2 = warped.feature(y, x, k);
                double dot = 0.0;
                for (int c = 0; c < warped.channels; ++c) dot += f1[c] * f2[c];
                cv.score(y, x, k) = inv_sqrt_f * dot;
                cv.validity[(static_cast<std::size_t>(y) * grid.width + x) * cands.size() + k] =
                    static_cast<std::uint8_t>(warped.mask_at(y, x, k));
            }
        }
    }
    return cv;
}

/// Fused warp + blend + correlation for one target grid, without storing the
/// H x W x F x D stacks. Same arithmetic as the three-step path.
inline CostVolume sweep_cost_volume(const FieldImage& target_feat, const GridSpec& target_grid,
                                    const FieldImage& src_yin_feat, const FieldImage& src_yang_feat,
                                    const Pose& p1, const Pose& p2, const DepthCandidates& cands) {
    detail::require_yinyang(target_grid, "sweep_cost_volume");
    if (!src_yin_feat.same_shape(src_yang_feat) || src_yin_feat.channels() != target_feat.channels() ||
        target_feat.height() != target_grid.height || target_feat.width() != target_grid.width) {
        throw std::invalid_argument("sweep_cost_volume: feature shape mismatch");
    }
    const GridSpec yin = GridSpec::yin(src_yin_feat.height());
    const GridSpec yang = GridSpec::yang(src_yang_feat.height());
    const int channels = target_feat.channels();
    const int depths = cands.size();
    CostVolume cv{target_grid, cands, {}, {}};
    const std::size_t cells = static_cast<std::size_t>(target_grid.height) * target_grid.width * depths;
    cv.scores.assign(cells, 0.0);
    cv.validity.assign(cells, 0);
    const double inv_sqrt_f = 1.0 / std::sqrt(static_cast<double>(channels));
    parallel_for(0, target_grid.height, [&](int v) {
        std::vector<double> fa(channels), fb(channels);
        for (int u = 0; u < target_grid.width; ++u) {
            const auto f1 = target_feat.pixel(v, u);
            for (int k = 0; k < depths; ++k) {
                const PixelCoord pa = warp_coordinate(target_grid, u, v, cands.values[k], p1, p2, yin);
                const PixelCoord pb = warp_coordinate(target_grid, u, v, cands.values[k], p1, p2, yang);
                const double ma = pa.inside ? 1.0 : 0.0;
                const double mb = pb.inside ? 1.0 : 0.0;
                const double m = ma + mb;
                const std::size_t cell = (static_cast<std::size_t>(v) * target_grid.width + u) * depths + k;
                cv.validity[cell] = static_cast<std::uint8_t>(m);
                if (m == 0.0) continue;
                std::fill(fa.begin(), fa.end(), 0.0);
                std::fill(fb.begin(), fb.end(), 0.0);
                if (pa.inside) sample_bilinear(src_yin_feat, pa.u, pa.v, false, fa);
                if (pb.inside) sample_bilinear(src_yang_feat, pb.u, pb.v, false, fb);
                double dot = 0.0;
                for (int c = 0; c < channels; ++c) dot += f1[c] * ((fa[c] * ma + fb[c] * mb) / m);
                cv.scores[cell] = inv_sqrt_f * dot;
            }
        }
    });
    return cv;
}

/// Index of the best-scoring candidate; ties go to the nearer depth.
inline int best_candidate(const CostVolume& cv, int y, int x) {
    int best = 0;
    for (int k = 1; k < cv.depths(); ++k) {
        if (cv.score(y, x, k) > cv.score(y, x, best)) best = k;
    }
    return best;
}

inline FieldImage depth_from_cost(const CostVolume& cv) {
    FieldImage depth(cv.grid.height, cv.grid.width, 1);
    for (int y = 0; y < cv.grid.height; ++y) {
        for (int x = 0; x < cv.grid.width; ++x) depth(y, x) = cv.candidates.values[best_candidate(cv, y, x)];
    }
    return depth;
}

/// Cost volumes of one target view on its Yin and Yang grids against both
/// grids of the source view.
struct ViewSweep {
    CostVolume yin;
    CostVolume yang;
};

struct SweepOptions {
    int feature_height = 64;  // Yin/Yang feature grids are feature_height x 3 * feature_height
    int window = 5;
    double d_near = 1.0;
    double d_far = 100.0;
    int candidates = 64;
};

/// Runs all four cross-grid sweeps for target view `target` (image and pose
/// p1) against source view p2. Inputs are equirect images; features are
/// extracted with the baseline as the shared pole.
inline ViewSweep sweep_view(const FieldImage& target, const Pose& p1, const FieldImage& source, const Pose& p2,
                            const SweepOptions& opt = {}) {
    const DepthCandidates cands = depth_candidates(opt.d_near, opt.d_far, opt.candidates);
    const GridSpec yin = GridSpec::yin(opt.feature_height);
    const GridSpec yang = GridSpec::yang(opt.feature_height);
    const Vec3 axis1 = baseline_axis(p1, p2, p1);
    const Vec3 axis2 = baseline_axis(p1, p2, p2);
    const FieldImage src_yin = extract_sphere_features(source, yin, axis2, opt.window);
    const FieldImage src_yang = extract_sphere_features(source, yang, axis2, opt.window);
    ViewSweep out{
        sweep_cost_volume(extract_sphere_features(target, yin, axis1, opt.window), yin, src_yin, src_yang, p1, p2,
                          cands),
        sweep_cost_volume(extract_sphere_features(target, yang, axis1, opt.window), yang, src_yin, src_yang, p1,
                          p2, cands)};
    return out;
}

/// Depth slices stacked vertically into one 1-channel raster of height H * D.
inline FieldImage cost_volume_stack(const CostVolume& cv) {
    FieldImage out(cv.grid.height * cv.depths(), cv.grid.width, 1);
    for (int k = 0; k < cv.depths(); ++k) {
        for (int y = 0; y < cv.grid.height; ++y) {
            for (int x = 0; x < cv.grid.width; ++x) out(k * cv.grid.height + y, x) = cv.score(y, x, k);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Segment matching. Each source pixel votes for the destination pixel its
// best depth candidate warps to; the cost-volume argmax stands in for an
// attention map.

struct LabeledGrid {
    GridSpec grid;
    const LabelMap* labels = nullptr;
};

struct SegmentMatch {
    int source_label = 0;
    std::optional<int> destination_label;
    int votes = 0;   // pixels voting for destination_label
    int pixels = 0;  // pixels carrying source_label
};

/// `destinations` are view-2 label maps tried in order; the first grid
/// containing the warped point receives the vote.
inline std::vector<SegmentMatch> match_segments(const CostVolume& cv, const Pose& p1, const Pose& p2,
                                                const LabelMap& source_labels,
                                                std::span<const LabeledGrid> destinations) {
    if (source_labels.empty()) throw std::invalid_argument("match_segments: empty label map");
    if (source_labels.height() != cv.grid.height || source_labels.width() != cv.grid.width) {
        throw std::invalid_argument("match_segments: source labels not aligned to the cost volume grid");
    }
    for (const auto& d : destinations) {
        if (d.labels == nullptr || d.labels->empty() || d.labels->height() != d.grid.height ||
            d.labels->width() != d.grid.width) {
            throw std::invalid_argument("match_segments: destination labels not aligned to their grid");
        }
    }
    std::map<int, std::map<int, int>> votes;
    std::map<int, int> totals;
    for (int y = 0; y < cv.grid.height; ++y) {
        for (int x = 0; x < cv.grid.width; ++x) {
            const int label = source_labels(y, x);
            ++totals[label];
            const double depth = cv.candidates.values[best_candidate(cv, y, x)];
            for (const auto& d : destinations) {
                const PixelCoord p = warp_coordinate(cv.grid, x, y, depth, p1, p2, d.grid);
                if (!p.inside) continue;
                const int px = std::clamp(static_cast<int>(std::floor(p.u)), 0, d.grid.width - 1);
                const int py = std::clamp(static_cast<int>(std::floor(p.v)), 0, d.grid.height - 1);
                ++votes[label][(*d.labels)(py, px)];
                break;
            }
        }
    }
    std::vector<SegmentMatch> table;
    for (const auto& [label, count] : totals) {
        SegmentMatch m{label, std::nullopt, 0, count};
        if (auto it = votes.find(label); it != votes.end()) {
            for (const auto& [dst, n] : it->second) {
                if (n > m.votes) {  // ascending map order keeps the smaller id on ties
                    m.votes = n;
                    m.destination_label = dst;
                }
            }
        }
        table.push_back(m);
    }
    return table;
}

}  // namespace yysplat
