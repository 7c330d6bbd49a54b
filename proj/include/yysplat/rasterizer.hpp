// Copyright Contributors to the yysplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "yysplat/core.hpp"
#include "yysplat/decompose.hpp"
#include "yysplat/gaussians.hpp"
#include "yysplat/sphere_geom.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

namespace yysplat {

struct RasterOptions {
    Vec3 background = Vec3::Zero();
    /// Below this accumulated alpha a pixel takes the background color.
    double alpha_epsilon = 1e-3;
    /// Added to the projected covariance diagonal, in px^2.
    double blur = 0.3;
    /// Compositing stops once transmittance drops below this.
    double transmittance_cutoff = 1e-4;
    double max_alpha = 0.999;
    /// Gaussians closer than this to the camera center are not drawn.
    double near = 1e-2;
    /// Skip Gaussians whose 3-sigma box misses the grid.
    bool cull = true;
    int tile_size = 16;
};

/// color: premultiplied accumulated color (3 ch); alpha: accumulated
/// opacity (1 ch); image: color / alpha, or background where alpha is tiny.
struct RenderOutput {
    FieldImage color;
    FieldImage alpha;
    FieldImage image;
};

/// A Gaussian projected into a grid's pixel space.
struct Splat {
    Vec2 mean;
    Mat2 conic;  // inverse 2D covariance
    Vec2 extent;  // 3-sigma half widths of the axis-aligned box, px
    Vec3 color;
    double opacity = 0.0;
    double distance = 0.0;
    int index = 0;
};

namespace detail {

struct LatLongFrame {
    double phi_min, phi_range, theta_max, theta_range;
    bool wraps;
};

inline LatLongFrame latlong_frame(const GridSpec& g) {
    switch (g.family) {
        case GridFamily::Equirect: return {-kPi, 2.0 * kPi, kPi / 2.0, kPi, true};
        case GridFamily::Yin:
        case GridFamily::Yang: return {-kYinPhiMax, 1.5 * kPi, kYinThetaMax, 0.5 * kPi, false};
        default: throw std::invalid_argument("rasterize: grid must be Equirect, Yin or Yang");
    }
}

/// Rotation from world to the grid's latitude-longitude frame.
inline Mat3 grid_rotation(const GridSpec& g, const Pose& pose) {
    return g.family == GridFamily::Yang ? Mat3(yang_matrix() * pose.rotation) : pose.rotation;
}

}  // namespace detail

/// Projects Gaussian i through the local Jacobian of the spherical
/// projection at its center. Empty when the projection is undefined (too
/// close to the camera, or on the frame's pole axis).
inline std::optional<Splat> project_gaussian(const GaussianCloud& cloud, std::size_t i, const GridSpec& grid,
                                             const Pose& pose, const RasterOptions& opt) {
    const detail::LatLongFrame f = detail::latlong_frame(grid);
    const Gaussian3D& g = cloud[i];
    const Mat3 rot = detail::grid_rotation(grid, pose);
    const Vec3 offset = g.position - pose.center();
    const Vec3 p = rot * offset;
    const double r2 = p.squaredNorm();
    const double r = std::sqrt(r2);
    if (!(r >= opt.near)) return std::nullopt;
    const double rho2 = p.x() * p.x() + p.y() * p.y();
    const double rho = std::sqrt(rho2);
    if (rho < 1e-9 * r) return std::nullopt;

    const double su = grid.width / f.phi_range;
    const double sv = grid.height / f.theta_range;
    const double phi = std::atan2(p.y(), p.x());
    const double theta = std::atan2(p.z(), rho);

    Eigen::Matrix<double, 2, 3> jac;
    jac << -su * p.y() / rho2, su * p.x() / rho2, 0.0,
           sv * p.x() * p.z() / (r2 * rho), sv * p.y() * p.z() / (r2 * rho), -sv * rho / r2;
    const Mat3 cov_local = rot * g.covariance() * rot.transpose();
    Mat2 cov2 = jac * cov_local * jac.transpose();
    cov2(0, 1) = cov2(1, 0) = 0.5 * (cov2(0, 1) + cov2(1, 0));
    cov2(0, 0) += opt.blur;
    cov2(1, 1) += opt.blur;
    const double det = cov2.determinant();
    if (!(det > 0.0)) return std::nullopt;

    Splat s;
    s.mean = Vec2((phi - f.phi_min) * su, (f.theta_max - theta) * sv);
    s.conic << cov2(1, 1) / det, -cov2(0, 1) / det, -cov2(1, 0) / det, cov2(0, 0) / det;
    s.extent = Vec2(3.0 * std::sqrt(cov2(0, 0)), 3.0 * std::sqrt(cov2(1, 1)));
    s.color = eval_sh(cloud.sh_degree(), cloud.sh(i), offset / r);
    s.opacity = g.opacity;
    s.distance = offset.norm();
    s.index = static_cast<int>(i);
    return s;
}

/// Front-to-back order: camera distance ascending, input index on ties.
inline void sort_splats(std::vector<Splat>& splats) {
    std::sort(splats.begin(), splats.end(), [](const Splat& a, const Splat& b) {
        return a.distance != b.distance ? a.distance < b.distance : a.index < b.index;
    });
}

/// Weight of splat s at pixel (x, y), before transmittance. Zero outside
/// the 3-sigma ellipse.
inline double splat_alpha(const Splat& s, int x, int y, int width, bool wraps, const RasterOptions& opt) {
    double dx = x + 0.5 - s.mean.x();
    const double dy = y + 0.5 - s.mean.y();
    if (wraps) dx -= width * std::floor(dx / width + 0.5);
    const double m = s.conic(0, 0) * dx * dx + 2.0 * s.conic(0, 1) * dx * dy + s.conic(1, 1) * dy * dy;
    if (m > 9.0) return 0.0;
    return std::min(opt.max_alpha, s.opacity * std::exp(-0.5 * m));
}

/// Composites `order` (indices into splats, front to back) at one pixel.
/// `visit(splat, weight)` sees each nonzero contribution T * a.
template <typename Visit>
double composite_pixel(const std::vector<Splat>& splats, std::span<const int> order, int x, int y, int width,
                       bool wraps, double cutoff, const RasterOptions& opt, Visit&& visit) {
    double transmittance = 1.0;
    for (const int idx : order) {
        const Splat& s = splats[idx];
        const double a = splat_alpha(s, x, y, width, wraps, opt);
        if (a <= 0.0) continue;
        visit(s, transmittance * a);
        transmittance *= 1.0 - a;
        if (transmittance < cutoff) break;
    }
    return transmittance;
}

/// Divides accumulated color by accumulated alpha; background below epsilon.
inline FieldImage normalize_by_alpha(const FieldImage& color, const FieldImage& alpha, const Vec3& background,
                                     double alpha_epsilon) {
    if (color.height() != alpha.height() || color.width() != alpha.width() || alpha.channels() != 1) {
        throw std::invalid_argument("normalize_by_alpha: shape mismatch");
    }
    FieldImage image(color.height(), color.width(), color.channels());
    for (int y = 0; y < color.height(); ++y) {
        for (int x = 0; x < color.width(); ++x) {
            const double a = alpha(y, x);
            for (int c = 0; c < color.channels(); ++c) {
                image(y, x, c) = a >= alpha_epsilon ? color(y, x, c) / a : background[c % 3];
            }
        }
    }
    return image;
}

namespace detail {

inline void check_render_inputs(const GaussianCloud& cloud, const GridSpec& grid, const Pose& pose) {
    (void)cloud;
    grid.validate();
    latlong_frame(grid);
    if (!is_rotation(pose.rotation, 1e-6)) throw std::invalid_argument("rasterize: pose rotation is not a rotation");
}

inline std::vector<Splat> project_all(const GaussianCloud& cloud, const GridSpec& grid, const Pose& pose,
                                      const RasterOptions& opt, bool cull) {
    std::vector<std::optional<Splat>> projected(cloud.size());
    parallel_for(0, static_cast<int>(cloud.size()),
                 [&](int i) { projected[i] = project_gaussian(cloud, static_cast<std::size_t>(i), grid, pose, opt); });
    const bool wraps = latlong_frame(grid).wraps;
    std::vector<Splat> splats;
    splats.reserve(cloud.size());
    for (auto& s : projected) {
        if (!s) continue;
        if (cull) {
            const bool rows_miss = s->mean.y() + s->extent.y() < 0.0 || s->mean.y() - s->extent.y() > grid.height;
            const bool cols_miss =
                !wraps && (s->mean.x() + s->extent.x() < 0.0 || s->mean.x() - s->extent.x() > grid.width);
            if (rows_miss || cols_miss) continue;
        }
        splats.push_back(*s);
    }
    sort_splats(splats);
    return splats;
}

/// Per-tile lists of splat indices in front-to-back order. Boxes that cross
/// the azimuth seam of a wrapping grid are duplicated on both sides.
inline std::vector<std::vector<int>> bin_splats(const std::vector<Splat>& splats, const GridSpec& grid, int tile,
                                                bool wraps) {
    const int tiles_x = (grid.width + tile - 1) / tile;
    const int tiles_y = (grid.height + tile - 1) / tile;
    std::vector<std::vector<int>> bins(static_cast<std::size_t>(tiles_x) * tiles_y);
    std::vector<char> hit(static_cast<std::size_t>(tiles_x));
    for (int i = 0; i < static_cast<int>(splats.size()); ++i) {
        const Splat& s = splats[i];
        const int y0 = std::max(0, static_cast<int>(std::floor(s.mean.y() - s.extent.y() - 0.5)));
        const int y1 = std::min(grid.height - 1, static_cast<int>(std::ceil(s.mean.y() + s.extent.y() - 0.5)));
        if (y0 > y1) continue;
        const int x0 = static_cast<int>(std::floor(s.mean.x() - s.extent.x() - 0.5));
        const int x1 = static_cast<int>(std::ceil(s.mean.x() + s.extent.x() - 0.5));
        std::fill(hit.begin(), hit.end(), 0);
        if (wraps) {
            if (x1 - x0 + 1 >= grid.width) {
                std::fill(hit.begin(), hit.end(), 1);
            } else {
                for (int x = x0; x <= x1; ++x) hit[((x % grid.width + grid.width) % grid.width) / tile] = 1;
            }
        } else {
            const int cx0 = std::max(0, x0);
            const int cx1 = std::min(grid.width - 1, x1);
            for (int tx = cx0 / tile; cx0 <= cx1 && tx <= cx1 / tile; ++tx) hit[tx] = 1;
        }
        for (int ty = y0 / tile; ty <= y1 / tile; ++ty) {
            for (int tx = 0; tx < tiles_x; ++tx) {
                if (hit[tx]) bins[static_cast<std::size_t>(ty) * tiles_x + tx].push_back(i);
            }
        }
    }
    return bins;
}

}  // namespace detail

/// Per-pixel compositing contributions, used by color refinement.
struct Contribution {
    int gaussian;
    double weight;
};

struct ContributionMap {
    int height = 0;
    int width = 0;
    std::vector<std::size_t> offsets;  // per pixel, size H*W + 1
    std::vector<Contribution> entries;
    FieldImage alpha;
};

namespace detail {

template <typename Visit>
void render_tiles(const std::vector<Splat>& splats, const GridSpec& grid, const RasterOptions& opt, Visit&& visit) {
    const bool wraps = latlong_frame(grid).wraps;
    const int tile = std::max(1, opt.tile_size);
    const auto bins = bin_splats(splats, grid, tile, wraps);
    const int tiles_x = (grid.width + tile - 1) / tile;
    parallel_for(0, static_cast<int>(bins.size()), [&](int t) {
        const int tx = t % tiles_x;
        const int ty = t / tiles_x;
        const std::span<const int> order(bins[t]);
        for (int y = ty * tile; y < std::min(grid.height, (ty + 1) * tile); ++y) {
            for (int x = tx * tile; x < std::min(grid.width, (tx + 1) * tile); ++x) {
                visit(x, y, order, wraps);
            }
        }
    });
}

inline RenderOutput accumulate(const std::vector<Splat>& splats, const GridSpec& grid, const RasterOptions& opt,
                               double cutoff, bool tiled) {
    RenderOutput out;
    out.color = FieldImage(grid.height, grid.width, 3);
    out.alpha = FieldImage(grid.height, grid.width, 1);
    auto shade = [&](int x, int y, std::span<const int> order, bool wraps) {
        Vec3 acc = Vec3::Zero();
        double alpha = 0.0;
        composite_pixel(splats, order, x, y, grid.width, wraps, cutoff, opt, [&](const Splat& s, double w) {
            acc += w * s.color;
            alpha += w;
        });
        for (int c = 0; c < 3; ++c) out.color(y, x, c) = acc[c];
        out.alpha(y, x) = alpha;
    };
    if (tiled) {
        render_tiles(splats, grid, opt, shade);
    } else {
        std::vector<int> all(splats.size());
        std::iota(all.begin(), all.end(), 0);
        const bool wraps = latlong_frame(grid).wraps;
        parallel_for(0, grid.height, [&](int y) {
            for (int x = 0; x < grid.width; ++x) shade(x, y, all, wraps);
        });
    }
    out.image = normalize_by_alpha(out.color, out.alpha, opt.background, opt.alpha_epsilon);
    return out;
}

}  // namespace detail

/// Tile-based splatting of `cloud` onto an Equirect, Yin or Yang grid seen
/// from `pose`. A Yang grid renders in the Yang-local frame (rotation M*R).
inline RenderOutput rasterize(const GaussianCloud& cloud, const GridSpec& grid, const Pose& pose,
                              const RasterOptions& opt = {}) {
    detail::check_render_inputs(cloud, grid, pose);
    const auto splats = detail::project_all(cloud, grid, pose, opt, opt.cull);
    return detail::accumulate(splats, grid, opt, opt.transmittance_cutoff, true);
}

/// Reference renderer with the same model as rasterize: every splat is
/// evaluated at every pixel, nothing is culled, compositing never stops
/// early.
inline RenderOutput oracle_render(const GaussianCloud& cloud, const GridSpec& grid, const Pose& pose,
                                  const RasterOptions& opt = {}) {
    detail::check_render_inputs(cloud, grid, pose);
    const auto splats = detail::project_all(cloud, grid, pose, opt, false);
    RenderOutput out;
    out.color = FieldImage(grid.height, grid.width, 3);
    out.alpha = FieldImage(grid.height, grid.width, 1);
    const bool wraps = detail::latlong_frame(grid).wraps;
    for (int y = 0; y < grid.height; ++y) {
        for (int x = 0; x < grid.width; ++x) {
            double transmittance = 1.0;
            Vec3 acc = Vec3::Zero();
            double alpha = 0.0;
            for (const Splat& s : splats) {
                const double a = splat_alpha(s, x, y, grid.width, wraps, opt);
                if (a <= 0.0) continue;
                acc += transmittance * a * s.color;
                alpha += transmittance * a;
                transmittance *= 1.0 - a;
            }
            for (int c = 0; c < 3; ++c) out.color(y, x, c) = acc[c];
            out.alpha(y, x) = alpha;
        }
    }
    out.image = normalize_by_alpha(out.color, out.alpha, opt.background, opt.alpha_epsilon);
    return out;
}

/// Per-pixel (gaussian, weight) lists of the tiled renderer, so that
/// color = sum(weight * gaussian color) and alpha = sum(weight).
inline ContributionMap render_contributions(const GaussianCloud& cloud, const GridSpec& grid, const Pose& pose,
                                            const RasterOptions& opt = {}) {
    detail::check_render_inputs(cloud, grid, pose);
    const auto splats = detail::project_all(cloud, grid, pose, opt, opt.cull);
    const std::size_t pixels = static_cast<std::size_t>(grid.height) * grid.width;
    std::vector<std::vector<Contribution>> lists(pixels);
    detail::render_tiles(splats, grid, opt, [&](int x, int y, std::span<const int> order, bool wraps) {
        auto& list = lists[static_cast<std::size_t>(y) * grid.width + x];
        composite_pixel(splats, order, x, y, grid.width, wraps, opt.transmittance_cutoff, opt,
                        [&](const Splat& s, double w) { list.push_back({s.index, w}); });
    });
    ContributionMap map;
    map.height = grid.height;
    map.width = grid.width;
    map.alpha = FieldImage(grid.height, grid.width, 1);
    map.offsets.resize(pixels + 1, 0);
    for (std::size_t p = 0; p < pixels; ++p) {
        map.offsets[p + 1] = map.offsets[p] + lists[p].size();
        double a = 0.0;
        for (const auto& c : lists[p]) a += c.weight;
        map.alpha.data()[p] = a;
    }
    map.entries.reserve(map.offsets.back());
    for (auto& l : lists) map.entries.insert(map.entries.end(), l.begin(), l.end());
    return map;
}

// ---------------------------------------------------------------------------
// Two-pass Yin-Yang rendering.

struct YinYangRender {
    FieldImage image;  // recomposed normalized color
    FieldImage alpha;  // recomposed accumulated alpha
    RenderOutput yin;
    RenderOutput yang;
};

/// Renders the Yin pass with the camera rotation and the Yang pass with the
/// rotation premultiplied by M, normalizes each by its alpha, and recomposes
/// both onto `out`. `patch_height` <= 0 selects out.height / 2.
inline YinYangRender render_yinyang(const GaussianCloud& cloud, const Pose& pose, const GridSpec& out,
                                    const RasterOptions& opt = {}, int patch_height = 0) {
    out.validate();
    if (patch_height <= 0) patch_height = std::max(1, out.height / 2);
    const GridSpec patch = GridSpec::yin(patch_height);
    YinYangRender r;
    r.yin = rasterize(cloud, patch, pose, opt);
    r.yang = rasterize(cloud, patch, Pose{yang_matrix() * pose.rotation, pose.translation}, opt);
    r.image = recompose_yinyang(r.yin.image, r.yang.image, out);
    r.alpha = recompose_yinyang(r.yin.alpha, r.yang.alpha, out);
    return r;
}

}  // namespace yysplat
