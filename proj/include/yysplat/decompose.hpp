// Copyright Contributors to the yysplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "yysplat/core.hpp"
#include "yysplat/sphere_geom.hpp"

#include <cmath>
#include <span>
#include <stdexcept>
#include <utility>

namespace yysplat {

/// Bilinear sample at continuous coordinates (pixel centers at +0.5). Rows
/// clamp at the edges; columns wrap when `wrap_x` is set, clamp otherwise.
/// Uses the a + t*(b - a) form so constant neighborhoods reproduce exactly.
inline void sample_bilinear(const FieldImage& img, double x, double y, bool wrap_x, std::span<double> out) {
    const int w = img.width();
    const int h = img.height();
    auto axis = [](double p, int n, bool wrap, int& i0, int& i1, double& t) {
        const double f = p - 0.5;
        const double fl = std::floor(f);
        t = f - fl;
        i0 = static_cast<int>(fl);
        i1 = i0 + 1;
        if (wrap) {
            i0 = ((i0 % n) + n) % n;
            i1 = ((i1 % n) + n) % n;
        } else if (i0 < 0) {
            i0 = i1 = 0;
            t = 0.0;
        } else if (i1 > n - 1) {
            i0 = i1 = n - 1;
            t = 0.0;
        }
    };
    int x0, x1, y0, y1;
    double tx, ty;
    axis(x, w, wrap_x, x0, x1, tx);
    axis(y, h, false, y0, y1, ty);
    const auto p00 = img.pixel(y0, x0), p01 = img.pixel(y0, x1);
    const auto p10 = img.pixel(y1, x0), p11 = img.pixel(y1, x1);
    for (int c = 0; c < img.channels(); ++c) {
        const double top = p00[c] + tx * (p01[c] - p00[c]);
        const double bottom = p10[c] + tx * (p11[c] - p10[c]);
        out[c] = top + ty * (bottom - top);
    }
}

/// Resamples `src` (sampled on `src_grid`) onto every pixel of `dst_grid`.
inline FieldImage resample(const FieldImage& src, const GridSpec& src_grid, const GridSpec& dst_grid) {
    FieldImage out(dst_grid.height, dst_grid.width, src.channels());
    const bool wrap = src_grid.family == GridFamily::Equirect;
    parallel_for(0, dst_grid.height, [&](int v) {
        for (int u = 0; u < dst_grid.width; ++u) {
            const PixelCoord p = direction_to_pixel(src_grid, pixel_to_direction(dst_grid, u, v));
            sample_bilinear(src, p.u, p.v, wrap, out.pixel(v, u));
        }
    });
    return out;
}

struct YinYangPair {
    FieldImage yin;
    FieldImage yang;
};

inline GridSpec equirect_grid_of(const FieldImage& img) {
    return {GridFamily::Equirect, img.height(), img.width(), 0};
}

/// Splits an equirectangular raster into Yin and Yang rasters of height
/// `out_height` (width 3 * out_height). `out_height` <= 0 selects H / 2.
inline YinYangPair decompose_yinyang(const FieldImage& img, int out_height = 0) {
    if (img.channels() == 0) throw std::invalid_argument("decompose_yinyang: channel count 0");
    if (img.height() < 2 || img.width() < 4) {
        throw std::invalid_argument("decompose_yinyang: equirect input must be at least 2x4 pixels");
    }
    const GridSpec src = equirect_grid_of(img);
    src.validate();
    if (out_height <= 0) out_height = img.height() / 2;
    return {resample(img, src, GridSpec::yin(out_height)), resample(img, src, GridSpec::yang(out_height))};
}

struct BlendWeights {
    double yin = 0.0;
    double yang = 0.0;
};

/// Seam blend weights for a camera-frame direction: proportional to the
/// angular distance to each patch's boundary, normalized to sum to one.
inline BlendWeights yinyang_blend_weights(const Vec3& d) {
    const bool in_yin = yin_contains(to_spherical(d));
    const Vec3 local_yang = yang_transform(d);
    const bool in_yang = yin_contains(to_spherical(local_yang));
    if (in_yin && !in_yang) return {1.0, 0.0};
    if (in_yang && !in_yin) return {0.0, 1.0};
    if (!in_yin && !in_yang) throw std::logic_error("yinyang_blend_weights: direction covered by neither grid");
    const double a = yin_boundary_distance(d);
    const double b = yin_boundary_distance(local_yang);
    if (a + b <= 0.0) return {0.5, 0.5};
    return {a / (a + b), b / (a + b)};
}

/// Blended value of a Yin/Yang raster pair along camera-frame direction `d`.
inline void recompose_at(const FieldImage& yin, const FieldImage& yang, const Vec3& d, std::span<double> out,
                         std::span<double> scratch) {
    const GridSpec yin_grid = GridSpec::yin(yin.height());
    const GridSpec yang_grid = GridSpec::yang(yang.height());
    const BlendWeights w = yinyang_blend_weights(d);
    if (w.yang == 0.0) {
        const PixelCoord p = direction_to_pixel(yin_grid, d);
        sample_bilinear(yin, p.u, p.v, false, out);
        return;
    }
    if (w.yin == 0.0) {
        const PixelCoord p = direction_to_pixel(yang_grid, d);
        sample_bilinear(yang, p.u, p.v, false, out);
        return;
    }
    const PixelCoord pn = direction_to_pixel(yin_grid, d);
    const PixelCoord pe = direction_to_pixel(yang_grid, d);
    sample_bilinear(yin, pn.u, pn.v, false, scratch);
    sample_bilinear(yang, pe.u, pe.v, false, out);
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += w.yin * (scratch[c] - out[c]);
}

/// Combines Yin and Yang rasters (same shape) into one raster on `out`
/// (any grid family; typically equirect).
inline FieldImage recompose_yinyang(const FieldImage& yin, const FieldImage& yang, const GridSpec& out) {
    if (!yin.same_shape(yang)) throw std::invalid_argument("recompose_yinyang: yin and yang shapes differ");
    GridSpec::yin(yin.height()).validate();
    if (yin.width() != 3 * yin.height()) throw std::invalid_argument("recompose_yinyang: inputs must be H x 3H");
    out.validate();
    FieldImage result(out.height, out.width, yin.channels());
    parallel_for(0, out.height, [&](int v) {
        std::vector<double> scratch(static_cast<std::size_t>(yin.channels()));
        for (int u = 0; u < out.width; ++u) {
            recompose_at(yin, yang, pixel_to_direction(out, u, v), result.pixel(v, u), scratch);
        }
    });
    return result;
}

}  // namespace yysplat
