// Copyright Contributors to the yysplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "yysplat/core.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace yysplat {

/// Returned by psnr for (near-)identical images.
inline constexpr double kPsnrInfinite = std::numeric_limits<double>::infinity();
/// Cap used when printing tables.
inline constexpr double kPsnrDisplayCap = 99.0;

inline double mse(const FieldImage& a, const FieldImage& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("mse: shape mismatch");
    if (a.empty()) throw std::invalid_argument("mse: empty image");
    // Neumaier compensated sum: the mean is correct to final rounding.
    double sum = 0.0;
    double carry = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a.data()[i] - b.data()[i];
        const double term = d * d;
        const double t = sum + term;
        carry += std::abs(sum) >= term ? (sum - t) + term : (term - t) + sum;
        sum = t;
    }
    return (sum + carry) / static_cast<double>(a.size());
}

inline double psnr(const FieldImage& a, const FieldImage& b) {
    const double m = mse(a, b);
    if (m < 1e-12) return kPsnrInfinite;
    return -10.0 * std::log10(m);
}

namespace detail {

inline FieldImage gray(const FieldImage& img) {
    if (img.channels() == 1) return img;
    if (img.channels() < 3) throw std::invalid_argument("ssim: need 1 or >= 3 channels");
    FieldImage g(img.height(), img.width(), 1);
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            g(y, x) = 0.299 * img(y, x, 0) + 0.587 * img(y, x, 1) + 0.114 * img(y, x, 2);
        }
    }
    return g;
}

}  // namespace detail

/// Mean SSIM over the valid region, 11x11 Gaussian window (sigma 1.5),
/// K1 = 0.01, K2 = 0.03, dynamic range 1. Color inputs are reduced to luma.
inline double ssim(const FieldImage& a, const FieldImage& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("ssim: shape mismatch");
    constexpr int kWin = 11;
    constexpr double kSigma = 1.5;
    if (a.height() < kWin || a.width() < kWin) throw std::invalid_argument("ssim: image smaller than 11x11 window");
    const FieldImage x = detail::gray(a);
    const FieldImage y = detail::gray(b);

    std::array<double, kWin> g{};
    double total = 0.0;
    for (int i = 0; i < kWin; ++i) {
        const double d = i - kWin / 2;
        g[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
        total += g[i];
    }
    for (double& v : g) v /= total;

    constexpr double c1 = 0.01 * 0.01;
    constexpr double c2 = 0.03 * 0.03;
    const int oh = x.height() - kWin + 1;
    const int ow = x.width() - kWin + 1;
    double sum = 0.0;
    for (int r = 0; r < oh; ++r) {
        for (int c = 0; c < ow; ++c) {
            double mx = 0, my = 0, xx = 0, yy = 0, xy = 0;
            for (int i = 0; i < kWin; ++i) {
                for (int j = 0; j < kWin; ++j) {
                    const double w = g[i] * g[j];
                    const double px = x(r + i, c + j);
                    const double py = y(r + i, c + j);
                    mx += w * px;
                    my += w * py;
                    xx += w * px * px;
                    yy += w * py * py;
                    xy += w * px * py;
                }
            }
            const double vx = xx - mx * mx;
            const double vy = yy - my * my;
            const double cov = xy - mx * my;
            sum += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
        }
    }
    return sum / (static_cast<double>(oh) * ow);
}

}  // namespace yysplat
