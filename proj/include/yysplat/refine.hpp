// Copyright Contributors to the yysplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "yysplat/core.hpp"
#include "yysplat/gaussians.hpp"
#include "yysplat/rasterizer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace yysplat {

struct ReferenceView {
    FieldImage image;  // 3 channels, sampled on `grid`
    GridSpec grid;
    Pose pose;
};

/// Equirect reference view; the grid follows from the image size.
inline ReferenceView equirect_view(FieldImage image, const Pose& pose) {
    const GridSpec grid{GridFamily::Equirect, image.height(), image.width(), 0};
    return {std::move(image), grid, pose};
}

struct RefineOptions {
    int iterations = 100;
    /// Step size as a fraction of 1/L, where L bounds the curvature of the
    /// loss; values in (0, 2) decrease the loss monotonically.
    double learning_rate = 1.0;
    RasterOptions raster;
};

struct RefineResult {
    GaussianCloud cloud;
    std::vector<double> loss;  // reference-view MSE before each step, then after the last
};

/// Mean squared error of the normalized renders against every reference
/// view, over all pixels and channels.
inline double reference_mse(const GaussianCloud& cloud, const std::vector<ReferenceView>& views,
                            const RasterOptions& opt = {}) {
    if (views.empty()) throw std::invalid_argument("reference_mse: no views");
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& v : views) {
        const RenderOutput r = rasterize(cloud, v.grid, v.pose, opt);
        if (r.image.size() != v.image.size()) throw std::invalid_argument("reference_mse: view image shape mismatch");
        for (std::size_t i = 0; i < r.image.size(); ++i) {
            const double d = r.image.data()[i] - v.image.data()[i];
            sum += d * d;
        }
        n += r.image.size();
    }
    return sum / static_cast<double>(n);
}

namespace detail {

/// With geometry and opacity fixed, each rendered pixel is a fixed convex
/// combination of Gaussian colors; this captures those weights once.
class ColorSystem {
public:
    ColorSystem(const GaussianCloud& cloud, const std::vector<ReferenceView>& views, const RasterOptions& opt)
        : views_(views), opt_(opt), count_(cloud.size()) {
        if (views.empty()) throw std::invalid_argument("refine_colors: empty views");
        if (cloud.sh_degree() != 0) throw std::invalid_argument("refine_colors: SH degree 0 required");
        for (const auto& v : views) {
            v.grid.validate();
            if (v.image.height() != v.grid.height || v.image.width() != v.grid.width || v.image.channels() != 3) {
                throw std::invalid_argument("refine_colors: view image must be 3-channel and match its grid");
            }
            maps_.push_back(render_contributions(cloud, v.grid, v.pose, opt));
            values_ += v.image.size();
        }
        column_sum_.assign(count_, 0.0);
        for (const auto& m : maps_) {
            for (std::size_t p = 0; p + 1 < m.offsets.size(); ++p) {
                const double a = m.alpha.data()[p];
                if (a < opt.alpha_epsilon) continue;
                for (std::size_t e = m.offsets[p]; e < m.offsets[p + 1]; ++e) {
                    column_sum_[m.entries[e].gaussian] += m.entries[e].weight / a;
                }
            }
        }
    }

    /// Loss at `dc` (3 per Gaussian); fills `grad` when non-null.
    double evaluate(const std::vector<double>& dc, std::vector<double>* grad) const {
        if (grad) grad->assign(dc.size(), 0.0);
        double sum = 0.0;
        const double scale = 2.0 / static_cast<double>(values_);
        for (std::size_t vi = 0; vi < views_.size(); ++vi) {
            const auto& m = maps_[vi];
            const FieldImage& ref = views_[vi].image;
            for (std::size_t p = 0; p + 1 < m.offsets.size(); ++p) {
                const double a = m.alpha.data()[p];
                Vec3 pred = opt_.background;
                if (a >= opt_.alpha_epsilon) {
                    pred.setZero();
                    for (std::size_t e = m.offsets[p]; e < m.offsets[p + 1]; ++e) {
                        const auto& c = m.entries[e];
                        pred += (c.weight * kShC0) * Vec3(dc[3 * c.gaussian], dc[3 * c.gaussian + 1],
                                                          dc[3 * c.gaussian + 2]);
                    }
                    pred /= a;
                }
                const Vec3 diff = pred - Vec3(ref.data()[3 * p], ref.data()[3 * p + 1], ref.data()[3 * p + 2]);
                sum += diff.squaredNorm();
                if (grad && a >= opt_.alpha_epsilon) {
                    for (std::size_t e = m.offsets[p]; e < m.offsets[p + 1]; ++e) {
                        const auto& c = m.entries[e];
                        const double k = scale * kShC0 * c.weight / a;
                        for (int ch = 0; ch < 3; ++ch) (*grad)[3 * c.gaussian + ch] += k * diff[ch];
                    }
                }
            }
        }
        return sum / static_cast<double>(values_);
    }

    /// Upper bound on the loss Hessian's largest eigenvalue.
    double lipschitz() const {
        const double widest = column_sum_.empty() ? 0.0 : *std::max_element(column_sum_.begin(), column_sum_.end());
        return 2.0 / static_cast<double>(values_) * kShC0 * kShC0 * widest;
    }

private:
    const std::vector<ReferenceView>& views_;
    RasterOptions opt_;
    std::size_t count_;
    std::vector<ContributionMap> maps_;
    std::size_t values_ = 0;
    std::vector<double> column_sum_;
};

}  // namespace detail

/// Analytic gradient of reference_mse with respect to the DC coefficients,
/// three per Gaussian.
inline std::vector<double> color_gradient(const GaussianCloud& cloud, const std::vector<ReferenceView>& views,
                                          const RasterOptions& opt = {}) {
    const detail::ColorSystem system(cloud, views, opt);
    std::vector<double> grad;
    system.evaluate(cloud.sh_data(), &grad);
    return grad;
}

/// Gradient descent on the DC color coefficients only. Positions, scales,
/// rotations and opacities are left untouched.
inline RefineResult refine_colors(const GaussianCloud& cloud, const std::vector<ReferenceView>& views,
                                  const RefineOptions& opt = {}) {
    if (views.empty()) throw std::invalid_argument("refine_colors: empty views");
    if (opt.iterations < 0) throw std::invalid_argument("refine_colors: iterations must be >= 0");
    if (!(opt.learning_rate > 0.0)) throw std::invalid_argument("refine_colors: learning rate must be positive");
    RefineResult result{cloud, {}};
    if (cloud.empty()) return result;
    const detail::ColorSystem system(cloud, views, opt.raster);
    const double lipschitz = system.lipschitz();
    std::vector<double> dc = cloud.sh_data();
    std::vector<double> grad;
    for (int it = 0; it < opt.iterations; ++it) {
        result.loss.push_back(system.evaluate(dc, &grad));
        if (lipschitz <= 0.0) break;
        const double step = opt.learning_rate / lipschitz;
        for (std::size_t i = 0; i < dc.size(); ++i) dc[i] -= step * grad[i];
    }
    result.loss.push_back(system.evaluate(dc, nullptr));
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        auto sh = result.cloud.sh(i);
        std::copy_n(dc.begin() + 3 * i, 3, sh.begin());
    }
    return result;
}

}  // namespace yysplat
