// Copyright Contributors to the yysplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "yysplat/core.hpp"
#include "yysplat/sphere_geom.hpp"

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace yysplat {

inline constexpr double kShC0 = 0.28209479177387814;

inline int sh_coefficient_count(int degree) { return (degree + 1) * (degree + 1); }

/// Position and scale in scene units; rotation is a unit quaternion
/// (w, x, y, z) so that covariance = R diag(scale^2) R^T.
struct Gaussian3D {
    Vec3 position = Vec3::Zero();
    Vec3 scale = Vec3::Ones();
    Vec4 rotation = Vec4(1, 0, 0, 0);
    double opacity = 1.0;

    Mat3 rotation_matrix() const {
        const Eigen::Quaterniond q(rotation[0], rotation[1], rotation[2], rotation[3]);
        return q.normalized().toRotationMatrix();
    }

    Mat3 covariance() const {
        const Mat3 r = rotation_matrix();
        const Vec3& s = scale;
        return r * s.cwiseProduct(s).asDiagonal() * r.transpose();
    }

    bool operator==(const Gaussian3D&) const = default;
};

/// Gaussians plus their SH color coefficients. Coefficients are stored per
/// Gaussian as sh_coefficient_count(degree) consecutive RGB triples.
class GaussianCloud {
public:
    explicit GaussianCloud(int sh_degree = 0) : sh_degree_(sh_degree) {
        if (sh_degree < 0 || sh_degree > 3) throw std::invalid_argument("GaussianCloud: SH degree must be in 0..3");
    }

    int sh_degree() const { return sh_degree_; }
    int sh_stride() const { return 3 * sh_coefficient_count(sh_degree_); }
    std::size_t size() const { return gaussians_.size(); }
    bool empty() const { return gaussians_.empty(); }

    const Gaussian3D& operator[](std::size_t i) const { return gaussians_[i]; }
    Gaussian3D& operator[](std::size_t i) { return gaussians_[i]; }
    const std::vector<Gaussian3D>& gaussians() const { return gaussians_; }

    std::span<double> sh(std::size_t i) {
        return {sh_.data() + i * sh_stride(), static_cast<std::size_t>(sh_stride())};
    }
    std::span<const double> sh(std::size_t i) const {
        return {sh_.data() + i * sh_stride(), static_cast<std::size_t>(sh_stride())};
    }
    const std::vector<double>& sh_data() const { return sh_; }

    void add(const Gaussian3D& g, std::span<const double> coefficients) {
        if (coefficients.size() != static_cast<std::size_t>(sh_stride())) {
            throw std::invalid_argument("GaussianCloud::add: expected " + std::to_string(sh_stride()) +
                                        " SH coefficients");
        }
        gaussians_.push_back(g);
        sh_.insert(sh_.end(), coefficients.begin(), coefficients.end());
    }

    /// Degree-0 convenience: the DC term is chosen so the evaluated color is `rgb`.
    void add_colored(const Gaussian3D& g, const Vec3& rgb) {
        if (sh_degree_ != 0) throw std::logic_error("GaussianCloud::add_colored: degree-0 clouds only");
        const double dc[3] = {rgb[0] / kShC0, rgb[1] / kShC0, rgb[2] / kShC0};
        add(g, dc);
    }

    void append(const GaussianCloud& other) {
        if (other.sh_degree_ != sh_degree_) throw std::invalid_argument("GaussianCloud::append: SH degree mismatch");
        gaussians_.insert(gaussians_.end(), other.gaussians_.begin(), other.gaussians_.end());
        sh_.insert(sh_.end(), other.sh_.begin(), other.sh_.end());
    }

    void reserve(std::size_t n) {
        gaussians_.reserve(n);
        sh_.reserve(n * sh_stride());
    }

    bool operator==(const GaussianCloud&) const = default;

private:
    int sh_degree_ = 0;
    std::vector<Gaussian3D> gaussians_;
    std::vector<double> sh_;
};

/// RGB color of real SH coefficients seen along unit direction `dir`
/// (direction from the camera toward the Gaussian).
inline Vec3 eval_sh(int degree, std::span<const double> coeffs, const Vec3& dir) {
    auto coef = [&](int k) { return Vec3(coeffs[3 * k], coeffs[3 * k + 1], coeffs[3 * k + 2]); };
    Vec3 c = kShC0 * coef(0);
    if (degree < 1) return c;
    const double x = dir.x(), y = dir.y(), z = dir.z();
    constexpr double c1 = 0.4886025119029199;
    c += -c1 * y * coef(1) + c1 * z * coef(2) - c1 * x * coef(3);
    if (degree < 2) return c;
    const double xx = x * x, yy = y * y, zz = z * z, xy = x * y, yz = y * z, xz = x * z;
    c += 1.0925484305920792 * xy * coef(4) - 1.0925484305920792 * yz * coef(5) +
         0.31539156525252005 * (2.0 * zz - xx - yy) * coef(6) - 1.0925484305920792 * xz * coef(7) +
         0.5462742152960396 * (xx - yy) * coef(8);
    if (degree < 3) return c;
    c += -0.5900435899266435 * y * (3.0 * xx - yy) * coef(9) + 2.890611442640554 * xy * z * coef(10) -
         0.4570457994644658 * y * (4.0 * zz - xx - yy) * coef(11) +
         0.3731763325901154 * z * (2.0 * zz - 3.0 * xx - 3.0 * yy) * coef(12) -
         0.4570457994644658 * x * (4.0 * zz - xx - yy) * coef(13) +
         1.445305721320277 * z * (xx - yy) * coef(14) - 0.5900435899266435 * x * (xx - 3.0 * yy) * coef(15);
    return c;
}

/// Throws if any Gaussian violates the data-model invariants.
inline void validate_cloud(const GaussianCloud& cloud) {
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const Gaussian3D& g = cloud[i];
        const std::string where = "gaussian " + std::to_string(i) + ": ";
        if (!(g.scale.array() > 0.0).all()) throw DataError(where + "scale must be positive");
        if (std::abs(g.rotation.norm() - 1.0) > 1e-6) throw DataError(where + "quaternion not unit");
        if (!(g.opacity > 0.0 && g.opacity <= 1.0)) throw DataError(where + "opacity outside (0, 1]");
        if (!g.position.allFinite()) throw DataError(where + "non-finite position");
    }
}

struct PixelAlignedOptions {
    double opacity = 1.0;
    double scale_factor = 1.0;
};

/// One isotropic Gaussian per pixel, placed along the pixel's ray at the
/// given depth (distance from the camera center). The splat std-dev spans
/// the pixel's angular footprint at that depth, times `scale_factor`.
inline GaussianCloud pixel_aligned_cloud(const FieldImage& img, const FieldImage& depth, const GridSpec& grid,
                                         const Pose& pose, const PixelAlignedOptions& opt = {}) {
    grid.validate();
    if (img.height() != grid.height || img.width() != grid.width || depth.height() != grid.height ||
        depth.width() != grid.width) {
        throw std::invalid_argument("pixel_aligned_cloud: image/depth/grid size mismatch");
    }
    if (depth.channels() != 1) throw std::invalid_argument("pixel_aligned_cloud: depth must have one channel");
    if (img.channels() != 1 && img.channels() != 3) {
        throw std::invalid_argument("pixel_aligned_cloud: image must have 1 or 3 channels");
    }
    if (!(opt.opacity > 0.0 && opt.opacity <= 1.0)) throw std::invalid_argument("pixel_aligned_cloud: opacity outside (0, 1]");
    if (!(opt.scale_factor > 0.0)) throw std::invalid_argument("pixel_aligned_cloud: scale_factor must be positive");

    const double extent = pixel_angular_extent(grid);
    const Mat3 cam_to_world = pose.rotation.transpose();
    GaussianCloud cloud(0);
    cloud.reserve(static_cast<std::size_t>(grid.width) * grid.height);
    for (int v = 0; v < grid.height; ++v) {
        for (int u = 0; u < grid.width; ++u) {
            const double d = depth(v, u);
            if (!(d > 0.0) || !std::isfinite(d)) {
                throw DataError("pixel_aligned_cloud: nonpositive depth at pixel (" + std::to_string(u) + ", " +
                                std::to_string(v) + ")");
            }
            const Vec3 dir = cam_to_world * pixel_to_direction(grid, u, v);
            Gaussian3D g;
            g.position = pose.center() + d * dir;
            g.scale = Vec3::Constant(opt.scale_factor * d * extent);
            g.opacity = opt.opacity;
            const Vec3 rgb = img.channels() == 3 ? Vec3(img(v, u, 0), img(v, u, 1), img(v, u, 2))
                                                 : Vec3::Constant(img(v, u, 0));
            cloud.add_colored(g, rgb);
        }
    }
    return cloud;
}

}  // namespace yysplat
