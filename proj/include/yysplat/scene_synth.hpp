// Copyright Contributors to the yysplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "yysplat/core.hpp"
#include "yysplat/gaussians.hpp"
#include "yysplat/io.hpp"
#include "yysplat/sphere_geom.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace yysplat {

// ---------------------------------------------------------------------------
// Procedural texture: seeded 3D value noise, a fixed number of octaves.

class ValueNoise {
public:
    explicit ValueNoise(std::uint64_t seed, double base_frequency = 1.25, int octaves = 3)
        : seed_(seed), frequency_(base_frequency), octaves_(octaves) {}

    /// In [0, 1].
    double operator()(const Vec3& p, int channel = 0) const {
        double sum = 0.0, amp = 1.0, norm = 0.0, freq = frequency_;
        for (int o = 0; o < octaves_; ++o) {
            sum += amp * lattice(p * freq, static_cast<std::uint64_t>(channel * 131 + o));
            norm += amp;
            amp *= 0.5;
            freq *= 2.0;
        }
        return sum / norm;
    }

    Vec3 rgb(const Vec3& p) const {
        return Vec3(0.15 + 0.7 * (*this)(p, 0), 0.15 + 0.7 * (*this)(p, 1), 0.15 + 0.7 * (*this)(p, 2));
    }

private:
    static std::uint64_t mix(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ull;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
        return x ^ (x >> 31);
    }

    double corner(std::int64_t x, std::int64_t y, std::int64_t z, std::uint64_t salt) const {
        std::uint64_t h = mix(seed_ ^ mix(salt));
        h = mix(h ^ static_cast<std::uint64_t>(x));
        h = mix(h ^ static_cast<std::uint64_t>(y));
        h = mix(h ^ static_cast<std::uint64_t>(z));
        return static_cast<double>(h >> 11) * 0x1.0p-53;
    }

    double lattice(const Vec3& p, std::uint64_t salt) const {
        const Vec3 f = p.array().floor();
        const Vec3 t = p - f;
        auto smooth = [](double v) { return v * v * (3.0 - 2.0 * v); };
        const double sx = smooth(t.x()), sy = smooth(t.y()), sz = smooth(t.z());
        const auto ix = static_cast<std::int64_t>(f.x());
        const auto iy = static_cast<std::int64_t>(f.y());
        const auto iz = static_cast<std::int64_t>(f.z());
        auto lerp = [](double a, double b, double s) { return a + s * (b - a); };
        double c[2][2];
        for (int dy = 0; dy < 2; ++dy) {
            for (int dz = 0; dz < 2; ++dz) {
                c[dy][dz] = lerp(corner(ix, iy + dy, iz + dz, salt), corner(ix + 1, iy + dy, iz + dz, salt), sx);
            }
        }
        return lerp(lerp(c[0][0], c[0][1], sz), lerp(c[1][0], c[1][1], sz), sy);
    }

    std::uint64_t seed_;
    double frequency_;
    int octaves_;
};

// ---------------------------------------------------------------------------
// Exact geometry for ground truth.

struct GroundTruth {
    FieldImage depth;  // ray distance to the first surface, 0 where none
    LabelMap ids;      // object id, 0 = background
};

/// Analytic surfaces the scene's Gaussians were sampled from.
struct SceneSurface {
    enum class Kind { SphereShell, BoxInterior, SphereCap };
    Kind kind = Kind::SphereShell;
    Vec3 center = Vec3::Zero();
    double radius = 1.0;
    Vec3 half_extent = Vec3::Ones();
    double max_colatitude = kPi;  // SphereCap only, measured from the local +z
    int id = 1;
    /// Local-to-world rotation: cap axis and box edges follow its columns.
    Mat3 orientation = Mat3::Identity();

    /// Nearest positive hit distance along unit ray, or +inf.
    double intersect(const Vec3& origin, const Vec3& dir) const {
        constexpr double inf = std::numeric_limits<double>::infinity();
        constexpr double eps = 1e-9;
        switch (kind) {
            case Kind::SphereShell:
            case Kind::SphereCap: {
                const Vec3 oc = origin - center;
                const double b = oc.dot(dir);
                const double disc = b * b - (oc.squaredNorm() - radius * radius);
                if (disc < 0.0) return inf;
                const double s = std::sqrt(disc);
                for (const double t : {-b - s, -b + s}) {
                    if (t <= eps) continue;
                    if (kind == Kind::SphereCap) {
                        const double z = orientation.col(2).dot(oc + t * dir);
                        if (std::acos(std::clamp(z / radius, -1.0, 1.0)) > max_colatitude) continue;
                    }
                    return t;
                }
                return inf;
            }
            case Kind::BoxInterior: {
                const Vec3 o = orientation.transpose() * (origin - center);
                const Vec3 d = orientation.transpose() * dir;
                double best = inf;
                for (int a = 0; a < 3; ++a) {
                    if (d[a] == 0.0) continue;
                    const double wall = d[a] > 0.0 ? half_extent[a] : -half_extent[a];
                    const double t = (wall - o[a]) / d[a];
                    if (t > eps) best = std::min(best, t);
                }
                return best;
            }
        }
        return inf;
    }
};

struct Scene {
    std::string name;
    GaussianCloud cloud;
    std::vector<SceneSurface> surfaces;
    /// Two reference views ("ref0", "ref1") followed by target views.
    std::vector<NamedPose> views;

    GroundTruth ground_truth(const GridSpec& grid, const Pose& pose) const {
        grid.validate();
        GroundTruth gt{FieldImage(grid.height, grid.width, 1), LabelMap(grid.height, grid.width, 1)};
        const Mat3 cam_to_world = pose.rotation.transpose();
        for (int v = 0; v < grid.height; ++v) {
            for (int u = 0; u < grid.width; ++u) {
                const Vec3 dir = (cam_to_world * pixel_to_direction(grid, u, v)).normalized();
                double best = std::numeric_limits<double>::infinity();
                int id = 0;
                for (const auto& s : surfaces) {
                    const double t = s.intersect(pose.center(), dir);
                    if (t < best) {
                        best = t;
                        id = s.id;
                    }
                }
                if (std::isfinite(best)) {
                    gt.depth(v, u) = best;
                    gt.ids(v, u) = id;
                }
            }
        }
        return gt;
    }

    /// Moves the scene rigidly (x -> r x + s), together with its views.
    Scene moved(const Mat3& r, const Vec3& s) const {
        Scene out = *this;
        const Eigen::Quaterniond qr(r);
        for (std::size_t i = 0; i < out.cloud.size(); ++i) {
            Gaussian3D& g = out.cloud[i];
            g.position = r * g.position + s;
            const Eigen::Quaterniond q(g.rotation[0], g.rotation[1], g.rotation[2], g.rotation[3]);
            const Eigen::Quaterniond nq = (qr * q).normalized();
            g.rotation = Vec4(nq.w(), nq.x(), nq.y(), nq.z());
        }
        for (auto& surf : out.surfaces) {
            surf.center = r * surf.center + s;
            surf.orientation = r * surf.orientation;
        }
        for (auto& v : out.views) v.pose = v.pose.moved(r, s);
        return out;
    }
};

namespace detail {

/// Quaternion (w, x, y, z) turning local +z into `normal`.
inline Vec4 disc_orientation(const Vec3& normal) {
    const Vec3 n = normal.normalized();
    const Vec3 helper = std::abs(n.z()) < 0.9 ? Vec3::UnitZ() : Vec3::UnitX();
    const Vec3 t1 = helper.cross(n).normalized();
    const Vec3 t2 = n.cross(t1);
    Mat3 r;
    r.col(0) = t1;
    r.col(1) = t2;
    r.col(2) = n;
    Eigen::Quaterniond q(r);
    q.normalize();
    if (q.w() < 0.0) q.coeffs() *= -1.0;
    return Vec4(q.w(), q.x(), q.y(), q.z());
}

inline Gaussian3D surface_disc(const Vec3& position, const Vec3& normal, double spacing, double opacity) {
    Gaussian3D g;
    g.position = position;
    g.scale = Vec3(0.75 * spacing, 0.75 * spacing, 0.1 * spacing);
    g.rotation = disc_orientation(normal);
    g.opacity = opacity;
    return g;
}

inline std::vector<Vec3> fibonacci_sphere(int n) {
    std::vector<Vec3> pts;
    pts.reserve(static_cast<std::size_t>(n));
    const double golden = kPi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < n; ++i) {
        const double z = 1.0 - 2.0 * (i + 0.5) / n;
        const double r = std::sqrt(1.0 - z * z);
        const double phi = golden * i;
        pts.emplace_back(r * std::cos(phi), r * std::sin(phi), z);
    }
    return pts;
}

inline double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline Mat3 yaw(double a) { return Eigen::AngleAxisd(a, Vec3::UnitZ()).toRotationMatrix(); }

/// Pose of a camera at `center` whose frame is rotated by `cam_to_world`.
inline Pose camera_at(const Vec3& center, const Mat3& cam_to_world = Mat3::Identity()) {
    return Pose{cam_to_world.transpose(), center};
}

inline Scene make_shell(std::uint64_t seed) {
    (void)seed;
    Scene sc{"shell", GaussianCloud(0), {}, {}};
    const double radius = 2.0;
    const int n = 24000;
    const double spacing = radius * std::sqrt(4.0 * kPi / n);
    const Vec3 color(0.8, 0.45, 0.2);
    sc.cloud.reserve(n);
    for (const Vec3& p : fibonacci_sphere(n)) sc.cloud.add_colored(surface_disc(radius * p, p, spacing, 0.9), color);
    sc.surfaces.push_back({SceneSurface::Kind::SphereShell, Vec3::Zero(), radius, Vec3::Ones(), kPi, 1});
    sc.views = {{"ref0", camera_at(Vec3::Zero())},
                {"ref1", camera_at(Vec3(0.3, 0.0, 0.0))},
                {"target0", camera_at(Vec3(0.1, 0.1, 0.0), yaw(0.4))},
                {"target1", camera_at(Vec3(0.0, -0.1, 0.1), yaw(-0.8))}};
    return sc;
}

inline Scene make_textured_room(std::uint64_t seed) {
    Scene sc{"textured-room", GaussianCloud(0), {}, {}};
    const Vec3 half(24.0, 20.0, 12.0);
    const double spacing = 0.4;
    const ValueNoise noise(seed, 0.47);
    for (int axis = 0; axis < 3; ++axis) {
        const int a1 = (axis + 1) % 3;
        const int a2 = (axis + 2) % 3;
        const int n1 = static_cast<int>(std::round(2.0 * half[a1] / spacing));
        const int n2 = static_cast<int>(std::round(2.0 * half[a2] / spacing));
        for (const double side : {-1.0, 1.0}) {
            Vec3 normal = Vec3::Zero();
            normal[axis] = -side;
            for (int i = 0; i < n1; ++i) {
                for (int j = 0; j < n2; ++j) {
                    Vec3 p;
                    p[axis] = side * half[axis];
                    p[a1] = -half[a1] + (i + 0.5) * spacing;
                    p[a2] = -half[a2] + (j + 0.5) * spacing;
                    sc.cloud.add_colored(surface_disc(p, normal, spacing, 0.95), noise.rgb(p));
                }
            }
        }
    }
    sc.surfaces.push_back({SceneSurface::Kind::BoxInterior, Vec3::Zero(), 1.0, half, kPi, 1});
    sc.views = {{"ref0", camera_at(Vec3(-1.0, 0.0, 0.0))},
                {"ref1", camera_at(Vec3(1.0, 0.0, 0.0))},
                {"target0", camera_at(Vec3(0.0, 0.0, 0.0), yaw(0.3))},
                {"target1", camera_at(Vec3(0.5, 0.4, 0.2), yaw(-0.5))}};
    return sc;
}

inline Scene make_polar_field(std::uint64_t seed) {
    Scene sc{"polar-field", GaussianCloud(0), {}, {}};
    const double radius = 3.0;
    std::mt19937_64 rng(seed);
    const Vec3 color(0.3, 0.7, 0.9);
    const double deg = kPi / 180.0;
    // A few splats just off the pole whose footprints jointly cover it.
    const double core_colat = 5.0 * deg;
    const double core_sigma = radius * 2.0 * deg;
    const double core_phase = 2.0 * kPi * unit_uniform(rng);
    for (int i = 0; i < 2; ++i) {
        const double az = core_phase + kPi * i;
        const Vec3 dir(std::sin(core_colat) * std::cos(az), std::sin(core_colat) * std::sin(az), std::cos(core_colat));
        Gaussian3D g;
        g.position = radius * dir;
        g.scale = Vec3::Constant(core_sigma);
        g.opacity = 0.9;
        sc.cloud.add_colored(g, color);
    }
    // Dense band around the core out to 30 degrees colatitude.
    const double band_spacing = radius * 1.5 * deg;
    for (double colat = 10.0 * deg; colat <= 30.0 * deg; colat += 1.5 * deg) {
        const int n = std::max(6, static_cast<int>(std::ceil(2.0 * kPi * radius * std::sin(colat) / band_spacing)));
        for (int k = 0; k < n; ++k) {
            const double az = 2.0 * kPi * (k + 0.5 * unit_uniform(rng)) / n;
            const Vec3 dir(std::sin(colat) * std::cos(az), std::sin(colat) * std::sin(az), std::cos(colat));
            Gaussian3D g;
            g.position = radius * dir;
            g.scale = Vec3::Constant(band_spacing);
            g.opacity = 0.9;
            sc.cloud.add_colored(g, color);
        }
    }
    sc.surfaces.push_back({SceneSurface::Kind::SphereCap, Vec3::Zero(), radius, Vec3::Ones(), 30.0 * deg, 1});
    sc.views = {{"ref0", camera_at(Vec3::Zero())},
                {"ref1", camera_at(Vec3(0.2, 0.0, 0.0))},
                {"target0", camera_at(Vec3(0.0, 0.1, 0.0), yaw(0.7))}};
    return sc;
}

inline Scene make_two_objects(std::uint64_t seed) {
    Scene sc{"two-objects", GaussianCloud(0), {}, {}};
    const ValueNoise noise(seed, 2.5);
    struct Blob {
        Vec3 center;
        double radius;
        int id;
    };
    const Blob blobs[2] = {{Vec3(2.4, -0.9, 0.1), 0.8, 1}, {Vec3(0.2, 2.6, -0.2), 0.9, 2}};
    for (const Blob& b : blobs) {
        const int n = static_cast<int>(4.0 * kPi * b.radius * b.radius / (0.04 * 0.04));
        const double spacing = b.radius * std::sqrt(4.0 * kPi / n);
        for (const Vec3& p : fibonacci_sphere(n)) {
            const Vec3 pos = b.center + b.radius * p;
            sc.cloud.add_colored(surface_disc(pos, p, spacing, 0.95), noise.rgb(pos + Vec3::Constant(10.0 * b.id)));
        }
        sc.surfaces.push_back({SceneSurface::Kind::SphereShell, b.center, b.radius, Vec3::Ones(), kPi, b.id});
    }
    sc.views = {{"ref0", camera_at(Vec3::Zero())},
                {"ref1", camera_at(Vec3(-0.3, -0.4, 0.0), yaw(0.2))},
                {"target0", camera_at(Vec3(-0.15, -0.2, 0.0))}};
    return sc;
}

}  // namespace detail

inline const std::vector<std::string>& scene_names() {
    static const std::vector<std::string> names = {"shell", "textured-room", "polar-field", "two-objects"};
    return names;
}

/// Builds one of the named synthetic scenes. Deterministic in (name, seed).
inline Scene make_scene(const std::string& name, std::uint64_t seed = 0) {
    if (name == "shell") return detail::make_shell(seed);
    if (name == "textured-room") return detail::make_textured_room(seed);
    if (name == "polar-field") return detail::make_polar_field(seed);
    if (name == "two-objects") return detail::make_two_objects(seed);
    throw std::invalid_argument("make_scene: unknown descriptor '" + name + "'");
}

}  // namespace yysplat
