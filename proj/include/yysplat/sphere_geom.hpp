// Copyright Contributors to the yysplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "yysplat/core.hpp"

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace yysplat {

/// Elevation theta in [-pi/2, pi/2] measured from the equator (+ up), azimuth
/// phi in [-pi, pi) increasing eastward.
struct Spherical {
    double theta = 0.0;
    double phi = 0.0;
};

inline double wrap_azimuth(double phi) {
    double w = std::fmod(phi + kPi, 2.0 * kPi);
    if (w < 0.0) w += 2.0 * kPi;
    w -= kPi;
    return w >= kPi ? -kPi : w;
}

inline Vec3 to_direction(const Spherical& s) {
    const double c = std::cos(s.theta);
    return {c * std::cos(s.phi), c * std::sin(s.phi), std::sin(s.theta)};
}

/// Accepts any nonzero vector.
inline Spherical to_spherical(const Vec3& d) {
    const double rho = std::hypot(d.x(), d.y());
    double phi = std::atan2(d.y(), d.x());
    if (phi >= kPi) phi = -kPi;
    return {std::atan2(d.z(), rho), phi};
}

/// Angle between two nonzero vectors; accurate near 0 and pi.
inline double angle_between(const Vec3& a, const Vec3& b) {
    return std::atan2(a.cross(b).norm(), a.dot(b));
}

// ---------------------------------------------------------------------------
// Yin-Yang

inline constexpr double kYinThetaMax = kPi / 4.0;
inline constexpr double kYinPhiMax = 3.0 * kPi / 4.0;

/// Closed bounds |theta| <= pi/4, |phi| <= 3pi/4.
inline bool yin_contains(const Spherical& s) {
    return std::abs(s.theta) <= kYinThetaMax && std::abs(s.phi) <= kYinPhiMax;
}

/// Yin -> Yang rotation. Integer, orthogonal, and its own inverse.
inline Mat3 yang_matrix() {
    Mat3 m;
    m << -1, 0, 0,
          0, 0, 1,
          0, 1, 0;
    return m;
}

inline Vec3 yang_transform(const Vec3& d) { return {-d.x(), d.z(), d.y()}; }

inline bool yang_contains(const Vec3& d) { return yin_contains(to_spherical(yang_transform(d))); }

/// Angular distance from a Yin-frame direction to the Yin patch boundary.
/// Zero for directions outside the patch.
inline double yin_boundary_distance(const Vec3& d) {
    const Spherical s = to_spherical(d);
    if (!yin_contains(s)) return 0.0;
    const Vec3 u = d.normalized();
    double best = kYinThetaMax - std::abs(s.theta);
    for (const double phi_b : {-kYinPhiMax, kYinPhiMax}) {
        const Vec3 along(std::cos(phi_b), std::sin(phi_b), 0.0);
        const Vec3 normal(-std::sin(phi_b), std::cos(phi_b), 0.0);
        const double off_plane = u.dot(normal);
        const Vec3 foot = u - off_plane * normal;
        const double foot_lat = std::atan2(foot.z(), foot.dot(along));
        double edge;
        if (foot.dot(along) > 0.0 && std::abs(foot_lat) <= kYinThetaMax) {
            edge = std::asin(std::min(1.0, std::abs(off_plane)));
        } else {
            edge = std::min(angle_between(u, to_direction({kYinThetaMax, phi_b})),
                            angle_between(u, to_direction({-kYinThetaMax, phi_b})));
        }
        best = std::min(best, edge);
    }
    return best;
}

// ---------------------------------------------------------------------------
// Grids

enum class GridFamily { Equirect, Yin, Yang, CubeFace };

inline std::string to_string(GridFamily f) {
    switch (f) {
        case GridFamily::Equirect: return "equirect";
        case GridFamily::Yin: return "yin";
        case GridFamily::Yang: return "yang";
        case GridFamily::CubeFace: return "cubeface";
    }
    return "?";
}

struct GridSpec {
    GridFamily family = GridFamily::Equirect;
    int height = 0;
    int width = 0;
    int face = 0;  // CubeFace only: 0..5 = +x, -x, +y, -y, +z, -z

    static GridSpec equirect(int height) { return {GridFamily::Equirect, height, 2 * height, 0}; }
    static GridSpec yin(int height) { return {GridFamily::Yin, height, 3 * height, 0}; }
    static GridSpec yang(int height) { return {GridFamily::Yang, height, 3 * height, 0}; }
    static GridSpec cube_face(int face, int resolution) {
        return {GridFamily::CubeFace, resolution, resolution, face};
    }

    bool is_yinyang() const { return family == GridFamily::Yin || family == GridFamily::Yang; }

    void validate() const {
        if (height < 1 || width < 1) throw std::invalid_argument("GridSpec: empty grid");
        switch (family) {
            case GridFamily::Equirect:
                if (width != 2 * height) throw std::invalid_argument("GridSpec: equirect needs width = 2*height");
                break;
            case GridFamily::Yin:
            case GridFamily::Yang:
                if (width != 3 * height) throw std::invalid_argument("GridSpec: yin/yang needs width = 3*height");
                break;
            case GridFamily::CubeFace:
                if (width != height) throw std::invalid_argument("GridSpec: cube face must be square");
                if (face < 0 || face > 5) throw std::invalid_argument("GridSpec: cube face index out of range");
                break;
        }
    }

    bool operator==(const GridSpec&) const = default;
};

/// World-to-face rotation of a 90 degree perspective face: rows are the
/// face's right, down and forward axes.
inline Mat3 cube_face_rotation(int face) {
    static const std::array<std::pair<Vec3, Vec3>, 6> basis = {{
        {Vec3(1, 0, 0), Vec3(0, 0, -1)},
        {Vec3(-1, 0, 0), Vec3(0, 0, -1)},
        {Vec3(0, 1, 0), Vec3(0, 0, -1)},
        {Vec3(0, -1, 0), Vec3(0, 0, -1)},
        {Vec3(0, 0, 1), Vec3(1, 0, 0)},
        {Vec3(0, 0, -1), Vec3(-1, 0, 0)},
    }};
    const auto& [forward, down] = basis.at(static_cast<std::size_t>(face));
    Mat3 r;
    r.row(0) = down.cross(forward);
    r.row(1) = down;
    r.row(2) = forward;
    return r;
}

/// Direction at continuous pixel coordinates (x, y); pixel (u, v) has its
/// center at (u + 0.5, v + 0.5). Directions are in the grid owner's camera
/// frame (for Yang, the Yin-local direction mapped through M).
inline Vec3 grid_direction(const GridSpec& g, double x, double y) {
    switch (g.family) {
        case GridFamily::Equirect: {
            const double phi = 2.0 * kPi * x / g.width - kPi;
            const double theta = kPi / 2.0 - kPi * y / g.height;
            return to_direction({theta, phi});
        }
        case GridFamily::Yin:
        case GridFamily::Yang: {
            const double phi = 1.5 * kPi * x / g.width - 0.75 * kPi;
            const double theta = kYinThetaMax - 0.5 * kPi * y / g.height;
            const Vec3 local = to_direction({theta, phi});
            return g.family == GridFamily::Yin ? local : yang_transform(local);
        }
        case GridFamily::CubeFace: {
            const double s = 2.0 * x / g.width - 1.0;
            const double t = 2.0 * y / g.height - 1.0;
            return cube_face_rotation(g.face).transpose() * Vec3(s, t, 1.0).normalized();
        }
    }
    return Vec3::Zero();
}

inline Vec3 pixel_to_direction(const GridSpec& g, int u, int v) {
    if (u < 0 || u >= g.width || v < 0 || v >= g.height) {
        throw std::out_of_range("pixel_to_direction: pixel (" + std::to_string(u) + ", " +
                                std::to_string(v) + ") outside " + std::to_string(g.width) + "x" +
                                std::to_string(g.height) + " grid");
    }
    return grid_direction(g, u + 0.5, v + 0.5);
}

struct PixelCoord {
    double u = 0.0;
    double v = 0.0;
    bool inside = false;
};

/// Continuous pixel coordinates of a direction (pixel centers at +0.5).
/// `inside` reports whether the direction lies within the grid's angular
/// bounds; the coordinates are still returned when it does not.
inline PixelCoord direction_to_pixel(const GridSpec& g, const Vec3& d) {
    switch (g.family) {
        case GridFamily::Equirect: {
            const Spherical s = to_spherical(d);
            return {(s.phi + kPi) / (2.0 * kPi) * g.width, (kPi / 2.0 - s.theta) / kPi * g.height, true};
        }
        case GridFamily::Yin:
        case GridFamily::Yang: {
            const Spherical s = to_spherical(g.family == GridFamily::Yin ? d : yang_transform(d));
            return {(s.phi + 0.75 * kPi) / (1.5 * kPi) * g.width,
                    (kYinThetaMax - s.theta) / (0.5 * kPi) * g.height, yin_contains(s)};
        }
        case GridFamily::CubeFace: {
            const Vec3 c = cube_face_rotation(g.face) * d;
            if (c.z() <= 0.0) return {0.0, 0.0, false};
            const double s = c.x() / c.z();
            const double t = c.y() / c.z();
            return {(s + 1.0) * 0.5 * g.width, (t + 1.0) * 0.5 * g.height,
                    std::abs(s) <= 1.0 && std::abs(t) <= 1.0};
        }
    }
    return {};
}

/// Solid angle of pixel (u, v) for the latitude-longitude families.
inline double cell_solid_angle(const GridSpec& g, int u, int v) {
    (void)u;
    double dphi, top, bottom;
    switch (g.family) {
        case GridFamily::Equirect:
            dphi = 2.0 * kPi / g.width;
            top = kPi / 2.0 - kPi * v / g.height;
            bottom = kPi / 2.0 - kPi * (v + 1) / g.height;
            break;
        case GridFamily::Yin:
        case GridFamily::Yang:
            dphi = 1.5 * kPi / g.width;
            top = kYinThetaMax - 0.5 * kPi * v / g.height;
            bottom = kYinThetaMax - 0.5 * kPi * (v + 1) / g.height;
            break;
        default:
            throw std::invalid_argument("cell_solid_angle: latitude-longitude grids only");
    }
    return dphi * (std::sin(top) - std::sin(bottom));
}

/// Angular height of one pixel row.
inline double pixel_angular_extent(const GridSpec& g) {
    switch (g.family) {
        case GridFamily::Equirect: return kPi / g.height;
        case GridFamily::Yin:
        case GridFamily::Yang: return 0.5 * kPi / g.height;
        case GridFamily::CubeFace: return 2.0 * std::atan(1.0 / g.height);
    }
    return 0.0;
}

struct CubeFaceCamera {
    GridSpec grid;
    Pose pose;  // rig -> face rotation, zero translation
};

/// Six 90 degree perspective faces of the cube that touches the unit sphere.
inline std::vector<CubeFaceCamera> cubemap_rig(int face_resolution) {
    if (face_resolution < 1) throw std::invalid_argument("cubemap_rig: face_resolution must be >= 1");
    std::vector<CubeFaceCamera> rig;
    for (int f = 0; f < 6; ++f) {
        rig.push_back({GridSpec::cube_face(f, face_resolution), Pose{cube_face_rotation(f), Vec3::Zero()}});
    }
    return rig;
}

}  // namespace yysplat
