// Copyright Contributors to the yysplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "yysplat/core.hpp"
#include "yysplat/gaussians.hpp"

#include <random>

namespace yysplat::test {

inline Vec3 random_direction(std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Vec3 v;
    do {
        v = Vec3(n(rng), n(rng), n(rng));
    } while (v.norm() < 1e-6);
    return v.normalized();
}

inline Mat3 random_rotation(std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
    return q.normalized().toRotationMatrix();
}

inline FieldImage random_image(int h, int w, int c, std::mt19937_64& rng, double lo = 0.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    FieldImage img(h, w, c);
    for (double& v : img.data()) v = u(rng);
    return img;
}

/// Gaussians in a shell of radii [r0, r1] around the origin.
inline GaussianCloud random_cloud(int n, std::mt19937_64& rng, double r0 = 2.0, double r1 = 4.0,
                                  double s0 = 0.05, double s1 = 0.3) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> nd(0.0, 1.0);
    GaussianCloud cloud(0);
    for (int i = 0; i < n; ++i) {
        Gaussian3D g;
        g.position = (r0 + (r1 - r0) * u(rng)) * random_direction(rng);
        g.scale = Vec3(s0 + (s1 - s0) * u(rng), s0 + (s1 - s0) * u(rng), s0 + (s1 - s0) * u(rng));
        const Eigen::Quaterniond q = Eigen::Quaterniond(nd(rng), nd(rng), nd(rng), nd(rng)).normalized();
        g.rotation = Vec4(q.w(), q.x(), q.y(), q.z());
        g.opacity = 0.2 + 0.75 * u(rng);
        cloud.add_colored(g, Vec3(u(rng), u(rng), u(rng)));
    }
    return cloud;
}

}  // namespace yysplat::test
