// Copyright Contributors to the yysplat Project
// SPDX-License-Identifier: Apache-2.0

#include "yysplat/gaussians.hpp"
#include "yysplat/metrics.hpp"
#include "yysplat/rasterizer.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace yysplat;

namespace {

FieldImage smooth_image(const GridSpec& g) {
    FieldImage img(g.height, g.width, 3);
    for (int v = 0; v < g.height; ++v) {
        for (int u = 0; u < g.width; ++u) {
            const Vec3 d = pixel_to_direction(g, u, v);
            img(v, u, 0) = 0.5 + 0.3 * d.x();
            img(v, u, 1) = 0.5 + 0.2 * d.y() * d.z();
            img(v, u, 2) = 0.4 + 0.3 * d.z();
        }
    }
    return img;
}

}  // namespace

TEST(PixelAligned, SmallGridAtConstantDepth) {
    const GridSpec g = GridSpec::equirect(2);
    const FieldImage img(2, 4, 3, 0.5);
    const FieldImage depth(2, 4, 1, 3.0);
    const Pose pose{Mat3::Identity(), Vec3(1.0, 2.0, 3.0)};
    const GaussianCloud cloud = pixel_aligned_cloud(img, depth, g, pose);
    ASSERT_EQ(cloud.size(), 8u);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        EXPECT_NEAR((cloud[i].position - pose.center()).norm(), 3.0, 1e-9);
        EXPECT_NEAR(eval_sh(0, cloud.sh(i), Vec3::UnitX())[1], 0.5, 1e-12);
        EXPECT_EQ(cloud[i].opacity, 1.0);
    }
    EXPECT_NEAR((cloud[0].position - pose.center()).normalized().dot(pixel_to_direction(g, 0, 0)), 1.0, 1e-12);
}

TEST(PixelAligned, DoublingDepthDoublesDistanceAndScale) {
    const GridSpec g = GridSpec::yin(4);
    std::mt19937_64 rng(1);
    const FieldImage img = test::random_image(4, 12, 3, rng);
    const FieldImage depth = test::random_image(4, 12, 1, rng, 0.5, 4.0);
    FieldImage depth2 = depth;
    for (double& v : depth2.data()) v *= 2.0;
    const Pose pose{test::random_rotation(rng), Vec3(0.1, 0.2, -0.3)};
    const GaussianCloud a = pixel_aligned_cloud(img, depth, g, pose);
    const GaussianCloud b = pixel_aligned_cloud(img, depth2, g, pose);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_NEAR((b[i].position - pose.center()).norm(), 2.0 * (a[i].position - pose.center()).norm(), 1e-9);
        EXPECT_NEAR(b[i].scale.x(), 2.0 * a[i].scale.x(), 1e-12);
        EXPECT_EQ(a[i].scale.x(), a[i].scale.z());
    }
}

TEST(PixelAligned, RejectsBadInputs) {
    const GridSpec g = GridSpec::yin(2);
    FieldImage depth(2, 6, 1, 1.0);
    depth(1, 3) = 0.0;
    EXPECT_THROW(pixel_aligned_cloud(FieldImage(2, 6, 3), depth, g, Pose{}), DataError);
    depth(1, 3) = -2.0;
    EXPECT_THROW(pixel_aligned_cloud(FieldImage(2, 6, 3), depth, g, Pose{}), DataError);
    EXPECT_THROW(pixel_aligned_cloud(FieldImage(2, 5, 3), FieldImage(2, 5, 1, 1.0), g, Pose{}),
                 std::invalid_argument);
    PixelAlignedOptions opt;
    opt.opacity = 0.0;
    EXPECT_THROW(pixel_aligned_cloud(FieldImage(2, 6, 3), FieldImage(2, 6, 1, 1.0), g, Pose{}, opt),
                 std::invalid_argument);
}

TEST(PixelAligned, EquivariantUnderRigidMotion) {
    std::mt19937_64 rng(3);
    const GridSpec g = GridSpec::yang(4);
    const FieldImage img = test::random_image(4, 12, 3, rng);
    const FieldImage depth = test::random_image(4, 12, 1, rng, 0.5, 4.0);
    const Pose pose{test::random_rotation(rng), Vec3(0.5, -0.1, 0.2)};
    const Mat3 r = test::random_rotation(rng);
    const Vec3 s(-2.0, 1.0, 0.5);
    const GaussianCloud a = pixel_aligned_cloud(img, depth, g, pose);
    const GaussianCloud b = pixel_aligned_cloud(img, depth, g, pose.moved(r, s));
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_NEAR((b[i].position - (r * a[i].position + s)).norm(), 0.0, 1e-9);
        EXPECT_EQ(a[i].scale, b[i].scale);
    }
}

TEST(PixelAligned, SelfReprojectionAbove30dB) {
    const GridSpec g = GridSpec::yin(32);
    const FieldImage img = smooth_image(g);
    const Pose pose{Mat3::Identity(), Vec3(0.2, 0.0, 0.1)};
    const GaussianCloud cloud = pixel_aligned_cloud(img, FieldImage(32, 96, 1, 2.0), g, pose);
    const RenderOutput r = rasterize(cloud, g, pose);
    EXPECT_GE(psnr(r.image, img), 30.0);
}

TEST(Sh, DegreeZeroAndOne) {
    const std::vector<double> dc = {1.0, 2.0, 3.0};
    const Vec3 c = eval_sh(0, dc, Vec3::UnitZ());
    EXPECT_DOUBLE_EQ(c.x(), kShC0);
    EXPECT_DOUBLE_EQ(c.z(), 3.0 * kShC0);
    std::vector<double> c1(12, 0.0);
    c1[3 * 2] = 1.0;  // z-band on the red channel
    EXPECT_NEAR(eval_sh(1, c1, Vec3::UnitZ()).x(), 0.4886025119029199, 1e-15);
    EXPECT_NEAR(eval_sh(1, c1, -Vec3::UnitZ()).x(), -0.4886025119029199, 1e-15);
    EXPECT_NEAR(eval_sh(1, c1, Vec3::UnitX()).x(), 0.0, 1e-15);
}

TEST(Sh, HigherBandsIntegrateToZero) {
    // Every non-constant real SH basis function has zero mean on the sphere.
    std::mt19937_64 rng(7);
    for (int k = 1; k < 16; ++k) {
        std::vector<double> c(48, 0.0);
        c[3 * k] = 1.0;
        double sum = 0.0;
        const int n = 200000;
        for (int i = 0; i < n; ++i) sum += eval_sh(3, c, test::random_direction(rng)).x();
        EXPECT_NEAR(sum / n, 0.0, 5e-3) << k;
    }
}

TEST(Covariance, MatchesRotatedScale) {
    Gaussian3D g;
    g.scale = Vec3(1.0, 2.0, 3.0);
    const double h = std::sqrt(0.5);
    g.rotation = Vec4(h, 0.0, 0.0, h);  // 90 degrees about z
    const Mat3 cov = g.covariance();
    EXPECT_NEAR(cov(0, 0), 4.0, 1e-12);
    EXPECT_NEAR(cov(1, 1), 1.0, 1e-12);
    EXPECT_NEAR(cov(2, 2), 9.0, 1e-12);
    EXPECT_NEAR(cov(0, 1), 0.0, 1e-12);
}

TEST(Cloud, AddValidatesCoefficientCount) {
    GaussianCloud c(1);
    EXPECT_THROW(c.add(Gaussian3D{}, std::vector<double>(3)), std::invalid_argument);
    EXPECT_THROW(c.add_colored(Gaussian3D{}, Vec3::Zero()), std::logic_error);
    EXPECT_THROW(GaussianCloud(4), std::invalid_argument);
    GaussianCloud ok(0);
    Gaussian3D bad;
    bad.opacity = 0.0;
    ok.add_colored(bad, Vec3::Zero());
    EXPECT_THROW(validate_cloud(ok), DataError);
}
