// Copyright Contributors to the yysplat Project
// SPDX-License-Identifier: Apache-2.0

#include "yysplat/scene_synth.hpp"
#include "yysplat/sweep.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

using namespace yysplat;

namespace {

FieldImage normalized_features(int h, int w, int c, std::mt19937_64& rng) {
    FieldImage f = test::random_image(h, w, c, rng, -1.0, 1.0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double n = 0.0;
            for (const double v : f.pixel(y, x)) n += v * v;
            n = std::sqrt(n);
            for (double& v : f.pixel(y, x)) v /= n;
        }
    }
    return f;
}

double smooth_luma(const Vec3& d) {
    return 0.5 + 0.2 * d.x() + 0.15 * d.y() * d.z() - 0.1 * d.z() * d.z() + 0.1 * d.x() * d.y() * d.y();
}

FieldImage sampled_equirect(int h, const std::function<double(const Vec3&)>& f) {
    const GridSpec g = GridSpec::equirect(h);
    FieldImage img(g.height, g.width, 1);
    for (int v = 0; v < g.height; ++v) {
        for (int u = 0; u < g.width; ++u) img(v, u) = f(pixel_to_direction(g, u, v));
    }
    return img;
}

CostVolume synthetic_volume(const GridSpec& g, const DepthCandidates& cands) {
    CostVolume cv{g, cands, {}, {}};
    const std::size_t n = static_cast<std::size_t>(g.height) * g.width * cands.size();
    cv.scores.assign(n, 0.0);
    cv.validity.assign(n, 2);
    return cv;
}

}  // namespace

TEST(DepthCandidates, Examples) {
    const DepthCandidates c = depth_candidates(1.0, 100.0, 4);
    ASSERT_EQ(c.size(), 4);
    EXPECT_EQ(c.values[0], 1.0);
    EXPECT_NEAR(c.values[1], 1.49254, 1e-5);
    EXPECT_NEAR(c.values[2], 2.94118, 1e-5);
    EXPECT_EQ(c.values[3], 100.0);
    const DepthCandidates two = depth_candidates(0.5, 3.0, 2);
    EXPECT_EQ(two.values, (std::vector<double>{0.5, 3.0}));
}

TEST(DepthCandidates, Errors) {
    EXPECT_THROW(depth_candidates(0.0, 10.0, 4), std::invalid_argument);
    EXPECT_THROW(depth_candidates(5.0, 5.0, 4), std::invalid_argument);
    EXPECT_THROW(depth_candidates(1.0, 10.0, 1), std::invalid_argument);
    EXPECT_THROW(depth_candidates(1.0, std::numeric_limits<double>::infinity(), 4), std::invalid_argument);
}

TEST(DepthCandidates, UniformInInverseDepth) {
    const DepthCandidates c = depth_candidates(0.7, 42.0, 64);
    const double step = 1.0 / c.values[1] - 1.0 / c.values[0];
    for (int k = 1; k < c.size(); ++k) {
        EXPECT_NEAR(1.0 / c.values[k] - 1.0 / c.values[k - 1], step, 1e-12);
        EXPECT_LT(c.values[k - 1], c.values[k]);
        EXPECT_EQ(c.nearest_index(c.values[k]), k);
    }
}

TEST(Features, ConstantImageGivesZeros) {
    const FieldImage f = extract_features(FieldImage(12, 36, 3, 0.4));
    EXPECT_EQ(f.channels(), feature_channels(5));
    EXPECT_EQ(f.channels(), 75);
    for (const double v : f.data()) EXPECT_EQ(v, 0.0);
}

TEST(Features, UnitNormOrZeroAndDeterministic) {
    std::mt19937_64 rng(4);
    const FieldImage img = test::random_image(12, 36, 3, rng);
    const FieldImage f = extract_features(img, 3);
    EXPECT_EQ(f.channels(), 27);
    for (int y = 0; y < f.height(); ++y) {
        for (int x = 0; x < f.width(); ++x) {
            double n = 0.0;
            for (const double v : f.pixel(y, x)) n += v * v;
            EXPECT_TRUE(n == 0.0 || std::abs(n - 1.0) < 1e-12);
        }
    }
    EXPECT_EQ(extract_features(img, 3), f);
}

TEST(Features, WindowValidation) {
    EXPECT_THROW(extract_features(FieldImage(4, 12, 1), 5), std::invalid_argument);
    EXPECT_THROW(extract_features(FieldImage(8, 24, 1), 4), std::invalid_argument);
    EXPECT_THROW(extract_features(FieldImage(8, 24, 0), 3), std::invalid_argument);
}

TEST(SphereFeatures, YangMatchesYinOfRotatedScene) {
    // Yang features of f equal Yin features of f o M when the pole is moved by M.
    const Mat3 m = yang_matrix();
    const FieldImage a = sampled_equirect(256, smooth_luma);
    const FieldImage b = sampled_equirect(256, [&](const Vec3& d) { return smooth_luma(m * d); });
    const Vec3 axis = Vec3(0.3, -0.5, 0.8).normalized();
    const FieldImage fa = extract_sphere_features(a, GridSpec::yang(24), axis);
    const FieldImage fb = extract_sphere_features(b, GridSpec::yin(24), m * axis);
    ASSERT_TRUE(fa.same_shape(fb));
    double worst = 0.0;
    for (std::size_t i = 0; i < fa.size(); ++i) worst = std::max(worst, std::abs(fa.data()[i] - fb.data()[i]));
    EXPECT_LT(worst, 1e-2);
}

TEST(SphereFeatures, ConstantAndShapeChecks) {
    const FieldImage f = extract_sphere_features(FieldImage(16, 32, 3, 0.7), GridSpec::yin(8), Vec3::UnitX(), 3);
    EXPECT_EQ(f.height(), 8);
    EXPECT_EQ(f.width(), 24);
    EXPECT_EQ(f.channels(), 27);
    for (const double v : f.data()) EXPECT_EQ(v, 0.0);
    EXPECT_THROW(extract_sphere_features(FieldImage(16, 30, 1), GridSpec::yin(8), Vec3::UnitX()),
                 std::invalid_argument);
    EXPECT_THROW(extract_sphere_features(FieldImage(16, 32, 1), GridSpec::yin(8), Vec3::Zero()),
                 std::invalid_argument);
}

TEST(Warp, IdentityPoseReproducesFeatures) {
    std::mt19937_64 rng(12);
    const GridSpec g = GridSpec::yin(8);
    const FieldImage feat = normalized_features(8, 24, 6, rng);
    const Pose p{test::random_rotation(rng), Vec3(0.3, -0.2, 1.0)};
    const DepthCandidates cands = depth_candidates(1.0, 10.0, 5);
    const WarpedFeatures w = warp_feature(feat, g, g, p, p, cands);
    for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 24; ++x) {
            for (int k = 0; k < cands.size(); ++k) {
                EXPECT_EQ(w.mask_at(y, x, k), 1.0);
                const PixelCoord c = warp_coordinate(g, x, y, cands.values[k], p, p, g);
                EXPECT_NEAR(c.u, x + 0.5, 1e-9);
                EXPECT_NEAR(c.v, y + 0.5, 1e-9);
                const auto f = w.feature(y, x, k);
                for (int ch = 0; ch < 6; ++ch) EXPECT_NEAR(f[ch], feat(y, x, ch), 1e-6);
            }
        }
    }
}

TEST(Warp, MatchesClosedFormEpipolarProjection) {
    // Source camera translated by b along +x; the warped point is D d - b.
    const GridSpec g = GridSpec::yin(32);
    const double b = 0.4;
    const Pose p1{}, p2{Mat3::Identity(), Vec3(b, 0, 0)};
    for (const double depth : {1.0, 2.5, 10.0}) {
        for (int v = 2; v < g.height; v += 5) {
            for (int u = 30; u < 70; u += 7) {
                const Vec3 d = pixel_to_direction(g, u, v);
                const Vec3 q = depth * d - Vec3(b, 0, 0);
                const double phi = std::atan2(q.y(), q.x());
                const double theta = std::atan2(q.z(), std::hypot(q.x(), q.y()));
                const double eu = (phi + 0.75 * kPi) / (1.5 * kPi) * g.width;
                const double ev = (kPi / 4 - theta) / (0.5 * kPi) * g.height;
                const PixelCoord c = warp_coordinate(g, u, v, depth, p1, p2, g);
                if (!c.inside) continue;
                EXPECT_NEAR(c.u, eu, 0.5);
                EXPECT_NEAR(c.v, ev, 0.5);
            }
        }
    }
}

TEST(Warp, RequiresYinYangGrids) {
    const DepthCandidates cands = depth_candidates(1.0, 2.0, 2);
    EXPECT_THROW(warp_feature(FieldImage(8, 16, 1), GridSpec::equirect(8), GridSpec::yin(8), Pose{}, Pose{}, cands),
                 std::invalid_argument);
}

TEST(Blend, SingleSourceIsExact) {
    std::mt19937_64 rng(2);
    WarpedFeatures a(2, 3, 4, 2), b(2, 3, 4, 2);
    for (double& v : a.data) v = std::uniform_real_distribution<double>(-1, 1)(rng);
    for (double& v : b.data) v = std::uniform_real_distribution<double>(-1, 1)(rng);
    for (double& m : a.mask) m = 1.0;
    const WarpedFeatures out = blend_warped(a, b);
    EXPECT_EQ(out.data, a.data);
    const WarpedFeatures rev = blend_warped(b, a);
    EXPECT_EQ(rev.data, a.data);
    for (const double m : out.mask) EXPECT_EQ(m, 1.0);
}

TEST(Blend, BothValidAverages) {
    WarpedFeatures a(1, 2, 3, 1), b(1, 2, 3, 1);
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        a.data[i] = 0.2 * i;
        b.data[i] = 1.0 - 0.1 * i;
    }
    a.mask.assign(a.mask.size(), 1.0);
    b.mask.assign(b.mask.size(), 1.0);
    const WarpedFeatures out = blend_warped(a, b);
    const WarpedFeatures sym = blend_warped(b, a);
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        EXPECT_DOUBLE_EQ(out.data[i], 0.5 * (a.data[i] + b.data[i]));
        EXPECT_EQ(out.data[i], sym.data[i]);
    }
    for (const double m : out.mask) EXPECT_EQ(m, 2.0);
    const WarpedFeatures none = blend_warped(WarpedFeatures(1, 1, 2, 1), WarpedFeatures(1, 1, 2, 1));
    EXPECT_EQ(none.data, (std::vector<double>{0.0, 0.0}));
    EXPECT_THROW(blend_warped(WarpedFeatures(1, 1, 2, 1), WarpedFeatures(1, 1, 3, 1)), std::invalid_argument);
}

TEST(CostVolume, ScaledDotProduct) {
    const GridSpec g = GridSpec::yin(1);
    const DepthCandidates cands = depth_candidates(1.0, 2.0, 2);
    const int f = 16;
    FieldImage target(1, 3, f, 1.0);
    WarpedFeatures w(1, 3, f, 2);
    w.mask.assign(w.mask.size(), 1.0);
    for (int x = 0; x < 3; ++x) {
        auto a = w.feature(0, x, 0);
        std::fill(a.begin(), a.end(), 1.0);
        auto b = w.feature(0, x, 1);
        for (int c = 0; c < f; ++c) b[c] = c % 2 == 0 ? 1.0 : -1.0;
    }
    const CostVolume cv = cost_volume(target, g, w, cands);
    EXPECT_DOUBLE_EQ(cv.score(0, 0, 0), std::sqrt(16.0));
    EXPECT_DOUBLE_EQ(cv.score(0, 1, 1), 0.0);
    EXPECT_EQ(cv.valid(0, 2, 1), 1);
}

TEST(CostVolume, BoundedByCauchySchwarzAndBilinear) {
    std::mt19937_64 rng(21);
    const GridSpec g = GridSpec::yin(4);
    const DepthCandidates cands = depth_candidates(1.0, 5.0, 3);
    const int f = 12;
    const FieldImage t = normalized_features(4, 12, f, rng);
    const FieldImage src = normalized_features(4, 12, f, rng);
    const Pose p1{}, p2{test::random_rotation(rng), Vec3(0.1, 0.2, 0.0)};
    const WarpedFeatures w = warp_feature(src, g, g, p1, p2, cands);
    const CostVolume cv = cost_volume(t, g, w, cands);
    for (const double s : cv.scores) EXPECT_LE(std::abs(s), 1.0 / std::sqrt(f) + 1e-12);

    FieldImage t2 = t;
    for (double& v : t2.data()) v *= -3.0;
    const CostVolume cv2 = cost_volume(t2, g, w, cands);
    for (std::size_t i = 0; i < cv.scores.size(); ++i) EXPECT_NEAR(cv2.scores[i], -3.0 * cv.scores[i], 1e-12);
    EXPECT_THROW(cost_volume(FieldImage(4, 12, f + 1), g, w, cands), std::invalid_argument);
}

TEST(CostVolume, FusedSweepMatchesThreeStepPath) {
    std::mt19937_64 rng(31);
    const int f = 8;
    const GridSpec yin = GridSpec::yin(6), yang = GridSpec::yang(6);
    const FieldImage t = normalized_features(6, 18, f, rng);
    const FieldImage sa = normalized_features(6, 18, f, rng);
    const FieldImage sb = normalized_features(6, 18, f, rng);
    const Pose p1{test::random_rotation(rng), Vec3(0, 0, 0)};
    const Pose p2{test::random_rotation(rng), Vec3(0.5, -0.3, 0.2)};
    const DepthCandidates cands = depth_candidates(0.5, 20.0, 7);
    for (const GridSpec& target : {yin, yang}) {
        const WarpedFeatures w =
            blend_warped(warp_feature(sa, yin, target, p1, p2, cands), warp_feature(sb, yang, target, p1, p2, cands));
        const CostVolume a = cost_volume(t, target, w, cands);
        const CostVolume b = sweep_cost_volume(t, target, sa, sb, p1, p2, cands);
        ASSERT_EQ(a.scores.size(), b.scores.size());
        for (std::size_t i = 0; i < a.scores.size(); ++i) EXPECT_NEAR(a.scores[i], b.scores[i], 1e-12);
        EXPECT_EQ(a.validity, b.validity);
    }
}

TEST(CostVolume, EveryCellSeesAtLeastOneSourceGrid) {
    std::mt19937_64 rng(5);
    const FieldImage t = normalized_features(6, 18, 4, rng);
    const FieldImage s = normalized_features(6, 18, 4, rng);
    const Pose p1{}, p2{test::random_rotation(rng), Vec3(0.3, 0, 0)};
    const CostVolume cv = sweep_cost_volume(t, GridSpec::yang(6), s, s, p1, p2, depth_candidates(1, 10, 4));
    for (const auto v : cv.validity) EXPECT_GE(v, 1);
}

TEST(CostVolume, StackLayout) {
    const GridSpec g = GridSpec::yin(2);
    CostVolume cv = synthetic_volume(g, depth_candidates(1, 4, 3));
    cv.score(1, 5, 2) = 7.0;
    const FieldImage stack = cost_volume_stack(cv);
    EXPECT_EQ(stack.height(), 6);
    EXPECT_EQ(stack(2 * 2 + 1, 5), 7.0);
    EXPECT_EQ(cv.slice(2)(1, 5), 7.0);
}

TEST(Argmax, TiesGoToNearerCandidate) {
    const DepthCandidates cands = depth_candidates(1.0, 8.0, 5);
    CostVolume cv = synthetic_volume(GridSpec::yin(1), cands);
    EXPECT_EQ(best_candidate(cv, 0, 0), 0);
    cv.score(0, 1, 2) = 0.5;
    cv.score(0, 1, 4) = 0.5;
    EXPECT_EQ(best_candidate(cv, 0, 1), 2);
    for (int k = 0; k < cands.size(); ++k) {
        CostVolume peak = synthetic_volume(GridSpec::yin(1), cands);
        peak.score(0, 2, k) = 1.0;
        EXPECT_EQ(depth_from_cost(peak)(0, 2), cands.values[k]);
    }
}

TEST(Sweep, EquivariantUnderRigidMotion) {
    std::mt19937_64 rng(17);
    const FieldImage t = normalized_features(6, 18, 5, rng);
    const FieldImage sa = normalized_features(6, 18, 5, rng);
    const FieldImage sb = normalized_features(6, 18, 5, rng);
    const Pose p1{test::random_rotation(rng), Vec3(0.1, 0, 0)};
    const Pose p2{test::random_rotation(rng), Vec3(-0.2, 0.4, 0.1)};
    const Mat3 r = test::random_rotation(rng);
    const Vec3 s(3.0, -1.0, 2.0);
    const DepthCandidates cands = depth_candidates(1.0, 10.0, 6);
    const CostVolume a = sweep_cost_volume(t, GridSpec::yin(6), sa, sb, p1, p2, cands);
    const CostVolume b = sweep_cost_volume(t, GridSpec::yin(6), sa, sb, p1.moved(r, s), p2.moved(r, s), cands);
    EXPECT_EQ(a.validity, b.validity);
    for (std::size_t i = 0; i < a.scores.size(); ++i) EXPECT_NEAR(a.scores[i], b.scores[i], 1e-9);
}

TEST(MatchSegments, IdentityPoseMatchesEveryLabel) {
    const GridSpec g = GridSpec::yin(8);
    LabelMap labels(8, 24, 1);
    for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 24; ++x) labels(y, x) = x / 6;
    }
    const CostVolume cv = synthetic_volume(g, depth_candidates(1, 4, 3));
    const LabeledGrid dst[1] = {{g, &labels}};
    const auto table = match_segments(cv, Pose{}, Pose{}, labels, dst);
    ASSERT_EQ(table.size(), 4u);
    for (const auto& m : table) {
        ASSERT_TRUE(m.destination_label.has_value());
        EXPECT_EQ(*m.destination_label, m.source_label);
        EXPECT_EQ(m.votes, m.pixels);
        EXPECT_EQ(m.pixels, 48);
    }
}

TEST(MatchSegments, SingleLabelAndUnmatched) {
    const GridSpec g = GridSpec::yin(4);
    const LabelMap src(4, 12, 1, 5), dst_labels(4, 12, 1, 9);
    const CostVolume cv = synthetic_volume(g, depth_candidates(1, 4, 3));
    const LabeledGrid dst[1] = {{g, &dst_labels}};
    const auto table = match_segments(cv, Pose{}, Pose{}, src, dst);
    ASSERT_EQ(table.size(), 1u);
    EXPECT_EQ(table[0].source_label, 5);
    EXPECT_EQ(table[0].destination_label, 9);
    EXPECT_EQ(table[0].votes, 48);
    const auto empty = match_segments(cv, Pose{}, Pose{}, src, {});
    EXPECT_FALSE(empty[0].destination_label.has_value());
    EXPECT_THROW(match_segments(cv, Pose{}, Pose{}, LabelMap(3, 12, 1), dst), std::invalid_argument);
}

TEST(MatchSegments, TwoObjectsWithTrueDepth) {
    // Cost volume peaked at the ground-truth depth; objects keep their ids.
    const Scene scene = make_scene("two-objects");
    const Pose p1 = scene.views[0].pose, p2 = scene.views[1].pose;
    const GridSpec yin = GridSpec::yin(32), yang = GridSpec::yang(32);
    const DepthCandidates cands = depth_candidates(0.5, 50.0, 256);
    const GroundTruth src = scene.ground_truth(yin, p1);
    CostVolume cv = synthetic_volume(yin, cands);
    for (int y = 0; y < yin.height; ++y) {
        for (int x = 0; x < yin.width; ++x) {
            const double d = src.depth(y, x) > 0.0 ? src.depth(y, x) : 50.0;
            cv.score(y, x, cands.nearest_index(d)) = 1.0;
        }
    }
    const GroundTruth dyin = scene.ground_truth(yin, p2), dyang = scene.ground_truth(yang, p2);
    const LabeledGrid dst[2] = {{yin, &dyin.ids}, {yang, &dyang.ids}};
    const auto table = match_segments(cv, p1, p2, src.ids, dst);
    int objects = 0;
    for (const auto& m : table) {
        if (m.source_label == 0) continue;
        ++objects;
        ASSERT_TRUE(m.destination_label.has_value());
        EXPECT_EQ(*m.destination_label, m.source_label);
        EXPECT_GT(m.votes, m.pixels / 2);
    }
    EXPECT_EQ(objects, 2);
}
