// Copyright Contributors to the yysplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace yysplat {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Vec4 = Eigen::Vector4d;

inline constexpr double kPi = std::numbers::pi;

/// Malformed or inconsistent data (files, rasters, clouds). Callers map this
/// to a data-error exit status.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// H x W x C row-major raster. Channel index is fastest.
template <typename T>
class Raster {
public:
    Raster() = default;
    Raster(int height, int width, int channels, T fill = T{})
        : height_(height), width_(width), channels_(channels) {
        if (height < 0 || width < 0 || channels < 0) {
            throw std::invalid_argument("Raster: negative dimension");
        }
        data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
    }

    int height() const { return height_; }
    int width() const { return width_; }
    int channels() const { return channels_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T& operator()(int y, int x, int c = 0) { return data_[index(y, x, c)]; }
    const T& operator()(int y, int x, int c = 0) const { return data_[index(y, x, c)]; }

    std::span<T> pixel(int y, int x) {
        return {data_.data() + index(y, x, 0), static_cast<std::size_t>(channels_)};
    }
    std::span<const T> pixel(int y, int x) const {
        return {data_.data() + index(y, x, 0), static_cast<std::size_t>(channels_)};
    }

    std::vector<T>& data() { return data_; }
    const std::vector<T>& data() const { return data_; }

    bool same_shape(const Raster& o) const {
        return height_ == o.height_ && width_ == o.width_ && channels_ == o.channels_;
    }

    bool operator==(const Raster&) const = default;

private:
    std::size_t index(int y, int x, int c) const {
        return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
    }

    int height_ = 0;
    int width_ = 0;
    int channels_ = 0;
    std::vector<T> data_;
};

using FieldImage = Raster<double>;
using LabelMap = Raster<int>;

/// Rigid camera transform. x_cam = rotation * (x_world - translation), so
/// translation is the camera center in world coordinates.
struct Pose {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    Vec3 to_camera(const Vec3& world) const { return rotation * (world - translation); }
    Vec3 to_world(const Vec3& cam) const { return rotation.transpose() * cam + translation; }
    const Vec3& center() const { return translation; }

    /// Pose of the same camera after the world is moved by x -> r * x + s.
    Pose moved(const Mat3& r, const Vec3& s) const {
        return {rotation * r.transpose(), r * translation + s};
    }

    bool operator==(const Pose&) const = default;
};

inline bool is_rotation(const Mat3& r, double tol) {
    return (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol &&
           std::abs(r.determinant() - 1.0) <= tol;
}

// ---------------------------------------------------------------------------
// Threading. Work is split into contiguous chunks; every index writes its own
// output, so results do not depend on the thread count.

namespace detail {
inline std::atomic<int>& thread_cap() {
    static std::atomic<int> cap{0};
    return cap;
}
}  // namespace detail

/// 0 selects hardware concurrency.
inline void set_thread_count(int n) { detail::thread_cap().store(std::max(0, n)); }

inline int thread_count() {
    const int cap = detail::thread_cap().load();
    if (cap > 0) return cap;
    return std::max(1u, std::thread::hardware_concurrency());
}

template <typename Fn>
void parallel_for(int begin, int end, Fn&& fn) {
    const int n = end - begin;
    if (n <= 0) return;
    const int workers = std::min(thread_count(), n);
    if (workers <= 1) {
        for (int i = begin; i < end; ++i) fn(i);
        return;
    }
    std::atomic<int> next{begin};
    auto run = [&] {
        for (int i = next.fetch_add(1); i < end; i = next.fetch_add(1)) fn(i);
    };
    std::vector<std::jthread> pool;
    pool.reserve(workers - 1);
    for (int t = 1; t < workers; ++t) pool.emplace_back(run);
    run();
}

}  // namespace yysplat
