// Copyright Contributors to the yysplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "yysplat/core.hpp"
#include "yysplat/gaussians.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

namespace yysplat {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace detail {

inline std::string read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path.string() + "' for reading");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("write failed for '" + path.string() + "'");
}

inline void require_finite(const FieldImage& img, const std::string& what) {
    for (const double v : img.data()) {
        if (!std::isfinite(v)) throw DataError(what + ": non-finite value");
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// PFM: "Pf" (1 channel) or "PF" (3 channels), width height, scale (negative
// = little-endian), then float32 rows from the bottom row up.

inline std::string encode_pfm(const FieldImage& img) {
    if (img.channels() != 1 && img.channels() != 3) throw DataError("PFM: channel mismatch (need 1 or 3)");
    detail::require_finite(img, "PFM");
    std::string out = (img.channels() == 3 ? "PF\n" : "Pf\n") + std::to_string(img.width()) + " " +
                      std::to_string(img.height()) + "\n-1.0\n";
    const std::size_t header = out.size();
    out.resize(header + img.size() * sizeof(float));
    char* dst = out.data() + header;
    for (int y = img.height() - 1; y >= 0; --y) {
        for (int x = 0; x < img.width(); ++x) {
            for (int c = 0; c < img.channels(); ++c) {
                const float f = static_cast<float>(img(y, x, c));
                std::memcpy(dst, &f, sizeof f);
                dst += sizeof f;
            }
        }
    }
    return out;
}

inline FieldImage decode_pfm(const std::string& bytes) {
    std::size_t pos = 0;
    auto token = [&]() -> std::string {
        while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
        const std::size_t start = pos;
        while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
        if (start == pos || pos >= bytes.size()) throw DataError("PFM: malformed header");
        return bytes.substr(start, pos - start);
    };
    const std::string magic = token();
    int channels;
    if (magic == "PF") channels = 3;
    else if (magic == "Pf") channels = 1;
    else throw DataError("PFM: malformed header (bad magic)");
    int width, height;
    double scale;
    try {
        width = std::stoi(token());
        height = std::stoi(token());
        scale = std::stod(token());
    } catch (const std::logic_error&) {
        throw DataError("PFM: malformed header");
    }
    if (width <= 0 || height <= 0 || scale == 0.0) throw DataError("PFM: malformed header");
    ++pos;  // single whitespace byte after the scale
    const bool big_endian = scale > 0.0;
    const std::size_t n = static_cast<std::size_t>(width) * height * channels;
    if (bytes.size() - pos < n * sizeof(float)) throw DataError("PFM: truncated pixel data");
    FieldImage img(height, width, channels);
    const char* src = bytes.data() + pos;
    for (int y = height - 1; y >= 0; --y) {
        for (int x = 0; x < width; ++x) {
            for (int c = 0; c < channels; ++c) {
                std::uint32_t word;
                std::memcpy(&word, src, sizeof word);
                src += sizeof word;
                if (big_endian) word = __builtin_bswap32(word);
                img(y, x, c) = static_cast<double>(std::bit_cast<float>(word));
            }
        }
    }
    return img;
}

inline void write_pfm(const FieldImage& img, const std::filesystem::path& path) {
    detail::write_file_bytes(path, encode_pfm(img));
}

inline FieldImage read_pfm(const std::filesystem::path& path) {
    try {
        return decode_pfm(detail::read_file_bytes(path));
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// PNG, 8 bit, values mapped to [0, 1].

inline FieldImage read_png(const std::filesystem::path& path) {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.c_str())) {
        throw DataError(path.string() + ": " + image.message);
    }
    const bool color = image.format & PNG_FORMAT_FLAG_COLOR;
    const bool alpha = image.format & PNG_FORMAT_FLAG_ALPHA;
    int channels;
    if (color || alpha) {
        image.format = alpha ? PNG_FORMAT_RGBA : PNG_FORMAT_RGB;
        channels = alpha ? 4 : 3;
    } else {
        image.format = PNG_FORMAT_GRAY;
        channels = 1;
    }
    std::vector<png_byte> buffer(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
        const std::string msg = image.message;
        png_image_free(&image);
        throw DataError(path.string() + ": " + msg);
    }
    FieldImage img(static_cast<int>(image.height), static_cast<int>(image.width), channels);
    for (std::size_t i = 0; i < img.size(); ++i) img.data()[i] = buffer[i] / 255.0;
    return img;
}

inline void write_png(const FieldImage& img, const std::filesystem::path& path) {
    if (img.channels() != 1 && img.channels() != 3 && img.channels() != 4) {
        throw DataError("PNG: channel mismatch (need 1, 3 or 4)");
    }
    detail::require_finite(img, "PNG");
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(img.width());
    image.height = static_cast<png_uint_32>(img.height());
    image.format = img.channels() == 1 ? PNG_FORMAT_GRAY : img.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_RGBA;
    std::vector<png_byte> buffer(img.size());
    for (std::size_t i = 0; i < img.size(); ++i) {
        buffer[i] = static_cast<png_byte>(std::lround(std::clamp(img.data()[i], 0.0, 1.0) * 255.0));
    }
    if (!png_image_write_to_file(&image, path.c_str(), 0, buffer.data(), 0, nullptr)) {
        throw DataError(path.string() + ": " + image.message);
    }
}

/// Dispatches on extension: .pfm or .png.
inline FieldImage read_image(const std::filesystem::path& path) {
    const std::string ext = path.extension().string();
    if (ext == ".pfm") return read_pfm(path);
    if (ext == ".png") return read_png(path);
    throw DataError(path.string() + ": unsupported image extension '" + ext + "'");
}

inline void write_image(const FieldImage& img, const std::filesystem::path& path) {
    const std::string ext = path.extension().string();
    if (ext == ".pfm") return write_pfm(img, path);
    if (ext == ".png") return write_png(img, path);
    throw DataError(path.string() + ": unsupported image extension '" + ext + "'");
}

// ---------------------------------------------------------------------------
// Pose text format: one record per line, `name r00 r01 r02 r10 ... r22 t0 t1 t2`.
// Blank lines and lines starting with '#' are ignored.

struct NamedPose {
    std::string name;
    Pose pose;
};

inline constexpr double kPoseFileTolerance = 1e-6;

inline std::vector<NamedPose> parse_poses(const std::string& text, const std::string& source = "<poses>") {
    std::vector<NamedPose> poses;
    std::istringstream lines(text);
    std::string line;
    int line_no = 0;
    while (std::getline(lines, line)) {
        ++line_no;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        const std::string where = source + ":" + std::to_string(line_no) + ": ";
        std::istringstream fields(line);
        NamedPose rec;
        fields >> rec.name;
        std::vector<double> values;
        std::string tok;
        while (fields >> tok) {
            std::size_t used = 0;
            double v;
            try {
                v = std::stod(tok, &used);
            } catch (const std::logic_error&) {
                throw DataError(where + "parse error: '" + tok + "' is not a number");
            }
            if (used != tok.size()) throw DataError(where + "parse error: '" + tok + "' is not a number");
            values.push_back(v);
        }
        if (values.size() != 12) {
            throw DataError(where + "parse error: expected 12 numbers, got " + std::to_string(values.size()));
        }
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) rec.pose.rotation(r, c) = values[3 * r + c];
        }
        rec.pose.translation = Vec3(values[9], values[10], values[11]);
        if (!is_rotation(rec.pose.rotation, kPoseFileTolerance)) {
            throw DataError(where + "rotation is not orthonormal with det +1");
        }
        poses.push_back(std::move(rec));
    }
    return poses;
}

inline std::string format_poses(const std::vector<NamedPose>& poses) {
    std::string out;
    char buf[32];
    for (const auto& p : poses) {
        if (p.name.empty() || p.name.find_first_of(" \t\r\n#") != std::string::npos) {
            throw DataError("pose name '" + p.name + "' must be a non-empty token");
        }
        out += p.name;
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) {
                std::snprintf(buf, sizeof buf, " %.17g", p.pose.rotation(r, c));
                out += buf;
            }
        }
        for (int i = 0; i < 3; ++i) {
            std::snprintf(buf, sizeof buf, " %.17g", p.pose.translation[i]);
            out += buf;
        }
        out += '\n';
    }
    return out;
}

inline std::vector<NamedPose> read_pose_file(const std::filesystem::path& path) {
    return parse_poses(detail::read_file_bytes(path), path.string());
}

inline void write_pose_file(const std::vector<NamedPose>& poses, const std::filesystem::path& path) {
    detail::write_file_bytes(path, format_poses(poses));
}

// ---------------------------------------------------------------------------
// Cloud binary format, little-endian:
//   char[4] "YYGS", uint32 count, uint32 sh_degree,
//   then per Gaussian float32: position[3], scale[3], quaternion wxyz[4],
//   opacity, SH coefficients[3 * (degree + 1)^2].

inline constexpr char kCloudMagic[4] = {'Y', 'Y', 'G', 'S'};
inline constexpr double kQuaternionFileTolerance = 1e-3;

inline std::string encode_cloud(const GaussianCloud& cloud) {
    std::string out(kCloudMagic, 4);
    auto put_u32 = [&](std::uint32_t v) { out.append(reinterpret_cast<const char*>(&v), sizeof v); };
    auto put_f32 = [&](double v) {
        const float f = static_cast<float>(v);
        out.append(reinterpret_cast<const char*>(&f), sizeof f);
    };
    put_u32(static_cast<std::uint32_t>(cloud.size()));
    put_u32(static_cast<std::uint32_t>(cloud.sh_degree()));
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const Gaussian3D& g = cloud[i];
        for (int k = 0; k < 3; ++k) put_f32(g.position[k]);
        for (int k = 0; k < 3; ++k) put_f32(g.scale[k]);
        for (int k = 0; k < 4; ++k) put_f32(g.rotation[k]);
        put_f32(g.opacity);
        for (const double c : cloud.sh(i)) put_f32(c);
    }
    return out;
}

inline GaussianCloud decode_cloud(const std::string& bytes) {
    if (bytes.size() < 12 || std::memcmp(bytes.data(), kCloudMagic, 4) != 0) throw DataError("cloud: bad magic");
    std::uint32_t count, degree;
    std::memcpy(&count, bytes.data() + 4, 4);
    std::memcpy(&degree, bytes.data() + 8, 4);
    if (degree > 3) throw DataError("cloud: unsupported SH degree " + std::to_string(degree));
    GaussianCloud cloud(static_cast<int>(degree));
    const std::size_t floats_per = 11 + static_cast<std::size_t>(cloud.sh_stride());
    if (bytes.size() != 12 + static_cast<std::size_t>(count) * floats_per * 4) {
        throw DataError("cloud: size does not match header count");
    }
    cloud.reserve(count);
    const char* src = bytes.data() + 12;
    auto get = [&]() {
        float f;
        std::memcpy(&f, src, sizeof f);
        src += sizeof f;
        return static_cast<double>(f);
    };
    std::vector<double> sh(static_cast<std::size_t>(cloud.sh_stride()));
    for (std::uint32_t i = 0; i < count; ++i) {
        Gaussian3D g;
        for (int k = 0; k < 3; ++k) g.position[k] = get();
        for (int k = 0; k < 3; ++k) g.scale[k] = get();
        for (int k = 0; k < 4; ++k) g.rotation[k] = get();
        g.opacity = get();
        for (double& c : sh) c = get();
        const double norm = g.rotation.norm();
        if (!(std::abs(norm - 1.0) <= kQuaternionFileTolerance)) {
            throw DataError("cloud: gaussian " + std::to_string(i) + " quaternion norm " + std::to_string(norm) +
                            " outside tolerance");
        }
        // float32 storage of a unit quaternion is already unit to ~1e-7
        if (std::abs(norm - 1.0) > 1e-6) g.rotation /= norm;
        cloud.add(g, sh);
    }
    validate_cloud(cloud);
    return cloud;
}

inline void write_cloud(const GaussianCloud& cloud, const std::filesystem::path& path) {
    detail::write_file_bytes(path, encode_cloud(cloud));
}

inline GaussianCloud read_cloud(const std::filesystem::path& path) {
    try {
        return decode_cloud(detail::read_file_bytes(path));
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

}  // namespace yysplat
