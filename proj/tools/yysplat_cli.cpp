// Copyright Contributors to the yysplat Project
// SPDX-License-Identifier: Apache-2.0

#include "yysplat/core.hpp"
#include "yysplat/decompose.hpp"
#include "yysplat/gaussians.hpp"
#include "yysplat/io.hpp"
#include "yysplat/metrics.hpp"
#include "yysplat/rasterizer.hpp"
#include "yysplat/refine.hpp"
#include "yysplat/scene_synth.hpp"
#include "yysplat/sphere_geom.hpp"
#include "yysplat/sweep.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace yysplat;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Globals {
    std::uint64_t seed = 0;
    int threads = 0;
    std::string report;
};

std::string fmt(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fixed(double v, int digits) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

/// Line-delimited key=value records.
class Report {
public:
    explicit Report(const std::string& path) : path_(path) {}

    void add(const std::vector<std::pair<std::string, std::string>>& fields) {
        std::string line;
        for (const auto& [k, v] : fields) {
            if (!line.empty()) line += ' ';
            line += k + '=' + v;
        }
        lines_.push_back(line);
    }

    void flush() const {
        if (path_.empty()) return;
        std::ofstream out(path_, std::ios::binary);
        if (!out) throw DataError("cannot open '" + path_ + "' for writing");
        for (const auto& l : lines_) out << l << '\n';
    }

private:
    std::string path_;
    std::vector<std::string> lines_;
};

const Pose& pose_at(const std::vector<NamedPose>& poses, int index, const std::string& source) {
    if (index < 0 || index >= static_cast<int>(poses.size())) {
        throw UsageError("pose index " + std::to_string(index) + " out of range for " + source + " (" +
                         std::to_string(poses.size()) + " poses)");
    }
    return poses[static_cast<std::size_t>(index)].pose;
}

GridSpec equirect_of(const FieldImage& img, const std::string& path) {
    if (img.width() != 2 * img.height()) {
        throw DataError(path + ": equirect image must have width = 2 * height, got " + std::to_string(img.width()) +
                        "x" + std::to_string(img.height()));
    }
    return GridSpec::equirect(img.height());
}

FieldImage read_rgb(const std::string& path) {
    FieldImage img = read_image(path);
    if (img.channels() == 3) return img;
    FieldImage out(img.height(), img.width(), 3);
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            for (int c = 0; c < 3; ++c) out(y, x, c) = img(y, x, img.channels() == 1 ? 0 : std::min(c, img.channels() - 1));
        }
    }
    return out;
}

Vec3 parse_color(const std::string& text) {
    std::vector<double> v;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            v.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw UsageError("--bg: cannot parse '" + text + "' as r,g,b");
        }
    }
    if (v.size() == 1) return Vec3::Constant(v[0]);
    if (v.size() != 3) throw UsageError("--bg: expected one value or r,g,b");
    return {v[0], v[1], v[2]};
}

/// Nearest-pixel lookup of an equirect label map on another grid.
LabelMap labels_on(const FieldImage& eq_labels, const GridSpec& grid) {
    const GridSpec eq = GridSpec::equirect(eq_labels.height());
    LabelMap out(grid.height, grid.width, 1);
    for (int v = 0; v < grid.height; ++v) {
        for (int u = 0; u < grid.width; ++u) {
            const PixelCoord p = direction_to_pixel(eq, pixel_to_direction(grid, u, v));
            const int x = std::clamp(static_cast<int>(std::floor(p.u)), 0, eq.width - 1);
            const int y = std::clamp(static_cast<int>(std::floor(p.v)), 0, eq.height - 1);
            out(v, u) = static_cast<int>(std::lround(eq_labels(y, x, 0)));
        }
    }
    return out;
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create directory '" + dir + "': " + ec.message());
}

std::string join(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

const char* kGlobalFooter =
    "Global options (accepted before or after the subcommand):\n"
    "  --seed N        seed for all randomness (default 0)\n"
    "  --threads N     worker thread cap (default: available cores)\n"
    "  --config FILE   key=value defaults; command-line flags override; use section.key for subcommand options\n"
    "  --report FILE   write line-delimited key=value records";

// ---------------------------------------------------------------------------

struct DecomposeArgs {
    std::string input, yin, yang;
    int height = 0;
};

int run_decompose(const DecomposeArgs& a, const Globals&, Report& report) {
    const FieldImage img = read_image(a.input);
    equirect_of(img, a.input);
    const YinYangPair p = decompose_yinyang(img, a.height);
    write_image(p.yin, a.yin);
    write_image(p.yang, a.yang);
    std::cout << "yin " << p.yin.width() << "x" << p.yin.height() << " -> " << a.yin << "\n";
    std::cout << "yang " << p.yang.width() << "x" << p.yang.height() << " -> " << a.yang << "\n";
    report.add({{"command", "decompose"}, {"height", std::to_string(p.yin.height())}});
    return 0;
}

struct RecomposeArgs {
    std::string yin, yang, output;
    int height = 0;
};

int run_recompose(const RecomposeArgs& a, const Globals&, Report& report) {
    const FieldImage yin = read_image(a.yin);
    const FieldImage yang = read_image(a.yang);
    if (!yin.same_shape(yang) || yin.width() != 3 * yin.height()) {
        throw DataError(a.yin + ", " + a.yang + ": Yin and Yang images must share a height x 3*height shape");
    }
    const int h = a.height > 0 ? a.height : 2 * yin.height();
    const FieldImage out = recompose_yinyang(yin, yang, GridSpec::equirect(h));
    write_image(out, a.output);
    std::cout << "equirect " << out.width() << "x" << out.height() << " -> " << a.output << "\n";
    report.add({{"command", "recompose"}, {"height", std::to_string(h)}});
    return 0;
}

struct CubemapArgs {
    std::string input, output_dir, ext = "png";
    int resolution = 0;
};

int run_cubemap(const CubemapArgs& a, const Globals&, Report& report) {
    const FieldImage img = read_image(a.input);
    const GridSpec eq = equirect_of(img, a.input);
    const int res = a.resolution > 0 ? a.resolution : std::max(1, img.height() / 2);
    ensure_dir(a.output_dir);
    static const char* names[6] = {"px", "nx", "py", "ny", "pz", "nz"};
    for (const CubeFaceCamera& cam : cubemap_rig(res)) {
        const std::string path = join(a.output_dir, std::string("face_") + names[cam.grid.face] + "." + a.ext);
        write_image(resample(img, eq, cam.grid), path);
        std::cout << "face " << cam.grid.face << " -> " << path << "\n";
    }
    report.add({{"command", "cubemap"}, {"resolution", std::to_string(res)}});
    return 0;
}

struct SweepArgs {
    std::string target, source, poses, output_dir;
    int target_index = 0, source_index = 1;
    SweepOptions opt;
    bool write_cost = false;
};

int run_sweep(const SweepArgs& a, const Globals&, Report& report) {
    const auto poses = read_pose_file(a.poses);
    const Pose& p1 = pose_at(poses, a.target_index, a.poses);
    const Pose& p2 = pose_at(poses, a.source_index, a.poses);
    const FieldImage target = read_rgb(a.target);
    const FieldImage source = read_rgb(a.source);
    equirect_of(target, a.target);
    equirect_of(source, a.source);
    const ViewSweep sw = sweep_view(target, p1, source, p2, a.opt);
    ensure_dir(a.output_dir);
    for (const auto* cv : {&sw.yin, &sw.yang}) {
        const std::string family = to_string(cv->grid.family);
        write_pfm(depth_from_cost(*cv), join(a.output_dir, "depth_" + family + ".pfm"));
        if (a.write_cost) write_pfm(cost_volume_stack(*cv), join(a.output_dir, "cost_" + family + ".pfm"));
        std::size_t valid = 0;
        for (const auto v : cv->validity) valid += v > 0;
        std::cout << family << ": " << cv->grid.width << "x" << cv->grid.height << "x" << cv->depths()
                  << " cost volume, " << valid << " valid cells\n";
        report.add({{"command", "sweep"}, {"grid", family}, {"valid_cells", std::to_string(valid)}});
    }
    return 0;
}

struct RenderArgs {
    std::string cloud, poses, output, alpha_output, mode = "yinyang", bg = "0";
    int pose_index = 0, width = 512;
};

int run_render(const RenderArgs& a, const Globals&, Report& report) {
    if (a.width < 2 || a.width % 2 != 0) throw UsageError("--width must be even and >= 2");
    const GaussianCloud cloud = read_cloud(a.cloud);
    const auto poses = read_pose_file(a.poses);
    const Pose& pose = pose_at(poses, a.pose_index, a.poses);
    RasterOptions opt;
    opt.background = parse_color(a.bg);
    const GridSpec out = GridSpec::equirect(a.width / 2);
    FieldImage image, alpha;
    if (a.mode == "equirect") {
        RenderOutput r = rasterize(cloud, out, pose, opt);
        image = std::move(r.image);
        alpha = std::move(r.alpha);
    } else {
        YinYangRender r = render_yinyang(cloud, pose, out, opt);
        image = std::move(r.image);
        alpha = std::move(r.alpha);
    }
    write_image(image, a.output);
    if (!a.alpha_output.empty()) write_image(alpha, a.alpha_output);
    std::cout << a.mode << " render " << out.width << "x" << out.height << " of " << cloud.size()
              << " Gaussians -> " << a.output << "\n";
    report.add({{"command", "render"}, {"mode", a.mode}, {"pose_index", std::to_string(a.pose_index)},
                {"gaussians", std::to_string(cloud.size())}});
    return 0;
}

struct RefineArgs {
    std::string cloud, poses, output;
    std::vector<std::string> images;
    std::vector<int> pose_indices;
    int iterations = 100;
    double learning_rate = 1.0;
};

int run_refine(const RefineArgs& a, const Globals&, Report& report) {
    if (a.images.empty()) throw UsageError("--images: at least one reference image required");
    std::vector<int> indices = a.pose_indices;
    if (indices.empty()) {
        for (int i = 0; i < static_cast<int>(a.images.size()); ++i) indices.push_back(i);
    }
    if (indices.size() != a.images.size()) throw UsageError("--pose-indices must pair one index with each image");
    const GaussianCloud cloud = read_cloud(a.cloud);
    const auto poses = read_pose_file(a.poses);
    std::vector<ReferenceView> views;
    for (std::size_t i = 0; i < a.images.size(); ++i) {
        FieldImage img = read_rgb(a.images[i]);
        equirect_of(img, a.images[i]);
        views.push_back(equirect_view(std::move(img), pose_at(poses, indices[i], a.poses)));
    }
    RefineOptions opt;
    opt.iterations = a.iterations;
    opt.learning_rate = a.learning_rate;
    const RefineResult r = refine_colors(cloud, views, opt);
    write_cloud(r.cloud, a.output);
    const double before = r.loss.front(), after = r.loss.back();
    std::cout << "reference MSE " << fmt(before) << " -> " << fmt(after) << " after " << a.iterations
              << " iterations\n";
    report.add({{"command", "refine"}, {"metric", "mse_before"}, {"value", fmt(before)}});
    report.add({{"command", "refine"}, {"metric", "mse_after"}, {"value", fmt(after)}});
    return 0;
}

struct MatchArgs {
    std::string target, source, poses, target_labels, source_labels;
    int target_index = 0, source_index = 1;
    SweepOptions opt;
};

int run_match(const MatchArgs& a, const Globals&, Report& report) {
    const auto poses = read_pose_file(a.poses);
    const Pose& p1 = pose_at(poses, a.target_index, a.poses);
    const Pose& p2 = pose_at(poses, a.source_index, a.poses);
    const FieldImage target = read_rgb(a.target);
    const FieldImage source = read_rgb(a.source);
    equirect_of(target, a.target);
    equirect_of(source, a.source);
    const FieldImage lt = read_image(a.target_labels);
    const FieldImage ls = read_image(a.source_labels);
    equirect_of(lt, a.target_labels);
    equirect_of(ls, a.source_labels);
    const ViewSweep sw = sweep_view(target, p1, source, p2, a.opt);
    const GridSpec yin = GridSpec::yin(a.opt.feature_height);
    const GridSpec yang = GridSpec::yang(a.opt.feature_height);
    const LabelMap dst_yin = labels_on(ls, yin);
    const LabelMap dst_yang = labels_on(ls, yang);
    const std::vector<LabeledGrid> dst = {{yin, &dst_yin}, {yang, &dst_yang}};
    std::cout << "grid source_label destination_label votes pixels\n";
    for (const auto* cv : {&sw.yin, &sw.yang}) {
        const LabelMap src = labels_on(lt, cv->grid);
        for (const SegmentMatch& m : match_segments(*cv, p1, p2, src, dst)) {
            const std::string d = m.destination_label ? std::to_string(*m.destination_label) : "none";
            const std::string family = to_string(cv->grid.family);
            std::cout << family << " " << m.source_label << " " << d << " " << m.votes << " " << m.pixels << "\n";
            report.add({{"command", "match"}, {"grid", family}, {"source_label", std::to_string(m.source_label)},
                        {"destination_label", d}, {"votes", std::to_string(m.votes)},
                        {"pixels", std::to_string(m.pixels)}});
        }
    }
    return 0;
}

struct EvalArgs {
    std::string image, reference;
    int pose_index = -1;
};

int run_eval(const EvalArgs& a, const Globals&, Report& report) {
    const FieldImage img = read_image(a.image);
    const FieldImage ref = read_image(a.reference);
    if (!img.same_shape(ref)) throw DataError(a.image + ", " + a.reference + ": image shapes differ");
    const double p = psnr(img, ref);
    const double s = ssim(img, ref);
    std::cout << "psnr " << fixed(p, 4) << " dB\nssim " << fixed(s, 6) << "\n";
    const std::string idx = std::to_string(a.pose_index);
    report.add({{"command", "eval"}, {"pose_index", idx}, {"metric", "psnr"}, {"value", fmt(p)}});
    report.add({{"command", "eval"}, {"pose_index", idx}, {"metric", "ssim"}, {"value", fmt(s)}});
    return 0;
}

struct SynthArgs {
    std::string scene = "textured-room", output_dir;
    int height = 128;
};

int run_synth(const SynthArgs& a, const Globals& g, Report& report) {
    if (a.height < 2) throw UsageError("--height must be >= 2");
    const Scene sc = make_scene(a.scene, g.seed);
    ensure_dir(a.output_dir);
    write_cloud(sc.cloud, join(a.output_dir, "cloud.yygs"));
    write_pose_file(sc.views, join(a.output_dir, "poses.txt"));
    const GridSpec eq = GridSpec::equirect(a.height);
    for (std::size_t i = 0; i < sc.views.size(); ++i) {
        const NamedPose& v = sc.views[i];
        const GroundTruth gt = sc.ground_truth(eq, v.pose);
        FieldImage ids(eq.height, eq.width, 1);
        for (std::size_t k = 0; k < ids.size(); ++k) ids.data()[k] = gt.ids.data()[k];
        write_image(rasterize(sc.cloud, eq, v.pose).image, join(a.output_dir, v.name + ".png"));
        write_pfm(gt.depth, join(a.output_dir, v.name + "_depth.pfm"));
        write_pfm(ids, join(a.output_dir, v.name + "_ids.pfm"));
        report.add({{"command", "synth"}, {"scene", a.scene}, {"pose_index", std::to_string(i)}, {"view", v.name}});
    }
    std::cout << a.scene << ": " << sc.cloud.size() << " Gaussians, " << sc.views.size() << " views -> "
              << a.output_dir << "\n";
    return 0;
}

struct PipelineArgs {
    std::string scene = "textured-room", output_dir = "pipeline_out";
    int height = 128;
    SweepOptions opt;
    double opacity = 1.0, scale_factor = 1.0;
    int refine_iterations = 0;
};

int run_pipeline(const PipelineArgs& a, const Globals& g, Report& report) {
    if (a.height < 2) throw UsageError("--height must be >= 2");
    const Scene sc = make_scene(a.scene, g.seed);
    if (sc.views.size() < 3) throw DataError("scene '" + a.scene + "' has no target views");
    ensure_dir(a.output_dir);
    const GridSpec eq = GridSpec::equirect(a.height);
    const Pose& p0 = sc.views[0].pose;
    const Pose& p1 = sc.views[1].pose;
    const FieldImage ref[2] = {rasterize(sc.cloud, eq, p0).image, rasterize(sc.cloud, eq, p1).image};
    const Pose* pose[2] = {&p0, &p1};

    PixelAlignedOptions pa;
    pa.opacity = a.opacity;
    pa.scale_factor = a.scale_factor;
    GaussianCloud unified(0);
    for (int v = 0; v < 2; ++v) {
        const ViewSweep sw = sweep_view(ref[v], *pose[v], ref[1 - v], *pose[1 - v], a.opt);
        const YinYangPair patches = decompose_yinyang(ref[v], a.opt.feature_height);
        for (const auto* cv : {&sw.yin, &sw.yang}) {
            const FieldImage depth = depth_from_cost(*cv);
            const std::string family = to_string(cv->grid.family);
            write_pfm(depth, join(a.output_dir, sc.views[v].name + "_depth_" + family + ".pfm"));
            const FieldImage& patch = cv->grid.family == GridFamily::Yin ? patches.yin : patches.yang;
            unified.append(pixel_aligned_cloud(patch, depth, cv->grid, *pose[v], pa));
        }
        write_image(ref[v], join(a.output_dir, sc.views[v].name + ".png"));
    }
    if (a.refine_iterations > 0) {
        RefineOptions ro;
        ro.iterations = a.refine_iterations;
        const RefineResult r =
            refine_colors(unified, {equirect_view(ref[0], p0), equirect_view(ref[1], p1)}, ro);
        unified = r.cloud;
        report.add({{"command", "pipeline"}, {"metric", "refine_mse_before"}, {"value", fmt(r.loss.front())}});
        report.add({{"command", "pipeline"}, {"metric", "refine_mse_after"}, {"value", fmt(r.loss.back())}});
    }
    write_cloud(unified, join(a.output_dir, "cloud.yygs"));

    std::cout << "scene " << a.scene << ", seed " << g.seed << ", " << unified.size() << " Gaussians\n";
    std::cout << "pose_index view psnr_db ssim\n";
    for (std::size_t i = 2; i < sc.views.size(); ++i) {
        const NamedPose& v = sc.views[i];
        const FieldImage render = render_yinyang(unified, v.pose, eq).image;
        const FieldImage truth = rasterize(sc.cloud, eq, v.pose).image;
        write_image(render, join(a.output_dir, v.name + "_render.png"));
        write_image(truth, join(a.output_dir, v.name + "_truth.png"));
        const double p = psnr(render, truth);
        const double s = ssim(render, truth);
        std::cout << i << " " << v.name << " " << fixed(std::min(p, kPsnrDisplayCap), 3) << " " << fixed(s, 4)
                  << "\n";
        const std::string idx = std::to_string(i);
        report.add({{"command", "pipeline"}, {"pose_index", idx}, {"view", v.name}, {"metric", "psnr"},
                    {"value", fmt(p)}});
        report.add({{"command", "pipeline"}, {"pose_index", idx}, {"view", v.name}, {"metric", "ssim"},
                    {"value", fmt(s)}});
    }
    return 0;
}

void add_sweep_options(CLI::App* sub, SweepOptions& opt) {
    sub->add_option("--feature-height", opt.feature_height, "Yin/Yang feature grid height (width = 3x)")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    sub->add_option("--window", opt.window, "feature window size, odd")->capture_default_str();
    sub->add_option("--d-near", opt.d_near, "nearest depth candidate")->capture_default_str();
    sub->add_option("--d-far", opt.d_far, "farthest depth candidate")->capture_default_str();
    sub->add_option("--candidates", opt.candidates, "number of depth candidates")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"yysplat: Yin-Yang omnidirectional Gaussian splatting tools"};
    app.require_subcommand(1);
    app.footer(kGlobalFooter);
    Globals g;
    app.add_option("--seed", g.seed, "seed for all randomness")->capture_default_str();
    app.add_option("--threads", g.threads, "worker thread cap, 0 = available cores")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    app.add_option("--report", g.report, "write line-delimited key=value records to this file");
    app.set_config("--config", "", "key=value defaults file; flags override");

    auto sub = [&](const char* name, const char* desc) {
        CLI::App* s = app.add_subcommand(name, desc);
        s->fallthrough();
        s->footer(kGlobalFooter);
        return s;
    };

    DecomposeArgs dec;
    CLI::App* s_dec = sub("decompose", "split an equirect image into Yin and Yang patches");
    s_dec->add_option("--input", dec.input, "equirect image (.png/.pfm)")->required();
    s_dec->add_option("--yin", dec.yin, "output Yin image")->required();
    s_dec->add_option("--yang", dec.yang, "output Yang image")->required();
    s_dec->add_option("--height", dec.height, "patch height, 0 = input height / 2")->capture_default_str();

    RecomposeArgs rec;
    CLI::App* s_rec = sub("recompose", "blend Yin and Yang patches back into an equirect image");
    s_rec->add_option("--yin", rec.yin, "Yin image")->required();
    s_rec->add_option("--yang", rec.yang, "Yang image")->required();
    s_rec->add_option("--output", rec.output, "output equirect image")->required();
    s_rec->add_option("--height", rec.height, "output height, 0 = 2 x patch height")->capture_default_str();

    CubemapArgs cub;
    CLI::App* s_cub = sub("cubemap", "resample an equirect image onto six cube faces");
    s_cub->add_option("--input", cub.input, "equirect image")->required();
    s_cub->add_option("--output-dir", cub.output_dir, "directory for face_{px,nx,py,ny,pz,nz} images")->required();
    s_cub->add_option("--resolution", cub.resolution, "face size, 0 = input height / 2")->capture_default_str();
    s_cub->add_option("--ext", cub.ext, "output format")->capture_default_str()->check(CLI::IsMember({"png", "pfm"}));

    SweepArgs swp;
    CLI::App* s_swp = sub("sweep", "sphere-sweep cost volumes and depth for a target view");
    s_swp->add_option("--target", swp.target, "target equirect image")->required();
    s_swp->add_option("--source", swp.source, "source equirect image")->required();
    s_swp->add_option("--poses", swp.poses, "pose file")->required();
    s_swp->add_option("--target-index", swp.target_index, "target pose index")->capture_default_str();
    s_swp->add_option("--source-index", swp.source_index, "source pose index")->capture_default_str();
    s_swp->add_option("--output-dir", swp.output_dir, "directory for depth_{yin,yang}.pfm")->required();
    s_swp->add_flag("--cost-volume", swp.write_cost, "also write cost_{yin,yang}.pfm (slices stacked vertically)");
    add_sweep_options(s_swp, swp.opt);

    RenderArgs ren;
    CLI::App* s_ren = sub("render", "rasterize a Gaussian cloud to an equirect image");
    s_ren->add_option("--cloud", ren.cloud, "cloud file")->required();
    s_ren->add_option("--poses", ren.poses, "pose file")->required();
    s_ren->add_option("--pose-index", ren.pose_index, "pose to render")->capture_default_str();
    s_ren->add_option("--mode", ren.mode, "render path")->capture_default_str()->check(
        CLI::IsMember({"equirect", "yinyang"}));
    s_ren->add_option("--width", ren.width, "output width (height = width / 2)")->capture_default_str();
    s_ren->add_option("--bg", ren.bg, "background color, v or r,g,b")->capture_default_str();
    s_ren->add_option("--output", ren.output, "output image")->required();
    s_ren->add_option("--alpha-output", ren.alpha_output, "optional accumulated alpha image");

    RefineArgs ref;
    CLI::App* s_ref = sub("refine", "refine Gaussian colors against reference views");
    s_ref->add_option("--cloud", ref.cloud, "input cloud")->required();
    s_ref->add_option("--poses", ref.poses, "pose file")->required();
    s_ref->add_option("--images", ref.images, "reference equirect images")->required();
    s_ref->add_option("--pose-indices", ref.pose_indices, "pose index per image, default 0, 1, ...");
    s_ref->add_option("--iterations", ref.iterations, "gradient steps")->capture_default_str()->check(
        CLI::NonNegativeNumber);
    s_ref->add_option("--learning-rate", ref.learning_rate, "step as a fraction of 1/L, (0, 2) is monotone")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    s_ref->add_option("--output", ref.output, "output cloud")->required();

    MatchArgs mat;
    CLI::App* s_mat = sub("match", "match segment labels across two views through the cost volume");
    s_mat->add_option("--target", mat.target, "target equirect image")->required();
    s_mat->add_option("--source", mat.source, "source equirect image")->required();
    s_mat->add_option("--poses", mat.poses, "pose file")->required();
    s_mat->add_option("--target-index", mat.target_index, "target pose index")->capture_default_str();
    s_mat->add_option("--source-index", mat.source_index, "source pose index")->capture_default_str();
    s_mat->add_option("--target-labels", mat.target_labels, "equirect label map of the target view")->required();
    s_mat->add_option("--source-labels", mat.source_labels, "equirect label map of the source view")->required();
    add_sweep_options(s_mat, mat.opt);

    EvalArgs evl;
    CLI::App* s_evl = sub("eval", "PSNR and SSIM of an image against a reference");
    s_evl->add_option("--image", evl.image, "rendered image")->required();
    s_evl->add_option("--reference", evl.reference, "reference image")->required();
    s_evl->add_option("--pose-index", evl.pose_index, "pose index recorded in the report")->capture_default_str();

    SynthArgs syn;
    CLI::App* s_syn = sub("synth", "write a synthetic scene: cloud, poses, renders, depth and id maps");
    s_syn->add_option("--scene", syn.scene, "scene name")->capture_default_str()->check(
        CLI::IsMember(scene_names()));
    s_syn->add_option("--output-dir", syn.output_dir, "output directory")->required();
    s_syn->add_option("--height", syn.height, "equirect height of renders and maps")->capture_default_str();

    PipelineArgs pip;
    CLI::App* s_pip = sub("pipeline", "two-view reconstruction, novel-view rendering and evaluation");
    s_pip->add_option("--scene", pip.scene, "synthetic scene name")->capture_default_str()->check(
        CLI::IsMember(scene_names()));
    s_pip->add_option("--output-dir", pip.output_dir, "output directory")->capture_default_str();
    s_pip->add_option("--height", pip.height, "equirect height of reference and target images")
        ->capture_default_str();
    s_pip->add_option("--opacity", pip.opacity, "opacity of pixel-aligned Gaussians")->capture_default_str();
    s_pip->add_option("--scale-factor", pip.scale_factor, "splat size relative to the pixel footprint")
        ->capture_default_str();
    s_pip->add_option("--refine-iterations", pip.refine_iterations, "color refinement steps, 0 = off")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    add_sweep_options(s_pip, pip.opt);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    set_thread_count(g.threads);
    Report report(g.report);
    try {
        int rc = 0;
        if (s_dec->parsed()) rc = run_decompose(dec, g, report);
        else if (s_rec->parsed()) rc = run_recompose(rec, g, report);
        else if (s_cub->parsed()) rc = run_cubemap(cub, g, report);
        else if (s_swp->parsed()) rc = run_sweep(swp, g, report);
        else if (s_ren->parsed()) rc = run_render(ren, g, report);
        else if (s_ref->parsed()) rc = run_refine(ref, g, report);
        else if (s_mat->parsed()) rc = run_match(mat, g, report);
        else if (s_evl->parsed()) rc = run_eval(evl, g, report);
        else if (s_syn->parsed()) rc = run_synth(syn, g, report);
        else if (s_pip->parsed()) rc = run_pipeline(pip, g, report);
        report.flush();
        return rc;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
}
