#include "nbv/depth_camera.hpp"

#include <fstream>

#include "nbv/parallel.hpp"
#include "nbv/rng.hpp"

namespace nbv {

Vec3 DepthImage::pixel_dir_camera(int u, int v) const {
    const double x = (u + 0.5 - intrinsics.cx) / intrinsics.fx;
    const double y = (v + 0.5 - intrinsics.cy) / intrinsics.fy;
    return normalized(Vec3{x, y, 1.0});
}

Vec3 DepthImage::unproject(int u, int v, double z_depth) const {
    const double x = (u + 0.5 - intrinsics.cx) / intrinsics.fx * z_depth;
    const double y = (v + 0.5 - intrinsics.cy) / intrinsics.fy * z_depth;
    return camera_pose.apply({x, y, z_depth});
}

namespace {

struct TraceResult {
    double ray_t = 0.0;  // parameter along the unit ray, < 0 on miss
    Vec3 point;
};

TraceResult sphere_trace(const Scene& scene, const Vec3& origin, const Vec3& dir,
                         const RenderParams& params) {
    TraceResult res;
    res.ray_t = -1.0;
    double t = 0.0;
    for (int step = 0; step < params.max_steps; ++step) {
        const Vec3 p = origin + t * dir;
        const double d = scene_sdf(scene, p);
        if (std::fabs(d) < params.hit_epsilon) {
            res.ray_t = t;
            res.point = p;
            return res;
        }
        t += d;
        if (t > params.far_plane * 2.0 || t < -1e-3) break;
    }
    return res;
}

}  // namespace

DepthImage render_depth(const Scene& scene, const Intrinsics& intrinsics, const Pose& camera_pose,
                        const RenderParams& params) {
    DepthImage image;
    image.intrinsics = intrinsics;
    image.camera_pose = camera_pose;
    image.far_plane = params.far_plane;
    image.depth.assign(static_cast<size_t>(intrinsics.width) * intrinsics.height, depth_no_hit());
    const Vec3 origin = camera_pose.translation;
    const size_t n = image.depth.size();
    parallel_for_chunked(n, 1024, [&](size_t begin, size_t end) {
        for (size_t i = begin; i < end; ++i) {
            const int u = static_cast<int>(i % intrinsics.width);
            const int v = static_cast<int>(i / intrinsics.width);
            const Vec3 dir_cam = image.pixel_dir_camera(u, v);
            const Vec3 dir = camera_pose.apply_dir(dir_cam);
            const TraceResult hit = sphere_trace(scene, origin, dir, params);
            if (hit.ray_t >= 0.0) {
                const double z = hit.ray_t * dir_cam.z;
                if (z <= params.far_plane) image.depth[i] = z;
            }
        }
    });
    if (params.depth_noise_sigma > 0.0) {
        Rng rng(params.noise_seed);
        for (double& d : image.depth) {
            const double eps = rng.normal() * params.depth_noise_sigma;
            if (is_hit(d)) d = std::max(1e-4, d + eps);
        }
    }
    return image;
}

std::vector<int> render_primitive_ids(const Scene& scene, const Intrinsics& intrinsics,
                                      const Pose& camera_pose, const RenderParams& params) {
    std::vector<int> ids(static_cast<size_t>(intrinsics.width) * intrinsics.height, -1);
    DepthImage probe;
    probe.intrinsics = intrinsics;
    probe.camera_pose = camera_pose;
    const Vec3 origin = camera_pose.translation;
    parallel_for_chunked(ids.size(), 1024, [&](size_t begin, size_t end) {
        for (size_t i = begin; i < end; ++i) {
            const int u = static_cast<int>(i % intrinsics.width);
            const int v = static_cast<int>(i / intrinsics.width);
            const Vec3 dir_cam = probe.pixel_dir_camera(u, v);
            const Vec3 dir = camera_pose.apply_dir(dir_cam);
            const TraceResult hit = sphere_trace(scene, origin, dir, params);
            if (hit.ray_t < 0.0 || hit.ray_t * dir_cam.z > params.far_plane) continue;
            int owner = -1;
            double best = hit.point.z - scene.workspace.plane_height();
            for (size_t k = 0; k < scene.primitives.size(); ++k) {
                const double d = scene.primitives[k].sdf(hit.point);
                if (d < best) {
                    best = d;
                    owner = static_cast<int>(k);
                }
            }
            ids[i] = owner;
        }
    });
    return ids;
}

TargetSelection select_target(const Scene& scene, const Intrinsics& intrinsics,
                              const Pose& camera_pose, const RenderParams& params) {
    TargetSelection sel;
    sel.visible_pixels.assign(scene.primitives.size(), 0);
    const std::vector<int> ids = render_primitive_ids(scene, intrinsics, camera_pose, params);
    for (int id : ids) {
        if (id >= 0) sel.visible_pixels[id]++;
    }
    int best = std::numeric_limits<int>::max();
    for (size_t k = 0; k < sel.visible_pixels.size(); ++k) {
        if (sel.visible_pixels[k] < best) {
            best = sel.visible_pixels[k];
            sel.index = static_cast<int>(k);
        }
    }
    sel.zero_visible = (best == 0);
    return sel;
}

Pose look_at_pose(const Vec3& eye, const Vec3& look) {
    const Vec3 fwd = normalized(look - eye);
    Vec3 down{0, 0, -1};
    if (std::fabs(fwd.z) > 0.99) down = {1, 0, 0};
    Vec3 y_cam = down - dot(down, fwd) * fwd;
    y_cam = normalized(y_cam);
    const Vec3 x_cam = cross(y_cam, fwd);
    return {Rotation::from_basis(x_cam, y_cam, fwd), eye};
}

void save_depth_pgm(const DepthImage& image, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write PGM: " + path);
    out << "P5\n" << image.width() << " " << image.height() << "\n65535\n";
    for (double d : image.depth) {
        uint16_t mm = 0;
        if (is_hit(d)) {
            const double v = std::round(d * 1000.0);
            mm = static_cast<uint16_t>(std::clamp(v, 1.0, 65535.0));
        }
        const unsigned char bytes[2] = {static_cast<unsigned char>(mm >> 8),
                                        static_cast<unsigned char>(mm & 0xff)};
        out.write(reinterpret_cast<const char*>(bytes), 2);
    }
}

std::vector<double> load_depth_pgm(const std::string& path, int& width, int& height) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read PGM: " + path);
    std::string magic;
    int maxval = 0;
    in >> magic >> width >> height >> maxval;
    if (magic != "P5" || maxval != 65535) throw std::runtime_error("not a 16-bit PGM: " + path);
    in.get();  // single whitespace after the header
    std::vector<double> depth(static_cast<size_t>(width) * height, depth_no_hit());
    for (double& d : depth) {
        unsigned char bytes[2];
        in.read(reinterpret_cast<char*>(bytes), 2);
        const uint16_t mm = static_cast<uint16_t>((bytes[0] << 8) | bytes[1]);
        if (mm > 0) d = mm / 1000.0;
    }
    if (!in) throw std::runtime_error("truncated PGM: " + path);
    return depth;
}

void save_point_cloud_ply(const DepthImage& image, const std::string& path) {
    std::vector<Vec3> pts;
    for (int v = 0; v < image.height(); ++v) {
        for (int u = 0; u < image.width(); ++u) {
            const double d = image.at(u, v);
            if (is_hit(d)) pts.push_back(image.unproject(u, v, d));
        }
    }
    save_points_ply(pts, path);
}

void save_points_ply(const std::vector<Vec3>& points, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write PLY: " + path);
    out << "ply\nformat ascii 1.0\nelement vertex " << points.size()
        << "\nproperty float x\nproperty float y\nproperty float z\nend_header\n";
    char line[96];
    for (const Vec3& p : points) {
        std::snprintf(line, sizeof(line), "%.6f %.6f %.6f\n", p.x, p.y, p.z);
        out << line;
    }
}

}  // namespace nbv
