#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "nbv/geom.hpp"
#include "nbv/scene.hpp"

namespace nbv {

// Pinhole model, x right / y down / z forward; pixel (u, v) rays pass through
// the pixel center (u + 0.5, v + 0.5).
struct Intrinsics {
    int width = 96;
    int height = 96;
    double fx = 110.0;
    double fy = 110.0;
    double cx = 48.0;
    double cy = 48.0;
};

inline double depth_no_hit() { return std::numeric_limits<double>::quiet_NaN(); }
inline bool is_hit(double depth) { return std::isfinite(depth); }

// Depth values are z-depth in the camera frame (meters); non-finite = no hit.
struct DepthImage {
    Intrinsics intrinsics;
    Pose camera_pose;  // world-from-camera
    double far_plane = 1.5;
    std::vector<double> depth;

    int width() const { return intrinsics.width; }
    int height() const { return intrinsics.height; }
    double at(int u, int v) const { return depth[static_cast<size_t>(v) * intrinsics.width + u]; }
    double& at(int u, int v) { return depth[static_cast<size_t>(v) * intrinsics.width + u]; }

    // Unit ray direction in camera coordinates for pixel (u, v).
    Vec3 pixel_dir_camera(int u, int v) const;
    // World-space point for a pixel with the given z-depth.
    Vec3 unproject(int u, int v, double z_depth) const;
};

struct RenderParams {
    double hit_epsilon = 1e-4;
    int max_steps = 128;
    double far_plane = 1.5;
    double depth_noise_sigma = 0.0;  // optional Gaussian jitter on hit depths
    uint64_t noise_seed = 0;
};

DepthImage render_depth(const Scene& scene, const Intrinsics& intrinsics, const Pose& camera_pose,
                        const RenderParams& params = {});

// Per-pixel index of the primitive owning the first hit (-1 = no hit or plane).
std::vector<int> render_primitive_ids(const Scene& scene, const Intrinsics& intrinsics,
                                      const Pose& camera_pose, const RenderParams& params = {});

struct TargetSelection {
    int index = -1;
    std::vector<int> visible_pixels;  // per primitive
    bool zero_visible = false;        // flagged when the chosen target has 0 visible pixels
};

// Object with the fewest visible pixels in the view; ties go to the lowest index.
TargetSelection select_target(const Scene& scene, const Intrinsics& intrinsics,
                              const Pose& camera_pose, const RenderParams& params = {});

// Camera pose at `eye` whose optical axis points at `look`.
Pose look_at_pose(const Vec3& eye, const Vec3& look);

// 16-bit PGM, millimeters, row-major from top-left; no-hit stored as 0.
void save_depth_pgm(const DepthImage& image, const std::string& path);
// Reads the geometry back; intrinsics/pose are not stored in the PGM.
std::vector<double> load_depth_pgm(const std::string& path, int& width, int& height);

// ASCII PLY of the back-projected hit pixels.
void save_point_cloud_ply(const DepthImage& image, const std::string& path);
void save_points_ply(const std::vector<Vec3>& points, const std::string& path);

}  // namespace nbv
