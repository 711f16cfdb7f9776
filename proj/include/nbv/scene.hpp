#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "nbv/geom.hpp"

namespace nbv {

// Cubic workspace: [origin, origin + edge]^3 with the support plane at z = origin.z.
struct Workspace {
    Vec3 origin{0.0, 0.0, 0.0};
    double edge = 0.30;

    Aabb bounds() const { return {origin, origin + Vec3{edge, edge, edge}}; }
    Vec3 center() const { return origin + Vec3{edge, edge, edge} * 0.5; }
    double plane_height() const { return origin.z; }
};

enum class ShapeKind : uint8_t { Sphere, Box, Cylinder };

const char* shape_kind_name(ShapeKind kind);
ShapeKind shape_kind_from_name(const std::string& name);

struct SdfPrimitive {
    ShapeKind kind = ShapeKind::Sphere;
    // Sphere: params[0] = radius.
    // Box: params = half extents (x, y, z).
    // Cylinder: params[0] = radius, params[1] = half height (axis = local z).
    Vec3 params{0.01, 0.01, 0.01};
    Pose pose;

    static SdfPrimitive sphere(double radius, const Vec3& center);
    static SdfPrimitive box(const Vec3& half_extents, const Pose& pose);
    static SdfPrimitive cylinder(double radius, double half_height, const Pose& pose);

    // Exact signed distance (rigid transforms preserve the metric).
    double sdf(const Vec3& p_world) const;

    Aabb bounding_box() const;

    // Deterministic surface point set with roughly `spacing` meters between samples.
    std::vector<Vec3> surface_points(double spacing) const;
};

struct Scene {
    std::vector<SdfPrimitive> primitives;
    Workspace workspace;
    int target_index = -1;   // -1 until a target has been selected
    Aabb target_bbox{{0, 0, 0}, {0, 0, 0}};

    bool has_target() const { return target_index >= 0; }
    const SdfPrimitive& target() const { return primitives.at(target_index); }
};

// Min over primitive SDFs and the support-plane half-space.
double scene_sdf(const Scene& scene, const Vec3& p);

// Same, excluding one primitive (used for grasp clearance checks).
double scene_sdf_excluding(const Scene& scene, const Vec3& p, int excluded_index);

struct GenerationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PackedSceneConfig {
    int object_count = 5;             // must be in [3, 8]
    double margin = 0.05;             // keep-out band from workspace walls
    double min_separation = 0.002;    // footprint gap enforced between objects
    int max_rejections = 1000;
};

// Upright objects rejection-sampled onto the support plane; pure in (seed, config).
Scene generate_packed_scene(uint64_t seed, const PackedSceneConfig& config = {});
Scene generate_packed_scene(uint64_t seed, int object_count);

// Sets scene.target_index/target_bbox for a chosen primitive. The bbox is the
// primitive bounds padded by `pad` and clipped to the workspace.
void assign_target(Scene& scene, int index, double pad = 0.005);

// Versioned text document (JSON).
std::string scene_to_json(const Scene& scene);
Scene scene_from_json(const std::string& text);
void save_scene(const Scene& scene, const std::string& path);
Scene load_scene(const std::string& path);

}  // namespace nbv
