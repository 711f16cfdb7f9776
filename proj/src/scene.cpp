#include "nbv/scene.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "nbv/rng.hpp"

namespace nbv {

const char* shape_kind_name(ShapeKind kind) {
    switch (kind) {
        case ShapeKind::Sphere: return "sphere";
        case ShapeKind::Box: return "box";
        case ShapeKind::Cylinder: return "cylinder";
    }
    return "sphere";
}

ShapeKind shape_kind_from_name(const std::string& name) {
    if (name == "sphere") return ShapeKind::Sphere;
    if (name == "box") return ShapeKind::Box;
    if (name == "cylinder") return ShapeKind::Cylinder;
    throw std::runtime_error("unknown shape kind: " + name);
}

SdfPrimitive SdfPrimitive::sphere(double radius, const Vec3& center) {
    SdfPrimitive p;
    p.kind = ShapeKind::Sphere;
    p.params = {radius, 0, 0};
    p.pose = {Rotation::identity(), center};
    return p;
}

SdfPrimitive SdfPrimitive::box(const Vec3& half_extents, const Pose& pose) {
    SdfPrimitive p;
    p.kind = ShapeKind::Box;
    p.params = half_extents;
    p.pose = pose;
    return p;
}

SdfPrimitive SdfPrimitive::cylinder(double radius, double half_height, const Pose& pose) {
    SdfPrimitive p;
    p.kind = ShapeKind::Cylinder;
    p.params = {radius, half_height, 0};
    p.pose = pose;
    return p;
}

namespace {

double sdf_sphere_local(const Vec3& p, double r) { return norm(p) - r; }

double sdf_box_local(const Vec3& p, const Vec3& h) {
    const Vec3 q = cwise_abs(p) - h;
    const Vec3 q_out = cwise_max(q, Vec3{0, 0, 0});
    return norm(q_out) + std::min(0.0, max_component(q));
}

double sdf_cylinder_local(const Vec3& p, double r, double hh) {
    const double dr = std::hypot(p.x, p.y) - r;
    const double dz = std::fabs(p.z) - hh;
    const double outside = std::hypot(std::max(dr, 0.0), std::max(dz, 0.0));
    const double inside = std::min(0.0, std::max(dr, dz));
    return outside + inside;
}

}  // namespace

double SdfPrimitive::sdf(const Vec3& p_world) const {
    if (kind == ShapeKind::Sphere) return norm(p_world - pose.translation) - params.x;
    const Vec3 p = pose.rotation.conjugate().apply(p_world - pose.translation);
    switch (kind) {
        case ShapeKind::Box: return sdf_box_local(p, params);
        case ShapeKind::Cylinder: return sdf_cylinder_local(p, params.x, params.y);
        default: return sdf_sphere_local(p, params.x);
    }
}

Aabb SdfPrimitive::bounding_box() const {
    switch (kind) {
        case ShapeKind::Sphere: {
            const double r = params.x;
            return {pose.translation - Vec3{r, r, r}, pose.translation + Vec3{r, r, r}};
        }
        case ShapeKind::Box: {
            // |R| * h per world axis.
            Vec3 ext{0, 0, 0};
            const Vec3 cols[3] = {pose.rotation.apply({1, 0, 0}), pose.rotation.apply({0, 1, 0}),
                                  pose.rotation.apply({0, 0, 1})};
            for (int axis = 0; axis < 3; ++axis) {
                ext[axis] = std::fabs(cols[0][axis]) * params.x +
                            std::fabs(cols[1][axis]) * params.y +
                            std::fabs(cols[2][axis]) * params.z;
            }
            return {pose.translation - ext, pose.translation + ext};
        }
        case ShapeKind::Cylinder: {
            const Vec3 u = pose.rotation.apply({0, 0, 1});
            Vec3 ext{0, 0, 0};
            for (int axis = 0; axis < 3; ++axis) {
                const double c = std::clamp(u[axis], -1.0, 1.0);
                ext[axis] = params.x * std::sqrt(std::max(0.0, 1.0 - c * c)) +
                            params.y * std::fabs(c);
            }
            return {pose.translation - ext, pose.translation + ext};
        }
    }
    return {pose.translation, pose.translation};
}

std::vector<Vec3> SdfPrimitive::surface_points(double spacing) const {
    std::vector<Vec3> local;
    const auto push_grid = [&](const Vec3& o, const Vec3& du, const Vec3& dv, double lu, double lv) {
        const int nu = std::max(1, static_cast<int>(std::ceil(lu / spacing)));
        const int nv = std::max(1, static_cast<int>(std::ceil(lv / spacing)));
        for (int i = 0; i <= nu; ++i)
            for (int j = 0; j <= nv; ++j)
                local.push_back(o + du * (lu * i / nu) + dv * (lv * j / nv));
    };
    switch (kind) {
        case ShapeKind::Sphere: {
            const double r = params.x;
            const int n = std::max(8, static_cast<int>(std::ceil(4.0 * kPi * r * r / (spacing * spacing))));
            const double ga = kPi * (3.0 - std::sqrt(5.0));
            for (int k = 0; k < n; ++k) {
                const double z = 1.0 - 2.0 * (k + 0.5) / n;
                const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
                const double a = ga * k;
                local.push_back(Vec3{rho * std::cos(a), rho * std::sin(a), z} * r);
            }
            break;
        }
        case ShapeKind::Box: {
            const Vec3 h = params;
            for (int s = -1; s <= 1; s += 2) {
                push_grid({s * h.x, -h.y, -h.z}, {0, 1, 0}, {0, 0, 1}, 2 * h.y, 2 * h.z);
                push_grid({-h.x, s * h.y, -h.z}, {1, 0, 0}, {0, 0, 1}, 2 * h.x, 2 * h.z);
                push_grid({-h.x, -h.y, s * h.z}, {1, 0, 0}, {0, 1, 0}, 2 * h.x, 2 * h.y);
            }
            break;
        }
        case ShapeKind::Cylinder: {
            const double r = params.x, hh = params.y;
            const int n_ring = std::max(8, static_cast<int>(std::ceil(2.0 * kPi * r / spacing)));
            const int n_z = std::max(1, static_cast<int>(std::ceil(2.0 * hh / spacing)));
            for (int iz = 0; iz <= n_z; ++iz) {
                const double z = -hh + 2.0 * hh * iz / n_z;
                for (int ia = 0; ia < n_ring; ++ia) {
                    const double a = 2.0 * kPi * ia / n_ring;
                    local.push_back({r * std::cos(a), r * std::sin(a), z});
                }
            }
            const int n_rad = std::max(1, static_cast<int>(std::ceil(r / spacing)));
            for (int s = -1; s <= 1; s += 2) {
                for (int ir = 0; ir <= n_rad; ++ir) {
                    const double rr = r * ir / n_rad;
                    const int n_a = std::max(1, static_cast<int>(std::ceil(2.0 * kPi * rr / spacing)));
                    for (int ia = 0; ia < n_a; ++ia) {
                        const double a = 2.0 * kPi * ia / n_a;
                        local.push_back({rr * std::cos(a), rr * std::sin(a), s * hh});
                    }
                }
            }
            break;
        }
    }
    std::vector<Vec3> world;
    world.reserve(local.size());
    for (const Vec3& p : local) world.push_back(pose.apply(p));
    return world;
}

double scene_sdf(const Scene& scene, const Vec3& p) {
    return scene_sdf_excluding(scene, p, -1);
}

double scene_sdf_excluding(const Scene& scene, const Vec3& p, int excluded_index) {
    double d = p.z - scene.workspace.plane_height();
    for (size_t i = 0; i < scene.primitives.size(); ++i) {
        if (static_cast<int>(i) == excluded_index) continue;
        d = std::min(d, scene.primitives[i].sdf(p));
    }
    return d;
}

namespace {

// xy-footprint of an upright object: a circle (sphere, upright cylinder) or a
// yaw-rotated rectangle (box). Projection is non-expansive, so a footprint gap
// lower-bounds the 3D gap.
struct Footprint {
    bool is_circle = true;
    double cx = 0, cy = 0;
    double radius = 0;
    double hx = 0, hy = 0;  // rectangle half extents
    double yaw = 0;
};

Footprint footprint_of(const SdfPrimitive& p) {
    Footprint f;
    f.cx = p.pose.translation.x;
    f.cy = p.pose.translation.y;
    switch (p.kind) {
        case ShapeKind::Sphere:
            f.radius = p.params.x;
            break;
        case ShapeKind::Cylinder:
            f.radius = p.params.x;
            break;
        case ShapeKind::Box: {
            f.is_circle = false;
            f.hx = p.params.x;
            f.hy = p.params.y;
            const Vec3 ex = p.pose.rotation.apply({1, 0, 0});
            f.yaw = std::atan2(ex.y, ex.x);
            break;
        }
    }
    return f;
}

double dist_point_rect(double px, double py, const Footprint& r) {
    // into the rectangle frame
    const double dx = px - r.cx, dy = py - r.cy;
    const double c = std::cos(-r.yaw), s = std::sin(-r.yaw);
    const double lx = c * dx - s * dy;
    const double ly = s * dx + c * dy;
    const double qx = std::max(std::fabs(lx) - r.hx, 0.0);
    const double qy = std::max(std::fabs(ly) - r.hy, 0.0);
    return std::hypot(qx, qy);
}

double rect_corner(const Footprint& r, int i, double& x, double& y) {
    const double sx = (i & 1) ? r.hx : -r.hx;
    const double sy = (i & 2) ? r.hy : -r.hy;
    const double c = std::cos(r.yaw), s = std::sin(r.yaw);
    x = r.cx + c * sx - s * sy;
    y = r.cy + s * sx + c * sy;
    return 0;
}

double dist_segment_segment_2d(double ax, double ay, double bx, double by, double cx, double cy,
                               double dx, double dy) {
    auto cross2 = [](double ux, double uy, double vx, double vy) { return ux * vy - uy * vx; };
    const double d1 = cross2(bx - ax, by - ay, cx - ax, cy - ay);
    const double d2 = cross2(bx - ax, by - ay, dx - ax, dy - ay);
    const double d3 = cross2(dx - cx, dy - cy, ax - cx, ay - cy);
    const double d4 = cross2(dx - cx, dy - cy, bx - cx, by - cy);
    if (((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0))) return 0.0;  // proper intersection
    auto pt_seg = [](double px, double py, double sx, double sy, double ex, double ey) {
        const double vx = ex - sx, vy = ey - sy;
        const double len2 = vx * vx + vy * vy;
        double t = len2 > 0 ? ((px - sx) * vx + (py - sy) * vy) / len2 : 0.0;
        t = std::clamp(t, 0.0, 1.0);
        return std::hypot(px - (sx + t * vx), py - (sy + t * vy));
    };
    double d = pt_seg(ax, ay, cx, cy, dx, dy);
    d = std::min(d, pt_seg(bx, by, cx, cy, dx, dy));
    d = std::min(d, pt_seg(cx, cy, ax, ay, bx, by));
    d = std::min(d, pt_seg(dx, dy, ax, ay, bx, by));
    return d;
}

double dist_rect_rect(const Footprint& a, const Footprint& b) {
    // zero when one contains the other's center
    if (dist_point_rect(a.cx, a.cy, b) == 0.0 || dist_point_rect(b.cx, b.cy, a) == 0.0) return 0.0;
    double ax[4], ay[4], bx[4], by[4];
    for (int i = 0; i < 4; ++i) rect_corner(a, i, ax[i], ay[i]);
    for (int i = 0; i < 4; ++i) rect_corner(b, i, bx[i], by[i]);
    const int order[4] = {0, 1, 3, 2};  // perimeter order
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 4; ++i) {
        const int i2 = order[(i + 1) % 4];
        for (int j = 0; j < 4; ++j) {
            const int j2 = order[(j + 1) % 4];
            best = std::min(best, dist_segment_segment_2d(ax[order[i]], ay[order[i]], ax[i2], ay[i2],
                                                          bx[order[j]], by[order[j]], bx[j2], by[j2]));
        }
    }
    return best;
}

double footprint_gap(const Footprint& a, const Footprint& b) {
    if (a.is_circle && b.is_circle) {
        return std::hypot(a.cx - b.cx, a.cy - b.cy) - a.radius - b.radius;
    }
    if (a.is_circle != b.is_circle) {
        const Footprint& c = a.is_circle ? a : b;
        const Footprint& r = a.is_circle ? b : a;
        return dist_point_rect(c.cx, c.cy, r) - c.radius;
    }
    return dist_rect_rect(a, b);
}

}  // namespace

Scene generate_packed_scene(uint64_t seed, const PackedSceneConfig& config) {
    if (config.object_count < 3 || config.object_count > 8) {
        throw GenerationError("object_count must be in [3, 8]");
    }
    Rng rng(seed);
    Scene scene;
    const Workspace& ws = scene.workspace;
    const double lo = ws.origin.x + config.margin;
    const double hi = ws.origin.x + ws.edge - config.margin;

    std::vector<Footprint> footprints;
    int rejections = 0;
    while (static_cast<int>(scene.primitives.size()) < config.object_count) {
        const int kind_draw = static_cast<int>(rng.uniform_int(0, 2));
        SdfPrimitive prim;
        const double px = rng.uniform(lo, hi);
        const double py = rng.uniform(lo, hi);
        switch (kind_draw) {
            case 0: {
                const double r = rng.uniform(0.012, 0.028);
                prim = SdfPrimitive::sphere(r, {px, py, ws.plane_height() + r});
                break;
            }
            case 1: {
                const Vec3 h{rng.uniform(0.010, 0.028), rng.uniform(0.010, 0.028),
                             rng.uniform(0.015, 0.045)};
                const double yaw = rng.uniform(0.0, kPi);
                const Pose pose{Rotation::from_axis_angle({0, 0, 1}, yaw),
                                {px, py, ws.plane_height() + h.z}};
                prim = SdfPrimitive::box(h, pose);
                break;
            }
            default: {
                const double r = rng.uniform(0.010, 0.024);
                const double hh = rng.uniform(0.015, 0.050);
                prim = SdfPrimitive::cylinder(r, hh, {Rotation::identity(),
                                                      {px, py, ws.plane_height() + hh}});
                break;
            }
        }
        const Footprint fp = footprint_of(prim);
        bool ok = true;
        for (const Footprint& other : footprints) {
            if (footprint_gap(fp, other) < config.min_separation) {
                ok = false;
                break;
            }
        }
        if (!ok) {
            if (++rejections > config.max_rejections) {
                throw GenerationError("packed scene generation exceeded rejection budget");
            }
            continue;
        }
        scene.primitives.push_back(prim);
        footprints.push_back(fp);
    }
    return scene;
}

Scene generate_packed_scene(uint64_t seed, int object_count) {
    PackedSceneConfig config;
    config.object_count = object_count;
    return generate_packed_scene(seed, config);
}

void assign_target(Scene& scene, int index, double pad) {
    if (index < 0 || index >= static_cast<int>(scene.primitives.size())) {
        throw std::out_of_range("target index out of range");
    }
    scene.target_index = index;
    const Aabb box = scene.primitives[index].bounding_box().padded(pad);
    scene.target_bbox = box.intersect(scene.workspace.bounds());
}

std::string scene_to_json(const Scene& scene) {
    nlohmann::json j;
    j["format"] = "nbv-scene";
    j["version"] = 1;
    j["workspace"] = {{"origin", {scene.workspace.origin.x, scene.workspace.origin.y,
                                  scene.workspace.origin.z}},
                      {"edge", scene.workspace.edge}};
    j["target_index"] = scene.target_index;
    j["target_bbox"] = {{"min", {scene.target_bbox.min.x, scene.target_bbox.min.y,
                                 scene.target_bbox.min.z}},
                        {"max", {scene.target_bbox.max.x, scene.target_bbox.max.y,
                                 scene.target_bbox.max.z}}};
    nlohmann::json prims = nlohmann::json::array();
    for (const SdfPrimitive& p : scene.primitives) {
        nlohmann::json e;
        e["kind"] = shape_kind_name(p.kind);
        e["params"] = {p.params.x, p.params.y, p.params.z};
        e["rotation_wxyz"] = {p.pose.rotation.w, p.pose.rotation.x, p.pose.rotation.y,
                              p.pose.rotation.z};
        e["translation_xyz"] = {p.pose.translation.x, p.pose.translation.y, p.pose.translation.z};
        prims.push_back(e);
    }
    j["primitives"] = prims;
    return j.dump(2);
}

Scene scene_from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    if (j.value("format", "") != "nbv-scene") throw std::runtime_error("not a scene document");
    if (j.value("version", 0) != 1) throw std::runtime_error("unsupported scene version");
    Scene scene;
    const auto& ws = j.at("workspace");
    scene.workspace.origin = {ws.at("origin")[0], ws.at("origin")[1], ws.at("origin")[2]};
    scene.workspace.edge = ws.at("edge");
    scene.target_index = j.at("target_index");
    const auto& bb = j.at("target_bbox");
    scene.target_bbox.min = {bb.at("min")[0], bb.at("min")[1], bb.at("min")[2]};
    scene.target_bbox.max = {bb.at("max")[0], bb.at("max")[1], bb.at("max")[2]};
    for (const auto& e : j.at("primitives")) {
        SdfPrimitive p;
        p.kind = shape_kind_from_name(e.at("kind"));
        p.params = {e.at("params")[0], e.at("params")[1], e.at("params")[2]};
        p.pose.rotation = {e.at("rotation_wxyz")[0], e.at("rotation_wxyz")[1],
                           e.at("rotation_wxyz")[2], e.at("rotation_wxyz")[3]};
        p.pose.translation = {e.at("translation_xyz")[0], e.at("translation_xyz")[1],
                              e.at("translation_xyz")[2]};
        scene.primitives.push_back(p);
    }
    return scene;
}

void save_scene(const Scene& scene, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write scene file: " + path);
    out << scene_to_json(scene) << "\n";
}

Scene load_scene(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read scene file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return scene_from_json(ss.str());
}

}  // namespace nbv
