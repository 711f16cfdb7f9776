#include "nbv/grasp.hpp"

namespace nbv {

const char* grasp_failure_name(GraspFailure f) {
    switch (f) {
        case GraspFailure::None: return "none";
        case GraspFailure::Contact: return "contact";
        case GraspFailure::Collision: return "collision";
        case GraspFailure::Approach: return "approach";
        case GraspFailure::OutOfWorkspace: return "out_of_workspace";
    }
    return "none";
}

GraspFrame grasp_frame(const Vec3& view, double rotation) {
    const Frame base = frame_from_direction(view);
    const Rotation spin = Rotation::from_axis_angle(base.axis, rotation);
    GraspFrame f;
    f.approach = base.axis;
    f.closing = spin.apply(base.side);
    f.binormal = cross(f.approach, f.closing);
    return f;
}

namespace {

// Surface normal of one primitive by central differences.
Vec3 primitive_normal(const SdfPrimitive& prim, const Vec3& p) {
    const double h = 2.5e-4;
    Vec3 n{prim.sdf({p.x + h, p.y, p.z}) - prim.sdf({p.x - h, p.y, p.z}),
           prim.sdf({p.x, p.y + h, p.z}) - prim.sdf({p.x, p.y - h, p.z}),
           prim.sdf({p.x, p.y, p.z + h}) - prim.sdf({p.x, p.y, p.z - h})};
    const double len = norm(n);
    if (len < 1e-12) return {0, 0, 1};
    return n / len;
}

// First surface crossing of the target when marching inward from the max
// opening toward the grasp center. Returns the contact offset t >= 0 along
// `dir`, or a negative value when no contact exists from free space.
double find_contact(const SdfPrimitive& target, const Vec3& center, const Vec3& dir,
                    double half_opening, double step) {
    double t_prev = half_opening;
    double d_prev = target.sdf(center + t_prev * dir);
    if (d_prev < 0.0) return -1.0;  // the finger would start inside the target
    const int n = std::max(2, static_cast<int>(std::ceil(half_opening / step)));
    for (int i = 1; i <= n; ++i) {
        const double t = half_opening * (1.0 - static_cast<double>(i) / n);
        const double d = target.sdf(center + t * dir);
        if (d < 0.0) {
            // bisect [t, t_prev], d(t) < 0 <= d(t_prev)
            double lo = t, hi = t_prev;
            for (int it = 0; it < 24; ++it) {
                const double mid = 0.5 * (lo + hi);
                if (target.sdf(center + mid * dir) < 0.0) lo = mid;
                else hi = mid;
            }
            return 0.5 * (lo + hi);
        }
        t_prev = t;
        d_prev = d;
    }
    return -1.0;
}

bool body_clear(const Scene& scene, const std::vector<Vec3>& points, int target_index,
                double clearance) {
    for (const Vec3& p : points) {
        if (scene_sdf_excluding(scene, p, target_index) <= clearance) return false;
    }
    return true;
}

bool palm_clear_of_target(const SdfPrimitive& target, const std::vector<Vec3>& palm_points) {
    for (const Vec3& p : palm_points) {
        if (target.sdf(p) <= 0.0) return false;
    }
    return true;
}

void push_box_lattice(std::vector<Vec3>& out, const Vec3& corner, const Vec3& ax, double lx,
                      const Vec3& ay, double ly, const Vec3& az, double lz, double spacing) {
    const int nx = std::max(1, static_cast<int>(std::ceil(lx / spacing)));
    const int ny = std::max(1, static_cast<int>(std::ceil(ly / spacing)));
    const int nz = std::max(1, static_cast<int>(std::ceil(lz / spacing)));
    for (int i = 0; i <= nx; ++i)
        for (int j = 0; j <= ny; ++j)
            for (int k = 0; k <= nz; ++k)
                out.push_back(corner + ax * (lx * i / nx) + ay * (ly * j / ny) + az * (lz * k / nz));
}

}  // namespace

std::vector<Vec3> gripper_body_points(const Grasp& grasp, const Gripper& gripper, double spacing,
                                      double back_offset, bool palm_only) {
    const GraspFrame f = grasp_frame(grasp.view, grasp.rotation);
    const Vec3 base = grasp.center - back_offset * f.approach;
    const double w2 = grasp.width * 0.5;
    const double ft = gripper.finger_thickness;
    const double fd = gripper.finger_depth;
    const double fl = gripper.finger_length;
    std::vector<Vec3> pts;
    if (!palm_only) {
        for (int s = -1; s <= 1; s += 2) {
            const Vec3 inner = base + f.closing * (s * w2) - f.binormal * (fd * 0.5) -
                               f.approach * fl;
            push_box_lattice(pts, inner, f.closing * s, ft, f.binormal, fd, f.approach, fl,
                             spacing);
        }
    }
    const Vec3 palm_corner = base - f.closing * (w2 + ft) - f.binormal * (fd * 0.5) -
                             f.approach * (fl + gripper.palm_depth);
    push_box_lattice(pts, palm_corner, f.closing, 2.0 * (w2 + ft), f.binormal, fd, f.approach,
                     gripper.palm_depth, spacing);
    return pts;
}

GraspCheck grasp_feasible_with(const Scene& scene, const Grasp& grasp, const Gripper& gripper,
                               const GraspCheckParams& params) {
    GraspCheck result;
    if (!scene.has_target()) throw std::logic_error("grasp_feasible requires a scene target");
    if (!scene.workspace.bounds().contains(grasp.center)) {
        result.failure = GraspFailure::OutOfWorkspace;
        return result;
    }
    const SdfPrimitive& target = scene.target();
    const GraspFrame frame = grasp_frame(grasp.view, grasp.rotation);

    // (a) antipodal contact on the target
    const double half_opening = gripper.max_width * 0.5;
    const double t_pos = find_contact(target, grasp.center, frame.closing, half_opening,
                                      params.contact_step);
    const double t_neg = find_contact(target, grasp.center, -frame.closing, half_opening,
                                      params.contact_step);
    if (t_pos < 0.0 || t_neg < 0.0) {
        result.failure = GraspFailure::Contact;
        return result;
    }
    result.contact_pos = grasp.center + t_pos * frame.closing;
    result.contact_neg = grasp.center - t_neg * frame.closing;
    result.contact_span = t_pos + t_neg;
    if (result.contact_span > grasp.width + 1e-9) {
        result.failure = GraspFailure::Contact;  // commanded opening cannot embrace the target
        return result;
    }
    const Vec3 n_pos = primitive_normal(target, result.contact_pos);
    const Vec3 n_neg = primitive_normal(target, result.contact_neg);
    const double cone = gripper.normal_cone_deg * kPi / 180.0;
    if (angle_between(n_pos, -n_neg) > cone || dot(n_pos, frame.closing) <= 0.0 ||
        dot(n_neg, -frame.closing) <= 0.0) {
        result.failure = GraspFailure::Contact;
        return result;
    }

    // (b) posed body clearance against non-target geometry
    Grasp posed = grasp;
    posed.width = std::min(grasp.width, gripper.max_width);
    const auto body = gripper_body_points(posed, gripper, params.body_sample_spacing, 0.0);
    if (!body_clear(scene, body, scene.target_index, gripper.clearance)) {
        result.failure = GraspFailure::Collision;
        return result;
    }
    const auto palm0 = gripper_body_points(posed, gripper, params.body_sample_spacing, 0.0, true);
    if (!palm_clear_of_target(target, palm0)) {
        result.failure = GraspFailure::Collision;
        return result;
    }

    // (c) retreat segment of one finger length along -approach
    for (int i = 1; i <= params.approach_samples; ++i) {
        const double back = gripper.finger_length * i / params.approach_samples;
        const auto swept = gripper_body_points(posed, gripper, params.body_sample_spacing, back);
        if (!body_clear(scene, swept, scene.target_index, gripper.clearance)) {
            result.failure = GraspFailure::Approach;
            return result;
        }
        const auto palm = gripper_body_points(posed, gripper, params.body_sample_spacing, back, true);
        if (!palm_clear_of_target(target, palm)) {
            result.failure = GraspFailure::Approach;
            return result;
        }
    }

    result.success = true;
    return result;
}

GraspCheck grasp_feasible(const Scene& scene, const Grasp& grasp, const Gripper& gripper) {
    GraspCheckParams params{gripper.contact_step, gripper.body_sample_spacing,
                            gripper.approach_samples};
    return grasp_feasible_with(scene, grasp, gripper, params);
}

}  // namespace nbv
