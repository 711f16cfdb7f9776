#pragma once

#include <string>
#include <vector>

#include "nbv/geom.hpp"
#include "nbv/scene.hpp"

namespace nbv {

// Parallel-jaw grasp: approach direction `view` (unit, pointing at the scene),
// in-plane rotation about it (period pi for the symmetric gripper), opening width.
struct Grasp {
    double quality = 0.0;    // in [0, 1]
    Vec3 center;             // meters
    Vec3 view{0, 0, -1};     // unit
    double rotation = 0.0;   // radians in [0, pi)
    double width = 0.0;      // meters in [0, max opening]
};

struct Gripper {
    double finger_length = 0.05;
    double max_width = 0.08;       // maximum opening between finger inner faces
    double finger_thickness = 0.008;
    double finger_depth = 0.016;   // extent along the grasp binormal
    double palm_depth = 0.016;
    double clearance = 0.001;      // required SDF margin against non-target geometry
    double normal_cone_deg = 30.0; // antipodal opposition tolerance
    double contact_step = 0.0005;  // marching step when searching for contacts
    double body_sample_spacing = 0.003;
    int approach_samples = 6;      // poses checked along the retreat segment
};

enum class GraspFailure { None, Contact, Collision, Approach, OutOfWorkspace };

const char* grasp_failure_name(GraspFailure f);

struct GraspCheck {
    bool success = false;
    GraspFailure failure = GraspFailure::None;
    double contact_span = 0.0;  // distance between antipodal contacts along the closing axis
    Vec3 contact_pos;
    Vec3 contact_neg;
};

// Gripper frame for a grasp: approach axis = view, closing axis = base side
// vector rotated by `rotation` about the approach axis.
struct GraspFrame {
    Vec3 approach;
    Vec3 closing;
    Vec3 binormal;
};
GraspFrame grasp_frame(const Vec3& view, double rotation);

// Analytic feasibility: (a) antipodal contact on the target within the max
// opening with opposing normals, (b) gripper body clearance against non-target
// geometry, (c) collision-free approach segment one finger length long.
GraspCheck grasp_feasible(const Scene& scene, const Grasp& grasp, const Gripper& gripper = {});

// Exposed for the fine-step verification oracle in tests.
struct GraspCheckParams {
    double contact_step;
    double body_sample_spacing;
    int approach_samples;
};
GraspCheck grasp_feasible_with(const Scene& scene, const Grasp& grasp, const Gripper& gripper,
                               const GraspCheckParams& params);

// Sampled points of the posed gripper body (fingers + palm), world frame.
// Offset shifts the whole body backward along the approach axis.
std::vector<Vec3> gripper_body_points(const Grasp& grasp, const Gripper& gripper, double spacing,
                                      double back_offset, bool palm_only = false);

}  // namespace nbv
