#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "nbv/affordance.hpp"
#include "nbv/depth_camera.hpp"
#include "nbv/tsdf.hpp"

namespace nbv {

struct ViewCandidate {
    Pose camera_pose;   // optical axis through the bbox center
    Vec3 view_dir;      // unit, camera-to-target
};

struct PolicyConfig {
    double q_max = 0.95;
    int t_max = 8;
    int candidate_count = 16;
    double view_radius = 0.45;
    double polar_cap_deg = 75.0;
    double q_exec = 0.5;              // execute-on-exhaustion threshold
    double revisit_exclusion_deg = 10.0;
    double min_camera_height = 0.02;  // cull candidates at or below the support plane
    double workspace_margin = 1.0;    // cull candidates farther than this outside the cube
    Intrinsics intrinsics;
    RenderParams render;
    TsdfConfig tsdf;
    AffordanceConfig affordance;
    Gripper gripper;
};

enum class EpisodeOutcome { Success, Failure, Abort };
const char* outcome_name(EpisodeOutcome o);
EpisodeOutcome outcome_from_name(const std::string& name);

struct StepRecord {
    int step = 0;  // 1-based
    Pose camera_pose;
    Vec3 view_dir;
    double current_q = 0.0;
    std::vector<double> candidate_scores;
    int chosen_candidate = -1;  // -1 when the step executed or exhausted
    int evaluations = 0;        // affordance queries spent this step
    size_t observed_voxels = 0;  // TSDF coverage after this step's integration
    std::vector<Grasp> imagined;  // current-view imagined set, quality-sorted
};

struct Episode {
    uint64_t scene_seed = 0;
    std::string policy;
    EpisodeOutcome outcome = EpisodeOutcome::Abort;
    std::string diagnostic;  // set when an internal failure aborted the episode
    std::optional<Grasp> executed;
    GraspFailure failure_reason = GraspFailure::None;
    int view_count = 0;
    bool target_zero_visible = false;
    std::vector<StepRecord> steps;
};

// Fibonacci-spiral coverage of the spherical cap above the bbox center.
// Throws std::runtime_error when every candidate is culled.
std::vector<ViewCandidate> generate_candidates(const Aabb& bbox, const PolicyConfig& config,
                                               const Workspace& workspace);

struct CandidateEvaluation {
    double best_q = 0.0;
    Grasp best;
    int evaluations = 0;
};
CandidateEvaluation evaluate_candidate(const AffordanceModel& model, const Aabb& bbox,
                                       const ViewCandidate& candidate, int lattice_count,
                                       const Workspace& workspace);

// Deterministic argmax with the spec tie-breaks: score descending, then smallest
// angular travel from the current view direction, then lowest index.
int choose_candidate(const std::vector<double>& scores,
                     const std::vector<ViewCandidate>& candidates, const Vec3& current_dir);

// Per-step affordance source: the trained head over freshly encoded planes, or
// the ground-truth oracle.
struct AffordanceSource {
    const AffordanceHead* head = nullptr;
    const EncoderWeights* encoder = nullptr;  // required with head
    bool use_oracle = false;
    AffordanceConfig affordance;
    Gripper gripper;

    static AffordanceSource net(const AffordanceHead& head, const EncoderWeights& encoder);
    static AffordanceSource oracle();
};

// Closed-loop planning: integrate the current view, gate on the current view's
// best imagined quality, otherwise move to the argmax candidate. On exhaustion
// the best grasp seen is executed when it clears q_exec, else the episode aborts.
Episode run_policy(const Scene& scene, const Pose& initial_view, const AffordanceSource& source,
                   const PolicyConfig& config);

enum class BaselineKind { InitialView, TopView, FixedTrajectory, GeometryGain };
const char* baseline_name(BaselineKind kind);

Episode baseline_policy(BaselineKind kind, const Scene& scene, const Pose& initial_view,
                        const AffordanceSource& source, const PolicyConfig& config);

// Unobserved (weight-0) voxels inside the bbox with a free line of sight from
// the camera, treating unknown space as free; the geometry-gain score.
int visible_unobserved_count(const TsdfVolume& volume, const Aabb& bbox, const Vec3& camera_pos,
                             double march_step_voxels = 0.25);

struct Metrics {
    double success_rate = 0.0;
    double failure_rate = 0.0;
    double abort_rate = 0.0;
    double mean_views = 0.0;
    std::optional<double> two_view_sr;
    int episode_count = 0;
};

Metrics compute_metrics(const std::vector<Episode>& episodes);
Metrics compute_metrics(const std::vector<Episode>& episodes,
                        const std::vector<Episode>& two_view_episodes);

// Line-delimited JSON trace for replay and visualization.
void save_episode_trace(const Episode& episode, const std::string& path);
Episode load_episode_trace(const std::string& path);

}  // namespace nbv
