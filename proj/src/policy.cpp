#include "nbv/policy.hpp"

#include <fstream>

#include <json.hpp>

#include "nbv/parallel.hpp"
#include "nbv/triplane.hpp"

namespace nbv {

const char* outcome_name(EpisodeOutcome o) {
    switch (o) {
        case EpisodeOutcome::Success: return "success";
        case EpisodeOutcome::Failure: return "failure";
        case EpisodeOutcome::Abort: return "abort";
    }
    return "abort";
}

EpisodeOutcome outcome_from_name(const std::string& name) {
    if (name == "success") return EpisodeOutcome::Success;
    if (name == "failure") return EpisodeOutcome::Failure;
    if (name == "abort") return EpisodeOutcome::Abort;
    throw std::runtime_error("unknown outcome: " + name);
}

const char* baseline_name(BaselineKind kind) {
    switch (kind) {
        case BaselineKind::InitialView: return "initial-view";
        case BaselineKind::TopView: return "top-view";
        case BaselineKind::FixedTrajectory: return "fixed-traj";
        case BaselineKind::GeometryGain: return "geometry-gain";
    }
    return "initial-view";
}

std::vector<ViewCandidate> generate_candidates(const Aabb& bbox, const PolicyConfig& config,
                                               const Workspace& workspace) {
    const Vec3 center = bbox.center();
    const double cap = config.polar_cap_deg * kPi / 180.0;
    const double cos_cap = std::cos(cap);
    std::vector<ViewCandidate> out;
    const int n = cap < 1e-12 ? 1 : config.candidate_count;
    const double golden = kPi * (3.0 - std::sqrt(5.0));
    const Aabb allowed = workspace.bounds().padded(config.workspace_margin);
    for (int k = 0; k < n; ++k) {
        const double cos_theta = n == 1 ? 1.0 : 1.0 - (k + 0.5) / n * (1.0 - cos_cap);
        const double sin_theta = std::sqrt(std::max(0.0, 1.0 - cos_theta * cos_theta));
        const double phi = golden * k;
        const Vec3 dir{sin_theta * std::cos(phi), sin_theta * std::sin(phi), cos_theta};
        const Vec3 pos = center + config.view_radius * dir;
        if (pos.z < workspace.plane_height() + config.min_camera_height) continue;
        if (!allowed.contains(pos)) continue;
        ViewCandidate cand;
        cand.camera_pose = look_at_pose(pos, center);
        cand.view_dir = normalized(center - pos);
        out.push_back(cand);
    }
    if (out.empty()) throw std::runtime_error("all view candidates were culled");
    return out;
}

CandidateEvaluation evaluate_candidate(const AffordanceModel& model, const Aabb& bbox,
                                       const ViewCandidate& candidate, int lattice_count,
                                       const Workspace& workspace) {
    CandidateEvaluation eval;
    const auto grasps = imagine_affordances(model, bbox, candidate.view_dir, lattice_count,
                                            workspace);
    eval.best_q = grasps.front().quality;
    eval.best = grasps.front();
    eval.evaluations = static_cast<int>(grasps.size());
    return eval;
}

int choose_candidate(const std::vector<double>& scores,
                     const std::vector<ViewCandidate>& candidates, const Vec3& current_dir) {
    int best = -1;
    double best_score = -std::numeric_limits<double>::infinity();
    double best_travel = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < scores.size(); ++i) {
        const double travel = angle_between(candidates[i].view_dir, current_dir);
        if (scores[i] > best_score ||
            (scores[i] == best_score && travel < best_travel)) {
            best = static_cast<int>(i);
            best_score = scores[i];
            best_travel = travel;
        }
    }
    return best;
}

AffordanceSource AffordanceSource::net(const AffordanceHead& head, const EncoderWeights& encoder) {
    AffordanceSource s;
    s.head = &head;
    s.encoder = &encoder;
    return s;
}

AffordanceSource AffordanceSource::oracle() {
    AffordanceSource s;
    s.use_oracle = true;
    return s;
}

namespace {

struct StepModel {
    TriPlaneVolume planes;
    std::unique_ptr<AffordanceModel> model;
};

StepModel make_step_model(const AffordanceSource& source, const Scene& scene,
                          const TsdfVolume& volume) {
    StepModel sm;
    if (source.use_oracle) {
        sm.model = std::make_unique<OracleAffordance>(scene, source.gripper);
        return sm;
    }
    if (source.head == nullptr || source.encoder == nullptr) {
        throw std::logic_error("affordance source needs a head and encoder or oracle mode");
    }
    sm.planes = encode(volume, *source.encoder);
    sm.model = std::make_unique<NetAffordance>(sm.planes, *source.head, source.affordance);
    return sm;
}

void execute_grasp(Episode& ep, const Scene& scene, const Grasp& grasp, const Gripper& gripper) {
    const GraspCheck check = grasp_feasible(scene, grasp, gripper);
    ep.executed = grasp;
    ep.failure_reason = check.failure;
    ep.outcome = check.success ? EpisodeOutcome::Success : EpisodeOutcome::Failure;
}

Vec3 view_toward(const Aabb& bbox, const Pose& camera_pose) {
    return normalized(bbox.center() - camera_pose.translation);
}

// Shared closed-loop driver; scorer(sm, volume, candidates) returns per-candidate
// scores and fills best_grasp entries when available.
Episode closed_loop(const std::string& policy_name, const Scene& scene, const Pose& initial_view,
                    const AffordanceSource& source, const PolicyConfig& config,
                    bool affordance_driven) {
    Episode ep;
    ep.policy = policy_name;
    if (!scene.has_target()) throw std::logic_error("policy requires a scene with a target");
    const Aabb bbox = scene.target_bbox;
    TsdfVolume volume(scene.workspace, config.tsdf);
    Pose camera = initial_view;
    std::vector<Vec3> visited;
    double best_seen_q = -1.0;
    Grasp best_seen;
    const double revisit_cos = std::cos(config.revisit_exclusion_deg * kPi / 180.0);

    for (int t = 1; t <= config.t_max; ++t) {
        const DepthImage image = render_depth(scene, config.intrinsics, camera, config.render);
        volume.integrate(image);
        const StepModel sm = make_step_model(source, scene, volume);

        StepRecord step;
        step.step = t;
        step.camera_pose = camera;
        step.view_dir = view_toward(bbox, camera);
        step.observed_voxels = volume.observed_voxel_count();
        visited.push_back(step.view_dir);

        step.imagined = imagine_affordances(*sm.model, bbox, step.view_dir,
                                            config.affordance.lattice_count, scene.workspace);
        step.evaluations = static_cast<int>(step.imagined.size());
        step.current_q = step.imagined.front().quality;
        ep.view_count = t;
        if (step.current_q > best_seen_q) {
            best_seen_q = step.current_q;
            best_seen = step.imagined.front();
        }

        if (step.current_q > config.q_max) {
            ep.steps.push_back(std::move(step));
            execute_grasp(ep, scene, ep.steps.back().imagined.front(), config.gripper);
            return ep;
        }
        if (t == config.t_max) {
            ep.steps.push_back(std::move(step));
            break;
        }

        std::vector<ViewCandidate> candidates = generate_candidates(bbox, config,
                                                                    scene.workspace);
        std::vector<ViewCandidate> fresh;
        for (const ViewCandidate& cand : candidates) {
            bool seen = false;
            for (const Vec3& v : visited) {
                if (dot(cand.view_dir, v) > revisit_cos) {
                    seen = true;
                    break;
                }
            }
            if (!seen) fresh.push_back(cand);
        }
        if (fresh.empty()) fresh = std::move(candidates);  // revisiting beats stalling

        std::vector<double> scores(fresh.size(), 0.0);
        if (affordance_driven) {
            std::vector<int> evals(fresh.size(), 0);
            parallel_for_chunked(fresh.size(), 1, [&](size_t begin, size_t end) {
                for (size_t i = begin; i < end; ++i) {
                    const CandidateEvaluation ev = evaluate_candidate(
                        *sm.model, bbox, fresh[i], config.affordance.lattice_count,
                        scene.workspace);
                    scores[i] = ev.best_q;
                    evals[i] = ev.evaluations;
                }
            });
            for (int e : evals) step.evaluations += e;
        } else {
            for (size_t i = 0; i < fresh.size(); ++i) {
                scores[i] = static_cast<double>(visible_unobserved_count(
                    volume, bbox, fresh[i].camera_pose.translation));
            }
        }
        const int chosen = choose_candidate(scores, fresh, step.view_dir);
        step.candidate_scores = scores;
        step.chosen_candidate = chosen;
        camera = fresh[chosen].camera_pose;
        ep.steps.push_back(std::move(step));
    }

    if (best_seen_q >= config.q_exec) {
        execute_grasp(ep, scene, best_seen, config.gripper);
    } else {
        ep.outcome = EpisodeOutcome::Abort;
    }
    return ep;
}

// Integrate the given views, then predict once over the listed directions and
// execute the overall best grasp.
Episode one_shot(const std::string& policy_name, const Scene& scene,
                 const std::vector<Pose>& views, const AffordanceSource& source,
                 const PolicyConfig& config) {
    Episode ep;
    ep.policy = policy_name;
    const Aabb bbox = scene.target_bbox;
    TsdfVolume volume(scene.workspace, config.tsdf);
    for (const Pose& view : views) {
        volume.integrate(render_depth(scene, config.intrinsics, view, config.render));
    }
    const StepModel sm = make_step_model(source, scene, volume);
    Grasp best;
    double best_q = -1.0;
    for (size_t i = 0; i < views.size(); ++i) {
        StepRecord step;
        step.step = static_cast<int>(i) + 1;
        step.camera_pose = views[i];
        step.view_dir = view_toward(bbox, views[i]);
        if (i + 1 == views.size()) {
            // prediction round: evaluate every traversed view on the fused volume
            for (const Pose& view : views) {
                const auto grasps = imagine_affordances(*sm.model, bbox,
                                                        view_toward(bbox, view),
                                                        config.affordance.lattice_count,
                                                        scene.workspace);
                step.evaluations += static_cast<int>(grasps.size());
                if (grasps.front().quality > best_q) {
                    best_q = grasps.front().quality;
                    best = grasps.front();
                    step.imagined = grasps;
                }
            }
            step.current_q = best_q;
        }
        ep.steps.push_back(std::move(step));
    }
    ep.view_count = static_cast<int>(views.size());
    execute_grasp(ep, scene, best, config.gripper);
    return ep;
}

}  // namespace

Episode run_policy(const Scene& scene, const Pose& initial_view, const AffordanceSource& source,
                   const PolicyConfig& config) {
    return closed_loop("ace-nbv", scene, initial_view, source, config, true);
}

Episode baseline_policy(BaselineKind kind, const Scene& scene, const Pose& initial_view,
                        const AffordanceSource& source, const PolicyConfig& config) {
    switch (kind) {
        case BaselineKind::InitialView:
            return one_shot(baseline_name(kind), scene, {initial_view}, source, config);
        case BaselineKind::TopView: {
            const Vec3 eye = scene.workspace.center() + Vec3{0, 0, config.view_radius};
            const Pose top = look_at_pose(eye, scene.workspace.center());
            return one_shot(baseline_name(kind), scene, {top}, source, config);
        }
        case BaselineKind::FixedTrajectory: {
            // four views on a circle around the target, looking down at 30 degrees
            const Vec3 center = scene.target_bbox.center();
            const double polar = kPi / 3.0;  // 30-degree depression
            std::vector<Pose> views;
            for (int k = 0; k < 4; ++k) {
                const double az = 2.0 * kPi * k / 4.0;
                const Vec3 eye = center + config.view_radius *
                                              Vec3{std::sin(polar) * std::cos(az),
                                                   std::sin(polar) * std::sin(az),
                                                   std::cos(polar)};
                views.push_back(look_at_pose(eye, center));
            }
            return one_shot(baseline_name(kind), scene, views, source, config);
        }
        case BaselineKind::GeometryGain:
            return closed_loop(baseline_name(kind), scene, initial_view, source, config, false);
    }
    throw std::logic_error("unknown baseline kind");
}

int visible_unobserved_count(const TsdfVolume& volume, const Aabb& bbox, const Vec3& camera_pos,
                             double /*march_step_voxels*/) {
    const int res = volume.resolution();
    const double e = volume.voxel_edge();
    const Workspace& ws = volume.workspace();

    // Exact voxel traversal (Amanatides-Woo) of the segment camera -> voxel
    // center; a voxel blocks when it is observed occupied.
    auto segment_blocked = [&](const Vec3& target, int ti, int tj, int tk) {
        const Vec3 delta = target - camera_pos;
        const double dist = norm(delta);
        const Vec3 dir = delta / dist;
        double t0, t1;
        if (!line_aabb_clip(camera_pos, dir, ws.bounds(), t0, t1)) return false;
        double t = std::max(t0, 0.0) + 1e-9;
        const double t_end = std::min(dist, t1);
        if (t >= t_end) return false;
        Vec3 p = camera_pos + t * dir;
        int idx[3] = {std::clamp(static_cast<int>((p.x - ws.origin.x) / e), 0, res - 1),
                      std::clamp(static_cast<int>((p.y - ws.origin.y) / e), 0, res - 1),
                      std::clamp(static_cast<int>((p.z - ws.origin.z) / e), 0, res - 1)};
        int step[3];
        double t_max[3], t_delta[3];
        for (int a = 0; a < 3; ++a) {
            const double d = dir[a];
            if (std::fabs(d) < 1e-15) {
                step[a] = 0;
                t_max[a] = std::numeric_limits<double>::infinity();
                t_delta[a] = std::numeric_limits<double>::infinity();
            } else {
                step[a] = d > 0 ? 1 : -1;
                const double boundary = ws.origin[a] + (idx[a] + (d > 0 ? 1 : 0)) * e;
                t_max[a] = (boundary - camera_pos[a]) / d;
                t_delta[a] = e / std::fabs(d);
            }
        }
        for (;;) {
            const bool is_target_cell = idx[0] == ti && idx[1] == tj && idx[2] == tk;
            if (!is_target_cell && volume.weight_at(idx[0], idx[1], idx[2]) > 0.0f &&
                volume.distance_at(idx[0], idx[1], idx[2]) < 0.0f) {
                return true;
            }
            const int a = t_max[0] < t_max[1] ? (t_max[0] < t_max[2] ? 0 : 2)
                                              : (t_max[1] < t_max[2] ? 1 : 2);
            if (t_max[a] >= t_end) return false;
            idx[a] += step[a];
            if (idx[a] < 0 || idx[a] >= res) return false;
            t_max[a] += t_delta[a];
        }
    };

    int count = 0;
    for (int i = 0; i < res; ++i) {
        for (int j = 0; j < res; ++j) {
            for (int k = 0; k < res; ++k) {
                const Vec3 c = volume.voxel_center(i, j, k);
                if (!bbox.contains(c)) continue;
                if (volume.weight_at(i, j, k) > 0.0f) continue;
                if (!segment_blocked(c, i, j, k)) ++count;
            }
        }
    }
    return count;
}

Metrics compute_metrics(const std::vector<Episode>& episodes) {
    if (episodes.empty()) throw std::invalid_argument("no episodes to aggregate");
    Metrics m;
    m.episode_count = static_cast<int>(episodes.size());
    int s = 0, f = 0, a = 0;
    double views = 0.0;
    for (const Episode& ep : episodes) {
        switch (ep.outcome) {
            case EpisodeOutcome::Success: ++s; break;
            case EpisodeOutcome::Failure: ++f; break;
            case EpisodeOutcome::Abort: ++a; break;
        }
        views += ep.view_count;
    }
    const double n = static_cast<double>(m.episode_count);
    m.success_rate = s / n;
    m.failure_rate = f / n;
    m.abort_rate = a / n;
    m.mean_views = views / n;
    return m;
}

Metrics compute_metrics(const std::vector<Episode>& episodes,
                        const std::vector<Episode>& two_view_episodes) {
    Metrics m = compute_metrics(episodes);
    if (!two_view_episodes.empty()) {
        m.two_view_sr = compute_metrics(two_view_episodes).success_rate;
    }
    return m;
}

namespace {

nlohmann::json grasp_to_json(const Grasp& g) {
    return {{"q", g.quality},
            {"center", {g.center.x, g.center.y, g.center.z}},
            {"view", {g.view.x, g.view.y, g.view.z}},
            {"rotation", g.rotation},
            {"width", g.width}};
}

Grasp grasp_from_json(const nlohmann::json& j) {
    Grasp g;
    g.quality = j.at("q");
    g.center = {j.at("center")[0], j.at("center")[1], j.at("center")[2]};
    g.view = {j.at("view")[0], j.at("view")[1], j.at("view")[2]};
    g.rotation = j.at("rotation");
    g.width = j.at("width");
    return g;
}

nlohmann::json pose_to_json(const Pose& p) {
    return {{"rotation_wxyz", {p.rotation.w, p.rotation.x, p.rotation.y, p.rotation.z}},
            {"translation_xyz", {p.translation.x, p.translation.y, p.translation.z}}};
}

Pose pose_from_json(const nlohmann::json& j) {
    Pose p;
    p.rotation = {j.at("rotation_wxyz")[0], j.at("rotation_wxyz")[1], j.at("rotation_wxyz")[2],
                  j.at("rotation_wxyz")[3]};
    p.translation = {j.at("translation_xyz")[0], j.at("translation_xyz")[1],
                     j.at("translation_xyz")[2]};
    return p;
}

}  // namespace

void save_episode_trace(const Episode& ep, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write episode trace: " + path);
    nlohmann::json header = {{"record", "episode"},
                             {"scene_seed", ep.scene_seed},
                             {"policy", ep.policy},
                             {"outcome", outcome_name(ep.outcome)},
                             {"diagnostic", ep.diagnostic},
                             {"failure_reason", grasp_failure_name(ep.failure_reason)},
                             {"view_count", ep.view_count},
                             {"target_zero_visible", ep.target_zero_visible}};
    if (ep.executed) header["executed"] = grasp_to_json(*ep.executed);
    out << header.dump() << "\n";
    for (const StepRecord& step : ep.steps) {
        nlohmann::json s = {{"record", "step"},
                            {"step", step.step},
                            {"camera", pose_to_json(step.camera_pose)},
                            {"view_dir", {step.view_dir.x, step.view_dir.y, step.view_dir.z}},
                            {"current_q", step.current_q},
                            {"candidate_scores", step.candidate_scores},
                            {"chosen_candidate", step.chosen_candidate},
                            {"evaluations", step.evaluations},
                            {"observed_voxels", step.observed_voxels}};
        nlohmann::json grasps = nlohmann::json::array();
        for (const Grasp& g : step.imagined) grasps.push_back(grasp_to_json(g));
        s["imagined"] = grasps;
        out << s.dump() << "\n";
    }
}

Episode load_episode_trace(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read episode trace: " + path);
    Episode ep;
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const nlohmann::json j = nlohmann::json::parse(line);
        if (j.at("record") == "episode") {
            ep.scene_seed = j.at("scene_seed");
            ep.policy = j.at("policy");
            ep.outcome = outcome_from_name(j.at("outcome"));
            ep.diagnostic = j.at("diagnostic");
            ep.view_count = j.at("view_count");
            ep.target_zero_visible = j.at("target_zero_visible");
            if (j.contains("executed")) ep.executed = grasp_from_json(j.at("executed"));
            have_header = true;
        } else if (j.at("record") == "step") {
            StepRecord step;
            step.step = j.at("step");
            step.camera_pose = pose_from_json(j.at("camera"));
            step.view_dir = {j.at("view_dir")[0], j.at("view_dir")[1], j.at("view_dir")[2]};
            step.current_q = j.at("current_q");
            step.candidate_scores = j.at("candidate_scores").get<std::vector<double>>();
            step.chosen_candidate = j.at("chosen_candidate");
            step.evaluations = j.at("evaluations");
            step.observed_voxels = j.at("observed_voxels");
            for (const auto& g : j.at("imagined")) step.imagined.push_back(grasp_from_json(g));
            ep.steps.push_back(std::move(step));
        }
    }
    if (!have_header) throw std::runtime_error("episode trace has no header record: " + path);
    return ep;
}

}  // namespace nbv
