#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "nbv/parallel.hpp"
#include "nbv/policy.hpp"
#include "nbv/rng.hpp"
#include "test_helpers.hpp"

using namespace nbv;
using namespace nbvtest;

namespace {

PolicyConfig test_config() {
    PolicyConfig config;
    config.intrinsics.width = config.intrinsics.height = 64;
    config.intrinsics.fx = config.intrinsics.fy = 72.0;
    config.intrinsics.cx = config.intrinsics.cy = 32.0;
    config.affordance.lattice_count = 27;
    return config;
}

struct ConstantModel final : AffordanceModel {
    double q;
    explicit ConstantModel(double q_) : q(q_) {}
    Grasp at(const Vec3& center, const Vec3& view) const override {
        Grasp g;
        g.quality = q;
        g.center = center;
        g.view = view;
        return g;
    }
};

// deterministic but center/view-dependent pseudo-quality
struct HashModel final : AffordanceModel {
    Grasp at(const Vec3& center, const Vec3& view) const override {
        Grasp g;
        g.center = center;
        g.view = view;
        const double h = std::sin(431.0 * center.x + 97.0 * center.y + 57.0 * center.z +
                                  13.0 * view.x + 7.0 * view.y + 3.0 * view.z);
        g.quality = 0.5 + 0.5 * h;
        return g;
    }
};

AffordanceHead& shared_test_head() {
    static AffordanceHead head = AffordanceHead::seeded(8, 4242, 32);
    return head;
}

EncoderWeights& shared_test_encoder() {
    static EncoderWeights enc = EncoderWeights::seeded(8, 4243);
    return enc;
}

}  // namespace

TEST_CASE("candidate generation covers the cap deterministically") {
    const Scene scene = packed_fixture(901, 5);
    PolicyConfig config = test_config();
    const auto candidates = generate_candidates(scene.target_bbox, config, scene.workspace);
    CHECK(candidates.size() == 16);
    const Vec3 center = scene.target_bbox.center();
    double min_sep = 1e9;
    for (size_t i = 0; i < candidates.size(); ++i) {
        // the optical axis passes through the bbox center
        const Vec3 axis = candidates[i].camera_pose.apply_dir({0, 0, 1});
        const Vec3 to_center = normalized(center - candidates[i].camera_pose.translation);
        CHECK(norm(axis - to_center) < 1e-6);
        CHECK(norm(candidates[i].view_dir - to_center) < 1e-9);
        // polar angle within the cap
        const double polar = std::acos(std::clamp(-candidates[i].view_dir.z, -1.0, 1.0));
        CHECK(polar <= config.polar_cap_deg * kPi / 180.0 + 1e-9);
        for (size_t j = i + 1; j < candidates.size(); ++j) {
            min_sep = std::min(min_sep,
                               angle_between(candidates[i].view_dir, candidates[j].view_dir));
        }
    }
    INFO("minimum pairwise separation (deg): " << min_sep * 180.0 / kPi);
    CHECK(min_sep > 10.0 * kPi / 180.0);

    SUBCASE("zero cap degenerates to the single top view") {
        config.polar_cap_deg = 0.0;
        const auto single = generate_candidates(scene.target_bbox, config, scene.workspace);
        REQUIRE(single.size() == 1);
        CHECK(norm(single[0].view_dir - Vec3{0, 0, -1}) < 1e-9);
    }
    SUBCASE("culling everything is an error") {
        config.min_camera_height = 10.0;
        CHECK_THROWS_AS(generate_candidates(scene.target_bbox, config, scene.workspace),
                        std::runtime_error);
    }
}

TEST_CASE("candidate evaluation reduces to the imagined maximum") {
    const Scene scene = packed_fixture(902, 4);
    PolicyConfig config = test_config();
    const auto candidates = generate_candidates(scene.target_bbox, config, scene.workspace);
    SUBCASE("constant stub scores identically") {
        const ConstantModel model(0.7);
        for (const ViewCandidate& cand : candidates) {
            const CandidateEvaluation ev = evaluate_candidate(model, scene.target_bbox, cand, 27,
                                                              scene.workspace);
            CHECK(ev.best_q == doctest::Approx(0.7));
        }
    }
    SUBCASE("varying stub equals the enumerated maximum") {
        const HashModel model;
        for (const ViewCandidate& cand : candidates) {
            const CandidateEvaluation ev = evaluate_candidate(model, scene.target_bbox, cand, 27,
                                                              scene.workspace);
            double expected = -1.0;
            for (const Vec3& c : lattice_centers(scene.target_bbox, 27, scene.workspace)) {
                expected = std::max(expected, model.at(c, cand.view_dir).quality);
            }
            CHECK(ev.best_q == doctest::Approx(expected).epsilon(1e-12));
        }
    }
}

TEST_CASE("argmax choice is invariant under strictly increasing transforms") {
    const Scene scene = packed_fixture(903, 4);
    const auto candidates = generate_candidates(scene.target_bbox, test_config(),
                                                scene.workspace);
    Rng rng(904);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> scores(candidates.size());
        for (double& s : scores) s = rng.uniform(0.0, 1.0);
        if (trial % 3 == 0) {
            // inject exact ties to exercise the travel tie-break
            scores[3] = scores[7] = scores[11];
        }
        const Vec3 current = rng.unit_vector();
        const int base = choose_candidate(scores, candidates, current);
        std::vector<double> affine(scores), expo(scores);
        for (double& s : affine) s = 3.0 * s + 0.2;
        for (double& s : expo) s = std::exp(s);
        CHECK(choose_candidate(affine, candidates, current) == base);
        CHECK(choose_candidate(expo, candidates, current) == base);
    }
}

TEST_CASE("degenerate thresholds reproduce the documented stopping behavior") {
    const Scene scene = packed_fixture(905, 4);
    const Pose initial = side_view_pose(scene, 0.8, 0.9);
    PolicyConfig config = test_config();
    const AffordanceSource source = AffordanceSource::net(shared_test_head(),
                                                          shared_test_encoder());
    SUBCASE("q_max = 0 executes from the initial view") {
        config.q_max = 0.0;
        const Episode ep = run_policy(scene, initial, source, config);
        CHECK(ep.view_count == 1);
        CHECK(ep.executed.has_value());
        CHECK(ep.outcome != EpisodeOutcome::Abort);
    }
    SUBCASE("exhaustion below q_exec aborts") {
        // a target too wide for the gripper: the oracle scores everything zero
        Scene wide;
        wide.primitives.push_back(SdfPrimitive::box({0.05, 0.05, 0.02},
                                                    {Rotation::identity(), {0.15, 0.15, 0.02}}));
        assign_target(wide, 0);
        config.t_max = 1;
        const Episode ep = run_policy(wide, side_view_pose(wide, 0.3, 0.8),
                                      AffordanceSource::oracle(), config);
        CHECK(ep.outcome == EpisodeOutcome::Abort);
        CHECK(ep.view_count == 1);
        CHECK_FALSE(ep.executed.has_value());
    }
}

TEST_CASE("oracle-driven planning solves side-graspable scenes in few views") {
    PolicyConfig config = test_config();
    int successes = 0;
    int total_views = 0;
    for (uint64_t seed = 0; seed < 10; ++seed) {
        const Scene scene = side_graspable_scene(seed);
        const Pose initial = side_view_pose(scene, 0.4 + 0.2 * seed, 0.5);
        const Episode ep = run_policy(scene, initial, AffordanceSource::oracle(), config);
        CHECK(ep.view_count <= config.t_max);
        total_views += ep.view_count;
        if (ep.outcome == EpisodeOutcome::Success && ep.view_count <= 3) ++successes;
    }
    CHECK(successes >= 8);
    INFO("mean views: " << total_views / 10.0);
}

TEST_CASE("baselines follow their view prescriptions") {
    const Scene scene = packed_fixture(906, 5);
    const Pose initial = side_view_pose(scene, 1.9, 0.8);
    PolicyConfig config = test_config();
    const AffordanceSource source = AffordanceSource::net(shared_test_head(),
                                                          shared_test_encoder());
    SUBCASE("initial-view uses exactly one view and always executes") {
        const Episode ep = baseline_policy(BaselineKind::InitialView, scene, initial, source,
                                           config);
        CHECK(ep.view_count == 1);
        CHECK(ep.executed.has_value());
        CHECK(norm(ep.steps.front().camera_pose.translation - initial.translation) < 1e-12);
    }
    SUBCASE("top-view camera sits straight above the workspace center") {
        const Episode ep = baseline_policy(BaselineKind::TopView, scene, initial, source, config);
        CHECK(ep.view_count == 1);
        const Vec3 expected = scene.workspace.center() + Vec3{0, 0, config.view_radius};
        CHECK(norm(ep.steps.front().camera_pose.translation - expected) < 1e-12);
    }
    SUBCASE("fixed trajectory always fuses four views") {
        const Episode ep = baseline_policy(BaselineKind::FixedTrajectory, scene, initial, source,
                                           config);
        CHECK(ep.view_count == 4);
        CHECK(ep.steps.size() == 4);
        CHECK(ep.executed.has_value());
    }
}

TEST_CASE("geometry gain counts match a fine-step visibility oracle") {
    const Scene scene = packed_fixture(907, 5);
    PolicyConfig config = test_config();
    TsdfVolume volume(scene.workspace, config.tsdf);
    volume.integrate(render_depth(scene, config.intrinsics, side_view_pose(scene, 0.4, 0.9),
                                  config.render));
    volume.integrate(render_depth(scene, config.intrinsics, side_view_pose(scene, 2.6, 0.7),
                                  config.render));
    const auto candidates = generate_candidates(scene.target_bbox, config, scene.workspace);
    const double fine_step = volume.voxel_edge() * 0.025;  // ten times finer
    for (size_t ci = 0; ci < candidates.size(); ci += 3) {
        const Vec3 cam = candidates[ci].camera_pose.translation;
        const int got = visible_unobserved_count(volume, scene.target_bbox, cam);

        int expected = 0;
        const int res = volume.resolution();
        const Workspace& ws = volume.workspace();
        for (int i = 0; i < res; ++i) {
            for (int j = 0; j < res; ++j) {
                for (int k = 0; k < res; ++k) {
                    const Vec3 c = volume.voxel_center(i, j, k);
                    if (!scene.target_bbox.contains(c)) continue;
                    if (volume.weight_at(i, j, k) > 0.0f) continue;
                    const Vec3 delta = c - cam;
                    const double dist = norm(delta);
                    const Vec3 dir = delta / dist;
                    bool blocked = false;
                    for (double t = fine_step; t < dist - fine_step; t += fine_step) {
                        const Vec3 p = cam + t * dir;
                        if (!ws.bounds().contains(p)) continue;
                        const double e = volume.voxel_edge();
                        const int vi = std::clamp(static_cast<int>((p.x - ws.origin.x) / e), 0,
                                                  res - 1);
                        const int vj = std::clamp(static_cast<int>((p.y - ws.origin.y) / e), 0,
                                                  res - 1);
                        const int vk = std::clamp(static_cast<int>((p.z - ws.origin.z) / e), 0,
                                                  res - 1);
                        if (volume.weight_at(vi, vj, vk) > 0.0f &&
                            volume.distance_at(vi, vj, vk) < 0.0f) {
                            blocked = true;
                            break;
                        }
                    }
                    if (!blocked) ++expected;
                }
            }
        }
        CHECK(got == expected);
    }
}

TEST_CASE("geometry-gain policy respects the shared stopping rules") {
    const Scene scene = side_graspable_scene(3);
    PolicyConfig config = test_config();
    config.t_max = 4;
    const Episode ep = baseline_policy(BaselineKind::GeometryGain, scene,
                                       side_view_pose(scene, 1.0, 0.5),
                                       AffordanceSource::oracle(), config);
    CHECK(ep.view_count <= 4);
    CHECK(ep.policy == "geometry-gain");
    // information never shrinks across steps
    for (size_t i = 1; i < ep.steps.size(); ++i) {
        CHECK(ep.steps[i].observed_voxels >= ep.steps[i - 1].observed_voxels);
    }
}

TEST_CASE("metrics partition episodes exactly") {
    auto make = [](EpisodeOutcome o, int views) {
        Episode ep;
        ep.outcome = o;
        ep.view_count = views;
        if (o != EpisodeOutcome::Abort) ep.executed = Grasp{};
        return ep;
    };
    SUBCASE("documented ratios") {
        const std::vector<Episode> eps = {make(EpisodeOutcome::Success, 2),
                                          make(EpisodeOutcome::Success, 3),
                                          make(EpisodeOutcome::Success, 1),
                                          make(EpisodeOutcome::Failure, 4),
                                          make(EpisodeOutcome::Abort, 8)};
        const Metrics m = compute_metrics(eps);
        CHECK(m.success_rate == doctest::Approx(0.6));
        CHECK(m.failure_rate == doctest::Approx(0.2));
        CHECK(m.abort_rate == doctest::Approx(0.2));
        CHECK(m.mean_views == doctest::Approx(3.6));
    }
    SUBCASE("all aborts") {
        const std::vector<Episode> eps = {make(EpisodeOutcome::Abort, 8),
                                          make(EpisodeOutcome::Abort, 8)};
        const Metrics m = compute_metrics(eps);
        CHECK(m.success_rate == 0.0);
        CHECK(m.abort_rate == 1.0);
        for (const Episode& ep : eps) CHECK_FALSE(ep.executed.has_value());
    }
    SUBCASE("fuzzed partitions sum to one") {
        Rng rng(908);
        for (int trial = 0; trial < 50; ++trial) {
            std::vector<Episode> eps;
            const int n = 1 + static_cast<int>(rng.uniform_int(0, 30));
            for (int i = 0; i < n; ++i) {
                const int o = static_cast<int>(rng.uniform_int(0, 2));
                eps.push_back(make(static_cast<EpisodeOutcome>(o),
                                   1 + static_cast<int>(rng.uniform_int(0, 7))));
            }
            const Metrics m = compute_metrics(eps);
            CHECK(m.success_rate + m.failure_rate + m.abort_rate == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("episodes are deterministic across runs and worker counts") {
    const Scene scene = side_graspable_scene(5);
    PolicyConfig config = test_config();
    const Pose initial = side_view_pose(scene, 0.9, 0.6);
    const AffordanceSource source = AffordanceSource::net(shared_test_head(),
                                                          shared_test_encoder());
    set_worker_count(1);
    const Episode a = run_policy(scene, initial, source, config);
    set_worker_count(2);
    const Episode b = run_policy(scene, initial, source, config);
    set_worker_count(0);
    save_episode_trace(a, "ep_a.jsonl");
    save_episode_trace(b, "ep_b.jsonl");
    std::ifstream fa("ep_a.jsonl"), fb("ep_b.jsonl");
    std::stringstream sa, sb;
    sa << fa.rdbuf();
    sb << fb.rdbuf();
    CHECK(sa.str() == sb.str());
    std::remove("ep_a.jsonl");
    std::remove("ep_b.jsonl");
}

TEST_CASE("executed grasps come from the final prediction set") {
    PolicyConfig config = test_config();
    for (uint64_t seed = 20; seed < 26; ++seed) {
        const Scene scene = side_graspable_scene(seed);
        const Episode ep = run_policy(scene, side_view_pose(scene, 0.7, 0.6),
                                      AffordanceSource::oracle(), config);
        CHECK(ep.view_count <= config.t_max);
        if (!ep.executed.has_value()) continue;
        bool found = false;
        for (const StepRecord& step : ep.steps) {
            if (step.imagined.empty()) continue;
            const Grasp& top = step.imagined.front();
            if (top.quality == ep.executed->quality &&
                norm(top.center - ep.executed->center) < 1e-12) {
                found = true;
            }
        }
        CHECK(found);
    }
}

TEST_CASE("episode traces round-trip through jsonl") {
    const Scene scene = side_graspable_scene(7);
    PolicyConfig config = test_config();
    config.t_max = 2;
    Episode ep = run_policy(scene, side_view_pose(scene, 1.4, 0.55),
                            AffordanceSource::oracle(), config);
    ep.scene_seed = 7;
    save_episode_trace(ep, "trace.jsonl");
    const Episode back = load_episode_trace("trace.jsonl");
    CHECK(back.scene_seed == 7);
    CHECK(back.policy == ep.policy);
    CHECK(back.outcome == ep.outcome);
    CHECK(back.view_count == ep.view_count);
    REQUIRE(back.steps.size() == ep.steps.size());
    for (size_t i = 0; i < ep.steps.size(); ++i) {
        CHECK(back.steps[i].current_q == doctest::Approx(ep.steps[i].current_q));
        CHECK(back.steps[i].imagined.size() == ep.steps[i].imagined.size());
        CHECK(back.steps[i].observed_voxels == ep.steps[i].observed_voxels);
    }
    CHECK(back.executed.has_value() == ep.executed.has_value());
    std::remove("trace.jsonl");
}
