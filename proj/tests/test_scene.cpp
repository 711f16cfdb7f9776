#include <doctest.h>

#include "nbv/rng.hpp"
#include "nbv/scene.hpp"
#include "test_helpers.hpp"

using namespace nbv;

TEST_CASE("sphere and plane distances match their definitions") {
    Scene scene;
    scene.workspace.origin = {-1, -1, 0};
    scene.workspace.edge = 4.0;
    SUBCASE("unit sphere at origin") {
        scene.primitives.push_back(SdfPrimitive::sphere(1.0, {0, 0, 0}));
        // keep the support plane far below so the sphere term dominates
        scene.workspace.origin.z = -10.0;
        CHECK(scene_sdf(scene, {0, 0, 2}) == doctest::Approx(1.0));
    }
    SUBCASE("empty scene leaves the half-space") {
        CHECK(scene_sdf(scene, {0, 0, 0.3}) == doctest::Approx(0.3));
    }
}

TEST_CASE("overlapping spheres reduce to the primitive-wise minimum") {
    Scene scene;
    const Vec3 c1{0.12, 0.15, 0.03};
    const Vec3 c2{0.16, 0.15, 0.03};
    scene.primitives.push_back(SdfPrimitive::sphere(0.03, c1));
    scene.primitives.push_back(SdfPrimitive::sphere(0.03, c2));
    for (int i = 0; i <= 50; ++i) {
        const Vec3 p = c1 + (c2 - c1) * (i / 50.0);
        const double expected = std::min({p.z - scene.workspace.plane_height(),
                                          norm(p - c1) - 0.03, norm(p - c2) - 0.03});
        CHECK(scene_sdf(scene, p) == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("scene sdf is 1-Lipschitz on random pairs") {
    const Scene scene = nbvtest::packed_fixture(21, 6);
    Rng rng(22);
    const Aabb box = scene.workspace.bounds().padded(0.05);
    for (int i = 0; i < 2000; ++i) {
        const Vec3 a{rng.uniform(box.min.x, box.max.x), rng.uniform(box.min.y, box.max.y),
                     rng.uniform(box.min.z, box.max.z)};
        const Vec3 b{rng.uniform(box.min.x, box.max.x), rng.uniform(box.min.y, box.max.y),
                     rng.uniform(box.min.z, box.max.z)};
        CHECK(std::fabs(scene_sdf(scene, a) - scene_sdf(scene, b)) <= norm(a - b) + 1e-6);
    }
}

TEST_CASE("packed generation is a pure function of seed and count") {
    const Scene a = generate_packed_scene(7, 5);
    const Scene b = generate_packed_scene(7, 5);
    CHECK(scene_to_json(a) == scene_to_json(b));
    const Scene c = generate_packed_scene(8, 5);
    CHECK(scene_to_json(a) != scene_to_json(c));
}

TEST_CASE("packed objects do not interpenetrate beyond a millimeter") {
    for (uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
        const Scene scene = generate_packed_scene(seed, 6);
        for (size_t i = 0; i < scene.primitives.size(); ++i) {
            const auto samples = scene.primitives[i].surface_points(0.002);
            for (size_t j = 0; j < scene.primitives.size(); ++j) {
                if (i == j) continue;
                double deepest = 0.0;
                for (const Vec3& p : samples) {
                    deepest = std::min(deepest, scene.primitives[j].sdf(p));
                }
                CHECK(deepest >= -1e-3);
            }
        }
    }
}

TEST_CASE("packed objects rest on the support plane") {
    for (uint64_t seed : {11u, 12u, 13u}) {
        const Scene scene = generate_packed_scene(seed, 5);
        for (const SdfPrimitive& prim : scene.primitives) {
            double lowest = 1e30;
            for (const Vec3& p : prim.surface_points(0.002)) lowest = std::min(lowest, p.z);
            CHECK(std::fabs(lowest - scene.workspace.plane_height()) <= 1e-3);
        }
    }
}

TEST_CASE("generation rejects impossible packings") {
    PackedSceneConfig config;
    config.object_count = 8;
    config.margin = 0.14;  // squeezes all objects into a 2 cm square
    config.max_rejections = 50;
    CHECK_THROWS_AS(generate_packed_scene(1, config), GenerationError);
    CHECK_THROWS_AS(generate_packed_scene(1, 2), GenerationError);
}

TEST_CASE("primitive sdf stays exact under rotation") {
    Rng rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        const Pose pose{Rotation::from_axis_angle(rng.unit_vector(), rng.uniform(-3.0, 3.0)),
                        {rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05), rng.uniform(0.0, 0.1)}};
        const SdfPrimitive box = SdfPrimitive::box({0.02, 0.03, 0.01}, pose);
        const SdfPrimitive cyl = SdfPrimitive::cylinder(0.02, 0.03, pose);
        for (int i = 0; i < 100; ++i) {
            const Vec3 a = rng.unit_vector() * rng.uniform(0.0, 0.2);
            const Vec3 b = rng.unit_vector() * rng.uniform(0.0, 0.2);
            CHECK(std::fabs(box.sdf(a) - box.sdf(b)) <= norm(a - b) + 1e-6);
            CHECK(std::fabs(cyl.sdf(a) - cyl.sdf(b)) <= norm(a - b) + 1e-6);
        }
        // surface samples must evaluate to ~0
        for (const Vec3& p : box.surface_points(0.01)) CHECK(std::fabs(box.sdf(p)) < 1e-9);
        for (const Vec3& p : cyl.surface_points(0.01)) CHECK(std::fabs(cyl.sdf(p)) < 1e-9);
    }
}

TEST_CASE("scene documents round-trip through json") {
    Scene scene = nbvtest::packed_fixture(41, 4);
    const std::string doc = scene_to_json(scene);
    const Scene back = scene_from_json(doc);
    CHECK(scene_to_json(back) == doc);
    CHECK(back.target_index == scene.target_index);
    CHECK(back.primitives.size() == scene.primitives.size());
}

TEST_CASE("target bbox contains the target surface") {
    Scene scene = nbvtest::packed_fixture(42, 5);
    for (int idx = 0; idx < 5; ++idx) {
        assign_target(scene, idx);
        const Aabb outer = scene.target_bbox.padded(1e-9);
        for (const Vec3& p : scene.primitives[idx].surface_points(0.004)) {
            if (scene.workspace.bounds().contains(p)) CHECK(outer.contains(p));
        }
    }
}
