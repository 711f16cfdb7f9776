#include <doctest.h>

#include <algorithm>
#include <cstdio>

#include "nbv/rng.hpp"
#include "nbv/triplane.hpp"
#include "test_helpers.hpp"

using namespace nbv;

namespace {

TsdfVolume analytic_volume(const Scene& scene) {
    TsdfVolume volume;
    const double tau = volume.truncation();
    for (int i = 0; i < volume.resolution(); ++i)
        for (int j = 0; j < volume.resolution(); ++j)
            for (int k = 0; k < volume.resolution(); ++k) {
                const double d = scene_sdf(scene, volume.voxel_center(i, j, k));
                volume.set_voxel(i, j, k, static_cast<float>(std::clamp(d / tau, -1.0, 1.0)), 1.0f);
            }
    return volume;
}

TriPlaneVolume random_planes(int features, uint64_t seed) {
    TriPlaneVolume planes(Workspace{}, 40, features);
    Rng rng(seed);
    for (int p = 0; p < 3; ++p) {
        for (float& v : planes.plane(p)) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    }
    return planes;
}

}  // namespace

TEST_CASE("stage-1 reduction of an unobserved volume is constant") {
    TsdfVolume volume;  // fresh: +1 distances, zero weights
    const TriPlaneVolume s1 = encode_stage1(volume);
    for (int p = 0; p < 3; ++p) {
        for (int a = 0; a < s1.resolution(); ++a) {
            for (int b = 0; b < s1.resolution(); ++b) {
                const float* cell = s1.plane(p).data() + s1.cell_offset(a, b);
                CHECK(cell[0] == 1.0f);  // mean distance
                CHECK(cell[1] == 1.0f);  // min distance
                CHECK(cell[2] == 0.0f);  // occupied fraction
                CHECK(cell[3] == 0.0f);  // observed fraction
            }
        }
    }
}

TEST_CASE("occupied support matches the box footprint on all planes") {
    Scene scene;
    scene.workspace.origin.z = -1.0;  // plane far away: only the box occupies space
    const Aabb box{{0.09, 0.12, 0.03}, {0.15, 0.21, 0.09}};
    scene.primitives.push_back(SdfPrimitive::box((box.max - box.min) * 0.5,
                                                 {Rotation::identity(), box.center()}));
    const TsdfVolume volume = analytic_volume(scene);
    const TriPlaneVolume s1 = encode_stage1(volume);
    const double e = volume.voxel_edge();
    const Vec3 o = volume.workspace().origin;
    auto center = [&](int idx, int axis) { return o[axis] + (idx + 0.5) * e; };
    auto interval_hit = [&](double c, int axis) { return c > box.min[axis] && c < box.max[axis]; };
    // projected interior per plane: does any voxel center combination fall inside?
    const int kept_axes[3][2] = {{0, 1}, {0, 2}, {1, 2}};
    const int dropped_axis[3] = {2, 1, 0};
    for (int p = 0; p < 3; ++p) {
        bool dropped_has_interior = false;
        for (int r = 0; r < s1.resolution(); ++r) {
            if (interval_hit(center(r, dropped_axis[p]), dropped_axis[p])) {
                dropped_has_interior = true;
            }
        }
        REQUIRE(dropped_has_interior);
        for (int a = 0; a < s1.resolution(); ++a) {
            for (int b = 0; b < s1.resolution(); ++b) {
                const bool inside = interval_hit(center(a, kept_axes[p][0]), kept_axes[p][0]) &&
                                    interval_hit(center(b, kept_axes[p][1]), kept_axes[p][1]);
                const float occ = s1.plane(p)[s1.cell_offset(a, b) + 2];
                CHECK((occ > 0.0f) == inside);
            }
        }
    }
}

TEST_CASE("encoding is deterministic for fixed inputs") {
    const Scene scene = nbvtest::packed_fixture(401, 5);
    const TsdfVolume volume = analytic_volume(scene);
    const EncoderWeights weights = EncoderWeights::seeded(32, 7);
    const TriPlaneVolume a = encode(volume, weights);
    const TriPlaneVolume b = encode(volume, weights);
    for (int p = 0; p < 3; ++p) CHECK(a.plane(p) == b.plane(p));
}

TEST_CASE("encoder output responds linearly to small weight perturbations") {
    const Scene scene = nbvtest::packed_fixture(402, 4);
    const TsdfVolume volume = analytic_volume(scene);
    EncoderWeights weights = EncoderWeights::seeded(8, 8);
    const TriPlaneVolume base = encode(volume, weights);
    const size_t tap = 17;
    for (double eps : {1e-3, 1e-4}) {
        EncoderWeights bumped = weights;
        bumped.conv2_w[tap] += eps;
        const TriPlaneVolume out = encode(volume, bumped);
        float max_delta = 0.0f;
        for (int p = 0; p < 3; ++p) {
            for (size_t i = 0; i < out.plane(p).size(); ++i) {
                max_delta = std::max(max_delta, std::fabs(out.plane(p)[i] - base.plane(p)[i]));
            }
        }
        CHECK(max_delta <= 50.0 * eps);  // bounded finite-difference slope
        CHECK(max_delta > 0.0f);
    }
}

TEST_CASE("point queries are exact on lattice nodes and concatenate in plane order") {
    TriPlaneVolume planes = random_planes(16, 403);
    const double e = planes.workspace().edge / planes.resolution();
    const Vec3 o = planes.workspace().origin;
    const int i = 5, j = 9, k = 21;
    const Vec3 p = o + Vec3{(i + 0.5) * e, (j + 0.5) * e, (k + 0.5) * e};
    const PointFeature f = query_point(planes, p);
    REQUIRE(f.size() == 48);
    const int F = planes.features();
    for (int c = 0; c < F; ++c) {
        CHECK(f[c] == doctest::Approx(planes.plane(0)[planes.cell_offset(i, j) + c]).epsilon(1e-12));
        CHECK(f[F + c] ==
              doctest::Approx(planes.plane(1)[planes.cell_offset(i, k) + c]).epsilon(1e-12));
        CHECK(f[2 * F + c] ==
              doctest::Approx(planes.plane(2)[planes.cell_offset(j, k) + c]).epsilon(1e-12));
    }
}

TEST_CASE("bilinear interpolation reproduces linear fields") {
    TriPlaneVolume planes(Workspace{}, 40, 4);
    const double e = planes.workspace().edge / planes.resolution();
    const Vec3 o = planes.workspace().origin;
    for (int p = 0; p < 3; ++p) {
        for (int a = 0; a < 40; ++a) {
            for (int b = 0; b < 40; ++b) {
                float* cell = planes.plane(p).data() + planes.cell_offset(a, b);
                cell[0] = static_cast<float>((a + 0.5) * e);  // first kept coordinate
                cell[1] = static_cast<float>((b + 0.5) * e);  // second kept coordinate
                cell[2] = 1.0f;
                cell[3] = 0.0f;
            }
        }
    }
    Rng rng(404);
    for (int t = 0; t < 300; ++t) {
        const Vec3 p = o + Vec3{rng.uniform(e, 0.30 - e), rng.uniform(e, 0.30 - e),
                                rng.uniform(e, 0.30 - e)};
        const PointFeature f = query_point(planes, p);
        const Vec3 local = p - o;
        CHECK(std::fabs(f[0] - local.x) < 1e-6);   // xy plane, u = x
        CHECK(std::fabs(f[1] - local.y) < 1e-6);   // xy plane, v = y
        CHECK(std::fabs(f[4] - local.x) < 1e-6);   // xz plane, u = x
        CHECK(std::fabs(f[5] - local.z) < 1e-6);   // xz plane, v = z
        CHECK(std::fabs(f[8] - local.y) < 1e-6);   // yz plane, u = y
        CHECK(std::fabs(f[9] - local.z) < 1e-6);   // yz plane, v = z
        CHECK(f[2] == doctest::Approx(1.0));
    }
}

TEST_CASE("points sharing x and y share the xy-plane block") {
    const TriPlaneVolume planes = random_planes(8, 405);
    const PointFeature a = query_point(planes, {0.11, 0.07, 0.05});
    const PointFeature b = query_point(planes, {0.11, 0.07, 0.23});
    for (int c = 0; c < planes.features(); ++c) CHECK(a[c] == b[c]);
}

TEST_CASE("out-of-workspace queries clamp to the boundary") {
    const TriPlaneVolume planes = random_planes(8, 406);
    const PointFeature inside = query_point(planes, {0.15, 0.15, 0.299});
    const PointFeature outside = query_point(planes, {0.15, 0.15, 0.45});
    for (size_t c = 0; c < inside.size(); ++c) CHECK(inside[c] == doctest::Approx(outside[c]));
}

TEST_CASE("ray features maxpool the enumerated chord samples") {
    const TriPlaneVolume planes = random_planes(32, 407);
    Rng rng(408);
    for (int t = 0; t < 50; ++t) {
        const Vec3 center{rng.uniform(0.02, 0.28), rng.uniform(0.02, 0.28),
                          rng.uniform(0.02, 0.28)};
        const Vec3 dir = rng.unit_vector();
        const RayFeature got = ray_feature(planes, center, dir);

        const auto samples = ray_sample_points(planes.workspace(), center, dir);
        REQUIRE_FALSE(samples.empty());
        RayFeature expected(96, -std::numeric_limits<double>::infinity());
        for (const Vec3& s : samples) {
            const PointFeature f = query_point(planes, s);
            for (size_t c = 0; c < expected.size(); ++c) {
                expected[c] = std::max(expected[c], f[c]);
            }
        }
        for (size_t c = 0; c < expected.size(); ++c) CHECK(got[c] == expected[c]);

        // permutation invariance of the pooled reduction
        std::vector<PointFeature> fs;
        for (const Vec3& s : samples) fs.push_back(query_point(planes, s));
        Rng shuffler(t);
        shuffler.shuffle(fs);
        RayFeature permuted(96, -std::numeric_limits<double>::infinity());
        for (const auto& f : fs) {
            for (size_t c = 0; c < permuted.size(); ++c) permuted[c] = std::max(permuted[c], f[c]);
        }
        CHECK(permuted == got);
    }
}

TEST_CASE("ray features are invariant to direction flips") {
    const TriPlaneVolume planes = random_planes(16, 409);
    Rng rng(410);
    for (int t = 0; t < 50; ++t) {
        const Vec3 center{rng.uniform(0.03, 0.27), rng.uniform(0.03, 0.27),
                          rng.uniform(0.03, 0.27)};
        const Vec3 dir = rng.unit_vector();
        CHECK(ray_feature(planes, center, dir) == ray_feature(planes, center, -dir));
    }
}

TEST_CASE("constant planes collapse ray and geo features to the constant") {
    TriPlaneVolume planes(Workspace{}, 40, 4);
    for (int p = 0; p < 3; ++p) {
        for (size_t i = 0; i < planes.plane(p).size(); ++i) {
            planes.plane(p)[i] = static_cast<float>(p + 1) * 0.25f;
        }
    }
    const RayFeature rf = ray_feature(planes, {0.15, 0.15, 0.15}, {0.3, -0.5, 0.81});
    const GeoFeature gf = geo_feature(planes, {0.15, 0.15, 0.15}, {0.3, -0.5, 0.81});
    REQUIRE(rf.size() == 12);
    REQUIRE(gf.size() == 108);
    for (int c = 0; c < 4; ++c) {
        CHECK(rf[c] == doctest::Approx(0.25));
        CHECK(rf[4 + c] == doctest::Approx(0.50));
        CHECK(rf[8 + c] == doctest::Approx(0.75));
    }
    for (int block = 1; block < 9; ++block) {
        for (int c = 0; c < 12; ++c) {
            CHECK(gf[block * 12 + c] == doctest::Approx(gf[c]));
        }
    }
}

TEST_CASE("ray centers outside the workspace are rejected") {
    const TriPlaneVolume planes = random_planes(4, 411);
    CHECK_THROWS_AS(ray_feature(planes, {0.5, 0.15, 0.15}, {0, 0, 1}), std::invalid_argument);
}

TEST_CASE("geo cuboid vertices sit on the canonical cube") {
    const auto pts = geo_cuboid_points({0, 0, 0}, {1, 0, 0}, 0.075);
    const double h = 0.0375;
    // lexicographic signs over (approach, side, binormal) = (x, y, z) for dir = +x
    const Vec3 expected[8] = {{-h, -h, -h}, {-h, -h, h}, {-h, h, -h}, {-h, h, h},
                              {h, -h, -h},  {h, -h, h},  {h, h, -h},  {h, h, h}};
    for (int i = 0; i < 8; ++i) {
        CHECK(pts[i].x == doctest::Approx(expected[i].x));
        CHECK(pts[i].y == doctest::Approx(expected[i].y));
        CHECK(pts[i].z == doctest::Approx(expected[i].z));
    }
    CHECK(norm(pts[8]) == doctest::Approx(0.0));
}

TEST_CASE("opposite directions visit the same vertex multiset") {
    const TriPlaneVolume planes = random_planes(8, 412);
    const Vec3 center{0.14, 0.16, 0.11};
    const GeoFeature up = geo_feature(planes, center, {0, 0, 1});
    const GeoFeature down = geo_feature(planes, center, {0, 0, -1});
    const int dim = 3 * planes.features();
    auto blocks = [&](const GeoFeature& g) {
        std::vector<std::vector<double>> v;
        for (int b = 0; b < 8; ++b) {
            v.emplace_back(g.begin() + b * dim, g.begin() + (b + 1) * dim);
        }
        std::sort(v.begin(), v.end());
        return v;
    };
    CHECK(blocks(up) == blocks(down));
    // geo length scales as 9x the point feature for any width
    for (int F : {4, 16}) {
        const TriPlaneVolume p2 = random_planes(F, 500 + F);
        CHECK(geo_feature(p2, center, {0, 1, 0}).size() ==
              9 * query_point(p2, center).size());
    }
}

TEST_CASE("encoder weights round-trip with provenance") {
    const EncoderWeights w = EncoderWeights::seeded(16, 99);
    w.save("enc.bin", "unit-test");
    const EncoderWeights back = EncoderWeights::load("enc.bin");
    CHECK(back.features == 16);
    CHECK(TensorFile::load("enc.bin").provenance == "unit-test");
    for (size_t i = 0; i < w.conv1_w.size(); ++i) {
        CHECK(static_cast<float>(w.conv1_w[i]) == static_cast<float>(back.conv1_w[i]));
    }
    std::remove("enc.bin");
}
