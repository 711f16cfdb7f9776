#include <doctest.h>

#include <cstdio>

#include "nbv/affordance.hpp"
#include "nbv/parallel.hpp"
#include "test_helpers.hpp"

using namespace nbv;
using namespace nbvtest;

namespace {

RayFeature random_ray_feature(Rng& rng, int F) {
    RayFeature f(3 * F);
    for (double& v : f) v = rng.uniform(-1.0, 1.0);
    return f;
}

GeoFeature random_geo_feature(Rng& rng, int F) {
    GeoFeature f(27 * F);
    for (double& v : f) v = rng.uniform(-1.0, 1.0);
    return f;
}

}  // namespace

TEST_CASE("zero weights decode to the canonical midpoint prediction") {
    const AffordanceHead head(2, 8);  // all parameters zero
    Rng rng(701);
    const AffordancePrediction p = predict(head, rng.unit_vector(), random_ray_feature(rng, 2),
                                           random_geo_feature(rng, 2));
    CHECK(p.quality == doctest::Approx(0.5));
    CHECK(p.width == doctest::Approx(0.04));
    CHECK(p.rotation == doctest::Approx(0.0));
}

TEST_CASE("prediction codomain holds over random inputs") {
    const AffordanceHead head = AffordanceHead::seeded(2, 702, 16);
    Rng rng(703);
    for (int i = 0; i < 10000; ++i) {
        const AffordancePrediction p = predict(head, rng.unit_vector(),
                                               random_ray_feature(rng, 2),
                                               random_geo_feature(rng, 2));
        CHECK(p.quality >= 0.0);
        CHECK(p.quality <= 1.0);
        CHECK(p.rotation >= 0.0);
        CHECK(p.rotation < kPi);
        CHECK(p.width >= 0.0);
        CHECK(p.width <= 0.08);
    }
}

TEST_CASE("predict agrees with a straight-line forward pass") {
    Rng rng(704);
    for (int trial = 0; trial < 100; ++trial) {
        const int F = 2, hidden = 12;
        const AffordanceHead head = AffordanceHead::seeded(F, 705 + trial, hidden);
        const Vec3 v = rng.unit_vector();
        const RayFeature ray = random_ray_feature(rng, F);
        const GeoFeature geo = random_geo_feature(rng, F);

        // independent forward pass over the flat parameter layout
        std::vector<double> x{v.x, v.y, v.z};
        x.insert(x.end(), ray.begin(), ray.end());
        x.insert(x.end(), geo.begin(), geo.end());
        const std::vector<double>& params = head.net().params();
        const int dims[6] = {static_cast<int>(x.size()), hidden, hidden, hidden, hidden, 4};
        size_t offset = 0;
        for (int layer = 0; layer < 5; ++layer) {
            const int in = dims[layer], out = dims[layer + 1];
            std::vector<double> y(out, 0.0);
            for (int o = 0; o < out; ++o) {
                double acc = params[offset + static_cast<size_t>(in) * out + o];
                for (int i = 0; i < in; ++i) {
                    acc += params[offset + static_cast<size_t>(o) * in + i] * x[i];
                }
                if (layer < 4) acc = std::log1p(std::exp(acc));      // softplus stack
                if (layer >= 1 && layer <= 3) acc += x[o];           // residual connections
                y[o] = acc;
            }
            offset += static_cast<size_t>(in) * out + out;
            x = std::move(y);
        }
        const AffordancePrediction p = predict(head, v, ray, geo);
        CHECK(std::fabs(p.quality - sigmoid_fn(x[0])) < 1e-6);
        double r = 0.5 * std::atan2(x[2], x[1]);
        if (r < 0) r += kPi;
        CHECK(std::fabs(p.rotation - r) < 1e-6);
        CHECK(std::fabs(p.width - 0.08 * sigmoid_fn(x[3])) < 1e-6);
    }
}

TEST_CASE("grasp loss matches its definition on clean cases") {
    SUBCASE("perfect success prediction leaves only the quality term") {
        GraspLabel label;
        label.success = 1;
        label.rotation = 0.9;
        label.width = 0.05;
        const double w_logit = std::log((label.width / 0.08) / (1.0 - label.width / 0.08));
        const std::array<double, 4> raw{2.0, std::cos(2 * label.rotation),
                                        std::sin(2 * label.rotation), w_logit};
        const GraspLossResult r = grasp_loss(raw, label);
        CHECK(r.l_r < 1e-5);
        CHECK(r.l_w < 1e-10);
        const double expected_bce = -std::log(sigmoid_fn(2.0));
        CHECK(r.l_q == doctest::Approx(expected_bce));
    }
    SUBCASE("failure labels mask rotation and width terms") {
        GraspLabel label;
        label.success = 0;
        label.rotation = 1.3;
        label.width = 0.07;
        const std::array<double, 4> raw{-0.4, 0.9, -0.8, 0.3};
        const GraspLossResult r = grasp_loss(raw, label);
        CHECK(r.l_r == 0.0);
        CHECK(r.l_w == 0.0);
        CHECK(r.loss == r.l_q);
        CHECK(r.grad[1] == 0.0);
        CHECK(r.grad[2] == 0.0);
        CHECK(r.grad[3] == 0.0);
    }
    SUBCASE("rotation supervision is pi-periodic") {
        GraspLabel a, b;
        a.success = b.success = 1;
        a.width = b.width = 0.04;
        a.rotation = 0.7;
        b.rotation = 0.7 + kPi;
        const std::array<double, 4> raw{0.2, 0.3, -0.5, 0.1};
        CHECK(grasp_loss(raw, a).loss == doctest::Approx(grasp_loss(raw, b).loss).epsilon(1e-9));
    }
    SUBCASE("loss is non-negative") {
        Rng rng(706);
        for (int i = 0; i < 500; ++i) {
            GraspLabel label;
            label.success = rng.uniform() < 0.5 ? 1 : 0;
            label.rotation = rng.uniform(0.0, kPi);
            label.width = rng.uniform(0.0, 0.08);
            const std::array<double, 4> raw{rng.uniform(-3, 3), rng.uniform(-2, 2),
                                            rng.uniform(-2, 2), rng.uniform(-3, 3)};
            CHECK(grasp_loss(raw, label).loss >= 0.0);
        }
    }
}

TEST_CASE("grasp loss gradients match central finite differences") {
    Rng rng(707);
    int checked = 0;
    for (int i = 0; i < 100; ++i) {
        GraspLabel label;
        label.success = i % 2;
        label.rotation = rng.uniform(0.0, kPi);
        label.width = rng.uniform(0.005, 0.075);
        std::array<double, 4> raw{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2),
                                  rng.uniform(-2, 2)};
        const GraspLossResult r = grasp_loss(raw, label);
        const double h = 1e-4;
        for (int p = 0; p < 4; ++p) {
            std::array<double, 4> plus = raw, minus = raw;
            plus[p] += h;
            minus[p] -= h;
            const double fd = (grasp_loss(plus, label).loss - grasp_loss(minus, label).loss) /
                              (2.0 * h);
            const double scale = std::max({1.0, std::fabs(fd), std::fabs(r.grad[p])});
            CHECK(std::fabs(r.grad[p] - fd) <= 1e-4 * scale);
            ++checked;
        }
    }
    CHECK(checked == 400);
}

TEST_CASE("oracle verdicts are binary and match their construction") {
    SUBCASE("center buried in a non-target neighbor fails") {
        Scene scene;
        scene.primitives.push_back(SdfPrimitive::sphere(0.02, {0.10, 0.15, 0.02}));
        scene.primitives.push_back(SdfPrimitive::box({0.02, 0.02, 0.02},
                                                     {Rotation::identity(), {0.20, 0.15, 0.02}}));
        assign_target(scene, 0);
        const Grasp g = oracle_predict(scene, {0.20, 0.15, 0.02}, {0, 0, -1});
        CHECK(g.quality == 0.0);
    }
    SUBCASE("lone graspable sphere succeeds from above and from the side") {
        Scene scene;
        scene.primitives.push_back(SdfPrimitive::sphere(0.03, {0.15, 0.15, 0.03}));
        assign_target(scene, 0);
        for (const Vec3& v : {Vec3{0, 0, -1}, Vec3{1, 0, 0}}) {
            const Grasp g = oracle_predict(scene, {0.15, 0.15, 0.03}, v);
            CHECK(g.quality == 1.0);
            CHECK(g.width == doctest::Approx(0.065).epsilon(0.01));
        }
    }
}

TEST_CASE("coarse rotation sweep agrees with a 64-angle sweep on a lattice") {
    Scene scene = packed_fixture(708, 5);
    OracleConfig coarse;  // 16 angles
    OracleConfig fine;
    fine.rotation_sweep = 64;
    const Aabb bbox = scene.target_bbox;
    int agree = 0, total = 0;
    for (int i = 0; i < 5; ++i) {
        for (int j = 0; j < 5; ++j) {
            for (int k = 0; k < 5; ++k) {
                const Vec3 ext = bbox.extent();
                const Vec3 p = bbox.min + Vec3{ext.x * (i + 0.5) / 5, ext.y * (j + 0.5) / 5,
                                               ext.z * (k + 0.5) / 5};
                const Vec3 v{0.6, 0.45, -0.66};
                const double q16 = oracle_predict(scene, p, normalized(v), {}, coarse).quality;
                const double q64 = oracle_predict(scene, p, normalized(v), {}, fine).quality;
                ++total;
                if (q16 == q64) ++agree;
            }
        }
    }
    CHECK(total == 125);
    CHECK(static_cast<double>(agree) / total >= 0.98);
}

TEST_CASE("imagined affordances form a sorted lattice of the requested size") {
    const AffordanceHead head = AffordanceHead::seeded(2, 709, 8);
    TriPlaneVolume planes(Workspace{}, 40, 2);
    Rng rng(710);
    for (int p = 0; p < 3; ++p) {
        for (float& v : planes.plane(p)) v = static_cast<float>(rng.uniform(-0.5, 0.5));
    }
    const Aabb bbox{{0.10, 0.10, 0.02}, {0.20, 0.20, 0.10}};
    AffordanceConfig config;
    const auto grasps = imagine_affordances(planes, head, bbox, {0, 0, -1}, 64, config);
    REQUIRE(grasps.size() == 64);
    for (size_t i = 1; i < grasps.size(); ++i) CHECK(grasps[i - 1].quality >= grasps[i].quality);

    SUBCASE("single-point bbox reduces to a direct prediction") {
        const Vec3 p{0.15, 0.15, 0.06};
        const auto single = imagine_affordances(planes, head, Aabb{p, p}, {0, 0, -1}, 1, config);
        REQUIRE(single.size() == 1);
        const NetAffordance model(planes, head, config);
        const Grasp direct = model.at(p, {0, 0, -1});
        CHECK(single[0].quality == doctest::Approx(direct.quality));
        CHECK(single[0].rotation == doctest::Approx(direct.rotation));
        CHECK(single[0].width == doctest::Approx(direct.width));
    }
    SUBCASE("degenerate bbox with multiple centers is rejected") {
        const Vec3 p{0.15, 0.15, 0.06};
        CHECK_THROWS_AS(imagine_affordances(planes, head, Aabb{p, p}, {0, 0, -1}, 8, config),
                        std::invalid_argument);
        CHECK_THROWS_AS(imagine_affordances(planes, head, bbox, {0, 0, -1}, 60, config),
                        std::invalid_argument);
    }
}

TEST_CASE("oracle-backed imagery tops out on the target when it is graspable") {
    Scene scene;
    scene.primitives.push_back(SdfPrimitive::box({0.015, 0.02, 0.03},
                                                 {Rotation::identity(), {0.15, 0.15, 0.03}}));
    assign_target(scene, 0);
    const OracleAffordance model(scene);
    const auto grasps = imagine_affordances(model, scene.target_bbox, {1, 0, 0}, 64,
                                            scene.workspace);
    REQUIRE(grasps.size() == 64);
    CHECK(grasps[0].quality == 1.0);
    // the best imagined center must lie on or inside the target
    CHECK(scene.target().sdf(grasps[0].center) < 0.01);
}

TEST_CASE("datasets round-trip bit-exactly") {
    Dataset ds;
    ds.feature_dim = 63;
    ds.triplane_features = 2;
    ds.provenance = "mix=test";
    Rng rng(711);
    for (int i = 0; i < 37; ++i) {
        DatasetRecord rec;
        rec.features.resize(ds.feature_dim);
        for (float& f : rec.features) f = static_cast<float>(rng.uniform(-1, 1));
        rec.label.center = {rng.uniform(0, 0.3), rng.uniform(0, 0.3), rng.uniform(0, 0.3)};
        rec.label.view = rng.unit_vector();
        rec.label.rotation = rng.uniform(0, kPi);
        rec.label.width = rng.uniform(0, 0.08);
        rec.label.success = i % 2;
        ds.records.push_back(rec);
    }
    ds.save("ds.bin");
    const Dataset back = Dataset::load("ds.bin");
    REQUIRE(back.records.size() == ds.records.size());
    CHECK(back.provenance == ds.provenance);
    for (size_t i = 0; i < ds.records.size(); ++i) {
        CHECK(back.records[i].features == ds.records[i].features);
        CHECK(back.records[i].label.success == ds.records[i].label.success);
        CHECK(static_cast<float>(back.records[i].label.rotation) ==
              static_cast<float>(ds.records[i].label.rotation));
    }
    std::remove("ds.bin");
}

namespace {

Dataset separable_toy_dataset(int count, uint64_t seed) {
    Dataset ds;
    ds.triplane_features = 1;
    ds.feature_dim = 33;  // 3 + 30F for F = 1
    Rng rng(seed);
    for (int i = 0; i < count; ++i) {
        DatasetRecord rec;
        rec.features.assign(ds.feature_dim, 0.0f);
        const int success = i % 2;
        for (int c = 0; c < ds.feature_dim; ++c) {
            rec.features[c] = static_cast<float>(rng.uniform(-0.3, 0.3));
        }
        rec.features[7] = success ? 1.0f : -1.0f;  // the separating coordinate
        rec.label.success = success;
        rec.label.rotation = 0.3;
        rec.label.width = 0.05;
        rec.label.view = {0, 0, -1};
        ds.records.push_back(rec);
    }
    return ds;
}

}  // namespace

TEST_CASE("training drives a separable toy problem below 0.1 quality loss") {
    const Dataset ds = separable_toy_dataset(200, 712);
    TrainConfig config;
    config.epochs = 200;
    config.lr = 0.01;
    config.hidden = 16;
    config.seed = 5;
    TrainReport report;
    train_head(ds, config, &report);
    REQUIRE_FALSE(report.epochs.empty());
    CHECK(report.epochs.back().l_q < 0.1);
}

TEST_CASE("zero learning rate leaves head weights at their seeded values") {
    const Dataset ds = separable_toy_dataset(64, 713);
    TrainConfig config;
    config.epochs = 3;
    config.lr = 0.0;
    config.hidden = 8;
    config.seed = 6;
    const AffordanceHead trained = train_head(ds, config);
    const AffordanceHead seeded = AffordanceHead::seeded(1, 6, 8);
    CHECK(trained.net().params() == seeded.net().params());
}

TEST_CASE("training is bit-deterministic for a fixed seed and any worker count") {
    const Dataset ds = separable_toy_dataset(150, 714);
    TrainConfig config;
    config.epochs = 5;
    config.lr = 0.002;
    config.hidden = 8;
    config.seed = 7;
    set_worker_count(1);
    const AffordanceHead a = train_head(ds, config);
    set_worker_count(2);
    const AffordanceHead b = train_head(ds, config);
    set_worker_count(0);
    const AffordanceHead c = train_head(ds, config);
    CHECK(a.net().params() == b.net().params());
    CHECK(a.net().params() == c.net().params());
}

TEST_CASE("head weights round-trip through the container") {
    const AffordanceHead head = AffordanceHead::seeded(2, 715, 8);
    head.save("head.bin", "mix=all-three");
    const AffordanceHead back = AffordanceHead::load("head.bin");
    CHECK(back.triplane_features() == 2);
    CHECK(back.hidden() == 8);
    CHECK(TensorFile::load("head.bin").provenance == "mix=all-three");
    for (size_t i = 0; i < head.net().params().size(); ++i) {
        CHECK(static_cast<float>(head.net().params()[i]) ==
              static_cast<float>(back.net().params()[i]));
    }
    std::remove("head.bin");
}
