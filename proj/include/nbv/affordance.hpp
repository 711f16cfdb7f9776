#pragma once

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "nbv/grasp.hpp"
#include "nbv/mlp.hpp"
#include "nbv/triplane.hpp"

namespace nbv {

struct GraspLabel {
    Vec3 center;
    Vec3 view{0, 0, -1};
    double rotation = 0.0;
    double width = 0.0;
    int success = 0;  // {0, 1}
};

struct AffordanceConfig {
    double max_width = 0.08;
    double ray_step = 0.1;       // normalized by the workspace edge
    double cuboid_edge = 0.25;   // normalized by the workspace edge
    int lattice_count = 64;      // imagined grasp centers per bbox (must be a cube)
};

// Five fully-connected layers with residual connections on the hidden stack.
// Input: view direction (3) + ray feature (3F) + local geometry feature (9*3F).
// Raw outputs: quality logit, rotation pair (a, b), width logit.
class AffordanceHead {
  public:
    AffordanceHead(int triplane_features, int hidden = 128);
    static AffordanceHead seeded(int triplane_features, uint64_t seed, int hidden = 128);

    int triplane_features() const { return features_; }
    int hidden() const { return hidden_; }
    int input_dim() const { return net_.input_dim(); }

    Mlp& net() { return net_; }
    const Mlp& net() const { return net_; }

    void save(const std::string& path, const std::string& provenance) const;
    static AffordanceHead load(const std::string& path);

  private:
    int features_;
    int hidden_;
    Mlp net_;
};

struct AffordancePrediction {
    double quality = 0.0;   // sigmoid(raw[0])
    double rotation = 0.0;  // atan2(raw[2], raw[1]) / 2 mapped into [0, pi)
    double width = 0.0;     // max_width * sigmoid(raw[3])
    std::array<double, 4> raw{};
};

AffordancePrediction predict(const AffordanceHead& head, const Vec3& view,
                             const RayFeature& ray, const GeoFeature& geo,
                             double max_width = 0.08);

// Abstract per-point affordance source: either the trained head over a tri-plane
// volume or the analytic oracle over the ground-truth scene.
class AffordanceModel {
  public:
    virtual ~AffordanceModel() = default;
    virtual Grasp at(const Vec3& center, const Vec3& view) const = 0;
};

class NetAffordance final : public AffordanceModel {
  public:
    NetAffordance(const TriPlaneVolume& planes, const AffordanceHead& head,
                  const AffordanceConfig& config = {});
    Grasp at(const Vec3& center, const Vec3& view) const override;

  private:
    const TriPlaneVolume& planes_;
    const AffordanceHead& head_;
    AffordanceConfig config_;
};

struct OracleConfig {
    int rotation_sweep = 16;   // uniform angles in [0, pi)
    double width_pad = 0.005;  // added to the measured contact span
};

class OracleAffordance final : public AffordanceModel {
  public:
    OracleAffordance(const Scene& scene, const Gripper& gripper = {},
                     const OracleConfig& config = {});
    Grasp at(const Vec3& center, const Vec3& view) const override;

  private:
    const Scene& scene_;
    Gripper gripper_;
    OracleConfig config_;
};

// Rotation sweep against the feasibility oracle; quality is exactly 0 or 1.
Grasp oracle_predict(const Scene& scene, const Vec3& center, const Vec3& view,
                     const Gripper& gripper = {}, const OracleConfig& config = {});

// Lattice grasp centers filling the bbox, evaluated for view direction `view`
// and returned sorted by quality (descending, stable). N must be a cube number;
// centers are clamped into the workspace.
std::vector<Vec3> lattice_centers(const Aabb& bbox, int count, const Workspace& workspace);
std::vector<Grasp> imagine_affordances(const AffordanceModel& model, const Aabb& bbox,
                                       const Vec3& view, int count, const Workspace& workspace);
std::vector<Grasp> imagine_affordances(const TriPlaneVolume& planes, const AffordanceHead& head,
                                       const Aabb& bbox, const Vec3& view, int count,
                                       const AffordanceConfig& config = {});

struct GraspLossResult {
    double loss = 0.0;
    double l_q = 0.0;
    double l_r = 0.0;
    double l_w = 0.0;
    std::array<double, 4> grad{};  // d loss / d raw head outputs
};

// L = BCE(quality) + [success] * (1 - cos(2 dr)) + [success] * (dw / w_max)^2,
// with the rotation term computed through the normalized (a, b) pair.
GraspLossResult grasp_loss(const std::array<double, 4>& raw, const GraspLabel& label,
                           double max_width = 0.08);

struct DatasetRecord {
    std::vector<float> features;  // head input vector
    GraspLabel label;
};

struct Dataset {
    int feature_dim = 0;
    int triplane_features = 0;
    std::string provenance;
    std::vector<DatasetRecord> records;

    void save(const std::string& path) const;
    static Dataset load(const std::string& path);
};

struct TrainConfig {
    double lr = 2e-4;
    int batch_size = 128;
    int epochs = 60;
    uint64_t seed = 1;
    double val_fraction = 0.1;
    int hidden = 128;
    double max_width = 0.08;
    std::string log_csv_path;  // empty = no log written
};

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double l_q = 0.0;
    double l_r = 0.0;
    double l_w = 0.0;
};

struct TrainReport {
    std::vector<EpochStats> epochs;
    double final_train_loss = 0.0;
    double final_val_loss = 0.0;
};

// Minibatch Adam over the grasp loss; deterministic in (dataset, config) for any
// worker count. Throws on NaN loss with diagnostics.
AffordanceHead train_head(const Dataset& dataset, const TrainConfig& config,
                          TrainReport* report = nullptr);

}  // namespace nbv
