#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "nbv/mlp.hpp"
#include "nbv/scene.hpp"
#include "nbv/triplane.hpp"

namespace nbv {

// Four-layer decoder from a point feature (3F) to an SDF value in normalized
// workspace units, plus the logistic sharpness used by the renderer. Sharpness
// is stored in log space so it stays positive under optimization.
class SdfDecoder {
  public:
    explicit SdfDecoder(int triplane_features, int hidden = 128);
    static SdfDecoder seeded(int triplane_features, uint64_t seed, int hidden = 128);

    int triplane_features() const { return features_; }
    Mlp& net() { return net_; }
    const Mlp& net() const { return net_; }

    double sharpness() const { return std::exp(log_sharpness_); }
    double log_sharpness() const { return log_sharpness_; }
    void set_log_sharpness(double v) { log_sharpness_ = v; }

    void save(const std::string& path, const std::string& provenance) const;
    static SdfDecoder load(const std::string& path);

  private:
    int features_;
    int hidden_;
    Mlp net_;
    double log_sharpness_;
};

double decode_sdf(const SdfDecoder& decoder, const PointFeature& feature);

// Scalar field sampled along rays by the renderer.
class SdfField {
  public:
    virtual ~SdfField() = default;
    virtual double sdf(const Vec3& p) const = 0;
};

class DecodedSdfField final : public SdfField {
  public:
    DecodedSdfField(const TriPlaneVolume& planes, const SdfDecoder& decoder)
        : planes_(planes), decoder_(decoder) {}
    double sdf(const Vec3& p) const override;

  private:
    const TriPlaneVolume& planes_;
    const SdfDecoder& decoder_;
};

// Feature-bypass hook: the analytic scene SDF in normalized workspace units.
class AnalyticSdfField final : public SdfField {
  public:
    explicit AnalyticSdfField(const Scene& scene) : scene_(scene) {}
    double sdf(const Vec3& p) const override {
        return scene_sdf(scene_, p) / scene_.workspace.edge;
    }

  private:
    const Scene& scene_;
};

struct RenderConfig {
    int rays_per_batch = 128;
    int uniform_samples = 64;
    int importance_rounds = 4;
    int importance_samples = 32;
    // Sampling bounds along the ray; non-finite values fall back to the
    // workspace chord, extended by boundary_pad so surfaces lying on the
    // workspace boundary (the support plane) complete their crossing.
    double near = std::numeric_limits<double>::quiet_NaN();
    double far = std::numeric_limits<double>::quiet_NaN();
    double boundary_pad = 0.02;
    double min_weight_sum = 1e-3;  // below this the ray reports no hit
    double weight_eps = 1e-6;
};

struct RayRender {
    bool hit = false;
    double depth = 0.0;       // expected ray parameter (distance along the unit ray)
    double weight_sum = 0.0;
    std::vector<double> ts;       // sorted sample parameters
    std::vector<double> sdf;      // decoded SDF per sample
    std::vector<double> mids;     // interval midpoints
    std::vector<double> alphas;   // per interval
    std::vector<double> weights;  // per interval
};

// NeuS-style compositing: alpha_i = max(0, 1 - Phi(s*sdf_{i+1}) / Phi(s*sdf_i))
// with Phi the logistic CDF; depth is the transmittance-weighted midpoint mean.
RayRender render_ray(const SdfField& field, const Workspace& workspace, const Vec3& origin,
                     const Vec3& dir, double sharpness, const RenderConfig& config);

// d(depth)/d(sdf_i) and d(depth)/d(sharpness) at fixed sample positions.
void render_ray_backward(const RayRender& render, double sharpness, double d_depth,
                         std::vector<double>& d_sdf, double& d_sharpness);

// Whole-image convenience wrapper used by the CLI; reuses the PGM conventions.
DepthImage render_depth_implicit(const SdfField& field, const Workspace& workspace,
                                 const Intrinsics& intrinsics, const Pose& camera_pose,
                                 double sharpness, const RenderConfig& config);

struct DepthLossResult {
    double loss = 0.0;
    std::vector<double> grad;  // d loss / d rendered, zero where masked out
    int valid_count = 0;
    bool empty_mask = false;
};

// Mean absolute error over rays where both depths are finite; the subgradient at
// zero residual is defined as 0.
DepthLossResult depth_loss(const std::vector<double>& rendered,
                           const std::vector<double>& ground_truth);

// One supervised ray: renders, applies |depth - gt|, and backpropagates into the
// decoder parameter gradient (+=) and the log-sharpness gradient. Returns the
// ray loss, or no value when the rendered ray is a no-hit.
struct RaySupervision {
    Vec3 origin;
    Vec3 dir;          // unit
    double gt_depth;   // ray parameter of the true surface
};
std::optional<double> decoder_ray_step(const TriPlaneVolume& planes, const SdfDecoder& decoder,
                                       const RaySupervision& ray, const RenderConfig& config,
                                       std::vector<double>& param_grad, double& log_s_grad);

}  // namespace nbv
