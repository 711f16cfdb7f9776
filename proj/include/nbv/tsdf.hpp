#pragma once

#include <string>
#include <vector>

#include "nbv/depth_camera.hpp"
#include "nbv/geom.hpp"
#include "nbv/scene.hpp"

namespace nbv {

struct TsdfConfig {
    int resolution = 40;
    double truncation_voxels = 4.0;  // truncation distance in voxel edges
    float weight_cap = 32.0f;
    bool carve_no_hit_rays = true;   // no-hit pixels clear free space up to the far plane
};

struct IntegrationReport {
    bool frustum_hit = false;  // false = warning: image frustum missed the workspace
    size_t updated_voxels = 0;
};

// Truncated signed-distance grid over the cubic workspace. Stored distances are
// normalized to [-1, 1] by the truncation distance; unobserved voxels hold +1
// with weight 0.
class TsdfVolume {
  public:
    TsdfVolume() : TsdfVolume(Workspace{}, TsdfConfig{}) {}
    TsdfVolume(const Workspace& workspace, const TsdfConfig& config);

    int resolution() const { return config_.resolution; }
    const Workspace& workspace() const { return workspace_; }
    double voxel_edge() const { return workspace_.edge / config_.resolution; }
    double truncation() const { return config_.truncation_voxels * voxel_edge(); }

    size_t index(int i, int j, int k) const {
        const size_t r = config_.resolution;
        return (static_cast<size_t>(i) * r + j) * r + k;
    }
    Vec3 voxel_center(int i, int j, int k) const {
        const double e = voxel_edge();
        return workspace_.origin + Vec3{(i + 0.5) * e, (j + 0.5) * e, (k + 0.5) * e};
    }

    float distance_at(int i, int j, int k) const { return distance_[index(i, j, k)]; }
    float weight_at(int i, int j, int k) const { return weight_[index(i, j, k)]; }
    void set_voxel(int i, int j, int k, float distance, float weight) {
        const size_t idx = index(i, j, k);
        distance_[idx] = distance;
        weight_[idx] = weight;
    }
    const std::vector<float>& distances() const { return distance_; }
    const std::vector<float>& weights() const { return weight_; }

    // Weighted-average fusion of one depth image. Must be called exclusively;
    // reads are concurrent-safe between integrations.
    IntegrationReport integrate(const DepthImage& image);

    // Trilinear interpolation; exact at voxel centers. Throws std::out_of_range
    // when p lies outside the workspace.
    double sample_trilinear(const Vec3& p) const;

    size_t observed_voxel_count() const;

    // Points where the stored field crosses zero between observed neighbors.
    std::vector<Vec3> zero_crossing_points() const;

    void save(const std::string& path) const;
    static TsdfVolume load(const std::string& path);

  private:
    Workspace workspace_;
    TsdfConfig config_;
    std::vector<float> distance_;
    std::vector<float> weight_;
};

}  // namespace nbv
