#pragma once

#include <array>
#include <string>
#include <vector>

#include "nbv/geom.hpp"
#include "nbv/tensor_file.hpp"
#include "nbv/tsdf.hpp"

namespace nbv {

// Axis-aligned feature planes in fixed order: xy (z dropped), xz (y dropped),
// yz (x dropped). Each plane stores res x res cells of `features` channels.
class TriPlaneVolume {
  public:
    TriPlaneVolume() : TriPlaneVolume(Workspace{}, 40, 32) {}
    TriPlaneVolume(const Workspace& workspace, int resolution, int features);

    int resolution() const { return resolution_; }
    int features() const { return features_; }
    const Workspace& workspace() const { return workspace_; }

    size_t cell_offset(int a, int b) const {
        return (static_cast<size_t>(a) * resolution_ + b) * features_;
    }
    const std::vector<float>& plane(int p) const { return planes_[p]; }
    std::vector<float>& plane(int p) { return planes_[p]; }

    // Bilinear sample of one plane at in-plane coordinates (meters along the two
    // kept axes); clamps to the boundary.
    void sample_plane(int p, double u_m, double v_m, double* out) const;

  private:
    Workspace workspace_;
    int resolution_;
    int features_;
    std::array<std::vector<float>, 3> planes_;
};

// Two shared 3x3 convolution layers lifting the four fixed reduction channels to
// the feature width.
struct EncoderWeights {
    int features = 32;
    std::vector<double> conv1_w;  // [F][4][3][3]
    std::vector<double> conv1_b;  // [F]
    std::vector<double> conv2_w;  // [F][F][3][3]
    std::vector<double> conv2_b;  // [F]

    static EncoderWeights seeded(int features, uint64_t seed);
    void save(const std::string& path, const std::string& provenance) const;
    static EncoderWeights load(const std::string& path);
    void check_shapes() const;
};

// Stage 1 (fixed): per plane cell, reduce the TSDF along the dropped axis into
// four channels: mean distance, min distance, occupied fraction, observed
// fraction. Stage 2 (trainable weights): conv 3x3 -> softplus -> conv 3x3.
TriPlaneVolume encode(const TsdfVolume& volume, const EncoderWeights& weights);

// The raw stage-1 reduction, exposed for inspection and tests: four channels.
TriPlaneVolume encode_stage1(const TsdfVolume& volume);

using PointFeature = std::vector<double>;  // 3F
using RayFeature = std::vector<double>;    // 3F
using GeoFeature = std::vector<double>;    // 9 * 3F

// Concatenated bilinear samples from the three planes in fixed (xy, xz, yz)
// order; out-of-workspace coordinates clamp to the boundary.
PointFeature query_point(const TriPlaneVolume& planes, const Vec3& p);
void query_point_into(const TriPlaneVolume& planes, const Vec3& p, double* out);

// Coordinate-wise max of point features along the full workspace chord through
// `center` with direction `dir`, sampled at the given step (normalized by the
// workspace edge). Throws std::invalid_argument when the chord is degenerate.
RayFeature ray_feature(const TriPlaneVolume& planes, const Vec3& center, const Vec3& dir,
                       double step_normalized = 0.1);

// Sample positions used by ray_feature, anchored at the center so a direction
// flip yields the identical set.
std::vector<Vec3> ray_sample_points(const Workspace& workspace, const Vec3& center,
                                    const Vec3& dir, double step_normalized = 0.1);

// Eight cuboid vertices (lexicographic signs over approach/side/binormal axes)
// followed by the center.
std::array<Vec3, 9> geo_cuboid_points(const Vec3& center, const Vec3& dir, double edge_m);

GeoFeature geo_feature(const TriPlaneVolume& planes, const Vec3& center, const Vec3& dir,
                       double cuboid_edge_normalized = 0.25);

// Per-channel PGM export for inspection (one file per plane and channel).
void export_plane_pgms(const TriPlaneVolume& planes, const std::string& path_prefix);

}  // namespace nbv
