#include "nbv/tsdf.hpp"

#include <atomic>
#include <cstring>
#include <fstream>

#include "nbv/parallel.hpp"

namespace nbv {

TsdfVolume::TsdfVolume(const Workspace& workspace, const TsdfConfig& config)
    : workspace_(workspace), config_(config) {
    const size_t n = static_cast<size_t>(config.resolution) * config.resolution * config.resolution;
    distance_.assign(n, 1.0f);
    weight_.assign(n, 0.0f);
}

IntegrationReport TsdfVolume::integrate(const DepthImage& image) {
    const Pose camera_from_world = image.camera_pose.inverse();
    const double tau = truncation();
    const int res = config_.resolution;
    const Intrinsics& intr = image.intrinsics;
    std::atomic<size_t> updated{0};

    parallel_for_chunked(static_cast<size_t>(res), 4, [&](size_t begin, size_t end) {
        size_t local_updates = 0;
        for (size_t i = begin; i < end; ++i) {
            for (int j = 0; j < res; ++j) {
                for (int k = 0; k < res; ++k) {
                    const Vec3 pc = camera_from_world.apply(voxel_center(static_cast<int>(i), j, k));
                    if (pc.z <= 1e-6) continue;
                    const int u = static_cast<int>(std::floor(pc.x / pc.z * intr.fx + intr.cx));
                    const int v = static_cast<int>(std::floor(pc.y / pc.z * intr.fy + intr.cy));
                    if (u < 0 || u >= intr.width || v < 0 || v >= intr.height) continue;
                    const double pixel_depth = image.at(u, v);
                    if (!is_hit(pixel_depth)) {
                        // Free space was observed up to the far plane; beyond it is unknown.
                        if (!config_.carve_no_hit_rays) continue;
                        if (pc.z >= image.far_plane - tau) continue;
                        const size_t idx = index(static_cast<int>(i), j, k);
                        const float w = weight_[idx];
                        distance_[idx] = (distance_[idx] * w + 1.0f) / (w + 1.0f);
                        weight_[idx] = std::min(w + 1.0f, config_.weight_cap);
                        ++local_updates;
                        continue;
                    }
                    const double sdf = pixel_depth - pc.z;
                    if (sdf < -tau) continue;  // occluded beyond the truncation band
                    const float tsdf = static_cast<float>(std::clamp(sdf / tau, -1.0, 1.0));
                    const size_t idx = index(static_cast<int>(i), j, k);
                    const float w = weight_[idx];
                    distance_[idx] = (distance_[idx] * w + tsdf) / (w + 1.0f);
                    weight_[idx] = std::min(w + 1.0f, config_.weight_cap);
                    ++local_updates;
                }
            }
        }
        updated.fetch_add(local_updates);
    });

    IntegrationReport report;
    report.updated_voxels = updated.load();
    report.frustum_hit = report.updated_voxels > 0;
    return report;
}

double TsdfVolume::sample_trilinear(const Vec3& p) const {
    if (!workspace_.bounds().contains(p)) {
        throw std::out_of_range("trilinear query outside the workspace");
    }
    const double e = voxel_edge();
    const int res = config_.resolution;
    const Vec3 g = (p - workspace_.origin) / e - Vec3{0.5, 0.5, 0.5};
    int i0[3];
    double f[3];
    for (int a = 0; a < 3; ++a) {
        double gi = std::clamp(g[a], 0.0, static_cast<double>(res - 1));
        i0[a] = std::min(static_cast<int>(std::floor(gi)), res - 2);
        i0[a] = std::max(i0[a], 0);
        f[a] = std::clamp(gi - i0[a], 0.0, 1.0);
    }
    double acc = 0.0;
    for (int di = 0; di < 2; ++di) {
        for (int dj = 0; dj < 2; ++dj) {
            for (int dk = 0; dk < 2; ++dk) {
                const double w = (di ? f[0] : 1.0 - f[0]) * (dj ? f[1] : 1.0 - f[1]) *
                                 (dk ? f[2] : 1.0 - f[2]);
                acc += w * distance_[index(i0[0] + di, i0[1] + dj, i0[2] + dk)];
            }
        }
    }
    return acc;
}

size_t TsdfVolume::observed_voxel_count() const {
    size_t n = 0;
    for (float w : weight_) {
        if (w > 0.0f) ++n;
    }
    return n;
}

std::vector<Vec3> TsdfVolume::zero_crossing_points() const {
    std::vector<Vec3> pts;
    const int res = config_.resolution;
    for (int i = 0; i < res; ++i) {
        for (int j = 0; j < res; ++j) {
            for (int k = 0; k < res; ++k) {
                const size_t idx0 = index(i, j, k);
                if (weight_[idx0] <= 0.0f) continue;
                const float f0 = distance_[idx0];
                const int next[3][3] = {{i + 1, j, k}, {i, j + 1, k}, {i, j, k + 1}};
                for (int a = 0; a < 3; ++a) {
                    if (next[a][0] >= res || next[a][1] >= res || next[a][2] >= res) continue;
                    const size_t idx1 = index(next[a][0], next[a][1], next[a][2]);
                    if (weight_[idx1] <= 0.0f) continue;
                    const float f1 = distance_[idx1];
                    if (f0 * f1 < 0.0f) {
                        const double r = std::fabs(f0) / (std::fabs(f0) + std::fabs(f1));
                        Vec3 p = voxel_center(i, j, k);
                        p[a] += r * voxel_edge();
                        pts.push_back(p);
                    }
                }
            }
        }
    }
    return pts;
}

namespace {

template <typename T>
void write_raw(std::ofstream& out, const T& value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_raw(std::ifstream& in) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    return value;
}

}  // namespace

void TsdfVolume::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write volume: " + path);
    write_raw<uint32_t>(out, static_cast<uint32_t>(config_.resolution));
    write_raw<float>(out, static_cast<float>(workspace_.origin.x));
    write_raw<float>(out, static_cast<float>(workspace_.origin.y));
    write_raw<float>(out, static_cast<float>(workspace_.origin.z));
    write_raw<float>(out, static_cast<float>(workspace_.edge));
    out.write(reinterpret_cast<const char*>(distance_.data()), distance_.size() * sizeof(float));
    out.write(reinterpret_cast<const char*>(weight_.data()), weight_.size() * sizeof(float));
}

TsdfVolume TsdfVolume::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read volume: " + path);
    TsdfConfig config;
    config.resolution = static_cast<int>(read_raw<uint32_t>(in));
    Workspace ws;
    ws.origin.x = read_raw<float>(in);
    ws.origin.y = read_raw<float>(in);
    ws.origin.z = read_raw<float>(in);
    ws.edge = read_raw<float>(in);
    TsdfVolume volume(ws, config);
    in.read(reinterpret_cast<char*>(volume.distance_.data()),
            volume.distance_.size() * sizeof(float));
    in.read(reinterpret_cast<char*>(volume.weight_.data()), volume.weight_.size() * sizeof(float));
    if (!in) throw std::runtime_error("truncated volume file: " + path);
    return volume;
}

}  // namespace nbv
