#include "nbv/triplane.hpp"

#include <cstdio>
#include <fstream>

#include "nbv/parallel.hpp"
#include "nbv/rng.hpp"

namespace nbv {

TriPlaneVolume::TriPlaneVolume(const Workspace& workspace, int resolution, int features)
    : workspace_(workspace), resolution_(resolution), features_(features) {
    for (auto& plane : planes_) {
        plane.assign(static_cast<size_t>(resolution) * resolution * features, 0.0f);
    }
}

void TriPlaneVolume::sample_plane(int p, double u_m, double v_m, double* out) const {
    const double cell = workspace_.edge / resolution_;
    auto grid = [&](double x_m, int origin_axis) {
        const double o = origin_axis == 0 ? workspace_.origin.x
                       : origin_axis == 1 ? workspace_.origin.y
                                          : workspace_.origin.z;
        return (x_m - o) / cell - 0.5;
    };
    // kept axes per plane: xy -> (x, y), xz -> (x, z), yz -> (y, z)
    const int axis_u = (p == 2) ? 1 : 0;
    const int axis_v = (p == 0) ? 1 : 2;
    double gu = std::clamp(grid(u_m, axis_u), 0.0, static_cast<double>(resolution_ - 1));
    double gv = std::clamp(grid(v_m, axis_v), 0.0, static_cast<double>(resolution_ - 1));
    const int a0 = std::min(static_cast<int>(gu), resolution_ - 2);
    const int b0 = std::min(static_cast<int>(gv), resolution_ - 2);
    const double fu = std::clamp(gu - a0, 0.0, 1.0);
    const double fv = std::clamp(gv - b0, 0.0, 1.0);
    const float* p00 = planes_[p].data() + cell_offset(a0, b0);
    const float* p01 = planes_[p].data() + cell_offset(a0, b0 + 1);
    const float* p10 = planes_[p].data() + cell_offset(a0 + 1, b0);
    const float* p11 = planes_[p].data() + cell_offset(a0 + 1, b0 + 1);
    const double w00 = (1 - fu) * (1 - fv), w01 = (1 - fu) * fv;
    const double w10 = fu * (1 - fv), w11 = fu * fv;
    for (int c = 0; c < features_; ++c) {
        out[c] = w00 * p00[c] + w01 * p01[c] + w10 * p10[c] + w11 * p11[c];
    }
}

EncoderWeights EncoderWeights::seeded(int features, uint64_t seed) {
    EncoderWeights w;
    w.features = features;
    Rng rng(seed);
    const int F = features;
    w.conv1_w.assign(static_cast<size_t>(F) * 4 * 3 * 3, 0.0);
    w.conv1_b.assign(F, 0.0);
    w.conv2_w.assign(static_cast<size_t>(F) * F * 3 * 3, 0.0);
    w.conv2_b.assign(F, 0.0);
    const double a1 = 1.0 / std::sqrt(4.0 * 9.0);
    for (double& x : w.conv1_w) x = rng.uniform(-a1, a1);
    const double a2 = 1.0 / std::sqrt(F * 9.0);
    for (double& x : w.conv2_w) x = rng.uniform(-a2, a2);
    // pass-through taps keep the fixed reduction channels visible downstream
    for (int c = 0; c < std::min(4, F); ++c) {
        w.conv1_w[((static_cast<size_t>(c) * 4 + c) * 3 + 1) * 3 + 1] += 1.0;
    }
    for (int c = 0; c < F; ++c) {
        w.conv2_w[((static_cast<size_t>(c) * F + c) * 3 + 1) * 3 + 1] += 1.0;
    }
    return w;
}

void EncoderWeights::check_shapes() const {
    const size_t F = features;
    if (conv1_w.size() != F * 4 * 9 || conv1_b.size() != F || conv2_w.size() != F * F * 9 ||
        conv2_b.size() != F) {
        throw std::runtime_error("encoder weight shapes are inconsistent with the feature width");
    }
}

void EncoderWeights::save(const std::string& path, const std::string& provenance) const {
    TensorFile file;
    file.provenance = provenance;
    const uint32_t F = static_cast<uint32_t>(features);
    file.add("conv1_w", {F, 4, 3, 3}, conv1_w);
    file.add("conv1_b", {F}, conv1_b);
    file.add("conv2_w", {F, F, 3, 3}, conv2_w);
    file.add("conv2_b", {F}, conv2_b);
    file.save(path);
}

EncoderWeights EncoderWeights::load(const std::string& path) {
    const TensorFile file = TensorFile::load(path);
    EncoderWeights w;
    w.features = static_cast<int>(file.find("conv1_w").dims.at(0));
    w.conv1_w = file.take("conv1_w");
    w.conv1_b = file.take("conv1_b");
    w.conv2_w = file.take("conv2_w");
    w.conv2_b = file.take("conv2_b");
    w.check_shapes();
    return w;
}

TriPlaneVolume encode_stage1(const TsdfVolume& volume) {
    const int res = volume.resolution();
    TriPlaneVolume planes(volume.workspace(), res, 4);
    for (int p = 0; p < 3; ++p) {
        for (int a = 0; a < res; ++a) {
            for (int b = 0; b < res; ++b) {
                double sum = 0.0, mind = 1.0;
                int occupied = 0, observed = 0;
                for (int r = 0; r < res; ++r) {
                    // plane 0 drops z, plane 1 drops y, plane 2 drops x
                    const int i = (p == 2) ? r : a;
                    const int j = (p == 0) ? b : (p == 1 ? r : a);
                    const int k = (p == 0) ? r : b;
                    const float d = volume.distance_at(i, j, k);
                    const float w = volume.weight_at(i, j, k);
                    sum += d;
                    mind = std::min(mind, static_cast<double>(d));
                    if (w > 0.0f) {
                        ++observed;
                        if (d < 0.0f) ++occupied;
                    }
                }
                float* cell = planes.plane(p).data() + planes.cell_offset(a, b);
                cell[0] = static_cast<float>(sum / res);
                cell[1] = static_cast<float>(mind);
                cell[2] = static_cast<float>(occupied) / res;
                cell[3] = static_cast<float>(observed) / res;
            }
        }
    }
    return planes;
}

namespace {

inline double softplus(double x) {
    if (x > 30.0) return x;
    return std::log1p(std::exp(x));
}

// 3x3 zero-padded convolution over one plane, channels interleaved per cell.
void conv3x3(const std::vector<float>& in, int res, int c_in, const std::vector<double>& w,
             const std::vector<double>& b, int c_out, bool apply_softplus,
             std::vector<float>& out) {
    parallel_for_chunked(static_cast<size_t>(res), 8, [&](size_t begin, size_t end) {
        for (size_t a = begin; a < end; ++a) {
            for (int bb = 0; bb < res; ++bb) {
                float* dst = out.data() + (a * res + bb) * c_out;
                for (int co = 0; co < c_out; ++co) {
                    double acc = b[co];
                    const double* wk = w.data() + static_cast<size_t>(co) * c_in * 9;
                    for (int ci = 0; ci < c_in; ++ci) {
                        for (int du = -1; du <= 1; ++du) {
                            const int ia = static_cast<int>(a) + du;
                            if (ia < 0 || ia >= res) {
                                continue;
                            }
                            for (int dv = -1; dv <= 1; ++dv) {
                                const int ib = bb + dv;
                                if (ib < 0 || ib >= res) continue;
                                const double x = in[(static_cast<size_t>(ia) * res + ib) * c_in + ci];
                                acc += x * wk[(ci * 3 + du + 1) * 3 + dv + 1];
                            }
                        }
                    }
                    dst[co] = static_cast<float>(apply_softplus ? softplus(acc) : acc);
                }
            }
        }
    });
}

}  // namespace

TriPlaneVolume encode(const TsdfVolume& volume, const EncoderWeights& weights) {
    weights.check_shapes();
    const int res = volume.resolution();
    const int F = weights.features;
    const TriPlaneVolume base = encode_stage1(volume);
    TriPlaneVolume out(volume.workspace(), res, F);
    std::vector<float> hidden(static_cast<size_t>(res) * res * F);
    for (int p = 0; p < 3; ++p) {
        conv3x3(base.plane(p), res, 4, weights.conv1_w, weights.conv1_b, F, true, hidden);
        conv3x3(hidden, res, F, weights.conv2_w, weights.conv2_b, F, false, out.plane(p));
    }
    return out;
}

PointFeature query_point(const TriPlaneVolume& planes, const Vec3& p) {
    PointFeature feature(static_cast<size_t>(3) * planes.features());
    query_point_into(planes, p, feature.data());
    return feature;
}

void query_point_into(const TriPlaneVolume& planes, const Vec3& p, double* out) {
    const int F = planes.features();
    planes.sample_plane(0, p.x, p.y, out);
    planes.sample_plane(1, p.x, p.z, out + F);
    planes.sample_plane(2, p.y, p.z, out + 2 * F);
}

std::vector<Vec3> ray_sample_points(const Workspace& workspace, const Vec3& center,
                                    const Vec3& dir, double step_normalized) {
    if (!workspace.bounds().contains(center)) {
        throw std::invalid_argument("ray feature center lies outside the workspace");
    }
    const Vec3 d = normalized(dir);
    double t0, t1;
    if (!line_aabb_clip(center, d, workspace.bounds(), t0, t1)) {
        throw std::invalid_argument("ray feature chord is degenerate");
    }
    const double step = step_normalized * workspace.edge;
    std::vector<Vec3> points;
    const int k_lo = static_cast<int>(std::ceil((t0 - 1e-12) / step));
    const int k_hi = static_cast<int>(std::floor((t1 + 1e-12) / step));
    points.reserve(k_hi - k_lo + 1);
    for (int k = k_lo; k <= k_hi; ++k) {
        points.push_back(center + (k * step) * d);
    }
    if (points.empty()) points.push_back(center);
    return points;
}

RayFeature ray_feature(const TriPlaneVolume& planes, const Vec3& center, const Vec3& dir,
                       double step_normalized) {
    const auto samples = ray_sample_points(planes.workspace(), center, dir, step_normalized);
    const size_t dim = static_cast<size_t>(3) * planes.features();
    RayFeature best(dim, -std::numeric_limits<double>::infinity());
    std::vector<double> probe(dim);
    for (const Vec3& s : samples) {
        query_point_into(planes, s, probe.data());
        for (size_t c = 0; c < dim; ++c) best[c] = std::max(best[c], probe[c]);
    }
    return best;
}

std::array<Vec3, 9> geo_cuboid_points(const Vec3& center, const Vec3& dir, double edge_m) {
    const Frame f = frame_from_direction(dir);
    const double h = edge_m * 0.5;
    std::array<Vec3, 9> pts;
    int n = 0;
    for (int s1 = -1; s1 <= 1; s1 += 2) {
        for (int s2 = -1; s2 <= 1; s2 += 2) {
            for (int s3 = -1; s3 <= 1; s3 += 2) {
                pts[n++] = center + (s1 * h) * f.axis + (s2 * h) * f.side + (s3 * h) * f.binormal;
            }
        }
    }
    pts[8] = center;
    return pts;
}

GeoFeature geo_feature(const TriPlaneVolume& planes, const Vec3& center, const Vec3& dir,
                       double cuboid_edge_normalized) {
    const double edge = cuboid_edge_normalized * planes.workspace().edge;
    const auto points = geo_cuboid_points(center, dir, edge);
    const size_t dim = static_cast<size_t>(3) * planes.features();
    GeoFeature feature(dim * 9);
    for (int i = 0; i < 9; ++i) {
        query_point_into(planes, points[i], feature.data() + i * dim);
    }
    return feature;
}

void export_plane_pgms(const TriPlaneVolume& planes, const std::string& path_prefix) {
    const int res = planes.resolution();
    static const char* plane_names[3] = {"xy", "xz", "yz"};
    for (int p = 0; p < 3; ++p) {
        for (int c = 0; c < planes.features(); ++c) {
            float lo = 1e30f, hi = -1e30f;
            for (int a = 0; a < res; ++a) {
                for (int b = 0; b < res; ++b) {
                    const float v = planes.plane(p)[planes.cell_offset(a, b) + c];
                    lo = std::min(lo, v);
                    hi = std::max(hi, v);
                }
            }
            const float span = (hi > lo) ? hi - lo : 1.0f;
            char name[512];
            std::snprintf(name, sizeof(name), "%s_%s_c%02d.pgm", path_prefix.c_str(),
                          plane_names[p], c);
            std::ofstream out(name, std::ios::binary);
            if (!out) throw std::runtime_error(std::string("cannot write plane PGM: ") + name);
            out << "P5\n" << res << " " << res << "\n65535\n";
            for (int b = res - 1; b >= 0; --b) {
                for (int a = 0; a < res; ++a) {
                    const float v = planes.plane(p)[planes.cell_offset(a, b) + c];
                    const uint16_t q = static_cast<uint16_t>(65535.0f * (v - lo) / span);
                    const unsigned char bytes[2] = {static_cast<unsigned char>(q >> 8),
                                                    static_cast<unsigned char>(q & 0xff)};
                    out.write(reinterpret_cast<const char*>(bytes), 2);
                }
            }
        }
    }
}

}  // namespace nbv
