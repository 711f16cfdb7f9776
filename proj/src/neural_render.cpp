#include "nbv/neural_render.hpp"

#include <algorithm>

#include "nbv/parallel.hpp"

namespace nbv {

namespace {

std::vector<DenseSpec> decoder_layers(int input, int hidden) {
    return {{input, hidden, true, false},
            {hidden, hidden, true, false},
            {hidden, hidden, true, false},
            {hidden, 1, false, false}};
}

}  // namespace

SdfDecoder::SdfDecoder(int triplane_features, int hidden)
    : features_(triplane_features),
      hidden_(hidden),
      net_(decoder_layers(3 * triplane_features, hidden)),
      log_sharpness_(std::log(20.0)) {}

SdfDecoder SdfDecoder::seeded(int triplane_features, uint64_t seed, int hidden) {
    SdfDecoder d(triplane_features, hidden);
    d.net_.init_uniform(seed);
    return d;
}

void SdfDecoder::save(const std::string& path, const std::string& provenance) const {
    TensorFile file;
    file.provenance = provenance;
    file.add("meta", {3},
             {static_cast<double>(features_), static_cast<double>(hidden_), log_sharpness_});
    file.add("params", {static_cast<uint32_t>(net_.param_count())}, net_.params());
    file.save(path);
}

SdfDecoder SdfDecoder::load(const std::string& path) {
    const TensorFile file = TensorFile::load(path);
    const std::vector<double> meta = file.take("meta");
    SdfDecoder d(static_cast<int>(meta.at(0)), static_cast<int>(meta.at(1)));
    d.log_sharpness_ = meta.at(2);
    const std::vector<double> params = file.take("params");
    if (params.size() != d.net_.param_count()) {
        throw std::runtime_error("sdf decoder parameter count mismatch in " + path);
    }
    d.net_.params() = params;
    return d;
}

double decode_sdf(const SdfDecoder& decoder, const PointFeature& feature) {
    if (static_cast<int>(feature.size()) != decoder.net().input_dim()) {
        throw std::invalid_argument("point feature length does not match the decoder input");
    }
    double out = 0.0;
    decoder.net().forward(feature.data(), &out);
    return out;
}

double DecodedSdfField::sdf(const Vec3& p) const {
    const PointFeature f = query_point(planes_, p);
    double out = 0.0;
    decoder_.net().forward(f.data(), &out);
    return out;
}

namespace {

void composite(RayRender& r, double sharpness, double min_weight_sum, double weight_eps) {
    const size_t n = r.ts.size();
    r.mids.assign(n > 0 ? n - 1 : 0, 0.0);
    r.alphas.assign(n > 0 ? n - 1 : 0, 0.0);
    r.weights.assign(n > 0 ? n - 1 : 0, 0.0);
    double transmittance = 1.0;
    double num = 0.0, wsum = 0.0;
    for (size_t i = 0; i + 1 < n; ++i) {
        const double phi_a = sigmoid_fn(sharpness * r.sdf[i]);
        const double phi_b = sigmoid_fn(sharpness * r.sdf[i + 1]);
        const double alpha = phi_a > 0.0 ? std::max(0.0, (phi_a - phi_b) / phi_a) : 0.0;
        const double w = transmittance * alpha;
        r.mids[i] = 0.5 * (r.ts[i] + r.ts[i + 1]);
        r.alphas[i] = alpha;
        r.weights[i] = w;
        num += w * r.mids[i];
        wsum += w;
        transmittance *= (1.0 - alpha);
    }
    r.weight_sum = wsum;
    r.depth = num / std::max(wsum, weight_eps);
    r.hit = wsum >= min_weight_sum;
}

// Deterministic inverse-CDF draws from the piecewise-constant interval pdf.
void importance_resample(std::vector<double>& ts, const std::vector<double>& weights, int count) {
    const size_t n_int = weights.size();
    if (n_int == 0 || count <= 0) return;
    std::vector<double> pdf(n_int);
    double total = 0.0;
    for (size_t i = 0; i < n_int; ++i) {
        pdf[i] = weights[i] + 1e-4;  // keep every interval reachable
        total += pdf[i];
    }
    std::vector<double> cdf(n_int + 1, 0.0);
    for (size_t i = 0; i < n_int; ++i) cdf[i + 1] = cdf[i] + pdf[i] / total;
    std::vector<double> fresh;
    fresh.reserve(count);
    size_t seg = 0;
    for (int j = 0; j < count; ++j) {
        const double u = (j + 0.5) / count;
        while (seg + 1 < n_int && cdf[seg + 1] < u) ++seg;
        const double seg_span = cdf[seg + 1] - cdf[seg];
        const double frac = seg_span > 0.0 ? (u - cdf[seg]) / seg_span : 0.5;
        fresh.push_back(ts[seg] + frac * (ts[seg + 1] - ts[seg]));
    }
    ts.insert(ts.end(), fresh.begin(), fresh.end());
    std::sort(ts.begin(), ts.end());
}

}  // namespace

RayRender render_ray(const SdfField& field, const Workspace& workspace, const Vec3& origin,
                     const Vec3& dir, double sharpness, const RenderConfig& config) {
    RayRender r;
    double near = config.near, far = config.far;
    if (!std::isfinite(near) || !std::isfinite(far)) {
        double t0, t1;
        if (!line_aabb_clip(origin, dir, workspace.bounds(), t0, t1)) {
            return r;  // the ray misses the workspace entirely
        }
        near = std::isfinite(near) ? near : std::max(t0, 0.0);
        far = std::isfinite(far) ? far : t1 + config.boundary_pad;
    }
    if (far <= near) return r;

    r.ts.reserve(config.uniform_samples +
                 config.importance_rounds * config.importance_samples);
    for (int i = 0; i < config.uniform_samples; ++i) {
        r.ts.push_back(near + (far - near) * (i + 0.5) / config.uniform_samples);
    }
    auto evaluate = [&] {
        r.sdf.resize(r.ts.size());
        for (size_t i = 0; i < r.ts.size(); ++i) {
            r.sdf[i] = field.sdf(origin + r.ts[i] * dir);
        }
        composite(r, sharpness, config.min_weight_sum, config.weight_eps);
    };
    evaluate();
    for (int round = 0; round < config.importance_rounds; ++round) {
        importance_resample(r.ts, r.weights, config.importance_samples);
        evaluate();
    }
    return r;
}

void render_ray_backward(const RayRender& r, double sharpness, double d_depth,
                         std::vector<double>& d_sdf, double& d_sharpness) {
    const size_t n = r.ts.size();
    d_sdf.assign(n, 0.0);
    d_sharpness = 0.0;
    if (n < 2) return;
    const size_t n_int = n - 1;
    const double wsum = r.weight_sum;
    if (wsum < 1e-6) return;  // clamped denominator: treat as constant

    // d depth / d w_i at fixed midpoints
    std::vector<double> d_w(n_int);
    for (size_t i = 0; i < n_int; ++i) {
        d_w[i] = d_depth * (r.mids[i] - r.depth) / wsum;
    }
    // w_i = alpha_i * prod_{j<i} (1 - alpha_j)
    std::vector<double> d_alpha(n_int, 0.0);
    for (size_t i = 0; i < n_int; ++i) {
        if (d_w[i] == 0.0 && r.weights[i] == 0.0) continue;
        const double upstream = d_w[i];
        if (r.alphas[i] > 0.0) {
            d_alpha[i] += upstream * r.weights[i] / r.alphas[i];
        } else {
            // transmittance at i equals the product directly
            double trans = 1.0;
            for (size_t j = 0; j < i; ++j) trans *= (1.0 - r.alphas[j]);
            d_alpha[i] += upstream * trans;
        }
        for (size_t k = 0; k < i; ++k) {
            if (r.alphas[k] < 1.0) {
                d_alpha[k] -= upstream * r.weights[i] / (1.0 - r.alphas[k]);
            }
        }
    }
    // alpha_i = max(0, 1 - phi_{i+1} / phi_i)
    for (size_t i = 0; i < n_int; ++i) {
        if (d_alpha[i] == 0.0) continue;
        const double phi_a = sigmoid_fn(sharpness * r.sdf[i]);
        const double phi_b = sigmoid_fn(sharpness * r.sdf[i + 1]);
        if (phi_a <= 0.0) continue;
        const bool active = (phi_a - phi_b) / phi_a > 0.0;
        if (!active) continue;  // clamped branch has zero subgradient
        const double d_phi_a = d_alpha[i] * phi_b / (phi_a * phi_a);
        const double d_phi_b = d_alpha[i] * (-1.0 / phi_a);
        const double da = phi_a * (1.0 - phi_a);
        const double db = phi_b * (1.0 - phi_b);
        d_sdf[i] += d_phi_a * da * sharpness;
        d_sdf[i + 1] += d_phi_b * db * sharpness;
        d_sharpness += d_phi_a * da * r.sdf[i] + d_phi_b * db * r.sdf[i + 1];
    }
}

DepthImage render_depth_implicit(const SdfField& field, const Workspace& workspace,
                                 const Intrinsics& intrinsics, const Pose& camera_pose,
                                 double sharpness, const RenderConfig& config) {
    DepthImage image;
    image.intrinsics = intrinsics;
    image.camera_pose = camera_pose;
    image.depth.assign(static_cast<size_t>(intrinsics.width) * intrinsics.height, depth_no_hit());
    parallel_for_chunked(image.depth.size(), 256, [&](size_t begin, size_t end) {
        for (size_t i = begin; i < end; ++i) {
            const int u = static_cast<int>(i % intrinsics.width);
            const int v = static_cast<int>(i / intrinsics.width);
            const Vec3 dir_cam = image.pixel_dir_camera(u, v);
            const Vec3 dir = camera_pose.apply_dir(dir_cam);
            const RayRender r = render_ray(field, workspace, camera_pose.translation, dir,
                                           sharpness, config);
            if (r.hit) image.depth[i] = r.depth * dir_cam.z;
        }
    });
    return image;
}

DepthLossResult depth_loss(const std::vector<double>& rendered,
                           const std::vector<double>& ground_truth) {
    if (rendered.size() != ground_truth.size()) {
        throw std::invalid_argument("depth loss requires equal-length inputs");
    }
    DepthLossResult result;
    result.grad.assign(rendered.size(), 0.0);
    for (size_t i = 0; i < rendered.size(); ++i) {
        if (std::isfinite(rendered[i]) && std::isfinite(ground_truth[i])) ++result.valid_count;
    }
    if (result.valid_count == 0) {
        result.empty_mask = true;
        return result;
    }
    const double inv = 1.0 / result.valid_count;
    for (size_t i = 0; i < rendered.size(); ++i) {
        if (!std::isfinite(rendered[i]) || !std::isfinite(ground_truth[i])) continue;
        const double diff = rendered[i] - ground_truth[i];
        result.loss += std::fabs(diff) * inv;
        result.grad[i] = diff > 0.0 ? inv : (diff < 0.0 ? -inv : 0.0);
    }
    return result;
}

std::optional<double> decoder_ray_step(const TriPlaneVolume& planes, const SdfDecoder& decoder,
                                       const RaySupervision& ray, const RenderConfig& config,
                                       std::vector<double>& param_grad, double& log_s_grad) {
    const DecodedSdfField field(planes, decoder);
    const double sharpness = decoder.sharpness();
    const RayRender render = render_ray(field, planes.workspace(), ray.origin, ray.dir, sharpness,
                                        config);
    if (!render.hit) return std::nullopt;
    const double diff = render.depth - ray.gt_depth;
    const double loss = std::fabs(diff);
    const double d_depth = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);

    std::vector<double> d_sdf;
    double d_sharpness = 0.0;
    render_ray_backward(render, sharpness, d_depth, d_sdf, d_sharpness);
    log_s_grad += d_sharpness * sharpness;  // chain through s = exp(log s)

    std::vector<double> feature(decoder.net().input_dim());
    double out = 0.0;
    Mlp::Cache cache;
    for (size_t i = 0; i < render.ts.size(); ++i) {
        if (d_sdf[i] == 0.0) continue;
        query_point_into(planes, ray.origin + render.ts[i] * ray.dir, feature.data());
        decoder.net().forward(feature.data(), &out, cache);
        decoder.net().backward(cache, &d_sdf[i], param_grad.data(), nullptr);
    }
    return loss;
}

}  // namespace nbv
