#include "nbv/affordance.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "nbv/parallel.hpp"

namespace nbv {

namespace {

std::vector<DenseSpec> head_layers(int input, int hidden) {
    return {{input, hidden, true, false},
            {hidden, hidden, true, true},
            {hidden, hidden, true, true},
            {hidden, hidden, true, true},
            {hidden, 4, false, false}};
}

}  // namespace

AffordanceHead::AffordanceHead(int triplane_features, int hidden)
    : features_(triplane_features),
      hidden_(hidden),
      net_(head_layers(3 + 30 * triplane_features, hidden)) {}

AffordanceHead AffordanceHead::seeded(int triplane_features, uint64_t seed, int hidden) {
    AffordanceHead head(triplane_features, hidden);
    head.net_.init_uniform(seed);
    return head;
}

void AffordanceHead::save(const std::string& path, const std::string& provenance) const {
    TensorFile file;
    file.provenance = provenance;
    file.add("meta", {3},
             {static_cast<double>(features_), static_cast<double>(hidden_),
              static_cast<double>(net_.param_count())});
    file.add("params", {static_cast<uint32_t>(net_.param_count())}, net_.params());
    file.save(path);
}

AffordanceHead AffordanceHead::load(const std::string& path) {
    const TensorFile file = TensorFile::load(path);
    const std::vector<double> meta = file.take("meta");
    AffordanceHead head(static_cast<int>(meta.at(0)), static_cast<int>(meta.at(1)));
    const std::vector<double> params = file.take("params");
    if (params.size() != head.net_.param_count()) {
        throw std::runtime_error("affordance head parameter count mismatch in " + path);
    }
    head.net_.params() = params;
    return head;
}

AffordancePrediction predict(const AffordanceHead& head, const Vec3& view, const RayFeature& ray,
                             const GeoFeature& geo, double max_width) {
    const size_t expected = static_cast<size_t>(head.input_dim());
    if (3 + ray.size() + geo.size() != expected) {
        throw std::invalid_argument("feature lengths do not match the head input");
    }
    const Vec3 v = normalized(view);
    std::vector<double> input;
    input.reserve(expected);
    input.push_back(v.x);
    input.push_back(v.y);
    input.push_back(v.z);
    input.insert(input.end(), ray.begin(), ray.end());
    input.insert(input.end(), geo.begin(), geo.end());

    AffordancePrediction out;
    head.net().forward(input.data(), out.raw.data());
    out.quality = sigmoid_fn(out.raw[0]);
    double r = 0.5 * std::atan2(out.raw[2], out.raw[1]);
    if (r < 0.0) r += kPi;
    if (r >= kPi) r -= kPi;
    out.rotation = r;
    out.width = max_width * sigmoid_fn(out.raw[3]);
    return out;
}

NetAffordance::NetAffordance(const TriPlaneVolume& planes, const AffordanceHead& head,
                             const AffordanceConfig& config)
    : planes_(planes), head_(head), config_(config) {}

Grasp NetAffordance::at(const Vec3& center, const Vec3& view) const {
    const Vec3 v = normalized(view);
    const RayFeature ray = ray_feature(planes_, center, v, config_.ray_step);
    const GeoFeature geo = geo_feature(planes_, center, v, config_.cuboid_edge);
    const AffordancePrediction p = predict(head_, v, ray, geo, config_.max_width);
    Grasp grasp;
    grasp.quality = p.quality;
    grasp.center = center;
    grasp.view = v;
    grasp.rotation = p.rotation;
    grasp.width = p.width;
    return grasp;
}

OracleAffordance::OracleAffordance(const Scene& scene, const Gripper& gripper,
                                   const OracleConfig& config)
    : scene_(scene), gripper_(gripper), config_(config) {}

Grasp OracleAffordance::at(const Vec3& center, const Vec3& view) const {
    return oracle_predict(scene_, center, view, gripper_, config_);
}

Grasp oracle_predict(const Scene& scene, const Vec3& center, const Vec3& view,
                     const Gripper& gripper, const OracleConfig& config) {
    Grasp grasp;
    grasp.center = center;
    grasp.view = normalized(view);
    grasp.quality = 0.0;
    grasp.rotation = 0.0;
    grasp.width = gripper.max_width * 0.5;
    for (int k = 0; k < config.rotation_sweep; ++k) {
        const double angle = kPi * k / config.rotation_sweep;
        Grasp probe = grasp;
        probe.rotation = angle;
        probe.width = gripper.max_width;
        const GraspCheck wide = grasp_feasible(scene, probe, gripper);
        if (wide.failure == GraspFailure::Contact ||
            wide.failure == GraspFailure::OutOfWorkspace) {
            continue;
        }
        probe.width = std::min(wide.contact_span + config.width_pad, gripper.max_width);
        const GraspCheck fitted = grasp_feasible(scene, probe, gripper);
        if (fitted.success) {
            grasp.quality = 1.0;
            grasp.rotation = angle;
            grasp.width = probe.width;
            return grasp;
        }
    }
    return grasp;
}

std::vector<Vec3> lattice_centers(const Aabb& bbox, int count, const Workspace& workspace) {
    if (count < 1) throw std::invalid_argument("lattice count must be positive");
    int n = static_cast<int>(std::lround(std::cbrt(static_cast<double>(count))));
    if (n * n * n != count) {
        throw std::invalid_argument("lattice count must be a cube number");
    }
    const Vec3 ext = bbox.extent();
    if (count > 1 && (ext.x <= 0 || ext.y <= 0 || ext.z <= 0)) {
        throw std::invalid_argument("degenerate bbox for affordance imagery");
    }
    const Aabb inner = {workspace.origin + Vec3{1e-6, 1e-6, 1e-6},
                        workspace.origin + Vec3{workspace.edge - 1e-6, workspace.edge - 1e-6,
                                                workspace.edge - 1e-6}};
    std::vector<Vec3> centers;
    centers.reserve(count);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            for (int k = 0; k < n; ++k) {
                const Vec3 p = bbox.min + Vec3{ext.x * (i + 0.5) / n, ext.y * (j + 0.5) / n,
                                               ext.z * (k + 0.5) / n};
                centers.push_back(inner.clamp(p));
            }
        }
    }
    return centers;
}

std::vector<Grasp> imagine_affordances(const AffordanceModel& model, const Aabb& bbox,
                                       const Vec3& view, int count, const Workspace& workspace) {
    const std::vector<Vec3> centers = lattice_centers(bbox, count, workspace);
    const Vec3 v = normalized(view);
    std::vector<Grasp> grasps(centers.size());
    parallel_for_chunked(centers.size(), 8, [&](size_t begin, size_t end) {
        for (size_t i = begin; i < end; ++i) grasps[i] = model.at(centers[i], v);
    });
    std::stable_sort(grasps.begin(), grasps.end(),
                     [](const Grasp& a, const Grasp& b) { return a.quality > b.quality; });
    return grasps;
}

std::vector<Grasp> imagine_affordances(const TriPlaneVolume& planes, const AffordanceHead& head,
                                       const Aabb& bbox, const Vec3& view, int count,
                                       const AffordanceConfig& config) {
    const NetAffordance model(planes, head, config);
    return imagine_affordances(model, bbox, view, count, planes.workspace());
}

GraspLossResult grasp_loss(const std::array<double, 4>& raw, const GraspLabel& label,
                           double max_width) {
    GraspLossResult r;
    const double z = raw[0];
    const double y = static_cast<double>(label.success);
    r.l_q = std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::fabs(z)));
    r.grad[0] = sigmoid_fn(z) - y;

    if (label.success == 1) {
        const double a = raw[1], b = raw[2];
        const double eps = 1e-6;
        const double n = std::sqrt(a * a + b * b + eps * eps);
        const double ta = std::cos(2.0 * label.rotation);
        const double tb = std::sin(2.0 * label.rotation);
        const double dot_ab = a * ta + b * tb;
        r.l_r = 1.0 - dot_ab / n;
        r.grad[1] = -(ta / n) + dot_ab * a / (n * n * n);
        r.grad[2] = -(tb / n) + dot_ab * b / (n * n * n);

        const double s = sigmoid_fn(raw[3]);
        const double target = label.width / max_width;
        const double dw = s - target;
        r.l_w = dw * dw;
        r.grad[3] = 2.0 * dw * s * (1.0 - s);
    }
    r.loss = r.l_q + r.l_r + r.l_w;
    return r;
}

void Dataset::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write dataset: " + path);
    const char magic[4] = {'N', 'B', 'V', 'D'};
    out.write(magic, 4);
    const uint32_t version = 1;
    const uint32_t count = static_cast<uint32_t>(records.size());
    const uint32_t fdim = static_cast<uint32_t>(feature_dim);
    const uint32_t F = static_cast<uint32_t>(triplane_features);
    const uint32_t plen = static_cast<uint32_t>(provenance.size());
    out.write(reinterpret_cast<const char*>(&version), 4);
    out.write(reinterpret_cast<const char*>(&count), 4);
    out.write(reinterpret_cast<const char*>(&fdim), 4);
    out.write(reinterpret_cast<const char*>(&F), 4);
    out.write(reinterpret_cast<const char*>(&plen), 4);
    out.write(provenance.data(), plen);
    for (const DatasetRecord& rec : records) {
        out.write(reinterpret_cast<const char*>(rec.features.data()),
                  static_cast<std::streamsize>(rec.features.size() * sizeof(float)));
        const float label[9] = {static_cast<float>(rec.label.center.x),
                                static_cast<float>(rec.label.center.y),
                                static_cast<float>(rec.label.center.z),
                                static_cast<float>(rec.label.view.x),
                                static_cast<float>(rec.label.view.y),
                                static_cast<float>(rec.label.view.z),
                                static_cast<float>(rec.label.rotation),
                                static_cast<float>(rec.label.width),
                                static_cast<float>(rec.label.success)};
        out.write(reinterpret_cast<const char*>(label), sizeof(label));
    }
}

Dataset Dataset::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read dataset: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::string(magic, 4) != "NBVD") throw std::runtime_error("not a dataset: " + path);
    uint32_t version = 0, count = 0, fdim = 0, F = 0, plen = 0;
    in.read(reinterpret_cast<char*>(&version), 4);
    in.read(reinterpret_cast<char*>(&count), 4);
    in.read(reinterpret_cast<char*>(&fdim), 4);
    in.read(reinterpret_cast<char*>(&F), 4);
    in.read(reinterpret_cast<char*>(&plen), 4);
    if (version != 1) throw std::runtime_error("unsupported dataset version");
    Dataset ds;
    ds.feature_dim = static_cast<int>(fdim);
    ds.triplane_features = static_cast<int>(F);
    ds.provenance.resize(plen);
    in.read(ds.provenance.data(), plen);
    ds.records.resize(count);
    for (DatasetRecord& rec : ds.records) {
        rec.features.resize(fdim);
        in.read(reinterpret_cast<char*>(rec.features.data()),
                static_cast<std::streamsize>(fdim * sizeof(float)));
        float label[9];
        in.read(reinterpret_cast<char*>(label), sizeof(label));
        rec.label.center = {label[0], label[1], label[2]};
        rec.label.view = {label[3], label[4], label[5]};
        rec.label.rotation = label[6];
        rec.label.width = label[7];
        rec.label.success = static_cast<int>(label[8]);
    }
    if (!in) throw std::runtime_error("truncated dataset: " + path);
    return ds;
}

namespace {

struct BatchStats {
    double loss = 0.0, l_q = 0.0, l_r = 0.0, l_w = 0.0;
};

// Loss + gradient over records[begin, end); gradients accumulate into grad.
BatchStats accumulate_batch(const Mlp& net, const Dataset& dataset,
                            const std::vector<size_t>& order, size_t begin, size_t end,
                            double max_width, std::vector<double>* grad) {
    BatchStats stats;
    std::vector<double> input(net.input_dim());
    std::array<double, 4> raw{};
    Mlp::Cache cache;
    for (size_t s = begin; s < end; ++s) {
        const DatasetRecord& rec = dataset.records[order[s]];
        for (size_t i = 0; i < rec.features.size(); ++i) input[i] = rec.features[i];
        if (grad != nullptr) {
            net.forward(input.data(), raw.data(), cache);
        } else {
            net.forward(input.data(), raw.data());
        }
        const GraspLossResult r = grasp_loss(raw, rec.label, max_width);
        stats.loss += r.loss;
        stats.l_q += r.l_q;
        stats.l_r += r.l_r;
        stats.l_w += r.l_w;
        if (grad != nullptr) {
            net.backward(cache, r.grad.data(), grad->data(), nullptr);
        }
    }
    return stats;
}

}  // namespace

AffordanceHead train_head(const Dataset& dataset, const TrainConfig& config, TrainReport* report) {
    if (dataset.records.empty()) throw std::invalid_argument("training dataset is empty");
    AffordanceHead head = AffordanceHead::seeded(dataset.triplane_features, config.seed,
                                                 config.hidden);
    if (dataset.feature_dim != head.input_dim()) {
        throw std::invalid_argument("dataset feature width does not match the head input");
    }
    Mlp& net = head.net();
    AdamConfig adam_config;
    adam_config.lr = config.lr;
    AdamOptimizer adam(net.param_count(), adam_config);

    Rng rng(config.seed ^ 0x9e3779b97f4a7c15ull);
    std::vector<size_t> order(dataset.records.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    const size_t val_count = static_cast<size_t>(std::floor(order.size() * config.val_fraction));
    std::vector<size_t> val_idx(order.end() - val_count, order.end());
    std::vector<size_t> train_idx(order.begin(), order.end() - val_count);
    if (train_idx.empty()) throw std::invalid_argument("no training records after the split");

    const double max_width = config.max_width;
    const size_t chunk = 16;
    std::ofstream log;
    if (!config.log_csv_path.empty()) {
        log.open(config.log_csv_path);
        if (!log) throw std::runtime_error("cannot write training log: " + config.log_csv_path);
        log << "epoch,train_loss,val_loss,l_q,l_r,l_w\n";
    }

    std::vector<std::vector<double>> chunk_grads;
    std::vector<BatchStats> chunk_stats;
    std::vector<double> grad(net.param_count());

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(train_idx);
        BatchStats epoch_stats;
        for (size_t start = 0; start < train_idx.size(); start += config.batch_size) {
            const size_t stop = std::min(train_idx.size(), start + config.batch_size);
            const size_t batch = stop - start;
            const size_t chunks = chunk_count(batch, chunk);
            chunk_grads.assign(chunks, std::vector<double>(net.param_count(), 0.0));
            chunk_stats.assign(chunks, BatchStats{});
            parallel_for_chunked(batch, chunk, [&](size_t b, size_t e) {
                const size_t c = b / chunk;
                chunk_stats[c] = accumulate_batch(net, dataset, train_idx, start + b, start + e,
                                                  max_width, &chunk_grads[c]);
            });
            std::fill(grad.begin(), grad.end(), 0.0);
            for (size_t c = 0; c < chunks; ++c) {
                const std::vector<double>& g = chunk_grads[c];
                for (size_t i = 0; i < grad.size(); ++i) grad[i] += g[i];
                epoch_stats.loss += chunk_stats[c].loss;
                epoch_stats.l_q += chunk_stats[c].l_q;
                epoch_stats.l_r += chunk_stats[c].l_r;
                epoch_stats.l_w += chunk_stats[c].l_w;
            }
            const double inv = 1.0 / static_cast<double>(batch);
            for (double& g : grad) g *= inv;
            adam.step(net.params(), grad);
        }
        const double n_train = static_cast<double>(train_idx.size());
        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = epoch_stats.loss / n_train;
        stats.l_q = epoch_stats.l_q / n_train;
        stats.l_r = epoch_stats.l_r / n_train;
        stats.l_w = epoch_stats.l_w / n_train;
        if (!val_idx.empty()) {
            const size_t vchunks = chunk_count(val_idx.size(), chunk);
            chunk_stats.assign(vchunks, BatchStats{});
            parallel_for_chunked(val_idx.size(), chunk, [&](size_t b, size_t e) {
                chunk_stats[b / chunk] =
                    accumulate_batch(net, dataset, val_idx, b, e, max_width, nullptr);
            });
            double val_loss = 0.0;
            for (const BatchStats& s : chunk_stats) val_loss += s.loss;
            stats.val_loss = val_loss / static_cast<double>(val_idx.size());
        }
        if (!std::isfinite(stats.train_loss) || !std::isfinite(stats.val_loss)) {
            throw std::runtime_error("training diverged: non-finite loss at epoch " +
                                     std::to_string(epoch));
        }
        if (log.is_open()) {
            char line[160];
            std::snprintf(line, sizeof(line), "%d,%.6f,%.6f,%.6f,%.6f,%.6f\n", stats.epoch,
                          stats.train_loss, stats.val_loss, stats.l_q, stats.l_r, stats.l_w);
            log << line;
        }
        if (report != nullptr) report->epochs.push_back(stats);
    }
    if (report != nullptr && !report->epochs.empty()) {
        report->final_train_loss = report->epochs.back().train_loss;
        report->final_val_loss = report->epochs.back().val_loss;
    }
    return head;
}

}  // namespace nbv
