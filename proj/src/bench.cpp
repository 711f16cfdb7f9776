#include "nbv/bench.hpp"

#include <filesystem>
#include <fstream>

#include "nbv/parallel.hpp"
#include "nbv/rng.hpp"

namespace nbv {

const char* pair_kind_name(PairKind kind) {
    switch (kind) {
        case PairKind::FrontObserveFrontGrasp: return "front-observe-front-grasp";
        case PairKind::FrontObserveSideGrasp: return "front-observe-side-grasp";
        case PairKind::MultiObserveFrontGrasp: return "multi-observe-front-grasp";
    }
    return "front-observe-front-grasp";
}

PairKind pair_kind_from_name(const std::string& name) {
    if (name == "front-observe-front-grasp") return PairKind::FrontObserveFrontGrasp;
    if (name == "front-observe-side-grasp") return PairKind::FrontObserveSideGrasp;
    if (name == "multi-observe-front-grasp") return PairKind::MultiObserveFrontGrasp;
    throw std::runtime_error("unknown pair kind: " + name);
}

std::vector<Pose> ground_truth_view_poses(const Scene& scene, int count, double radius,
                                          double polar_cap_deg) {
    PolicyConfig sampler;
    sampler.candidate_count = count;
    sampler.view_radius = radius;
    sampler.polar_cap_deg = polar_cap_deg;
    Aabb around;
    around.min = around.max = scene.workspace.center();
    const auto candidates = generate_candidates(around, sampler, scene.workspace);
    std::vector<Pose> poses;
    poses.reserve(candidates.size());
    for (const ViewCandidate& c : candidates) poses.push_back(c.camera_pose);
    return poses;
}

namespace {

Vec3 cap_direction(Rng& rng, double polar_cap_deg) {
    const double cos_cap = std::cos(polar_cap_deg * kPi / 180.0);
    const double cz = rng.uniform(cos_cap, 1.0);
    const double az = rng.uniform(0.0, 2.0 * kPi);
    const double s = std::sqrt(std::max(0.0, 1.0 - cz * cz));
    return {s * std::cos(az), s * std::sin(az), cz};  // up-facing; negate for a view direction
}

}  // namespace

Dataset generate_dataset(const DatasetConfig& config, DatasetBuildReport* report) {
    if (config.scene_seeds.empty()) throw std::invalid_argument("dataset needs scene seeds");
    const EncoderWeights encoder = EncoderWeights::seeded(config.triplane_features,
                                                          config.encoder_seed);
    Dataset dataset;
    dataset.triplane_features = config.triplane_features;
    dataset.feature_dim = 3 + 30 * config.triplane_features;
    std::string mix_names;
    for (const PairKind kind : config.mix) {
        if (!mix_names.empty()) mix_names += "+";
        mix_names += pair_kind_name(kind);
    }
    dataset.provenance = "mix=" + mix_names;

    DatasetBuildReport local_report;
    DatasetBuildReport& rep = report != nullptr ? *report : local_report;

    const int per_kind = std::max(1, config.grasps_per_scene / static_cast<int>(config.mix.size()));
    for (const uint64_t seed : config.scene_seeds) {
        Scene scene = generate_packed_scene(seed, config.object_count);
        const auto gt_poses = ground_truth_view_poses(scene, config.gt_views_per_scene,
                                                      config.view_radius, config.polar_cap_deg);
        // target = least visible object from the primary observe view
        const Pose observe_pose = gt_poses[seed % gt_poses.size()];
        const TargetSelection sel = select_target(scene, config.intrinsics, observe_pose,
                                                  config.render);
        assign_target(scene, sel.index);
        const Vec3 observe_dir = normalized(scene.target_bbox.center() -
                                            observe_pose.translation);

        Rng rng(seed * 0x9e3779b97f4a7c15ull + 1);
        std::vector<DatasetRecord> scene_records;
        int scene_positives = 0;
        for (const PairKind kind : config.mix) {
            // observation volume for this pair kind
            TsdfVolume volume(scene.workspace, config.tsdf);
            volume.integrate(render_depth(scene, config.intrinsics, observe_pose, config.render));
            if (kind == PairKind::MultiObserveFrontGrasp) {
                for (int extra = 1; extra < config.multi_observe_views; ++extra) {
                    const Pose& pose = gt_poses[(seed + extra * 3) % gt_poses.size()];
                    volume.integrate(render_depth(scene, config.intrinsics, pose, config.render));
                }
            }
            const TriPlaneVolume planes = encode(volume, encoder);

            const auto centers = lattice_centers(scene.target_bbox,
                                                 config.affordance.lattice_count,
                                                 scene.workspace);
            const double excl_cos = std::cos(config.side_exclusion_deg * kPi / 180.0);
            for (int g = 0; g < per_kind; ++g) {
                const Vec3 center = centers[g % centers.size()];
                Vec3 grasp_view = observe_dir;
                if (kind == PairKind::FrontObserveSideGrasp) {
                    for (int attempt = 0; attempt < 64; ++attempt) {
                        const Vec3 v = -cap_direction(rng, config.polar_cap_deg);
                        if (dot(v, observe_dir) < excl_cos) {
                            grasp_view = v;
                            break;
                        }
                    }
                }
                const Grasp label = oracle_predict(scene, center, grasp_view, config.gripper,
                                                   config.oracle);
                DatasetRecord rec;
                rec.label.center = center;
                rec.label.view = grasp_view;
                rec.label.rotation = label.rotation;
                rec.label.width = label.width;
                rec.label.success = label.quality > 0.5 ? 1 : 0;
                scene_positives += rec.label.success;

                const RayFeature ray = ray_feature(planes, center, grasp_view,
                                                   config.affordance.ray_step);
                const GeoFeature geo = geo_feature(planes, center, grasp_view,
                                                   config.affordance.cuboid_edge);
                rec.features.reserve(dataset.feature_dim);
                rec.features.push_back(static_cast<float>(grasp_view.x));
                rec.features.push_back(static_cast<float>(grasp_view.y));
                rec.features.push_back(static_cast<float>(grasp_view.z));
                for (double v : ray) rec.features.push_back(static_cast<float>(v));
                for (double v : geo) rec.features.push_back(static_cast<float>(v));
                scene_records.push_back(std::move(rec));
            }
        }
        if (scene_positives == 0) {
            ++rep.scenes_skipped;
            rep.log.push_back("scene seed " + std::to_string(seed) +
                              " skipped: no positive grasp labels");
            continue;
        }
        ++rep.scenes_used;
        for (DatasetRecord& rec : scene_records) dataset.records.push_back(std::move(rec));
    }

    rep.raw_records = static_cast<int>(dataset.records.size());
    // class balance by subsampling the majority
    std::vector<size_t> pos, neg;
    for (size_t i = 0; i < dataset.records.size(); ++i) {
        (dataset.records[i].label.success == 1 ? pos : neg).push_back(i);
    }
    Rng balance_rng(config.balance_seed);
    if (!pos.empty() && !neg.empty()) {
        auto& majority = pos.size() > neg.size() ? pos : neg;
        const size_t keep_count = std::min(pos.size(), neg.size());
        balance_rng.shuffle(majority);
        majority.resize(keep_count);
    }
    std::vector<size_t> keep;
    keep.insert(keep.end(), pos.begin(), pos.end());
    keep.insert(keep.end(), neg.begin(), neg.end());
    std::sort(keep.begin(), keep.end());
    std::vector<DatasetRecord> kept;
    kept.reserve(keep.size());
    int positives = 0;
    for (size_t idx : keep) {
        positives += dataset.records[idx].label.success;
        kept.push_back(std::move(dataset.records[idx]));
    }
    dataset.records = std::move(kept);
    rep.kept_records = static_cast<int>(dataset.records.size());
    rep.positive_fraction = dataset.records.empty()
                                ? 0.0
                                : static_cast<double>(positives) / dataset.records.size();
    return dataset;
}

namespace {

std::vector<double> decoder_relax_slacks(const DecoderTrainConfig& config, int epoch) {
    // starts tight around the ground truth and linearly opens to the full chord
    // over the first half of training
    const double progress = config.epochs <= 1
                                ? 1.0
                                : std::min(1.0, epoch / (0.5 * config.epochs));
    return {progress, config.initial_slack_spacings};
}

}  // namespace

TrainPipelineReport train_pipeline(const TrainPipelineConfig& config) {
    namespace fs = std::filesystem;
    TrainPipelineReport report;
    if (!config.out_dir.empty()) fs::create_directories(config.out_dir);
    const auto out = [&](const std::string& name) {
        return config.out_dir.empty() ? name : config.out_dir + "/" + name;
    };

    Dataset dataset = generate_dataset(config.dataset, &report.dataset);
    dataset.save(out("dataset.bin"));

    const EncoderWeights encoder = EncoderWeights::seeded(config.dataset.triplane_features,
                                                          config.dataset.encoder_seed);
    encoder.save(out("encoder.bin"), dataset.provenance);

    TrainConfig head_config = config.head;
    if (head_config.log_csv_path.empty()) head_config.log_csv_path = out("train_log.csv");
    const AffordanceHead head = train_head(dataset, head_config, &report.head);
    head.save(out("head.bin"), dataset.provenance);

    if (config.cotrain_decoder) {
        SdfDecoder decoder = SdfDecoder::seeded(config.dataset.triplane_features,
                                                config.decoder.seed);
        AdamConfig adam_config;
        adam_config.lr = config.decoder.lr;
        AdamOptimizer adam(decoder.net().param_count() + 1, adam_config);
        Rng rng(config.decoder.seed ^ 0x5bf03635ull);

        // per-scene planes and ground-truth depth views over the front TSDF
        struct SceneViews {
            TriPlaneVolume planes;
            std::vector<DepthImage> images;
        };
        std::vector<SceneViews> scenes;
        for (const uint64_t seed : config.dataset.scene_seeds) {
            Scene scene = generate_packed_scene(seed, config.dataset.object_count);
            const auto poses = ground_truth_view_poses(scene, config.dataset.gt_views_per_scene,
                                                       config.dataset.view_radius,
                                                       config.dataset.polar_cap_deg);
            TsdfVolume volume(scene.workspace, config.dataset.tsdf);
            volume.integrate(render_depth(scene, config.dataset.intrinsics,
                                          poses[seed % poses.size()], config.dataset.render));
            SceneViews sv{encode(volume, encoder), {}};
            for (const Pose& pose : poses) {
                sv.images.push_back(render_depth(scene, config.dataset.intrinsics, pose,
                                                 config.dataset.render));
            }
            scenes.push_back(std::move(sv));
        }

        std::ofstream log(config.decoder.log_csv_path.empty() ? out("decoder_log.csv")
                                                              : config.decoder.log_csv_path);
        log << "epoch,depth_loss,sharpness\n";
        std::vector<double> grad(decoder.net().param_count() + 1, 0.0);
        std::vector<double> packed(decoder.net().param_count() + 1, 0.0);
        for (int epoch = 0; epoch < config.decoder.epochs; ++epoch) {
            const auto relax = decoder_relax_slacks(config.decoder, epoch);
            double epoch_loss = 0.0;
            int epoch_rays = 0;
            for (SceneViews& sv : scenes) {
                for (int step = 0; step < config.decoder.steps_per_scene_per_epoch; ++step) {
                    std::fill(grad.begin(), grad.end(), 0.0);
                    double log_s_grad = 0.0;
                    double batch_loss = 0.0;
                    int used = 0;
                    for (int rcount = 0; rcount < config.decoder.rays_per_step; ++rcount) {
                        const DepthImage& img =
                            sv.images[rng.uniform_int(0, static_cast<int64_t>(sv.images.size()) - 1)];
                        const int u = static_cast<int>(rng.uniform_int(0, img.width() - 1));
                        const int v = static_cast<int>(rng.uniform_int(0, img.height() - 1));
                        const double gt_z = img.at(u, v);
                        if (!is_hit(gt_z)) continue;
                        const Vec3 dir_cam = img.pixel_dir_camera(u, v);
                        RaySupervision ray;
                        ray.origin = img.camera_pose.translation;
                        ray.dir = img.camera_pose.apply_dir(dir_cam);
                        ray.gt_depth = gt_z / dir_cam.z;  // z-depth to ray parameter

                        RenderConfig rc = config.decoder.render;
                        double chord0, chord1;
                        if (!line_aabb_clip(ray.origin, ray.dir, sv.planes.workspace().bounds(),
                                            chord0, chord1)) {
                            continue;
                        }
                        chord0 = std::max(chord0, 0.0);
                        const double spacing = (chord1 - chord0) /
                                               std::max(1, rc.uniform_samples);
                        const double tight = relax[1] * spacing;
                        const double slack = tight + relax[0] * (chord1 - chord0);
                        rc.near = std::max(chord0, ray.gt_depth - slack);
                        rc.far = std::min(chord1 + rc.boundary_pad, ray.gt_depth + slack);
                        if (rc.far <= rc.near) continue;
                        const auto loss = decoder_ray_step(sv.planes, decoder, ray, rc, grad,
                                                           log_s_grad);
                        if (loss) {
                            batch_loss += *loss;
                            ++used;
                        }
                    }
                    if (used == 0) continue;
                    const double inv = 1.0 / used;
                    for (double& g : grad) g *= inv;
                    grad.back() = log_s_grad * inv;
                    for (size_t i = 0; i < decoder.net().param_count(); ++i) {
                        packed[i] = decoder.net().params()[i];
                    }
                    packed.back() = decoder.log_sharpness();
                    adam.step(packed, grad);
                    for (size_t i = 0; i < decoder.net().param_count(); ++i) {
                        decoder.net().params()[i] = packed[i];
                    }
                    decoder.set_log_sharpness(packed.back());
                    epoch_loss += batch_loss;
                    epoch_rays += used;
                }
            }
            const double mean_loss = epoch_rays > 0 ? epoch_loss / epoch_rays : 0.0;
            report.decoder_epoch_loss.push_back(mean_loss);
            char line[96];
            std::snprintf(line, sizeof(line), "%d,%.6f,%.4f\n", epoch, mean_loss,
                          decoder.sharpness());
            log << line;
        }
        decoder.save(out("decoder.bin"), dataset.provenance);
    }
    return report;
}

EpisodeSetup make_episode_setup(uint64_t seed, int object_count, const BenchConfig& config) {
    EpisodeSetup setup;
    setup.scene = generate_packed_scene(seed, object_count);
    Rng rng(seed ^ 0xa02bdbf7bb3c0a7ull);
    const double azimuth = rng.uniform(0.0, 2.0 * kPi);
    const double polar = config.initial_polar_deg * kPi / 180.0;
    const Vec3 center = setup.scene.workspace.center();
    const Vec3 eye = center + config.policy.view_radius *
                                  Vec3{std::sin(polar) * std::cos(azimuth),
                                       std::sin(polar) * std::sin(azimuth), std::cos(polar)};
    setup.initial_view = look_at_pose(eye, center);
    const TargetSelection sel = select_target(setup.scene, config.policy.intrinsics,
                                              setup.initial_view, config.policy.render);
    assign_target(setup.scene, sel.index);
    setup.target_zero_visible = sel.zero_visible;
    return setup;
}

Episode run_named_policy(const std::string& policy, const EpisodeSetup& setup,
                         const AffordanceSource& source, const PolicyConfig& config) {
    Episode ep;
    if (policy == "ace-nbv") {
        ep = run_policy(setup.scene, setup.initial_view, source, config);
    } else if (policy == "initial-view") {
        ep = baseline_policy(BaselineKind::InitialView, setup.scene, setup.initial_view, source,
                             config);
    } else if (policy == "top-view") {
        ep = baseline_policy(BaselineKind::TopView, setup.scene, setup.initial_view, source,
                             config);
    } else if (policy == "fixed-traj") {
        ep = baseline_policy(BaselineKind::FixedTrajectory, setup.scene, setup.initial_view,
                             source, config);
    } else if (policy == "geometry-gain") {
        ep = baseline_policy(BaselineKind::GeometryGain, setup.scene, setup.initial_view, source,
                             config);
    } else {
        throw std::runtime_error("unknown policy: " + policy);
    }
    ep.target_zero_visible = setup.target_zero_visible;
    return ep;
}

const PolicyResult& BenchResults::row(const std::string& policy) const {
    for (const PolicyResult& r : rows) {
        if (r.policy == policy) return r;
    }
    throw std::runtime_error("policy not present in results: " + policy);
}

namespace {

bool is_multi_step(const std::string& policy) {
    return policy == "ace-nbv" || policy == "geometry-gain";
}

std::vector<Episode> sweep(const BenchConfig& config, const AffordanceSource& source,
                           const std::string& policy, const PolicyConfig& policy_config) {
    std::vector<Episode> episodes(config.scene_seeds.size());
    parallel_for_chunked(config.scene_seeds.size(), 1, [&](size_t begin, size_t end) {
        for (size_t i = begin; i < end; ++i) {
            const uint64_t seed = config.scene_seeds[i];
            Episode& ep = episodes[i];
            try {
                const EpisodeSetup setup = make_episode_setup(seed, config.object_count, config);
                ep = run_named_policy(policy, setup, source, policy_config);
            } catch (const std::exception& e) {
                ep = Episode{};
                ep.policy = policy;
                ep.outcome = EpisodeOutcome::Abort;
                ep.diagnostic = e.what();
                ep.view_count = std::min(1, policy_config.t_max);
            }
            ep.scene_seed = seed;
        }
    });
    return episodes;
}

std::string csv_escape(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += "\"";
    return out;
}

}  // namespace

BenchResults run_benchmark(const BenchConfig& config, const AffordanceSource& source) {
    namespace fs = std::filesystem;
    if (config.scene_seeds.empty() || config.policies.empty()) {
        throw std::invalid_argument("benchmark needs seeds and policies");
    }
    BenchResults results;
    for (const std::string& policy : config.policies) {
        PolicyResult row;
        row.policy = policy;
        row.episodes = sweep(config, source, policy, config.policy);
        if (config.two_view_rerun && is_multi_step(policy) && config.policy.t_max != 2) {
            PolicyConfig two = config.policy;
            two.t_max = 2;
            const auto reruns = sweep(config, source, policy, two);
            row.metrics = compute_metrics(row.episodes, reruns);
        } else if (config.policy.t_max == 2 && is_multi_step(policy)) {
            row.metrics = compute_metrics(row.episodes, row.episodes);
        } else {
            row.metrics = compute_metrics(row.episodes);
        }
        results.rows.push_back(std::move(row));
    }

    if (!config.out_dir.empty()) {
        fs::create_directories(config.out_dir);
        std::ofstream summary(config.out_dir + "/metrics.csv");
        summary << "policy,episodes,sr,fr,ar,mean_views,two_view_sr\n";
        for (const PolicyResult& row : results.rows) {
            char line[256];
            if (row.metrics.two_view_sr) {
                std::snprintf(line, sizeof(line), "%s,%d,%.4f,%.4f,%.4f,%.4f,%.4f\n",
                              row.policy.c_str(), row.metrics.episode_count,
                              row.metrics.success_rate, row.metrics.failure_rate,
                              row.metrics.abort_rate, row.metrics.mean_views,
                              *row.metrics.two_view_sr);
            } else {
                std::snprintf(line, sizeof(line), "%s,%d,%.4f,%.4f,%.4f,%.4f,\n",
                              row.policy.c_str(), row.metrics.episode_count,
                              row.metrics.success_rate, row.metrics.failure_rate,
                              row.metrics.abort_rate, row.metrics.mean_views);
            }
            summary << line;
        }
        std::ofstream per_episode(config.out_dir + "/episodes.csv");
        per_episode << "policy,scene_seed,outcome,views,failure_reason,target_zero_visible,"
                       "diagnostic\n";
        for (const PolicyResult& row : results.rows) {
            for (const Episode& ep : row.episodes) {
                char line[512];
                std::snprintf(line, sizeof(line), "%s,%llu,%s,%d,%s,%d,", row.policy.c_str(),
                              static_cast<unsigned long long>(ep.scene_seed),
                              outcome_name(ep.outcome), ep.view_count,
                              grasp_failure_name(ep.failure_reason),
                              ep.target_zero_visible ? 1 : 0);
                per_episode << line << csv_escape(ep.diagnostic) << "\n";
            }
        }
        std::ofstream table(config.out_dir + "/table.txt");
        table << format_metrics_table(results);
        if (config.write_traces) {
            fs::create_directories(config.out_dir + "/traces");
            for (const PolicyResult& row : results.rows) {
                for (const Episode& ep : row.episodes) {
                    save_episode_trace(ep, config.out_dir + "/traces/" + row.policy + "_" +
                                               std::to_string(ep.scene_seed) + ".jsonl");
                }
            }
        }
    }
    return results;
}

std::string format_metrics_table(const BenchResults& results) {
    std::string out;
    char line[160];
    std::snprintf(line, sizeof(line), "%-15s %7s %7s %7s %8s %11s\n", "Method", "SR", "FR", "AR",
                  "#Views", "2-Views SR");
    out += line;
    out += std::string(60, '-') + "\n";
    for (const PolicyResult& row : results.rows) {
        char two_view[24];
        if (row.metrics.two_view_sr) {
            std::snprintf(two_view, sizeof(two_view), "%10.0f%%", *row.metrics.two_view_sr * 100);
        } else {
            std::snprintf(two_view, sizeof(two_view), "%11s", "n/a");
        }
        std::snprintf(line, sizeof(line), "%-15s %6.0f%% %6.0f%% %6.0f%% %8.2f %s\n",
                      row.policy.c_str(), row.metrics.success_rate * 100,
                      row.metrics.failure_rate * 100, row.metrics.abort_rate * 100,
                      row.metrics.mean_views, two_view);
        out += line;
    }
    return out;
}

AlignedViewReport aligned_view_experiment(const AlignedViewConfig& config,
                                          const AffordanceSource& source) {
    if (config.scene_seeds.empty()) throw std::invalid_argument("experiment needs scene seeds");
    AlignedViewReport report;
    const EncoderWeights* encoder = source.encoder;
    for (const uint64_t seed : config.scene_seeds) {
        Scene scene = generate_packed_scene(seed, config.object_count);
        Rng rng(seed ^ 0x7c0ffee5ull);
        const double azimuth = rng.uniform(0.0, 2.0 * kPi);
        const double polar = config.grasp_polar_deg * kPi / 180.0;
        const Vec3 center = scene.workspace.center();
        auto view_pose = [&](double az) {
            const Vec3 eye = center + config.view_radius * Vec3{std::sin(polar) * std::cos(az),
                                                                std::sin(polar) * std::sin(az),
                                                                std::cos(polar)};
            return look_at_pose(eye, center);
        };
        const Pose grasp_pose = view_pose(azimuth);
        const Pose offset_pose = view_pose(azimuth + config.offset_azimuth_deg * kPi / 180.0);

        const TargetSelection sel = select_target(scene, config.intrinsics, grasp_pose,
                                                  config.render);
        assign_target(scene, sel.index);
        const Vec3 grasp_view = normalized(scene.target_bbox.center() - grasp_pose.translation);

        const auto centers = lattice_centers(scene.target_bbox, config.lattice_count,
                                             scene.workspace);
        std::vector<double> oracle_q(centers.size());
        for (size_t i = 0; i < centers.size(); ++i) {
            oracle_q[i] = oracle_predict(scene, centers[i], grasp_view, config.gripper).quality;
        }

        auto lattice_error = [&](const Pose& observe) {
            TsdfVolume volume(scene.workspace, config.tsdf);
            volume.integrate(render_depth(scene, config.intrinsics, observe, config.render));
            std::unique_ptr<AffordanceModel> model;
            TriPlaneVolume planes;
            if (source.use_oracle) {
                model = std::make_unique<OracleAffordance>(scene, config.gripper);
            } else {
                planes = encode(volume, *encoder);
                model = std::make_unique<NetAffordance>(planes, *source.head, config.affordance);
            }
            double err = 0.0;
            for (size_t i = 0; i < centers.size(); ++i) {
                err += std::fabs(model->at(centers[i], grasp_view).quality - oracle_q[i]);
            }
            return err / centers.size();
        };

        AlignedViewSceneResult row;
        row.seed = seed;
        row.aligned_error = lattice_error(grasp_pose);
        row.misaligned_error = lattice_error(offset_pose);
        if (row.aligned_error < row.misaligned_error) ++report.aligned_lower;
        else if (row.misaligned_error < row.aligned_error) ++report.misaligned_lower;
        else ++report.ties;
        report.scenes.push_back(row);
    }
    const int decided = report.aligned_lower + report.misaligned_lower;
    if (decided > 0) {
        report.aligned_win_fraction = static_cast<double>(report.aligned_lower) / decided;
    }
    if (!config.out_csv.empty()) {
        std::ofstream out(config.out_csv);
        out << "scene_seed,aligned_error,misaligned_error\n";
        for (const AlignedViewSceneResult& row : report.scenes) {
            char line[96];
            std::snprintf(line, sizeof(line), "%llu,%.6f,%.6f\n",
                          static_cast<unsigned long long>(row.seed), row.aligned_error,
                          row.misaligned_error);
            out << line;
        }
    }
    return report;
}

}  // namespace nbv
