#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nbv/affordance.hpp"
#include "nbv/neural_render.hpp"
#include "nbv/policy.hpp"

namespace nbv {

enum class PairKind { FrontObserveFrontGrasp, FrontObserveSideGrasp, MultiObserveFrontGrasp };
const char* pair_kind_name(PairKind kind);
PairKind pair_kind_from_name(const std::string& name);

struct DatasetConfig {
    std::vector<uint64_t> scene_seeds;
    int object_count = 5;
    int grasps_per_scene = 240;
    std::vector<PairKind> mix = {PairKind::FrontObserveFrontGrasp,
                                 PairKind::FrontObserveSideGrasp,
                                 PairKind::MultiObserveFrontGrasp};
    int gt_views_per_scene = 12;
    int multi_observe_views = 3;
    double side_exclusion_deg = 20.0;  // side grasp views avoid this cone around the observe view
    uint64_t balance_seed = 99;
    int triplane_features = 32;
    uint64_t encoder_seed = 11;
    double view_radius = 0.45;
    double polar_cap_deg = 75.0;
    Intrinsics intrinsics;
    RenderParams render;
    TsdfConfig tsdf;
    AffordanceConfig affordance;
    Gripper gripper;
    OracleConfig oracle;
};

struct DatasetBuildReport {
    int scenes_used = 0;
    int scenes_skipped = 0;  // zero positive labels
    int raw_records = 0;
    int kept_records = 0;
    double positive_fraction = 0.0;
    std::vector<std::string> log;
};

// Oracle-labeled grasp records over per-kind TSDF inputs, balanced to ~50/50 by
// subsampling the majority class.
Dataset generate_dataset(const DatasetConfig& config, DatasetBuildReport* report = nullptr);

// The eta ground-truth views of one scene, reusing the candidate-cap sampler.
std::vector<Pose> ground_truth_view_poses(const Scene& scene, int count, double radius,
                                          double polar_cap_deg);

struct DecoderTrainConfig {
    double lr = 2e-4;
    int rays_per_step = 128;
    int steps_per_scene_per_epoch = 2;
    int epochs = 8;
    uint64_t seed = 31;
    RenderConfig render;  // near/far filled per ray by the relaxation schedule
    double initial_slack_spacings = 3.0;
    std::string log_csv_path;
};

struct TrainPipelineConfig {
    DatasetConfig dataset;
    TrainConfig head;
    DecoderTrainConfig decoder;
    bool cotrain_decoder = true;
    std::string out_dir;  // dataset.bin, head.bin, encoder.bin, decoder.bin, logs
};

struct TrainPipelineReport {
    DatasetBuildReport dataset;
    TrainReport head;
    std::vector<double> decoder_epoch_loss;
};

// Dataset generation + head training + (optionally) depth-branch co-training on
// the shared tri-plane features; writes every artifact under out_dir.
TrainPipelineReport train_pipeline(const TrainPipelineConfig& config);

struct BenchConfig {
    std::vector<uint64_t> scene_seeds;
    std::vector<std::string> policies;  // ace-nbv | initial-view | top-view | fixed-traj | geometry-gain
    int object_count = 5;
    double initial_polar_deg = 55.0;
    PolicyConfig policy;
    bool two_view_rerun = true;
    std::string out_dir;       // empty = no files written
    bool write_traces = false;
};

struct PolicyResult {
    std::string policy;
    Metrics metrics;
    std::vector<Episode> episodes;
};

struct BenchResults {
    std::vector<PolicyResult> rows;
    const PolicyResult& row(const std::string& policy) const;
};

// Scene setup shared by the benchmark and the planner CLI: packed scene, seeded
// initial view, target = least-visible object from that view.
struct EpisodeSetup {
    Scene scene;
    Pose initial_view;
    bool target_zero_visible = false;
};
EpisodeSetup make_episode_setup(uint64_t seed, int object_count, const BenchConfig& config);

Episode run_named_policy(const std::string& policy, const EpisodeSetup& setup,
                         const AffordanceSource& source, const PolicyConfig& config);

// Episodes for every policy/seed, aggregated metrics, CSV + aligned text table.
// Per-episode failures become aborted episodes with diagnostics; the sweep
// always completes.
BenchResults run_benchmark(const BenchConfig& config, const AffordanceSource& source);

std::string format_metrics_table(const BenchResults& results);

struct AlignedViewConfig {
    std::vector<uint64_t> scene_seeds;
    int object_count = 5;
    int lattice_count = 64;
    double grasp_polar_deg = 60.0;
    double offset_azimuth_deg = 90.0;
    double view_radius = 0.45;
    Intrinsics intrinsics;
    RenderParams render;
    TsdfConfig tsdf;
    AffordanceConfig affordance;
    Gripper gripper;
    std::string out_csv;  // empty = no file
};

struct AlignedViewSceneResult {
    uint64_t seed = 0;
    double aligned_error = 0.0;
    double misaligned_error = 0.0;
};

struct AlignedViewReport {
    std::vector<AlignedViewSceneResult> scenes;
    int aligned_lower = 0;
    int misaligned_lower = 0;
    int ties = 0;
    // fraction of decided scenes where the aligned error is lower; empty when
    // every scene ties
    std::optional<double> aligned_win_fraction;
};

// Quality-prediction error on the target lattice when observing from the grasp
// view versus an azimuth-offset view; the grasp view and oracle labels are held
// fixed across the two conditions.
AlignedViewReport aligned_view_experiment(const AlignedViewConfig& config,
                                          const AffordanceSource& source);

}  // namespace nbv
