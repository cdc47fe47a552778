#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "evadkit/evaluation.hpp"
#include "evadkit/framing.hpp"
#include "evadkit/localization.hpp"
#include "evadkit/sampling.hpp"
#include "evadkit/simulator.hpp"
#include "evadkit/trainer.hpp"

namespace evadkit {

// Every field defaults to its module default; stage commands and the demo
// serialize the resolved copy into their output directory.
struct PipelineConfig {
    SimConfig sim;
    BinningConfig binning;
    EDSConfig eds;
    EDAConfig eda;
    bool eda_enabled = true;
    bool eda_residual = true;
    TrainConfig train;
    LocalizeConfig localize;
    double feature_noise_std = 0.2;  // event-modality degradation
    std::string sampler = "eds";     // or "uniform"
};

std::string config_to_json(const PipelineConfig& config);
PipelineConfig config_from_json(const std::string& text);
void write_config(const PipelineConfig& config, const std::string& path);
PipelineConfig read_config_file(const std::string& path);

// Desk-scale profile used by the demo and the benchmark runs; module
// defaults stay untouched, only training-scale knobs move.
PipelineConfig benchmark_config();

struct BenchVideo {
    std::string id;
    SceneSpec scene;
    bool is_test = false;
    int video_label = 0;
    int class_id = 0;  // 0 normal, 1 rect burst, 2 disk burst
};

// The standard synthetic benchmark: 20 train / 8 test videos, half of each
// split anomalous, deterministic in the seed.
std::vector<BenchVideo> make_standard_benchmark(std::uint64_t seed);

// Single-object planted-rectangle scene plus an all-normal twin, used by the
// spatial localization checks. Jitter-free events keep the grids crisp.
SceneSpec make_localization_scene(bool with_anomaly);

struct VideoArtifacts {
    EventStream stream;
    FrameSequence frames;
    std::vector<int> source_labels;  // one per source frame
    BoxSet source_gt;                // per source frame
    std::vector<int> bin_labels;     // one per frame bin
    BoxSet bin_gt;                   // union of source-frame GT boxes per bin
    VideoData data;
};

// simulate -> frame -> featurize for one video. Bin labels take the label of
// the window's center source frame; bin ground truth is the union of the
// anomalous source-frame boxes inside the window.
VideoArtifacts build_video(const BenchVideo& video, const PipelineConfig& config,
                           std::uint64_t master_seed);

std::vector<int> bin_labels_from_frames(const std::vector<int>& frame_labels,
                                        const std::vector<Window>& windows, double fps);
BoxSet bin_gt_from_frames(const BoxSet& frame_gt, const std::vector<int>& frame_labels,
                          const std::vector<Window>& windows, double fps);

SampleSet sample_video(const VideoData& video, const PipelineConfig& config,
                       std::uint64_t master_seed);

struct DemoReport {
    std::uint64_t seed = 0;
    std::size_t train_videos = 0;
    std::size_t test_videos = 0;
    double teacher_auc = 0.0;
    double auc = 0.0;
    double tiou = 0.0;
};

std::string format_report(const DemoReport& report, const PipelineConfig& config);

// Full chain on the standard benchmark: simulate, frame, sample, train the
// teacher then the student, score, localize, evaluate. Writes every stage
// artifact plus report.txt and config.json under out_dir.
DemoReport run_demo(const std::string& out_dir, std::uint64_t seed, const PipelineConfig& config);

struct AblationResult {
    double auc_baseline = 0.0;  // uniform sampling, no EDA, no KD
    double auc_eds = 0.0;       // + density-aware sampling
    double auc_eds_eda = 0.0;   // + distance-decay attention
    double auc_full = 0.0;      // + distillation
};

// Shares one simulated dataset across the four configurations.
AblationResult run_ablation(std::uint64_t seed, const PipelineConfig& config);

}  // namespace evadkit
