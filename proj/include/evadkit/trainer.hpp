#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "evadkit/attention.hpp"
#include "evadkit/distillation.hpp"
#include "evadkit/event_model.hpp"
#include "evadkit/sampling.hpp"

namespace evadkit {

// Linear-plus-EDA scoring model: a binary head squashed through a sigmoid
// for frame anomaly confidence and a linear class-logit head.
struct ToyModel {
    Vector w_bin;   // D
    double b_bin = 0.0;
    Matrix w_cls;   // D x K
    Vector b_cls;   // K
    EDAConfig eda;
    bool eda_enabled = true;
    bool eda_residual = true;
};

ToyModel init_model(Eigen::Index feature_dim, Eigen::Index num_classes, std::uint64_t seed);

struct TrainConfig {
    double learning_rate = 2e-5;
    std::size_t epochs = 10;
    std::size_t batch_size = 128;      // videos per step
    double topk_fraction = 1.0 / 16.0; // MIL top-k share
    KDConfig kd;
    bool kd_enabled = false;
    std::uint64_t seed = 0;
    bool use_adam = false;  // plain descent is the reference path
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
};

// One video of the synthetic feature stand-in. Teacher fields are optional
// and only consulted when distillation is on.
struct VideoData {
    std::string id;
    Matrix features_rgb;    // T x D, noise-free modality
    Matrix features_event;  // T x D, degraded modality
    std::vector<std::uint64_t> center_us;
    Vector density;         // per-frame raw-count density, sums to 1
    std::vector<int> frame_labels;  // eval only, may be empty
    int video_label = 0;
    int class_id = 0;
    bool is_test = false;
    std::optional<Vector> teacher_scores;  // full length T
    std::optional<Matrix> teacher_logits;  // T x K
};

struct Dataset {
    std::vector<VideoData> videos;
    Eigen::Index feature_dim = 0;
    Eigen::Index num_classes = 2;
};

struct ForwardResult {
    Vector scores;  // in (0,1)
    Matrix logits;  // T x K
};

// EDA (when enabled) runs over the given subsequence with its densities
// renormalized to unit mass, then both heads apply.
ForwardResult forward(const ToyModel& model, const Matrix& features, const Vector& t_us,
                      const Vector& densities);

struct MilResult {
    double loss = 0.0;
    double video_score = 0.0;  // mean of the top-k frame scores
    Vector grad;               // d loss / d frame scores
};

// Video score is the mean of the top-k frame scores, k = max(1, ceil(T *
// fraction)); the loss is binary cross-entropy against the video label.
MilResult mil_loss(const Vector& scores, int video_label, double topk_fraction);

struct EpochMetrics {
    std::size_t epoch = 0;
    double loss_mil = 0.0;
    double loss_bin = 0.0;
    double loss_multi = 0.0;
    double auc = 0.0;  // NaN when the test split cannot score
};

struct TrainResult {
    ToyModel model;
    std::vector<EpochMetrics> metrics;
};

struct TrainDataView {
    const Dataset* data = nullptr;
    const std::vector<SampleSet>* samples = nullptr;  // aligned with data->videos
    bool use_rgb_features = false;                    // teacher modality
    EDAConfig eda;                                    // copied into the model
    bool eda_enabled = true;
    bool eda_residual = true;
};

// One video's contribution to the composite objective and its analytic
// parameter gradients. Teacher pointers are consulted only when distillation
// is enabled in the config.
struct VideoObjective {
    double loss_total = 0.0;
    double loss_mil = 0.0;
    double loss_bin = 0.0;
    double loss_multi = 0.0;
    Vector grad_w_bin;
    double grad_b_bin = 0.0;
    Matrix grad_w_cls;
    Vector grad_b_cls;
};

VideoObjective video_objective(const ToyModel& model, const Matrix& features, const Vector& t_us,
                               const Vector& densities, int video_label, const TrainConfig& config,
                               const Vector* teacher_scores = nullptr,
                               const Matrix* teacher_logits = nullptr);

// Plain full-gradient descent on L = L_mil + alpha L_bin + beta L_multi.
// Deterministic given the seed; throws when distillation is enabled but a
// train video lacks teacher outputs.
TrainResult train(const TrainDataView& view, const TrainConfig& config);

// Scores only; the signature admits no teacher data.
Vector infer(const ToyModel& model, const Matrix& features, const Vector& t_us,
             const Vector& densities);

// AUC of the model over all frames of the test split, pooled.
double evaluate_test_auc(const ToyModel& model, const Dataset& data, bool use_rgb_features);

// Hand-crafted per-frame descriptors standing in for learned features.
Matrix features_from_frames(const FrameSequence& frames);
Matrix with_feature_noise(const Matrix& features, double noise_std, std::uint64_t seed);
Eigen::Index feature_dim();

// Model and metrics files.
void write_model(const ToyModel& model, const std::string& path);
ToyModel read_model(const std::string& path);
void write_metrics(const std::vector<EpochMetrics>& metrics, const std::string& path);

// f64 matrix container: u32 rows, u32 cols, row-major doubles, little-endian.
void write_matrix(const Matrix& m, const std::string& path);
Matrix read_matrix(const std::string& path);

// Dataset directory: index.csv plus one directory per video (features for
// both modalities, timestamp/density table, optional frame labels).
void write_dataset(const Dataset& data, const std::string& dir);
Dataset read_dataset(const std::string& dir);

// Pulls <dir>/<video>/scores.csv and <dir>/<video>/logits.fmat into the
// teacher fields of every train video; throws naming the missing artifact.
void attach_teacher_outputs(Dataset& data, const std::string& dir);

}  // namespace evadkit
