#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "evadkit/event_model.hpp"
#include "evadkit/evaluation.hpp"

namespace evadkit {

using IntensityFrame = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ObjectSpec {
    enum class Shape { Rectangle, Disk };
    Shape shape = Shape::Rectangle;
    double x0 = 0.0;       // initial top-left (rect) or center (disk)
    double y0 = 0.0;
    int width = 8;         // rect extent
    int height = 8;
    int radius = 4;        // disk extent
    double vx = 0.0;       // px/frame
    double vy = 0.0;
    double contrast = 80.0;  // intensity offset against the background
};

struct AnomalyInterval {
    std::size_t start_frame = 0;  // inclusive
    std::size_t end_frame = 0;    // exclusive
    std::size_t object_id = 0;
    double burst_multiplier = 3.0;  // velocity scale while inside the interval
};

struct SceneSpec {
    std::uint32_t width = 64;
    std::uint32_t height = 48;
    std::size_t duration_frames = 256;
    double fps = 100.0;
    std::uint64_t background_seed = 0;
    double background_base = 80.0;
    double background_amplitude = 0.0;  // static texture, +- amplitude
    std::vector<ObjectSpec> objects;
    std::vector<AnomalyInterval> anomalies;
};

struct SimConfig {
    double threshold = 0.15;       // log-intensity units, ON == OFF
    double threshold_noise = 0.03; // std of per-emission jitter, 0 disables
    double intensity_floor = 1.0;  // guard before the log
};

struct RenderedScene {
    std::vector<IntensityFrame> frames;
    std::vector<int> labels;  // one 0/1 per frame
    BoxSet gt_boxes;          // boxes of the bursting object, anomalous frames only
};

void validate_scene(const SceneSpec& spec);  // throws std::invalid_argument

// Deterministic given the spec (the background seed is the only randomness).
RenderedScene render_scene(const SceneSpec& spec);

// Per-pixel log-intensity threshold crossing between consecutive frames.
// Emits floor(|dlogI| / theta) events per pixel transition (jitter disabled),
// polarity = sign of the change, timestamps spread uniformly over the
// inter-frame interval. Output is sorted, stable for ties.
EventStream frames_to_events(const std::vector<IntensityFrame>& frames,
                             const SimConfig& config, std::uint64_t seed,
                             double fps = 100.0);

// Key/value + object list scene config, see README for the grammar.
SceneSpec parse_scene_spec(std::istream& source);
SceneSpec read_scene_file(const std::string& path);
void write_scene_file(const SceneSpec& spec, const std::string& path);

void write_labels_file(const std::vector<int>& labels, const std::string& path);
std::vector<int> read_labels_file(const std::string& path);

}  // namespace evadkit
