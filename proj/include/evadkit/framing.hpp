#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "evadkit/event_model.hpp"

namespace evadkit {

struct BinningConfig {
    std::uint32_t stride_frames = 16;
    std::uint32_t half_window_frames = 8;
    double mean_fraction = 0.1;     // baseline share of the mean count
    std::uint64_t event_cap = 10000;
};

struct Window {
    std::uint64_t start_us = 0;
    std::uint64_t end_us = 0;  // exclusive
    std::uint64_t center_us = 0;
};

// Window centers sit at frame indices half_window, half_window + stride, ...
// converted to microseconds; windows are center +- half_window frames,
// clipped to [0, duration] and truncated at center midpoints so they never
// overlap. A video shorter than the first center yields one clipped window.
std::vector<Window> make_windows(const EventStream& stream, const BinningConfig& config);

struct BudgetResult {
    std::uint64_t budget = 0;
    bool degenerate = false;  // median was zero
};

// Per-bin event budget before rounding and the cap:
//   mean_fraction * mean + median / sc   with   sc = raw_count / median.
double event_budget_unclamped(std::uint64_t raw_count, double mean, double median,
                              const BinningConfig& config);

// Rounded (half up) and clamped to [1, event_cap]. raw_count == 0 maps to the
// cap; median == 0 falls back to min(round(mean_fraction * mean), cap) and is
// flagged degenerate.
BudgetResult event_budget(std::uint64_t raw_count, double mean, double median,
                          const BinningConfig& config);

// Two-pass rasterization: raw counts of the fixed windows give the per-video
// mean/median, then each window renders up to its budget. Overfull windows
// are thinned by deterministic stride subsampling; underfull ones borrow the
// temporally closest events from neighboring time, never reaching past the
// adjacent window centers.
FrameSequence rasterize(const EventStream& stream, const std::vector<Window>& windows,
                        const BinningConfig& config);

// Raw binary tensor: u32 T, u32 H, u32 W, then T*H*W u32 counts and
// T*H*W i32 polarity sums, little-endian, frame-major.
void write_frames_tensor(const FrameSequence& frames, const std::string& path);
FrameSequence read_frames_tensor(const std::string& path);  // metadata left zero

// Sidecar table: center_time_us,raw_count,rendered_count.
struct FrameMetaRow {
    std::uint64_t center_time_us = 0;
    std::uint64_t raw_count = 0;
    std::uint64_t rendered_count = 0;
};
void write_frame_meta(const FrameSequence& frames, const std::string& path);
std::vector<FrameMetaRow> read_frame_meta(const std::string& path);
void load_frame_meta(const std::string& path, FrameSequence& frames);

// Counts clipped to 255 for visualization.
void write_pgm(const CountGrid& grid, const std::string& path);

}  // namespace evadkit
