#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "evadkit/common.hpp"

namespace evadkit {

// One sensor event: microsecond timestamp, pixel location, polarity +1/-1.
struct Event {
    std::uint64_t t_us = 0;
    std::uint16_t x = 0;
    std::uint16_t y = 0;
    std::int8_t polarity = 1;

    friend bool operator==(const Event&, const Event&) = default;
};

// Time-ordered sparse event recording plus sensor geometry.
struct EventStream {
    std::vector<Event> events;
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::uint64_t duration_us = 0;
    double source_fps = 0.0;

    friend bool operator==(const EventStream&, const EventStream&) = default;
};

using CountGrid = Eigen::Matrix<std::uint32_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using PolarityGrid = Eigen::Matrix<std::int32_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Rasterized accumulation of one time window. counts is polarity-agnostic,
// polarity_sum keeps the signed balance per cell.
struct EventFrame {
    CountGrid counts;                 // height x width
    PolarityGrid polarity_sum;        // height x width
    std::uint64_t center_time_us = 0;
    std::uint64_t window_start_us = 0;
    std::uint64_t window_end_us = 0;  // exclusive
    std::uint64_t raw_count = 0;      // events inside the window
    std::uint64_t rendered_count = 0; // events actually rasterized
};

struct FrameSequence {
    std::vector<EventFrame> frames;
    double mean_raw_count = 0.0;
    double median_raw_count = 0.0;
};

struct Violation {
    enum class Kind { UnsortedTimestamp, TimestampPastDuration, OutOfBoundsX, OutOfBoundsY, BadPolarity };
    Kind kind;
    std::size_t event_index;
    std::string detail;
};

struct ValidationReport {
    std::vector<Violation> violations;
    bool ok() const { return violations.empty(); }
};

// Reports every invariant violation; never throws.
ValidationReport validate_stream(const EventStream& stream);

// EVS container, little-endian:
//   magic "EVS1", u32 width, u32 height, u64 duration_us, f64 source_fps,
//   u64 event count, then per event u64 t_us, u16 x, u16 y, i8 polarity,
//   then CRC32 (IEEE) of the event records.
std::size_t write_evs(const EventStream& stream, std::ostream& sink);
EventStream read_evs(std::istream& source);

std::size_t write_evs_file(const EventStream& stream, const std::string& path);
EventStream read_evs_file(const std::string& path);

struct CsvReadResult {
    EventStream stream;
    bool was_unsorted = false;  // input needed a stable re-sort
};

// Rows are `t_us,x,y,p` with p in {1,-1} or {1,0}; 0 maps to -1.
CsvReadResult read_csv_events(std::istream& source, std::uint32_t width, std::uint32_t height);

// Stable sort by timestamp; equal-timestamp events keep input order.
void sort_events(std::vector<Event>& events);

}  // namespace evadkit
