#include "evadkit/framing.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace evadkit {

std::vector<Window> make_windows(const EventStream& stream, const BinningConfig& config) {
    if (stream.source_fps <= 0.0)
        throw std::invalid_argument("make_windows: source_fps must be positive");
    if (stream.duration_us == 0)
        throw std::invalid_argument("make_windows: empty duration");
    if (config.stride_frames < 1)
        throw std::invalid_argument("make_windows: stride must be at least 1");

    const double us_per_frame = 1e6 / stream.source_fps;
    const auto duration = stream.duration_us;
    auto frame_us = [&](double f) {
        return static_cast<std::uint64_t>(round_half_up(f * us_per_frame));
    };

    std::vector<Window> windows;
    for (std::uint64_t k = 0;; ++k) {
        double center_frame = static_cast<double>(config.half_window_frames) +
                              static_cast<double>(k) * config.stride_frames;
        std::uint64_t center = frame_us(center_frame);
        if (center >= duration) break;
        double lo = center_frame - config.half_window_frames;
        double hi = center_frame + config.half_window_frames;
        if (hi == lo) hi = lo + 1.0;  // zero half-window covers the center frame itself
        Window w;
        w.center_us = center;
        w.start_us = frame_us(std::max(0.0, lo));
        w.end_us = std::min(duration, frame_us(hi));
        if (w.end_us > w.start_us) windows.push_back(w);
    }

    if (windows.empty()) {
        // Duration too short to reach the first center: one clipped window.
        windows.push_back({0, duration, duration / 2});
        return windows;
    }

    // Truncate overlaps at the midpoint between adjacent centers.
    for (std::size_t i = 0; i + 1 < windows.size(); ++i) {
        if (windows[i + 1].start_us < windows[i].end_us) {
            std::uint64_t mid = (windows[i].center_us + windows[i + 1].center_us) / 2;
            windows[i].end_us = mid;
            windows[i + 1].start_us = mid;
        }
    }
    return windows;
}

double event_budget_unclamped(std::uint64_t raw_count, double mean, double median,
                              const BinningConfig& config) {
    if (median <= 0.0 || raw_count == 0)
        throw std::invalid_argument("event_budget_unclamped: needs positive median and count");
    double sc = static_cast<double>(raw_count) / median;
    return config.mean_fraction * mean + median / sc;
}

BudgetResult event_budget(std::uint64_t raw_count, double mean, double median,
                          const BinningConfig& config) {
    BudgetResult result;
    if (median <= 0.0) {
        result.degenerate = true;
        auto base = static_cast<std::uint64_t>(
            std::max<std::int64_t>(0, round_half_up(config.mean_fraction * mean)));
        result.budget = std::min(base, config.event_cap);
        return result;
    }
    if (raw_count == 0) {
        result.budget = config.event_cap;
        return result;
    }
    double value = event_budget_unclamped(raw_count, mean, median, config);
    auto rounded = static_cast<std::uint64_t>(std::max<std::int64_t>(1, round_half_up(value)));
    result.budget = std::clamp<std::uint64_t>(rounded, 1, config.event_cap);
    return result;
}

namespace {

struct WindowRange {
    std::size_t lo = 0;  // first event index inside the window
    std::size_t hi = 0;  // one past the last
};

WindowRange window_range(const std::vector<Event>& events, const Window& w) {
    auto cmp = [](const Event& e, std::uint64_t t) { return e.t_us < t; };
    auto lo = std::lower_bound(events.begin(), events.end(), w.start_us, cmp);
    auto hi = std::lower_bound(events.begin(), events.end(), w.end_us, cmp);
    return {static_cast<std::size_t>(lo - events.begin()),
            static_cast<std::size_t>(hi - events.begin())};
}

void accumulate(EventFrame& frame, const Event& e) {
    frame.counts(e.y, e.x) += 1;
    frame.polarity_sum(e.y, e.x) += e.polarity;
    ++frame.rendered_count;
}

}  // namespace

FrameSequence rasterize(const EventStream& stream, const std::vector<Window>& windows,
                        const BinningConfig& config) {
    FrameSequence seq;
    seq.frames.reserve(windows.size());

    std::vector<WindowRange> ranges(windows.size());
    std::vector<std::uint64_t> raw(windows.size());
    for (std::size_t i = 0; i < windows.size(); ++i) {
        ranges[i] = window_range(stream.events, windows[i]);
        raw[i] = ranges[i].hi - ranges[i].lo;
    }

    // Per-video statistics over the fixed windows.
    double mean = 0.0;
    if (!raw.empty()) {
        std::uint64_t total = 0;
        for (auto r : raw) total += r;
        mean = static_cast<double>(total) / static_cast<double>(raw.size());
    }
    std::vector<std::uint64_t> sorted_raw(raw);
    std::sort(sorted_raw.begin(), sorted_raw.end());
    double median = 0.0;
    if (!sorted_raw.empty()) {
        std::size_t m = sorted_raw.size() / 2;
        median = sorted_raw.size() % 2 == 1
                     ? static_cast<double>(sorted_raw[m])
                     : 0.5 * static_cast<double>(sorted_raw[m - 1] + sorted_raw[m]);
    }
    seq.mean_raw_count = mean;
    seq.median_raw_count = median;

    for (std::size_t i = 0; i < windows.size(); ++i) {
        const Window& w = windows[i];
        EventFrame frame;
        frame.counts = CountGrid::Zero(stream.height, stream.width);
        frame.polarity_sum = PolarityGrid::Zero(stream.height, stream.width);
        frame.center_time_us = w.center_us;
        frame.window_start_us = w.start_us;
        frame.window_end_us = w.end_us;
        frame.raw_count = raw[i];

        std::uint64_t budget = event_budget(raw[i], mean, median, config).budget;

        if (raw[i] >= budget && raw[i] > 0) {
            // Deterministic stride subsample down to the budget.
            double k = static_cast<double>(raw[i]) / static_cast<double>(budget);
            for (std::uint64_t j = 0; j < budget; ++j) {
                std::size_t idx = ranges[i].lo +
                                  static_cast<std::size_t>(std::floor(static_cast<double>(j) * k));
                accumulate(frame, stream.events[idx]);
            }
        } else {
            for (std::size_t idx = ranges[i].lo; idx < ranges[i].hi; ++idx)
                accumulate(frame, stream.events[idx]);

            // Borrow the closest neighboring events, bounded by the adjacent
            // window centers (stream edges for the boundary windows).
            std::uint64_t left_limit = i > 0 ? windows[i - 1].center_us : 0;
            std::uint64_t right_limit =
                i + 1 < windows.size() ? windows[i + 1].center_us : stream.duration_us;
            auto cmp = [](const Event& e, std::uint64_t t) { return e.t_us < t; };
            auto left_lo = static_cast<std::size_t>(
                std::lower_bound(stream.events.begin(), stream.events.end(), left_limit, cmp) -
                stream.events.begin());
            auto right_hi = static_cast<std::size_t>(
                std::lower_bound(stream.events.begin(), stream.events.end(), right_limit + 1, cmp) -
                stream.events.begin());

            std::size_t left = ranges[i].lo;    // exclusive walk to the left
            std::size_t right = ranges[i].hi;   // inclusive walk to the right
            while (frame.rendered_count < budget) {
                bool has_left = left > left_lo;
                bool has_right = right < right_hi && stream.events[right].t_us <= right_limit;
                if (!has_left && !has_right) break;
                std::uint64_t dl = has_left ? w.start_us - stream.events[left - 1].t_us
                                            : std::numeric_limits<std::uint64_t>::max();
                std::uint64_t dr = has_right ? stream.events[right].t_us - (w.end_us - 1)
                                             : std::numeric_limits<std::uint64_t>::max();
                if (dl <= dr) {
                    accumulate(frame, stream.events[--left]);
                } else {
                    accumulate(frame, stream.events[right++]);
                }
            }
        }

        seq.frames.push_back(std::move(frame));
    }
    return seq;
}

namespace {

template <typename T>
void put_le(std::ofstream& out, T v) {
    unsigned char bytes[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i)
        bytes[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xFF);
    out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(std::ifstream& in, const std::string& path) {
    unsigned char bytes[sizeof(T)];
    in.read(reinterpret_cast<char*>(bytes), sizeof(T));
    if (in.gcount() != static_cast<std::streamsize>(sizeof(T)))
        throw IoError(IoError::Kind::Truncated, path + ": truncated tensor file");
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
        v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    return static_cast<T>(v);
}

}  // namespace

void write_frames_tensor(const FrameSequence& frames, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(IoError::Kind::Missing, "cannot open for writing: " + path);
    std::uint32_t t = static_cast<std::uint32_t>(frames.frames.size());
    std::uint32_t h = t > 0 ? static_cast<std::uint32_t>(frames.frames[0].counts.rows()) : 0;
    std::uint32_t w = t > 0 ? static_cast<std::uint32_t>(frames.frames[0].counts.cols()) : 0;
    put_le(out, t);
    put_le(out, h);
    put_le(out, w);
    for (const EventFrame& f : frames.frames)
        for (Eigen::Index y = 0; y < f.counts.rows(); ++y)
            for (Eigen::Index x = 0; x < f.counts.cols(); ++x) put_le(out, f.counts(y, x));
    for (const EventFrame& f : frames.frames)
        for (Eigen::Index y = 0; y < f.polarity_sum.rows(); ++y)
            for (Eigen::Index x = 0; x < f.polarity_sum.cols(); ++x)
                put_le(out, static_cast<std::uint32_t>(f.polarity_sum(y, x)));
}

FrameSequence read_frames_tensor(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(IoError::Kind::Missing, "cannot open: " + path);
    auto t = get_le<std::uint32_t>(in, path);
    auto h = get_le<std::uint32_t>(in, path);
    auto w = get_le<std::uint32_t>(in, path);
    FrameSequence seq;
    seq.frames.resize(t);
    for (auto& f : seq.frames) {
        f.counts = CountGrid::Zero(h, w);
        for (std::uint32_t y = 0; y < h; ++y)
            for (std::uint32_t x = 0; x < w; ++x) f.counts(y, x) = get_le<std::uint32_t>(in, path);
    }
    for (auto& f : seq.frames) {
        f.polarity_sum = PolarityGrid::Zero(h, w);
        for (std::uint32_t y = 0; y < h; ++y)
            for (std::uint32_t x = 0; x < w; ++x)
                f.polarity_sum(y, x) = static_cast<std::int32_t>(get_le<std::uint32_t>(in, path));
    }
    return seq;
}

void write_frame_meta(const FrameSequence& frames, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError(IoError::Kind::Missing, "cannot open for writing: " + path);
    out << "center_time_us,raw_count,rendered_count\n";
    for (const EventFrame& f : frames.frames)
        out << f.center_time_us << ',' << f.raw_count << ',' << f.rendered_count << '\n';
}

std::vector<FrameMetaRow> read_frame_meta(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError(IoError::Kind::Missing, "cannot open: " + path);
    std::vector<FrameMetaRow> rows;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line.rfind("center_time_us", 0) == 0) continue;
        std::istringstream ls(line);
        unsigned long long center, rawc, rendered;
        char c1, c2;
        if (!(ls >> center >> c1 >> rawc >> c2 >> rendered) || c1 != ',' || c2 != ',')
            throw IoError(IoError::Kind::Parse, path + ": unparsable row " + std::to_string(row));
        rows.push_back({center, rawc, rendered});
    }
    return rows;
}

void load_frame_meta(const std::string& path, FrameSequence& frames) {
    std::vector<FrameMetaRow> rows = read_frame_meta(path);
    if (rows.size() != frames.frames.size())
        throw IoError(IoError::Kind::Parse, path + ": meta row count does not match frame count");
    std::vector<std::uint64_t> raw;
    raw.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        frames.frames[i].center_time_us = rows[i].center_time_us;
        frames.frames[i].raw_count = rows[i].raw_count;
        frames.frames[i].rendered_count = rows[i].rendered_count;
        raw.push_back(rows[i].raw_count);
    }
    // Recover the per-video statistics the budget pass used.
    if (!raw.empty()) {
        std::uint64_t total = 0;
        for (auto r : raw) total += r;
        frames.mean_raw_count = static_cast<double>(total) / static_cast<double>(raw.size());
        std::sort(raw.begin(), raw.end());
        std::size_t m = raw.size() / 2;
        frames.median_raw_count = raw.size() % 2 == 1
                                      ? static_cast<double>(raw[m])
                                      : 0.5 * static_cast<double>(raw[m - 1] + raw[m]);
    }
}

void write_pgm(const CountGrid& grid, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(IoError::Kind::Missing, "cannot open for writing: " + path);
    out << "P5\n" << grid.cols() << ' ' << grid.rows() << "\n255\n";
    for (Eigen::Index y = 0; y < grid.rows(); ++y)
        for (Eigen::Index x = 0; x < grid.cols(); ++x) {
            unsigned char v = static_cast<unsigned char>(std::min<std::uint32_t>(grid(y, x), 255));
            out.write(reinterpret_cast<const char*>(&v), 1);
        }
}

}  // namespace evadkit
