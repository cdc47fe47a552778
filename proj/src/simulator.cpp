#include "evadkit/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace evadkit {

namespace {

double fold_reflect(double v, double lo, double hi) {
    if (hi <= lo) return lo;
    double period = 2.0 * (hi - lo);
    double m = std::fmod(v - lo, period);
    if (m < 0) m += period;
    return lo + (m <= hi - lo ? m : period - m);
}

double texture_value(std::uint64_t seed, std::uint32_t x, std::uint32_t y) {
    std::uint64_t h = splitmix64(seed ^ (static_cast<std::uint64_t>(y) << 32 | x));
    return static_cast<double>(h >> 11) * 0x1.0p-53;  // [0,1)
}

struct ObjectState {
    double x, y;
};

Box object_box(const ObjectSpec& obj, double px, double py, std::uint32_t w, std::uint32_t h) {
    double x0, y0, x1, y1;
    if (obj.shape == ObjectSpec::Shape::Rectangle) {
        double rx = std::floor(px + 0.5), ry = std::floor(py + 0.5);
        x0 = rx;
        y0 = ry;
        x1 = rx + obj.width;
        y1 = ry + obj.height;
    } else {
        double cx = std::floor(px + 0.5), cy = std::floor(py + 0.5);
        x0 = cx - obj.radius;
        y0 = cy - obj.radius;
        x1 = cx + obj.radius + 1;
        y1 = cy + obj.radius + 1;
    }
    x0 = std::max(0.0, x0);
    y0 = std::max(0.0, y0);
    x1 = std::min(static_cast<double>(w), x1);
    y1 = std::min(static_cast<double>(h), y1);
    return {x0, y0, std::max(x0, x1), std::max(y0, y1)};
}

void paint_object(IntensityFrame& frame, const ObjectSpec& obj, double px, double py,
                  double background_base) {
    const auto h = frame.rows();
    const auto w = frame.cols();
    double value = std::max(1.0, background_base + obj.contrast);
    if (obj.shape == ObjectSpec::Shape::Rectangle) {
        auto rx = static_cast<Eigen::Index>(std::floor(px + 0.5));
        auto ry = static_cast<Eigen::Index>(std::floor(py + 0.5));
        for (Eigen::Index yy = std::max<Eigen::Index>(0, ry);
             yy < std::min<Eigen::Index>(h, ry + obj.height); ++yy)
            for (Eigen::Index xx = std::max<Eigen::Index>(0, rx);
                 xx < std::min<Eigen::Index>(w, rx + obj.width); ++xx)
                frame(yy, xx) = value;
    } else {
        auto cx = static_cast<Eigen::Index>(std::floor(px + 0.5));
        auto cy = static_cast<Eigen::Index>(std::floor(py + 0.5));
        Eigen::Index r = obj.radius;
        for (Eigen::Index yy = std::max<Eigen::Index>(0, cy - r);
             yy <= std::min<Eigen::Index>(h - 1, cy + r); ++yy)
            for (Eigen::Index xx = std::max<Eigen::Index>(0, cx - r);
                 xx <= std::min<Eigen::Index>(w - 1, cx + r); ++xx)
                if ((xx - cx) * (xx - cx) + (yy - cy) * (yy - cy) <= r * r)
                    frame(yy, xx) = value;
    }
}

// Reflection range for the tracked anchor point (top-left for rectangles,
// center for disks), keeping the whole object on the sensor.
void anchor_range(const ObjectSpec& obj, std::uint32_t w, std::uint32_t h, double& x_lo,
                  double& x_hi, double& y_lo, double& y_hi) {
    if (obj.shape == ObjectSpec::Shape::Rectangle) {
        x_lo = 0.0;
        x_hi = std::max(0.0, static_cast<double>(w) - obj.width);
        y_lo = 0.0;
        y_hi = std::max(0.0, static_cast<double>(h) - obj.height);
    } else {
        x_lo = obj.radius;
        x_hi = std::max(x_lo, static_cast<double>(w) - 1 - obj.radius);
        y_lo = obj.radius;
        y_hi = std::max(y_lo, static_cast<double>(h) - 1 - obj.radius);
    }
}

}  // namespace

void validate_scene(const SceneSpec& spec) {
    if (spec.width == 0 || spec.height == 0)
        throw std::invalid_argument("scene: sensor dimensions must be positive");
    if (spec.duration_frames < 1)
        throw std::invalid_argument("scene: duration must be at least one frame");
    if (spec.fps <= 0.0) throw std::invalid_argument("scene: fps must be positive");
    for (const AnomalyInterval& a : spec.anomalies) {
        if (a.object_id >= spec.objects.size())
            throw std::invalid_argument("scene: anomaly references unknown object");
        if (a.start_frame >= a.end_frame || a.end_frame > spec.duration_frames)
            throw std::invalid_argument("scene: anomaly interval outside duration");
        if (a.burst_multiplier <= 1.0)
            throw std::invalid_argument("scene: burst multiplier must exceed 1");
    }
}

RenderedScene render_scene(const SceneSpec& spec) {
    validate_scene(spec);

    IntensityFrame background(spec.height, spec.width);
    for (std::uint32_t y = 0; y < spec.height; ++y)
        for (std::uint32_t x = 0; x < spec.width; ++x)
            background(y, x) =
                std::max(1.0, spec.background_base +
                                  spec.background_amplitude *
                                      (2.0 * texture_value(spec.background_seed, x, y) - 1.0));

    RenderedScene scene;
    scene.frames.reserve(spec.duration_frames);
    scene.labels.assign(spec.duration_frames, 0);

    std::vector<ObjectState> state;
    state.reserve(spec.objects.size());
    for (const ObjectSpec& obj : spec.objects) state.push_back({obj.x0, obj.y0});

    for (std::size_t f = 0; f < spec.duration_frames; ++f) {
        IntensityFrame frame = background;
        for (std::size_t o = 0; o < spec.objects.size(); ++o) {
            const ObjectSpec& obj = spec.objects[o];
            double x_lo, x_hi, y_lo, y_hi;
            anchor_range(obj, spec.width, spec.height, x_lo, x_hi, y_lo, y_hi);
            double px = fold_reflect(state[o].x, x_lo, x_hi);
            double py = fold_reflect(state[o].y, y_lo, y_hi);
            paint_object(frame, obj, px, py, spec.background_base);
        }

        for (const AnomalyInterval& a : spec.anomalies) {
            if (f >= a.start_frame && f < a.end_frame) {
                scene.labels[f] = 1;
                const ObjectSpec& obj = spec.objects[a.object_id];
                double x_lo, x_hi, y_lo, y_hi;
                anchor_range(obj, spec.width, spec.height, x_lo, x_hi, y_lo, y_hi);
                double px = fold_reflect(state[a.object_id].x, x_lo, x_hi);
                double py = fold_reflect(state[a.object_id].y, y_lo, y_hi);
                Box b = object_box(obj, px, py, spec.width, spec.height);
                if (b.area() > 0) scene.gt_boxes[f].push_back(b);
            }
        }

        // Advance positions; a bursting object moves faster inside its interval.
        for (std::size_t o = 0; o < spec.objects.size(); ++o) {
            double mult = 1.0;
            for (const AnomalyInterval& a : spec.anomalies)
                if (a.object_id == o && f >= a.start_frame && f < a.end_frame)
                    mult = a.burst_multiplier;
            state[o].x += spec.objects[o].vx * mult;
            state[o].y += spec.objects[o].vy * mult;
        }

        scene.frames.push_back(std::move(frame));
    }
    return scene;
}

EventStream frames_to_events(const std::vector<IntensityFrame>& frames, const SimConfig& config,
                             std::uint64_t seed, double fps) {
    if (frames.size() < 2)
        throw std::invalid_argument("frames_to_events: need at least two frames");
    if (config.threshold <= 0.0)
        throw std::invalid_argument("frames_to_events: threshold must be positive");

    const auto rows = frames.front().rows();
    const auto cols = frames.front().cols();
    for (const IntensityFrame& f : frames) {
        if (f.rows() != rows || f.cols() != cols)
            throw std::invalid_argument("frames_to_events: inconsistent frame shapes");
        if ((f.array() < 0.0).any())
            throw std::invalid_argument("frames_to_events: negative intensity");
    }

    const double us_per_frame = 1e6 / fps;
    Rng rng(seed);

    EventStream out;
    out.width = static_cast<std::uint32_t>(cols);
    out.height = static_cast<std::uint32_t>(rows);
    out.source_fps = fps;
    out.duration_us =
        static_cast<std::uint64_t>(round_half_up(static_cast<double>(frames.size()) * us_per_frame));

    IntensityFrame log_prev =
        frames[0].array().max(config.intensity_floor).log().matrix();
    for (std::size_t i = 0; i + 1 < frames.size(); ++i) {
        IntensityFrame log_next =
            frames[i + 1].array().max(config.intensity_floor).log().matrix();
        const double base_us = static_cast<double>(i) * us_per_frame;
        for (Eigen::Index y = 0; y < rows; ++y) {
            for (Eigen::Index x = 0; x < cols; ++x) {
                double delta = log_next(y, x) - log_prev(y, x);
                if (delta == 0.0) continue;
                double magnitude = std::abs(delta);
                std::int8_t pol = delta > 0.0 ? std::int8_t{1} : std::int8_t{-1};

                std::size_t emitted = 0;
                if (config.threshold_noise > 0.0) {
                    double residual = magnitude;
                    for (;;) {
                        double theta = config.threshold + config.threshold_noise * rng.normal();
                        theta = std::max(theta, 1e-3);
                        if (residual < theta) break;
                        residual -= theta;
                        ++emitted;
                    }
                } else {
                    emitted = static_cast<std::size_t>(std::floor(magnitude / config.threshold));
                }
                for (std::size_t j = 0; j < emitted; ++j) {
                    double t = base_us + static_cast<double>(j + 1) * us_per_frame /
                                             static_cast<double>(emitted + 1);
                    out.events.push_back({static_cast<std::uint64_t>(round_half_up(t)),
                                          static_cast<std::uint16_t>(x),
                                          static_cast<std::uint16_t>(y), pol});
                }
            }
        }
        log_prev = std::move(log_next);
    }

    sort_events(out.events);
    return out;
}

namespace {

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

// Splits "k1=v1 k2=v2 ..." into pairs.
std::vector<std::pair<std::string, std::string>> parse_kv_list(std::istringstream& in,
                                                               std::size_t line_no) {
    std::vector<std::pair<std::string, std::string>> pairs;
    std::string token;
    while (in >> token) {
        auto eq = token.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 >= token.size())
            throw IoError(IoError::Kind::Parse,
                          "scene: bad token '" + token + "' at line " + std::to_string(line_no));
        pairs.emplace_back(token.substr(0, eq), token.substr(eq + 1));
    }
    return pairs;
}

double to_double(const std::string& v, std::size_t line_no) {
    try {
        std::size_t pos = 0;
        double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing");
        return d;
    } catch (const std::exception&) {
        throw IoError(IoError::Kind::Parse,
                      "scene: bad number '" + v + "' at line " + std::to_string(line_no));
    }
}

}  // namespace

SceneSpec parse_scene_spec(std::istream& source) {
    SceneSpec spec;
    spec.objects.clear();
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(source, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;

        if (line.rfind("object", 0) == 0 && (line.size() == 6 || line[6] == ' ')) {
            std::istringstream rest(line.substr(6));
            ObjectSpec obj;
            for (auto& [k, v] : parse_kv_list(rest, line_no)) {
                if (k == "shape") {
                    if (v == "rect") obj.shape = ObjectSpec::Shape::Rectangle;
                    else if (v == "disk") obj.shape = ObjectSpec::Shape::Disk;
                    else
                        throw IoError(IoError::Kind::Parse,
                                      "scene: unknown shape at line " + std::to_string(line_no));
                } else if (k == "x") obj.x0 = to_double(v, line_no);
                else if (k == "y") obj.y0 = to_double(v, line_no);
                else if (k == "w") obj.width = static_cast<int>(to_double(v, line_no));
                else if (k == "h") obj.height = static_cast<int>(to_double(v, line_no));
                else if (k == "r") obj.radius = static_cast<int>(to_double(v, line_no));
                else if (k == "vx") obj.vx = to_double(v, line_no);
                else if (k == "vy") obj.vy = to_double(v, line_no);
                else if (k == "contrast") obj.contrast = to_double(v, line_no);
                else
                    throw IoError(IoError::Kind::Parse,
                                  "scene: unknown object key '" + k + "' at line " +
                                      std::to_string(line_no));
            }
            spec.objects.push_back(obj);
            continue;
        }

        if (line.rfind("anomaly", 0) == 0 && (line.size() == 7 || line[7] == ' ')) {
            std::istringstream rest(line.substr(7));
            AnomalyInterval a;
            for (auto& [k, v] : parse_kv_list(rest, line_no)) {
                if (k == "object") a.object_id = static_cast<std::size_t>(to_double(v, line_no));
                else if (k == "start") a.start_frame = static_cast<std::size_t>(to_double(v, line_no));
                else if (k == "end") a.end_frame = static_cast<std::size_t>(to_double(v, line_no));
                else if (k == "burst") a.burst_multiplier = to_double(v, line_no);
                else
                    throw IoError(IoError::Kind::Parse,
                                  "scene: unknown anomaly key '" + k + "' at line " +
                                      std::to_string(line_no));
            }
            spec.anomalies.push_back(a);
            continue;
        }

        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw IoError(IoError::Kind::Parse,
                          "scene: expected key = value at line " + std::to_string(line_no));
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key == "width") spec.width = static_cast<std::uint32_t>(to_double(value, line_no));
        else if (key == "height") spec.height = static_cast<std::uint32_t>(to_double(value, line_no));
        else if (key == "frames")
            spec.duration_frames = static_cast<std::size_t>(to_double(value, line_no));
        else if (key == "fps") spec.fps = to_double(value, line_no);
        else if (key == "background_seed")
            spec.background_seed = static_cast<std::uint64_t>(to_double(value, line_no));
        else if (key == "background_base") spec.background_base = to_double(value, line_no);
        else if (key == "background_amplitude")
            spec.background_amplitude = to_double(value, line_no);
        else
            throw IoError(IoError::Kind::Parse,
                          "scene: unknown key '" + key + "' at line " + std::to_string(line_no));
    }
    return spec;
}

SceneSpec read_scene_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError(IoError::Kind::Missing, "cannot open: " + path);
    return parse_scene_spec(in);
}

void write_scene_file(const SceneSpec& spec, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError(IoError::Kind::Missing, "cannot open for writing: " + path);
    out << "width = " << spec.width << "\n";
    out << "height = " << spec.height << "\n";
    out << "frames = " << spec.duration_frames << "\n";
    out << "fps = " << format_double(spec.fps) << "\n";
    out << "background_seed = " << spec.background_seed << "\n";
    out << "background_base = " << format_double(spec.background_base) << "\n";
    out << "background_amplitude = " << format_double(spec.background_amplitude) << "\n";
    for (const ObjectSpec& o : spec.objects) {
        out << "object shape=" << (o.shape == ObjectSpec::Shape::Rectangle ? "rect" : "disk")
            << " x=" << format_double(o.x0) << " y=" << format_double(o.y0);
        if (o.shape == ObjectSpec::Shape::Rectangle)
            out << " w=" << o.width << " h=" << o.height;
        else
            out << " r=" << o.radius;
        out << " vx=" << format_double(o.vx) << " vy=" << format_double(o.vy)
            << " contrast=" << format_double(o.contrast) << "\n";
    }
    for (const AnomalyInterval& a : spec.anomalies)
        out << "anomaly object=" << a.object_id << " start=" << a.start_frame
            << " end=" << a.end_frame << " burst=" << format_double(a.burst_multiplier) << "\n";
}

void write_labels_file(const std::vector<int>& labels, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError(IoError::Kind::Missing, "cannot open for writing: " + path);
    for (int l : labels) out << (l != 0 ? 1 : 0) << '\n';
}

std::vector<int> read_labels_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError(IoError::Kind::Missing, "cannot open: " + path);
    std::vector<int> labels;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        line = trim(line);
        if (line.empty()) continue;
        if (line == "0") labels.push_back(0);
        else if (line == "1") labels.push_back(1);
        else
            throw IoError(IoError::Kind::Parse,
                          path + ": label must be 0 or 1 at row " + std::to_string(row));
    }
    return labels;
}

}  // namespace evadkit
