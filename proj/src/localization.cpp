#include "evadkit/localization.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace evadkit {

Mask binarize(const EventFrame& frame, const LocalizeConfig& config) {
    const auto rows = frame.counts.rows();
    const auto cols = frame.counts.cols();
    Mask mask = Mask::Zero(rows, cols);

    auto value = [&](Eigen::Index y, Eigen::Index x) -> double {
        if (config.use_polarity_magnitude)
            return std::abs(static_cast<double>(frame.polarity_sum(y, x)));
        return static_cast<double>(frame.counts(y, x));
    };

    double peak = 0.0;
    for (Eigen::Index y = 0; y < rows; ++y)
        for (Eigen::Index x = 0; x < cols; ++x) peak = std::max(peak, value(y, x));
    if (peak <= 0.0) return mask;

    double threshold = config.absolute_threshold ? config.map_threshold
                                                 : config.map_threshold * peak;
    for (Eigen::Index y = 0; y < rows; ++y)
        for (Eigen::Index x = 0; x < cols; ++x)
            if (value(y, x) >= threshold) mask(y, x) = 1;
    return mask;
}

Mask erode3x3(const Mask& mask) {
    const auto rows = mask.rows();
    const auto cols = mask.cols();
    Mask out = Mask::Zero(rows, cols);
    for (Eigen::Index y = 0; y < rows; ++y)
        for (Eigen::Index x = 0; x < cols; ++x) {
            bool keep = true;
            for (Eigen::Index dy = -1; dy <= 1 && keep; ++dy)
                for (Eigen::Index dx = -1; dx <= 1 && keep; ++dx) {
                    Eigen::Index ny = y + dy, nx = x + dx;
                    if (ny < 0 || ny >= rows || nx < 0 || nx >= cols || mask(ny, nx) == 0)
                        keep = false;  // outside the grid is background
                }
            if (keep) out(y, x) = 1;
        }
    return out;
}

Mask dilate3x3(const Mask& mask) {
    const auto rows = mask.rows();
    const auto cols = mask.cols();
    Mask out = Mask::Zero(rows, cols);
    for (Eigen::Index y = 0; y < rows; ++y)
        for (Eigen::Index x = 0; x < cols; ++x) {
            bool hit = false;
            for (Eigen::Index dy = -1; dy <= 1 && !hit; ++dy)
                for (Eigen::Index dx = -1; dx <= 1 && !hit; ++dx) {
                    Eigen::Index ny = y + dy, nx = x + dx;
                    if (ny >= 0 && ny < rows && nx >= 0 && nx < cols && mask(ny, nx) != 0)
                        hit = true;
                }
            if (hit) out(y, x) = 1;
        }
    return out;
}

Mask morph_refine(const Mask& mask, const LocalizeConfig&) {
    Mask opened = dilate3x3(erode3x3(mask));
    return erode3x3(dilate3x3(opened));
}

std::vector<Box> extract_boxes(const Mask& mask, const LocalizeConfig& config) {
    const auto rows = mask.rows();
    const auto cols = mask.cols();
    Eigen::Matrix<std::int32_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> label =
        Eigen::Matrix<std::int32_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>::Constant(
            rows, cols, -1);

    struct Component {
        Eigen::Index x_min, y_min, x_max, y_max;
        std::int64_t area = 0;
    };
    std::vector<Component> comps;
    std::vector<std::pair<Eigen::Index, Eigen::Index>> stack;

    for (Eigen::Index y = 0; y < rows; ++y) {
        for (Eigen::Index x = 0; x < cols; ++x) {
            if (mask(y, x) == 0 || label(y, x) >= 0) continue;
            auto id = static_cast<std::int32_t>(comps.size());
            Component c{x, y, x, y, 0};
            stack.clear();
            stack.emplace_back(y, x);
            label(y, x) = id;
            while (!stack.empty()) {
                auto [cy, cx] = stack.back();
                stack.pop_back();
                ++c.area;
                c.x_min = std::min(c.x_min, cx);
                c.x_max = std::max(c.x_max, cx);
                c.y_min = std::min(c.y_min, cy);
                c.y_max = std::max(c.y_max, cy);
                for (Eigen::Index dy = -1; dy <= 1; ++dy)
                    for (Eigen::Index dx = -1; dx <= 1; ++dx) {
                        Eigen::Index ny = cy + dy, nx = cx + dx;
                        if (ny < 0 || ny >= rows || nx < 0 || nx >= cols) continue;
                        if (mask(ny, nx) != 0 && label(ny, nx) < 0) {
                            label(ny, nx) = id;
                            stack.emplace_back(ny, nx);
                        }
                    }
            }
            comps.push_back(c);
        }
    }

    std::vector<Box> boxes;
    for (const Component& c : comps) {
        if (c.area < config.min_component_area) continue;
        boxes.push_back({static_cast<double>(c.x_min), static_cast<double>(c.y_min),
                         static_cast<double>(c.x_max + 1), static_cast<double>(c.y_max + 1)});
    }
    std::sort(boxes.begin(), boxes.end(), [](const Box& a, const Box& b) {
        if (a.area() != b.area()) return a.area() > b.area();
        if (a.x_min != b.x_min) return a.x_min < b.x_min;
        return a.y_min < b.y_min;
    });
    return boxes;
}

BoxSet localize_video(const FrameSequence& frames, const Vector& scores,
                      const LocalizeConfig& config) {
    if (static_cast<Eigen::Index>(frames.frames.size()) != scores.size())
        throw std::invalid_argument("localize_video: frame/score length mismatch");
    BoxSet out;
    for (std::size_t i = 0; i < frames.frames.size(); ++i) {
        if (scores[static_cast<Eigen::Index>(i)] < config.score_threshold) continue;
        Mask mask = morph_refine(binarize(frames.frames[i], config), config);
        std::vector<Box> boxes = extract_boxes(mask, config);
        if (!boxes.empty()) out[i] = std::move(boxes);
    }
    return out;
}

}  // namespace evadkit
