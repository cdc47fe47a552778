#pragma once

#include <Eigen/Core>

#include <vector>

#include "evadkit/evaluation.hpp"
#include "evadkit/event_model.hpp"

namespace evadkit {

using Mask = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct LocalizeConfig {
    double score_threshold = 0.5;      // frames at or above are analyzed
    bool absolute_threshold = false;   // false: fraction-of-max mode
    double map_threshold = 0.5;        // fraction of max, or absolute count
    bool use_polarity_magnitude = false;  // threshold |polarity sum| instead of counts
    int min_component_area = 9;        // pixels
};

// mask = cell value >= threshold; fraction mode scales by the grid maximum
// and an all-zero grid yields an empty mask.
Mask binarize(const EventFrame& frame, const LocalizeConfig& config);

// Opening (erode, dilate) then closing (dilate, erode) with a 3x3 square
// structuring element; outside the grid counts as background.
Mask morph_refine(const Mask& mask, const LocalizeConfig& config);

Mask erode3x3(const Mask& mask);
Mask dilate3x3(const Mask& mask);

// 8-connected components at or above the minimum area, each as a tight box
// (exclusive max convention), sorted by box area descending.
std::vector<Box> extract_boxes(const Mask& mask, const LocalizeConfig& config);

// Frames scoring at or above the score threshold run the full
// binarize -> refine -> extract chain; the rest contribute nothing.
BoxSet localize_video(const FrameSequence& frames, const Vector& scores,
                      const LocalizeConfig& config);

}  // namespace evadkit
