#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace evadkit {

using Vector = Eigen::VectorXd;

// Axis-aligned box, exclusive max convention: covers [x_min,x_max) x [y_min,y_max).
struct Box {
    double x_min = 0, y_min = 0, x_max = 0, y_max = 0;

    double area() const { return (x_max - x_min) * (y_max - y_min); }
    friend bool operator==(const Box&, const Box&) = default;
};

// Zero or more boxes per frame index; absent index means no boxes.
using BoxSet = std::map<std::uint64_t, std::vector<Box>>;

struct LabeledScores {
    Vector scores;            // entries in [0,1]
    std::vector<int> labels;  // 0/1, same length
};

// Frame-level AUC, Mann-Whitney formulation: P(score_pos > score_neg) with
// half credit for ties, exact over all pairs. Throws std::invalid_argument
// on single-class input or length mismatch.
double auc(const LabeledScores& data);

// area(a and b) / area(a or b), in [0,1]. Disjoint boxes give 0.
double frame_iou(const Box& a, const Box& b);

// Mean over ground-truth anomalous frames of the best IoU between that
// frame's GT boxes and any predicted box; frames with no prediction count 0.
// Throws if gt is missing a box on an anomalous frame.
double tiou(const BoxSet& pred, const BoxSet& gt,
            const std::vector<std::uint64_t>& anomalous_frames);

// Score files: CSV `frame_index,score`.
void write_scores_file(const Vector& scores, const std::string& path);
Vector read_scores_file(const std::string& path);

// Box files: CSV `frame_index,x_min,y_min,x_max,y_max`, several rows per
// frame allowed.
void write_boxes_file(const BoxSet& boxes, const std::string& path);
BoxSet read_boxes_file(const std::string& path);

}  // namespace evadkit
