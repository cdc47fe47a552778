#include "evadkit/evaluation.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "evadkit/common.hpp"

namespace evadkit {

double auc(const LabeledScores& data) {
    const auto n = static_cast<std::size_t>(data.scores.size());
    if (n != data.labels.size())
        throw std::invalid_argument("auc: scores and labels length mismatch");

    std::size_t n_pos = 0;
    for (int l : data.labels) n_pos += (l != 0);
    std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0)
        throw std::invalid_argument("auc: both classes must be present");

    // Average ranks with tie groups, then the Mann-Whitney U statistic.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return data.scores[static_cast<Eigen::Index>(a)] < data.scores[static_cast<Eigen::Index>(b)];
    });

    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && data.scores[static_cast<Eigen::Index>(order[j + 1])] ==
                                data.scores[static_cast<Eigen::Index>(order[i])])
            ++j;
        double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;  // ranks are 1-based
        for (std::size_t k = i; k <= j; ++k)
            if (data.labels[order[k]] != 0) rank_sum_pos += avg_rank;
        i = j + 1;
    }

    double u = rank_sum_pos - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double frame_iou(const Box& a, const Box& b) {
    double ix = std::max(0.0, std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min));
    double iy = std::max(0.0, std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min));
    double inter = ix * iy;
    double uni = a.area() + b.area() - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

double tiou(const BoxSet& pred, const BoxSet& gt,
            const std::vector<std::uint64_t>& anomalous_frames) {
    if (anomalous_frames.empty()) return 0.0;
    double total = 0.0;
    for (std::uint64_t f : anomalous_frames) {
        auto git = gt.find(f);
        if (git == gt.end() || git->second.empty())
            throw std::invalid_argument("tiou: ground truth missing a box on anomalous frame " +
                                        std::to_string(f));
        auto pit = pred.find(f);
        double frame_value = 0.0;
        for (const Box& g : git->second) {
            double best = 0.0;
            if (pit != pred.end())
                for (const Box& p : pit->second) best = std::max(best, frame_iou(g, p));
            frame_value += best;
        }
        total += frame_value / static_cast<double>(git->second.size());
    }
    return total / static_cast<double>(anomalous_frames.size());
}

void write_scores_file(const Vector& scores, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError(IoError::Kind::Missing, "cannot open for writing: " + path);
    out << "frame_index,score\n";
    for (Eigen::Index i = 0; i < scores.size(); ++i)
        out << i << ',' << format_double(scores[i]) << '\n';
}

Vector read_scores_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError(IoError::Kind::Missing, "cannot open: " + path);
    std::string line;
    std::vector<double> values;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line.rfind("frame_index", 0) == 0) continue;
        std::istringstream ls(line);
        long long idx;
        double score;
        char comma;
        if (!(ls >> idx >> comma >> score) || comma != ',')
            throw IoError(IoError::Kind::Parse, path + ": unparsable row " + std::to_string(row));
        if (score < 0.0 || score > 1.0)
            throw IoError(IoError::Kind::Parse,
                          path + ": score outside [0,1] at row " + std::to_string(row));
        if (static_cast<std::size_t>(idx) != values.size())
            throw IoError(IoError::Kind::Parse,
                          path + ": non-contiguous frame index at row " + std::to_string(row));
        values.push_back(score);
    }
    return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

void write_boxes_file(const BoxSet& boxes, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError(IoError::Kind::Missing, "cannot open for writing: " + path);
    out << "frame_index,x_min,y_min,x_max,y_max\n";
    for (const auto& [frame, list] : boxes)
        for (const Box& b : list)
            out << frame << ',' << format_double(b.x_min) << ',' << format_double(b.y_min) << ','
                << format_double(b.x_max) << ',' << format_double(b.y_max) << '\n';
}

BoxSet read_boxes_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError(IoError::Kind::Missing, "cannot open: " + path);
    BoxSet boxes;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line.rfind("frame_index", 0) == 0) continue;
        std::istringstream ls(line);
        unsigned long long frame;
        Box b;
        char c1, c2, c3, c4;
        if (!(ls >> frame >> c1 >> b.x_min >> c2 >> b.y_min >> c3 >> b.x_max >> c4 >> b.y_max) ||
            c1 != ',' || c2 != ',' || c3 != ',' || c4 != ',')
            throw IoError(IoError::Kind::Parse, path + ": unparsable row " + std::to_string(row));
        boxes[frame].push_back(b);
    }
    return boxes;
}

}  // namespace evadkit
