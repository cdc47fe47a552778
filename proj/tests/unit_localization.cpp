#include <doctest.h>

#include "evadkit/common.hpp"
#include "evadkit/localization.hpp"

using namespace evadkit;

namespace {

EventFrame frame_from(const CountGrid& counts) {
    EventFrame f;
    f.counts = counts;
    f.polarity_sum = PolarityGrid::Zero(counts.rows(), counts.cols());
    f.rendered_count = counts.sum();
    f.raw_count = f.rendered_count;
    return f;
}

Mask mask_from(std::initializer_list<std::initializer_list<int>> rows) {
    auto h = static_cast<Eigen::Index>(rows.size());
    auto w = static_cast<Eigen::Index>(rows.begin()->size());
    Mask m = Mask::Zero(h, w);
    Eigen::Index y = 0;
    for (const auto& row : rows) {
        Eigen::Index x = 0;
        for (int v : row) m(y, x++) = static_cast<std::uint8_t>(v != 0);
        ++y;
    }
    return m;
}

}  // namespace

TEST_CASE("binarize on the hand grids") {
    LocalizeConfig cfg;  // fraction of max, 0.5

    CHECK(binarize(frame_from(CountGrid::Zero(3, 3)), cfg).sum() == 0);

    CountGrid uniform = CountGrid::Constant(3, 3, 4);
    CHECK(binarize(frame_from(uniform), cfg).sum() == 9);

    CountGrid spike = CountGrid::Constant(3, 3, 1);
    spike(1, 1) = 10;
    Mask m = binarize(frame_from(spike), cfg);  // threshold 5 passes only the 10
    CHECK(m.sum() == 1);
    CHECK(m(1, 1) == 1);
}

TEST_CASE("binarize absolute mode and polarity-magnitude mode") {
    CountGrid counts = CountGrid::Constant(2, 2, 2);
    counts(0, 0) = 6;
    EventFrame f = frame_from(counts);
    f.polarity_sum(0, 1) = -2;

    LocalizeConfig abs_cfg;
    abs_cfg.absolute_threshold = true;
    abs_cfg.map_threshold = 3.0;
    CHECK(binarize(f, abs_cfg).sum() == 1);

    LocalizeConfig pol_cfg;
    pol_cfg.use_polarity_magnitude = true;
    pol_cfg.map_threshold = 0.5;
    Mask pol = binarize(f, pol_cfg);  // only one cell carries polarity mass
    CHECK(pol.sum() == 1);
    CHECK(pol(0, 1) == 1);
}

TEST_CASE("opening removes isolated pixels") {
    Mask m = Mask::Zero(5, 5);
    m(2, 2) = 1;
    CHECK(morph_refine(m, LocalizeConfig{}).sum() == 0);
}

TEST_CASE("a solid 5x5 block survives open-close unchanged") {
    Mask m = Mask::Zero(9, 9);
    m.block(2, 2, 5, 5).setConstant(1);
    Mask refined = morph_refine(m, LocalizeConfig{});
    CHECK(refined == m);
}

TEST_CASE("closing fills the interior hole of a 7x7 block") {
    Mask m = Mask::Zero(11, 11);
    m.block(2, 2, 7, 7).setConstant(1);
    m(5, 5) = 0;
    Mask refined = morph_refine(m, LocalizeConfig{});
    Mask solid = Mask::Zero(11, 11);
    solid.block(2, 2, 7, 7).setConstant(1);
    CHECK(refined == solid);
}

TEST_CASE("a holed 5x5 block is annihilated by the opening pass") {
    // Every pixel of a 5x5 block with a center hole touches either the hole
    // or the background, so the erosion step leaves nothing to recover.
    Mask m = Mask::Zero(9, 9);
    m.block(2, 2, 5, 5).setConstant(1);
    m(4, 4) = 0;
    CHECK(morph_refine(m, LocalizeConfig{}).sum() == 0);
}

TEST_CASE("masks after opening are a subset of the dilated original") {
    Rng rng(61);
    for (int trial = 0; trial < 200; ++trial) {
        Mask m = Mask::Zero(12, 12);
        for (Eigen::Index y = 0; y < 12; ++y)
            for (Eigen::Index x = 0; x < 12; ++x) m(y, x) = rng.uniform() < 0.4;
        Mask opened = dilate3x3(erode3x3(m));
        Mask dilated = dilate3x3(m);
        for (Eigen::Index y = 0; y < 12; ++y)
            for (Eigen::Index x = 0; x < 12; ++x)
                if (opened(y, x)) CHECK(dilated(y, x) == 1);
    }
}

TEST_CASE("extract_boxes on the hand masks") {
    LocalizeConfig cfg;
    CHECK(extract_boxes(Mask::Zero(4, 4), cfg).empty());

    Mask blob = Mask::Zero(10, 10);
    blob.block(2, 2, 4, 4).setConstant(1);  // rows 2..5, cols 2..5
    auto boxes = extract_boxes(blob, cfg);
    REQUIRE(boxes.size() == 1);
    CHECK(boxes[0] == Box{2, 2, 6, 6});

    Mask two = Mask::Zero(12, 12);
    two.block(1, 1, 3, 3).setConstant(1);
    two.block(7, 7, 4, 3).setConstant(1);
    auto pair = extract_boxes(two, cfg);
    REQUIRE(pair.size() == 2);
    CHECK(pair[0].area() >= pair[1].area());  // sorted by area descending
}

TEST_CASE("components below the minimum area are discarded") {
    LocalizeConfig cfg;  // min area 9
    Mask m = Mask::Zero(8, 8);
    m.block(0, 0, 2, 2).setConstant(1);  // area 4, dropped
    m.block(4, 4, 3, 3).setConstant(1);  // area 9, kept
    auto boxes = extract_boxes(m, cfg);
    REQUIRE(boxes.size() == 1);
    CHECK(boxes[0] == Box{4, 4, 7, 7});
}

TEST_CASE("diagonal pixels join through 8-connectivity") {
    LocalizeConfig cfg;
    cfg.min_component_area = 1;
    Mask m = mask_from({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
    auto boxes = extract_boxes(m, cfg);
    REQUIRE(boxes.size() == 1);
    CHECK(boxes[0] == Box{0, 0, 3, 3});
}

TEST_CASE("localize_video composes the chain over scored frames") {
    FrameSequence frames;
    CountGrid blob = CountGrid::Zero(16, 16);
    blob.block(4, 4, 5, 5).setConstant(6);
    frames.frames.push_back(frame_from(blob));
    frames.frames.push_back(frame_from(CountGrid::Zero(16, 16)));
    frames.frames.push_back(frame_from(blob));

    Vector scores(3);
    scores << 0.0, 1.0, 1.0;
    LocalizeConfig cfg;
    BoxSet out = localize_video(frames, scores, cfg);
    CHECK(out.count(0) == 0);  // below the score threshold
    CHECK(out.count(1) == 0);  // empty grid produces nothing
    REQUIRE(out.count(2) == 1);
    CHECK(out.at(2)[0] == Box{4, 4, 9, 9});

    Vector zeros = Vector::Zero(3);
    CHECK(localize_video(frames, zeros, cfg).empty());

    Vector wrong(2);
    wrong << 1, 1;
    CHECK_THROWS_AS(localize_video(frames, wrong, cfg), std::invalid_argument);
}

TEST_CASE("emitted boxes stay inside the grid with positive area") {
    Rng rng(67);
    LocalizeConfig cfg;
    cfg.min_component_area = 1;
    for (int trial = 0; trial < 100; ++trial) {
        CountGrid grid = CountGrid::Zero(14, 14);
        for (int drops = 0; drops < 30; ++drops)
            grid(rng.below(14), rng.below(14)) += static_cast<std::uint32_t>(1 + rng.below(9));
        EventFrame f = frame_from(grid);
        Mask mask = morph_refine(binarize(f, cfg), cfg);
        for (const Box& b : extract_boxes(mask, cfg)) {
            CHECK(b.area() > 0);
            CHECK(b.x_min >= 0);
            CHECK(b.y_min >= 0);
            CHECK(b.x_max <= 14);
            CHECK(b.y_max <= 14);
        }
    }
}
