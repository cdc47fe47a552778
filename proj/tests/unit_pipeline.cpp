#include <doctest.h>

#include "evadkit/pipeline.hpp"

using namespace evadkit;

TEST_CASE("every pipeline default equals the module default") {
    PipelineConfig cfg;
    CHECK(cfg.sim.threshold == 0.15);
    CHECK(cfg.sim.threshold_noise == 0.03);
    CHECK(cfg.sim.intensity_floor == 1.0);
    CHECK(cfg.binning.stride_frames == 16);
    CHECK(cfg.binning.half_window_frames == 8);
    CHECK(cfg.binning.mean_fraction == 0.1);
    CHECK(cfg.binning.event_cap == 10000);
    CHECK(cfg.eds.tau_d == 0.95);
    CHECK(cfg.eds.ratio_high == 0.8);
    CHECK(cfg.eds.sample_count == 256);
    CHECK(cfg.eda.lambda == 1.0);
    CHECK(cfg.eda.epsilon == 1e-6);
    CHECK(cfg.train.learning_rate == 2e-5);
    CHECK(cfg.train.epochs == 10);
    CHECK(cfg.train.batch_size == 128);
    CHECK(cfg.train.topk_fraction == 1.0 / 16.0);
    CHECK(cfg.train.kd.alpha == 0.1);
    CHECK(cfg.train.kd.beta == 9.0);
    CHECK(cfg.train.kd.tau == 2.0);
    CHECK(cfg.localize.score_threshold == 0.5);
    CHECK(cfg.localize.map_threshold == 0.5);
    CHECK_FALSE(cfg.localize.absolute_threshold);
    CHECK(cfg.localize.min_component_area == 9);
}

TEST_CASE("config json round-trips every field") {
    PipelineConfig cfg;
    cfg.sim.threshold = 0.21;
    cfg.binning.event_cap = 1234;
    cfg.eds.sample_count = 48;
    cfg.eda.lambda = 0.75;
    cfg.eda_enabled = false;
    cfg.train.learning_rate = 0.03;
    cfg.train.epochs = 77;
    cfg.train.kd_enabled = true;
    cfg.train.kd.beta = 3.5;
    cfg.localize.map_threshold = 0.4;
    cfg.feature_noise_std = 0.09;
    cfg.sampler = "uniform";

    PipelineConfig back = config_from_json(config_to_json(cfg));
    CHECK(back.sim.threshold == cfg.sim.threshold);
    CHECK(back.binning.event_cap == cfg.binning.event_cap);
    CHECK(back.eds.sample_count == cfg.eds.sample_count);
    CHECK(back.eda.lambda == cfg.eda.lambda);
    CHECK(back.eda_enabled == cfg.eda_enabled);
    CHECK(back.train.learning_rate == cfg.train.learning_rate);
    CHECK(back.train.epochs == cfg.train.epochs);
    CHECK(back.train.kd_enabled == cfg.train.kd_enabled);
    CHECK(back.train.kd.beta == cfg.train.kd.beta);
    CHECK(back.localize.map_threshold == cfg.localize.map_threshold);
    CHECK(back.feature_noise_std == cfg.feature_noise_std);
    CHECK(back.sampler == cfg.sampler);
}

TEST_CASE("bin labels take the window's center source frame") {
    std::vector<Window> windows = {{0, 160000, 80000}, {160000, 320000, 240000}};
    std::vector<int> labels(32, 0);
    for (int f = 20; f < 32; ++f) labels[static_cast<std::size_t>(f)] = 1;
    auto bins = bin_labels_from_frames(labels, windows, 100.0);
    REQUIRE(bins.size() == 2);
    CHECK(bins[0] == 0);  // center frame 8
    CHECK(bins[1] == 1);  // center frame 24
}

TEST_CASE("bin ground truth unions source boxes over the window") {
    std::vector<Window> windows = {{0, 160000, 80000}};
    std::vector<int> labels(16, 0);
    labels[4] = 1;
    labels[5] = 1;
    BoxSet gt;
    gt[4] = {Box{2, 2, 6, 6}};
    gt[5] = {Box{4, 3, 8, 7}};
    gt[9] = {Box{100, 100, 110, 110}};  // not anomalous, ignored
    BoxSet bins = bin_gt_from_frames(gt, labels, windows, 100.0);
    REQUIRE(bins.count(0) == 1);
    CHECK(bins.at(0)[0] == Box{2, 2, 8, 7});
}

TEST_CASE("the standard benchmark is deterministic and balanced") {
    auto a = make_standard_benchmark(7);
    auto b = make_standard_benchmark(7);
    REQUIRE(a.size() == 28);
    int train_count = 0, test_count = 0, anomalous = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].id == b[i].id);
        CHECK(a[i].scene.objects.size() == b[i].scene.objects.size());
        CHECK(a[i].scene.anomalies.size() == b[i].scene.anomalies.size());
        (a[i].is_test ? test_count : train_count)++;
        anomalous += a[i].video_label;
        if (a[i].video_label == 1) {
            CHECK_FALSE(a[i].scene.anomalies.empty());
            CHECK(a[i].class_id >= 1);
        } else {
            CHECK(a[i].scene.anomalies.empty());
            CHECK(a[i].class_id == 0);
        }
        validate_scene(a[i].scene);
    }
    CHECK(train_count == 20);
    CHECK(test_count == 8);
    CHECK(anomalous == 14);
    auto c = make_standard_benchmark(8);
    CHECK(c[0].scene.background_seed != a[0].scene.background_seed);
}

TEST_CASE("sampler selection honors the configured mode") {
    PipelineConfig cfg;
    cfg.eds.sample_count = 4;
    VideoData v;
    v.id = "v";
    v.density = Eigen::VectorXd::Constant(10, 0.1);
    for (int i = 0; i < 10; ++i) v.center_us.push_back(static_cast<std::uint64_t>(i) * 1000);

    cfg.sampler = "uniform";
    SampleSet uni = sample_video(v, cfg, 7);
    CHECK(uni.indices == uniform_sample(10, 4).indices);

    cfg.sampler = "eds";
    SampleSet eds1 = sample_video(v, cfg, 7);
    SampleSet eds2 = sample_video(v, cfg, 7);
    CHECK(eds1.indices == eds2.indices);
    CHECK(eds1.indices.size() == 4);
}

TEST_CASE("burst intervals carry strictly more events than normal bins") {
    PipelineConfig cfg;
    auto bench = make_standard_benchmark(7);
    // first anomalous training video of the standard benchmark
    const BenchVideo* video = nullptr;
    for (const auto& b : bench)
        if (!b.is_test && b.video_label == 1) {
            video = &b;
            break;
        }
    REQUIRE(video != nullptr);
    VideoArtifacts art = build_video(*video, cfg, 7);

    double anom_sum = 0.0, anom_n = 0.0, normal_sum = 0.0, normal_n = 0.0;
    for (std::size_t i = 0; i < art.frames.frames.size(); ++i) {
        if (art.bin_labels[i] != 0) {
            anom_sum += static_cast<double>(art.frames.frames[i].raw_count);
            anom_n += 1.0;
        } else {
            normal_sum += static_cast<double>(art.frames.frames[i].raw_count);
            normal_n += 1.0;
        }
    }
    REQUIRE(anom_n > 0);
    REQUIRE(normal_n > 0);
    CHECK(anom_sum / anom_n > normal_sum / normal_n);

    // frame sequence invariants: centers strictly increasing, windows disjoint
    for (std::size_t i = 1; i < art.frames.frames.size(); ++i) {
        CHECK(art.frames.frames[i].center_time_us > art.frames.frames[i - 1].center_time_us);
        CHECK(art.frames.frames[i].window_start_us >= art.frames.frames[i - 1].window_end_us);
    }
}

TEST_CASE("the localization scenes are valid and only one carries an anomaly") {
    SceneSpec anom = make_localization_scene(true);
    SceneSpec normal = make_localization_scene(false);
    validate_scene(anom);
    validate_scene(normal);
    CHECK(anom.anomalies.size() == 1);
    CHECK(normal.anomalies.empty());
    CHECK(anom.objects.size() == 1);
}
