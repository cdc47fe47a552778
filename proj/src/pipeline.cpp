#include "evadkit/pipeline.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "evadkit/common.hpp"

namespace fs = std::filesystem;

namespace evadkit {

namespace {

nlohmann::json config_json(const PipelineConfig& c) {
    nlohmann::json j;
    j["sim"] = {{"threshold", c.sim.threshold},
                {"threshold_noise", c.sim.threshold_noise},
                {"intensity_floor", c.sim.intensity_floor}};
    j["binning"] = {{"stride_frames", c.binning.stride_frames},
                    {"half_window_frames", c.binning.half_window_frames},
                    {"mean_fraction", c.binning.mean_fraction},
                    {"event_cap", c.binning.event_cap}};
    j["eds"] = {{"tau_d", c.eds.tau_d},
                {"ratio_high", c.eds.ratio_high},
                {"sample_count", c.eds.sample_count},
                {"seed", c.eds.seed}};
    j["eda"] = {{"lambda", c.eda.lambda},
                {"epsilon", c.eda.epsilon},
                {"enabled", c.eda_enabled},
                {"residual", c.eda_residual}};
    j["train"] = {{"learning_rate", c.train.learning_rate},
                  {"epochs", c.train.epochs},
                  {"batch_size", c.train.batch_size},
                  {"topk_fraction", c.train.topk_fraction},
                  {"kd_enabled", c.train.kd_enabled},
                  {"seed", c.train.seed},
                  {"use_adam", c.train.use_adam},
                  {"adam_beta1", c.train.adam_beta1},
                  {"adam_beta2", c.train.adam_beta2},
                  {"adam_eps", c.train.adam_eps},
                  {"kd",
                   {{"alpha", c.train.kd.alpha},
                    {"beta", c.train.kd.beta},
                    {"tau", c.train.kd.tau},
                    {"eps_std", c.train.kd.eps_std}}}};
    j["localize"] = {{"score_threshold", c.localize.score_threshold},
                     {"absolute_threshold", c.localize.absolute_threshold},
                     {"map_threshold", c.localize.map_threshold},
                     {"use_polarity_magnitude", c.localize.use_polarity_magnitude},
                     {"min_component_area", c.localize.min_component_area}};
    j["feature_noise_std"] = c.feature_noise_std;
    j["sampler"] = c.sampler;
    return j;
}

template <typename T>
void maybe(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

PipelineConfig config_from(const nlohmann::json& j) {
    PipelineConfig c;
    if (j.contains("sim")) {
        maybe(j["sim"], "threshold", c.sim.threshold);
        maybe(j["sim"], "threshold_noise", c.sim.threshold_noise);
        maybe(j["sim"], "intensity_floor", c.sim.intensity_floor);
    }
    if (j.contains("binning")) {
        maybe(j["binning"], "stride_frames", c.binning.stride_frames);
        maybe(j["binning"], "half_window_frames", c.binning.half_window_frames);
        maybe(j["binning"], "mean_fraction", c.binning.mean_fraction);
        maybe(j["binning"], "event_cap", c.binning.event_cap);
    }
    if (j.contains("eds")) {
        maybe(j["eds"], "tau_d", c.eds.tau_d);
        maybe(j["eds"], "ratio_high", c.eds.ratio_high);
        maybe(j["eds"], "sample_count", c.eds.sample_count);
        maybe(j["eds"], "seed", c.eds.seed);
    }
    if (j.contains("eda")) {
        maybe(j["eda"], "lambda", c.eda.lambda);
        maybe(j["eda"], "epsilon", c.eda.epsilon);
        maybe(j["eda"], "enabled", c.eda_enabled);
        maybe(j["eda"], "residual", c.eda_residual);
    }
    if (j.contains("train")) {
        maybe(j["train"], "learning_rate", c.train.learning_rate);
        maybe(j["train"], "epochs", c.train.epochs);
        maybe(j["train"], "batch_size", c.train.batch_size);
        maybe(j["train"], "topk_fraction", c.train.topk_fraction);
        maybe(j["train"], "kd_enabled", c.train.kd_enabled);
        maybe(j["train"], "seed", c.train.seed);
        maybe(j["train"], "use_adam", c.train.use_adam);
        maybe(j["train"], "adam_beta1", c.train.adam_beta1);
        maybe(j["train"], "adam_beta2", c.train.adam_beta2);
        maybe(j["train"], "adam_eps", c.train.adam_eps);
        if (j["train"].contains("kd")) {
            maybe(j["train"]["kd"], "alpha", c.train.kd.alpha);
            maybe(j["train"]["kd"], "beta", c.train.kd.beta);
            maybe(j["train"]["kd"], "tau", c.train.kd.tau);
            maybe(j["train"]["kd"], "eps_std", c.train.kd.eps_std);
        }
    }
    if (j.contains("localize")) {
        maybe(j["localize"], "score_threshold", c.localize.score_threshold);
        maybe(j["localize"], "absolute_threshold", c.localize.absolute_threshold);
        maybe(j["localize"], "map_threshold", c.localize.map_threshold);
        maybe(j["localize"], "use_polarity_magnitude", c.localize.use_polarity_magnitude);
        maybe(j["localize"], "min_component_area", c.localize.min_component_area);
    }
    maybe(j, "feature_noise_std", c.feature_noise_std);
    maybe(j, "sampler", c.sampler);
    return c;
}

}  // namespace

std::string config_to_json(const PipelineConfig& config) {
    return config_json(config).dump(2);
}

PipelineConfig config_from_json(const std::string& text) {
    try {
        return config_from(nlohmann::json::parse(text));
    } catch (const nlohmann::json::exception& e) {
        throw IoError(IoError::Kind::Parse, std::string("config: ") + e.what());
    }
}

void write_config(const PipelineConfig& config, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError(IoError::Kind::Missing, "cannot open for writing: " + path);
    out << config_to_json(config) << '\n';
}

PipelineConfig read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError(IoError::Kind::Missing, "cannot open: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return config_from_json(buf.str());
}

PipelineConfig benchmark_config() {
    PipelineConfig cfg;
    cfg.eds.sample_count = 32;
    cfg.train.learning_rate = 1.0;
    cfg.train.epochs = 1000;
    cfg.train.topk_fraction = 0.25;
    cfg.train.kd_enabled = true;
    cfg.feature_noise_std = 0.18;
    // Budgeted burst bins are sparse, so the spatial stage thresholds at one
    // event per cell instead of a fraction of the thinned maximum.
    cfg.localize.absolute_threshold = true;
    cfg.localize.map_threshold = 1.0;
    return cfg;
}

std::vector<BenchVideo> make_standard_benchmark(std::uint64_t seed) {
    std::vector<BenchVideo> videos;

    auto add = [&](const std::string& id, bool is_test, bool anomalous) {
        Rng rng(derive_seed(seed, "bench-" + id));
        SceneSpec scene;
        scene.width = 64;
        scene.height = 48;
        scene.duration_frames = 1536;
        scene.fps = 100.0;
        scene.background_seed = rng.next_u64();
        scene.background_base = 80.0;
        scene.background_amplitude = 8.0;

        ObjectSpec rect;
        rect.shape = ObjectSpec::Shape::Rectangle;
        rect.width = 10 + static_cast<int>(rng.below(5));
        rect.height = 8 + static_cast<int>(rng.below(4));
        rect.x0 = rng.uniform(4.0, 36.0);
        rect.y0 = rng.uniform(4.0, 12.0);
        rect.vx = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.35, 0.6);
        rect.vy = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.02, 0.08);
        rect.contrast = rng.uniform(60.0, 120.0);

        ObjectSpec disk;
        disk.shape = ObjectSpec::Shape::Disk;
        disk.radius = 4 + static_cast<int>(rng.below(3));
        disk.x0 = rng.uniform(10.0, 50.0);
        disk.y0 = rng.uniform(28.0, 38.0);
        disk.vx = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.35, 0.6);
        disk.vy = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.02, 0.08);
        disk.contrast = rng.uniform(60.0, 120.0);

        scene.objects = {rect, disk};

        BenchVideo video;
        video.id = id;
        video.is_test = is_test;
        if (anomalous) {
            std::size_t burst_object = rng.below(2);
            video.video_label = 1;
            video.class_id = burst_object == 0 ? 1 : 2;

            std::size_t start = 250 + rng.below(500);
            std::size_t length = 128 + rng.below(97);
            scene.anomalies.push_back(
                {start, start + length, burst_object, rng.uniform(3.0, 4.0)});
            if (rng.uniform() < 0.5) {
                std::size_t start2 = start + length + 200 + rng.below(200);
                std::size_t length2 = 128 + rng.below(97);
                if (start2 + length2 < scene.duration_frames)
                    scene.anomalies.push_back(
                        {start2, start2 + length2, burst_object, rng.uniform(3.0, 4.0)});
            }
        }
        video.scene = scene;
        videos.push_back(std::move(video));
    };

    for (int i = 0; i < 10; ++i) add("train_normal_" + std::to_string(i), false, false);
    for (int i = 0; i < 10; ++i) add("train_anom_" + std::to_string(i), false, true);
    for (int i = 0; i < 4; ++i) add("test_normal_" + std::to_string(i), true, false);
    for (int i = 0; i < 4; ++i) add("test_anom_" + std::to_string(i), true, true);
    return videos;
}

// A wide sensor keeps the burst sweep bounce-free, and the long interval
// pushes the per-video median up to burst level so the adaptive budget does
// not thin the anomalous bins.
SceneSpec make_localization_scene(bool with_anomaly) {
    SceneSpec scene;
    scene.width = 320;
    scene.height = 48;
    scene.duration_frames = 512;
    scene.fps = 100.0;
    scene.background_seed = 11;
    scene.background_base = 80.0;
    scene.background_amplitude = 0.0;  // uniform background keeps grids crisp

    ObjectSpec rect;
    rect.shape = ObjectSpec::Shape::Rectangle;
    rect.width = 12;
    rect.height = 10;
    rect.x0 = 4.0;
    rect.y0 = 18.0;
    rect.vx = 0.225;
    rect.vy = 0.0;
    rect.contrast = 100.0;
    scene.objects = {rect};

    if (with_anomaly) scene.anomalies.push_back({128, 416, 0, 4.0});
    return scene;
}

std::vector<int> bin_labels_from_frames(const std::vector<int>& frame_labels,
                                        const std::vector<Window>& windows, double fps) {
    const double us_per_frame = 1e6 / fps;
    std::vector<int> labels;
    labels.reserve(windows.size());
    for (const Window& w : windows) {
        auto frame = static_cast<std::size_t>(
            round_half_up(static_cast<double>(w.center_us) / us_per_frame));
        frame = std::min(frame, frame_labels.empty() ? 0 : frame_labels.size() - 1);
        labels.push_back(frame_labels.empty() ? 0 : frame_labels[frame]);
    }
    return labels;
}

BoxSet bin_gt_from_frames(const BoxSet& frame_gt, const std::vector<int>& frame_labels,
                          const std::vector<Window>& windows, double fps) {
    const double us_per_frame = 1e6 / fps;
    BoxSet out;
    for (std::size_t b = 0; b < windows.size(); ++b) {
        const Window& w = windows[b];
        auto first = static_cast<std::size_t>(
            std::ceil(static_cast<double>(w.start_us) / us_per_frame - 1e-9));
        bool any = false;
        Box u{0, 0, 0, 0};
        for (std::size_t f = first; f < frame_labels.size(); ++f) {
            double t = static_cast<double>(f) * us_per_frame;
            if (t >= static_cast<double>(w.end_us)) break;
            if (frame_labels[f] == 0) continue;
            auto it = frame_gt.find(f);
            if (it == frame_gt.end()) continue;
            for (const Box& box : it->second) {
                if (!any) {
                    u = box;
                    any = true;
                } else {
                    u.x_min = std::min(u.x_min, box.x_min);
                    u.y_min = std::min(u.y_min, box.y_min);
                    u.x_max = std::max(u.x_max, box.x_max);
                    u.y_max = std::max(u.y_max, box.y_max);
                }
            }
        }
        if (any) out[b].push_back(u);
    }
    return out;
}

VideoArtifacts build_video(const BenchVideo& video, const PipelineConfig& config,
                           std::uint64_t master_seed) {
    VideoArtifacts art;
    RenderedScene scene = render_scene(video.scene);
    art.stream = frames_to_events(scene.frames, config.sim,
                                  derive_seed(master_seed, "events-" + video.id),
                                  video.scene.fps);

    std::vector<Window> windows = make_windows(art.stream, config.binning);
    art.frames = rasterize(art.stream, windows, config.binning);
    art.bin_labels = bin_labels_from_frames(scene.labels, windows, video.scene.fps);
    art.bin_gt = bin_gt_from_frames(scene.gt_boxes, scene.labels, windows, video.scene.fps);
    art.source_labels = std::move(scene.labels);
    art.source_gt = std::move(scene.gt_boxes);

    VideoData& data = art.data;
    data.id = video.id;
    data.video_label = video.video_label;
    data.class_id = video.class_id;
    data.is_test = video.is_test;
    data.frame_labels = art.bin_labels;
    data.features_rgb = features_from_frames(art.frames);
    data.features_event = with_feature_noise(data.features_rgb, config.feature_noise_std,
                                             derive_seed(master_seed, "noise-" + video.id));
    data.center_us.reserve(art.frames.frames.size());
    for (const EventFrame& f : art.frames.frames) data.center_us.push_back(f.center_time_us);

    std::vector<std::uint64_t> raw_counts;
    raw_counts.reserve(art.frames.frames.size());
    for (const EventFrame& f : art.frames.frames) raw_counts.push_back(f.raw_count);
    data.density = density_from_counts(raw_counts).d;
    return art;
}

SampleSet sample_video(const VideoData& video, const PipelineConfig& config,
                       std::uint64_t master_seed) {
    if (config.sampler == "uniform")
        return uniform_sample(video.density.size(), config.eds.sample_count);
    EDSConfig eds = config.eds;
    eds.seed = derive_seed(master_seed, "eds-" + video.id);
    DensityProfile profile{video.density, true};
    return eds_sample(profile, eds);
}

namespace {

Dataset assemble_dataset(const std::vector<VideoArtifacts>& artifacts) {
    Dataset data;
    for (const VideoArtifacts& a : artifacts) data.videos.push_back(a.data);
    if (!data.videos.empty()) data.feature_dim = data.videos[0].features_event.cols();
    Eigen::Index classes = 2;
    for (const VideoData& v : data.videos)
        classes = std::max<Eigen::Index>(classes, v.class_id + 1);
    data.num_classes = classes;
    return data;
}

Vector centers_vector(const VideoData& v) {
    Vector t(static_cast<Eigen::Index>(v.center_us.size()));
    for (Eigen::Index i = 0; i < t.size(); ++i)
        t[i] = static_cast<double>(v.center_us[static_cast<std::size_t>(i)]);
    return t;
}

void attach_teacher_in_memory(Dataset& data, const ToyModel& teacher) {
    for (VideoData& v : data.videos) {
        if (v.is_test) continue;
        ForwardResult fwd = forward(teacher, v.features_rgb, centers_vector(v), v.density);
        v.teacher_scores = std::move(fwd.scores);
        v.teacher_logits = std::move(fwd.logits);
    }
}

TrainDataView make_view(const Dataset& data, const std::vector<SampleSet>& samples, bool rgb,
                        const PipelineConfig& cfg, bool eda_on) {
    TrainDataView view;
    view.data = &data;
    view.samples = &samples;
    view.use_rgb_features = rgb;
    view.eda = cfg.eda;
    view.eda_enabled = eda_on;
    view.eda_residual = cfg.eda_residual;
    return view;
}

double pooled_tiou(const std::vector<std::pair<BoxSet, BoxSet>>& pred_gt,
                   const std::vector<std::vector<std::uint64_t>>& anomalous) {
    double weighted = 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < pred_gt.size(); ++i) {
        if (anomalous[i].empty()) continue;
        double v = tiou(pred_gt[i].first, pred_gt[i].second, anomalous[i]);
        weighted += v * static_cast<double>(anomalous[i].size());
        total += static_cast<double>(anomalous[i].size());
    }
    return total > 0.0 ? weighted / total : 0.0;
}

}  // namespace

AblationResult run_ablation(std::uint64_t seed, const PipelineConfig& config) {
    std::vector<BenchVideo> bench = make_standard_benchmark(seed);
    std::vector<VideoArtifacts> artifacts(bench.size());
    parallel_for(bench.size(),
                 [&](std::size_t i) { artifacts[i] = build_video(bench[i], config, seed); });

    Dataset data = assemble_dataset(artifacts);

    std::vector<SampleSet> eds_samples(data.videos.size());
    std::vector<SampleSet> uniform_samples(data.videos.size());
    for (std::size_t i = 0; i < data.videos.size(); ++i) {
        if (data.videos[i].is_test) continue;
        PipelineConfig eds_cfg = config;
        eds_cfg.sampler = "eds";
        eds_samples[i] = sample_video(data.videos[i], eds_cfg, seed);
        PipelineConfig uni_cfg = config;
        uni_cfg.sampler = "uniform";
        uniform_samples[i] = sample_video(data.videos[i], uni_cfg, seed);
    }

    TrainConfig tc = config.train;
    tc.kd_enabled = false;

    AblationResult result;
    result.auc_baseline =
        train(make_view(data, uniform_samples, false, config, false), tc).metrics.back().auc;
    result.auc_eds =
        train(make_view(data, eds_samples, false, config, false), tc).metrics.back().auc;
    result.auc_eds_eda =
        train(make_view(data, eds_samples, false, config, true), tc).metrics.back().auc;

    // Full configuration distills from a teacher trained on the clean modality.
    TrainResult teacher = train(make_view(data, eds_samples, true, config, true), tc);
    attach_teacher_in_memory(data, teacher.model);
    TrainConfig student_tc = config.train;
    student_tc.kd_enabled = true;
    result.auc_full =
        train(make_view(data, eds_samples, false, config, true), student_tc).metrics.back().auc;
    return result;
}

std::string format_report(const DemoReport& report, const PipelineConfig& config) {
    std::ostringstream out;
    out << "evadkit demo report\n";
    out << "seed=" << report.seed << "\n";
    out << "train_videos=" << report.train_videos << "\n";
    out << "test_videos=" << report.test_videos << "\n";
    out << "teacher_auc=" << format_double(report.teacher_auc) << "\n";
    out << "auc=" << format_double(report.auc) << "\n";
    out << "tiou=" << format_double(report.tiou) << "\n";
    out << "\n[config]\n" << config_to_json(config) << "\n";
    return out.str();
}

DemoReport run_demo(const std::string& out_dir, std::uint64_t seed,
                    const PipelineConfig& config) {
    fs::create_directories(out_dir);
    const fs::path root(out_dir);
    write_config(config, (root / "config.json").string());

    std::vector<BenchVideo> bench = make_standard_benchmark(seed);
    std::vector<VideoArtifacts> artifacts(bench.size());

    fs::create_directories(root / "scenes");
    parallel_for(bench.size(), [&](std::size_t i) {
        const BenchVideo& video = bench[i];
        artifacts[i] = build_video(video, config, seed);
        const VideoArtifacts& art = artifacts[i];

        write_scene_file(video.scene, (root / "scenes" / (video.id + ".cfg")).string());

        fs::path sim_dir = root / "sim" / video.id;
        fs::create_directories(sim_dir);
        write_evs_file(art.stream, (sim_dir / "events.evs").string());
        write_labels_file(art.source_labels, (sim_dir / "labels.txt").string());
        write_boxes_file(art.source_gt, (sim_dir / "gt_boxes.csv").string());

        fs::path frame_dir = root / "frames" / video.id;
        fs::create_directories(frame_dir);
        write_frames_tensor(art.frames, (frame_dir / "frames.tens").string());
        write_frame_meta(art.frames, (frame_dir / "frames_meta.csv").string());
        write_labels_file(art.bin_labels, (frame_dir / "bin_labels.txt").string());
        write_boxes_file(art.bin_gt, (frame_dir / "gt_bins.csv").string());
    });

    // Sampling stage, training split only.
    for (std::size_t i = 0; i < bench.size(); ++i) {
        if (bench[i].is_test) continue;
        fs::path dir = root / "samples" / bench[i].id;
        fs::create_directories(dir);
        write_samples_file(sample_video(artifacts[i].data, config, seed),
                           (dir / "samples.txt").string());
    }

    // The dataset travels through disk so the stage handoff is the real one.
    write_dataset(assemble_dataset(artifacts), (root / "dataset").string());
    Dataset data = read_dataset((root / "dataset").string());

    std::vector<SampleSet> samples(data.videos.size());
    for (std::size_t i = 0; i < data.videos.size(); ++i) {
        if (data.videos[i].is_test) continue;
        samples[i] =
            read_samples_file((root / "samples" / data.videos[i].id / "samples.txt").string());
    }

    TrainConfig teacher_tc = config.train;
    teacher_tc.kd_enabled = false;
    TrainResult teacher = train(make_view(data, samples, true, config, config.eda_enabled),
                                teacher_tc);
    fs::create_directories(root / "teacher");
    write_model(teacher.model, (root / "teacher" / "model.json").string());
    write_metrics(teacher.metrics, (root / "teacher" / "metrics.csv").string());

    for (const VideoData& v : data.videos) {
        if (v.is_test) continue;
        ForwardResult fwd = forward(teacher.model, v.features_rgb, centers_vector(v), v.density);
        fs::path dir = root / "teacher_out" / v.id;
        fs::create_directories(dir);
        write_scores_file(fwd.scores, (dir / "scores.csv").string());
        write_matrix(fwd.logits, (dir / "logits.fmat").string());
    }

    attach_teacher_outputs(data, (root / "teacher_out").string());
    TrainResult student =
        train(make_view(data, samples, false, config, config.eda_enabled), config.train);
    fs::create_directories(root / "student");
    write_model(student.model, (root / "student" / "model.json").string());
    write_metrics(student.metrics, (root / "student" / "metrics.csv").string());

    // Score and localize the test split, then evaluate.
    std::vector<double> pooled_scores;
    std::vector<int> pooled_labels;
    std::vector<std::pair<BoxSet, BoxSet>> pred_gt;
    std::vector<std::vector<std::uint64_t>> anomalous;

    for (std::size_t i = 0; i < data.videos.size(); ++i) {
        const VideoData& v = data.videos[i];
        if (!v.is_test) continue;
        Vector s = infer(student.model, v.features_event, centers_vector(v), v.density);
        fs::path sdir = root / "scores" / v.id;
        fs::create_directories(sdir);
        write_scores_file(s, (sdir / "scores.csv").string());

        for (Eigen::Index k = 0; k < s.size(); ++k) {
            pooled_scores.push_back(s[k]);
            pooled_labels.push_back(v.frame_labels[static_cast<std::size_t>(k)]);
        }

        // artifacts order matches data.videos order (both follow the index).
        const VideoArtifacts& art = artifacts[i];
        BoxSet boxes = localize_video(art.frames, s, config.localize);
        fs::path bdir = root / "boxes" / v.id;
        fs::create_directories(bdir);
        write_boxes_file(boxes, (bdir / "boxes.csv").string());

        std::vector<std::uint64_t> anom;
        for (std::size_t k = 0; k < art.bin_labels.size(); ++k)
            if (art.bin_labels[k] != 0) anom.push_back(k);
        pred_gt.emplace_back(std::move(boxes), art.bin_gt);
        anomalous.push_back(std::move(anom));
    }

    DemoReport report;
    report.seed = seed;
    for (const VideoData& v : data.videos) (v.is_test ? report.test_videos : report.train_videos)++;
    report.teacher_auc = teacher.metrics.back().auc;
    LabeledScores pooled;
    pooled.scores = Eigen::Map<const Vector>(pooled_scores.data(),
                                             static_cast<Eigen::Index>(pooled_scores.size()));
    pooled.labels = pooled_labels;
    report.auc = auc(pooled);
    report.tiou = pooled_tiou(pred_gt, anomalous);

    std::ofstream rep(root / "report.txt");
    rep << format_report(report, config);
    return report;
}

}  // namespace evadkit
