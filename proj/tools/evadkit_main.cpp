// evadkit command line: every pipeline stage as a subcommand plus an
// end-to-end demo on the standard synthetic benchmark.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "evadkit/pipeline.hpp"

namespace fs = std::filesystem;
using namespace evadkit;

namespace {

// One stage-specific exit code per subcommand; errors print a single
// machine-readable line on stderr.
enum ExitCode {
    kSimulate = 10,
    kFrame = 11,
    kSample = 12,
    kTrain = 13,
    kScore = 14,
    kLocalize = 15,
    kEval = 16,
    kDemo = 17,
};

int fail(const char* stage, int code, const std::exception& e) {
    std::cerr << "error: " << stage << ": " << e.what() << "\n";
    return code;
}

PipelineConfig load_config(const std::string& config_path) {
    if (config_path.empty()) return PipelineConfig{};
    return read_config_file(config_path);
}

std::vector<std::string> sorted_subdirs(const std::string& dir) {
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_directory()) names.push_back(entry.path().filename().string());
    std::sort(names.begin(), names.end());
    return names;
}

Vector centers_of(const VideoData& v) {
    Vector t(static_cast<Eigen::Index>(v.center_us.size()));
    for (Eigen::Index i = 0; i < t.size(); ++i)
        t[i] = static_cast<double>(v.center_us[static_cast<std::size_t>(i)]);
    return t;
}

int run_simulate(const std::string& spec_path, const std::string& out,
                 const std::string& config_path, std::uint64_t seed) {
    try {
        PipelineConfig cfg = load_config(config_path);
        SceneSpec scene = read_scene_file(spec_path);
        RenderedScene rendered = render_scene(scene);
        EventStream stream = frames_to_events(rendered.frames, cfg.sim, seed, scene.fps);

        fs::create_directories(out);
        write_config(cfg, (fs::path(out) / "config.json").string());
        write_evs_file(stream, (fs::path(out) / "events.evs").string());
        write_labels_file(rendered.labels, (fs::path(out) / "labels.txt").string());
        write_boxes_file(rendered.gt_boxes, (fs::path(out) / "gt_boxes.csv").string());
        return 0;
    } catch (const std::exception& e) {
        return fail("simulate", kSimulate, e);
    }
}

int run_frame(const std::string& events_path, const std::string& out,
              const std::string& config_path, const std::string& labels_path,
              const std::string& gt_path, bool pgm) {
    try {
        PipelineConfig cfg = load_config(config_path);
        EventStream stream = read_evs_file(events_path);
        std::vector<Window> windows = make_windows(stream, cfg.binning);
        FrameSequence frames = rasterize(stream, windows, cfg.binning);

        fs::create_directories(out);
        write_config(cfg, (fs::path(out) / "config.json").string());
        write_frames_tensor(frames, (fs::path(out) / "frames.tens").string());
        write_frame_meta(frames, (fs::path(out) / "frames_meta.csv").string());

        if (!labels_path.empty()) {
            std::vector<int> labels = read_labels_file(labels_path);
            std::vector<int> bin_labels =
                bin_labels_from_frames(labels, windows, stream.source_fps);
            write_labels_file(bin_labels, (fs::path(out) / "bin_labels.txt").string());
            if (!gt_path.empty()) {
                BoxSet gt = read_boxes_file(gt_path);
                write_boxes_file(bin_gt_from_frames(gt, labels, windows, stream.source_fps),
                                 (fs::path(out) / "gt_bins.csv").string());
            }
        }
        if (pgm) {
            fs::path dir = fs::path(out) / "pgm";
            fs::create_directories(dir);
            char name[32];
            for (std::size_t i = 0; i < frames.frames.size(); ++i) {
                std::snprintf(name, sizeof(name), "frame_%05zu.pgm", i);
                write_pgm(frames.frames[i].counts, (dir / name).string());
            }
        }
        return 0;
    } catch (const std::exception& e) {
        return fail("frame", kFrame, e);
    }
}

int run_sample(const std::string& frames_dir, const std::string& out,
               const std::string& config_path, const std::string& sampler, std::uint64_t seed) {
    try {
        PipelineConfig cfg = load_config(config_path);
        if (!sampler.empty()) cfg.sampler = sampler;

        std::vector<FrameMetaRow> meta =
            read_frame_meta((fs::path(frames_dir) / "frames_meta.csv").string());
        std::vector<std::uint64_t> raw;
        raw.reserve(meta.size());
        for (const FrameMetaRow& r : meta) raw.push_back(r.raw_count);

        SampleSet samples;
        if (cfg.sampler == "uniform") {
            samples = uniform_sample(static_cast<Eigen::Index>(raw.size()), cfg.eds.sample_count);
        } else {
            DensityProfile profile = density_from_counts(raw);
            EDSConfig eds = cfg.eds;
            eds.seed = seed;
            samples = eds_sample(profile, eds);
        }
        if (samples.truncated)
            std::cerr << "warning: sample: requested " << cfg.eds.sample_count
                      << " samples from " << raw.size() << " frames; truncated\n";

        fs::create_directories(out);
        write_config(cfg, (fs::path(out) / "config.json").string());
        write_samples_file(samples, (fs::path(out) / "samples.txt").string());
        return 0;
    } catch (const std::exception& e) {
        return fail("sample", kSample, e);
    }
}

int run_train(const std::string& data_dir, const std::string& out,
              const std::string& config_path, const std::string& modality,
              const std::string& teacher_dir, const std::string& samples_dir,
              std::optional<bool> kd_flag, std::optional<std::uint64_t> seed) {
    try {
        PipelineConfig cfg = load_config(config_path);
        if (kd_flag) cfg.train.kd_enabled = *kd_flag;
        if (seed) cfg.train.seed = *seed;

        Dataset data = read_dataset(data_dir);
        if (cfg.train.kd_enabled) {
            if (teacher_dir.empty())
                throw IoError(IoError::Kind::Missing,
                              "distillation enabled but no --teacher directory given");
            attach_teacher_outputs(data, teacher_dir);
        }

        std::vector<SampleSet> samples(data.videos.size());
        if (!samples_dir.empty()) {
            for (std::size_t i = 0; i < data.videos.size(); ++i) {
                fs::path p = fs::path(samples_dir) / data.videos[i].id / "samples.txt";
                if (fs::exists(p)) samples[i] = read_samples_file(p.string());
            }
        }

        TrainDataView view;
        view.data = &data;
        view.samples = &samples;
        view.use_rgb_features = modality == "rgb";
        view.eda = cfg.eda;
        view.eda_enabled = cfg.eda_enabled;
        view.eda_residual = cfg.eda_residual;

        TrainResult result = train(view, cfg.train);
        fs::create_directories(out);
        write_config(cfg, (fs::path(out) / "config.json").string());
        write_model(result.model, (fs::path(out) / "model.json").string());
        write_metrics(result.metrics, (fs::path(out) / "metrics.csv").string());
        return 0;
    } catch (const std::exception& e) {
        return fail("train", kTrain, e);
    }
}

int run_score(const std::string& model_path, const std::string& data_dir, const std::string& out,
              const std::string& modality, const std::string& split, bool dump_logits) {
    try {
        ToyModel model = read_model(model_path);
        Dataset data = read_dataset(data_dir);
        fs::create_directories(out);
        for (const VideoData& v : data.videos) {
            if (split == "train" && v.is_test) continue;
            if (split == "test" && !v.is_test) continue;
            const Matrix& features = modality == "rgb" ? v.features_rgb : v.features_event;
            ForwardResult fwd = forward(model, features, centers_of(v), v.density);
            fs::path dir = fs::path(out) / v.id;
            fs::create_directories(dir);
            write_scores_file(fwd.scores, (dir / "scores.csv").string());
            if (dump_logits) write_matrix(fwd.logits, (dir / "logits.fmat").string());
        }
        return 0;
    } catch (const std::exception& e) {
        return fail("score", kScore, e);
    }
}

int run_localize(const std::string& frames_dir, const std::string& scores_path,
                 const std::string& out, const std::string& config_path, bool masks) {
    try {
        PipelineConfig cfg = load_config(config_path);
        FrameSequence frames =
            read_frames_tensor((fs::path(frames_dir) / "frames.tens").string());
        load_frame_meta((fs::path(frames_dir) / "frames_meta.csv").string(), frames);
        Vector scores = read_scores_file(scores_path);

        BoxSet boxes = localize_video(frames, scores, cfg.localize);
        fs::create_directories(out);
        write_config(cfg, (fs::path(out) / "config.json").string());
        write_boxes_file(boxes, (fs::path(out) / "boxes.csv").string());

        if (masks) {
            fs::path dir = fs::path(out) / "masks";
            fs::create_directories(dir);
            char name[32];
            for (std::size_t i = 0; i < frames.frames.size(); ++i) {
                if (scores[static_cast<Eigen::Index>(i)] < cfg.localize.score_threshold) continue;
                Mask mask = morph_refine(binarize(frames.frames[i], cfg.localize), cfg.localize);
                CountGrid grid = (mask.cast<std::uint32_t>() * 255u).eval();
                std::snprintf(name, sizeof(name), "mask_%05zu.pgm", i);
                write_pgm(grid, (dir / name).string());
            }
        }
        return 0;
    } catch (const std::exception& e) {
        return fail("localize", kLocalize, e);
    }
}

int run_eval(const std::string& scores_dir, const std::string& labels_dir,
             const std::string& pred_boxes_dir, const std::string& gt_boxes_dir) {
    try {
        std::vector<double> pooled_scores;
        std::vector<int> pooled_labels;
        double tiou_weighted = 0.0, tiou_total = 0.0;

        for (const std::string& id : sorted_subdirs(scores_dir)) {
            Vector scores =
                read_scores_file((fs::path(scores_dir) / id / "scores.csv").string());
            fs::path label_file = fs::path(labels_dir) / id / "bin_labels.txt";
            if (!fs::exists(label_file)) label_file = fs::path(labels_dir) / id / "labels.txt";
            std::vector<int> labels = read_labels_file(label_file.string());
            if (static_cast<Eigen::Index>(labels.size()) != scores.size())
                throw IoError(IoError::Kind::Parse, id + ": score/label length mismatch");
            for (Eigen::Index i = 0; i < scores.size(); ++i) {
                pooled_scores.push_back(scores[i]);
                pooled_labels.push_back(labels[static_cast<std::size_t>(i)]);
            }

            if (!pred_boxes_dir.empty() && !gt_boxes_dir.empty()) {
                std::vector<std::uint64_t> anomalous;
                for (std::size_t i = 0; i < labels.size(); ++i)
                    if (labels[i] != 0) anomalous.push_back(i);
                if (anomalous.empty()) continue;
                BoxSet pred =
                    read_boxes_file((fs::path(pred_boxes_dir) / id / "boxes.csv").string());
                fs::path gt_file = fs::path(gt_boxes_dir) / id / "gt_bins.csv";
                if (!fs::exists(gt_file)) gt_file = fs::path(gt_boxes_dir) / id / "boxes.csv";
                BoxSet gt = read_boxes_file(gt_file.string());
                tiou_weighted +=
                    tiou(pred, gt, anomalous) * static_cast<double>(anomalous.size());
                tiou_total += static_cast<double>(anomalous.size());
            }
        }

        LabeledScores pooled;
        pooled.scores = Eigen::Map<const Vector>(pooled_scores.data(),
                                                 static_cast<Eigen::Index>(pooled_scores.size()));
        pooled.labels = pooled_labels;
        std::cout << "auc=" << format_double(auc(pooled)) << "\n";
        if (!pred_boxes_dir.empty() && !gt_boxes_dir.empty())
            std::cout << "tiou=" << format_double(tiou_total > 0.0 ? tiou_weighted / tiou_total : 0.0)
                      << "\n";
        return 0;
    } catch (const std::exception& e) {
        return fail("eval", kEval, e);
    }
}

int run_demo_cmd(const std::string& out, const std::string& config_path, std::uint64_t seed) {
    try {
        PipelineConfig cfg = config_path.empty() ? benchmark_config() : read_config_file(config_path);
        DemoReport report = run_demo(out, seed, cfg);
        std::cout << "teacher_auc=" << format_double(report.teacher_auc) << "\n";
        std::cout << "auc=" << format_double(report.auc) << "\n";
        std::cout << "tiou=" << format_double(report.tiou) << "\n";
        return 0;
    } catch (const std::exception& e) {
        return fail("demo", kDemo, e);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"event-stream anomaly detection toolkit"};
    app.require_subcommand(1);

    std::string spec_path, events_path, frames_dir, scores_path, data_dir, model_path;
    std::string labels_path, gt_path, teacher_dir, samples_dir, labels_dir, pred_boxes_dir;
    std::string gt_boxes_dir, scores_dir;
    std::string out, config_path;
    std::string modality = "event", split = "all", sampler;
    std::uint64_t seed = 7;
    bool pgm = false, dump_logits = false, masks = false;
    std::optional<bool> kd_flag;
    std::optional<std::uint64_t> train_seed;

    auto* simulate = app.add_subcommand("simulate", "render a scene spec into an event stream");
    simulate->add_option("--spec", spec_path, "scene config file")->required();
    simulate->add_option("--out", out, "output directory")->required();
    simulate->add_option("--config", config_path, "pipeline config JSON");
    simulate->add_option("--seed", seed, "event generation seed");

    auto* frame = app.add_subcommand("frame", "adaptive event frame generation");
    frame->add_option("--events", events_path, "EVS stream")->required();
    frame->add_option("--out", out, "output directory")->required();
    frame->add_option("--config", config_path, "pipeline config JSON");
    frame->add_option("--labels", labels_path, "per source frame labels, adds bin labels");
    frame->add_option("--gt-boxes", gt_path, "per source frame GT boxes, adds bin GT");
    frame->add_flag("--pgm", pgm, "dump per-frame PGM previews");

    auto* sample = app.add_subcommand("sample", "density-aware frame sampling");
    sample->add_option("--frames", frames_dir, "frame stage directory")->required();
    sample->add_option("--out", out, "output directory")->required();
    sample->add_option("--config", config_path, "pipeline config JSON");
    sample->add_option("--sampler", sampler, "eds|uniform");
    sample->add_option("--seed", seed, "sampling seed");

    auto* train_cmd = app.add_subcommand("train", "fit the scoring model");
    train_cmd->add_option("--data", data_dir, "dataset directory")->required();
    train_cmd->add_option("--out", out, "output directory")->required();
    train_cmd->add_option("--config", config_path, "pipeline config JSON");
    train_cmd->add_option("--modality", modality, "rgb|event feature source");
    train_cmd->add_option("--teacher", teacher_dir, "teacher output directory");
    train_cmd->add_option("--samples", samples_dir, "per-video sample sets");
    train_cmd->add_flag("--kd,!--no-kd", kd_flag, "toggle distillation");
    train_cmd->add_option("--seed", train_seed, "training seed");

    auto* score = app.add_subcommand("score", "run inference over a dataset");
    score->add_option("--model", model_path, "model JSON")->required();
    score->add_option("--data", data_dir, "dataset directory")->required();
    score->add_option("--out", out, "output directory")->required();
    score->add_option("--modality", modality, "rgb|event feature source");
    score->add_option("--split", split, "train|test|all");
    score->add_flag("--logits", dump_logits, "also dump class logits");

    auto* localize = app.add_subcommand("localize", "training-free spatial localization");
    localize->add_option("--frames", frames_dir, "frame stage directory")->required();
    localize->add_option("--scores", scores_path, "per-bin score file")->required();
    localize->add_option("--out", out, "output directory")->required();
    localize->add_option("--config", config_path, "pipeline config JSON");
    localize->add_flag("--masks", masks, "dump refined masks as PGM");

    auto* eval_cmd = app.add_subcommand("eval", "frame-level AUC and TIoU");
    eval_cmd->add_option("--scores", scores_dir, "directory of per-video score dirs")->required();
    eval_cmd->add_option("--labels", labels_dir, "directory of per-video label dirs")->required();
    eval_cmd->add_option("--pred-boxes", pred_boxes_dir, "predicted box directories");
    eval_cmd->add_option("--gt-boxes", gt_boxes_dir, "ground-truth box directories");

    auto* demo = app.add_subcommand("demo", "full chain on the standard synthetic benchmark");
    demo->add_option("--out", out, "output directory")->required();
    demo->add_option("--config", config_path, "pipeline config JSON");
    demo->add_option("--seed", seed, "master seed");

    CLI11_PARSE(app, argc, argv);

    if (simulate->parsed()) return run_simulate(spec_path, out, config_path, seed);
    if (frame->parsed()) return run_frame(events_path, out, config_path, labels_path, gt_path, pgm);
    if (sample->parsed()) return run_sample(frames_dir, out, config_path, sampler, seed);
    if (train_cmd->parsed())
        return run_train(data_dir, out, config_path, modality, teacher_dir, samples_dir, kd_flag,
                         train_seed);
    if (score->parsed()) return run_score(model_path, data_dir, out, modality, split, dump_logits);
    if (localize->parsed()) return run_localize(frames_dir, scores_path, out, config_path, masks);
    if (eval_cmd->parsed()) return run_eval(scores_dir, labels_dir, pred_boxes_dir, gt_boxes_dir);
    if (demo->parsed()) return run_demo_cmd(out, config_path, seed);
    return 0;
}
