#include "evadkit/trainer.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "evadkit/common.hpp"
#include "evadkit/evaluation.hpp"

namespace fs = std::filesystem;

namespace evadkit {

namespace {

constexpr Eigen::Index kFeatureDim = 16;
constexpr double kLogCap = 9.210440366976517;  // log1p(10000)

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

Vector renormalized(const Vector& d) {
    double total = d.sum();
    if (total > 0.0) return d / total;
    return d;
}

struct ForwardCache {
    Matrix mixed;  // features after the temporal stage
    Vector scores;
    Matrix logits;
};

ForwardCache forward_cached(const ToyModel& model, const Matrix& features, const Vector& t_us,
                            const Vector& densities) {
    if (features.rows() != t_us.size() || features.rows() != densities.size())
        throw std::invalid_argument("forward: feature/timestamp/density length mismatch");
    if (features.cols() != model.w_bin.size())
        throw std::invalid_argument("forward: feature dimension mismatch");

    ForwardCache cache;
    if (model.eda_enabled) {
        Matrix w = eda_weights(normalize_timestamps(t_us), renormalized(densities), model.eda);
        cache.mixed = apply_eda(features, w, model.eda_residual);
    } else {
        cache.mixed = features;
    }
    Vector z = cache.mixed * model.w_bin;
    z.array() += model.b_bin;
    cache.scores = z.unaryExpr([](double v) { return sigmoid(v); });
    cache.logits = cache.mixed * model.w_cls;
    cache.logits.rowwise() += model.b_cls.transpose();
    return cache;
}

}  // namespace

ToyModel init_model(Eigen::Index feature_dim, Eigen::Index num_classes, std::uint64_t seed) {
    Rng rng(derive_seed(seed, "model-init"));
    ToyModel model;
    model.w_bin.resize(feature_dim);
    for (Eigen::Index i = 0; i < feature_dim; ++i) model.w_bin[i] = 0.1 * rng.normal();
    model.b_bin = 0.0;
    model.w_cls.resize(feature_dim, num_classes);
    for (Eigen::Index i = 0; i < feature_dim; ++i)
        for (Eigen::Index j = 0; j < num_classes; ++j) model.w_cls(i, j) = 0.1 * rng.normal();
    model.b_cls = Vector::Zero(num_classes);
    return model;
}

ForwardResult forward(const ToyModel& model, const Matrix& features, const Vector& t_us,
                      const Vector& densities) {
    ForwardCache cache = forward_cached(model, features, t_us, densities);
    return {std::move(cache.scores), std::move(cache.logits)};
}

Vector infer(const ToyModel& model, const Matrix& features, const Vector& t_us,
             const Vector& densities) {
    return forward_cached(model, features, t_us, densities).scores;
}

MilResult mil_loss(const Vector& scores, int video_label, double topk_fraction) {
    const Eigen::Index t = scores.size();
    if (t < 1) throw std::invalid_argument("mil_loss: empty score series");

    auto k = static_cast<Eigen::Index>(
        std::ceil(static_cast<double>(t) * std::max(0.0, topk_fraction)));
    k = std::clamp<Eigen::Index>(k, 1, t);

    std::vector<Eigen::Index> order(static_cast<std::size_t>(t));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });

    MilResult out;
    double v = 0.0;
    for (Eigen::Index i = 0; i < k; ++i) v += scores[order[static_cast<std::size_t>(i)]];
    v /= static_cast<double>(k);
    out.video_score = v;

    double vc = std::clamp(v, 1e-12, 1.0 - 1e-12);
    double y = video_label != 0 ? 1.0 : 0.0;
    out.loss = -(y * std::log(vc) + (1.0 - y) * std::log(1.0 - vc));

    out.grad = Vector::Zero(t);
    double dv = (vc - y) / (vc * (1.0 - vc));
    for (Eigen::Index i = 0; i < k; ++i)
        out.grad[order[static_cast<std::size_t>(i)]] = dv / static_cast<double>(k);
    return out;
}

namespace {

struct SubSequence {
    Matrix features;
    Vector t_us;
    Vector density;
    std::vector<Eigen::Index> indices;
};

SubSequence subsequence(const VideoData& video, const SampleSet& samples, bool use_rgb) {
    const Matrix& full = use_rgb ? video.features_rgb : video.features_event;
    SubSequence sub;
    sub.indices = samples.indices.empty()
                      ? [&] {
                            std::vector<Eigen::Index> all(static_cast<std::size_t>(full.rows()));
                            std::iota(all.begin(), all.end(), Eigen::Index{0});
                            return all;
                        }()
                      : samples.indices;
    const auto n = static_cast<Eigen::Index>(sub.indices.size());
    sub.features.resize(n, full.cols());
    sub.t_us.resize(n);
    sub.density.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::Index src = sub.indices[static_cast<std::size_t>(i)];
        if (src < 0 || src >= full.rows())
            throw std::invalid_argument("train: sample index outside video " + video.id);
        sub.features.row(i) = full.row(src);
        sub.t_us[i] = static_cast<double>(video.center_us[static_cast<std::size_t>(src)]);
        sub.density[i] = video.density[src];
    }
    return sub;
}

}  // namespace

VideoObjective video_objective(const ToyModel& model, const Matrix& features, const Vector& t_us,
                               const Vector& densities, int video_label, const TrainConfig& config,
                               const Vector* teacher_scores, const Matrix* teacher_logits) {
    ForwardCache cache = forward_cached(model, features, t_us, densities);
    MilResult mil = mil_loss(cache.scores, video_label, config.topk_fraction);

    VideoObjective out;
    out.loss_mil = mil.loss;
    Vector g_scores = mil.grad;
    Matrix g_logits;

    if (config.kd_enabled) {
        if (teacher_scores == nullptr || teacher_logits == nullptr)
            throw std::invalid_argument("video_objective: distillation enabled without teacher outputs");
        BinaryKD bkd = kd_binary(cache.scores, *teacher_scores);
        MulticlassKD mkd = kd_multiclass(cache.logits, *teacher_logits, config.kd);
        out.loss_bin = bkd.loss;
        out.loss_multi = mkd.loss;
        g_scores += config.kd.alpha * bkd.grad;
        g_logits = config.kd.beta * mkd.grad;
    }
    out.loss_total = out.loss_mil + kd_total(out.loss_bin, out.loss_multi, config.kd);

    Vector delta =
        (g_scores.array() * cache.scores.array() * (1.0 - cache.scores.array())).matrix();
    out.grad_w_bin = cache.mixed.transpose() * delta;
    out.grad_b_bin = delta.sum();
    if (g_logits.size() > 0) {
        out.grad_w_cls = cache.mixed.transpose() * g_logits;
        out.grad_b_cls = g_logits.colwise().sum().transpose();
    } else {
        out.grad_w_cls = Matrix::Zero(model.w_cls.rows(), model.w_cls.cols());
        out.grad_b_cls = Vector::Zero(model.b_cls.size());
    }
    return out;
}

double evaluate_test_auc(const ToyModel& model, const Dataset& data, bool use_rgb_features) {
    std::vector<double> scores;
    std::vector<int> labels;
    for (const VideoData& v : data.videos) {
        if (!v.is_test || v.frame_labels.empty()) continue;
        Vector t(v.features_event.rows());
        for (Eigen::Index i = 0; i < t.size(); ++i)
            t[i] = static_cast<double>(v.center_us[static_cast<std::size_t>(i)]);
        Vector s = infer(model, use_rgb_features ? v.features_rgb : v.features_event, t, v.density);
        for (Eigen::Index i = 0; i < s.size(); ++i) {
            scores.push_back(s[i]);
            labels.push_back(v.frame_labels[static_cast<std::size_t>(i)]);
        }
    }
    bool has_pos = std::any_of(labels.begin(), labels.end(), [](int l) { return l != 0; });
    bool has_neg = std::any_of(labels.begin(), labels.end(), [](int l) { return l == 0; });
    if (!has_pos || !has_neg) return std::numeric_limits<double>::quiet_NaN();
    LabeledScores ls;
    ls.scores = Eigen::Map<const Vector>(scores.data(), static_cast<Eigen::Index>(scores.size()));
    ls.labels = labels;
    return auc(ls);
}

TrainResult train(const TrainDataView& view, const TrainConfig& config) {
    if (view.data == nullptr) throw std::invalid_argument("train: null dataset");
    const Dataset& data = *view.data;
    if (data.videos.empty()) throw std::invalid_argument("train: empty dataset");
    if (config.learning_rate <= 0.0) throw std::invalid_argument("train: learning rate must be positive");
    if (config.epochs < 1) throw std::invalid_argument("train: epochs must be at least 1");

    std::vector<std::size_t> train_idx;
    for (std::size_t i = 0; i < data.videos.size(); ++i)
        if (!data.videos[i].is_test) train_idx.push_back(i);
    if (train_idx.empty()) throw std::invalid_argument("train: no training videos");

    if (config.kd_enabled) {
        for (std::size_t i : train_idx) {
            const VideoData& v = data.videos[i];
            if (!v.teacher_scores || !v.teacher_logits)
                throw std::invalid_argument("train: teacher outputs missing for video " + v.id);
        }
    }

    TrainResult result;
    result.model = init_model(data.feature_dim, data.num_classes, config.seed);
    result.model.eda = view.eda;
    result.model.eda_enabled = view.eda_enabled;
    result.model.eda_residual = view.eda_residual;
    ToyModel& model = result.model;

    const std::size_t batch =
        config.batch_size == 0 ? train_idx.size() : std::min(config.batch_size, train_idx.size());
    static const SampleSet kNoSamples{};

    // Adam moment estimates, used only when configured.
    Vector m_w = Vector::Zero(data.feature_dim), v_w = Vector::Zero(data.feature_dim);
    double m_b = 0.0, v_b = 0.0;
    Matrix m_wc = Matrix::Zero(data.feature_dim, data.num_classes);
    Matrix v_wc = Matrix::Zero(data.feature_dim, data.num_classes);
    Vector m_bc = Vector::Zero(data.num_classes), v_bc = Vector::Zero(data.num_classes);
    std::size_t adam_step = 0;

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        double sum_mil = 0.0, sum_bin = 0.0, sum_multi = 0.0;

        for (std::size_t start = 0; start < train_idx.size(); start += batch) {
            std::size_t stop = std::min(start + batch, train_idx.size());
            Vector grad_w_bin = Vector::Zero(data.feature_dim);
            double grad_b_bin = 0.0;
            Matrix grad_w_cls = Matrix::Zero(data.feature_dim, data.num_classes);
            Vector grad_b_cls = Vector::Zero(data.num_classes);

            for (std::size_t b = start; b < stop; ++b) {
                const VideoData& video = data.videos[train_idx[b]];
                const SampleSet& samples =
                    view.samples != nullptr && train_idx[b] < view.samples->size()
                        ? (*view.samples)[train_idx[b]]
                        : kNoSamples;
                SubSequence sub = subsequence(video, samples, view.use_rgb_features);

                Vector teacher_s;
                Matrix teacher_z;
                if (config.kd_enabled) {
                    const auto n = static_cast<Eigen::Index>(sub.indices.size());
                    teacher_s.resize(n);
                    teacher_z.resize(n, video.teacher_logits->cols());
                    for (Eigen::Index i = 0; i < n; ++i) {
                        Eigen::Index src = sub.indices[static_cast<std::size_t>(i)];
                        teacher_s[i] = (*video.teacher_scores)[src];
                        teacher_z.row(i) = video.teacher_logits->row(src);
                    }
                }

                VideoObjective vo = video_objective(
                    model, sub.features, sub.t_us, sub.density, video.video_label, config,
                    config.kd_enabled ? &teacher_s : nullptr,
                    config.kd_enabled ? &teacher_z : nullptr);
                sum_mil += vo.loss_mil;
                sum_bin += vo.loss_bin;
                sum_multi += vo.loss_multi;
                grad_w_bin += vo.grad_w_bin;
                grad_b_bin += vo.grad_b_bin;
                grad_w_cls += vo.grad_w_cls;
                grad_b_cls += vo.grad_b_cls;
            }

            const double m = static_cast<double>(stop - start);
            grad_w_bin /= m;
            grad_b_bin /= m;
            grad_w_cls /= m;
            grad_b_cls /= m;

            if (config.use_adam) {
                ++adam_step;
                const double b1 = config.adam_beta1, b2 = config.adam_beta2;
                const double c1 = 1.0 - std::pow(b1, static_cast<double>(adam_step));
                const double c2 = 1.0 - std::pow(b2, static_cast<double>(adam_step));
                auto adam = [&](auto& param, auto& mom, auto& vel, const auto& grad) {
                    mom = b1 * mom + (1.0 - b1) * grad;
                    vel = (b2 * vel.array() + (1.0 - b2) * grad.array().square()).matrix();
                    param.array() -= config.learning_rate * (mom.array() / c1) /
                                     ((vel.array() / c2).sqrt() + config.adam_eps);
                };
                adam(model.w_bin, m_w, v_w, grad_w_bin);
                adam(model.w_cls, m_wc, v_wc, grad_w_cls);
                adam(model.b_cls, m_bc, v_bc, grad_b_cls);
                m_b = b1 * m_b + (1.0 - b1) * grad_b_bin;
                v_b = b2 * v_b + (1.0 - b2) * grad_b_bin * grad_b_bin;
                model.b_bin -=
                    config.learning_rate * (m_b / c1) / (std::sqrt(v_b / c2) + config.adam_eps);
            } else {
                model.w_bin -= config.learning_rate * grad_w_bin;
                model.b_bin -= config.learning_rate * grad_b_bin;
                model.w_cls -= config.learning_rate * grad_w_cls;
                model.b_cls -= config.learning_rate * grad_b_cls;
            }
        }

        EpochMetrics em;
        em.epoch = epoch;
        const double n = static_cast<double>(train_idx.size());
        em.loss_mil = sum_mil / n;
        em.loss_bin = sum_bin / n;
        em.loss_multi = sum_multi / n;
        em.auc = evaluate_test_auc(model, data, view.use_rgb_features);
        result.metrics.push_back(em);
    }
    return result;
}

Eigen::Index feature_dim() { return kFeatureDim; }

Matrix features_from_frames(const FrameSequence& frames) {
    const auto t = static_cast<Eigen::Index>(frames.frames.size());
    Matrix m = Matrix::Zero(t, kFeatureDim);
    const double median = std::max(1.0, frames.median_raw_count);

    for (Eigen::Index i = 0; i < t; ++i) {
        const EventFrame& f = frames.frames[static_cast<std::size_t>(i)];
        const auto rows = f.counts.rows();
        const auto cols = f.counts.cols();
        const double cells = static_cast<double>(rows * cols);

        double total = 0.0, pol = 0.0, occupied = 0.0;
        double cx = 0.0, cy = 0.0;
        for (Eigen::Index y = 0; y < rows; ++y)
            for (Eigen::Index x = 0; x < cols; ++x) {
                double c = f.counts(y, x);
                if (c > 0.0) {
                    total += c;
                    occupied += 1.0;
                    cx += c * static_cast<double>(x);
                    cy += c * static_cast<double>(y);
                    pol += f.polarity_sum(y, x);
                }
            }
        if (total > 0.0) {
            cx /= total;
            cy /= total;
        }
        double spread = 0.0;
        if (total > 0.0) {
            for (Eigen::Index y = 0; y < rows; ++y)
                for (Eigen::Index x = 0; x < cols; ++x) {
                    double c = f.counts(y, x);
                    if (c > 0.0) {
                        double dx = static_cast<double>(x) - cx;
                        double dy = static_cast<double>(y) - cy;
                        spread += c * (dx * dx + dy * dy);
                    }
                }
            spread = std::sqrt(spread / total) /
                     std::sqrt(static_cast<double>(rows * rows + cols * cols));
        }

        m(i, 0) = std::log1p(static_cast<double>(f.raw_count)) / kLogCap;
        m(i, 1) = std::min(4.0, static_cast<double>(f.raw_count) / (2.0 * median));
        m(i, 2) = occupied / cells;
        m(i, 3) = total > 0.0 ? pol / total : 0.0;
        m(i, 4) = cols > 1 ? cx / static_cast<double>(cols - 1) : 0.0;
        m(i, 5) = rows > 1 ? cy / static_cast<double>(rows - 1) : 0.0;
        m(i, 6) = spread;
        if (i > 0) {
            double prev = static_cast<double>(frames.frames[static_cast<std::size_t>(i - 1)].raw_count);
            double cur = static_cast<double>(f.raw_count);
            m(i, 7) = std::abs(cur - prev) / (cur + prev + 1.0);
        }

        // Coarse 2x4 spatial pooling of the count shares.
        if (total > 0.0) {
            for (Eigen::Index y = 0; y < rows; ++y)
                for (Eigen::Index x = 0; x < cols; ++x) {
                    double c = f.counts(y, x);
                    if (c <= 0.0) continue;
                    Eigen::Index py = std::min<Eigen::Index>(1, y * 2 / rows);
                    Eigen::Index px = std::min<Eigen::Index>(3, x * 4 / cols);
                    m(i, 8 + py * 4 + px) += c / total;
                }
        }
    }
    return m;
}

Matrix with_feature_noise(const Matrix& features, double noise_std, std::uint64_t seed) {
    if (noise_std <= 0.0) return features;
    Rng rng(seed);
    Matrix out = features;
    for (Eigen::Index i = 0; i < out.rows(); ++i)
        for (Eigen::Index j = 0; j < out.cols(); ++j) out(i, j) += noise_std * rng.normal();
    return out;
}

void write_matrix(const Matrix& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(IoError::Kind::Missing, "cannot open for writing: " + path);
    auto put_u32 = [&](std::uint32_t v) {
        unsigned char b[4] = {static_cast<unsigned char>(v & 0xFF),
                              static_cast<unsigned char>((v >> 8) & 0xFF),
                              static_cast<unsigned char>((v >> 16) & 0xFF),
                              static_cast<unsigned char>((v >> 24) & 0xFF)};
        out.write(reinterpret_cast<const char*>(b), 4);
    };
    put_u32(static_cast<std::uint32_t>(m.rows()));
    put_u32(static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            double v = m(i, j);
            std::uint64_t bits;
            std::memcpy(&bits, &v, sizeof(bits));
            unsigned char b[8];
            for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>((bits >> (8 * k)) & 0xFF);
            out.write(reinterpret_cast<const char*>(b), 8);
        }
}

Matrix read_matrix(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(IoError::Kind::Missing, "cannot open: " + path);
    auto get_u32 = [&]() {
        unsigned char b[4];
        in.read(reinterpret_cast<char*>(b), 4);
        if (in.gcount() != 4) throw IoError(IoError::Kind::Truncated, path + ": truncated matrix");
        return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
               (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    };
    std::uint32_t rows = get_u32();
    std::uint32_t cols = get_u32();
    Matrix m(rows, cols);
    for (std::uint32_t i = 0; i < rows; ++i)
        for (std::uint32_t j = 0; j < cols; ++j) {
            unsigned char b[8];
            in.read(reinterpret_cast<char*>(b), 8);
            if (in.gcount() != 8)
                throw IoError(IoError::Kind::Truncated, path + ": truncated matrix");
            std::uint64_t bits = 0;
            for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(b[k]) << (8 * k);
            double v;
            std::memcpy(&v, &bits, sizeof(v));
            m(i, j) = v;
        }
    return m;
}

void write_model(const ToyModel& model, const std::string& path) {
    nlohmann::json j;
    j["feature_dim"] = model.w_bin.size();
    j["num_classes"] = model.b_cls.size();
    j["w_bin"] = std::vector<double>(model.w_bin.data(), model.w_bin.data() + model.w_bin.size());
    j["b_bin"] = model.b_bin;
    std::vector<std::vector<double>> w_cls;
    for (Eigen::Index i = 0; i < model.w_cls.rows(); ++i) {
        std::vector<double> row;
        for (Eigen::Index k = 0; k < model.w_cls.cols(); ++k) row.push_back(model.w_cls(i, k));
        w_cls.push_back(std::move(row));
    }
    j["w_cls"] = w_cls;
    j["b_cls"] = std::vector<double>(model.b_cls.data(), model.b_cls.data() + model.b_cls.size());
    j["eda"] = {{"lambda", model.eda.lambda},
                {"epsilon", model.eda.epsilon},
                {"enabled", model.eda_enabled},
                {"residual", model.eda_residual}};
    std::ofstream out(path);
    if (!out) throw IoError(IoError::Kind::Missing, "cannot open for writing: " + path);
    out << j.dump(2) << '\n';
}

ToyModel read_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError(IoError::Kind::Missing, "cannot open: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(IoError::Kind::Parse, path + ": " + e.what());
    }
    ToyModel model;
    auto w_bin = j.at("w_bin").get<std::vector<double>>();
    model.w_bin = Eigen::Map<const Vector>(w_bin.data(), static_cast<Eigen::Index>(w_bin.size()));
    model.b_bin = j.at("b_bin").get<double>();
    auto w_cls = j.at("w_cls").get<std::vector<std::vector<double>>>();
    auto rows = static_cast<Eigen::Index>(w_cls.size());
    auto cols = rows > 0 ? static_cast<Eigen::Index>(w_cls[0].size()) : 0;
    model.w_cls.resize(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index k = 0; k < cols; ++k)
            model.w_cls(i, k) = w_cls[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
    auto b_cls = j.at("b_cls").get<std::vector<double>>();
    model.b_cls = Eigen::Map<const Vector>(b_cls.data(), static_cast<Eigen::Index>(b_cls.size()));
    model.eda.lambda = j.at("eda").at("lambda").get<double>();
    model.eda.epsilon = j.at("eda").at("epsilon").get<double>();
    model.eda_enabled = j.at("eda").at("enabled").get<bool>();
    model.eda_residual = j.at("eda").at("residual").get<bool>();
    return model;
}

void write_metrics(const std::vector<EpochMetrics>& metrics, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError(IoError::Kind::Missing, "cannot open for writing: " + path);
    out << "epoch,loss_mil,loss_bin,loss_multi,auc\n";
    for (const EpochMetrics& m : metrics)
        out << m.epoch << ',' << format_double(m.loss_mil) << ',' << format_double(m.loss_bin)
            << ',' << format_double(m.loss_multi) << ',' << format_double(m.auc) << '\n';
}

namespace {

void write_video_meta(const VideoData& v, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError(IoError::Kind::Missing, "cannot open for writing: " + path);
    out << "bin_index,center_time_us,density\n";
    for (std::size_t i = 0; i < v.center_us.size(); ++i)
        out << i << ',' << v.center_us[i] << ','
            << format_double(v.density[static_cast<Eigen::Index>(i)]) << '\n';
}

void load_video_meta(VideoData& v, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError(IoError::Kind::Missing, "cannot open: " + path);
    std::string line;
    std::vector<std::uint64_t> centers;
    std::vector<double> density;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line.rfind("bin_index", 0) == 0) continue;
        std::istringstream ls(line);
        unsigned long long idx, center;
        double d;
        char c1, c2;
        if (!(ls >> idx >> c1 >> center >> c2 >> d) || c1 != ',' || c2 != ',')
            throw IoError(IoError::Kind::Parse, path + ": unparsable row " + std::to_string(row));
        centers.push_back(center);
        density.push_back(d);
    }
    v.center_us = std::move(centers);
    v.density = Eigen::Map<const Vector>(density.data(), static_cast<Eigen::Index>(density.size()));
}

}  // namespace

void write_dataset(const Dataset& data, const std::string& dir) {
    fs::create_directories(dir);
    std::ofstream index(fs::path(dir) / "index.csv");
    if (!index) throw IoError(IoError::Kind::Missing, "cannot open for writing: " + dir + "/index.csv");
    index << "video_id,split,video_label,class_id,bins\n";
    for (const VideoData& v : data.videos) {
        index << v.id << ',' << (v.is_test ? "test" : "train") << ',' << v.video_label << ','
              << v.class_id << ',' << v.features_event.rows() << '\n';
        fs::path vdir = fs::path(dir) / v.id;
        fs::create_directories(vdir);
        write_matrix(v.features_rgb, (vdir / "features_rgb.fmat").string());
        write_matrix(v.features_event, (vdir / "features_event.fmat").string());
        write_video_meta(v, (vdir / "meta.csv").string());
        if (!v.frame_labels.empty()) {
            std::ofstream lab(vdir / "labels.txt");
            for (int l : v.frame_labels) lab << (l != 0 ? 1 : 0) << '\n';
        }
    }
}

Dataset read_dataset(const std::string& dir) {
    std::ifstream index(fs::path(dir) / "index.csv");
    if (!index) throw IoError(IoError::Kind::Missing, "cannot open: " + dir + "/index.csv");
    Dataset data;
    std::string line;
    std::size_t row = 0;
    while (std::getline(index, line)) {
        ++row;
        if (line.empty() || line.rfind("video_id", 0) == 0) continue;
        std::istringstream ls(line);
        std::string id, split, label, cls, bins;
        if (!std::getline(ls, id, ',') || !std::getline(ls, split, ',') ||
            !std::getline(ls, label, ',') || !std::getline(ls, cls, ',') ||
            !std::getline(ls, bins))
            throw IoError(IoError::Kind::Parse,
                          dir + "/index.csv: unparsable row " + std::to_string(row));
        VideoData v;
        v.id = id;
        v.is_test = split == "test";
        v.video_label = std::stoi(label);
        v.class_id = std::stoi(cls);
        fs::path vdir = fs::path(dir) / id;
        v.features_rgb = read_matrix((vdir / "features_rgb.fmat").string());
        v.features_event = read_matrix((vdir / "features_event.fmat").string());
        load_video_meta(v, (vdir / "meta.csv").string());
        if (fs::exists(vdir / "labels.txt")) {
            std::ifstream lab(vdir / "labels.txt");
            std::string l;
            while (std::getline(lab, l)) {
                if (l.empty()) continue;
                v.frame_labels.push_back(l == "1" ? 1 : 0);
            }
        }
        data.videos.push_back(std::move(v));
    }
    if (!data.videos.empty()) data.feature_dim = data.videos[0].features_event.cols();
    Eigen::Index classes = 2;
    for (const VideoData& v : data.videos)
        classes = std::max<Eigen::Index>(classes, v.class_id + 1);
    data.num_classes = classes;
    return data;
}

void attach_teacher_outputs(Dataset& data, const std::string& dir) {
    for (VideoData& v : data.videos) {
        if (v.is_test) continue;
        fs::path sdir = fs::path(dir) / v.id;
        fs::path scores = sdir / "scores.csv";
        fs::path logits = sdir / "logits.fmat";
        if (!fs::exists(scores))
            throw IoError(IoError::Kind::Missing, "teacher artifact missing: " + scores.string());
        if (!fs::exists(logits))
            throw IoError(IoError::Kind::Missing, "teacher artifact missing: " + logits.string());
        v.teacher_scores = read_scores_file(scores.string());
        v.teacher_logits = read_matrix(logits.string());
        data.num_classes = v.teacher_logits->cols();
    }
}

}  // namespace evadkit
