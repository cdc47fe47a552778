#include "evadkit/distillation.hpp"

#include <cmath>
#include <stdexcept>

namespace evadkit {

BinaryKD kd_binary(const Vector& student_scores, const Vector& teacher_scores) {
    if (student_scores.size() != teacher_scores.size())
        throw std::invalid_argument("kd_binary: score length mismatch");
    const auto t = static_cast<double>(student_scores.size());
    BinaryKD out;
    Vector diff = student_scores - teacher_scores;
    out.loss = diff.squaredNorm() / t;
    out.grad = 2.0 * diff / t;
    return out;
}

Matrix standardize_logits(const Matrix& logits, double eps_std) {
    if (logits.cols() < 2)
        throw std::invalid_argument("standardize_logits: needs at least two classes");
    const auto k = static_cast<double>(logits.cols());
    Matrix out(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        double mu = logits.row(i).mean();
        double var = (logits.row(i).array() - mu).square().sum() / k;
        double sigma = std::sqrt(var);
        out.row(i) = ((logits.row(i).array() - mu) / (sigma + eps_std)).matrix();
    }
    return out;
}

Matrix tempered_softmax(const Matrix& standardized, double tau) {
    Matrix p(standardized.rows(), standardized.cols());
    for (Eigen::Index i = 0; i < standardized.rows(); ++i) {
        Eigen::ArrayXd u = standardized.row(i).transpose().array() / tau;
        double shift = u.maxCoeff();
        Eigen::ArrayXd e = (u - shift).exp();
        p.row(i) = (e / e.sum()).matrix().transpose();
    }
    return p;
}

MulticlassKD kd_multiclass(const Matrix& student_logits, const Matrix& teacher_logits,
                           const KDConfig& config) {
    if (student_logits.rows() != teacher_logits.rows() ||
        student_logits.cols() != teacher_logits.cols())
        throw std::invalid_argument("kd_multiclass: logit shape mismatch");
    if (config.tau <= 0.0)
        throw std::invalid_argument("kd_multiclass: temperature must be positive");

    const Eigen::Index t = student_logits.rows();
    const Eigen::Index k = student_logits.cols();
    const double kd = static_cast<double>(k);
    const double tn = static_cast<double>(t);
    constexpr double kProbFloor = 1e-12;

    Matrix z_e = standardize_logits(student_logits, config.eps_std);
    Matrix z_r = standardize_logits(teacher_logits, config.eps_std);
    Matrix p_e = tempered_softmax(z_e, config.tau);
    Matrix p_r = tempered_softmax(z_r, config.tau);

    MulticlassKD out;
    out.grad = Matrix::Zero(t, k);

    const double tau2 = config.tau * config.tau;
    for (Eigen::Index i = 0; i < t; ++i) {
        for (Eigen::Index c = 0; c < k; ++c) {
            double pr = p_r(i, c);
            if (pr <= 0.0) continue;
            double pe = std::max(p_e(i, c), kProbFloor);
            out.loss += pr * std::log(pr / pe);
        }

        // Backprop through the tempered softmax and the standardization.
        // d loss / d u_c = tau^2 (p_e - p_r) / T  with u = z_hat / tau.
        Eigen::ArrayXd g = tau2 * (p_e.row(i) - p_r.row(i)).transpose().array() / tn;

        double mu = student_logits.row(i).mean();
        Eigen::ArrayXd centered = student_logits.row(i).transpose().array() - mu;
        double sigma = std::sqrt(centered.square().sum() / kd);
        double denom = config.tau * (sigma + config.eps_std);

        double g_sum = g.sum();
        double g_dot_c = (g * centered).sum();
        double curvature = sigma > 0.0 ? g_dot_c / (kd * sigma * (sigma + config.eps_std)) : 0.0;
        out.grad.row(i) =
            ((g - g_sum / kd - curvature * centered) / denom).matrix().transpose();
    }
    out.loss *= tau2 / tn;
    return out;
}

}  // namespace evadkit
