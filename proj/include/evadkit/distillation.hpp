#pragma once

#include <Eigen/Core>

namespace evadkit {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct KDConfig {
    double alpha = 0.1;    // binary term weight
    double beta = 9.0;     // multi-class term weight
    double tau = 2.0;      // softmax temperature
    double eps_std = 1e-8; // standardization guard
};

struct BinaryKD {
    double loss = 0.0;
    Vector grad;  // d loss / d student scores
};

// Mean squared error between student and teacher confidence scores.
BinaryKD kd_binary(const Vector& student_scores, const Vector& teacher_scores);

// Per-row standardization: (Z - mu) / (sigma + eps) with the population
// (divide-by-K) standard deviation. Constant rows map to zero.
Matrix standardize_logits(const Matrix& logits, double eps_std);

struct MulticlassKD {
    double loss = 0.0;
    Matrix grad;  // d loss / d student logits (pre-standardization)
};

// Temperature-scaled KL between standardized teacher and student rows,
// averaged over rows and weighted by tau^2. The teacher is a constant;
// the gradient flows through the student's standardization and softmax.
MulticlassKD kd_multiclass(const Matrix& student_logits, const Matrix& teacher_logits,
                           const KDConfig& config);

inline double kd_total(double binary_loss, double multiclass_loss, const KDConfig& config) {
    return config.alpha * binary_loss + config.beta * multiclass_loss;
}

// Row-wise tempered softmax of already-standardized logits; exposed for the
// trainer's gradient path.
Matrix tempered_softmax(const Matrix& standardized, double tau);

}  // namespace evadkit
