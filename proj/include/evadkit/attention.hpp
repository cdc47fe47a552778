#pragma once

#include <Eigen/Core>

namespace evadkit {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct EDAConfig {
    double lambda = 1.0;    // decay rate, > 0
    double epsilon = 1e-6;  // stability constant, > 0
};

// Affine map of a timestamp vector onto [0,1]; a constant vector maps to 0.
Vector normalize_timestamps(const Vector& t_us);

// Unnormalized kernel mass: m_ij = exp(-lambda * |t_i - t_j| / (d_j + eps)).
Matrix eda_mass(const Vector& t_norm, const Vector& densities, const EDAConfig& config);

// Row-normalized weights w_ij = m_ij / (sum_k m_ik + eps). Row sums equal
// S_i / (S_i + eps), always inside (0,1).
Matrix eda_weights(const Vector& t_norm, const Vector& densities, const EDAConfig& config);

// Weighted aggregation: row i of the output is sum_j w_ij * features_j,
// optionally with the input added back (residual integration).
Matrix apply_eda(const Matrix& features, const Matrix& weights, bool residual = false);

}  // namespace evadkit
