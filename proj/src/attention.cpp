#include "evadkit/attention.hpp"

#include <cmath>
#include <stdexcept>

namespace evadkit {

Vector normalize_timestamps(const Vector& t_us) {
    if (t_us.size() < 1)
        throw std::invalid_argument("normalize_timestamps: empty input");
    double lo = t_us.minCoeff();
    double hi = t_us.maxCoeff();
    if (hi == lo) return Vector::Zero(t_us.size());
    return (t_us.array() - lo) / (hi - lo);
}

Matrix eda_mass(const Vector& t_norm, const Vector& densities, const EDAConfig& config) {
    if (t_norm.size() != densities.size())
        throw std::invalid_argument("eda: timestamp/density length mismatch");
    const Eigen::Index t = t_norm.size();
    Matrix mass(t, t);
    for (Eigen::Index i = 0; i < t; ++i)
        for (Eigen::Index j = 0; j < t; ++j)
            mass(i, j) = std::exp(-config.lambda * std::abs(t_norm[i] - t_norm[j]) /
                                  (densities[j] + config.epsilon));
    return mass;
}

Matrix eda_weights(const Vector& t_norm, const Vector& densities, const EDAConfig& config) {
    Matrix w = eda_mass(t_norm, densities, config);
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
        double denom = w.row(i).sum() + config.epsilon;
        w.row(i) /= denom;
    }
    return w;
}

Matrix apply_eda(const Matrix& features, const Matrix& weights, bool residual) {
    if (weights.rows() != weights.cols() || weights.rows() != features.rows())
        throw std::invalid_argument("apply_eda: weight/feature dimension mismatch");
    Matrix out = weights * features;
    if (residual) out += features;
    return out;
}

}  // namespace evadkit
