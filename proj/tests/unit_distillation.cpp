#include <doctest.h>

#include <cmath>

#include "evadkit/common.hpp"
#include "evadkit/distillation.hpp"

using namespace evadkit;

namespace {

// Central finite differences of a scalar function of a matrix entry.
template <typename F>
double fd(F f, Matrix& z, Eigen::Index i, Eigen::Index k, double h = 1e-5) {
    double orig = z(i, k);
    z(i, k) = orig + h;
    double up = f();
    z(i, k) = orig - h;
    double down = f();
    z(i, k) = orig;
    return (up - down) / (2.0 * h);
}

bool close_rel(double a, double b, double tol = 1e-4) {
    double denom = std::max({std::abs(a), std::abs(b), 1e-6});
    return std::abs(a - b) / denom < tol;
}

}  // namespace

TEST_CASE("binary distillation matches the hand examples") {
    Vector equal(3);
    equal << 0.2, 0.5, 0.9;
    BinaryKD same = kd_binary(equal, equal);
    CHECK(same.loss == 0.0);
    CHECK(same.grad.isZero());

    Vector a(2), b(2);
    a << 0, 1;
    b << 1, 0;
    CHECK(kd_binary(a, b).loss == doctest::Approx(1.0));

    Vector e(1), r(1);
    e << 0.7;
    r << 0.2;
    BinaryKD out = kd_binary(e, r);
    CHECK(out.loss == doctest::Approx(0.25).epsilon(1e-9));
    CHECK(out.grad[0] == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("logit standardization matches the hand example") {
    Matrix z(1, 3);
    z << 1, 2, 3;
    Matrix out = standardize_logits(z, 1e-8);
    double expected = std::sqrt(1.5);  // 1/sqrt(2/3)
    CHECK(out(0, 0) == doctest::Approx(-expected).epsilon(1e-6));
    CHECK(out(0, 1) == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(out(0, 2) == doctest::Approx(expected).epsilon(1e-6));
}

TEST_CASE("constant rows standardize to zero") {
    Matrix z(1, 2);
    z << 5, 5;
    CHECK(standardize_logits(z, 1e-8).isZero());
}

TEST_CASE("standardization is invariant to per-row affine maps") {
    Matrix z(2, 4);
    z << 0.5, -1, 2, 0.25, 3, 3.5, -2, 0;
    Matrix transformed = (3.0 * z.array() - 7.0).matrix();
    Matrix a = standardize_logits(z, 1e-8);
    Matrix b = standardize_logits(transformed, 1e-8);
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("multiclass distillation is zero for identical logits") {
    Matrix z(3, 4);
    z << 1, 2, 3, 4, -1, 0, 1, 2, 0.5, 0.5, 0.25, 0;
    Matrix z2 = z;
    z2(2, 3) = 0.1;  // break the constant third row so sigma > 0
    MulticlassKD out = kd_multiclass(z2, z2, KDConfig{});
    CHECK(out.loss <= 1e-9);
}

TEST_CASE("multiclass distillation reproduces the hand computation") {
    // Standardized rows are +-1, tempered gap 1: KL = tanh(1/2), times tau^2.
    Matrix z_r(1, 2), z_e(1, 2);
    z_r << 1, 0;
    z_e << 0, 1;
    MulticlassKD out = kd_multiclass(z_e, z_r, KDConfig{});
    CHECK(out.loss == doctest::Approx(4.0 * std::tanh(0.5)).epsilon(1e-6));
}

TEST_CASE("class permutations applied to both sides leave the loss unchanged") {
    Matrix z_e(2, 3), z_r(2, 3);
    z_e << 0.3, -1, 2, 1, 0.5, 0;
    z_r << 1, 0.2, -0.5, 2, -1, 0.5;
    double base = kd_multiclass(z_e, z_r, KDConfig{}).loss;
    Matrix pe(2, 3), pr(2, 3);
    pe << z_e.col(2), z_e.col(0), z_e.col(1);
    pr << z_r.col(2), z_r.col(0), z_r.col(1);
    CHECK(kd_multiclass(pe, pr, KDConfig{}).loss == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("teacher affine transforms do not move the loss") {
    Rng rng(3);
    Matrix z_e(3, 4), z_r(3, 4);
    for (Eigen::Index i = 0; i < 3; ++i)
        for (Eigen::Index k = 0; k < 4; ++k) {
            z_e(i, k) = rng.normal();
            z_r(i, k) = rng.normal();
        }
    double base = kd_multiclass(z_e, z_r, KDConfig{}).loss;
    Matrix scaled = (2.5 * z_r.array() + 4.0).matrix();
    CHECK(std::abs(kd_multiclass(z_e, scaled, KDConfig{}).loss - base) < 1e-6);
    CHECK(base >= 0.0);
}

TEST_CASE("kd_total combines the terms with the configured weights") {
    KDConfig cfg;  // alpha 0.1, beta 9
    double l_multi = 4.0 * std::tanh(0.5);
    CHECK(kd_total(0.25, l_multi, cfg) ==
          doctest::Approx(0.1 * 0.25 + 9.0 * l_multi).epsilon(1e-9));
    KDConfig zeros;
    zeros.alpha = 0.0;
    zeros.beta = 0.0;
    CHECK(kd_total(3.0, 7.0, zeros) == 0.0);
    CHECK(kd_total(0.0, 0.0, cfg) == 0.0);
}

TEST_CASE("binary gradient matches finite differences") {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        Eigen::Index n = 1 + static_cast<Eigen::Index>(rng.below(8));
        Vector e(n), r(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            e[i] = rng.uniform();
            r[i] = rng.uniform();
        }
        BinaryKD out = kd_binary(e, r);
        for (Eigen::Index i = 0; i < n; ++i) {
            double h = 1e-5;
            Vector up = e, down = e;
            up[i] += h;
            down[i] -= h;
            double numeric = (kd_binary(up, r).loss - kd_binary(down, r).loss) / (2 * h);
            CHECK(close_rel(out.grad[i], numeric));
        }
    }
}

TEST_CASE("multiclass gradient matches finite differences through standardization") {
    Rng rng(19);
    KDConfig cfg;
    for (int trial = 0; trial < 30; ++trial) {
        Eigen::Index t = 1 + static_cast<Eigen::Index>(rng.below(4));
        Eigen::Index k = 2 + static_cast<Eigen::Index>(rng.below(4));
        Matrix z_e(t, k), z_r(t, k);
        for (Eigen::Index i = 0; i < t; ++i)
            for (Eigen::Index c = 0; c < k; ++c) {
                z_e(i, c) = 2.0 * rng.normal();
                z_r(i, c) = 2.0 * rng.normal();
            }
        MulticlassKD out = kd_multiclass(z_e, z_r, cfg);
        for (Eigen::Index i = 0; i < t; ++i)
            for (Eigen::Index c = 0; c < k; ++c) {
                double numeric =
                    fd([&] { return kd_multiclass(z_e, z_r, cfg).loss; }, z_e, i, c);
                CHECK(close_rel(out.grad(i, c), numeric));
            }
    }
}

TEST_CASE("shape mismatches are rejected") {
    Vector a(2), b(3);
    CHECK_THROWS_AS(kd_binary(a, b), std::invalid_argument);
    Matrix z1(2, 3), z2(3, 3);
    CHECK_THROWS_AS(kd_multiclass(z1, z2, KDConfig{}), std::invalid_argument);
}
