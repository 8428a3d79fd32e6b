#include "mvs/core.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

using mvs::Vector;

namespace {

Vector v2(double a, double b) {
    Vector v(2);
    v << a, b;
    return v;
}

}  // namespace

TEST(Cosine, Examples) {
    EXPECT_DOUBLE_EQ(mvs::cosine(v2(1, 0), v2(1, 0)), 1.0);
    EXPECT_DOUBLE_EQ(mvs::cosine(v2(1, 0), v2(0, 1)), 0.0);
    EXPECT_NEAR(mvs::cosine(v2(1, 1), v2(1, 0)), 0.7071067812, 1e-9);
}

TEST(Cosine, Errors) {
    EXPECT_THROW(mvs::cosine(v2(0, 0), v2(1, 0)), mvs::Error);
    try {
        mvs::cosine(v2(1, 0), Vector::Ones(3));
        FAIL();
    } catch (const mvs::Error& e) {
        EXPECT_EQ(e.code(), mvs::ErrorCode::DimMismatch);
    }
}

TEST(Cosine, SymmetricAndPositiveScaleInvariant) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> scale(0.01, 100.0);
    for (int trial = 0; trial < 200; ++trial) {
        const auto u = oracle::to_eigen(oracle::random_vec(rng, 6));
        const auto v = oracle::to_eigen(oracle::random_vec(rng, 6));
        EXPECT_DOUBLE_EQ(mvs::cosine(u, v), mvs::cosine(v, u));
        EXPECT_NEAR(mvs::cosine(scale(rng) * u, v), mvs::cosine(u, v), 1e-14);
    }
}

TEST(Softmax, Examples) {
    const std::vector<double> zeros{0, 0, 0};
    for (double p : mvs::softmax(zeros)) EXPECT_NEAR(p, 1.0 / 3.0, 1e-15);

    for (double c : {-50.0, 0.0, 3.5, 700.0}) {
        const std::vector<double> x{c, c + std::log(2.0)};
        const auto p = mvs::softmax(x);
        EXPECT_NEAR(p[0], 1.0 / 3.0, 1e-12);
        EXPECT_NEAR(p[1], 2.0 / 3.0, 1e-12);
    }
    const std::vector<double> single{42.0};
    EXPECT_EQ(mvs::softmax(single)[0], 1.0);
    EXPECT_THROW(mvs::softmax(std::vector<double>{}), mvs::Error);
}

TEST(Softmax, ShiftInvariantAndSumsToOne) {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-30, 30);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> x(1 + trial % 7);
        for (auto& v : x) v = u(rng);
        const double shift = u(rng);
        auto shifted = x;
        for (auto& v : shifted) v += shift;
        const auto p = mvs::softmax(x);
        const auto q = mvs::softmax(shifted);
        double sum = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            EXPECT_GE(p[i], 0.0);
            EXPECT_NEAR(p[i], q[i], 1e-12);
            sum += p[i];
        }
        EXPECT_NEAR(sum, 1.0, 1e-12);
    }
}

TEST(MinMax, Examples) {
    EXPECT_EQ(mvs::minmax_normalize(std::vector<double>{2, 4, 6}), (std::vector<double>{0, 0.5, 1}));
    EXPECT_EQ(mvs::minmax_normalize(std::vector<double>{5}), (std::vector<double>{0.5}));
    EXPECT_EQ(mvs::minmax_normalize(std::vector<double>{-1, 1}), (std::vector<double>{0, 1}));
    EXPECT_EQ(mvs::minmax_normalize(std::vector<double>{3, 3, 3}), (std::vector<double>{0.5, 0.5, 0.5}));
    EXPECT_THROW(mvs::minmax_normalize(std::vector<double>{}), mvs::Error);
}

TEST(MinMax, DegenerateRangeHonoursEps) {
    const std::vector<double> x{1.0, 1.0 + 1e-9};
    EXPECT_EQ(mvs::minmax_normalize(x, 1e-6), (std::vector<double>{0.5, 0.5}));
    EXPECT_EQ(mvs::minmax_normalize(x, 1e-12), (std::vector<double>{0.0, 1.0}));
}

TEST(MinMax, AffineInvariant) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-5, 5), a(0.1, 10);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> x(2 + trial % 6);
        for (auto& v : x) v = u(rng);
        const double scale = a(rng), offset = u(rng);
        auto y = x;
        for (auto& v : y) v = scale * v + offset;
        const auto nx = mvs::minmax_normalize(x);
        const auto ny = mvs::minmax_normalize(y);
        for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(nx[i], ny[i], 1e-12);
    }
}

TEST(MeanVectors, Examples) {
    const std::vector<Vector> a{v2(1, 0), v2(0, 1)};
    EXPECT_TRUE(mvs::mean_vectors(a).isApprox(v2(0.5, 0.5)));
    const std::vector<Vector> b{v2(2, 2)};
    EXPECT_EQ(mvs::mean_vectors(b), v2(2, 2));
    const std::vector<Vector> c{v2(1, 0), v2(0, 1), v2(1, 1)};
    EXPECT_NEAR((mvs::mean_vectors(c) - v2(2.0 / 3, 2.0 / 3)).norm(), 0.0, 1e-15);
    EXPECT_THROW(mvs::mean_vectors(std::vector<Vector>{}), mvs::Error);
    const std::vector<Vector> bad{v2(1, 0), Vector::Ones(3)};
    EXPECT_THROW(mvs::mean_vectors(bad), mvs::Error);
}

TEST(MeanVectors, PermutationInvariant) {
    std::mt19937_64 rng(4);
    std::vector<Vector> vs;
    for (int i = 0; i < 7; ++i) vs.push_back(oracle::to_eigen(oracle::random_vec(rng, 5)));
    const auto base = mvs::mean_vectors(vs);
    for (int trial = 0; trial < 20; ++trial) {
        std::shuffle(vs.begin(), vs.end(), rng);
        EXPECT_NEAR((mvs::mean_vectors(vs) - base).norm(), 0.0, 1e-14);
    }
}
