#include "dgcast/decomposition.hpp"
#include "dgcast/error.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace dgcast;

TEST(decompose, kernel_three_worked_example) {
    const std::vector<double> x{1, 2, 3, 4, 5};
    const DecomposedWindow d = decompose(x, 3);
    const std::vector<double> trend{4.0 / 3, 2, 3, 4, 14.0 / 3};
    const std::vector<double> seasonal{-1.0 / 3, 0, 0, 0, 1.0 / 3};
    for (std::size_t i = 0; i < x.size(); ++i) {
        EXPECT_NEAR(d.trend[i], trend[i], 1e-12);
        EXPECT_NEAR(d.seasonal[i], seasonal[i], 1e-12);
    }
}

TEST(decompose, identity_kernel) {
    const std::vector<double> x{3, -1, 4, 1, -5};
    const DecomposedWindow d = decompose(x, 1);
    for (std::size_t i = 0; i < x.size(); ++i) {
        EXPECT_EQ(d.trend[i], x[i]);
        EXPECT_EQ(d.seasonal[i], 0.0);
    }
}

TEST(decompose, constant_window_is_pure_trend) {
    const std::vector<double> x(13, 2.5);
    for (std::size_t k : {1, 3, 5, 9, 13}) {
        const DecomposedWindow d = decompose(x, k);
        for (std::size_t i = 0; i < x.size(); ++i) {
            EXPECT_NEAR(d.trend[i], 2.5, 1e-15);
            EXPECT_NEAR(d.seasonal[i], 0.0, 1e-15);
        }
    }
}

TEST(decompose, matches_reference_and_sums_back) {
    std::mt19937_64 rng(3);
    for (std::size_t k : {1, 5, 9, 13}) {
        for (int rep = 0; rep < 20; ++rep) {
            const auto x = oracle::uniform(20, rng, -5, 5);
            const DecomposedWindow d = decompose(x, k);
            const auto ref = oracle::moving_average(x, k);
            for (std::size_t i = 0; i < x.size(); ++i) {
                EXPECT_NEAR(d.trend[i], ref[i], 1e-12);
                EXPECT_NEAR(d.trend[i] + d.seasonal[i], x[i], 1e-12);
            }
        }
    }
}

TEST(decompose, invalid_kernels) {
    const std::vector<double> x{1, 2, 3, 4};
    EXPECT_THROW(decompose(x, 2), ConfigError);
    EXPECT_THROW(decompose(x, 0), ConfigError);
    EXPECT_THROW(decompose(x, 5), ConfigError);
}

TEST(decompose, operator_reproduces_the_window_version) {
    std::mt19937_64 rng(5);
    const auto x = oracle::uniform(11, rng);
    const Tensor A = moving_average_operator(11, 5);
    const Tensor trend = matmul(Tensor::vector(x), transpose(A));
    const DecomposedWindow d = decompose(x, 5);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(trend.at(i), d.trend[i], 1e-12);
}

TEST(decompose, batched_rows_are_differentiable) {
    std::mt19937_64 rng(9);
    Tensor x = Tensor::from({3, 7}, oracle::uniform(21, rng), true);
    auto [trend, seasonal] = decompose_rows(x, 3);
    for (std::size_t r = 0; r < 3; ++r) {
        std::vector<double> row(x.data().begin() + r * 7, x.data().begin() + (r + 1) * 7);
        const auto ref = oracle::moving_average(row, 3);
        for (std::size_t c = 0; c < 7; ++c) {
            EXPECT_NEAR(trend.at(r, c), ref[c], 1e-12);
            EXPECT_NEAR(seasonal.at(r, c), row[c] - ref[c], 1e-12);
        }
    }
    const Tensor w = Tensor::from({3, 7}, oracle::uniform(21, rng));
    auto f = [&] {
        auto [t, s] = decompose_rows(x, 3);
        return sum(square(t) * w) + sum(s * s * s);
    };
    EXPECT_LT(oracle::max_fd_error(f, {x}), 1e-6);
}
