#include "dgcast/error.hpp"
#include "dgcast/forecaster.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace dgcast;

namespace {

void zero_all(std::vector<NamedParam> params) {
    for (auto& p : params) std::fill(p.tensor.mutable_data().begin(), p.tensor.mutable_data().end(), 0.0);
}

std::vector<Tensor> leaves(const std::vector<NamedParam>& params) {
    std::vector<Tensor> out;
    for (const auto& p : params) out.push_back(p.tensor);
    return out;
}

WindowSample identity_window(std::size_t h) {
    WindowSample w;
    w.y.assign(h, 0.0);
    w.scale = 1.0;
    w.norm = {0.0, 1.0 - kRevinEpsilon};
    return w;
}

} // namespace

TEST(fuse, examples) {
    EXPECT_EQ(fuse_latents(Tensor::zeros({2}), Tensor::zeros({2})).to_vector(), (std::vector<double>{0, 0}));
    EXPECT_EQ(fuse_latents(Tensor::vector({1, 2}), Tensor::vector({3, 4})).to_vector(), (std::vector<double>{4, 6}));
    const Tensor a = Tensor::vector({0.3, -1.2}), b = Tensor::vector({2.5, 0.1});
    EXPECT_EQ(fuse_latents(a, b).to_vector(), fuse_latents(b, a).to_vector());
}

TEST(augment, degenerate_parameters) {
    const Tensor x = augment_input(Tensor::vector({5}), Tensor::vector({2, 3}), Tensor::zeros({3, 2}),
                                   Tensor::full({2}, 1.0));
    EXPECT_EQ(x.to_vector(), (std::vector<double>{1, 1}));
}

TEST(augment, hand_matrix_multiply) {
    const Tensor W = Tensor::matrix({{1, 0}, {0, 1}, {1, 1}});
    const Tensor x = augment_input(Tensor::vector({1}), Tensor::vector({2, 3}), W, Tensor::zeros({2}));
    EXPECT_EQ(x.to_vector(), (std::vector<double>{4, 5}));
}

TEST(augment, gradients_and_shape_checks) {
    std::mt19937_64 r(1);
    Tensor z = Tensor::from({3, 2}, oracle::uniform(6, r), true);
    Tensor x = Tensor::from({3, 4}, oracle::uniform(12, r), true);
    Tensor W = Tensor::from({6, 4}, oracle::uniform(24, r), true);
    Tensor b = Tensor::vector(oracle::uniform(4, r), true);
    const Tensor w = Tensor::from({3, 4}, oracle::uniform(12, r));
    auto f = [&] { return sum(square(augment_input(z, x, W, b)) * w); };
    EXPECT_LT(oracle::max_fd_error(f, {z, x, W, b}), 1e-7);
    EXPECT_THROW(augment_input(z, x, Tensor::zeros({5, 4}), b), ShapeError);
}

TEST(augment, layer_starts_as_identity_on_x) {
    nn::Rng rng(3);
    const AugmentLayer layer(2, 4, rng);
    const Tensor x = Tensor::from({1, 4}, {1, 2, 3, 4});
    EXPECT_EQ(layer.forward(Tensor::zeros({1, 2}), x).to_vector(), x.to_vector());
}

// ---- Gaussian NLL ---------------------------------------------------------------

TEST(gaussian_nll, examples) {
    const double c = 0.5 * std::log(2 * M_PI);
    EXPECT_NEAR(gaussian_nll(Tensor::vector({2}), Tensor::vector({2}), Tensor::vector({1})).item(), c, 1e-15);
    EXPECT_NEAR(gaussian_nll(Tensor::vector({3}), Tensor::vector({2}), Tensor::vector({1})).item(), c + 0.5, 1e-15);
    EXPECT_NEAR(c, 0.918939, 1e-6);
}

TEST(gaussian_nll, interior_minimum_at_absolute_residual) {
    const double resid = 0.7;
    auto nll = [&](double s) {
        return gaussian_nll(Tensor::vector({resid}), Tensor::vector({0}), Tensor::vector({s})).item();
    };
    Tensor sigma = Tensor::vector({resid}, true);
    gaussian_nll(Tensor::vector({resid}), Tensor::vector({0}), sigma).backward();
    EXPECT_NEAR(sigma.grad()[0], 0.0, 1e-12);
    EXPECT_LT(nll(resid), nll(resid * 0.9));
    EXPECT_LT(nll(resid), nll(resid * 1.1));
    EXPECT_GT(nll(1e6), nll(resid) + 5);
    EXPECT_GT(nll(1e-6), nll(resid) + 5);
}

TEST(gaussian_nll, rejects_nonpositive_sigma) {
    EXPECT_THROW(gaussian_nll(Tensor::vector({1}), Tensor::vector({1}), Tensor::vector({0})), DomainError);
    EXPECT_THROW(gaussian_nll(Tensor::vector({1, 2}), Tensor::vector({1}), Tensor::vector({1})), ShapeError);
}

// ---- recurrent decoder ---------------------------------------------------------

TEST(recurrent_decoder, shapes) {
    nn::Rng rng(1);
    const RecurrentDecoder dec(5, 3, 2, 4, rng);
    std::mt19937_64 r(2);
    const Tensor xp = Tensor::from({2, 5}, oracle::uniform(10, r));
    const Tensor last = Tensor::from({2, 1}, {0.1, 0.2});
    const Tensor a = Tensor::from({2, 10}, oracle::uniform(20, r));
    const Tensor y = Tensor::from({2, 3}, oracle::uniform(6, r));
    const auto out = dec.forward(xp, last, a, y);
    EXPECT_EQ(out.mu.shape(), (Shape{2, 3}));
    EXPECT_EQ(out.sigma.shape(), (Shape{2, 3}));
    nn::Rng srng(3);
    EXPECT_EQ(dec.sample(xp, last, a, 7, srng).size(), 2u * 7u * 3u);
    EXPECT_THROW(dec.forward(xp, last, Tensor::zeros({2, 9}), y), ShapeError);
}

TEST(recurrent_decoder, degenerate_parameters_emit_biases) {
    nn::Rng rng(1);
    RecurrentDecoder dec(4, 3, 0, 5, rng);
    std::vector<NamedParam> params;
    dec.collect("d", params);
    zero_all(params);
    dec.mu_head.bias.mutable_data()[0] = 1.25;
    dec.sigma_head.bias.mutable_data()[0] = -0.5;
    std::mt19937_64 r(4);
    const auto out = dec.forward(Tensor::from({2, 4}, oracle::uniform(8, r)), Tensor::zeros({2, 1}),
                                 Tensor::zeros({2, 0}), Tensor::from({2, 3}, oracle::uniform(6, r)));
    const double sigma = std::log1p(std::exp(-0.5)) + 1e-6;
    for (std::size_t i = 0; i < 6; ++i) {
        EXPECT_DOUBLE_EQ(out.mu.at(i), 1.25);
        EXPECT_NEAR(out.sigma.at(i), sigma, 1e-15);
    }
}

TEST(recurrent_decoder, sample_mean_concentrates) {
    nn::Rng rng(5);
    const RecurrentDecoder dec(4, 2, 0, 3, rng);
    const Tensor xp = Tensor::from({1, 4}, {0.3, -0.1, 0.5, 0.2});
    const Tensor last = Tensor::from({1, 1}, {0.2});
    const auto out = dec.forward(xp, last, Tensor::zeros({1, 0}), Tensor::zeros({1, 2}));
    const std::size_t S = 20000;
    nn::Rng srng(6);
    const auto paths = dec.sample(xp, last, Tensor::zeros({1, 0}), S, srng);
    double m = 0;
    for (std::size_t p = 0; p < S; ++p) m += paths[p * 2];
    m /= S;
    EXPECT_LT(std::abs(m - out.mu.at(0)), 3 * out.sigma.at(0) / std::sqrt(double(S)));
}

TEST(recurrent_decoder, nll_gradients_match_finite_differences) {
    nn::Rng rng(7);
    const RecurrentDecoder dec(4, 3, 1, 3, rng);
    std::mt19937_64 r(8);
    const Tensor xp = Tensor::from({2, 4}, oracle::uniform(8, r));
    const Tensor last = Tensor::from({2, 1}, oracle::uniform(2, r));
    const Tensor a = Tensor::from({2, 4}, oracle::uniform(8, r));
    const Tensor y = Tensor::from({2, 3}, oracle::uniform(6, r));
    std::vector<NamedParam> params;
    dec.collect("d", params);
    auto f = [&] {
        const auto g = dec.forward(xp, last, a, y);
        return gaussian_nll(y, g.mu, g.sigma);
    };
    EXPECT_LT(oracle::max_fd_error(f, leaves(params)), 1e-4);
}

// ---- linear decoder ------------------------------------------------------------

TEST(linear_decoder, degenerate_parameters) {
    nn::Rng rng(1);
    LinearDecoder dec(6, 2, 3, rng);
    std::vector<NamedParam> params;
    dec.collect("d", params);
    zero_all(params);
    dec.trend_map.bias.mutable_data()[0] = 1.0;
    dec.seasonal_map.bias.mutable_data()[0] = 0.5;
    dec.sigma_map.bias.mutable_data()[1] = 2.0;
    const auto out = dec.forward(Tensor::from({1, 6}, {1, 2, 3, 4, 5, 6}));
    EXPECT_EQ(out.mu.shape(), (Shape{1, 2}));
    EXPECT_DOUBLE_EQ(out.mu.at(0), 1.5);
    EXPECT_DOUBLE_EQ(out.mu.at(1), 0.0);
    EXPECT_NEAR(out.sigma.at(0), std::log(2.0) + 1e-6, 1e-15);
    EXPECT_NEAR(out.sigma.at(1), std::log1p(std::exp(2.0)) + 1e-6, 1e-15);
}

TEST(linear_decoder, mean_is_linear_in_input_without_biases) {
    nn::Rng rng(2);
    LinearDecoder dec(8, 3, 5, rng);
    for (auto* l : {&dec.trend_map, &dec.seasonal_map})
        std::fill(l->bias.mutable_data().begin(), l->bias.mutable_data().end(), 0.0);
    std::mt19937_64 r(3);
    const Tensor x1 = Tensor::from({2, 8}, oracle::uniform(16, r));
    const Tensor x2 = Tensor::from({2, 8}, oracle::uniform(16, r));
    const double a = 1.7, b = -0.6;
    const auto lhs = dec.forward(x1 * a + x2 * b).mu;
    const auto rhs = dec.forward(x1).mu * a + dec.forward(x2).mu * b;
    for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(lhs.at(i), rhs.at(i), 1e-12);
}

TEST(linear_decoder, nll_gradients_match_finite_differences) {
    nn::Rng rng(4);
    const LinearDecoder dec(6, 2, 3, rng);
    std::mt19937_64 r(5);
    Tensor xp = Tensor::from({3, 6}, oracle::uniform(18, r), true);
    const Tensor y = Tensor::from({3, 2}, oracle::uniform(6, r));
    std::vector<NamedParam> params;
    dec.collect("d", params);
    auto ls = leaves(params);
    ls.push_back(xp);
    auto f = [&] {
        const auto g = dec.forward(xp);
        return gaussian_nll(y, g.mu, g.sigma);
    };
    EXPECT_LT(oracle::max_fd_error(f, ls), 1e-5);
}

// ---- distributions -------------------------------------------------------------

TEST(distribution, standard_normal_quantiles) {
    const auto d = to_distribution(std::vector<double>{0.0}, std::vector<double>{1.0}, identity_window(1));
    EXPECT_NEAR(d.quantiles[kMedianRow][0], 0.0, 1e-12);
    EXPECT_NEAR(d.quantiles[8][0], 1.2815515655446004, 1e-9);
    EXPECT_NEAR(d.quantiles[0][0], -1.2815515655446004, 1e-9);
    EXPECT_EQ(d.point, d.quantiles[kMedianRow]);
}

TEST(distribution, point_mass_collapses_quantiles) {
    const auto d = to_distribution(std::vector<double>{0.4, -2.0}, std::vector<double>{1e-12, 1e-12},
                                   identity_window(2));
    for (const auto& row : d.quantiles) {
        EXPECT_NEAR(row[0], 0.4, 1e-9);
        EXPECT_NEAR(row[1], -2.0, 1e-9);
    }
}

TEST(distribution, quantiles_are_monotone_in_both_modes) {
    std::mt19937_64 r(6);
    WindowSample w = identity_window(4);
    w.scale = 3.0;
    w.norm = {1.5, 2.0};
    const auto closed = to_distribution(oracle::uniform(4, r), oracle::uniform(4, r, 0.1, 2.0), w);
    const auto sampled = to_distribution(oracle::uniform(4 * 50, r), 50, w);
    for (const auto* d : {&closed, &sampled})
        for (std::size_t q = 1; q < kQuantileLevels.size(); ++q)
            for (std::size_t k = 0; k < 4; ++k) EXPECT_LE(d->quantiles[q - 1][k], d->quantiles[q][k]);
    EXPECT_TRUE(sampled.warnings.empty());
    EXPECT_FALSE(to_distribution(oracle::uniform(4 * 5, r), 5, w).warnings.empty());
}

TEST(distribution, mapped_back_through_scale_and_revin) {
    WindowSample w = identity_window(1);
    w.scale = 2.0;
    w.norm = {1.0, 3.0};
    const auto d = to_distribution(std::vector<double>{0.5}, std::vector<double>{1e-12}, w);
    EXPECT_NEAR(d.point[0], (0.5 * (3.0 + kRevinEpsilon) + 1.0) * 2.0, 1e-9);
}

TEST(distribution, empirical_quantile_interpolates) {
    EXPECT_DOUBLE_EQ(empirical_quantile({3, 1, 2, 4}, 0.5), 2.5);
    EXPECT_DOUBLE_EQ(empirical_quantile({3, 1, 2, 4}, 0.0), 1.0);
    EXPECT_DOUBLE_EQ(empirical_quantile({7}, 0.9), 7.0);
    EXPECT_THROW(empirical_quantile({}, 0.5), ShapeError);
}
