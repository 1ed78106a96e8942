#pragma once

#include "dgcast/data.hpp"
#include "dgcast/nn.hpp"
#include "dgcast/tensor.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace dgcast {

inline constexpr std::array<double, 9> kQuantileLevels{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
inline constexpr std::size_t kMedianRow = 4;
inline constexpr double kSigmaFloor = 1e-6;

// z = z_t + z_s.
Tensor fuse_latents(const Tensor& z_t, const Tensor& z_s);

// x' = concat(z, x) W + b with W (d_z + T, T) and b (T). Works on single rows or batches.
Tensor augment_input(const Tensor& z, const Tensor& x, const Tensor& W, const Tensor& b);

class AugmentLayer {
public:
    AugmentLayer() = default;
    AugmentLayer(std::size_t d_z, std::size_t T, nn::Rng& rng);

    Tensor forward(const Tensor& z, const Tensor& x) const { return augment_input(z, x, weight, bias); }
    void collect(const std::string& prefix, std::vector<NamedParam>& out) const;

    Tensor weight;
    Tensor bias;
};

// Per-step Gaussian parameters, each (n, h).
struct GaussianOutput {
    Tensor mu;
    Tensor sigma;
};

// mean over entries of 0.5 ln(2 pi sigma^2) + (y - mu)^2 / (2 sigma^2). sigma must be > 0.
Tensor gaussian_nll(const Tensor& y, const Tensor& mu, const Tensor& sigma);

enum class DecoderKind { recurrent, linear };
std::string to_string(DecoderKind kind);
DecoderKind decoder_kind_from_string(const std::string& s);

// Autoregressive GRU decoder with a Gaussian head. The conditioning pass consumes x'
// (plus external features); the h decoding steps consume the previous target value,
// the last lookback value for the first step.
class RecurrentDecoder {
public:
    RecurrentDecoder() = default;
    RecurrentDecoder(std::size_t T, std::size_t h, std::size_t feature_dim, std::size_t hidden, nn::Rng& rng);

    // Teacher-forced pass. x_prime (n, T); last (n, 1); a (n, T * feature_dim) or empty; y (n, h).
    GaussianOutput forward(const Tensor& x_prime, const Tensor& last, const Tensor& a, const Tensor& y,
                           bool training = false, double dropout = 0.0, nn::Rng* rng = nullptr) const;
    // Ancestral sampling: returns n * paths * h values, row-major by (window, path, step).
    std::vector<double> sample(const Tensor& x_prime, const Tensor& last, const Tensor& a, std::size_t paths,
                               nn::Rng& rng) const;
    void collect(const std::string& prefix, std::vector<NamedParam>& out) const;

    nn::GruCell cell;
    nn::Linear mu_head;
    nn::Linear sigma_head;

private:
    Tensor conditioning_state(const Tensor& x_prime, const Tensor& a) const;
    std::pair<Tensor, Tensor> emit(const Tensor& hidden, bool training, double dropout, nn::Rng* rng) const;
    Tensor step_input(const Tensor& value, const Tensor& a, std::size_t feature_row) const;

    std::size_t T_ = 0;
    std::size_t h_ = 0;
    std::size_t feature_dim_ = 0;
};

// Decomposes x' with the moving-average kernel, maps trend and seasonal parts T -> h
// with independent linear layers (mu = sum), and a third linear map + softplus gives sigma.
class LinearDecoder {
public:
    LinearDecoder() = default;
    LinearDecoder(std::size_t T, std::size_t h, std::size_t kernel, nn::Rng& rng);

    GaussianOutput forward(const Tensor& x_prime) const;
    void collect(const std::string& prefix, std::vector<NamedParam>& out) const;

    nn::Linear trend_map;
    nn::Linear seasonal_map;
    nn::Linear sigma_map;

private:
    std::size_t kernel_ = 1;
};

struct ForecastDistribution {
    std::vector<double> point;                  // equals the q = 0.5 row
    std::vector<std::vector<double>> quantiles;  // 9 rows x h, for kQuantileLevels
    std::vector<std::vector<double>> samples;    // S x h, original units; empty in closed form
    double scale = 1.0;
    NormStats norm;
    std::vector<std::string> warnings;
};

// Closed form: quantile rows mu + sigma * inverse_normal_cdf(q), then mapped to original units.
ForecastDistribution to_distribution(std::span<const double> mu, std::span<const double> sigma,
                                     const WindowSample& prepared);
// Sampled: per-step empirical quantiles (linear interpolation) of S paths (S x h row-major).
ForecastDistribution to_distribution(std::span<const double> paths, std::size_t num_paths,
                                     const WindowSample& prepared);

double inverse_normal_cdf(double q);
// Linear-interpolation empirical quantile of unsorted values.
double empirical_quantile(std::vector<double> values, double q);

} // namespace dgcast
