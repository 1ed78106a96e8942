#pragma once

// Straight-from-the-formula reference implementations. None of these call into the
// library's numeric code; tests compare the library against them.

#include "dgcast/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace oracle {

// Centered moving average of width k over x padded with (k-1)/2 copies of each edge value.
inline std::vector<double> moving_average(const std::vector<double>& x, std::size_t k) {
    const long half = static_cast<long>(k / 2);
    const long T = static_cast<long>(x.size());
    std::vector<double> out(x.size());
    for (long t = 0; t < T; ++t) {
        double s = 0.0;
        for (long j = t - half; j <= t + half; ++j) s += x[static_cast<std::size_t>(std::clamp(j, 0L, T - 1))];
        out[static_cast<std::size_t>(t)] = s / static_cast<double>(k);
    }
    return out;
}

inline double nrmse(const std::vector<double>& y, const std::vector<double>& p) {
    long double se = 0, mag = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        se += (long double)(y[i] - p[i]) * (y[i] - p[i]);
        mag += std::fabs(p[i]);
    }
    const long double n = y.size();
    return (double)(std::sqrt(se / n) / (mag / n));
}

inline double smape(const std::vector<double>& y, const std::vector<double>& p) {
    long double acc = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double d = std::fabs(y[i]) + std::fabs(p[i]);
        acc += d == 0.0 ? 0.0L : (long double)2.0 * std::fabs(y[i] - p[i]) / d;
    }
    return (double)(acc / y.size());
}

// Pinball form: q * (y - p) when y > p, (1 - q) * (p - y) otherwise, doubled and normalized.
inline double quantile_loss(const std::vector<double>& y, const std::vector<double>& p, double q) {
    long double num = 0, den = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        num += y[i] > p[i] ? q * (y[i] - p[i]) : (1.0 - q) * (p[i] - y[i]);
        den += std::fabs(y[i]);
    }
    return (double)(2 * num / den);
}

inline double distance(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
    return std::sqrt(s);
}

// Double loop over ordered pairs (i, j), i and j both ranging over the batch.
inline double domain_regularizer(const std::vector<std::vector<double>>& shared,
                                 const std::vector<std::vector<double>>& specific, const std::vector<int>& dom) {
    const std::size_t n = shared.size();
    double pull = 0, push = 0;
    std::size_t n_diff = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            pull += distance(shared[i], shared[j]);
            if (dom[i] != dom[j]) {
                push += distance(specific[i], specific[j]);
                ++n_diff;
            }
        }
    }
    return pull / static_cast<double>(n * n) - (n_diff ? push / static_cast<double>(n_diff) : 0.0);
}

// Central differences of f with respect to every coordinate of the leaves, compared with the
// gradients left by one backward pass. Returns the largest relative error
// |a - n| / max(|a|, |n|, 1e-3) so tiny gradients are judged on an absolute scale.
inline double max_fd_error(const std::function<dgcast::Tensor()>& f, std::vector<dgcast::Tensor> leaves,
                           double step = 1e-5) {
    for (auto& l : leaves) l.zero_grad();
    f().backward();
    std::vector<std::vector<double>> analytic;
    for (auto& l : leaves) analytic.emplace_back(l.grad().begin(), l.grad().end());
    double worst = 0.0;
    for (std::size_t p = 0; p < leaves.size(); ++p) {
        auto w = leaves[p].mutable_data();
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double keep = w[i];
            w[i] = keep + step;
            const double up = f().item();
            w[i] = keep - step;
            const double down = f().item();
            w[i] = keep;
            const double numeric = (up - down) / (2 * step);
            const double a = analytic[p][i];
            const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-3});
            worst = std::max(worst, std::fabs(a - numeric) / denom);
        }
    }
    for (auto& l : leaves) l.zero_grad();
    return worst;
}

inline std::vector<double> uniform(std::size_t n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

} // namespace oracle
