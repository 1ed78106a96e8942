#pragma once

#include "dgcast/tensor.hpp"

#include <span>
#include <utility>
#include <vector>

namespace dgcast {

struct DecomposedWindow {
    std::vector<double> trend;     // trend-cyclical part
    std::vector<double> seasonal;  // x - trend
    std::size_t kernel = 1;
};

// Centered moving average over an edge-replicated copy of x; seasonal is the residual.
// kernel must be odd and 1 <= kernel <= x.size().
DecomposedWindow decompose(std::span<const double> x, std::size_t kernel);

// (T, T) matrix A with trend = A x, i.e. the moving average as a linear map.
Tensor moving_average_operator(std::size_t length, std::size_t kernel);

// Batched, differentiable decomposition of the rows of an (n, T) or (T) tensor.
// Returns {trend, seasonal}.
std::pair<Tensor, Tensor> decompose_rows(const Tensor& x, std::size_t kernel);

} // namespace dgcast
