#include "dgcast/decomposition.hpp"

#include "dgcast/error.hpp"

#include <algorithm>
#include <string>

namespace dgcast {

namespace {

void check_kernel(std::size_t length, std::size_t kernel) {
    if (kernel == 0 || kernel % 2 == 0) {
        throw ConfigError("decompose: kernel must be odd and positive, got " + std::to_string(kernel));
    }
    if (kernel > length) {
        throw ConfigError("decompose: kernel " + std::to_string(kernel) + " exceeds window length " +
                          std::to_string(length));
    }
}

std::size_t clamp_index(std::ptrdiff_t i, std::size_t length) {
    return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(i, 0, static_cast<std::ptrdiff_t>(length) - 1));
}

} // namespace

DecomposedWindow decompose(std::span<const double> x, std::size_t kernel) {
    const std::size_t T = x.size();
    check_kernel(T, kernel);
    const auto half = static_cast<std::ptrdiff_t>(kernel / 2);
    DecomposedWindow out;
    out.kernel = kernel;
    out.trend.resize(T);
    out.seasonal.resize(T);
    for (std::size_t i = 0; i < T; ++i) {
        double s = 0.0;
        for (std::ptrdiff_t o = -half; o <= half; ++o) s += x[clamp_index(static_cast<std::ptrdiff_t>(i) + o, T)];
        out.trend[i] = s / static_cast<double>(kernel);
        out.seasonal[i] = x[i] - out.trend[i];
    }
    return out;
}

Tensor moving_average_operator(std::size_t length, std::size_t kernel) {
    check_kernel(length, kernel);
    const auto half = static_cast<std::ptrdiff_t>(kernel / 2);
    const double w = 1.0 / static_cast<double>(kernel);
    std::vector<double> a(length * length, 0.0);
    for (std::size_t i = 0; i < length; ++i)
        for (std::ptrdiff_t o = -half; o <= half; ++o)
            a[i * length + clamp_index(static_cast<std::ptrdiff_t>(i) + o, length)] += w;
    return Tensor::from({length, length}, std::move(a));
}

std::pair<Tensor, Tensor> decompose_rows(const Tensor& x, std::size_t kernel) {
    const std::size_t T = x.cols();
    // Rows are samples, so trend = x A^T.
    const Tensor op_t = transpose(moving_average_operator(T, kernel));
    Tensor trend = matmul(x, op_t);
    Tensor seasonal = x - trend;
    return {trend, seasonal};
}

} // namespace dgcast
