#include "dgcast/nn.hpp"

#include <cmath>

namespace dgcast::nn {

Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-a, a);
    std::vector<double> w(fan_in * fan_out);
    for (double& v : w) v = dist(rng);
    return Tensor::from({fan_in, fan_out}, std::move(w), true);
}

Linear::Linear(std::size_t in, std::size_t out, Rng& rng)
    : weight(glorot_uniform(in, out, rng)), bias(Tensor::zeros({out}, true)) {}

Tensor Linear::forward(const Tensor& x) const {
    Tensor y = matmul(x, weight);
    return y.rank() == 1 ? add(y, bias) : add_row(y, bias);
}

void Linear::collect(const std::string& prefix, std::vector<NamedParam>& out) const {
    out.push_back({prefix + ".weight", weight});
    out.push_back({prefix + ".bias", bias});
}

GruCell::GruCell(std::size_t in, std::size_t hidden, Rng& rng)
    : input_gates(in, 3 * hidden, rng), hidden_gates(hidden, 3 * hidden, rng), hidden_(hidden) {}

Tensor GruCell::forward(const Tensor& x, const Tensor& h) const {
    const Tensor gx = input_gates.forward(x);
    const Tensor gh = hidden_gates.forward(h);
    const std::size_t H = hidden_;
    const Tensor r = sigmoid(slice(gx, 0, H) + slice(gh, 0, H));
    const Tensor u = sigmoid(slice(gx, H, 2 * H) + slice(gh, H, 2 * H));
    const Tensor n = tanh(slice(gx, 2 * H, 3 * H) + r * slice(gh, 2 * H, 3 * H));
    return (1.0 - u) * n + u * h;
}

void GruCell::collect(const std::string& prefix, std::vector<NamedParam>& out) const {
    input_gates.collect(prefix + ".input", out);
    hidden_gates.collect(prefix + ".hidden", out);
}

Tensor dropout(const Tensor& x, double rate, bool training, Rng& rng) {
    if (!training || rate <= 0.0) return x;
    std::bernoulli_distribution keep(1.0 - rate);
    std::vector<double> mask(x.numel());
    const double scale = 1.0 / (1.0 - rate);
    for (double& m : mask) m = keep(rng) ? scale : 0.0;
    return x * Tensor::from(x.shape(), std::move(mask));
}

std::size_t count_params(const std::vector<NamedParam>& params) {
    std::size_t n = 0;
    for (const auto& p : params) n += p.tensor.numel();
    return n;
}

} // namespace dgcast::nn
