#pragma once

#include "dgcast/optim.hpp"
#include "dgcast/tensor.hpp"

#include <random>
#include <string>
#include <vector>

namespace dgcast::nn {

using Rng = std::mt19937_64;

// Glorot/Xavier uniform: U(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);

// Fully connected layer y = x W + b. x is (n, in) or (in).
class Linear {
public:
    Linear() = default;
    Linear(std::size_t in, std::size_t out, Rng& rng);

    Tensor forward(const Tensor& x) const;
    void collect(const std::string& prefix, std::vector<NamedParam>& out) const;

    std::size_t in_features() const { return weight.shape()[0]; }
    std::size_t out_features() const { return weight.shape()[1]; }

    Tensor weight;  // (in, out)
    Tensor bias;    // (out)
};

// Gated recurrent unit cell, batch-major: x (n, in), h (n, hidden).
class GruCell {
public:
    GruCell() = default;
    GruCell(std::size_t in, std::size_t hidden, Rng& rng);

    Tensor forward(const Tensor& x, const Tensor& h) const;
    void collect(const std::string& prefix, std::vector<NamedParam>& out) const;
    std::size_t hidden_size() const { return hidden_; }

    Linear input_gates;   // in -> 3*hidden (reset, update, candidate)
    Linear hidden_gates;  // hidden -> 3*hidden

private:
    std::size_t hidden_ = 0;
};

// Inverted dropout; identity when rate == 0 or not training.
Tensor dropout(const Tensor& x, double rate, bool training, Rng& rng);

std::size_t count_params(const std::vector<NamedParam>& params);

} // namespace dgcast::nn
