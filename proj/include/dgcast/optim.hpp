#pragma once

#include "dgcast/tensor.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace dgcast {

// A trainable tensor together with the name it is checkpointed under.
struct NamedParam {
    std::string name;
    Tensor tensor;
};

struct AdamOptions {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    // Global L2 norm clip applied to the gradients before the update; <= 0 disables.
    double clip_norm = 0.0;
};

// Adam with bias-corrected moments. One state per parameter list.
class Adam {
public:
    Adam(std::vector<NamedParam> params, AdamOptions options);

    // Updates every parameter in place, then zeroes the grads.
    void step();
    // Per-parameter learning-rate multiplier, e.g. to slow down fine-tuned encoders.
    void set_lr_scale(const std::string& name_prefix, double scale);

    std::uint64_t step_count() const { return step_count_; }
    const AdamOptions& options() const { return options_; }
    const std::vector<NamedParam>& params() const { return params_; }
    const std::vector<std::vector<double>>& first_moment() const { return m_; }
    const std::vector<std::vector<double>>& second_moment() const { return v_; }

private:
    std::vector<NamedParam> params_;
    AdamOptions options_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    std::vector<double> lr_scale_;
    std::uint64_t step_count_ = 0;
};

void zero_grads(std::vector<NamedParam>& params);

// Max over coordinates of |analytic - central difference| / max(1, |analytic|).
// f must build a fresh graph on each call from the tensor it is given.
double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& point, double step = 1e-5);

// Same check against every tensor in params; f rebuilds the loss from the live parameters.
double grad_check_params(const std::function<Tensor()>& f, std::vector<NamedParam>& params, double step = 1e-5);

} // namespace dgcast
