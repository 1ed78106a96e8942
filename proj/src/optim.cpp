#include "dgcast/optim.hpp"

#include "dgcast/error.hpp"

#include <algorithm>
#include <cmath>

namespace dgcast {

Adam::Adam(std::vector<NamedParam> params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
    for (const auto& p : params_) {
        m_.emplace_back(p.tensor.numel(), 0.0);
        v_.emplace_back(p.tensor.numel(), 0.0);
        lr_scale_.push_back(1.0);
    }
}

void Adam::set_lr_scale(const std::string& name_prefix, double scale) {
    for (std::size_t i = 0; i < params_.size(); ++i)
        if (params_[i].name.rfind(name_prefix, 0) == 0) lr_scale_[i] = scale;
}

void Adam::step() {
    std::string missing;
    for (const auto& p : params_)
        if (!p.tensor.has_grad()) missing += (missing.empty() ? "" : ", ") + p.name;
    if (!missing.empty()) throw GraphError("adam_step: missing grad for " + missing);

    double clip = 1.0;
    if (options_.clip_norm > 0.0) {
        double sq = 0.0;
        for (const auto& p : params_)
            for (double g : p.tensor.grad()) sq += g * g;
        const double norm = std::sqrt(sq);
        if (norm > options_.clip_norm) clip = options_.clip_norm / norm;
    }

    ++step_count_;
    const double t = static_cast<double>(step_count_);
    const double bc1 = 1.0 - std::pow(options_.beta1, t);
    const double bc2 = 1.0 - std::pow(options_.beta2, t);
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Tensor& tensor = params_[i].tensor;
        auto w = tensor.mutable_data();
        auto g = tensor.grad();
        auto& m = m_[i];
        auto& v = v_[i];
        const double lr = options_.learning_rate * lr_scale_[i];
        for (std::size_t k = 0; k < w.size(); ++k) {
            const double gk = g[k] * clip;
            m[k] = options_.beta1 * m[k] + (1.0 - options_.beta1) * gk;
            v[k] = options_.beta2 * v[k] + (1.0 - options_.beta2) * gk * gk;
            const double mhat = m[k] / bc1;
            const double vhat = v[k] / bc2;
            w[k] -= lr * mhat / (std::sqrt(vhat) + options_.epsilon);
        }
        tensor.zero_grad();
    }
}

void zero_grads(std::vector<NamedParam>& params) {
    for (auto& p : params) p.tensor.zero_grad();
}

namespace {

double eval_finite(const Tensor& t) {
    const double v = t.item();
    if (!std::isfinite(v)) throw DomainError("grad_check: non-finite evaluation");
    return v;
}

double compare(std::span<const double> analytic, std::span<const double> numeric) {
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        const double err = std::abs(analytic[i] - numeric[i]) / std::max(1.0, std::abs(analytic[i]));
        worst = std::max(worst, err);
    }
    return worst;
}

} // namespace

double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& point, double step) {
    Tensor x = Tensor::from(point.shape(), point.to_vector(), true);
    Tensor loss = f(x);
    eval_finite(loss);
    loss.backward();
    const std::vector<double> analytic(x.grad().begin(), x.grad().end());

    std::vector<double> numeric(analytic.size());
    NoGradGuard guard;
    for (std::size_t i = 0; i < numeric.size(); ++i) {
        std::vector<double> plus = point.to_vector();
        std::vector<double> minus = plus;
        plus[i] += step;
        minus[i] -= step;
        const double fp = eval_finite(f(Tensor::from(point.shape(), plus)));
        const double fm = eval_finite(f(Tensor::from(point.shape(), minus)));
        numeric[i] = (fp - fm) / (2.0 * step);
    }
    return compare(analytic, numeric);
}

double grad_check_params(const std::function<Tensor()>& f, std::vector<NamedParam>& params, double step) {
    zero_grads(params);
    Tensor loss = f();
    eval_finite(loss);
    loss.backward();

    double worst = 0.0;
    NoGradGuard guard;
    for (auto& p : params) {
        const std::vector<double> analytic(p.tensor.grad().begin(), p.tensor.grad().end());
        std::vector<double> numeric(analytic.size());
        auto w = p.tensor.mutable_data();
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double orig = w[i];
            w[i] = orig + step;
            const double fp = eval_finite(f());
            w[i] = orig - step;
            const double fm = eval_finite(f());
            w[i] = orig;
            numeric[i] = (fp - fm) / (2.0 * step);
        }
        worst = std::max(worst, compare(analytic, numeric));
    }
    zero_grads(params);
    return worst;
}

} // namespace dgcast
