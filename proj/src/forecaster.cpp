#include "dgcast/forecaster.hpp"

#include "dgcast/decomposition.hpp"
#include "dgcast/error.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>

namespace dgcast {

Tensor fuse_latents(const Tensor& z_t, const Tensor& z_s) {
    if (z_t.shape() != z_s.shape()) {
        throw ShapeError("fuse_latents: shape mismatch " + shape_str(z_t.shape()) + " vs " + shape_str(z_s.shape()));
    }
    return z_t + z_s;
}

Tensor augment_input(const Tensor& z, const Tensor& x, const Tensor& W, const Tensor& b) {
    const std::size_t d_z = z.cols();
    const std::size_t T = x.cols();
    if (W.rank() != 2 || W.shape()[0] != d_z + T || W.shape()[1] != T || b.rank() != 1 || b.numel() != T) {
        throw ShapeError("augment_input: expected W (" + std::to_string(d_z + T) + "," + std::to_string(T) +
                         ") and b (" + std::to_string(T) + "), got " + shape_str(W.shape()) + " and " +
                         shape_str(b.shape()));
    }
    if (z.rank() != x.rank()) throw ShapeError("augment_input: z and x must both be rows or both be batches");
    const Tensor xw = matmul(concat(z, x), W);
    return xw.rank() == 1 ? xw + b : add_row(xw, b);
}

// The x block starts as the identity so x' = x plus a random projection of z.
AugmentLayer::AugmentLayer(std::size_t d_z, std::size_t T, nn::Rng& rng)
    : weight(nn::glorot_uniform(d_z + T, T, rng)), bias(Tensor::zeros({T}, true)) {
    auto w = weight.mutable_data();
    std::fill(w.begin() + static_cast<std::ptrdiff_t>(d_z * T), w.end(), 0.0);
    for (std::size_t j = 0; j < T; ++j) w[(d_z + j) * T + j] = 1.0;
}

void AugmentLayer::collect(const std::string& prefix, std::vector<NamedParam>& out) const {
    out.push_back({prefix + ".weight", weight});
    out.push_back({prefix + ".bias", bias});
}

Tensor gaussian_nll(const Tensor& y, const Tensor& mu, const Tensor& sigma) {
    if (y.shape() != mu.shape() || y.shape() != sigma.shape()) {
        throw ShapeError("gaussian_nll: shapes " + shape_str(y.shape()) + ", " + shape_str(mu.shape()) + ", " +
                         shape_str(sigma.shape()));
    }
    for (double s : sigma.data())
        if (!(s > 0.0)) throw DomainError("gaussian_nll: sigma must be positive");
    const double half_log_2pi = 0.5 * std::log(2.0 * M_PI);
    return mean(log(sigma) + square((y - mu) / sigma) * 0.5) + half_log_2pi;
}

std::string to_string(DecoderKind kind) { return kind == DecoderKind::recurrent ? "recurrent" : "linear"; }

DecoderKind decoder_kind_from_string(const std::string& s) {
    if (s == "recurrent" || s == "recurrent-gaussian" || s == "deepar") return DecoderKind::recurrent;
    if (s == "linear" || s == "linear-decomposition" || s == "dlinear") return DecoderKind::linear;
    throw ConfigError("unknown decoder kind '" + s + "' (expected recurrent or linear)");
}

// ---- RecurrentDecoder ---------------------------------------------------------

RecurrentDecoder::RecurrentDecoder(std::size_t T, std::size_t h, std::size_t feature_dim, std::size_t hidden,
                                   nn::Rng& rng)
    : cell(1 + feature_dim, hidden, rng), mu_head(hidden, 1, rng), sigma_head(hidden, 1, rng), T_(T), h_(h),
      feature_dim_(feature_dim) {
    if (h == 0) throw ConfigError("recurrent decoder: horizon must be positive");
}

Tensor RecurrentDecoder::step_input(const Tensor& value, const Tensor& a, std::size_t feature_row) const {
    if (feature_dim_ == 0) return value;
    return concat(value, slice(a, feature_row * feature_dim_, (feature_row + 1) * feature_dim_));
}

Tensor RecurrentDecoder::conditioning_state(const Tensor& x_prime, const Tensor& a) const {
    if (x_prime.rank() != 2 || x_prime.cols() != T_) {
        throw ShapeError("recurrent decoder: x' must be (n, " + std::to_string(T_) + "), got " +
                         shape_str(x_prime.shape()));
    }
    const std::size_t n = x_prime.rows();
    if (feature_dim_ > 0 && (a.rank() != 2 || a.rows() != n || a.cols() != T_ * feature_dim_)) {
        throw ShapeError("recurrent decoder: features must be (n, T*|a|), got " + shape_str(a.shape()));
    }
    Tensor state = Tensor::zeros({n, cell.hidden_size()});
    for (std::size_t t = 0; t < T_; ++t) state = cell.forward(step_input(slice(x_prime, t, t + 1), a, t), state);
    return state;
}

std::pair<Tensor, Tensor> RecurrentDecoder::emit(const Tensor& hidden, bool training, double dropout,
                                                 nn::Rng* rng) const {
    Tensor feat = hidden;
    if (training && dropout > 0.0) {
        if (rng == nullptr) throw ConfigError("recurrent decoder: dropout requires an rng");
        feat = nn::dropout(hidden, dropout, training, *rng);
    }
    return {mu_head.forward(feat), softplus(sigma_head.forward(feat)) + kSigmaFloor};
}

GaussianOutput RecurrentDecoder::forward(const Tensor& x_prime, const Tensor& last, const Tensor& a, const Tensor& y,
                                         bool training, double dropout, nn::Rng* rng) const {
    Tensor state = conditioning_state(x_prime, a);
    const std::size_t n = x_prime.rows();
    if (y.rank() != 2 || y.rows() != n || y.cols() != h_) {
        throw ShapeError("recurrent decoder: targets must be (n, " + std::to_string(h_) + "), got " +
                         shape_str(y.shape()));
    }
    std::vector<Tensor> mus;
    std::vector<Tensor> sigmas;
    Tensor prev = last;
    for (std::size_t k = 0; k < h_; ++k) {
        state = cell.forward(step_input(prev, a, T_ - 1), state);
        auto [mu, sigma] = emit(state, training, dropout, rng);
        mus.push_back(mu);
        sigmas.push_back(sigma);
        prev = slice(y, k, k + 1);
    }
    return {concat(mus), concat(sigmas)};
}

std::vector<double> RecurrentDecoder::sample(const Tensor& x_prime, const Tensor& last, const Tensor& a,
                                             std::size_t paths, nn::Rng& rng) const {
    if (paths == 0) throw ConfigError("recurrent decoder: sample paths must be >= 1");
    NoGradGuard guard;
    const Tensor base = conditioning_state(x_prime, a);
    const std::size_t n = x_prime.rows();
    const std::size_t rows = n * paths;

    // Replicate each window's state and inputs once per path.
    auto repeat_rows = [paths](const Tensor& t) {
        const std::size_t r = t.rows();
        const std::size_t c = t.cols();
        std::vector<double> out(r * paths * c);
        auto d = t.data();
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t p = 0; p < paths; ++p)
                std::copy_n(d.begin() + static_cast<std::ptrdiff_t>(i * c), c,
                            out.begin() + static_cast<std::ptrdiff_t>((i * paths + p) * c));
        return Tensor::from({r * paths, c}, std::move(out));
    };
    Tensor state = repeat_rows(base);
    const Tensor feats = feature_dim_ > 0 ? repeat_rows(a) : a;
    Tensor prev = repeat_rows(last);

    std::vector<double> out(rows * h_);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t k = 0; k < h_; ++k) {
        state = cell.forward(step_input(prev, feats, T_ - 1), state);
        auto [mu, sigma] = emit(state, false, 0.0, nullptr);
        std::vector<double> draw(rows);
        for (std::size_t r = 0; r < rows; ++r) {
            draw[r] = mu.at(r) + sigma.at(r) * normal(rng);
            out[r * h_ + k] = draw[r];
        }
        prev = Tensor::from({rows, 1}, std::move(draw));
    }
    return out;
}

void RecurrentDecoder::collect(const std::string& prefix, std::vector<NamedParam>& out) const {
    cell.collect(prefix + ".gru", out);
    mu_head.collect(prefix + ".mu", out);
    sigma_head.collect(prefix + ".sigma", out);
}

// ---- LinearDecoder ------------------------------------------------------------

LinearDecoder::LinearDecoder(std::size_t T, std::size_t h, std::size_t kernel, nn::Rng& rng)
    : trend_map(T, h, rng), seasonal_map(T, h, rng), sigma_map(T, h, rng), kernel_(kernel) {
    if (h == 0) throw ConfigError("linear decoder: horizon must be positive");
}

GaussianOutput LinearDecoder::forward(const Tensor& x_prime) const {
    auto [trend, seasonal] = decompose_rows(x_prime, kernel_);
    Tensor mu = trend_map.forward(trend) + seasonal_map.forward(seasonal);
    Tensor sigma = softplus(sigma_map.forward(x_prime)) + kSigmaFloor;
    return {mu, sigma};
}

void LinearDecoder::collect(const std::string& prefix, std::vector<NamedParam>& out) const {
    trend_map.collect(prefix + ".trend", out);
    seasonal_map.collect(prefix + ".seasonal", out);
    sigma_map.collect(prefix + ".sigma", out);
}

// ---- distributions --------------------------------------------------------------

double inverse_normal_cdf(double q) {
    if (!(q > 0.0 && q < 1.0)) throw DomainError("inverse_normal_cdf: q must lie in (0, 1)");
    return boost::math::quantile(boost::math::normal_distribution<double>(0.0, 1.0), q);
}

double empirical_quantile(std::vector<double> values, double q) {
    if (values.empty()) throw ShapeError("empirical_quantile: no values");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

namespace {

ForecastDistribution finish(std::vector<std::vector<double>> rows, const WindowSample& prepared) {
    ForecastDistribution out;
    out.scale = prepared.scale;
    out.norm = prepared.norm;
    for (auto& row : rows) row = to_original_units(row, prepared);
    out.quantiles = std::move(rows);
    out.point = out.quantiles[kMedianRow];
    return out;
}

} // namespace

ForecastDistribution to_distribution(std::span<const double> mu, std::span<const double> sigma,
                                     const WindowSample& prepared) {
    if (mu.size() != sigma.size()) throw ShapeError("to_distribution: mu and sigma lengths differ");
    std::vector<std::vector<double>> rows;
    for (double q : kQuantileLevels) {
        const double zq = inverse_normal_cdf(q);
        std::vector<double> row(mu.size());
        for (std::size_t k = 0; k < mu.size(); ++k) row[k] = mu[k] + sigma[k] * zq;
        rows.push_back(std::move(row));
    }
    return finish(std::move(rows), prepared);
}

ForecastDistribution to_distribution(std::span<const double> paths, std::size_t num_paths,
                                     const WindowSample& prepared) {
    if (num_paths == 0 || paths.size() % num_paths != 0) {
        throw ShapeError("to_distribution: sample buffer is not S x h");
    }
    const std::size_t h = paths.size() / num_paths;
    std::vector<std::vector<double>> rows;
    for (double q : kQuantileLevels) {
        std::vector<double> row(h);
        for (std::size_t k = 0; k < h; ++k) {
            std::vector<double> column(num_paths);
            for (std::size_t s = 0; s < num_paths; ++s) column[s] = paths[s * h + k];
            row[k] = empirical_quantile(std::move(column), q);
        }
        rows.push_back(std::move(row));
    }
    ForecastDistribution out = finish(std::move(rows), prepared);
    for (std::size_t s = 0; s < num_paths; ++s) {
        out.samples.push_back(
            to_original_units(paths.subspan(s * h, h), prepared));
    }
    if (num_paths < 10) {
        out.warnings.push_back("only " + std::to_string(num_paths) + " sample paths; quantiles are coarse");
    }
    return out;
}

} // namespace dgcast
