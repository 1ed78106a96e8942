#include "dgcast/model.hpp"

#include "dgcast/decomposition.hpp"
#include "dgcast/error.hpp"

#include <numeric>
#include <sstream>

namespace dgcast {

const std::vector<std::string>& Variant::names() {
    static const std::vector<std::string> n{"full", "e2e", "no_reg", "no_decomp", "shared_only", "no_cond"};
    return n;
}

Variant Variant::parse(const std::string& spec) {
    Variant v;
    std::stringstream ss(spec);
    std::string name;
    while (std::getline(ss, name, '+')) {
        if (name == "full") continue;
        if (name == "e2e") v.e2e = true;
        else if (name == "no_reg") v.no_reg = true;
        else if (name == "no_decomp") v.no_decomp = true;
        else if (name == "shared_only") v.shared_only = true;
        else if (name == "no_cond") v.no_cond = true;
        else {
            std::string valid;
            for (const auto& n : names()) valid += (valid.empty() ? "" : ", ") + n;
            throw ConfigError("unknown variant '" + name + "'; valid: " + valid);
        }
    }
    return v;
}

std::string Variant::name() const {
    std::string out;
    auto add = [&](bool on, const char* n) {
        if (on) out += (out.empty() ? "" : "+") + std::string(n);
    };
    add(e2e, "e2e");
    add(no_reg, "no_reg");
    add(no_decomp, "no_decomp");
    add(shared_only, "shared_only");
    add(no_cond, "no_cond");
    return out.empty() ? "full" : out;
}

ForecastBatch make_batch(const std::vector<WindowSample>& prepared, std::span<const std::size_t> indices,
                         std::size_t kernel, const DomainSplit* split) {
    if (indices.empty()) throw ShapeError("make_batch: empty batch");
    const WindowSample& first = prepared.at(indices.front());
    const std::size_t n = indices.size();
    const std::size_t T = first.x.size();
    const std::size_t h = first.y.size();
    const std::size_t fd = first.feature_dim;
    const std::size_t M = split ? split->train_domains.size() : 0;
    std::vector<double> x, tr, se, last, a, y, oh;
    x.reserve(n * T);
    tr.reserve(n * T);
    se.reserve(n * T);
    y.reserve(n * h);
    ForecastBatch batch;
    for (std::size_t i : indices) {
        const WindowSample& w = prepared.at(i);
        if (w.x.size() != T || w.y.size() != h || w.feature_dim != fd) {
            throw ShapeError("make_batch: windows disagree on (T, h, |a|)");
        }
        const DecomposedWindow d = decompose(w.x, kernel);
        x.insert(x.end(), w.x.begin(), w.x.end());
        tr.insert(tr.end(), d.trend.begin(), d.trend.end());
        se.insert(se.end(), d.seasonal.begin(), d.seasonal.end());
        last.push_back(w.x.back());
        a.insert(a.end(), w.a.begin(), w.a.end());
        y.insert(y.end(), w.y.begin(), w.y.end());
        if (split) {
            const auto v = one_hot_domain(split->train_index(w.domain_id), static_cast<int>(M));
            oh.insert(oh.end(), v.begin(), v.end());
        }
        batch.domains.push_back(w.domain_id);
    }
    batch.x = Tensor::from({n, T}, std::move(x));
    batch.trend = Tensor::from({n, T}, std::move(tr));
    batch.seasonal = Tensor::from({n, T}, std::move(se));
    batch.last = Tensor::from({n, 1}, std::move(last));
    batch.a = Tensor::from({n, T * fd}, std::move(a));
    batch.y = Tensor::from({n, h}, std::move(y));
    batch.onehot = Tensor::from({n, M}, std::move(oh));
    return batch;
}

ForecastBatch make_batch(const std::vector<WindowSample>& prepared, std::size_t kernel, const DomainSplit* split) {
    std::vector<std::size_t> idx(prepared.size());
    std::iota(idx.begin(), idx.end(), 0);
    return make_batch(prepared, idx, kernel, split);
}

ForecastModel::ForecastModel(const ModelConfig& config, nn::Rng& rng) : config_(config) {
    config_.cvae.decompose = !config.variant.no_decomp;
    config_.cvae.conditional = !config.variant.no_cond;
    cvae_ = CvaePair(config_.cvae, rng);
    split_index_ = latent_split_index(config_.cvae.alpha, config_.cvae.d_z);
    augment_ = AugmentLayer(config_.cvae.d_z, config_.cvae.T, rng);
    if (config_.decoder == DecoderKind::recurrent) {
        recurrent_.emplace(config_.cvae.T, config_.h, config_.feature_dim, config_.cvae.hidden, rng);
    } else {
        linear_.emplace(config_.cvae.T, config_.h, config_.cvae.kernel, rng);
    }
}

Tensor ForecastModel::latent_from_means(const Tensor& mu_t, const std::optional<Tensor>& mu_s) const {
    Tensor z = mu_s ? fuse_latents(mu_t, *mu_s) : mu_t;
    if (config_.variant.shared_only) {
        const std::size_t d = config_.cvae.d_z;
        std::vector<double> mask(d, 0.0);
        std::fill(mask.begin(), mask.begin() + static_cast<std::ptrdiff_t>(split_index_), 1.0);
        const std::size_t n = z.rows();
        std::vector<double> full;
        full.reserve(n * d);
        for (std::size_t i = 0; i < n; ++i) full.insert(full.end(), mask.begin(), mask.end());
        z = z * Tensor::from({n, d}, std::move(full));
    }
    return z;
}

Tensor ForecastModel::forecast_latent(const ForecastBatch& batch, bool training, nn::Rng* rng) const {
    const std::size_t n = batch.x.rows();
    if (!config_.latent_enabled) return Tensor::zeros({n, config_.cvae.d_z});
    if (cvae_.num_stacks() == 1) {
        const LatentSample s = cvae_.encode(batch.x, Component::trend, std::nullopt, training, rng);
        return latent_from_means(s.mu, std::nullopt);
    }
    const LatentSample t = cvae_.encode(batch.trend, Component::trend, std::nullopt, training, rng);
    const LatentSample s = cvae_.encode(batch.seasonal, Component::seasonal, std::nullopt, training, rng);
    return latent_from_means(t.mu, s.mu);
}

GaussianOutput ForecastModel::decode(const ForecastBatch& batch, const Tensor& z, bool training, nn::Rng* rng) const {
    const Tensor z_in = config_.latent_enabled ? z : Tensor::zeros({batch.x.rows(), config_.cvae.d_z});
    if (latent_hook) latent_hook(z_in);
    const Tensor x_prime = augment_.forward(z_in, batch.x);
    if (recurrent_) {
        return recurrent_->forward(x_prime, batch.last, batch.a, batch.y, training, config_.cvae.dropout, rng);
    }
    return linear_->forward(x_prime);
}

Tensor ForecastModel::forecast_loss(const ForecastBatch& batch, bool training, nn::Rng* rng) const {
    const Tensor z = forecast_latent(batch, training, rng);
    const GaussianOutput out = decode(batch, z, training, rng);
    return gaussian_nll(batch.y, out.mu, out.sigma);
}

std::vector<ForecastDistribution> ForecastModel::predict(const std::vector<WindowSample>& prepared, nn::Rng& rng,
                                                         std::size_t chunk) const {
    NoGradGuard guard;
    std::vector<ForecastDistribution> out;
    out.reserve(prepared.size());
    const std::size_t h = config_.h;
    for (std::size_t begin = 0; begin < prepared.size(); begin += chunk) {
        const std::size_t end = std::min(prepared.size(), begin + chunk);
        std::vector<std::size_t> idx(end - begin);
        std::iota(idx.begin(), idx.end(), begin);
        const ForecastBatch batch = make_batch(prepared, idx, config_.cvae.kernel);
        const Tensor z = forecast_latent(batch);
        if (latent_hook) latent_hook(z);
        const Tensor x_prime = augment_.forward(z, batch.x);
        if (recurrent_) {
            const std::size_t S = config_.sample_paths;
            const std::vector<double> paths = recurrent_->sample(x_prime, batch.last, batch.a, S, rng);
            for (std::size_t i = 0; i < idx.size(); ++i) {
                out.push_back(to_distribution(std::span<const double>(paths).subspan(i * S * h, S * h), S,
                                              prepared[idx[i]]));
            }
        } else {
            const GaussianOutput g = linear_->forward(x_prime);
            for (std::size_t i = 0; i < idx.size(); ++i) {
                out.push_back(to_distribution(g.mu.data().subspan(i * h, h), g.sigma.data().subspan(i * h, h),
                                              prepared[idx[i]]));
            }
        }
    }
    return out;
}

std::vector<NamedParam> ForecastModel::forecaster_params() const {
    std::vector<NamedParam> out;
    augment_.collect("augment", out);
    if (recurrent_) recurrent_->collect("fcst_rnn", out);
    if (linear_) linear_->collect("fcst_linear", out);
    return out;
}

std::vector<NamedParam> ForecastModel::all_params() const {
    auto out = encoder_params();
    auto dec = conditional_decoder_params();
    auto fc = forecaster_params();
    out.insert(out.end(), dec.begin(), dec.end());
    out.insert(out.end(), fc.begin(), fc.end());
    return out;
}

} // namespace dgcast
