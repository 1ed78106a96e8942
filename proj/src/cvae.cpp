#include "dgcast/cvae.hpp"

#include "dgcast/error.hpp"

#include <cmath>

namespace dgcast {

std::string to_string(EncoderKind kind) { return kind == EncoderKind::mlp ? "mlp" : "bigru"; }

EncoderKind encoder_kind_from_string(const std::string& s) {
    if (s == "mlp") return EncoderKind::mlp;
    if (s == "bigru") return EncoderKind::bigru;
    throw ConfigError("unknown encoder kind '" + s + "' (expected mlp or bigru)");
}

Tensor reparameterize(const Tensor& mu, const Tensor& logvar, const Tensor& noise) {
    return mu + exp(logvar * 0.5) * noise;
}

Tensor kl_to_standard_normal(const Tensor& mu, const Tensor& logvar) {
    return sum(square(mu) + exp(logvar) - logvar + (-1.0)) * 0.5;
}

Tensor standard_normal(const Shape& shape, nn::Rng& rng) {
    std::normal_distribution<double> dist(0.0, 1.0);
    std::vector<double> v(shape_numel(shape));
    for (double& x : v) x = dist(rng);
    return Tensor::from(shape, std::move(v));
}

namespace {

Tensor as_batch(const Tensor& x) { return x.rank() == 1 ? reshape(x, {1, x.numel()}) : x; }

LatentSample restore_rank(LatentSample s, bool single) {
    if (!single) return s;
    const std::size_t d = s.mu.numel();
    return {reshape(s.mu, {d}), reshape(s.logvar, {d}), reshape(s.z, {d})};
}

} // namespace

// ---- Encoder ----------------------------------------------------------------

Encoder::Encoder(EncoderKind kind, std::size_t T, std::size_t hidden, std::size_t d_z, nn::Rng& rng)
    : kind_(kind), T_(T), d_z_(d_z) {
    if (kind == EncoderKind::mlp) {
        hidden_ = nn::Linear(T, hidden, rng);
        mu_head_ = nn::Linear(hidden, d_z, rng);
        logvar_head_ = nn::Linear(hidden, d_z, rng);
    } else {
        forward_cell_ = nn::GruCell(1, hidden, rng);
        backward_cell_ = nn::GruCell(1, hidden, rng);
        mu_head_ = nn::Linear(2 * hidden, d_z, rng);
        logvar_head_ = nn::Linear(2 * hidden, d_z, rng);
    }
}

LatentSample Encoder::encode(const Tensor& x_in, const std::optional<Tensor>& noise, bool training, double dropout,
                             nn::Rng* rng) const {
    const bool single = x_in.rank() == 1;
    const Tensor x = as_batch(x_in);
    if (x.cols() != T_) {
        throw ShapeError("encode: expected input length " + std::to_string(T_) + ", got " + shape_str(x_in.shape()));
    }
    const std::size_t n = x.shape()[0];
    Tensor features;
    if (kind_ == EncoderKind::mlp) {
        features = tanh(hidden_.forward(x));
    } else {
        const std::size_t H = forward_cell_.hidden_size();
        Tensor hf = Tensor::zeros({n, H});
        Tensor hb = Tensor::zeros({n, H});
        for (std::size_t t = 0; t < T_; ++t) {
            hf = forward_cell_.forward(slice(x, t, t + 1), hf);
            hb = backward_cell_.forward(slice(x, T_ - 1 - t, T_ - t), hb);
        }
        features = concat(hf, hb);
    }
    if (training && dropout > 0.0) {
        if (rng == nullptr) throw ConfigError("encode: dropout requires an rng");
        features = nn::dropout(features, dropout, training, *rng);
    }
    LatentSample out;
    out.mu = mu_head_.forward(features);
    out.logvar = logvar_head_.forward(features);
    if (noise) {
        const Tensor eps = noise->rank() == 1 ? reshape(*noise, {1, noise->numel()}) : *noise;
        if (eps.shape() != out.mu.shape()) {
            throw ShapeError("encode: noise shape " + shape_str(noise->shape()) + " vs latent " +
                             shape_str(out.mu.shape()));
        }
        out.z = reparameterize(out.mu, out.logvar, eps);
    } else {
        out.z = out.mu;
    }
    return restore_rank(std::move(out), single);
}

void Encoder::collect(const std::string& prefix, std::vector<NamedParam>& out) const {
    if (kind_ == EncoderKind::mlp) {
        hidden_.collect(prefix + ".hidden", out);
    } else {
        forward_cell_.collect(prefix + ".gru_fwd", out);
        backward_cell_.collect(prefix + ".gru_bwd", out);
    }
    mu_head_.collect(prefix + ".mu", out);
    logvar_head_.collect(prefix + ".logvar", out);
}

// ---- ConditionalDecoder -------------------------------------------------------

ConditionalDecoder::ConditionalDecoder(std::size_t d_z, std::size_t num_domains, std::size_t T, bool conditional,
                                       nn::Rng& rng)
    : layer_(d_z + (conditional ? num_domains : 0), T, rng), d_z_(d_z), num_domains_(num_domains),
      conditional_(conditional) {}

Tensor ConditionalDecoder::decode(const Tensor& z_in, const Tensor& domain_onehot) const {
    const bool single = z_in.rank() == 1;
    const Tensor z = as_batch(z_in);
    if (z.cols() != d_z_) throw ShapeError("decode: latent width " + shape_str(z_in.shape()));
    Tensor input = z;
    if (conditional_) {
        const Tensor dom = as_batch(domain_onehot);
        if (dom.cols() != num_domains_ || dom.shape()[0] != z.shape()[0]) {
            throw ShapeError("decode: one-hot shape " + shape_str(domain_onehot.shape()) + " incompatible with " +
                             std::to_string(num_domains_) + " training domains and latent " + shape_str(z_in.shape()));
        }
        input = concat(z, dom);
    }
    Tensor out = layer_.forward(input);
    return single ? reshape(out, {out.numel()}) : out;
}

void ConditionalDecoder::collect(const std::string& prefix, std::vector<NamedParam>& out) const {
    layer_.collect(prefix + ".linear", out);
}

// ---- CvaePair -----------------------------------------------------------------

CvaePair::CvaePair(const CvaeConfig& config, nn::Rng& rng) : config_(config) {
    if (config.T == 0 || config.d_z == 0 || config.hidden == 0) throw ConfigError("cvae: T, d_z, hidden must be > 0");
    if (!(config.beta >= 0.0)) throw ConfigError("cvae: beta must be >= 0");
    latent_split_index(config.alpha, config.d_z);
    const std::size_t stacks = config.decompose ? 2 : 1;
    for (std::size_t i = 0; i < stacks; ++i) {
        encoders_.emplace_back(config.encoder, config.T, config.hidden, config.d_z, rng);
        decoders_.emplace_back(config.d_z, config.num_domains, config.T, config.conditional, rng);
    }
}

std::size_t CvaePair::stack(Component which) const {
    if (which == Component::seasonal && encoders_.size() < 2) {
        throw ConfigError("cvae: seasonal stack absent in the undecomposed variant");
    }
    return which == Component::trend ? 0 : 1;
}

LatentSample CvaePair::encode(const Tensor& component, Component which, const std::optional<Tensor>& noise,
                              bool training, nn::Rng* rng) const {
    return encoders_[stack(which)].encode(component, noise, training, config_.dropout, rng);
}

Tensor CvaePair::decode(const Tensor& z, const Tensor& domain_onehot, Component which) const {
    return decoders_[stack(which)].decode(z, domain_onehot);
}

std::vector<NamedParam> CvaePair::encoder_params() const {
    std::vector<NamedParam> out;
    const char* names[] = {"encoder_t", "encoder_s"};
    for (std::size_t i = 0; i < encoders_.size(); ++i) encoders_[i].collect(names[i], out);
    return out;
}

std::vector<NamedParam> CvaePair::decoder_params() const {
    std::vector<NamedParam> out;
    const char* names[] = {"decoder_t", "decoder_s"};
    for (std::size_t i = 0; i < decoders_.size(); ++i) decoders_[i].collect(names[i], out);
    return out;
}

std::vector<NamedParam> CvaePair::params() const {
    auto out = encoder_params();
    auto dec = decoder_params();
    out.insert(out.end(), dec.begin(), dec.end());
    return out;
}

// ---- latent split -------------------------------------------------------------

std::size_t latent_split_index(double alpha, std::size_t d_z) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
    const auto index = static_cast<std::size_t>(std::floor(alpha * static_cast<double>(d_z) + 1e-9));
    if (index == 0 || index >= d_z) {
        throw ConfigError("latent split: alpha=" + std::to_string(alpha) + " with d_z=" + std::to_string(d_z) +
                          " gives degenerate index " + std::to_string(index));
    }
    return index;
}

SplitLatents split_latents(const std::vector<double>& z_t, const std::vector<double>& z_s, double alpha) {
    if (z_t.size() != z_s.size()) throw ShapeError("split_latents: z_t and z_s lengths differ");
    const std::size_t d = z_t.size();
    SplitLatents out;
    out.index = latent_split_index(alpha, d);
    const auto idx = static_cast<std::ptrdiff_t>(out.index);
    out.shared.assign(z_t.begin(), z_t.begin() + idx);
    out.shared.insert(out.shared.end(), z_s.begin(), z_s.begin() + idx);
    out.specific.assign(z_t.begin() + idx, z_t.end());
    out.specific.insert(out.specific.end(), z_s.begin() + idx, z_s.end());
    return out;
}

std::pair<std::vector<double>, std::vector<double>> reassemble_latents(const SplitLatents& split) {
    const std::size_t idx = split.index;
    const std::size_t rest = split.specific.size() / 2;
    std::vector<double> z_t(split.shared.begin(), split.shared.begin() + static_cast<std::ptrdiff_t>(idx));
    z_t.insert(z_t.end(), split.specific.begin(), split.specific.begin() + static_cast<std::ptrdiff_t>(rest));
    std::vector<double> z_s(split.shared.begin() + static_cast<std::ptrdiff_t>(idx), split.shared.end());
    z_s.insert(z_s.end(), split.specific.begin() + static_cast<std::ptrdiff_t>(rest), split.specific.end());
    return {z_t, z_s};
}

std::pair<Tensor, Tensor> split_latent_rows(const Tensor& z_t, const std::optional<Tensor>& z_s, std::size_t index) {
    const std::size_t d = z_t.cols();
    if (index == 0 || index >= d) throw ConfigError("split_latent_rows: degenerate index");
    if (!z_s) return {slice(z_t, 0, index), slice(z_t, index, d)};
    if (z_s->shape() != z_t.shape()) throw ShapeError("split_latent_rows: z_t and z_s shapes differ");
    return {concat(slice(z_t, 0, index), slice(*z_s, 0, index)), concat(slice(z_t, index, d), slice(*z_s, index, d))};
}

Tensor domain_regularizer(const Tensor& shared, const Tensor& specific, const std::vector<int>& domains) {
    const std::size_t n = shared.rows();
    if (specific.rows() != n || domains.size() != n) {
        throw ShapeError("domain_regularizer: batch sizes disagree");
    }
    const Tensor pull = sum(pairwise_l2(shared)) * (1.0 / static_cast<double>(n * n));
    std::vector<double> mask(n * n, 0.0);
    std::size_t n_diff = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (domains[i] != domains[j]) {
                mask[i * n + j] = 1.0;
                ++n_diff;
            }
    if (n_diff == 0) return pull;
    const Tensor push = sum(pairwise_l2(specific) * Tensor::from({n, n}, std::move(mask)));
    return pull - push * (1.0 / static_cast<double>(n_diff));
}

// ---- stage-1 objective --------------------------------------------------------

LatentLossTerms latent_loss(const CvaePair& pair, const LatentBatch& batch, const std::vector<Tensor>& noises,
                            bool training, nn::Rng* rng) {
    const std::size_t n = batch.x.rows();
    if (n == 0) throw ShapeError("latent_loss: empty batch");
    if (!noises.empty() && noises.size() != pair.num_stacks()) {
        throw ShapeError("latent_loss: expected one noise tensor per VAE stack");
    }
    auto noise = [&](std::size_t i) -> std::optional<Tensor> {
        if (noises.empty()) return std::nullopt;
        return noises[i];
    };
    const double inv_n = 1.0 / static_cast<double>(n);
    const double beta = pair.config().beta;

    LatentLossTerms out;
    if (pair.num_stacks() == 1) {
        out.trend = pair.encode(batch.x, Component::trend, noise(0), training, rng);
        const Tensor recon = pair.decode(out.trend.z, batch.onehot, Component::trend);
        const Tensor sse = sum(square(recon - batch.x));
        out.combined_mse = sse * inv_n;
        out.bracket = (sse * 0.5 + kl_to_standard_normal(out.trend.mu, out.trend.logvar)) * inv_n;
    } else {
        out.trend = pair.encode(batch.trend, Component::trend, noise(0), training, rng);
        out.seasonal = pair.encode(batch.seasonal, Component::seasonal, noise(1), training, rng);
        const Tensor rt = pair.decode(out.trend.z, batch.onehot, Component::trend);
        const Tensor rs = pair.decode(out.seasonal->z, batch.onehot, Component::seasonal);
        out.combined_mse = sum(square(rt + rs - batch.x)) * inv_n;
        const Tensor nll_t = sum(square(rt - batch.trend)) * 0.5;
        const Tensor nll_s = sum(square(rs - batch.seasonal)) * 0.5;
        const Tensor kl_t = kl_to_standard_normal(out.trend.mu, out.trend.logvar);
        const Tensor kl_s = kl_to_standard_normal(out.seasonal->mu, out.seasonal->logvar);
        out.bracket = (nll_t + kl_t + nll_s + kl_s) * inv_n;
    }
    out.total = out.combined_mse + out.bracket * beta;
    return out;
}

} // namespace dgcast
