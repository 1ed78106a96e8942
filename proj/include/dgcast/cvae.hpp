#pragma once

#include "dgcast/nn.hpp"
#include "dgcast/optim.hpp"
#include "dgcast/tensor.hpp"

#include <optional>
#include <string>
#include <vector>

namespace dgcast {

enum class EncoderKind { mlp, bigru };
enum class Component { trend, seasonal };

std::string to_string(EncoderKind kind);
EncoderKind encoder_kind_from_string(const std::string& s);

// Posterior parameters and the drawn latent, all (n, d_z) (or (d_z) for a single window).
struct LatentSample {
    Tensor mu;
    Tensor logvar;
    Tensor z;
};

// z = mu + exp(logvar / 2) * noise.
Tensor reparameterize(const Tensor& mu, const Tensor& logvar, const Tensor& noise);

// 0.5 * sum(mu^2 + exp(logvar) - 1 - logvar), summed over every element.
Tensor kl_to_standard_normal(const Tensor& mu, const Tensor& logvar);

Tensor standard_normal(const Shape& shape, nn::Rng& rng);

// Domain-agnostic posterior network: x (n, T) -> (mu, logvar).
// mlp: one tanh hidden layer. bigru: bidirectional GRU, final states concatenated.
class Encoder {
public:
    Encoder() = default;
    Encoder(EncoderKind kind, std::size_t T, std::size_t hidden, std::size_t d_z, nn::Rng& rng);

    // noise == nullopt gives z = mu. dropout only applies when training.
    LatentSample encode(const Tensor& x, const std::optional<Tensor>& noise, bool training = false,
                        double dropout = 0.0, nn::Rng* rng = nullptr) const;
    void collect(const std::string& prefix, std::vector<NamedParam>& out) const;

    EncoderKind kind() const { return kind_; }
    std::size_t input_length() const { return T_; }
    std::size_t latent_dim() const { return d_z_; }

private:
    EncoderKind kind_ = EncoderKind::mlp;
    std::size_t T_ = 0;
    std::size_t d_z_ = 0;
    nn::Linear hidden_;
    nn::GruCell forward_cell_;
    nn::GruCell backward_cell_;
    nn::Linear mu_head_;
    nn::Linear logvar_head_;
};

// Single linear layer on concat(z, one_hot(domain)); without conditioning it sees z alone.
class ConditionalDecoder {
public:
    ConditionalDecoder() = default;
    ConditionalDecoder(std::size_t d_z, std::size_t num_domains, std::size_t T, bool conditional, nn::Rng& rng);

    Tensor decode(const Tensor& z, const Tensor& domain_onehot) const;
    void collect(const std::string& prefix, std::vector<NamedParam>& out) const;

    bool conditional() const { return conditional_; }
    std::size_t num_domains() const { return num_domains_; }
    nn::Linear& layer() { return layer_; }
    const nn::Linear& layer() const { return layer_; }

private:
    nn::Linear layer_;
    std::size_t d_z_ = 0;
    std::size_t num_domains_ = 0;
    bool conditional_ = true;
};

struct CvaeConfig {
    std::size_t T = 60;
    std::size_t d_z = 8;
    std::size_t hidden = 32;
    std::size_t kernel = 9;
    std::size_t num_domains = 1;  // training domains M
    double beta = 1.0;
    double alpha = 0.5;
    double dropout = 0.3;
    EncoderKind encoder = EncoderKind::mlp;
    bool decompose = true;    // false: one VAE on the raw window
    bool conditional = true;  // false: decoders never see the domain
};

// The trend-cyclical and seasonal encoder/decoder stacks. With decompose == false
// only the first stack exists and models the undecomposed window.
class CvaePair {
public:
    CvaePair() = default;
    CvaePair(const CvaeConfig& config, nn::Rng& rng);

    const CvaeConfig& config() const { return config_; }
    std::size_t num_stacks() const { return encoders_.size(); }
    const Encoder& encoder(std::size_t i) const { return encoders_.at(i); }
    const ConditionalDecoder& decoder(std::size_t i) const { return decoders_.at(i); }
    ConditionalDecoder& decoder(std::size_t i) { return decoders_.at(i); }

    LatentSample encode(const Tensor& component, Component which, const std::optional<Tensor>& noise,
                        bool training = false, nn::Rng* rng = nullptr) const;
    Tensor decode(const Tensor& z, const Tensor& domain_onehot, Component which) const;

    std::vector<NamedParam> encoder_params() const;
    std::vector<NamedParam> decoder_params() const;
    std::vector<NamedParam> params() const;

private:
    std::size_t stack(Component which) const;

    CvaeConfig config_;
    std::vector<Encoder> encoders_;
    std::vector<ConditionalDecoder> decoders_;
};

// ---- latent split -------------------------------------------------------------

// floor(alpha * d_z); throws when the split would leave one side empty.
std::size_t latent_split_index(double alpha, std::size_t d_z);

struct SplitLatents {
    std::vector<double> shared;    // z_t[:index] ++ z_s[:index]
    std::vector<double> specific;  // z_t[index:] ++ z_s[index:]
    std::size_t index = 0;
};

SplitLatents split_latents(const std::vector<double>& z_t, const std::vector<double>& z_s, double alpha);
// Inverse of split_latents: returns {z_t, z_s}.
std::pair<std::vector<double>, std::vector<double>> reassemble_latents(const SplitLatents& split);

// Batched, differentiable split of (n, d_z) latents. z_s may be empty for the single-VAE variant,
// in which case shared = z[:, :index] and specific = z[:, index:].
std::pair<Tensor, Tensor> split_latent_rows(const Tensor& z_t, const std::optional<Tensor>& z_s, std::size_t index);

// Pairwise shared-pull / cross-domain specific-push objective over a minibatch.
// First term averages over all n^2 ordered pairs; second over ordered cross-domain pairs.
Tensor domain_regularizer(const Tensor& shared, const Tensor& specific, const std::vector<int>& domains);

// ---- stage-1 objective --------------------------------------------------------

// Model-space minibatch for the conditional VAE.
struct LatentBatch {
    Tensor x;         // (n, T)
    Tensor trend;     // (n, T)
    Tensor seasonal;  // (n, T)
    Tensor onehot;    // (n, M)
    std::vector<int> domains;
};

struct LatentLossTerms {
    Tensor total;         // combined + beta * bracket
    Tensor combined_mse;  // mean over batch of sum_T (x_t_hat + x_s_hat - x)^2
    Tensor bracket;       // mean over batch of component NLLs + KLs (unweighted)
    LatentSample trend;
    std::optional<LatentSample> seasonal;
};

// noises: one (n, d_z) tensor per stack, or empty for z = mu.
LatentLossTerms latent_loss(const CvaePair& pair, const LatentBatch& batch, const std::vector<Tensor>& noises,
                            bool training = false, nn::Rng* rng = nullptr);

} // namespace dgcast
