#pragma once

#include "dgcast/cvae.hpp"
#include "dgcast/data.hpp"
#include "dgcast/forecaster.hpp"

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dgcast {

// Ablation switches. At most one is normally set; "full" means none.
struct Variant {
    bool e2e = false;          // single joint loop instead of two stages
    bool no_reg = false;       // drop the domain regularizer
    bool no_decomp = false;    // one VAE on the undecomposed window
    bool shared_only = false;  // only the shared part of z reaches the augmentation layer
    bool no_cond = false;      // decoders do not see the domain

    static Variant parse(const std::string& name);
    static const std::vector<std::string>& names();
    std::string name() const;
    bool operator==(const Variant&) const = default;
};

struct ModelConfig {
    CvaeConfig cvae;
    DecoderKind decoder = DecoderKind::recurrent;
    std::size_t h = 14;
    std::size_t feature_dim = 0;
    std::size_t sample_paths = 100;
    Variant variant;
    bool latent_enabled = true;  // false forces z = 0 (plain decoder baseline)
};

// Model-space minibatch shared by both stages.
struct ForecastBatch {
    Tensor x;         // (n, T)
    Tensor trend;     // (n, T)
    Tensor seasonal;  // (n, T)
    Tensor last;      // (n, 1), last lookback value
    Tensor a;         // (n, T * |a|); (n, 0) when there are no features
    Tensor y;         // (n, h)
    Tensor onehot;    // (n, M); (n, 0) when built without a domain split
    std::vector<int> domains;

    LatentBatch latent_view() const { return {x, trend, seasonal, onehot, domains}; }
};

// Stacks prepared windows. With a split, every window must come from a training domain
// and the one-hot encoding is filled in.
ForecastBatch make_batch(const std::vector<WindowSample>& prepared, std::span<const std::size_t> indices,
                         std::size_t kernel, const DomainSplit* split = nullptr);
ForecastBatch make_batch(const std::vector<WindowSample>& prepared, std::size_t kernel,
                         const DomainSplit* split = nullptr);

class ForecastModel {
public:
    ForecastModel() = default;
    ForecastModel(const ModelConfig& config, nn::Rng& rng);

    const ModelConfig& config() const { return config_; }
    const CvaePair& cvae() const { return cvae_; }
    CvaePair& cvae() { return cvae_; }
    const AugmentLayer& augment() const { return augment_; }

    // Posterior means, fused and masked per the variant: the z entering the augmentation layer.
    Tensor forecast_latent(const ForecastBatch& batch, bool training = false, nn::Rng* rng = nullptr) const;
    // Same, from already computed posterior means.
    Tensor latent_from_means(const Tensor& mu_t, const std::optional<Tensor>& mu_s) const;

    GaussianOutput decode(const ForecastBatch& batch, const Tensor& z, bool training = false,
                          nn::Rng* rng = nullptr) const;
    Tensor forecast_loss(const ForecastBatch& batch, bool training = false, nn::Rng* rng = nullptr) const;

    // Distributions in original units, one per window, computed in chunks.
    std::vector<ForecastDistribution> predict(const std::vector<WindowSample>& prepared, nn::Rng& rng,
                                              std::size_t chunk = 64) const;

    std::vector<NamedParam> encoder_params() const { return cvae_.encoder_params(); }
    std::vector<NamedParam> conditional_decoder_params() const { return cvae_.decoder_params(); }
    std::vector<NamedParam> forecaster_params() const;
    std::vector<NamedParam> all_params() const;

    // Observes every z handed to the augmentation layer.
    std::function<void(const Tensor&)> latent_hook;

private:
    ModelConfig config_;
    CvaePair cvae_;
    AugmentLayer augment_;
    std::optional<RecurrentDecoder> recurrent_;
    std::optional<LinearDecoder> linear_;
    std::size_t split_index_ = 0;
};

} // namespace dgcast
