#pragma once

#include "dgcast/data.hpp"
#include "dgcast/evaluation.hpp"
#include "dgcast/model.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

namespace dgcast {

struct TrainConfig {
    std::size_t T = 60;
    std::size_t h = 14;
    std::size_t d_z = 8;
    std::size_t hidden = 32;
    std::size_t kernel = 9;
    std::size_t batch_size = 64;
    double dropout = 0.3;
    double learning_rate = 1e-3;
    double beta = 1.0;
    double alpha = 0.5;
    double reg_weight = 1.0;
    std::size_t epochs_stage1 = 100;
    std::size_t epochs_stage2 = 100;
    std::size_t patience = 10;
    std::uint64_t seed = 0;
    Variant variant;
    bool latent_enabled = true;
    DecoderKind decoder = DecoderKind::recurrent;
    // Unset: bigru with the linear decoder, mlp with the recurrent one.
    std::optional<EncoderKind> encoder;
    std::size_t sample_paths = 100;
    double clip_norm = 0.0;
    double encoder_lr_scale = 1.0;
    double test_fraction = 0.2;
    double validation_fraction = 0.2;
    std::size_t stride = 1;

    EncoderKind resolved_encoder() const;
    bool regularized() const { return !variant.no_reg && reg_weight != 0.0; }
    void validate() const;
};

nlohmann::json to_json(const TrainConfig& config);
// Missing keys keep their defaults; unknown keys are rejected.
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

struct RunRecord {
    std::string variant;
    std::uint64_t seed = 0;
    std::vector<double> stage1_loss;
    std::vector<double> stage2_train_loss;
    std::vector<double> stage2_val_loss;
    int selected_epoch = -1;  // argmin of stage2_val_loss
    std::vector<double> stage1_epoch_seconds;
    std::vector<double> stage2_epoch_seconds;

    double best_val_loss() const;
};

nlohmann::json to_json(const RunRecord& record);
RunRecord run_record_from_json(const nlohmann::json& j);

// Windows in original units and their model-space counterparts, index-aligned.
struct WindowBundle {
    std::vector<WindowSample> raw;
    std::vector<WindowSample> prepared;
    std::size_t skipped_series = 0;
};

WindowBundle prepare_windows(const WindowSet& set);

struct TrainingData {
    DomainSplit split;
    std::map<int, std::string> domain_names;
    std::size_t feature_dim = 0;
    WindowBundle train;
    WindowBundle validation;
    WindowBundle test;
};

// Splits domains with config.seed and cuts the three window sets.
TrainingData prepare_training_data(const std::vector<DomainDataset>& datasets, const TrainConfig& config);
// Same with a fixed split, e.g. the one stored in a checkpoint.
TrainingData prepare_training_data(const std::vector<DomainDataset>& datasets, const TrainConfig& config,
                                   const DomainSplit& split);

ModelConfig model_config(const TrainConfig& config, std::size_t num_train_domains, std::size_t feature_dim);
ForecastModel build_model(const TrainConfig& config, const TrainingData& data);

struct TrainedModel {
    ForecastModel model;
    RunRecord record;
};

// Minibatch Adam on latent_loss + reg_weight * regularizer; keeps the best-epoch parameters.
TrainedModel stage1_pretrain(const TrainingData& data, const TrainConfig& config);

// Forecasting decoder, augmentation layer and encoders on the NLL with early stopping on
// validation NLL; conditional decoders stay frozen. With variant e2e, `pretrained` must be
// empty and all losses are optimized jointly from scratch.
TrainedModel stage2_train(std::optional<TrainedModel> pretrained, const TrainingData& data, const TrainConfig& config);

// Both stages (or the joint loop) in sequence.
TrainedModel train_model(const TrainingData& data, const TrainConfig& config);

// Forecasts windows and scores them per domain.
MetricReport evaluate(const ForecastModel& model, const WindowBundle& windows,
                      const std::map<int, std::string>& set_domains, const std::string& set_name,
                      const TrainConfig& config);
std::vector<WindowForecast> forecast_windows(const ForecastModel& model, const WindowBundle& windows,
                                             std::uint64_t seed);

// ---- checkpoints --------------------------------------------------------------

struct Checkpoint {
    TrainConfig config;
    std::string stage;  // "stage1" or "full"
    DomainSplit split;
    std::map<int, std::string> domain_names;
    std::size_t feature_dim = 0;
    std::map<std::string, std::pair<Shape, std::vector<double>>> tensors;
};

inline constexpr int kCheckpointVersion = 1;

Checkpoint make_checkpoint(const ForecastModel& model, const TrainingData& data, const TrainConfig& config,
                           const std::string& stage);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);
// Rebuilds the model described by the checkpoint and copies every stored tensor into it.
ForecastModel restore_model(const Checkpoint& ckpt);
void load_params(ForecastModel& model, const Checkpoint& ckpt);

// ---- model selection and multi-seed runs --------------------------------------

struct CandidateRun {
    TrainConfig config;
    RunRecord record;
};

// Minimal validation loss; ties prefer smaller beta, then smaller hidden size.
std::size_t select_model(const std::vector<CandidateRun>& runs);

struct AggregateRow {
    std::string domain_set;
    std::string metric;
    double mean = 0.0;
    double std = 0.0;
    std::size_t n_seeds = 0;
};

struct SeedOutcome {
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    std::optional<MetricReport> train;
    std::optional<MetricReport> test;
    RunRecord record;
};

struct MultiSeedResult {
    std::vector<SeedOutcome> seeds;
    std::vector<AggregateRow> rows;
    bool all_ok() const;
};

MultiSeedResult multi_seed_evaluate(const std::vector<DomainDataset>& datasets, const TrainConfig& config,
                                    const std::vector<std::uint64_t>& seeds);

nlohmann::json to_json(const MultiSeedResult& result);

} // namespace dgcast
