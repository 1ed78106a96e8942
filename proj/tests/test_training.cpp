#include "dgcast/error.hpp"
#include "dgcast/optim.hpp"
#include "dgcast/training.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

using namespace dgcast;

namespace {

std::vector<std::vector<double>> values(const std::vector<NamedParam>& params) {
    std::vector<std::vector<double>> out;
    for (const auto& p : params) out.emplace_back(p.tensor.data().begin(), p.tensor.data().end());
    return out;
}

std::size_t count(const std::vector<NamedParam>& params) {
    std::size_t n = 0;
    for (const auto& p : params) n += p.tensor.numel();
    return n;
}

} // namespace

// ---- configuration -------------------------------------------------------------

TEST(train_config, json_round_trip_and_unknown_keys) {
    TrainConfig c = fixture::tiny_config(9);
    c.variant = Variant::parse("no_cond");
    c.decoder = DecoderKind::linear;
    c.encoder = EncoderKind::mlp;
    const TrainConfig back = train_config_from_json(to_json(c));
    EXPECT_EQ(to_json(back), to_json(c));
    EXPECT_THROW(train_config_from_json({{"betta", 5}}), ConfigError);
    EXPECT_EQ(train_config_from_json({{"beta", 5}}).beta, 5.0);
}

TEST(train_config, encoder_follows_decoder_when_unset) {
    TrainConfig c;
    c.decoder = DecoderKind::linear;
    EXPECT_EQ(c.resolved_encoder(), EncoderKind::bigru);
    c.decoder = DecoderKind::recurrent;
    EXPECT_EQ(c.resolved_encoder(), EncoderKind::mlp);
    c.encoder = EncoderKind::bigru;
    EXPECT_EQ(c.resolved_encoder(), EncoderKind::bigru);
}

TEST(train_config, validation_names_the_field) {
    TrainConfig c = fixture::tiny_config();
    c.batch_size = 1;
    try {
        c.validate();
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("batch_size"), std::string::npos);
    }
    c.variant.no_reg = true;
    EXPECT_NO_THROW(c.validate());
    c = fixture::tiny_config();
    c.alpha = 1.5;
    EXPECT_THROW(c.validate(), ConfigError);
}

// ---- stage 1 -------------------------------------------------------------------

TEST(stage1, one_loss_entry_per_epoch) {
    const TrainConfig c = fixture::tiny_config();
    const TrainedModel t = stage1_pretrain(fixture::tiny_data(c), c);
    EXPECT_EQ(t.record.stage1_loss.size(), 2u);
    EXPECT_EQ(t.record.stage1_epoch_seconds.size(), 2u);
    EXPECT_TRUE(t.record.stage2_val_loss.empty());
}

TEST(stage1, deterministic_under_seed) {
    const TrainConfig c = fixture::tiny_config(4);
    const TrainingData data = fixture::tiny_data(c);
    const auto a = stage1_pretrain(data, c), b = stage1_pretrain(data, c);
    EXPECT_EQ(a.record.stage1_loss, b.record.stage1_loss);
    EXPECT_EQ(values(a.model.all_params()), values(b.model.all_params()));
}

TEST(stage1, overfits_a_single_window) {
    TrainConfig c = fixture::tiny_config();
    c.variant.no_reg = true;
    c.dropout = 0.0;
    c.learning_rate = 1e-2;
    c.epochs_stage1 = 500;
    TrainingData data = fixture::tiny_data(c);
    data.train.prepared.resize(1);
    data.train.raw.resize(1);
    const TrainedModel t = stage1_pretrain(data, c);
    ASSERT_EQ(t.record.stage1_loss.size(), 500u);
    EXPECT_LT(t.record.stage1_loss.back(), 0.01 * t.record.stage1_loss.front());
}

TEST(stage1, loss_rises_in_at_most_a_tenth_of_epochs) {
    TrainConfig c = fixture::tiny_config(1);
    c.T = 24;
    c.h = 6;
    c.d_z = 8;
    c.hidden = 16;
    c.batch_size = 64;
    c.stride = 1;
    c.epochs_stage1 = 20;
    SyntheticSpec spec;
    spec.seed = 1;
    const auto loss = stage1_pretrain(prepare_training_data(generate_synthetic(spec), c), c).record.stage1_loss;
    int ups = 0;
    for (std::size_t e = 1; e < loss.size(); ++e) ups += loss[e] > loss[e - 1];
    EXPECT_LE(ups, 0.1 * static_cast<double>(loss.size() - 1));
}

TEST(stage1, no_decomp_has_a_single_pair_with_half_the_parameters) {
    TrainConfig c = fixture::tiny_config();
    const TrainingData data = fixture::tiny_data(c);
    const ForecastModel full = build_model(c, data);
    c.variant.no_decomp = true;
    const TrainedModel t = stage1_pretrain(data, c);
    EXPECT_EQ(t.model.cvae().num_stacks(), 1u);
    EXPECT_EQ(2 * count(t.model.cvae().params()), count(full.cvae().params()));
    EXPECT_EQ(t.record.stage1_loss.size(), 2u);
}

TEST(stage1, no_cond_drops_the_one_hot_inputs) {
    TrainConfig c = fixture::tiny_config();
    const TrainingData data = fixture::tiny_data(c);
    const std::size_t M = data.split.train_domains.size();
    const std::size_t with = count(build_model(c, data).conditional_decoder_params());
    c.variant.no_cond = true;
    const std::size_t without = count(build_model(c, data).conditional_decoder_params());
    EXPECT_EQ(with - without, 2 * M * c.T);
}

TEST(stage1, needs_two_domains_when_regularized) {
    TrainConfig c = fixture::tiny_config();
    c.test_fraction = 0.75;
    const TrainingData data = fixture::tiny_data(c);
    ASSERT_EQ(data.split.train_domains.size(), 1u);
    EXPECT_THROW(stage1_pretrain(data, c), ConfigError);
    c.variant.no_reg = true;
    EXPECT_NO_THROW(stage1_pretrain(data, c));
}

TEST(stage1, non_finite_loss_aborts_with_diagnostics) {
    const TrainConfig c = fixture::tiny_config();
    TrainingData data = fixture::tiny_data(c);
    data.train.prepared[0].x[3] = std::nan("");
    try {
        stage1_pretrain(data, c);
        FAIL();
    } catch (const TrainingError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("epoch 0"), std::string::npos);
        EXPECT_NE(msg.find("batch"), std::string::npos);
        EXPECT_NE(msg.find("combined_mse"), std::string::npos);
    }
}

// ---- stage 2 -------------------------------------------------------------------

TEST(stage2, selected_epoch_is_argmin_of_validation_loss) {
    TrainConfig c = fixture::tiny_config(2);
    c.epochs_stage2 = 6;
    const TrainedModel t = train_model(fixture::tiny_data(c), c);
    const auto& v = t.record.stage2_val_loss;
    ASSERT_FALSE(v.empty());
    EXPECT_EQ(t.record.selected_epoch, std::min_element(v.begin(), v.end()) - v.begin());
    EXPECT_EQ(t.record.best_val_loss(), *std::min_element(v.begin(), v.end()));
    EXPECT_EQ(t.record.stage2_train_loss.size(), v.size());
}

TEST(stage2, early_stopping_respects_patience) {
    TrainConfig c = fixture::tiny_config(3);
    c.epochs_stage2 = 40;
    c.patience = 1;
    c.learning_rate = 0.05;
    const TrainedModel t = train_model(fixture::tiny_data(c), c);
    const auto& v = t.record.stage2_val_loss;
    if (v.size() < 40) {
        EXPECT_EQ(static_cast<int>(v.size()) - 1, t.record.selected_epoch + 1);
    }
}

TEST(stage2, conditional_decoders_stay_frozen_and_encoders_move) {
    const TrainConfig c = fixture::tiny_config(5);
    const TrainingData data = fixture::tiny_data(c);
    TrainedModel s1 = stage1_pretrain(data, c);
    const auto dec_before = values(s1.model.conditional_decoder_params());
    const auto enc_before = values(s1.model.encoder_params());
    const TrainedModel s2 = stage2_train(std::move(s1), data, c);
    EXPECT_EQ(values(s2.model.conditional_decoder_params()), dec_before);
    EXPECT_NE(values(s2.model.encoder_params()), enc_before);
}

TEST(stage2, requires_checkpoint_unless_e2e) {
    TrainConfig c = fixture::tiny_config();
    const TrainingData data = fixture::tiny_data(c);
    EXPECT_THROW(stage2_train(std::nullopt, data, c), ConfigError);
    c.variant.e2e = true;
    EXPECT_THROW(stage2_train(stage1_pretrain(data, fixture::tiny_config()), data, c), ConfigError);
    const TrainedModel t = stage2_train(std::nullopt, data, c);
    EXPECT_TRUE(t.record.stage1_loss.empty());
    EXPECT_EQ(t.record.variant, "e2e");
}

TEST(stage2, e2e_updates_conditional_decoders) {
    TrainConfig c = fixture::tiny_config(6);
    c.variant.e2e = true;
    const TrainingData data = fixture::tiny_data(c);
    const auto init = values(build_model(c, data).conditional_decoder_params());
    EXPECT_NE(values(train_model(data, c).model.conditional_decoder_params()), init);
}

TEST(stage2, empty_validation_is_an_error) {
    const TrainConfig c = fixture::tiny_config();
    TrainingData data = fixture::tiny_data(c);
    data.validation = {};
    EXPECT_THROW(stage2_train(stage1_pretrain(data, c), data, c), DataError);
}

TEST(stage2, shared_only_zeroes_the_specific_half) {
    for (const char* name : {"shared_only", "full"}) {
        TrainConfig c = fixture::tiny_config();
        c.variant = Variant::parse(name);
        const TrainingData data = fixture::tiny_data(c);
        ForecastModel model = build_model(c, data);
        const std::size_t split = latent_split_index(c.alpha, c.d_z);
        std::size_t seen = 0, nonzero = 0;
        model.latent_hook = [&](const Tensor& z) {
            for (std::size_t i = 0; i < z.rows(); ++i)
                for (std::size_t k = split; k < c.d_z; ++k) {
                    ++seen;
                    nonzero += z.at(i, k) != 0.0;
                }
        };
        model.forecast_loss(make_batch(data.train.prepared, c.kernel));
        EXPECT_GT(seen, 0u);
        if (std::string(name) == "shared_only") {
            EXPECT_EQ(nonzero, 0u);
        } else {
            EXPECT_GT(nonzero, 0u);
        }
    }
}

TEST(stage2, latent_disabled_feeds_zeros) {
    TrainConfig c = fixture::tiny_config();
    c.latent_enabled = false;
    const TrainingData data = fixture::tiny_data(c);
    ForecastModel model = build_model(c, data);
    double worst = 0;
    model.latent_hook = [&](const Tensor& z) {
        for (double v : z.data()) worst = std::max(worst, std::abs(v));
    };
    model.forecast_loss(make_batch(data.train.prepared, c.kernel));
    EXPECT_EQ(worst, 0.0);
    EXPECT_THROW(stage1_pretrain(data, c), ConfigError);
    EXPECT_EQ(train_model(data, c).record.stage2_val_loss.size(), 2u);
}

TEST(stage2, bias_only_descent_reaches_column_means) {
    // With every weight zero the mean is the output bias alone; the NLL is then a convex
    // quadratic in that bias whose minimizer is the per-step mean of the targets.
    nn::Rng rng(1);
    const LinearDecoder dec(6, 3, 3, rng);
    std::vector<NamedParam> params;
    dec.collect("d", params);
    for (auto& p : params) std::fill(p.tensor.mutable_data().begin(), p.tensor.mutable_data().end(), 0.0);
    std::mt19937_64 r(2);
    const Tensor x = Tensor::from({8, 6}, oracle::uniform(48, r));
    const Tensor y = Tensor::from({8, 3}, oracle::uniform(24, r, 0, 2));
    Tensor b = dec.trend_map.bias;
    double prev = std::numeric_limits<double>::infinity();
    for (int step = 0; step < 300; ++step) {
        b.zero_grad();
        const auto g = dec.forward(x);
        const Tensor nll = gaussian_nll(y, g.mu, g.sigma);
        EXPECT_LE(nll.item(), prev);
        prev = nll.item();
        nll.backward();
        auto w = b.mutable_data();
        for (std::size_t k = 0; k < 3; ++k) w[k] -= 0.5 * b.grad()[k];
    }
    for (std::size_t k = 0; k < 3; ++k) {
        double m = 0;
        for (std::size_t i = 0; i < 8; ++i) m += y.at(i, k);
        EXPECT_NEAR(b.data()[k], m / 8, 1e-6);
    }
}

TEST(stage2, encoder_lr_scale_is_validated_and_used) {
    TrainConfig c = fixture::tiny_config(7);
    const TrainingData data = fixture::tiny_data(c);
    const TrainedModel s1 = stage1_pretrain(data, c);
    const auto enc_before = values(s1.model.encoder_params());
    c.encoder_lr_scale = 0.0;
    const TrainedModel s2 = stage2_train(s1, data, c);
    EXPECT_EQ(values(s2.model.encoder_params()), enc_before);
}

// ---- model selection and multi-seed runs ---------------------------------------

TEST(select_model, minimum_and_ties) {
    auto run = [](double val, double beta, std::size_t hidden) {
        CandidateRun r;
        r.config.beta = beta;
        r.config.hidden = hidden;
        r.record.stage2_val_loss = {val + 1, val};
        return r;
    };
    EXPECT_EQ(select_model({run(0.5, 1, 16)}), 0u);
    EXPECT_EQ(select_model({run(0.5, 1, 16), run(0.4, 1, 16)}), 1u);
    EXPECT_EQ(select_model({run(0.4, 10, 16), run(0.4, 5, 64)}), 1u);
    EXPECT_EQ(select_model({run(0.4, 5, 64), run(0.4, 5, 32)}), 1u);
}

TEST(multi_seed, single_seed_has_zero_std_and_full_table) {
    const TrainConfig c = fixture::tiny_config();
    const MultiSeedResult r = multi_seed_evaluate(generate_synthetic(fixture::tiny_spec()), c, {3});
    ASSERT_TRUE(r.all_ok());
    ASSERT_EQ(r.rows.size(), 8u);
    for (const auto& row : r.rows) {
        EXPECT_EQ(row.std, 0.0);
        EXPECT_EQ(row.n_seeds, 1u);
        EXPECT_TRUE(std::isfinite(row.mean));
    }
    std::set<std::pair<std::string, std::string>> keys;
    for (const auto& row : r.rows) keys.insert({row.domain_set, row.metric});
    EXPECT_EQ(keys.size(), 8u);
    EXPECT_EQ(r.rows[0].mean, r.seeds[0].train->average.nrmse);
}

TEST(multi_seed, deterministic_and_sample_std) {
    const TrainConfig c = fixture::tiny_config();
    const auto data = generate_synthetic(fixture::tiny_spec());
    const MultiSeedResult a = multi_seed_evaluate(data, c, {1, 2, 3});
    const MultiSeedResult b = multi_seed_evaluate(data, c, {1, 2, 3});
    EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
    std::vector<double> v;
    for (const auto& s : a.seeds) v.push_back(s.test->average.q50);
    const double m = (v[0] + v[1] + v[2]) / 3;
    const double sd = std::sqrt(((v[0] - m) * (v[0] - m) + (v[1] - m) * (v[1] - m) + (v[2] - m) * (v[2] - m)) / 2);
    for (const auto& row : a.rows)
        if (row.domain_set == "test" && row.metric == "q50") {
            EXPECT_NEAR(row.mean, m, 1e-12);
            EXPECT_NEAR(row.std, sd, 1e-12);
        }
}

TEST(multi_seed, failures_are_recorded) {
    TrainConfig c = fixture::tiny_config();
    c.T = 100;  // longer than the series: no windows
    const MultiSeedResult r = multi_seed_evaluate(generate_synthetic(fixture::tiny_spec()), c, {0, 1});
    EXPECT_FALSE(r.all_ok());
    for (const auto& s : r.seeds) EXPECT_FALSE(s.error.empty());
    for (const auto& row : r.rows) EXPECT_EQ(row.n_seeds, 0u);
}

// ---- checkpoints ---------------------------------------------------------------

TEST(checkpoint, round_trip_reproduces_forecasts) {
    const TrainConfig c = fixture::tiny_config(8);
    const TrainingData data = fixture::tiny_data(c);
    const TrainedModel t = train_model(data, c);
    const auto path = std::filesystem::temp_directory_path() / "dgcast_ckpt_test.json";
    save_checkpoint(make_checkpoint(t.model, data, c, "full"), path);
    const Checkpoint ck = load_checkpoint(path);
    EXPECT_EQ(ck.stage, "full");
    EXPECT_EQ(ck.split.test_domains, data.split.test_domains);
    EXPECT_EQ(to_json(ck.config), to_json(c));
    const ForecastModel restored = restore_model(ck);
    EXPECT_EQ(values(restored.all_params()), values(t.model.all_params()));
    const auto a = forecast_windows(t.model, data.test, 1), b = forecast_windows(restored, data.test, 1);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].dist.quantiles, b[i].dist.quantiles);
    std::filesystem::remove(path);
}

TEST(checkpoint, shape_mismatch_is_rejected) {
    const TrainConfig c = fixture::tiny_config();
    const TrainingData data = fixture::tiny_data(c);
    Checkpoint ck = make_checkpoint(build_model(c, data), data, c, "stage1");
    ck.tensors.begin()->second.first.push_back(2);
    EXPECT_THROW(restore_model(ck), Error);
}
