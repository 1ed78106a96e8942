#include "dgcast/training.hpp"

#include "dgcast/error.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

namespace dgcast {

using nlohmann::json;

// ---- config -----------------------------------------------------------------

EncoderKind TrainConfig::resolved_encoder() const {
    if (encoder) return *encoder;
    return decoder == DecoderKind::linear ? EncoderKind::bigru : EncoderKind::mlp;
}

void TrainConfig::validate() const {
    auto need = [](bool ok, const std::string& field, const std::string& what) {
        if (!ok) throw ConfigError("train." + field + ": " + what);
    };
    need(T >= 1, "T", "must be >= 1");
    need(h >= 1, "h", "must be >= 1");
    need(d_z >= 2, "d_z", "must be >= 2");
    need(hidden >= 1, "hidden", "must be >= 1");
    need(kernel % 2 == 1 && kernel <= T, "kernel", "must be odd and <= T");
    need(batch_size >= 1, "batch_size", "must be >= 1");
    need(!regularized() || batch_size >= 2, "batch_size", "must be >= 2 when the regularizer is active");
    need(dropout >= 0.0 && dropout < 1.0, "dropout", "must lie in [0, 1)");
    need(learning_rate > 0.0, "learning_rate", "must be positive");
    need(beta >= 0.0, "beta", "must be >= 0");
    need(reg_weight >= 0.0, "reg_weight", "must be >= 0");
    need(sample_paths >= 1, "sample_paths", "must be >= 1");
    need(stride >= 1, "stride", "must be >= 1");
    need(encoder_lr_scale >= 0.0, "encoder_lr_scale", "must be >= 0");
    need(epochs_stage2 >= 1, "epochs_stage2", "must be >= 1");
    need(patience >= 1, "patience", "must be >= 1");
    try {
        latent_split_index(alpha, d_z);
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("train.alpha: ") + e.what());
    }
}

json to_json(const TrainConfig& c) {
    return json{{"T", c.T},
                {"h", c.h},
                {"d_z", c.d_z},
                {"hidden", c.hidden},
                {"kernel", c.kernel},
                {"batch_size", c.batch_size},
                {"dropout", c.dropout},
                {"learning_rate", c.learning_rate},
                {"beta", c.beta},
                {"alpha", c.alpha},
                {"reg_weight", c.reg_weight},
                {"epochs_stage1", c.epochs_stage1},
                {"epochs_stage2", c.epochs_stage2},
                {"patience", c.patience},
                {"seed", c.seed},
                {"variant", c.variant.name()},
                {"latent_enabled", c.latent_enabled},
                {"decoder", to_string(c.decoder)},
                {"encoder", to_string(c.resolved_encoder())},
                {"sample_paths", c.sample_paths},
                {"clip_norm", c.clip_norm},
                {"encoder_lr_scale", c.encoder_lr_scale},
                {"test_fraction", c.test_fraction},
                {"validation_fraction", c.validation_fraction},
                {"stride", c.stride}};
}

TrainConfig train_config_from_json(const json& j, TrainConfig c) {
    if (!j.is_object()) throw ConfigError("train config must be an object");
    for (const auto& [key, value] : j.items()) {
        try {
            if (key == "T") c.T = value.get<std::size_t>();
            else if (key == "h") c.h = value.get<std::size_t>();
            else if (key == "d_z") c.d_z = value.get<std::size_t>();
            else if (key == "hidden") c.hidden = value.get<std::size_t>();
            else if (key == "kernel") c.kernel = value.get<std::size_t>();
            else if (key == "batch_size") c.batch_size = value.get<std::size_t>();
            else if (key == "dropout") c.dropout = value.get<double>();
            else if (key == "learning_rate") c.learning_rate = value.get<double>();
            else if (key == "beta") c.beta = value.get<double>();
            else if (key == "alpha") c.alpha = value.get<double>();
            else if (key == "reg_weight") c.reg_weight = value.get<double>();
            else if (key == "epochs_stage1") c.epochs_stage1 = value.get<std::size_t>();
            else if (key == "epochs_stage2") c.epochs_stage2 = value.get<std::size_t>();
            else if (key == "patience") c.patience = value.get<std::size_t>();
            else if (key == "seed") c.seed = value.get<std::uint64_t>();
            else if (key == "variant") c.variant = Variant::parse(value.get<std::string>());
            else if (key == "latent_enabled") c.latent_enabled = value.get<bool>();
            else if (key == "decoder") c.decoder = decoder_kind_from_string(value.get<std::string>());
            else if (key == "encoder") {
                const auto s = value.get<std::string>();
                c.encoder = s == "auto" ? std::nullopt : std::optional(encoder_kind_from_string(s));
            } else if (key == "sample_paths") c.sample_paths = value.get<std::size_t>();
            else if (key == "clip_norm") c.clip_norm = value.get<double>();
            else if (key == "encoder_lr_scale") c.encoder_lr_scale = value.get<double>();
            else if (key == "test_fraction") c.test_fraction = value.get<double>();
            else if (key == "validation_fraction") c.validation_fraction = value.get<double>();
            else if (key == "stride") c.stride = value.get<std::size_t>();
            else throw ConfigError("train: unknown key '" + key + "'");
        } catch (const json::exception& e) {
            throw ConfigError("train." + key + ": " + e.what());
        }
    }
    return c;
}

// ---- run records --------------------------------------------------------------

double RunRecord::best_val_loss() const {
    if (stage2_val_loss.empty()) return std::numeric_limits<double>::infinity();
    return *std::min_element(stage2_val_loss.begin(), stage2_val_loss.end());
}

json to_json(const RunRecord& r) {
    return json{{"variant", r.variant},
                {"seed", r.seed},
                {"stage1_loss", r.stage1_loss},
                {"stage2_train_loss", r.stage2_train_loss},
                {"stage2_val_loss", r.stage2_val_loss},
                {"selected_epoch", r.selected_epoch},
                {"stage1_epoch_seconds", r.stage1_epoch_seconds},
                {"stage2_epoch_seconds", r.stage2_epoch_seconds}};
}

RunRecord run_record_from_json(const json& j) {
    RunRecord r;
    r.variant = j.value("variant", "");
    r.seed = j.value("seed", std::uint64_t{0});
    r.stage1_loss = j.value("stage1_loss", std::vector<double>{});
    r.stage2_train_loss = j.value("stage2_train_loss", std::vector<double>{});
    r.stage2_val_loss = j.value("stage2_val_loss", std::vector<double>{});
    r.selected_epoch = j.value("selected_epoch", -1);
    r.stage1_epoch_seconds = j.value("stage1_epoch_seconds", std::vector<double>{});
    r.stage2_epoch_seconds = j.value("stage2_epoch_seconds", std::vector<double>{});
    return r;
}

// ---- data preparation ---------------------------------------------------------

WindowBundle prepare_windows(const WindowSet& set) {
    WindowBundle out;
    out.raw = set.samples;
    out.skipped_series = set.skipped_series;
    out.prepared.reserve(set.samples.size());
    for (const auto& w : set.samples) out.prepared.push_back(normalize_window(w));
    return out;
}

TrainingData prepare_training_data(const std::vector<DomainDataset>& datasets, const TrainConfig& config) {
    config.validate();
    return prepare_training_data(
        datasets, config, split_domains(datasets, config.test_fraction, config.seed, config.validation_fraction));
}

TrainingData prepare_training_data(const std::vector<DomainDataset>& datasets, const TrainConfig& config,
                                   const DomainSplit& split) {
    TrainingData data;
    data.split = split;
    for (int id : split.train_domains) {
        if (std::none_of(datasets.begin(), datasets.end(), [id](const DomainDataset& d) { return d.domain_id == id; }))
            throw DataError("training domain " + std::to_string(id) + " is missing from the data");
    }
    for (const auto& ds : datasets) data.domain_names[ds.domain_id] = ds.domain_name;
    data.feature_dim = datasets.empty() ? 0 : datasets.front().feature_dim;
    data.train = prepare_windows(windows_for(datasets, data.split, WindowRole::train, config.T, config.h, config.stride));
    data.validation =
        prepare_windows(windows_for(datasets, data.split, WindowRole::validation, config.T, config.h, config.stride));
    data.test = prepare_windows(windows_for(datasets, data.split, WindowRole::test, config.T, config.h, config.stride));
    return data;
}

ModelConfig model_config(const TrainConfig& c, std::size_t num_train_domains, std::size_t feature_dim) {
    ModelConfig m;
    m.cvae.T = c.T;
    m.cvae.d_z = c.d_z;
    m.cvae.hidden = c.hidden;
    m.cvae.kernel = c.kernel;
    m.cvae.num_domains = num_train_domains;
    m.cvae.beta = c.beta;
    m.cvae.alpha = c.alpha;
    m.cvae.dropout = c.dropout;
    m.cvae.encoder = c.resolved_encoder();
    m.decoder = c.decoder;
    m.h = c.h;
    m.feature_dim = feature_dim;
    m.sample_paths = c.sample_paths;
    m.variant = c.variant;
    m.latent_enabled = c.latent_enabled;
    return m;
}

namespace {

// Independent random streams per purpose, all derived from the run seed.
nn::Rng stream(std::uint64_t seed, std::uint32_t purpose) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), purpose};
    return nn::Rng(seq);
}

enum Stream : std::uint32_t { kInit = 1, kStage1 = 2, kStage2 = 3, kPredict = 4 };

using Snapshot = std::vector<std::vector<double>>;

Snapshot snapshot(const std::vector<NamedParam>& params) {
    Snapshot s;
    for (const auto& p : params) s.push_back(p.tensor.to_vector());
    return s;
}

void restore(std::vector<NamedParam>& params, const Snapshot& s) {
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto w = params[i].tensor.mutable_data();
        std::copy(s[i].begin(), s[i].end(), w.begin());
    }
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::vector<std::vector<std::size_t>> shuffled_batches(std::size_t n, std::size_t batch_size, nn::Rng& rng) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t b = 0; b < n; b += batch_size)
        out.emplace_back(idx.begin() + static_cast<std::ptrdiff_t>(b),
                         idx.begin() + static_cast<std::ptrdiff_t>(std::min(n, b + batch_size)));
    return out;
}

struct StageOneTerms {
    Tensor total;
    LatentLossTerms latent;
    std::optional<Tensor> omega;
};

StageOneTerms stage_one_objective(const ForecastModel& model, const ForecastBatch& batch, const TrainConfig& config,
                                  nn::Rng& rng) {
    const CvaePair& cvae = model.cvae();
    std::vector<Tensor> noises;
    for (std::size_t i = 0; i < cvae.num_stacks(); ++i) noises.push_back(standard_normal({batch.x.rows(), config.d_z}, rng));
    StageOneTerms out{Tensor(), latent_loss(cvae, batch.latent_view(), noises, true, &rng), std::nullopt};
    out.total = out.latent.total;
    if (config.regularized()) {
        const std::optional<Tensor> z_s =
            out.latent.seasonal ? std::optional<Tensor>(out.latent.seasonal->z) : std::nullopt;
        auto [shared, specific] =
            split_latent_rows(out.latent.trend.z, z_s, latent_split_index(config.alpha, config.d_z));
        out.omega = domain_regularizer(shared, specific, batch.domains);
        out.total = out.total + *out.omega * config.reg_weight;
    }
    return out;
}

[[noreturn]] void diverged(const char* stage, std::size_t epoch, std::size_t batch, const StageOneTerms* terms,
                           double loss) {
    std::ostringstream os;
    os << stage << ": non-finite loss " << loss << " at epoch " << epoch << ", batch " << batch;
    if (terms) {
        os << " (combined_mse=" << terms->latent.combined_mse.item() << ", bracket=" << terms->latent.bracket.item();
        if (terms->omega) os << ", omega=" << terms->omega->item();
        os << ")";
    }
    throw TrainingError(os.str());
}

double validation_loss(const ForecastModel& model, const WindowBundle& val, std::size_t kernel) {
    NoGradGuard guard;
    double total = 0.0;
    const std::size_t n = val.prepared.size();
    constexpr std::size_t chunk = 256;
    for (std::size_t b = 0; b < n; b += chunk) {
        std::vector<std::size_t> idx(std::min(n, b + chunk) - b);
        std::iota(idx.begin(), idx.end(), b);
        const ForecastBatch batch = make_batch(val.prepared, idx, kernel);
        total += model.forecast_loss(batch).item() * static_cast<double>(idx.size());
    }
    return total / static_cast<double>(n);
}

} // namespace

ForecastModel build_model(const TrainConfig& config, const TrainingData& data) {
    nn::Rng rng = stream(config.seed, kInit);
    return ForecastModel(model_config(config, data.split.train_domains.size(), data.feature_dim), rng);
}

TrainedModel stage1_pretrain(const TrainingData& data, const TrainConfig& config) {
    config.validate();
    if (!config.latent_enabled) throw ConfigError("stage1: the latent pathway is disabled; nothing to pretrain");
    if (config.regularized() && data.split.train_domains.size() < 2) {
        throw ConfigError("stage1: the regularizer needs at least 2 training domains");
    }
    if (data.train.prepared.empty()) throw DataError("stage1: no training windows");

    TrainedModel out{build_model(config, data), {}};
    out.record.variant = config.variant.name();
    out.record.seed = config.seed;
    std::vector<NamedParam> params = out.model.cvae().params();
    Adam adam(params, {config.learning_rate, 0.9, 0.999, 1e-8, config.clip_norm});
    nn::Rng rng = stream(config.seed, kStage1);

    double best = std::numeric_limits<double>::infinity();
    Snapshot best_params = snapshot(params);
    const std::size_t n = data.train.prepared.size();
    for (std::size_t epoch = 0; epoch < config.epochs_stage1; ++epoch) {
        const auto start = std::chrono::steady_clock::now();
        double epoch_loss = 0.0;
        const auto batches = shuffled_batches(n, config.batch_size, rng);
        for (std::size_t b = 0; b < batches.size(); ++b) {
            const ForecastBatch batch = make_batch(data.train.prepared, batches[b], config.kernel, &data.split);
            const StageOneTerms terms = stage_one_objective(out.model, batch, config, rng);
            const double loss = terms.total.item();
            if (!std::isfinite(loss)) diverged("stage1", epoch, b, &terms, loss);
            terms.total.backward();
            adam.step();
            epoch_loss += loss * static_cast<double>(batches[b].size());
        }
        epoch_loss /= static_cast<double>(n);
        out.record.stage1_loss.push_back(epoch_loss);
        out.record.stage1_epoch_seconds.push_back(seconds_since(start));
        if (epoch_loss < best) {
            best = epoch_loss;
            best_params = snapshot(params);
        }
    }
    restore(params, best_params);
    return out;
}

TrainedModel stage2_train(std::optional<TrainedModel> pretrained, const TrainingData& data, const TrainConfig& config) {
    config.validate();
    const bool e2e = config.variant.e2e;
    if (e2e && pretrained) throw ConfigError("stage2: the e2e variant trains from scratch; drop the checkpoint");
    if (!e2e && !pretrained && config.latent_enabled) {
        throw ConfigError("stage2: a stage-1 checkpoint is required unless the variant is e2e");
    }
    if (data.validation.prepared.empty()) throw DataError("stage2: validation set is empty");
    if (data.train.prepared.empty()) throw DataError("stage2: no training windows");
    if (e2e && config.regularized() && data.split.train_domains.size() < 2) {
        throw ConfigError("stage2: the regularizer needs at least 2 training domains");
    }

    TrainedModel out = pretrained ? std::move(*pretrained) : TrainedModel{build_model(config, data), {}};
    out.record.variant = config.variant.name();
    out.record.seed = config.seed;
    out.record.stage2_train_loss.clear();
    out.record.stage2_val_loss.clear();
    out.record.stage2_epoch_seconds.clear();

    std::vector<NamedParam> params = out.model.forecaster_params();
    if (config.latent_enabled) {
        auto enc = out.model.encoder_params();
        params.insert(params.end(), enc.begin(), enc.end());
        if (e2e) {
            auto dec = out.model.conditional_decoder_params();
            params.insert(params.end(), dec.begin(), dec.end());
        }
    }
    Adam adam(params, {config.learning_rate, 0.9, 0.999, 1e-8, config.clip_norm});
    if (config.encoder_lr_scale != 1.0) adam.set_lr_scale("encoder_", config.encoder_lr_scale);
    nn::Rng rng = stream(config.seed, kStage2);

    double best = std::numeric_limits<double>::infinity();
    Snapshot best_params = snapshot(params);
    std::size_t since_best = 0;
    const std::size_t n = data.train.prepared.size();
    for (std::size_t epoch = 0; epoch < config.epochs_stage2; ++epoch) {
        const auto start = std::chrono::steady_clock::now();
        double epoch_loss = 0.0;
        const auto batches = shuffled_batches(n, config.batch_size, rng);
        for (std::size_t b = 0; b < batches.size(); ++b) {
            Tensor loss;
            if (e2e) {
                const ForecastBatch batch = make_batch(data.train.prepared, batches[b], config.kernel, &data.split);
                const StageOneTerms terms = stage_one_objective(out.model, batch, config, rng);
                const std::optional<Tensor> mu_s =
                    terms.latent.seasonal ? std::optional<Tensor>(terms.latent.seasonal->mu) : std::nullopt;
                const Tensor z = out.model.latent_from_means(terms.latent.trend.mu, mu_s);
                const GaussianOutput g = out.model.decode(batch, z, true, &rng);
                loss = terms.total + gaussian_nll(batch.y, g.mu, g.sigma);
                if (!std::isfinite(loss.item())) diverged("e2e", epoch, b, &terms, loss.item());
            } else {
                const ForecastBatch batch = make_batch(data.train.prepared, batches[b], config.kernel);
                loss = out.model.forecast_loss(batch, true, &rng);
                if (!std::isfinite(loss.item())) diverged("stage2", epoch, b, nullptr, loss.item());
            }
            const double value = loss.item();
            loss.backward();
            adam.step();
            epoch_loss += value * static_cast<double>(batches[b].size());
        }
        out.record.stage2_train_loss.push_back(epoch_loss / static_cast<double>(n));
        const double val = validation_loss(out.model, data.validation, config.kernel);
        if (!std::isfinite(val)) diverged("stage2 validation", epoch, 0, nullptr, val);
        out.record.stage2_val_loss.push_back(val);
        out.record.stage2_epoch_seconds.push_back(seconds_since(start));
        if (val < best) {
            best = val;
            best_params = snapshot(params);
            out.record.selected_epoch = static_cast<int>(epoch);
            since_best = 0;
        } else if (++since_best >= config.patience) {
            break;
        }
    }
    restore(params, best_params);
    return out;
}

TrainedModel train_model(const TrainingData& data, const TrainConfig& config) {
    if (config.variant.e2e || !config.latent_enabled) return stage2_train(std::nullopt, data, config);
    return stage2_train(stage1_pretrain(data, config), data, config);
}

std::vector<WindowForecast> forecast_windows(const ForecastModel& model, const WindowBundle& windows,
                                             std::uint64_t seed) {
    nn::Rng rng = stream(seed, kPredict);
    const auto dists = model.predict(windows.prepared, rng);
    std::vector<WindowForecast> out;
    out.reserve(dists.size());
    for (std::size_t i = 0; i < dists.size(); ++i) {
        out.push_back({windows.raw[i].domain_id, windows.raw[i].y, dists[i]});
    }
    return out;
}

MetricReport evaluate(const ForecastModel& model, const WindowBundle& windows,
                      const std::map<int, std::string>& set_domains, const std::string& set_name,
                      const TrainConfig& config) {
    MetricReport report = aggregate(forecast_windows(model, windows, config.seed), set_domains, set_name);
    report.seed = config.seed;
    report.config_hash = fnv1a_hex(to_json(config).dump());
    report.variant = config.variant.name();
    if (!config.latent_enabled) report.variant += " (latent disabled)";
    if (model.config().decoder == DecoderKind::recurrent && config.sample_paths < 10) {
        report.warnings.push_back("sample_paths < 10; quantiles are coarse");
    }
    return report;
}

// ---- checkpoints --------------------------------------------------------------

Checkpoint make_checkpoint(const ForecastModel& model, const TrainingData& data, const TrainConfig& config,
                           const std::string& stage) {
    Checkpoint c;
    c.config = config;
    c.stage = stage;
    c.split = data.split;
    c.domain_names = data.domain_names;
    c.feature_dim = data.feature_dim;
    for (const auto& p : model.all_params()) c.tensors[p.name] = {p.tensor.shape(), p.tensor.to_vector()};
    return c;
}

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
    json j;
    j["format"] = "dgcast-checkpoint";
    j["version"] = kCheckpointVersion;
    j["stage"] = c.stage;
    j["config"] = to_json(c.config);
    j["d_z"] = c.config.d_z;
    j["alpha"] = c.config.alpha;
    j["beta"] = c.config.beta;
    j["kernel"] = c.config.kernel;
    j["feature_dim"] = c.feature_dim;
    json train = json::array();
    for (std::size_t i = 0; i < c.split.train_domains.size(); ++i) {
        const int id = c.split.train_domains[i];
        const auto& b = c.split.bounds.at(id);
        train.push_back({{"id", id},
                         {"name", c.domain_names.at(id)},
                         {"onehot_index", i},
                         {"train_end", b.train_end},
                         {"val_end", b.val_end}});
    }
    json test = json::array();
    for (int id : c.split.test_domains) test.push_back({{"id", id}, {"name", c.domain_names.at(id)}});
    j["train_domains"] = train;
    j["test_domains"] = test;
    json names = json::object();
    for (const auto& [id, name] : c.domain_names) names[std::to_string(id)] = name;
    j["domain_names"] = names;
    json tensors = json::object();
    for (const auto& [name, t] : c.tensors) tensors[name] = {{"shape", t.first}, {"data", t.second}};
    j["tensors"] = tensors;
    std::ofstream out(path);
    if (!out) throw DataError("cannot write checkpoint " + path.string());
    out << j.dump() << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("checkpoint not found: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError("checkpoint " + path.string() + " is not valid JSON: " + e.what());
    }
    if (j.value("format", "") != "dgcast-checkpoint") throw DataError("not a checkpoint: " + path.string());
    if (j.value("version", 0) != kCheckpointVersion) {
        throw DataError("unsupported checkpoint version in " + path.string());
    }
    Checkpoint c;
    try {
        c.config = train_config_from_json(j.at("config"));
        c.stage = j.at("stage").get<std::string>();
        c.feature_dim = j.at("feature_dim").get<std::size_t>();
        for (const auto& d : j.at("train_domains")) {
            const int id = d.at("id").get<int>();
            c.split.train_domains.push_back(id);
            c.split.bounds[id] = {d.at("train_end").get<std::int64_t>(), d.at("val_end").get<std::int64_t>()};
        }
        for (const auto& d : j.at("test_domains")) c.split.test_domains.push_back(d.at("id").get<int>());
        for (const auto& [id, name] : j.at("domain_names").items()) c.domain_names[std::stoi(id)] = name.get<std::string>();
        for (const auto& [name, t] : j.at("tensors").items()) {
            c.tensors[name] = {t.at("shape").get<Shape>(), t.at("data").get<std::vector<double>>()};
        }
    } catch (const json::exception& e) {
        throw DataError("malformed checkpoint " + path.string() + ": " + e.what());
    }
    return c;
}

void load_params(ForecastModel& model, const Checkpoint& ckpt) {
    for (auto& p : model.all_params()) {
        const auto it = ckpt.tensors.find(p.name);
        if (it == ckpt.tensors.end()) throw DataError("checkpoint is missing tensor '" + p.name + "'");
        if (it->second.first != p.tensor.shape()) {
            throw DataError("checkpoint tensor '" + p.name + "' has shape " + shape_str(it->second.first) +
                            ", model expects " + shape_str(p.tensor.shape()));
        }
        Tensor t = p.tensor;
        auto w = t.mutable_data();
        std::copy(it->second.second.begin(), it->second.second.end(), w.begin());
    }
}

ForecastModel restore_model(const Checkpoint& ckpt) {
    nn::Rng rng(0);
    ForecastModel model(model_config(ckpt.config, ckpt.split.train_domains.size(), ckpt.feature_dim), rng);
    load_params(model, ckpt);
    return model;
}

// ---- selection and multi-seed -------------------------------------------------

std::size_t select_model(const std::vector<CandidateRun>& runs) {
    if (runs.empty()) throw ConfigError("select_model: no runs");
    std::size_t best = 0;
    for (std::size_t i = 1; i < runs.size(); ++i) {
        const auto key = [&](std::size_t k) {
            return std::make_tuple(runs[k].record.best_val_loss(), runs[k].config.beta, runs[k].config.hidden);
        };
        if (key(i) < key(best)) best = i;
    }
    return best;
}

bool MultiSeedResult::all_ok() const {
    return std::all_of(seeds.begin(), seeds.end(), [](const SeedOutcome& s) { return s.ok; });
}

MultiSeedResult multi_seed_evaluate(const std::vector<DomainDataset>& datasets, const TrainConfig& config,
                                    const std::vector<std::uint64_t>& seeds) {
    if (seeds.empty()) throw ConfigError("multi_seed_evaluate: no seeds");
    MultiSeedResult result;
    for (std::uint64_t seed : seeds) {
        SeedOutcome outcome;
        outcome.seed = seed;
        TrainConfig cfg = config;
        cfg.seed = seed;
        try {
            const TrainingData data = prepare_training_data(datasets, cfg);
            TrainedModel trained = train_model(data, cfg);
            std::map<int, std::string> train_names;
            std::map<int, std::string> test_names;
            for (int id : data.split.train_domains) train_names[id] = data.domain_names.at(id);
            for (int id : data.split.test_domains) test_names[id] = data.domain_names.at(id);
            outcome.train = evaluate(trained.model, data.validation, train_names, "train", cfg);
            outcome.test = evaluate(trained.model, data.test, test_names, "test", cfg);
            outcome.record = std::move(trained.record);
            outcome.ok = true;
        } catch (const std::exception& e) {
            outcome.error = e.what();
        }
        result.seeds.push_back(std::move(outcome));
    }

    const std::vector<std::pair<std::string, double DomainMetrics::*>> metrics{
        {"nrmse", &DomainMetrics::nrmse},
        {"smape", &DomainMetrics::smape},
        {"q50", &DomainMetrics::q50},
        {"qmean", &DomainMetrics::qmean}};
    for (const std::string set : {"train", "test"}) {
        for (const auto& [name, member] : metrics) {
            std::vector<double> values;
            for (const auto& s : result.seeds) {
                if (!s.ok) continue;
                const MetricReport& r = set == "train" ? *s.train : *s.test;
                values.push_back(r.average.*member);
            }
            AggregateRow row;
            row.domain_set = set;
            row.metric = name;
            row.n_seeds = values.size();
            if (!values.empty()) {
                row.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
                if (values.size() > 1) {
                    double ss = 0.0;
                    for (double v : values) ss += (v - row.mean) * (v - row.mean);
                    row.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
                }
            }
            result.rows.push_back(row);
        }
    }
    return result;
}

json to_json(const MultiSeedResult& result) {
    json j;
    j["seeds"] = json::array();
    for (const auto& s : result.seeds) {
        json e{{"seed", s.seed}, {"ok", s.ok}};
        if (!s.ok) e["error"] = s.error;
        if (s.train) e["train"] = to_json(*s.train);
        if (s.test) e["test"] = to_json(*s.test);
        j["seeds"].push_back(e);
    }
    j["rows"] = json::array();
    for (const auto& r : result.rows) {
        j["rows"].push_back(
            {{"domain_set", r.domain_set}, {"metric", r.metric}, {"mean", r.mean}, {"std", r.std}, {"n_seeds", r.n_seeds}});
    }
    return j;
}

} // namespace dgcast
