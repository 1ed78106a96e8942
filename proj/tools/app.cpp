#include "app.hpp"

#include "dgcast/decomposition.hpp"
#include "dgcast/error.hpp"
#include "dgcast/latent_analysis.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace dgcast::app {

namespace fs = std::filesystem;
using nlohmann::json;

// ---- config -------------------------------------------------------------------

json to_json(const SyntheticSpec& s) {
    return json{{"num_domains", s.num_domains},
                {"series_per_domain", s.series_per_domain},
                {"length", s.length},
                {"shared_period", s.shared_period},
                {"shared_amplitude", s.shared_amplitude},
                {"slope", {s.slope.lo, s.slope.hi}},
                {"period", {s.period.lo, s.period.hi}},
                {"amplitude", {s.amplitude.lo, s.amplitude.hi}},
                {"phase", {s.phase.lo, s.phase.hi}},
                {"noise_std", s.noise_std},
                {"seed", s.seed},
                {"min_window", s.min_window}};
}

SyntheticSpec synthetic_from_json(const json& j, SyntheticSpec s) {
    if (!j.is_object()) throw ConfigError("synthetic: must be an object");
    auto interval = [](const json& v) {
        const auto pair = v.get<std::vector<double>>();
        if (pair.size() != 2) throw ConfigError("expected [lo, hi]");
        return Interval{pair[0], pair[1]};
    };
    for (const auto& [key, v] : j.items()) {
        try {
            if (key == "num_domains") s.num_domains = v.get<int>();
            else if (key == "series_per_domain") s.series_per_domain = v.get<int>();
            else if (key == "length") s.length = v.get<int>();
            else if (key == "shared_period") s.shared_period = v.get<double>();
            else if (key == "shared_amplitude") s.shared_amplitude = v.get<double>();
            else if (key == "slope") s.slope = interval(v);
            else if (key == "period") s.period = interval(v);
            else if (key == "amplitude") s.amplitude = interval(v);
            else if (key == "phase") s.phase = interval(v);
            else if (key == "noise_std") s.noise_std = v.get<double>();
            else if (key == "seed") s.seed = v.get<std::uint64_t>();
            else if (key == "min_window") s.min_window = v.get<int>();
            else throw ConfigError("unknown key");
        } catch (const std::exception& e) {
            throw ConfigError("synthetic." + key + ": " + e.what());
        }
    }
    return s;
}

namespace {

json schema_json(const RunConfig& c) {
    json j{{"domain_column", c.schema.domain_column},
           {"series_column", c.schema.series_column},
           {"timestamp_column", c.schema.timestamp_column},
           {"value_column", c.schema.value_column},
           {"fill", c.schema.fill == FillPolicy::zero ? "zero" : "none"},
           {"fill_value", c.schema.fill_value},
           {"value_scale", c.schema.value_scale}};
    j["csv"] = c.data_csv ? json(c.data_csv->string()) : json(nullptr);
    return j;
}

void schema_from_json(const json& j, RunConfig& c) {
    if (!j.is_object()) throw ConfigError("data: must be an object");
    for (const auto& [key, v] : j.items()) {
        try {
            if (key == "csv") c.data_csv = v.is_null() ? std::nullopt : std::optional<fs::path>(v.get<std::string>());
            else if (key == "domain_column") c.schema.domain_column = v.get<std::string>();
            else if (key == "series_column") c.schema.series_column = v.get<std::string>();
            else if (key == "timestamp_column") c.schema.timestamp_column = v.get<std::string>();
            else if (key == "value_column") c.schema.value_column = v.get<std::string>();
            else if (key == "fill") {
                const auto f = v.get<std::string>();
                if (f != "zero" && f != "none") throw ConfigError("expected zero or none");
                c.schema.fill = f == "zero" ? FillPolicy::zero : FillPolicy::none;
            } else if (key == "fill_value") c.schema.fill_value = v.get<double>();
            else if (key == "value_scale") c.schema.value_scale = v.get<double>();
            else throw ConfigError("unknown key");
        } catch (const std::exception& e) {
            throw ConfigError("data." + key + ": " + e.what());
        }
    }
}

} // namespace

json to_json(const RunConfig& c) {
    return json{{"data", schema_json(c)},
                {"synthetic", to_json(c.synthetic)},
                {"train", dgcast::to_json(c.train)},
                {"ablate", {{"variants", c.ablate_variants}, {"seeds", c.ablate_seeds}}}};
}

RunConfig run_config_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("config: top level must be an object");
    RunConfig c;
    for (const auto& [key, v] : j.items()) {
        if (key == "data") schema_from_json(v, c);
        else if (key == "synthetic") c.synthetic = synthetic_from_json(v);
        else if (key == "train") c.train = train_config_from_json(v);
        else if (key == "ablate") {
            for (const auto& [k, a] : v.items()) {
                try {
                    if (k == "variants") c.ablate_variants = a.get<std::vector<std::string>>();
                    else if (k == "seeds") c.ablate_seeds = a.get<std::vector<std::uint64_t>>();
                    else throw ConfigError("unknown key");
                } catch (const std::exception& e) {
                    throw ConfigError("ablate." + k + ": " + e.what());
                }
            }
        } else {
            throw ConfigError("config: unknown section '" + key + "'");
        }
    }
    return c;
}

namespace {

// ---- run plumbing -------------------------------------------------------------

std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

struct UsageError : Error {
    using Error::Error;
};

void write_text(const fs::path& path, const std::string& body) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << body;
}

class Run {
public:
    Run(std::string command, fs::path out, bool overwrite, std::string config_path, const RunConfig& config)
        : command_(std::move(command)), out_(std::move(out)), config_path_(std::move(config_path)), config_(config) {
        manifest_ = out_ / ("manifest." + command_ + ".json");
        if (fs::exists(manifest_) && !overwrite) {
            throw UsageError(manifest_.string() + " exists; pass --overwrite to rerun " + command_);
        }
        fs::create_directories(out_);
        started_ = utc_now();
    }

    const fs::path& dir() const { return out_; }
    void artifact(const std::string& key, const fs::path& path) { artifacts_[key] = path.string(); }
    void note(const std::string& key, json value) { extra_[key] = std::move(value); }

    void finish() const {
        json m{{"command", command_},
               {"config_file", config_path_.empty() ? json(nullptr) : json(config_path_)},
               {"config", to_json(config_)},
               {"output_dir", out_.string()},
               {"started_at", started_},
               {"finished_at", utc_now()},
               {"artifacts", artifacts_}};
        for (const auto& [k, v] : extra_.items()) m[k] = v;
        write_text(manifest_, m.dump(2) + "\n");
    }

private:
    std::string command_;
    fs::path out_;
    std::string config_path_;
    RunConfig config_;
    fs::path manifest_;
    std::string started_;
    json artifacts_ = json::object();
    json extra_ = json::object();
};

std::vector<DomainDataset> load_data(const RunConfig& c, json& source) {
    if (c.data_csv) {
        if (!fs::exists(*c.data_csv)) throw DataError("data file not found: " + c.data_csv->string());
        source = {{"csv", c.data_csv->string()}};
        return ingest_csv(*c.data_csv, c.schema);
    }
    source = {{"synthetic", to_json(c.synthetic)}};
    return generate_synthetic(c.synthetic);
}

std::map<int, std::string> names_of(const std::vector<int>& ids, const std::map<int, std::string>& all) {
    std::map<int, std::string> out;
    for (int id : ids) out[id] = all.at(id);
    return out;
}

Checkpoint require_checkpoint(const fs::path& path) {
    if (!fs::exists(path)) throw DataError("checkpoint not found: expected " + path.string());
    return load_checkpoint(path);
}

const WindowBundle& bundle_for(const TrainingData& data, const std::string& set) {
    if (set == "train") return data.validation;
    if (set == "test") return data.test;
    throw UsageError("--set must be train or test, got '" + set + "'");
}

std::vector<int> domains_for(const TrainingData& data, const std::string& set) {
    return set == "train" ? data.split.train_domains : data.split.test_domains;
}

std::string fmt(double v, int precision = 4) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(precision) << v;
    return os.str();
}

// ---- commands -----------------------------------------------------------------

struct Options {
    std::string config_path;
    std::string out;
    bool overwrite = false;
    std::string data;
    std::optional<std::uint64_t> seed;
    std::string variant;
    std::optional<std::size_t> epochs_stage1;
    std::optional<std::size_t> epochs_stage2;
    std::string decoder;
    std::string encoder;
    bool no_latent = false;
    std::string checkpoint;
    std::string set = "both";
    std::optional<std::size_t> kernel;
    std::string domain;
    std::string series;
    std::string variants;
    std::string seeds;
    std::optional<int> num_domains;
    std::optional<int> series_per_domain;
    std::optional<int> length;
};

RunConfig resolve(const Options& o) {
    RunConfig c;
    if (!o.config_path.empty()) {
        std::ifstream in(o.config_path);
        if (!in) throw UsageError("config file not found: " + o.config_path);
        json j;
        try {
            in >> j;
        } catch (const json::exception& e) {
            throw ConfigError("config file " + o.config_path + " is not valid JSON: " + e.what());
        }
        c = run_config_from_json(j);
    }
    if (!o.data.empty()) c.data_csv = fs::path(o.data);
    if (o.seed) {
        c.train.seed = *o.seed;
        c.synthetic.seed = *o.seed;
    }
    if (!o.variant.empty()) c.train.variant = Variant::parse(o.variant);
    if (o.epochs_stage1) c.train.epochs_stage1 = *o.epochs_stage1;
    if (o.epochs_stage2) c.train.epochs_stage2 = *o.epochs_stage2;
    if (!o.decoder.empty()) c.train.decoder = decoder_kind_from_string(o.decoder);
    if (!o.encoder.empty()) c.train.encoder = encoder_kind_from_string(o.encoder);
    if (o.no_latent) c.train.latent_enabled = false;
    if (o.kernel) c.train.kernel = *o.kernel;
    if (o.num_domains) c.synthetic.num_domains = *o.num_domains;
    if (o.series_per_domain) c.synthetic.series_per_domain = *o.series_per_domain;
    if (o.length) c.synthetic.length = *o.length;
    if (!o.variants.empty()) {
        c.ablate_variants.clear();
        std::stringstream ss(o.variants);
        for (std::string v; std::getline(ss, v, ',');) c.ablate_variants.push_back(v);
    }
    if (!o.seeds.empty()) {
        c.ablate_seeds.clear();
        std::stringstream ss(o.seeds);
        for (std::string v; std::getline(ss, v, ',');) {
            try {
                c.ablate_seeds.push_back(std::stoull(v));
            } catch (const std::exception&) {
                throw UsageError("--seeds: '" + v + "' is not an integer");
            }
        }
    }
    return c;
}

fs::path output_dir(const Options& o) {
    if (!o.out.empty()) return o.out;
    if (const char* root = std::getenv(kOutputRootEnv); root && *root) return root;
    return "runs";
}

void cmd_synth(const Options& o) {
    const RunConfig c = resolve(o);
    validate(c.synthetic);
    Run run("synth", output_dir(o), o.overwrite, o.config_path, c);
    const auto data = generate_synthetic(c.synthetic);
    const fs::path path = run.dir() / "data.csv";
    write_csv(path, data);
    run.artifact("dataset", path);
    run.finish();
    std::cout << "wrote " << data.size() << " domains to " << path.string() << '\n';
}

void cmd_decompose(const Options& o) {
    const RunConfig c = resolve(o);
    Run run("decompose", output_dir(o), o.overwrite, o.config_path, c);
    json source;
    const auto data = load_data(c, source);
    run.note("data_source", source);
    std::ostringstream os;
    os << "domain,series,timestamp,value,trend,seasonal\n" << std::setprecision(17);
    std::size_t written = 0;
    for (const auto& ds : data) {
        if (!o.domain.empty() && ds.domain_name != o.domain) continue;
        for (const auto& s : ds.series) {
            if (!o.series.empty() && s.name != o.series) continue;
            const DecomposedWindow d = decompose(s.values, c.train.kernel);
            for (std::size_t t = 0; t < s.values.size(); ++t) {
                os << ds.domain_name << ',' << s.name << ',' << s.timestamps[t] << ',' << s.values[t] << ','
                   << d.trend[t] << ',' << d.seasonal[t] << '\n';
            }
            ++written;
        }
    }
    if (written == 0) throw DataError("decompose: no series matched the domain/series filter");
    const fs::path path = run.dir() / "decompose.csv";
    write_text(path, os.str());
    run.artifact("decomposition", path);
    run.finish();
    std::cout << "decomposed " << written << " series with kernel " << c.train.kernel << " into " << path.string()
              << '\n';
}

void print_record(const RunRecord& r) {
    if (!r.stage1_loss.empty()) std::cout << "stage1 final loss " << fmt(r.stage1_loss.back()) << '\n';
    if (!r.stage2_val_loss.empty()) {
        std::cout << "stage2 best validation NLL " << fmt(r.best_val_loss()) << " at epoch " << r.selected_epoch
                  << '\n';
    }
}

void cmd_pretrain(const Options& o) {
    const RunConfig c = resolve(o);
    c.train.validate();
    Run run("pretrain", output_dir(o), o.overwrite, o.config_path, c);
    json source;
    const auto datasets = load_data(c, source);
    run.note("data_source", source);
    const TrainingData data = prepare_training_data(datasets, c.train);
    TrainedModel trained = stage1_pretrain(data, c.train);
    const fs::path ckpt = run.dir() / "stage1.ckpt.json";
    const fs::path record = run.dir() / "stage1.record.json";
    save_checkpoint(make_checkpoint(trained.model, data, c.train, "stage1"), ckpt);
    write_text(record, to_json(trained.record).dump(2) + "\n");
    run.artifact("checkpoint", ckpt);
    run.artifact("record", record);
    run.note("variant", c.train.variant.name());
    run.finish();
    print_record(trained.record);
    std::cout << "checkpoint " << ckpt.string() << '\n';
}

void cmd_train(const Options& o) {
    RunConfig c = resolve(o);
    c.train.validate();
    Run run("train", output_dir(o), o.overwrite, o.config_path, c);
    json source;
    const auto datasets = load_data(c, source);
    run.note("data_source", source);
    const bool needs_stage1 = !c.train.variant.e2e && c.train.latent_enabled;
    std::optional<TrainedModel> pretrained;
    TrainingData data;
    if (needs_stage1) {
        const fs::path path = o.checkpoint.empty() ? run.dir() / "stage1.ckpt.json" : fs::path(o.checkpoint);
        const Checkpoint ckpt = require_checkpoint(path);
        if (ckpt.stage != "stage1") throw DataError(path.string() + " is not a stage-1 checkpoint");
        data = prepare_training_data(datasets, c.train, ckpt.split);
        pretrained = TrainedModel{restore_model(ckpt), {}};
        if (pretrained->model.config().cvae.d_z != c.train.d_z ||
            pretrained->model.config().variant != c.train.variant) {
            throw ConfigError("train: config disagrees with the stage-1 checkpoint (d_z or variant)");
        }
        run.artifact("stage1_checkpoint", path);
    } else {
        data = prepare_training_data(datasets, c.train);
    }
    TrainedModel trained = stage2_train(std::move(pretrained), data, c.train);
    const fs::path ckpt = run.dir() / "model.ckpt.json";
    const fs::path record = run.dir() / "train.record.json";
    save_checkpoint(make_checkpoint(trained.model, data, c.train, "full"), ckpt);
    write_text(record, to_json(trained.record).dump(2) + "\n");
    run.artifact("checkpoint", ckpt);
    run.artifact("record", record);
    run.note("variant", c.train.variant.name());
    run.finish();
    print_record(trained.record);
    std::cout << "checkpoint " << ckpt.string() << '\n';
}

// Loads the full checkpoint and rebuilds the data with its split.
struct Loaded {
    Checkpoint ckpt;
    ForecastModel model;
    std::vector<DomainDataset> datasets;
    TrainingData data;
};

Loaded load_trained(const Options& o, RunConfig& c, Run& run, const char* default_name) {
    const fs::path path = o.checkpoint.empty() ? run.dir() / default_name : fs::path(o.checkpoint);
    Loaded l{require_checkpoint(path), {}, {}, {}};
    run.artifact("checkpoint", path);
    // The checkpoint's training config is authoritative for the model; data options still come from c.
    c.train = l.ckpt.config;
    l.model = restore_model(l.ckpt);
    json source;
    l.datasets = load_data(c, source);
    run.note("data_source", source);
    l.data = prepare_training_data(l.datasets, c.train, l.ckpt.split);
    return l;
}

std::vector<std::string> sets_of(const std::string& set) {
    if (set == "both") return {"train", "test"};
    if (set == "train" || set == "test") return {set};
    throw UsageError("--set must be train, test or both, got '" + set + "'");
}

void cmd_evaluate(const Options& o) {
    RunConfig c = resolve(o);
    Run run("evaluate", output_dir(o), o.overwrite, o.config_path, c);
    const Loaded l = load_trained(o, c, run, "model.ckpt.json");
    for (const auto& set : sets_of(o.set)) {
        const MetricReport report = evaluate(l.model, bundle_for(l.data, set),
                                             names_of(domains_for(l.data, set), l.data.domain_names), set, c.train);
        write_report(report, run.dir(), "report_" + set);
        run.artifact("report_" + set, run.dir() / ("report_" + set + ".json"));
        std::cout << format_table(report);
    }
    run.note("variant", c.train.variant.name());
    run.finish();
}

void cmd_forecast(const Options& o) {
    RunConfig c = resolve(o);
    Run run("forecast", output_dir(o), o.overwrite, o.config_path, c);
    const Loaded l = load_trained(o, c, run, "model.ckpt.json");
    for (const auto& set : sets_of(o.set == "both" ? "test" : o.set)) {
        const WindowBundle& b = bundle_for(l.data, set);
        const auto forecasts = forecast_windows(l.model, b, c.train.seed);
        std::map<int, const DomainDataset*> by_id;
        for (const auto& ds : l.datasets) by_id[ds.domain_id] = &ds;
        std::ostringstream os;
        os << "domain,series,origin_timestamp,step";
        for (double q : kQuantileLevels) os << ",q" << static_cast<int>(std::lround(q * 100));
        os << ",point\n" << std::setprecision(17);
        for (std::size_t i = 0; i < forecasts.size(); ++i) {
            const WindowSample& w = b.raw[i];
            const DomainDataset& ds = *by_id.at(w.domain_id);
            const ForecastDistribution& d = forecasts[i].dist;
            for (std::size_t k = 0; k < d.point.size(); ++k) {
                os << ds.domain_name << ',' << ds.series.at(static_cast<std::size_t>(w.series_index)).name << ','
                   << w.origin_timestamp << ',' << k + 1;
                for (const auto& row : d.quantiles) os << ',' << row[k];
                os << ',' << d.point[k] << '\n';
            }
        }
        const fs::path path = run.dir() / ("forecast_" + set + ".csv");
        write_text(path, os.str());
        run.artifact("forecast_" + set, path);
        std::cout << "wrote " << forecasts.size() << " forecasts to " << path.string() << '\n';
    }
    run.finish();
}

void cmd_dump_latents(const Options& o) {
    RunConfig c = resolve(o);
    const std::size_t want_dz = c.train.d_z;
    const double want_alpha = c.train.alpha;
    const bool explicit_shape = !o.config_path.empty();
    Run run("dump-latents", output_dir(o), o.overwrite, o.config_path, c);
    const char* fallback = fs::exists(run.dir() / "model.ckpt.json") ? "model.ckpt.json" : "stage1.ckpt.json";
    const Loaded l = load_trained(o, c, run, fallback);
    for (const auto& set : sets_of(o.set == "both" ? "test" : o.set)) {
        const WindowBundle& b = set == "train" ? l.data.train : l.data.test;
        const LatentDump dump =
            explicit_shape ? dump_latents(l.model, b.prepared, want_dz, want_alpha) : dump_latents(l.model, b.prepared);
        const fs::path path = run.dir() / ("latents_" + set + ".csv");
        write_latent_csv(dump, path);
        run.artifact("latents_" + set, path);
        std::ostringstream line;
        try {
            const SeparationScore s = separation_score(dump);
            line << "separation (" << set << "): shared_ratio " << fmt(s.shared_ratio) << "  specific_ratio "
                 << fmt(s.specific_ratio) << '\n';
            for (const auto& w : s.warnings) line << "warning: " << w << '\n';
            json score{{"set", set},
                       {"shared_ratio", s.shared_ratio},
                       {"specific_ratio", s.specific_ratio},
                       {"shared_degenerate", s.shared_degenerate},
                       {"specific_degenerate", s.specific_degenerate},
                       {"warnings", s.warnings}};
            write_text(run.dir() / ("separation_" + set + ".json"), score.dump(2) + "\n");
            run.artifact("separation_" + set, run.dir() / ("separation_" + set + ".json"));
        } catch (const DataError& e) {
            line << "separation (" << set << "): not computed: " << e.what() << '\n';
        }
        std::cout << line.str();
        const fs::path report = run.dir() / ("report_" + set + ".txt");
        if (fs::exists(report)) {
            std::ofstream(report, std::ios::app) << line.str();
        }
    }
    run.finish();
}

void cmd_ablate(const Options& o) {
    const RunConfig c = resolve(o);
    std::vector<Variant> variants;
    for (const auto& v : c.ablate_variants) variants.push_back(Variant::parse(v));
    c.train.validate();
    Run run("ablate", output_dir(o), o.overwrite, o.config_path, c);
    json source;
    const auto datasets = load_data(c, source);
    run.note("data_source", source);

    json results = json::array();
    std::ostringstream table;
    const std::vector<std::string> metrics{"q50", "smape", "nrmse", "qmean"};
    table << std::left << std::setw(22) << "variant";
    for (const auto& m : metrics) table << std::setw(22) << ("test " + m);
    table << "status\n";
    std::size_t incomplete = 0;
    for (std::size_t i = 0; i < variants.size(); ++i) {
        TrainConfig cfg = c.train;
        cfg.variant = variants[i];
        const std::string name = variants[i].name();
        table << std::left << std::setw(22) << name;
        try {
            const MultiSeedResult r = multi_seed_evaluate(datasets, cfg, c.ablate_seeds);
            json entry = dgcast::to_json(r);
            entry["variant"] = name;
            results.push_back(entry);
            for (const auto& m : metrics) {
                for (const auto& row : r.rows) {
                    if (row.domain_set != "test" || row.metric != m) continue;
                    table << std::setw(22)
                          << (row.n_seeds ? fmt(row.mean) + " +- " + fmt(row.std) : std::string("-"));
                }
            }
            std::size_t failed = 0;
            for (const auto& s : r.seeds) failed += s.ok ? 0 : 1;
            if (failed) ++incomplete;
            if (failed == r.seeds.size()) table << "failed";
            else if (failed) table << "partial (" << failed << " seeds failed)";
            else table << "ok";
        } catch (const std::exception& e) {
            results.push_back({{"variant", name}, {"error", e.what()}});
            ++incomplete;
            for (std::size_t k = 0; k < metrics.size(); ++k) table << std::setw(22) << "-";
            table << "failed: " << e.what();
        }
        table << '\n';
    }
    const fs::path json_path = run.dir() / "ablate.json";
    const fs::path txt_path = run.dir() / "ablate.txt";
    write_text(json_path, json{{"seeds", c.ablate_seeds}, {"variants", results}}.dump(2) + "\n");
    write_text(txt_path, table.str());
    run.artifact("ablate_json", json_path);
    run.artifact("ablate_table", txt_path);
    run.finish();
    std::cout << table.str();
    if (incomplete) {
        throw TrainingError(std::to_string(incomplete) + " of " + std::to_string(variants.size()) +
                            " variants had failed seeds; see " + json_path.string());
    }
}

} // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"Latent-factor domain generalization for probabilistic forecasting"};
    app.require_subcommand(1);
    Options o;

    auto common = [&](CLI::App* cmd) {
        cmd->add_option("-c,--config", o.config_path, "JSON config file");
        cmd->add_option("-o,--out", o.out,
                        std::string("Output directory (default $") + kOutputRootEnv + " or ./runs)");
        cmd->add_flag("--overwrite", o.overwrite, "Allow rerunning into an existing output directory");
        cmd->add_option("--data", o.data, "Input CSV (domain,series,timestamp,value[,feat_*])");
        cmd->add_option("--seed", o.seed, "Seed for data synthesis, splitting and training");
    };
    auto training = [&](CLI::App* cmd) {
        cmd->add_option("--variant", o.variant, "full, e2e, no_reg, no_decomp, shared_only, no_cond ('+' joins)");
        cmd->add_option("--epochs-stage1", o.epochs_stage1);
        cmd->add_option("--epochs-stage2", o.epochs_stage2);
        cmd->add_option("--decoder", o.decoder, "recurrent or linear");
        cmd->add_option("--encoder", o.encoder, "mlp or bigru");
        cmd->add_flag("--no-latent", o.no_latent, "Force z = 0 (baseline decoder)");
    };
    auto trained = [&](CLI::App* cmd) {
        cmd->add_option("--checkpoint", o.checkpoint, "Checkpoint path (default under the output directory)");
        cmd->add_option("--set", o.set, "train, test or both");
    };

    auto* synth = app.add_subcommand("synth", "Generate a synthetic multi-domain dataset");
    common(synth);
    synth->add_option("--domains", o.num_domains);
    synth->add_option("--series", o.series_per_domain);
    synth->add_option("--length", o.length);
    synth->callback([&] { cmd_synth(o); });

    auto* dec = app.add_subcommand("decompose", "Write trend and seasonal components of each series");
    common(dec);
    dec->add_option("--kernel", o.kernel);
    dec->add_option("--domain", o.domain, "Only this domain");
    dec->add_option("--series", o.series, "Only this series");
    dec->callback([&] { cmd_decompose(o); });

    auto* pre = app.add_subcommand("pretrain", "Stage 1: pretrain the conditional VAEs");
    common(pre);
    training(pre);
    pre->callback([&] { cmd_pretrain(o); });

    auto* tr = app.add_subcommand("train", "Stage 2: train the forecasting decoder");
    common(tr);
    training(tr);
    tr->add_option("--checkpoint", o.checkpoint, "Stage-1 checkpoint (default <out>/stage1.ckpt.json)");
    tr->callback([&] { cmd_train(o); });

    auto* ev = app.add_subcommand("evaluate", "Score a trained model on train and test domains");
    common(ev);
    trained(ev);
    ev->callback([&] { cmd_evaluate(o); });

    auto* fc = app.add_subcommand("forecast", "Write quantile forecasts");
    common(fc);
    trained(fc);
    fc->callback([&] { cmd_forecast(o); });

    auto* dl = app.add_subcommand("dump-latents", "Export latent means and separation scores");
    common(dl);
    trained(dl);
    dl->callback([&] { cmd_dump_latents(o); });

    auto* ab = app.add_subcommand("ablate", "Multi-seed comparison of variants");
    common(ab);
    training(ab);
    ab->add_option("--variants", o.variants, "Comma-separated variant names");
    ab->add_option("--seeds", o.seeds, "Comma-separated seeds");
    ab->callback([&] { cmd_ablate(o); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e) == 0 ? kOk : kUsage;
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e) == 0 ? kOk : kUsage;
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kUsage;
    } catch (const TrainingError& e) {
        std::cerr << "training failed: " << e.what() << '\n';
        return kTraining;
    } catch (const std::exception& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    }
    return kOk;
}

} // namespace dgcast::app
