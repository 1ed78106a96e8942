#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace dgcast {

struct Series {
    std::string name;
    std::vector<std::int64_t> timestamps;
    std::vector<double> values;
    // Row-major, timestamps.size() x feature_dim; empty when the dataset has no features.
    std::vector<double> features;
};

struct DomainDataset {
    int domain_id = 0;
    std::string domain_name;
    std::size_t feature_dim = 0;
    std::vector<Series> series;
};

struct NormStats {
    double mean = 0.0;
    double std = 0.0;
};

// One training/evaluation instance. x and y live in whatever space the producer left
// them in; normalize_window() moves them to model space and records how to go back.
struct WindowSample {
    std::vector<double> x;  // lookback, length T
    std::vector<double> a;  // external features, T x feature_dim row-major
    std::size_t feature_dim = 0;
    std::vector<double> y;  // horizon, length h
    int domain_id = 0;
    int series_index = 0;
    std::int64_t origin_timestamp = 0;  // timestamp of the last lookback step
    double scale = 1.0;
    NormStats norm;
};

// ---- CSV ingestion ----------------------------------------------------------

enum class FillPolicy { zero, none };

struct CsvSchema {
    std::string domain_column = "domain";
    std::string series_column = "series";
    std::string timestamp_column = "timestamp";
    std::string value_column = "value";
    FillPolicy fill = FillPolicy::zero;
    double fill_value = 0.0;
    // Every value (not the features) is divided by this on ingestion.
    double value_scale = 1.0;
};

// Accepts integers, YYYY-MM-DD (days since 1970-01-01) and
// YYYY-MM-DD[T ]HH:MM[:SS] (seconds since 1970-01-01 00:00:00).
std::int64_t parse_timestamp(const std::string& text);

std::vector<DomainDataset> ingest_csv(const std::filesystem::path& path, const CsvSchema& schema = {});
std::vector<DomainDataset> parse_csv(std::istream& in, const CsvSchema& schema = {});
void write_csv(const std::filesystem::path& path, const std::vector<DomainDataset>& datasets);
void write_csv(std::ostream& out, const std::vector<DomainDataset>& datasets);

// ---- windows ---------------------------------------------------------------

// Admissible timestamps for a window's target; [from, until).
struct TargetRange {
    std::int64_t from = std::numeric_limits<std::int64_t>::min();
    std::int64_t until = std::numeric_limits<std::int64_t>::max();
};

struct WindowSet {
    std::vector<WindowSample> samples;
    std::size_t skipped_series = 0;  // series shorter than T + h
};

// Slides a (T + h) window with the given stride over every series. Domains present in
// `ranges` only keep windows whose whole target falls inside their range.
WindowSet make_windows(const std::vector<DomainDataset>& datasets, std::size_t T, std::size_t h,
                       std::size_t stride = 1, const std::map<int, TargetRange>& ranges = {});

// ---- scaling and normalization ---------------------------------------------

// scale = 1 + mean(|x|); x and y divided by scale.
WindowSample apply_scaling(const WindowSample& sample);
WindowSample invert_scaling(const WindowSample& sample);

inline constexpr double kRevinEpsilon = 1e-5;

NormStats instance_stats(std::span<const double> x);
// (x - mean) / (std + eps) using the given stats.
std::vector<double> revin_normalize(std::span<const double> x, const NormStats& stats);
std::vector<double> revin_denormalize(std::span<const double> values, const NormStats& stats);

// Scaling then instance normalization of x; y is transformed with the same parameters.
WindowSample normalize_window(const WindowSample& raw);
// Maps model-space values (e.g. forecasts) back to original units: denormalize, then unscale.
std::vector<double> to_original_units(std::span<const double> values, const WindowSample& prepared);

// ---- domain identifiers -------------------------------------------------------

std::vector<double> one_hot_domain(int domain_index, int num_train_domains);

// ---- synthetic data ---------------------------------------------------------

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

struct SyntheticSpec {
    int num_domains = 6;
    int series_per_domain = 4;
    int length = 200;
    double shared_period = 12.0;
    double shared_amplitude = 1.0;
    Interval slope{-0.01, 0.01};
    Interval period{5.0, 30.0};
    Interval amplitude{0.5, 1.5};
    Interval phase{0.0, 6.283185307179586};
    double noise_std = 0.1;
    std::uint64_t seed = 0;
    // Window shape the data must accommodate (length > T + h).
    int min_window = 0;
};

struct SyntheticDomainParams {
    double slope = 0.0;
    double period = 1.0;
    double amplitude = 0.0;
    double phase = 0.0;
};

void validate(const SyntheticSpec& spec);
// Per-domain draws; generation uses exactly these values.
std::vector<SyntheticDomainParams> synthetic_domain_params(const SyntheticSpec& spec);
double synthetic_mean_value(const SyntheticSpec& spec, const SyntheticDomainParams& p, double t);
std::vector<DomainDataset> generate_synthetic(const SyntheticSpec& spec);

// ---- domain split -------------------------------------------------------------

struct DomainSplit {
    std::vector<int> train_domains;
    std::vector<int> test_domains;
    struct Bounds {
        std::int64_t train_end = 0;  // first timestamp of the validation tail
        std::int64_t val_end = 0;    // one past the last validation timestamp
    };
    std::map<int, Bounds> bounds;  // training domains only

    bool is_train(int domain_id) const;
    // Position of a training domain in the one-hot encoding.
    int train_index(int domain_id) const;
};

DomainSplit split_domains(const std::vector<DomainDataset>& datasets, double test_fraction, std::uint64_t seed,
                          double validation_fraction = 0.2);

enum class WindowRole { train, validation, test };

// train: targets strictly before train_end; validation: targets inside the tail;
// test: every window of the test domains.
WindowSet windows_for(const std::vector<DomainDataset>& datasets, const DomainSplit& split, WindowRole role,
                      std::size_t T, std::size_t h, std::size_t stride = 1);

} // namespace dgcast
