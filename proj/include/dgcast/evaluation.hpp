#pragma once

#include "dgcast/forecaster.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <nlohmann/json.hpp>
#include <span>
#include <string>
#include <vector>

namespace dgcast {

// All metrics take N x h matrices flattened row-major; only the element pairing matters.

// sqrt(mean (Y - Yhat)^2) / mean |Yhat|. Normalized by the predicted magnitude.
double nrmse(std::span<const double> Y, std::span<const double> Yhat);
// mean 2|Y - Yhat| / (|Y| + |Yhat|), with 0/0 terms counted as 0.
double smape(std::span<const double> Y, std::span<const double> Yhat);
// sum 2|(Y - Yhat_q)(1{Y <= Yhat_q} - q)| / sum |Y|.
double quantile_loss(std::span<const double> Y, std::span<const double> Yhat_q, double q);
// Mean of quantile_loss over the nine levels. Y holds one row per distribution.
double q_mean(std::span<const double> Y, const std::vector<ForecastDistribution>& dists);

struct DomainMetrics {
    int domain_id = -1;
    std::string domain_name;
    std::size_t windows = 0;
    double nrmse = 0.0;
    double smape = 0.0;
    double q50 = 0.0;
    double qmean = 0.0;
};

struct MetricReport {
    std::string set_name;                // "train" or "test"
    std::vector<DomainMetrics> domains;  // evaluated domains, by id
    DomainMetrics average;               // equal weight per domain
    std::vector<std::string> warnings;
    std::uint64_t seed = 0;
    std::string config_hash;
    std::string variant;

    std::size_t row_count() const { return domains.size() + 1; }
};

struct WindowForecast {
    int domain_id = 0;
    std::vector<double> y;  // original units
    ForecastDistribution dist;
};

// Metrics per domain over that domain's stacked windows, then averaged with equal weight.
// `domains` maps every domain of the set to its name.
MetricReport aggregate(const std::vector<WindowForecast>& forecasts, const std::map<int, std::string>& domains,
                       const std::string& set_name);

nlohmann::json to_json(const MetricReport& report);
std::string format_table(const MetricReport& report);
std::string format_csv(const MetricReport& report);
// Writes <stem>.json, <stem>.txt and <stem>.csv under dir.
void write_report(const MetricReport& report, const std::filesystem::path& dir, const std::string& stem);

// FNV-1a over the bytes, rendered as 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);

} // namespace dgcast
