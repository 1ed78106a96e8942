#include "dgcast/evaluation.hpp"

#include "dgcast/error.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace dgcast {

namespace {

void check_same(std::span<const double> a, std::span<const double> b, const char* op) {
    if (a.size() != b.size()) {
        throw ShapeError(std::string(op) + ": " + std::to_string(a.size()) + " targets vs " +
                         std::to_string(b.size()) + " predictions");
    }
    if (a.empty()) throw ShapeError(std::string(op) + ": empty input");
}

} // namespace

double nrmse(std::span<const double> Y, std::span<const double> Yhat) {
    check_same(Y, Yhat, "nrmse");
    double se = 0.0;
    double abs_pred = 0.0;
    for (std::size_t i = 0; i < Y.size(); ++i) {
        se += (Y[i] - Yhat[i]) * (Y[i] - Yhat[i]);
        abs_pred += std::abs(Yhat[i]);
    }
    if (abs_pred == 0.0) throw DomainError("nrmse: all predictions are zero");
    const double n = static_cast<double>(Y.size());
    return std::sqrt(se / n) / (abs_pred / n);
}

double smape(std::span<const double> Y, std::span<const double> Yhat) {
    check_same(Y, Yhat, "smape");
    double total = 0.0;
    for (std::size_t i = 0; i < Y.size(); ++i) {
        const double denom = std::abs(Y[i]) + std::abs(Yhat[i]);
        if (denom > 0.0) total += 2.0 * std::abs(Y[i] - Yhat[i]) / denom;
    }
    return total / static_cast<double>(Y.size());
}

double quantile_loss(std::span<const double> Y, std::span<const double> Yhat_q, double q) {
    check_same(Y, Yhat_q, "quantile_loss");
    if (!(q > 0.0 && q < 1.0)) throw DomainError("quantile_loss: q must lie in (0, 1)");
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < Y.size(); ++i) {
        const double indicator = Y[i] <= Yhat_q[i] ? 1.0 : 0.0;
        num += 2.0 * std::abs((Y[i] - Yhat_q[i]) * (indicator - q));
        den += std::abs(Y[i]);
    }
    if (den == 0.0) throw DomainError("quantile_loss: sum |Y| is zero");
    return num / den;
}

double q_mean(std::span<const double> Y, const std::vector<ForecastDistribution>& dists) {
    if (dists.empty()) throw ShapeError("q_mean: no distributions");
    const std::size_t h = Y.size() / dists.size();
    if (h * dists.size() != Y.size()) throw ShapeError("q_mean: targets are not one row per distribution");
    double total = 0.0;
    for (std::size_t qi = 0; qi < kQuantileLevels.size(); ++qi) {
        std::vector<double> stacked;
        stacked.reserve(Y.size());
        for (const auto& d : dists) {
            if (d.quantiles.size() != kQuantileLevels.size()) {
                throw ShapeError("q_mean: distribution is missing quantile rows");
            }
            if (d.quantiles[qi].size() != h) throw ShapeError("q_mean: quantile row length differs from horizon");
            stacked.insert(stacked.end(), d.quantiles[qi].begin(), d.quantiles[qi].end());
        }
        total += quantile_loss(Y, stacked, kQuantileLevels[qi]);
    }
    return total / static_cast<double>(kQuantileLevels.size());
}

MetricReport aggregate(const std::vector<WindowForecast>& forecasts, const std::map<int, std::string>& domains,
                       const std::string& set_name) {
    MetricReport report;
    report.set_name = set_name;
    std::map<int, std::vector<const WindowForecast*>> by_domain;
    for (const auto& f : forecasts) {
        if (!domains.count(f.domain_id)) {
            throw DataError("aggregate: window from domain " + std::to_string(f.domain_id) + " is not in the " +
                            set_name + " set");
        }
        by_domain[f.domain_id].push_back(&f);
    }
    for (const auto& [id, name] : domains) {
        const auto it = by_domain.find(id);
        if (it == by_domain.end()) {
            report.warnings.push_back("domain '" + name + "' has no windows; excluded");
            continue;
        }
        std::vector<double> Y;
        std::vector<double> point;
        std::vector<ForecastDistribution> dists;
        for (const WindowForecast* f : it->second) {
            Y.insert(Y.end(), f->y.begin(), f->y.end());
            point.insert(point.end(), f->dist.point.begin(), f->dist.point.end());
            dists.push_back(f->dist);
        }
        DomainMetrics m;
        m.domain_id = id;
        m.domain_name = name;
        m.windows = it->second.size();
        m.nrmse = nrmse(Y, point);
        m.smape = smape(Y, point);
        m.q50 = quantile_loss(Y, point, 0.5);
        m.qmean = q_mean(Y, dists);
        report.domains.push_back(m);
    }
    if (report.domains.empty()) throw DataError("aggregate: no domain in the " + set_name + " set has windows");
    DomainMetrics& avg = report.average;
    avg.domain_name = "average";
    const double k = static_cast<double>(report.domains.size());
    for (const auto& m : report.domains) {
        avg.windows += m.windows;
        avg.nrmse += m.nrmse / k;
        avg.smape += m.smape / k;
        avg.q50 += m.q50 / k;
        avg.qmean += m.qmean / k;
    }
    return report;
}

namespace {

nlohmann::json metrics_json(const DomainMetrics& m) {
    return {{"domain_id", m.domain_id}, {"domain", m.domain_name}, {"windows", m.windows},
            {"nrmse", m.nrmse},         {"smape", m.smape},        {"q50", m.q50},
            {"qmean", m.qmean}};
}

} // namespace

nlohmann::json to_json(const MetricReport& report) {
    nlohmann::json j;
    j["set"] = report.set_name;
    j["seed"] = report.seed;
    j["config_hash"] = report.config_hash;
    j["variant"] = report.variant;
    j["domains"] = nlohmann::json::array();
    for (const auto& m : report.domains) j["domains"].push_back(metrics_json(m));
    j["average"] = metrics_json(report.average);
    j["warnings"] = report.warnings;
    return j;
}

std::string format_table(const MetricReport& report) {
    std::ostringstream os;
    os << "set: " << report.set_name << "  variant: " << report.variant << "  seed: " << report.seed << '\n';
    os << std::left << std::setw(16) << "domain" << std::right << std::setw(9) << "windows" << std::setw(12)
       << "NRMSE" << std::setw(12) << "sMAPE" << std::setw(12) << "Q(0.5)" << std::setw(12) << "Q(mean)" << '\n';
    auto row = [&](const DomainMetrics& m) {
        os << std::left << std::setw(16) << m.domain_name << std::right << std::setw(9) << m.windows << std::fixed
           << std::setprecision(4) << std::setw(12) << m.nrmse << std::setw(12) << m.smape << std::setw(12) << m.q50
           << std::setw(12) << m.qmean << '\n';
        os.unsetf(std::ios::fixed);
    };
    for (const auto& m : report.domains) row(m);
    row(report.average);
    for (const auto& w : report.warnings) os << "warning: " << w << '\n';
    return os.str();
}

std::string format_csv(const MetricReport& report) {
    std::ostringstream os;
    os << "domain,metric,value\n" << std::setprecision(17);
    auto rows = [&](const DomainMetrics& m) {
        os << m.domain_name << ",nrmse," << m.nrmse << '\n';
        os << m.domain_name << ",smape," << m.smape << '\n';
        os << m.domain_name << ",q50," << m.q50 << '\n';
        os << m.domain_name << ",qmean," << m.qmean << '\n';
    };
    for (const auto& m : report.domains) rows(m);
    rows(report.average);
    return os.str();
}

void write_report(const MetricReport& report, const std::filesystem::path& dir, const std::string& stem) {
    std::filesystem::create_directories(dir);
    auto write = [&](const std::string& ext, const std::string& body) {
        std::ofstream out(dir / (stem + ext));
        if (!out) throw DataError("cannot write report " + (dir / (stem + ext)).string());
        out << body;
    };
    write(".json", to_json(report).dump(2) + "\n");
    write(".txt", format_table(report));
    write(".csv", format_csv(report));
}

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace dgcast
