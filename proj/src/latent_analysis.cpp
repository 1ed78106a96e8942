#include "dgcast/latent_analysis.hpp"

#include "dgcast/error.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

namespace dgcast {

LatentDump dump_latents(const ForecastModel& model, const std::vector<WindowSample>& prepared,
                        std::optional<std::size_t> expected_d_z, std::optional<double> expected_alpha) {
    const CvaeConfig& cfg = model.config().cvae;
    if (expected_d_z && *expected_d_z != cfg.d_z) {
        throw ConfigError("dump_latents: d_z " + std::to_string(*expected_d_z) + " does not match checkpoint d_z " +
                          std::to_string(cfg.d_z));
    }
    if (expected_alpha && std::abs(*expected_alpha - cfg.alpha) > 1e-12) {
        throw ConfigError("dump_latents: alpha " + std::to_string(*expected_alpha) +
                          " does not match checkpoint alpha " + std::to_string(cfg.alpha));
    }
    if (prepared.empty()) throw DataError("dump_latents: no windows");
    LatentDump dump;
    dump.d_z = cfg.d_z;
    dump.alpha = cfg.alpha;
    const std::size_t split = latent_split_index(cfg.alpha, cfg.d_z);

    NoGradGuard guard;
    const CvaePair& cvae = model.cvae();
    constexpr std::size_t chunk = 256;
    for (std::size_t begin = 0; begin < prepared.size(); begin += chunk) {
        std::vector<std::size_t> idx(std::min(prepared.size(), begin + chunk) - begin);
        std::iota(idx.begin(), idx.end(), begin);
        const ForecastBatch batch = make_batch(prepared, idx, cfg.kernel);
        Tensor z;
        if (cvae.num_stacks() == 1) {
            z = cvae.encode(batch.x, Component::trend, std::nullopt).mu;
        } else {
            z = fuse_latents(cvae.encode(batch.trend, Component::trend, std::nullopt).mu,
                             cvae.encode(batch.seasonal, Component::seasonal, std::nullopt).mu);
        }
        const auto v = z.data();
        for (std::size_t i = 0; i < idx.size(); ++i) {
            const WindowSample& w = prepared[idx[i]];
            const double* row = v.data() + i * cfg.d_z;
            dump.rows.push_back({w.domain_id, w.series_index, w.origin_timestamp,
                                 std::vector<double>(row, row + split), std::vector<double>(row + split, row + cfg.d_z)});
        }
    }
    return dump;
}

std::string format_latent_csv(const LatentDump& dump) {
    const std::size_t split = latent_split_index(dump.alpha, dump.d_z);
    std::ostringstream os;
    os << "domain,series,origin_timestamp";
    for (std::size_t k = 0; k < split; ++k) os << ",shared_" << k;
    for (std::size_t k = split; k < dump.d_z; ++k) os << ",specific_" << k - split;
    os << '\n' << std::setprecision(17);
    for (const auto& r : dump.rows) {
        if (r.shared.size() != split || r.specific.size() != dump.d_z - split) {
            throw ShapeError("format_latent_csv: row widths disagree with d_z and alpha");
        }
        os << r.domain_id << ',' << r.series_index << ',' << r.origin_timestamp;
        for (double v : r.shared) os << ',' << v;
        for (double v : r.specific) os << ',' << v;
        os << '\n';
    }
    return os.str();
}

void write_latent_csv(const LatentDump& dump, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << format_latent_csv(dump);
}

namespace {

double l2(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
    return std::sqrt(s);
}

struct Ratio {
    double value = 1.0;
    bool degenerate = false;
};

Ratio part_ratio(const LatentDump& dump, std::vector<double> LatentRow::*part) {
    double inter = 0.0, intra = 0.0;
    std::size_t n_inter = 0, n_intra = 0;
    for (std::size_t i = 0; i < dump.rows.size(); ++i) {
        for (std::size_t j = i + 1; j < dump.rows.size(); ++j) {
            const LatentRow& a = dump.rows[i];
            const LatentRow& b = dump.rows[j];
            const double d = l2(a.*part, b.*part);
            if (a.domain_id == b.domain_id) {
                intra += d;
                ++n_intra;
            } else {
                inter += d;
                ++n_inter;
            }
        }
    }
    const double mean_inter = n_inter ? inter / static_cast<double>(n_inter) : 0.0;
    const double mean_intra = n_intra ? intra / static_cast<double>(n_intra) : 0.0;
    if (mean_intra == 0.0) {
        if (mean_inter == 0.0) return {1.0, true};
        return {std::numeric_limits<double>::infinity(), false};
    }
    return {mean_inter / mean_intra, false};
}

} // namespace

SeparationScore separation_score(const LatentDump& dump) {
    std::map<int, std::size_t> counts;
    for (const auto& r : dump.rows) ++counts[r.domain_id];
    if (counts.size() < 2) throw DataError("separation_score: needs at least 2 domains");
    SeparationScore s;
    for (const auto& [id, n] : counts) {
        if (n == 1) s.warnings.push_back("domain " + std::to_string(id) + " has a single row; no intra-domain pairs");
    }
    const Ratio shared = part_ratio(dump, &LatentRow::shared);
    const Ratio specific = part_ratio(dump, &LatentRow::specific);
    s.shared_ratio = shared.value;
    s.shared_degenerate = shared.degenerate;
    s.specific_ratio = specific.value;
    s.specific_degenerate = specific.degenerate;
    if (shared.degenerate) s.warnings.push_back("shared part: 0/0 ratio reported as 1");
    if (specific.degenerate) s.warnings.push_back("specific part: 0/0 ratio reported as 1");
    return s;
}

} // namespace dgcast
