#include "dgcast/data.hpp"

#include "dgcast/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>
#include <tuple>

namespace dgcast {

namespace {

// Splits one CSV record. Double quotes group a field; "" inside quotes is a literal quote.
std::vector<std::string> split_record(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size() && std::isfinite(out);
}

bool parse_int(const std::string& s, std::int64_t& out) {
    if (s.empty()) return false;
    const char* first = s.data();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

// Howard Hinnant's days_from_civil.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const auto yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

// Digit runs compare numerically so that "d2" < "d10".
bool natural_less(const std::string& a, const std::string& b) {
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < a.size() && j < b.size()) {
        if (std::isdigit(static_cast<unsigned char>(a[i])) && std::isdigit(static_cast<unsigned char>(b[j]))) {
            std::size_t ie = i;
            std::size_t je = j;
            while (ie < a.size() && std::isdigit(static_cast<unsigned char>(a[ie]))) ++ie;
            while (je < b.size() && std::isdigit(static_cast<unsigned char>(b[je]))) ++je;
            const std::string na = a.substr(i, ie - i);
            const std::string nb = b.substr(j, je - j);
            const std::string sa = na.substr(std::min(na.find_first_not_of('0'), na.size()));
            const std::string sb = nb.substr(std::min(nb.find_first_not_of('0'), nb.size()));
            if (sa.size() != sb.size()) return sa.size() < sb.size();
            if (sa != sb) return sa < sb;
            if (na.size() != nb.size()) return na.size() < nb.size();
            i = ie;
            j = je;
        } else {
            if (a[i] != b[j]) return a[i] < b[j];
            ++i;
            ++j;
        }
    }
    return a.size() - i < b.size() - j;
}

std::size_t column_index(const std::vector<std::string>& header, const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError("csv: header is missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
}

struct Row {
    std::int64_t timestamp;
    double value;
    bool missing;
    std::vector<double> features;
};

} // namespace

std::int64_t parse_timestamp(const std::string& raw) {
    const std::string text = trim(raw);
    std::int64_t v = 0;
    if (parse_int(text, v)) return v;
    int y = 0;
    unsigned mo = 0;
    unsigned d = 0;
    unsigned hh = 0;
    unsigned mm = 0;
    unsigned ss = 0;
    char sep = 0;
    int consumed = 0;
    if (std::sscanf(text.c_str(), "%d-%u-%u%n", &y, &mo, &d, &consumed) == 3 && mo >= 1 && mo <= 12 && d >= 1 &&
        d <= 31) {
        const std::int64_t days = days_from_civil(y, mo, d);
        if (static_cast<std::size_t>(consumed) == text.size()) return days;
        const std::string rest = text.substr(static_cast<std::size_t>(consumed));
        int n = 0;
        if (std::sscanf(rest.c_str(), "%c%u:%u%n", &sep, &hh, &mm, &n) == 3 && (sep == 'T' || sep == ' ') &&
            hh < 24 && mm < 60) {
            std::string tail = rest.substr(static_cast<std::size_t>(n));
            if (!tail.empty()) {
                int m2 = 0;
                if (std::sscanf(tail.c_str(), ":%u%n", &ss, &m2) != 1 || ss >= 60 ||
                    static_cast<std::size_t>(m2) != tail.size()) {
                    throw DataError("unparseable timestamp '" + text + "'");
                }
            }
            return days * 86400 + hh * 3600 + mm * 60 + ss;
        }
    }
    throw DataError("unparseable timestamp '" + text + "'");
}

std::vector<DomainDataset> ingest_csv(const std::filesystem::path& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw DataError("csv: cannot open " + path.string());
    return parse_csv(in, schema);
}

std::vector<DomainDataset> parse_csv(std::istream& in, const CsvSchema& schema) {
    if (!(schema.value_scale > 0.0)) throw ConfigError("csv: value_scale must be positive");
    std::string line;
    if (!std::getline(in, line)) throw DataError("csv: empty input");
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    std::vector<std::string> header = split_record(line);
    for (auto& h : header) h = trim(h);
    const std::size_t c_dom = column_index(header, schema.domain_column);
    const std::size_t c_ser = column_index(header, schema.series_column);
    const std::size_t c_ts = column_index(header, schema.timestamp_column);
    const std::size_t c_val = column_index(header, schema.value_column);
    std::vector<std::size_t> c_feat;
    for (std::size_t i = 0; i < header.size(); ++i)
        if (i != c_dom && i != c_ser && i != c_ts && i != c_val) c_feat.push_back(i);

    std::map<std::string, std::map<std::string, std::vector<Row>>> grouped;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto f = split_record(line);
        if (f.size() != header.size()) {
            throw DataError("csv line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                            " fields, got " + std::to_string(f.size()));
        }
        Row row{};
        try {
            row.timestamp = parse_timestamp(f[c_ts]);
        } catch (const DataError& e) {
            throw DataError("csv line " + std::to_string(line_no) + ": " + e.what());
        }
        const std::string v = trim(f[c_val]);
        row.missing = v.empty() || v == "NaN" || v == "nan" || v == "NA";
        if (!row.missing && !parse_double(v, row.value)) {
            throw DataError("csv line " + std::to_string(line_no) + ": unparseable value '" + v + "'");
        }
        for (std::size_t c : c_feat) {
            double fv = 0.0;
            const std::string t = trim(f[c]);
            if (!t.empty() && !parse_double(t, fv)) {
                throw DataError("csv line " + std::to_string(line_no) + ": unparseable feature '" + t + "'");
            }
            row.features.push_back(fv);
        }
        grouped[trim(f[c_dom])][trim(f[c_ser])].push_back(std::move(row));
    }

    std::vector<std::string> domain_names;
    for (const auto& [name, _] : grouped) domain_names.push_back(name);
    std::sort(domain_names.begin(), domain_names.end(), natural_less);

    std::vector<DomainDataset> out;
    for (const auto& dname : domain_names) {
        DomainDataset ds;
        ds.domain_id = static_cast<int>(out.size());
        ds.domain_name = dname;
        ds.feature_dim = c_feat.size();
        auto& by_series = grouped[dname];
        std::vector<std::string> series_names;
        for (const auto& [name, _] : by_series) series_names.push_back(name);
        std::sort(series_names.begin(), series_names.end(), natural_less);
        for (const auto& sname : series_names) {
            auto& rows = by_series[sname];
            std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.timestamp < b.timestamp; });
            for (std::size_t i = 1; i < rows.size(); ++i) {
                if (rows[i].timestamp == rows[i - 1].timestamp) {
                    throw DataError("csv: duplicate row for (" + dname + ", " + sname + ", " +
                                    std::to_string(rows[i].timestamp) + ")");
                }
            }
            // Granularity is the smallest step between consecutive timestamps.
            std::int64_t step = 0;
            for (std::size_t i = 1; i < rows.size(); ++i) {
                const std::int64_t d = rows[i].timestamp - rows[i - 1].timestamp;
                step = step == 0 ? d : std::min(step, d);
            }
            Series s;
            s.name = sname;
            auto push = [&](std::int64_t ts, double value, const std::vector<double>& feats) {
                s.timestamps.push_back(ts);
                s.values.push_back(value / schema.value_scale);
                s.features.insert(s.features.end(), feats.begin(), feats.end());
            };
            const std::vector<double> zero_feats(c_feat.size(), 0.0);
            for (std::size_t i = 0; i < rows.size(); ++i) {
                if (i > 0 && schema.fill == FillPolicy::zero && step > 0) {
                    for (std::int64_t t = rows[i - 1].timestamp + step; t < rows[i].timestamp; t += step)
                        push(t, schema.fill_value, zero_feats);
                }
                if (rows[i].missing) {
                    if (schema.fill == FillPolicy::none) continue;
                    push(rows[i].timestamp, schema.fill_value, rows[i].features);
                } else {
                    push(rows[i].timestamp, rows[i].value, rows[i].features);
                }
            }
            ds.series.push_back(std::move(s));
        }
        out.push_back(std::move(ds));
    }
    return out;
}

void write_csv(std::ostream& out, const std::vector<DomainDataset>& datasets) {
    const std::size_t fdim = datasets.empty() ? 0 : datasets.front().feature_dim;
    out << "domain,series,timestamp,value";
    for (std::size_t k = 0; k < fdim; ++k) out << ",feat_" << k;
    out << '\n';
    out << std::setprecision(17);
    for (const auto& ds : datasets) {
        if (ds.feature_dim != fdim) throw DataError("write_csv: domains disagree on feature dimension");
        for (const auto& s : ds.series) {
            for (std::size_t i = 0; i < s.values.size(); ++i) {
                out << ds.domain_name << ',' << s.name << ',' << s.timestamps[i] << ',' << s.values[i];
                for (std::size_t k = 0; k < fdim; ++k) out << ',' << s.features[i * fdim + k];
                out << '\n';
            }
        }
    }
}

void write_csv(const std::filesystem::path& path, const std::vector<DomainDataset>& datasets) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    write_csv(out, datasets);
}

// ---- windows ---------------------------------------------------------------

WindowSet make_windows(const std::vector<DomainDataset>& datasets, std::size_t T, std::size_t h,
                       std::size_t stride, const std::map<int, TargetRange>& ranges) {
    if (T == 0 || h == 0) throw ConfigError("make_windows: T and h must be positive");
    if (stride == 0) throw ConfigError("make_windows: stride must be positive");
    WindowSet out;
    for (const auto& ds : datasets) {
        const auto rit = ranges.find(ds.domain_id);
        const TargetRange range = rit == ranges.end() ? TargetRange{} : rit->second;
        for (std::size_t si = 0; si < ds.series.size(); ++si) {
            const Series& s = ds.series[si];
            const std::size_t n = s.values.size();
            if (n < T + h) {
                ++out.skipped_series;
                continue;
            }
            for (std::size_t start = 0; start + T + h <= n; start += stride) {
                const std::int64_t first_target = s.timestamps[start + T];
                const std::int64_t last_target = s.timestamps[start + T + h - 1];
                if (first_target < range.from || last_target >= range.until) continue;
                WindowSample w;
                w.x.assign(s.values.begin() + static_cast<std::ptrdiff_t>(start),
                           s.values.begin() + static_cast<std::ptrdiff_t>(start + T));
                w.y.assign(s.values.begin() + static_cast<std::ptrdiff_t>(start + T),
                           s.values.begin() + static_cast<std::ptrdiff_t>(start + T + h));
                w.feature_dim = ds.feature_dim;
                if (ds.feature_dim > 0) {
                    const auto f0 = static_cast<std::ptrdiff_t>(start * ds.feature_dim);
                    w.a.assign(s.features.begin() + f0,
                               s.features.begin() + f0 + static_cast<std::ptrdiff_t>(T * ds.feature_dim));
                }
                w.domain_id = ds.domain_id;
                w.series_index = static_cast<int>(si);
                w.origin_timestamp = s.timestamps[start + T - 1];
                out.samples.push_back(std::move(w));
            }
        }
    }
    return out;
}

// ---- scaling and normalization ---------------------------------------------

WindowSample apply_scaling(const WindowSample& sample) {
    WindowSample out = sample;
    double abs_sum = 0.0;
    for (double v : sample.x) abs_sum += std::abs(v);
    const double scale = 1.0 + (sample.x.empty() ? 0.0 : abs_sum / static_cast<double>(sample.x.size()));
    for (double& v : out.x) v /= scale;
    for (double& v : out.y) v /= scale;
    out.scale = sample.scale * scale;
    return out;
}

WindowSample invert_scaling(const WindowSample& sample) {
    WindowSample out = sample;
    for (double& v : out.x) v *= sample.scale;
    for (double& v : out.y) v *= sample.scale;
    out.scale = 1.0;
    return out;
}

NormStats instance_stats(std::span<const double> x) {
    if (x.empty()) throw ShapeError("instance_stats: empty input");
    const double n = static_cast<double>(x.size());
    const double m = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : x) ss += (v - m) * (v - m);
    return {m, std::sqrt(ss / n)};
}

std::vector<double> revin_normalize(std::span<const double> x, const NormStats& stats) {
    std::vector<double> out(x.size());
    const double denom = stats.std + kRevinEpsilon;
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - stats.mean) / denom;
    return out;
}

std::vector<double> revin_denormalize(std::span<const double> values, const NormStats& stats) {
    std::vector<double> out(values.size());
    const double denom = stats.std + kRevinEpsilon;
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = values[i] * denom + stats.mean;
    return out;
}

WindowSample normalize_window(const WindowSample& raw) {
    WindowSample out = apply_scaling(raw);
    out.norm = instance_stats(out.x);
    out.x = revin_normalize(out.x, out.norm);
    out.y = revin_normalize(out.y, out.norm);
    return out;
}

std::vector<double> to_original_units(std::span<const double> values, const WindowSample& prepared) {
    std::vector<double> out = revin_denormalize(values, prepared.norm);
    for (double& v : out) v *= prepared.scale;
    return out;
}

std::vector<double> one_hot_domain(int domain_index, int num_train_domains) {
    if (num_train_domains <= 0 || domain_index < 0 || domain_index >= num_train_domains) {
        throw ConfigError("one_hot_domain: index " + std::to_string(domain_index) + " outside [0, " +
                          std::to_string(num_train_domains) + ")");
    }
    std::vector<double> v(static_cast<std::size_t>(num_train_domains), 0.0);
    v[static_cast<std::size_t>(domain_index)] = 1.0;
    return v;
}

// ---- synthetic data ---------------------------------------------------------

void validate(const SyntheticSpec& spec) {
    auto need = [](bool ok, const std::string& field, const std::string& what) {
        if (!ok) throw ConfigError("synthetic." + field + ": " + what);
    };
    auto range = [&](const Interval& r, const std::string& field) {
        need(std::isfinite(r.lo) && std::isfinite(r.hi) && r.lo <= r.hi, field, "range must satisfy lo <= hi");
    };
    need(spec.num_domains >= 1, "num_domains", "must be >= 1");
    need(spec.series_per_domain >= 1, "series_per_domain", "must be >= 1");
    need(spec.length >= 1, "length", "must be >= 1");
    need(spec.length > spec.min_window, "length", "must exceed T + h");
    need(spec.shared_period > 0.0, "shared_period", "must be positive");
    need(std::isfinite(spec.shared_amplitude), "shared_amplitude", "must be finite");
    range(spec.slope, "slope");
    range(spec.period, "period");
    range(spec.amplitude, "amplitude");
    range(spec.phase, "phase");
    need(spec.period.lo > 0.0, "period", "must be positive");
    need(spec.noise_std >= 0.0, "noise_std", "must be >= 0");
}

namespace {

std::mt19937_64 domain_rng(std::uint64_t seed, int domain) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(domain)};
    return std::mt19937_64(seq);
}

double uniform(std::mt19937_64& rng, const Interval& r) {
    if (r.lo == r.hi) return r.lo;
    return std::uniform_real_distribution<double>(r.lo, r.hi)(rng);
}

SyntheticDomainParams draw_params(std::mt19937_64& rng, const SyntheticSpec& spec) {
    SyntheticDomainParams p;
    p.slope = uniform(rng, spec.slope);
    p.period = uniform(rng, spec.period);
    p.amplitude = uniform(rng, spec.amplitude);
    p.phase = uniform(rng, spec.phase);
    return p;
}

std::string padded(const std::string& prefix, int i, int count) {
    const int width = static_cast<int>(std::to_string(std::max(count - 1, 0)).size());
    std::ostringstream os;
    os << prefix << std::setw(width) << std::setfill('0') << i;
    return os.str();
}

} // namespace

std::vector<SyntheticDomainParams> synthetic_domain_params(const SyntheticSpec& spec) {
    validate(spec);
    std::vector<SyntheticDomainParams> out;
    for (int j = 0; j < spec.num_domains; ++j) {
        auto rng = domain_rng(spec.seed, j);
        out.push_back(draw_params(rng, spec));
    }
    return out;
}

double synthetic_mean_value(const SyntheticSpec& spec, const SyntheticDomainParams& p, double t) {
    constexpr double two_pi = 6.283185307179586;
    return p.slope * t + spec.shared_amplitude * std::sin(two_pi * t / spec.shared_period) +
           p.amplitude * std::sin(two_pi * t / p.period + p.phase);
}

std::vector<DomainDataset> generate_synthetic(const SyntheticSpec& spec) {
    validate(spec);
    std::vector<DomainDataset> out;
    for (int j = 0; j < spec.num_domains; ++j) {
        auto rng = domain_rng(spec.seed, j);
        const SyntheticDomainParams p = draw_params(rng, spec);
        std::normal_distribution<double> noise(0.0, spec.noise_std);
        DomainDataset ds;
        ds.domain_id = j;
        ds.domain_name = padded("d", j, spec.num_domains);
        for (int k = 0; k < spec.series_per_domain; ++k) {
            Series s;
            s.name = padded("s", k, spec.series_per_domain);
            for (int t = 0; t < spec.length; ++t) {
                double v = synthetic_mean_value(spec, p, static_cast<double>(t));
                if (spec.noise_std > 0.0) v += noise(rng);
                s.timestamps.push_back(t);
                s.values.push_back(v);
            }
            ds.series.push_back(std::move(s));
        }
        out.push_back(std::move(ds));
    }
    return out;
}

// ---- domain split -------------------------------------------------------------

bool DomainSplit::is_train(int domain_id) const {
    return std::find(train_domains.begin(), train_domains.end(), domain_id) != train_domains.end();
}

int DomainSplit::train_index(int domain_id) const {
    const auto it = std::find(train_domains.begin(), train_domains.end(), domain_id);
    if (it == train_domains.end()) {
        throw ConfigError("domain " + std::to_string(domain_id) + " is not a training domain");
    }
    return static_cast<int>(it - train_domains.begin());
}

DomainSplit split_domains(const std::vector<DomainDataset>& datasets, double test_fraction, std::uint64_t seed,
                          double validation_fraction) {
    if (datasets.size() < 2) throw ConfigError("split_domains: need at least 2 domains");
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw ConfigError("split_domains: test_fraction must lie in (0, 1)");
    }
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
        throw ConfigError("split_domains: validation_fraction must lie in (0, 1)");
    }
    const std::size_t n = datasets.size();
    const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
    if (n_test == 0) throw ConfigError("split_domains: test_fraction yields 0 test domains");
    if (n_test >= n) throw ConfigError("split_domains: test_fraction leaves no training domain");

    std::vector<int> ids;
    for (const auto& ds : datasets) ids.push_back(ds.domain_id);
    std::sort(ids.begin(), ids.end());
    std::mt19937_64 rng(seed);
    std::shuffle(ids.begin(), ids.end(), rng);

    DomainSplit split;
    split.test_domains.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_test));
    split.train_domains.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_test), ids.end());
    std::sort(split.test_domains.begin(), split.test_domains.end());
    std::sort(split.train_domains.begin(), split.train_domains.end());

    for (const auto& ds : datasets) {
        if (!split.is_train(ds.domain_id)) continue;
        std::vector<std::int64_t> ts;
        for (const auto& s : ds.series) ts.insert(ts.end(), s.timestamps.begin(), s.timestamps.end());
        std::sort(ts.begin(), ts.end());
        ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
        if (ts.size() < 2) throw DataError("split_domains: domain '" + ds.domain_name + "' has < 2 timestamps");
        auto cut = static_cast<std::size_t>(
            std::floor((1.0 - validation_fraction) * static_cast<double>(ts.size())));
        cut = std::clamp<std::size_t>(cut, 1, ts.size() - 1);
        split.bounds[ds.domain_id] = {ts[cut], ts.back() + 1};
    }
    return split;
}

WindowSet windows_for(const std::vector<DomainDataset>& datasets, const DomainSplit& split, WindowRole role,
                      std::size_t T, std::size_t h, std::size_t stride) {
    std::vector<DomainDataset> selected;
    std::map<int, TargetRange> ranges;
    for (const auto& ds : datasets) {
        const bool train = split.is_train(ds.domain_id);
        if ((role == WindowRole::test) == train) continue;
        selected.push_back(ds);
        if (role == WindowRole::train) {
            ranges[ds.domain_id] = {std::numeric_limits<std::int64_t>::min(), split.bounds.at(ds.domain_id).train_end};
        } else if (role == WindowRole::validation) {
            const auto& b = split.bounds.at(ds.domain_id);
            ranges[ds.domain_id] = {b.train_end, b.val_end};
        }
    }
    return make_windows(selected, T, h, stride, ranges);
}

} // namespace dgcast
