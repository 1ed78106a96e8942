#include "dgcast/error.hpp"
#include "dgcast/latent_analysis.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace dgcast;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Mean inter-domain distance over mean intra-domain distance, by brute force over all i < j.
double brute_ratio(const std::vector<std::vector<double>>& v, const std::vector<int>& dom) {
    double inter = 0, intra = 0;
    int ni = 0, na = 0;
    for (std::size_t i = 0; i < v.size(); ++i)
        for (std::size_t j = i + 1; j < v.size(); ++j) {
            const double d = oracle::distance(v[i], v[j]);
            if (dom[i] == dom[j]) {
                intra += d;
                ++na;
            } else {
                inter += d;
                ++ni;
            }
        }
    return (inter / ni) / (intra / na);
}

LatentDump clustered_dump(std::mt19937_64& r) {
    LatentDump dump{4, 0.5, {}};
    for (int d = 0; d < 2; ++d)
        for (int i = 0; i < 5; ++i) {
            const auto jitter = oracle::uniform(4, r, -0.5, 0.5);
            dump.rows.push_back({d, i, 0, {jitter[0], jitter[1]}, {10.0 * d + jitter[2], 10.0 * d + jitter[3]}});
        }
    return dump;
}

} // namespace

TEST(dump_latents, one_row_per_window_with_split_widths) {
    const TrainConfig c = fixture::tiny_config();
    const TrainingData data = fixture::tiny_data(c);
    const ForecastModel model = build_model(c, data);
    const LatentDump dump = dump_latents(model, data.test.prepared);
    ASSERT_EQ(dump.rows.size(), data.test.prepared.size());
    const std::size_t split = latent_split_index(c.alpha, c.d_z);
    for (std::size_t i = 0; i < dump.rows.size(); ++i) {
        EXPECT_EQ(dump.rows[i].shared.size(), split);
        EXPECT_EQ(dump.rows[i].specific.size(), c.d_z - split);
        EXPECT_EQ(dump.rows[i].domain_id, data.test.prepared[i].domain_id);
        EXPECT_EQ(dump.rows[i].origin_timestamp, data.test.prepared[i].origin_timestamp);
    }
}

TEST(dump_latents, matches_fused_posterior_means) {
    const TrainConfig c = fixture::tiny_config();
    const TrainingData data = fixture::tiny_data(c);
    const ForecastModel model = build_model(c, data);
    const LatentDump dump = dump_latents(model, data.train.prepared);
    const ForecastBatch b = make_batch(data.train.prepared, c.kernel);
    const Tensor mt = model.cvae().encode(b.trend, Component::trend, std::nullopt).mu;
    const Tensor ms = model.cvae().encode(b.seasonal, Component::seasonal, std::nullopt).mu;
    const std::size_t split = latent_split_index(c.alpha, c.d_z);
    for (std::size_t i = 0; i < dump.rows.size(); ++i)
        for (std::size_t k = 0; k < c.d_z; ++k) {
            const double want = mt.at(i, k) + ms.at(i, k);
            const double got = k < split ? dump.rows[i].shared[k] : dump.rows[i].specific[k - split];
            EXPECT_NEAR(got, want, 1e-12);
        }
}

TEST(dump_latents, rejects_mismatched_shape_expectations) {
    const TrainConfig c = fixture::tiny_config();
    const TrainingData data = fixture::tiny_data(c);
    const ForecastModel model = build_model(c, data);
    EXPECT_THROW(dump_latents(model, data.test.prepared, c.d_z + 1), ConfigError);
    EXPECT_THROW(dump_latents(model, data.test.prepared, c.d_z, 0.75), ConfigError);
    EXPECT_NO_THROW(dump_latents(model, data.test.prepared, c.d_z, c.alpha));
}

TEST(latent_csv, header_and_repeatable_files) {
    const TrainConfig c = fixture::tiny_config();
    const TrainingData data = fixture::tiny_data(c);
    const ForecastModel model = build_model(c, data);
    const auto dir = std::filesystem::temp_directory_path() / "dgcast_latent_test";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    write_latent_csv(dump_latents(model, data.test.prepared), dir / "a.csv");
    write_latent_csv(dump_latents(model, data.test.prepared), dir / "b.csv");
    const std::string a = slurp(dir / "a.csv");
    EXPECT_EQ(a, slurp(dir / "b.csv"));
    EXPECT_EQ(a.substr(0, a.find('\n')), "domain,series,origin_timestamp,shared_0,shared_1,specific_0,specific_1");
    EXPECT_EQ(static_cast<std::size_t>(std::count(a.begin(), a.end(), '\n')), data.test.prepared.size() + 1);
    std::filesystem::remove_all(dir);
}

TEST(separation, clustered_specific_parts_score_high) {
    std::mt19937_64 r(1);
    const LatentDump dump = clustered_dump(r);
    std::vector<std::vector<double>> shared, specific;
    std::vector<int> dom;
    for (const auto& row : dump.rows) {
        shared.push_back(row.shared);
        specific.push_back(row.specific);
        dom.push_back(row.domain_id);
    }
    const SeparationScore s = separation_score(dump);
    EXPECT_NEAR(s.shared_ratio, brute_ratio(shared, dom), 1e-12);
    EXPECT_NEAR(s.specific_ratio, brute_ratio(specific, dom), 1e-12);
    EXPECT_GT(s.specific_ratio, 10.0);
    EXPECT_LT(s.shared_ratio, 2.0);
    EXPECT_FALSE(s.shared_degenerate || s.specific_degenerate);
}

TEST(separation, invariant_to_rotation) {
    std::mt19937_64 r(2);
    const LatentDump dump = clustered_dump(r);
    LatentDump rotated = dump;
    const double c = std::cos(0.7), s = std::sin(0.7);
    for (auto& row : rotated.rows)
        for (auto* v : {&row.shared, &row.specific}) {
            const double x = (*v)[0], y = (*v)[1];
            (*v)[0] = c * x - s * y;
            (*v)[1] = s * x + c * y;
        }
    const SeparationScore a = separation_score(dump), b = separation_score(rotated);
    EXPECT_NEAR(a.shared_ratio, b.shared_ratio, 1e-10);
    EXPECT_NEAR(a.specific_ratio, b.specific_ratio, 1e-10);
}

TEST(separation, identical_vectors_are_flagged) {
    LatentDump dump{2, 0.5, {}};
    for (int d = 0; d < 2; ++d)
        for (int i = 0; i < 2; ++i) dump.rows.push_back({d, i, 0, {1.0}, {2.0}});
    const SeparationScore s = separation_score(dump);
    EXPECT_TRUE(s.shared_degenerate);
    EXPECT_TRUE(s.specific_degenerate);
    EXPECT_EQ(s.shared_ratio, 1.0);
    EXPECT_EQ(s.specific_ratio, 1.0);
}

TEST(separation, needs_two_domains_and_warns_on_singletons) {
    LatentDump one{2, 0.5, {{0, 0, 0, {1}, {2}}, {0, 1, 0, {3}, {4}}}};
    EXPECT_THROW(separation_score(one), DataError);
    LatentDump lonely{2, 0.5, {{0, 0, 0, {1}, {2}}, {0, 1, 0, {3}, {4}}, {1, 0, 0, {5}, {6}}}};
    EXPECT_FALSE(separation_score(lonely).warnings.empty());
}
