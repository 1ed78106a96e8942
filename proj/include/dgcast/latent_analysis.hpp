#pragma once

#include "dgcast/model.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace dgcast {

struct LatentRow {
    int domain_id = 0;
    int series_index = 0;
    std::int64_t origin_timestamp = 0;
    std::vector<double> shared;
    std::vector<double> specific;
};

struct LatentDump {
    std::size_t d_z = 0;
    double alpha = 0.0;
    std::vector<LatentRow> rows;
};

// Encodes prepared windows with z = mu (fused, as they enter the augmentation layer before
// any variant masking) and splits them at floor(alpha * d_z). The expected d_z and alpha,
// when given, must match the model.
LatentDump dump_latents(const ForecastModel& model, const std::vector<WindowSample>& prepared,
                        std::optional<std::size_t> expected_d_z = std::nullopt,
                        std::optional<double> expected_alpha = std::nullopt);

std::string format_latent_csv(const LatentDump& dump);
void write_latent_csv(const LatentDump& dump, const std::filesystem::path& path);

struct SeparationScore {
    double shared_ratio = 1.0;
    double specific_ratio = 1.0;
    bool shared_degenerate = false;  // 0/0, reported as 1
    bool specific_degenerate = false;
    std::vector<std::string> warnings;
};

// Per part: mean inter-domain pairwise L2 over mean intra-domain pairwise L2.
SeparationScore separation_score(const LatentDump& dump);

} // namespace dgcast
