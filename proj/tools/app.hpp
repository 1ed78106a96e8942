#pragma once

#include "dgcast/data.hpp"
#include "dgcast/training.hpp"

#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

namespace dgcast::app {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kTraining = 3 };

inline constexpr const char* kOutputRootEnv = "DGCAST_OUTPUT_ROOT";

// Everything a command needs, resolved from defaults, the config file and flags.
struct RunConfig {
    std::optional<std::filesystem::path> data_csv;
    CsvSchema schema;
    SyntheticSpec synthetic;
    TrainConfig train;
    std::vector<std::string> ablate_variants{"full", "e2e", "no_reg", "no_decomp", "shared_only", "no_cond"};
    std::vector<std::uint64_t> ablate_seeds{0, 1, 2};
};

nlohmann::json to_json(const RunConfig& config);
// Sections: data, synthetic, train, ablate. Unknown keys are rejected.
RunConfig run_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const SyntheticSpec& spec);
SyntheticSpec synthetic_from_json(const nlohmann::json& j, SyntheticSpec base = {});

// Entry point shared by the executable and the tests. Returns the process exit code.
int run(int argc, const char* const* argv);

} // namespace dgcast::app
