#pragma once

// Small synthetic problems that train in milliseconds.

#include "dgcast/training.hpp"

namespace fixture {

inline dgcast::SyntheticSpec tiny_spec(std::uint64_t seed = 0) {
    dgcast::SyntheticSpec spec;
    spec.num_domains = 4;
    spec.series_per_domain = 2;
    spec.length = 60;
    spec.seed = seed;
    return spec;
}

inline dgcast::TrainConfig tiny_config(std::uint64_t seed = 0) {
    dgcast::TrainConfig c;
    c.T = 12;
    c.h = 3;
    c.d_z = 4;
    c.hidden = 4;
    c.kernel = 3;
    c.batch_size = 16;
    c.epochs_stage1 = 2;
    c.epochs_stage2 = 2;
    c.stride = 3;
    c.sample_paths = 20;
    c.test_fraction = 0.25;
    c.seed = seed;
    return c;
}

inline dgcast::TrainingData tiny_data(const dgcast::TrainConfig& c, std::uint64_t data_seed = 0) {
    return dgcast::prepare_training_data(dgcast::generate_synthetic(tiny_spec(data_seed)), c);
}

} // namespace fixture
