// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crosssplit/dataset.hpp"
#include "crosssplit/trainer.hpp"

namespace crosssplit {

struct DataConfig {
    std::string source_path;   // optional: load the training set from a file
    int classes = 10;
    int per_class = 500;
    int dim = 16;
    double separation = 3.0;
    std::uint64_t seed = 1;
    int test_per_class = 100;  // clean test set, generated alongside
};

struct NoiseSettings {
    NoiseSpec::Kind kind = NoiseSpec::Kind::Symmetric;
    double ratio = 0.4;
    std::uint64_t seed = 2;
    // Asymmetric only: classes whose labels rotate among themselves,
    // e.g. {{0,1,2},{3,4}}. Empty = one cycle over all classes.
    std::vector<std::vector<int>> groups;
};

struct AblationSettings {
    std::vector<Variant> variants;  // ablate subcommand; empty = all
};

struct FullConfig {
    DataConfig data;
    NoiseSettings noise;
    TrainConfig train;   // train.ssl holds the [ssl] section
    AblationSettings ablation;
};

// INI-style text with sections [data], [noise], [train], [ssl], [ablation].
// Unknown sections/keys are rejected; all defaults are materialized; range
// and cross-field validation runs before returning.
FullConfig parse_config_text(const std::string& text);
FullConfig parse_config_file(const std::string& path);

// Canonical echo of the effective config; parses back to an identical value.
std::string echo_config(const FullConfig& cfg);

}  // namespace crosssplit
