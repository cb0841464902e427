// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "crosssplit/config.hpp"
#include "crosssplit/metrics.hpp"
#include "crosssplit/trainer.hpp"

namespace crosssplit {

extern const char kVersionString[];

struct PreparedData {
    NoisyDataset train;
    NoisyDataset test;  // clean, generated with a seed derived from [data] seed
};

// Generate (or load) the training set, inject noise per [noise], and generate
// the clean test set.
PreparedData prepare_datasets(const FullConfig& cfg);

struct RunSummary {
    MetricsLog log;
    double wall_seconds = 0.0;
};

// Executes one run into out_dir: manifest.txt is written before training
// starts, then metrics.csv, interval checkpoints, and final checkpoints.
RunSummary run_to_directory(const FullConfig& cfg, const std::string& out_dir);

struct AblateSummary {
    int succeeded = 0;
    int failed = 0;
    std::vector<AblationEntry> entries;
};

// One run per configured variant into out_dir/<variant>/, plus ablation.md
// and ablation.csv comparison tables (Best and mean of the last 10 epochs).
AblateSummary ablate_to_directory(const FullConfig& cfg, const std::string& out_dir);

// Merge metrics from several run directories into three per-curve CSVs in
// out_dir, with run-name-prefixed columns.
void report_runs(const std::vector<std::string>& run_dirs,
                 const std::string& out_dir);

}  // namespace crosssplit
