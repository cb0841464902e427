// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "crosssplit/dataset.hpp"
#include "crosssplit/nn.hpp"

namespace crosssplit {

// One row of metrics.csv, in column order.
struct EpochMetrics {
    int epoch = 0;
    double gamma = 0.0;
    double lr = 0.0;
    double train_acc_clean_n1 = 0.0;
    double train_acc_noisy_n1 = 0.0;
    double train_acc_clean_n2 = 0.0;
    double train_acc_noisy_n2 = 0.0;
    double test_acc_n1 = 0.0;
    double test_acc_n2 = 0.0;
    double test_acc_ens = 0.0;
    double beta_mean_clean = 0.0;
    double beta_mean_noisy = 0.0;
    double sup_loss = 0.0;
    double unsup_loss = 0.0;
    double con_loss = 0.0;
    double mask_fraction = 0.0;
};

extern const char kMetricsCsvHeader[];

// Append-only, strictly increasing epochs.
struct MetricsLog {
    std::vector<EpochMetrics> rows;
    void append(const EpochMetrics& m);
};

bool operator==(const EpochMetrics& a, const EpochMetrics& b);

struct MemorizationCounts {
    std::int64_t clean_total = 0;
    std::int64_t clean_hits = 0;
    std::int64_t noisy_total = 0;
    std::int64_t noisy_hits = 0;
};

// Predictions (argmax softmax on raw features) scored against ASSIGNED labels,
// split by the clean/noisy flag. High noisy accuracy = memorization.
MemorizationCounts memorization_counts(const MlpNetwork& net, const NoisyDataset& ds);

// (train_acc_clean, train_acc_noisy); an empty subset scores 0.
std::pair<double, double> memorization_metrics(const MlpNetwork& net,
                                               const NoisyDataset& ds);

// Mean beta over the clean and noisy subsets of the listed example ids.
// Returns (mean_clean, mean_noisy); an empty subset scores 0.
std::pair<double, double> beta_means(const std::vector<double>& betas,
                                     const std::vector<std::int64_t>& ids,
                                     const NoisyDataset& ds);

void export_csv(const MetricsLog& log, const std::string& path);
MetricsLog import_csv(const std::string& path);

// Writes <prefix>_clean_acc.csv, <prefix>_noisy_acc.csv, <prefix>_test_acc.csv.
void export_plotdata(const MetricsLog& log, const std::string& prefix);

// CSV of (id, true_label, assigned_label, penultimate embedding coordinates).
void export_embeddings(const MlpNetwork& net, const NoisyDataset& ds,
                       const std::string& path);

}  // namespace crosssplit
