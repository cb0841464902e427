// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "crosssplit/matrix.hpp"
#include "crosssplit/nn.hpp"

namespace crosssplit {

// Base-2 Jensen-Shannon divergence; bounded in [0,1], symmetric, 0 iff p=q.
double jsd(std::span<const double> p, std::span<const double> q);

struct ClassJsdStats {
    std::vector<double> jmin;
    std::vector<double> jmax;
    std::vector<std::int64_t> counts;

    bool has(int c) const {
        return c >= 0 && c < static_cast<int>(counts.size()) && counts[c] > 0;
    }
};

// Per assigned class: min and max of jsd(peer prob row, one-hot label).
// Computed once per epoch over a whole split.
ClassJsdStats class_jsd_stats(const Matrix& peer_probs,
                              const std::vector<int>& labels, int num_classes);

// Min/max rescale within the class. A degenerate class (max == min, e.g. a
// single member) maps to 0: uniformly-scored classes are treated as
// clean-leaning rather than pushed toward the peer.
double normalize_jsd(double jsd_value, const ClassJsdStats& stats, int cls);

struct GammaSchedule {
    int e_warm = 10;
    int delta = 10;
    double stage1 = 0.6;
    double stage2 = 0.8;
    double stage3 = 1.0;
};

// Staged relaxation: stage1 on [E_warm, E_warm+2d], stage2 on
// (E_warm+2d, E_warm+3d], stage3 after. First branch wins at the shared
// boundary. epoch < E_warm is a contract error (correction never runs there).
double gamma_at(int epoch, const GammaSchedule& sched);

// beta = gamma*(jsd_norm - 0.5) + 0.5.
double beta(double jsd_norm, double gamma);

struct SoftLabelBatch {
    Matrix soft;                    // N x C rows s_i
    std::vector<double> betas;
    std::vector<double> jsd_raw;
    std::vector<double> jsd_norm;
    double gamma = 0.0;
};

struct CorrectionOptions {
    bool class_normalize = true;    // false reproduces the no_class_norm ablation
    bool enabled = true;            // false reproduces the no_correction ablation
};

// s_i = beta_i * peer_probs_i + (1 - beta_i) * onehot(label_i). Pure; the
// correct_labels wrapper below feeds it peer softmax outputs.
Matrix assemble_soft_labels(const Matrix& peer_probs,
                            const std::vector<int>& labels, int num_classes,
                            const std::vector<double>& betas);

// Full per-epoch correction pass for one split: peer forward on raw features,
// JSD against assigned one-hots, per-class normalization, beta, soft labels.
SoftLabelBatch correct_labels(const MlpNetwork& peer, const Matrix& features,
                              const std::vector<int>& labels, int num_classes,
                              int epoch, const GammaSchedule& sched,
                              const CorrectionOptions& options);

}  // namespace crosssplit
