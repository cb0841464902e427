// SPDX-License-Identifier: Apache-2.0
#include "crosssplit/correction.hpp"

#include <cmath>
#include <string>

#include "crosssplit/errors.hpp"

namespace crosssplit {

namespace {
constexpr double kLn2 = 0.69314718055994530942;
}

double jsd(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw ContractError("jsd: length mismatch");
    // 0.5*KL(p||m) + 0.5*KL(q||m), m = (p+q)/2, logs base 2. 0*log0 := 0.
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        double m = 0.5 * (p[i] + q[i]);
        if (p[i] > 0.0) acc += 0.5 * p[i] * std::log(p[i] / m);
        if (q[i] > 0.0) acc += 0.5 * q[i] * std::log(q[i] / m);
    }
    double v = acc / kLn2;
    // Clamp float dust so downstream [0,1] contracts hold exactly.
    if (v < 0.0) v = 0.0;
    if (v > 1.0) v = 1.0;
    return v;
}

ClassJsdStats class_jsd_stats(const Matrix& peer_probs,
                              const std::vector<int>& labels, int num_classes) {
    if (peer_probs.rows != labels.size())
        throw ContractError("class_jsd_stats: probs/labels length mismatch");
    if (labels.empty()) throw ConfigError("class_jsd_stats: empty split");
    ClassJsdStats stats;
    stats.jmin.assign(num_classes, 0.0);
    stats.jmax.assign(num_classes, 0.0);
    stats.counts.assign(num_classes, 0);
    std::vector<double> onehot(peer_probs.cols, 0.0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        int c = labels[i];
        if (c < 0 || c >= num_classes)
            throw ContractError("class_jsd_stats: label out of range");
        onehot[c] = 1.0;
        double j = jsd({peer_probs.row(i), peer_probs.cols}, onehot);
        onehot[c] = 0.0;
        if (stats.counts[c] == 0) {
            stats.jmin[c] = stats.jmax[c] = j;
        } else {
            stats.jmin[c] = std::min(stats.jmin[c], j);
            stats.jmax[c] = std::max(stats.jmax[c], j);
        }
        ++stats.counts[c];
    }
    return stats;
}

double normalize_jsd(double jsd_value, const ClassJsdStats& stats, int cls) {
    if (!stats.has(cls))
        throw ContractError("normalize_jsd: class " + std::to_string(cls) +
                            " absent from stats");
    double lo = stats.jmin[cls], hi = stats.jmax[cls];
    if (hi <= lo) return 0.0;
    double v = (jsd_value - lo) / (hi - lo);
    if (v < 0.0) v = 0.0;
    if (v > 1.0) v = 1.0;
    return v;
}

double gamma_at(int epoch, const GammaSchedule& sched) {
    if (sched.delta < 1) throw ConfigError("gamma_at: delta must be >= 1");
    if (epoch < sched.e_warm)
        throw ContractError("gamma_at: epoch " + std::to_string(epoch) +
                            " precedes warmup end " + std::to_string(sched.e_warm));
    if (epoch <= sched.e_warm + 2 * sched.delta) return sched.stage1;
    if (epoch <= sched.e_warm + 3 * sched.delta) return sched.stage2;
    return sched.stage3;
}

double beta(double jsd_norm, double gamma) {
    return gamma * (jsd_norm - 0.5) + 0.5;
}

Matrix assemble_soft_labels(const Matrix& peer_probs,
                            const std::vector<int>& labels, int num_classes,
                            const std::vector<double>& betas) {
    if (peer_probs.rows != labels.size() || betas.size() != labels.size())
        throw ContractError("assemble_soft_labels: length mismatch");
    if (peer_probs.cols != static_cast<std::size_t>(num_classes))
        throw ContractError("assemble_soft_labels: class count mismatch");
    Matrix soft(peer_probs.rows, peer_probs.cols);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const double* p = peer_probs.row(i);
        double* s = soft.row(i);
        double b = betas[i];
        for (std::size_t c = 0; c < peer_probs.cols; ++c) s[c] = b * p[c];
        s[labels[i]] += 1.0 - b;
    }
    return soft;
}

SoftLabelBatch correct_labels(const MlpNetwork& peer, const Matrix& features,
                              const std::vector<int>& labels, int num_classes,
                              int epoch, const GammaSchedule& sched,
                              const CorrectionOptions& options) {
    if (peer.output_dim() != num_classes)
        throw ContractError("correct_labels: peer output dimension mismatch");
    if (features.rows != labels.size())
        throw ContractError("correct_labels: features/labels length mismatch");

    SoftLabelBatch out;
    std::size_t n = labels.size();

    if (!options.enabled) {
        // no_correction ablation: hard assigned labels, beta pinned to 0.
        out.betas.assign(n, 0.0);
        out.jsd_raw.assign(n, 0.0);
        out.jsd_norm.assign(n, 0.0);
        out.gamma = 0.0;
        Matrix onehot(n, num_classes);
        for (std::size_t i = 0; i < n; ++i) onehot.at(i, labels[i]) = 1.0;
        out.soft = std::move(onehot);
        return out;
    }

    Matrix probs = softmax_rows(forward(peer, features).logits());
    out.jsd_raw.resize(n);
    std::vector<double> onehot(num_classes, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        onehot[labels[i]] = 1.0;
        out.jsd_raw[i] = jsd({probs.row(i), probs.cols}, onehot);
        onehot[labels[i]] = 0.0;
    }

    out.jsd_norm.resize(n);
    if (options.class_normalize) {
        ClassJsdStats stats = class_jsd_stats(probs, labels, num_classes);
        for (std::size_t i = 0; i < n; ++i)
            out.jsd_norm[i] = normalize_jsd(out.jsd_raw[i], stats, labels[i]);
    } else {
        out.jsd_norm = out.jsd_raw;  // no_class_norm ablation: raw JSD feeds beta
    }

    out.gamma = gamma_at(epoch, sched);
    out.betas.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.betas[i] = beta(out.jsd_norm[i], out.gamma);
    out.soft = assemble_soft_labels(probs, labels, num_classes, out.betas);
    return out;
}

}  // namespace crosssplit
