// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "crosssplit/matrix.hpp"
#include "crosssplit/nn.hpp"
#include "crosssplit/rng.hpp"

namespace crosssplit {

struct SslConfig {
    double tau = 0.95;              // pseudo-label confidence threshold
    double lambda_u = 1.0;          // unsupervised loss weight
    double lambda_c = 0.025;        // contrastive loss weight
    double mixup_alpha = 4.0;
    double temperature = 0.5;       // contrastive temperature
    double weak_noise_sigma = 0.1;
    double strong_noise_sigma = 0.3;
    double strong_dropout_p = 0.25;
    int unlabeled_ratio = 1;        // unlabeled batch size = ratio * labeled
};

// weak: additive Gaussian jitter. strong: per-coordinate dropout of the
// original features, then additive jitter.
Matrix weak_augment(const Matrix& x, const SslConfig& cfg, Rng& rng);
Matrix strong_augment(const Matrix& x, const SslConfig& cfg, Rng& rng);

struct MixupResult {
    Matrix x;
    Matrix targets;
    double lambda = 1.0;
    std::vector<std::size_t> perm;
};

// lambda ~ Beta(alpha, alpha), folded to [0.5, 1]; partner rows drawn by a
// uniform permutation of the batch.
MixupResult mixup(const Matrix& x, const Matrix& targets, double alpha, Rng& rng);
// Deterministic core used by tests and by mixup itself.
MixupResult mixup_with_lambda(const Matrix& x, const Matrix& targets,
                              double lambda, const std::vector<std::size_t>& perm);

struct LossGrad {
    double loss = 0.0;
    Gradients grads;
};

// Soft-target CE on a batch; mean over rows. dlogits = (softmax - targets)/B.
LossGrad soft_ce_loss(const MlpNetwork& net, const Matrix& x, const Matrix& targets);

// Labeled branch: MixUp on (x, soft targets), then soft CE.
LossGrad supervised_loss(const MlpNetwork& net, const Matrix& x,
                         const Matrix& soft_targets, const SslConfig& cfg, Rng& rng);

struct PseudoLabels {
    std::vector<int> label;
    std::vector<std::uint8_t> keep;
    std::vector<double> confidence;
    double mask_fraction = 0.0;
};

// argmax softmax(net(weak view)); keep rows with max confidence >= tau.
PseudoLabels pseudo_labels(const MlpNetwork& net, const Matrix& weak_views, double tau);

// CE(net(strong view), one-hot pseudo-label), averaged over kept rows only
// (0 and zero grads if none kept). Pseudo-labels are inputs (stop-gradient).
LossGrad pseudo_label_loss(const MlpNetwork& net, const Matrix& strong_views,
                           const PseudoLabels& pl);

struct UnsupResult {
    double loss = 0.0;
    double mask_fraction = 0.0;
    Gradients grads;
};

// Full unlabeled branch: draw weak + strong views, pseudo-label, CE.
UnsupResult unsupervised_loss(const MlpNetwork& net, const Matrix& x_unlabeled,
                              const SslConfig& cfg, Rng& rng);

struct ContrastiveResult {
    double loss = 0.0;
    Matrix d_e1;   // gradient w.r.t. the raw (pre-normalization) embeddings
    Matrix d_e2;
};

// NT-Xent over 2B views; e1[i] and e2[i] are sibling views. Embeddings are
// L2-normalized inside. B >= 2 required.
ContrastiveResult nt_xent(const Matrix& e1, const Matrix& e2, double temperature);

// Draws two strong views of the batch, runs both through the network and
// backpropagates the NT-Xent gradient from the penultimate layer.
LossGrad contrastive_loss(const MlpNetwork& net, const Matrix& x_unlabeled,
                          const SslConfig& cfg, Rng& rng);

// sup + lambda_u * unsup + lambda_c * con. Throws DivergedError on non-finite
// components.
double total_loss(double sup, double unsup, double con, const SslConfig& cfg);

}  // namespace crosssplit
