// SPDX-License-Identifier: Apache-2.0
#include "crosssplit/ssl.hpp"

#include <cmath>
#include <numeric>

#include "crosssplit/errors.hpp"

namespace crosssplit {

Matrix weak_augment(const Matrix& x, const SslConfig& cfg, Rng& rng) {
    Matrix out = x;
    if (cfg.weak_noise_sigma != 0.0)
        for (double& v : out.data) v += cfg.weak_noise_sigma * rng.gaussian();
    return out;
}

Matrix strong_augment(const Matrix& x, const SslConfig& cfg, Rng& rng) {
    Matrix out = x;
    // Dropout mask on the original coordinates first, then jitter, so p=1
    // with sigma=0 yields the exact zero vector.
    if (cfg.strong_dropout_p > 0.0)
        for (double& v : out.data)
            if (rng.uniform() < cfg.strong_dropout_p) v = 0.0;
    if (cfg.strong_noise_sigma != 0.0)
        for (double& v : out.data) v += cfg.strong_noise_sigma * rng.gaussian();
    return out;
}

MixupResult mixup_with_lambda(const Matrix& x, const Matrix& targets,
                              double lambda, const std::vector<std::size_t>& perm) {
    if (x.rows != targets.rows)
        throw ContractError("mixup: feature/target row mismatch");
    if (perm.size() != x.rows) throw ContractError("mixup: permutation size mismatch");
    if (lambda < 0.0 || lambda > 1.0) throw ContractError("mixup: lambda outside [0,1]");
    MixupResult res;
    res.lambda = lambda;
    res.perm = perm;
    res.x = Matrix(x.rows, x.cols);
    res.targets = Matrix(targets.rows, targets.cols);
    for (std::size_t i = 0; i < x.rows; ++i) {
        const double* xa = x.row(i);
        const double* xb = x.row(perm[i]);
        double* xo = res.x.row(i);
        for (std::size_t c = 0; c < x.cols; ++c)
            xo[c] = lambda * xa[c] + (1.0 - lambda) * xb[c];
        const double* ta = targets.row(i);
        const double* tb = targets.row(perm[i]);
        double* to = res.targets.row(i);
        for (std::size_t c = 0; c < targets.cols; ++c)
            to[c] = lambda * ta[c] + (1.0 - lambda) * tb[c];
    }
    return res;
}

MixupResult mixup(const Matrix& x, const Matrix& targets, double alpha, Rng& rng) {
    if (!(alpha > 0.0)) throw ConfigError("mixup: alpha must be > 0");
    double lambda = rng.beta(alpha, alpha);
    lambda = std::max(lambda, 1.0 - lambda);
    std::vector<std::size_t> perm(x.rows);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    rng.shuffle(perm);
    return mixup_with_lambda(x, targets, lambda, perm);
}

LossGrad soft_ce_loss(const MlpNetwork& net, const Matrix& x, const Matrix& targets) {
    ForwardCache cache = forward(net, x);
    Matrix probs = softmax_rows(cache.logits());
    LossGrad out;
    out.loss = cross_entropy_soft(probs, targets);
    Matrix dlogits = probs;
    axpy_into(-1.0, targets, dlogits);
    scale_inplace(dlogits, 1.0 / static_cast<double>(x.rows));
    out.grads = backward(net, cache, dlogits);
    return out;
}

LossGrad supervised_loss(const MlpNetwork& net, const Matrix& x,
                         const Matrix& soft_targets, const SslConfig& cfg, Rng& rng) {
    MixupResult mixed = mixup(x, soft_targets, cfg.mixup_alpha, rng);
    return soft_ce_loss(net, mixed.x, mixed.targets);
}

PseudoLabels pseudo_labels(const MlpNetwork& net, const Matrix& weak_views, double tau) {
    Matrix probs = softmax_rows(forward(net, weak_views).logits());
    PseudoLabels pl;
    pl.label.resize(probs.rows);
    pl.keep.resize(probs.rows);
    pl.confidence.resize(probs.rows);
    std::size_t kept = 0;
    for (std::size_t i = 0; i < probs.rows; ++i) {
        const double* p = probs.row(i);
        std::size_t best = 0;
        for (std::size_t c = 1; c < probs.cols; ++c)
            if (p[c] > p[best]) best = c;
        pl.label[i] = static_cast<int>(best);
        pl.confidence[i] = p[best];
        pl.keep[i] = p[best] >= tau ? 1 : 0;
        kept += pl.keep[i];
    }
    pl.mask_fraction =
        probs.rows == 0 ? 0.0 : static_cast<double>(kept) / static_cast<double>(probs.rows);
    return pl;
}

LossGrad pseudo_label_loss(const MlpNetwork& net, const Matrix& strong_views,
                           const PseudoLabels& pl) {
    if (pl.label.size() != strong_views.rows)
        throw ContractError("pseudo_label_loss: label/view count mismatch");
    std::size_t kept = 0;
    for (auto k : pl.keep) kept += k;
    if (kept == 0) {
        LossGrad out;
        out.grads = zero_gradients(net);
        return out;
    }
    ForwardCache cache = forward(net, strong_views);
    Matrix probs = softmax_rows(cache.logits());
    constexpr double kEps = 1e-12;
    double loss = 0.0;
    Matrix dlogits(probs.rows, probs.cols);
    double inv = 1.0 / static_cast<double>(kept);
    for (std::size_t i = 0; i < probs.rows; ++i) {
        if (!pl.keep[i]) continue;  // dlogits row stays zero
        const double* p = probs.row(i);
        double* d = dlogits.row(i);
        loss -= std::log(p[pl.label[i]] + kEps);
        for (std::size_t c = 0; c < probs.cols; ++c) d[c] = p[c] * inv;
        d[pl.label[i]] -= inv;
    }
    LossGrad out;
    out.loss = loss * inv;
    out.grads = backward(net, cache, dlogits);
    return out;
}

UnsupResult unsupervised_loss(const MlpNetwork& net, const Matrix& x_unlabeled,
                              const SslConfig& cfg, Rng& rng) {
    Matrix weak = weak_augment(x_unlabeled, cfg, rng);
    Matrix strong = strong_augment(x_unlabeled, cfg, rng);
    PseudoLabels pl = pseudo_labels(net, weak, cfg.tau);
    LossGrad lg = pseudo_label_loss(net, strong, pl);
    UnsupResult out;
    out.loss = lg.loss;
    out.mask_fraction = pl.mask_fraction;
    out.grads = std::move(lg.grads);
    return out;
}

ContrastiveResult nt_xent(const Matrix& e1, const Matrix& e2, double temperature) {
    if (e1.rows != e2.rows || e1.cols != e2.cols)
        throw ContractError("nt_xent: sibling batches must have equal shape");
    if (e1.rows < 2) throw ContractError("nt_xent: need batch size >= 2");
    if (!(temperature > 0.0)) throw ConfigError("nt_xent: temperature must be > 0");

    std::size_t b = e1.rows, d = e1.cols, n = 2 * b;
    // Stack and L2-normalize. Zero rows stay zero (norm clamped to 1).
    Matrix u(n, d);
    std::vector<double> norms(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double* src = i < b ? e1.row(i) : e2.row(i - b);
        double sq = 0.0;
        for (std::size_t k = 0; k < d; ++k) sq += src[k] * src[k];
        double nrm = std::sqrt(sq);
        norms[i] = nrm > 0.0 ? nrm : 1.0;
        double* dst = u.row(i);
        for (std::size_t k = 0; k < d; ++k) dst[k] = src[k] / norms[i];
    }

    // Row-wise softmax over similarities, self excluded; positive = sibling.
    Matrix sim = matmul_nt(u, u);
    double inv_t = 1.0 / temperature;
    Matrix p(n, n);
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t pos = i < b ? i + b : i - b;
        const double* srow = sim.row(i);
        double* prow = p.row(i);
        double mx = -1e300;
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) mx = std::max(mx, srow[j] * inv_t);
        double z = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) {
                prow[j] = 0.0;
                continue;
            }
            prow[j] = std::exp(srow[j] * inv_t - mx);
            z += prow[j];
        }
        for (std::size_t j = 0; j < n; ++j) prow[j] /= z;
        loss -= std::log(p.at(i, pos));
    }
    loss /= static_cast<double>(n);

    // dL/dsim = (P - onehot(pos)) / (n*T) on off-diagonal entries; sim is
    // symmetric in u so dU = (G + G^T) U, then project through normalization.
    Matrix g = p;
    double scale = 1.0 / (static_cast<double>(n) * temperature);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t pos = i < b ? i + b : i - b;
        g.at(i, pos) -= 1.0;
        for (std::size_t j = 0; j < n; ++j) g.at(i, j) *= scale;
        g.at(i, i) = 0.0;
    }
    Matrix gsym(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) gsym.at(i, j) = g.at(i, j) + g.at(j, i);
    Matrix du = matmul(gsym, u);

    ContrastiveResult res;
    res.loss = loss;
    res.d_e1 = Matrix(b, d);
    res.d_e2 = Matrix(b, d);
    for (std::size_t i = 0; i < n; ++i) {
        const double* durow = du.row(i);
        const double* urow = u.row(i);
        double proj = 0.0;
        for (std::size_t k = 0; k < d; ++k) proj += durow[k] * urow[k];
        double* out = i < b ? res.d_e1.row(i) : res.d_e2.row(i - b);
        for (std::size_t k = 0; k < d; ++k)
            out[k] = (durow[k] - proj * urow[k]) / norms[i];
    }
    return res;
}

LossGrad contrastive_loss(const MlpNetwork& net, const Matrix& x_unlabeled,
                          const SslConfig& cfg, Rng& rng) {
    Matrix va = strong_augment(x_unlabeled, cfg, rng);
    Matrix vb = strong_augment(x_unlabeled, cfg, rng);
    ForwardCache ca = forward(net, va);
    ForwardCache cb = forward(net, vb);
    ContrastiveResult con = nt_xent(ca.embeddings(), cb.embeddings(), cfg.temperature);
    Matrix zero_dlogits(x_unlabeled.rows, net.output_dim());
    LossGrad out;
    out.loss = con.loss;
    out.grads = backward(net, ca, zero_dlogits, con.d_e1);
    add_scaled(out.grads, backward(net, cb, zero_dlogits, con.d_e2), 1.0);
    return out;
}

double total_loss(double sup, double unsup, double con, const SslConfig& cfg) {
    double t = sup + cfg.lambda_u * unsup + cfg.lambda_c * con;
    if (!std::isfinite(t))
        throw DivergedError("total_loss: non-finite loss component", -1);
    return t;
}

}  // namespace crosssplit
