// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <vector>

#include "crosssplit/errors.hpp"
#include "crosssplit/ssl.hpp"
#include "doctest.h"
#include "testutil.hpp"

using namespace crosssplit;

namespace {

Matrix onehot_rows(const std::vector<int>& labels, int c) {
    Matrix t(labels.size(), c);
    for (std::size_t i = 0; i < labels.size(); ++i) t.at(i, labels[i]) = 1.0;
    return t;
}

// Identity single-layer net of width c: logits == input features.
MlpNetwork identity_net(int c) {
    MlpNetwork net = make_mlp({c, c}, 1);
    for (int i = 0; i < c; ++i) {
        for (int j = 0; j < c; ++j) net.weights[0].at(i, j) = (i == j) ? 1.0 : 0.0;
        net.biases[0][i] = 0.0;
    }
    return net;
}

}  // namespace

TEST_CASE("weak augmentation adds jitter of the configured scale") {
    Rng rng(11);
    Matrix x = testutil::random_matrix(20, 6, rng, 1.0);
    SslConfig cfg;

    SUBCASE("sigma zero is the identity") {
        cfg.weak_noise_sigma = 0.0;
        Rng r(1);
        Matrix out = weak_augment(x, cfg, r);
        CHECK(testutil::bytes_equal(out.data, x.data));
    }
    SUBCASE("jitter has roughly the right spread") {
        cfg.weak_noise_sigma = 0.1;
        Rng r(2);
        Matrix out = weak_augment(x, cfg, r);
        double ss = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double d = out.data[i] - x.data[i];
            ss += d * d;
        }
        const double sd = std::sqrt(ss / static_cast<double>(x.size()));
        CHECK(sd == doctest::Approx(0.1).epsilon(0.25));
    }
    SUBCASE("same seed, same view; different seed, different view") {
        Rng r1(3), r2(3), r3(4);
        Matrix a = weak_augment(x, cfg, r1);
        Matrix b = weak_augment(x, cfg, r2);
        Matrix c = weak_augment(x, cfg, r3);
        CHECK(testutil::bytes_equal(a.data, b.data));
        CHECK_FALSE(testutil::bytes_equal(a.data, c.data));
    }
}

TEST_CASE("strong augmentation drops coordinates then jitters") {
    Rng rng(12);
    Matrix x = testutil::random_matrix(10, 8, rng, 2.0);
    SslConfig cfg;
    cfg.strong_noise_sigma = 0.0;

    SUBCASE("full dropout with no jitter is exactly zero") {
        cfg.strong_dropout_p = 1.0;
        Rng r(5);
        Matrix out = strong_augment(x, cfg, r);
        for (double v : out.data) CHECK(v == 0.0);
    }
    SUBCASE("no dropout with no jitter is the identity") {
        cfg.strong_dropout_p = 0.0;
        Rng r(5);
        Matrix out = strong_augment(x, cfg, r);
        CHECK(testutil::bytes_equal(out.data, x.data));
    }
    SUBCASE("partial dropout keeps or zeroes each entry") {
        cfg.strong_dropout_p = 0.5;
        Rng r(6);
        Matrix out = strong_augment(x, cfg, r);
        int zeroed = 0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const bool kept = out.data[i] == x.data[i];
            const bool dropped = out.data[i] == 0.0;
            CHECK((kept || dropped));
            if (dropped && x.data[i] != 0.0) ++zeroed;
        }
        CHECK(zeroed > 10);  // 80 entries at p=0.5
        CHECK(zeroed < 70);
    }
}

TEST_CASE("mixup_with_lambda blends rows against a permutation") {
    Matrix x(2, 2);
    x.at(0, 0) = 1.0; x.at(0, 1) = 2.0;
    x.at(1, 0) = 3.0; x.at(1, 1) = 4.0;
    Matrix t = onehot_rows({0, 1}, 2);

    SUBCASE("lambda one is the identity") {
        MixupResult m = mixup_with_lambda(x, t, 1.0, {1, 0});
        CHECK(testutil::bytes_equal(m.x.data, x.data));
        CHECK(testutil::bytes_equal(m.targets.data, t.data));
    }
    SUBCASE("lambda half averages with the partner") {
        MixupResult m = mixup_with_lambda(x, t, 0.5, {1, 0});
        CHECK(m.x.at(0, 0) == doctest::Approx(2.0).epsilon(1e-15));
        CHECK(m.x.at(0, 1) == doctest::Approx(3.0).epsilon(1e-15));
        CHECK(m.targets.at(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
        CHECK(m.targets.at(0, 1) == doctest::Approx(0.5).epsilon(1e-15));
    }
    SUBCASE("lambda outside the unit interval is rejected") {
        CHECK_THROWS_AS(mixup_with_lambda(x, t, 1.5, {1, 0}), ContractError);
        CHECK_THROWS_AS(mixup_with_lambda(x, t, -0.1, {1, 0}), ContractError);
        CHECK_THROWS_AS(mixup_with_lambda(x, t, 0.5, {0}), ContractError);
    }
}

TEST_CASE("mixup folds lambda into the upper half") {
    Rng rng(21);
    Matrix x = testutil::random_matrix(16, 4, rng, 1.0);
    Matrix t = onehot_rows(std::vector<int>(16, 1), 4);
    for (int trial = 0; trial < 50; ++trial) {
        MixupResult m = mixup(x, t, 4.0, rng);
        CHECK(m.lambda >= 0.5);
        CHECK(m.lambda <= 1.0);
        std::set<std::size_t> seen(m.perm.begin(), m.perm.end());
        CHECK(seen.size() == 16);
    }
    // very large alpha concentrates Beta(a,a) near 1/2
    MixupResult m = mixup(x, t, 1e6, rng);
    CHECK(m.lambda == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("soft_ce_loss gradient matches finite differences") {
    for (std::uint64_t seed : {11ULL, 12ULL, 13ULL}) {
        MlpNetwork net = make_mlp({2, 4, 3}, seed);
        Rng rng(seed + 100);
        Matrix x = testutil::random_matrix(6, 2, rng, 1.5);
        Matrix t(6, 3);
        for (std::size_t i = 0; i < 6; ++i) {
            auto row = testutil::random_simplex(3, rng);
            for (std::size_t c = 0; c < 3; ++c) t.at(i, c) = row[c];
        }
        LossGrad lg = soft_ce_loss(net, x, t);
        ForwardCache cache = forward(net, x);
        CHECK(lg.loss ==
              doctest::Approx(cross_entropy_soft(softmax_rows(cache.logits()), t))
                  .epsilon(1e-12));
        testutil::check_gradients(net, lg.grads, [&](const MlpNetwork& n) {
            ForwardCache c = forward(n, x);
            return cross_entropy_soft(softmax_rows(c.logits()), t);
        });
    }
}

TEST_CASE("supervised_loss is soft CE on the mixed batch") {
    MlpNetwork net = make_mlp({3, 5, 3}, 9);
    Rng rng(30);
    Matrix x = testutil::random_matrix(8, 3, rng, 1.0);
    Matrix t = onehot_rows({0, 1, 2, 0, 1, 2, 0, 1}, 3);
    SslConfig cfg;

    Rng r1(55), r2(55);
    LossGrad lg = supervised_loss(net, x, t, cfg, r1);
    MixupResult m = mixup(x, t, cfg.mixup_alpha, r2);
    LossGrad ref = soft_ce_loss(net, m.x, m.targets);
    CHECK(lg.loss == doctest::Approx(ref.loss).epsilon(1e-12));
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
        CHECK(testutil::bytes_equal(lg.grads.dw[l].data, ref.grads.dw[l].data));
        CHECK(testutil::bytes_equal(lg.grads.db[l], ref.grads.db[l]));
    }
}

TEST_CASE("pseudo_labels thresholds on softmax confidence") {
    MlpNetwork net = identity_net(3);
    // logits = ln(target probs) gives exact softmax rows
    Matrix x(3, 3);
    auto set_row = [&](std::size_t i, double a, double b, double c) {
        x.at(i, 0) = std::log(a);
        x.at(i, 1) = std::log(b);
        x.at(i, 2) = std::log(c);
    };
    set_row(0, 0.98, 0.01, 0.01);   // confident class 0
    set_row(1, 0.50, 0.25, 0.25);   // not confident
    set_row(2, 0.01, 0.96, 0.03);   // confident class 1
    PseudoLabels pl = pseudo_labels(net, x, 0.95);
    REQUIRE(pl.keep.size() == 3);
    CHECK(pl.keep[0] == 1);
    CHECK(pl.keep[1] == 0);
    CHECK(pl.keep[2] == 1);
    CHECK(pl.label[0] == 0);
    CHECK(pl.label[2] == 1);
    CHECK(pl.confidence[0] == doctest::Approx(0.98).epsilon(1e-9));
    CHECK(pl.mask_fraction == doctest::Approx(2.0 / 3.0).epsilon(1e-15));

    // tau = 0 keeps everything
    PseudoLabels all = pseudo_labels(net, x, 0.0);
    CHECK(all.mask_fraction == 1.0);
}

TEST_CASE("pseudo_label_loss averages over kept rows only") {
    MlpNetwork net = make_mlp({3, 4, 3}, 17);
    Rng rng(31);
    Matrix strong = testutil::random_matrix(5, 3, rng, 1.0);

    SUBCASE("none kept gives zero loss and zero gradients") {
        PseudoLabels pl;
        pl.label = {0, 0, 0, 0, 0};
        pl.keep = {0, 0, 0, 0, 0};
        pl.confidence = {0, 0, 0, 0, 0};
        LossGrad lg = pseudo_label_loss(net, strong, pl);
        CHECK(lg.loss == 0.0);
        for (std::size_t l = 0; l < net.num_layers(); ++l) {
            for (double v : lg.grads.dw[l].data) CHECK(v == 0.0);
            for (double v : lg.grads.db[l]) CHECK(v == 0.0);
        }
    }
    SUBCASE("kept subset matches soft CE over those rows") {
        PseudoLabels pl;
        pl.label = {2, 1, 0, 1, 2};
        pl.keep = {1, 0, 1, 0, 1};
        pl.confidence = {1, 1, 1, 1, 1};
        LossGrad lg = pseudo_label_loss(net, strong, pl);

        Matrix kept_x = gather_rows(strong, {0, 2, 4});
        Matrix kept_t = onehot_rows({2, 0, 2}, 3);
        LossGrad ref = soft_ce_loss(net, kept_x, kept_t);
        CHECK(lg.loss == doctest::Approx(ref.loss).epsilon(1e-12));
        for (std::size_t l = 0; l < net.num_layers(); ++l) {
            for (std::size_t i = 0; i < lg.grads.dw[l].size(); ++i) {
                CHECK(lg.grads.dw[l].data[i] ==
                      doctest::Approx(ref.grads.dw[l].data[i]).epsilon(1e-12));
            }
        }
    }
    SUBCASE("gradient check with fixed pseudo-labels") {
        PseudoLabels pl;
        pl.label = {2, 1, 0, 1, 2};
        pl.keep = {1, 0, 1, 0, 1};
        pl.confidence = {1, 1, 1, 1, 1};
        LossGrad lg = pseudo_label_loss(net, strong, pl);
        testutil::check_gradients(net, lg.grads, [&](const MlpNetwork& n) {
            return pseudo_label_loss(n, strong, pl).loss;
        });
    }
}

TEST_CASE("unsupervised_loss wires weak then strong views") {
    MlpNetwork net = make_mlp({4, 6, 3}, 23);
    Rng rng(41);
    Matrix x = testutil::random_matrix(10, 4, rng, 2.0);
    SslConfig cfg;
    cfg.tau = 0.0;  // keep everything so the comparison is nontrivial

    Rng r1(77), r2(77);
    UnsupResult u = unsupervised_loss(net, x, cfg, r1);
    Matrix weak = weak_augment(x, cfg, r2);
    Matrix strong = strong_augment(x, cfg, r2);
    PseudoLabels pl = pseudo_labels(net, weak, cfg.tau);
    LossGrad ref = pseudo_label_loss(net, strong, pl);
    CHECK(u.loss == doctest::Approx(ref.loss).epsilon(1e-12));
    CHECK(u.mask_fraction == pl.mask_fraction);
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
        CHECK(testutil::bytes_equal(u.grads.dw[l].data, ref.grads.dw[l].data));
    }
}

TEST_CASE("mask fraction decreases as tau rises") {
    MlpNetwork net = make_mlp({4, 8, 3}, 29);
    Rng rng(51);
    Matrix x = testutil::random_matrix(40, 4, rng, 3.0);
    SslConfig cfg;
    double prev = 2.0;
    for (double tau : {0.0, 0.4, 0.8, 0.99}) {
        cfg.tau = tau;
        Rng r(7);
        UnsupResult u = unsupervised_loss(net, x, cfg, r);
        CHECK(u.mask_fraction <= prev);
        prev = u.mask_fraction;
    }
    cfg.tau = 0.0;
    Rng r(7);
    CHECK(unsupervised_loss(net, x, cfg, r).mask_fraction == 1.0);
}

TEST_CASE("nt_xent closed form for orthogonal identical siblings") {
    // B=2, e2 = e1, rows orthonormal. Positive similarity 1, both negatives 0:
    // per-view loss = -ln(e^{1/T} / (e^{1/T} + 2e^0)) = ln(e^{1/T}+2) - 1/T.
    const double temp = 0.5;
    Matrix e1(2, 2);
    e1.at(0, 0) = 1.0;
    e1.at(1, 1) = 1.0;
    ContrastiveResult r = nt_xent(e1, e1, temp);
    const double want = std::log(std::exp(1.0 / temp) + 2.0) - 1.0 / temp;
    CHECK(r.loss == doctest::Approx(want).epsilon(1e-12));

    // scale invariance: normalization happens inside
    Matrix e1s = e1;
    scale_inplace(e1s, 37.0);
    ContrastiveResult rs = nt_xent(e1s, e1, temp);
    CHECK(rs.loss == doctest::Approx(want).epsilon(1e-12));

    CHECK_THROWS_AS(nt_xent(Matrix(1, 2), Matrix(1, 2), temp), ContractError);
    CHECK_THROWS_AS(nt_xent(e1, e1, 0.0), ConfigError);
    CHECK_THROWS_AS(nt_xent(e1, e1, -1.0), ConfigError);
}

TEST_CASE("nt_xent prefers aligned siblings") {
    Rng rng(61);
    Matrix e1 = testutil::random_matrix(8, 6, rng, 1.0);
    Matrix shuffled = testutil::random_matrix(8, 6, rng, 1.0);
    const double good = nt_xent(e1, e1, 0.5).loss;
    const double bad = nt_xent(e1, shuffled, 0.5).loss;
    CHECK(good < bad);
}

TEST_CASE("nt_xent gradients match finite differences") {
    Rng rng(71);
    Matrix e1 = testutil::random_matrix(3, 4, rng, 1.0);
    Matrix e2 = testutil::random_matrix(3, 4, rng, 1.0);
    ContrastiveResult r = nt_xent(e1, e2, 0.5);

    const double h = 1e-6;
    auto probe = [&](Matrix& m, const Matrix& grad) {
        for (std::size_t i = 0; i < m.size(); ++i) {
            const double orig = m.data[i];
            m.data[i] = orig + h;
            const double up = nt_xent(e1, e2, 0.5).loss;
            m.data[i] = orig - h;
            const double dn = nt_xent(e1, e2, 0.5).loss;
            m.data[i] = orig;
            const double fd = (up - dn) / (2.0 * h);
            CHECK(std::abs(fd - grad.data[i]) <=
                  1e-5 * std::max(1.0, std::abs(grad.data[i])));
        }
    };
    probe(e1, r.d_e1);
    probe(e2, r.d_e2);
}

TEST_CASE("contrastive_loss backpropagates the embedding gradient") {
    MlpNetwork net = make_mlp({4, 6, 5, 3}, 37);
    Rng rng(81);
    Matrix x = testutil::random_matrix(6, 4, rng, 1.5);
    SslConfig cfg;

    Rng r(91);
    LossGrad lg = contrastive_loss(net, x, cfg, r);
    CHECK(std::isfinite(lg.loss));
    CHECK(lg.loss > 0.0);

    // finite differences, recreating the same augmentation stream each probe
    testutil::check_gradients(
        net, lg.grads,
        [&](const MlpNetwork& n) {
            Rng rr(91);
            Matrix v1 = strong_augment(x, cfg, rr);
            Matrix v2 = strong_augment(x, cfg, rr);
            ForwardCache c1 = forward(n, v1);
            ForwardCache c2 = forward(n, v2);
            return nt_xent(c1.embeddings(), c2.embeddings(), cfg.temperature).loss;
        },
        1e-6, 1e-4);
}

TEST_CASE("total_loss combines the three weighted terms") {
    SslConfig cfg;
    cfg.lambda_u = 1.0;
    cfg.lambda_c = 0.025;
    CHECK(total_loss(1.0, 0.5, 0.2, cfg) == doctest::Approx(1.505).epsilon(1e-15));
    CHECK_THROWS_AS(
        total_loss(std::numeric_limits<double>::quiet_NaN(), 0.0, 0.0, cfg),
        DivergedError);
    CHECK_THROWS_AS(
        total_loss(0.0, std::numeric_limits<double>::infinity(), 0.0, cfg),
        DivergedError);
}
