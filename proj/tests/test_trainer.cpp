// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "crosssplit/errors.hpp"
#include "crosssplit/trainer.hpp"
#include "doctest.h"
#include "testutil.hpp"

using namespace crosssplit;

namespace {

bool params_equal(const MlpNetwork& a, const MlpNetwork& b) {
    if (a.layer_sizes != b.layer_sizes) return false;
    for (std::size_t l = 0; l < a.weights.size(); ++l) {
        if (!testutil::bytes_equal(a.weights[l].data, b.weights[l].data)) return false;
        if (!testutil::bytes_equal(a.biases[l], b.biases[l])) return false;
    }
    return true;
}

// Small config that trains in well under a second.
TrainConfig tiny_config() {
    TrainConfig cfg;
    cfg.e_warm = 2;
    cfg.e_max = 6;
    cfg.batch_size = 8;
    cfg.hidden = {16};
    cfg.gamma_delta = 1;
    cfg.ssl.unlabeled_ratio = 1;
    cfg.seed = 1;
    return cfg;
}

NoisyDataset tiny_noisy(int classes = 3, int per_class = 20, int dim = 4) {
    NoisyDataset clean = generate_blobs(classes, per_class, dim, 3.0, 11);
    return inject_symmetric_noise(clean, 0.3, 13);
}

}  // namespace

TEST_CASE("variant names round trip") {
    CHECK(all_variants().size() == 6);
    for (Variant v : all_variants()) {
        CHECK(variant_from_string(to_string(v)) == v);
    }
    CHECK(to_string(Variant::Full) == "full");
    CHECK(to_string(Variant::CeBaseline) == "ce_baseline");
    CHECK_THROWS_AS(variant_from_string("bogus"), ConfigError);
}

TEST_CASE("make_network_pair builds two distinct nets of the right shape") {
    TrainConfig cfg = tiny_config();
    cfg.hidden = {32, 16};
    NetworkPair pair = make_network_pair(cfg, 8, 5);
    CHECK(pair.net1.layer_sizes == std::vector<int>{8, 32, 16, 5});
    CHECK(pair.net2.layer_sizes == std::vector<int>{8, 32, 16, 5});
    CHECK_FALSE(params_equal(pair.net1, pair.net2));
    CHECK(pair.opt1.base_lr == cfg.base_lr);
    CHECK(pair.opt1.schedule.total_epochs == cfg.e_max);

    NetworkPair again = make_network_pair(cfg, 8, 5);
    CHECK(params_equal(pair.net1, again.net1));
    CHECK(params_equal(pair.net2, again.net2));
    cfg.seed = 2;
    NetworkPair other = make_network_pair(cfg, 8, 5);
    CHECK_FALSE(params_equal(pair.net1, other.net1));
}

TEST_CASE("warmup with zero epochs is a no-op") {
    TrainConfig cfg = tiny_config();
    cfg.e_warm = 0;
    NoisyDataset ds = tiny_noisy();
    TrainView view = make_train_view(ds);
    NetworkPair pair = make_network_pair(cfg, view.features.cols, view.num_classes);
    MlpNetwork before = pair.net1;
    CHECK(warmup(pair, view, cfg) == 0.0);
    CHECK(params_equal(pair.net1, before));
    CHECK(pair.net1.revision == 0);
}

TEST_CASE("warmup fits clean blobs") {
    TrainConfig cfg = tiny_config();
    cfg.e_warm = 8;
    cfg.e_max = 8;
    NoisyDataset clean = generate_blobs(3, 40, 4, 3.0, 5);
    TrainView view = make_train_view(clean);
    NetworkPair pair = make_network_pair(cfg, view.features.cols, view.num_classes);
    const double loss = warmup(pair, view, cfg);
    CHECK(loss < 0.5);
    CHECK(evaluate_single(pair.net1, view) > 0.9);
    CHECK(evaluate_single(pair.net2, view) > 0.9);

    // bitwise-deterministic across repeats
    NetworkPair pair2 = make_network_pair(cfg, view.features.cols, view.num_classes);
    warmup(pair2, view, cfg);
    CHECK(params_equal(pair.net1, pair2.net1));
    CHECK(params_equal(pair.net2, pair2.net2));
}

TEST_CASE("train_epoch_for records which peer revision corrected it") {
    TrainConfig cfg = tiny_config();
    NoisyDataset ds = tiny_noisy();
    TrainView view = make_train_view(ds);
    SplitAssignment split = split_dataset(ds, cfg.seed);
    NetworkPair pair = make_network_pair(cfg, view.features.cols, view.num_classes);
    warmup(pair, view, cfg);

    const int epoch = cfg.e_warm + 1;  // first post-warmup epoch
    const std::uint64_t rev2_before = pair.net2.revision;
    EpochStats s1 = train_epoch_for(0, pair, view, split, epoch, cfg);
    CHECK(s1.peer_revision_used == rev2_before);
    const std::uint64_t rev1_after = pair.net1.revision;
    CHECK(rev1_after > 0);
    EpochStats s2 = train_epoch_for(1, pair, view, split, epoch, cfg);
    // net2's correction must see net1's same-epoch update
    CHECK(s2.peer_revision_used == rev1_after);
    CHECK(s1.gamma == 0.6);
    CHECK(s2.gamma == 0.6);
}

TEST_CASE("a peer that knows the truth raises beta on noisy examples") {
    // Train the peer on the clean version of the same feature set, then let it
    // correct the noisy view: noisy examples should earn higher beta.
    NoisyDataset clean = generate_blobs(4, 50, 6, 3.0, 21);
    NoisyDataset noisy = inject_symmetric_noise(clean, 0.4, 22);
    TrainView clean_view = make_train_view(clean);
    TrainView noisy_view = make_train_view(noisy);

    TrainConfig cfg = tiny_config();
    cfg.e_warm = 10;
    cfg.e_max = 10;
    NetworkPair peer_pair =
        make_network_pair(cfg, clean_view.features.cols, clean_view.num_classes);
    warmup(peer_pair, clean_view, cfg);
    REQUIRE(evaluate_single(peer_pair.net1, clean_view) > 0.95);

    GammaSchedule sched;
    sched.e_warm = 10;
    sched.delta = 10;
    SoftLabelBatch slb =
        correct_labels(peer_pair.net1, noisy_view.features, noisy_view.labels,
                       noisy_view.num_classes, 10, sched, CorrectionOptions{});
    double beta_clean = 0.0, beta_noisy = 0.0;
    int n_clean = 0, n_noisy = 0;
    for (std::size_t i = 0; i < noisy.size(); ++i) {
        if (noisy.is_noisy(i)) {
            beta_noisy += slb.betas[i];
            ++n_noisy;
        } else {
            beta_clean += slb.betas[i];
            ++n_clean;
        }
    }
    beta_clean /= n_clean;
    beta_noisy /= n_noisy;
    CHECK(beta_noisy > beta_clean + 0.2);
}

TEST_CASE("no_correction variant trains on pure one-hots") {
    TrainConfig cfg = tiny_config();
    cfg.variant = Variant::NoCorrection;
    NoisyDataset ds = tiny_noisy();
    TrainView view = make_train_view(ds);
    SplitAssignment split = split_dataset(ds, cfg.seed);
    NetworkPair pair = make_network_pair(cfg, view.features.cols, view.num_classes);
    warmup(pair, view, cfg);
    EpochStats s = train_epoch_for(0, pair, view, split, cfg.e_warm + 1, cfg);
    CHECK(s.gamma == 0.0);
    for (double b : s.betas) CHECK(b == 0.0);
}

TEST_CASE("no_split variant trains both networks on the whole set") {
    TrainConfig cfg = tiny_config();
    cfg.variant = Variant::NoSplit;
    NoisyDataset ds = tiny_noisy();
    TrainView view = make_train_view(ds);
    SplitAssignment split = split_dataset(ds, cfg.seed);
    NetworkPair pair = make_network_pair(cfg, view.features.cols, view.num_classes);
    warmup(pair, view, cfg);
    EpochStats s0 = train_epoch_for(0, pair, view, split, cfg.e_warm + 1, cfg);
    EpochStats s1 = train_epoch_for(1, pair, view, split, cfg.e_warm + 1, cfg);
    CHECK(s0.ids.size() == ds.size());
    CHECK(s1.ids.size() == ds.size());

    cfg.variant = Variant::Full;
    NetworkPair pf = make_network_pair(cfg, view.features.cols, view.num_classes);
    warmup(pf, view, cfg);
    EpochStats f0 = train_epoch_for(0, pf, view, split, cfg.e_warm + 1, cfg);
    CHECK(f0.ids.size() == split.d1.size());
}

TEST_CASE("run_crosssplit produces one metrics row per epoch, deterministically") {
    TrainConfig cfg = tiny_config();
    NoisyDataset train = tiny_noisy();
    NoisyDataset test = generate_blobs(3, 10, 4, 3.0, 99);

    RunResult a = run_crosssplit(train, test, cfg);
    LrSchedule sched = cfg.schedule;
    sched.total_epochs = cfg.e_max;
    REQUIRE(a.log.rows.size() == static_cast<std::size_t>(cfg.e_max));
    for (int e = 0; e < cfg.e_max; ++e) {
        const EpochMetrics& row = a.log.rows[e];
        CHECK(row.epoch == e + 1);
        if (e < cfg.e_warm) {
            CHECK(row.gamma == 0.0);
            CHECK(row.unsup_loss == 0.0);
        } else {
            CHECK(row.gamma > 0.0);
        }
        CHECK(row.lr == doctest::Approx(lr_at(e, sched, cfg.base_lr)).epsilon(1e-12));
    }

    RunResult b = run_crosssplit(train, test, cfg);
    CHECK(a.log.rows.size() == b.log.rows.size());
    for (std::size_t i = 0; i < a.log.rows.size(); ++i) {
        CHECK(a.log.rows[i] == b.log.rows[i]);
    }
    CHECK(params_equal(a.pair.net1, b.pair.net1));
    CHECK(params_equal(a.pair.net2, b.pair.net2));
}

TEST_CASE("epoch hook fires once per epoch in order") {
    TrainConfig cfg = tiny_config();
    NoisyDataset train = tiny_noisy();
    NoisyDataset test = generate_blobs(3, 5, 4, 3.0, 99);
    std::vector<int> seen;
    run_crosssplit(train, test, cfg, [&](int epoch, const NetworkPair&) {
        seen.push_back(epoch);
    });
    REQUIRE(seen.size() == static_cast<std::size_t>(cfg.e_max));
    for (int e = 1; e <= cfg.e_max; ++e) CHECK(seen[e - 1] == e);
}

TEST_CASE("warmup-only config emits gamma zero everywhere") {
    TrainConfig cfg = tiny_config();
    cfg.e_warm = 4;
    cfg.e_max = 4;
    NoisyDataset train = tiny_noisy();
    NoisyDataset test = generate_blobs(3, 5, 4, 3.0, 99);
    RunResult r = run_crosssplit(train, test, cfg);
    REQUIRE(r.log.rows.size() == 4);
    for (const EpochMetrics& row : r.log.rows) {
        CHECK(row.gamma == 0.0);
        CHECK(row.beta_mean_clean == 0.0);
        CHECK(row.beta_mean_noisy == 0.0);
    }
}

TEST_CASE("evaluate ensembles by mean softmax") {
    NoisyDataset test_ds = generate_blobs(3, 20, 4, 3.0, 31);
    TrainView test = make_train_view(test_ds);

    SUBCASE("identical networks give the single-net accuracy") {
        MlpNetwork net = make_mlp({4, 8, 3}, 7);
        EvalResult r = evaluate(net, net, test);
        CHECK(r.acc_net1 == r.acc_net2);
        CHECK(r.acc_ensemble == r.acc_net1);
    }
    SUBCASE("a confident correct net dominates an indifferent one") {
        TrainConfig cfg = tiny_config();
        cfg.e_warm = 10;
        cfg.e_max = 10;
        NetworkPair pair = make_network_pair(cfg, 4, 3);
        warmup(pair, test, cfg);
        REQUIRE(evaluate_single(pair.net1, test) > 0.95);
        MlpNetwork uniform = make_mlp({4, 8, 3}, 7);
        for (Matrix& w : uniform.weights) {
            std::fill(w.data.begin(), w.data.end(), 0.0);
        }
        for (auto& b : uniform.biases) std::fill(b.begin(), b.end(), 0.0);
        EvalResult r = evaluate(pair.net1, uniform, test);
        CHECK(r.acc_ensemble == doctest::Approx(r.acc_net1).epsilon(1e-12));
    }
    SUBCASE("ensemble matches a brute-force recomputation") {
        MlpNetwork n1 = make_mlp({4, 8, 3}, 41);
        MlpNetwork n2 = make_mlp({4, 8, 3}, 42);
        EvalResult r = evaluate(n1, n2, test);
        Matrix p1 = softmax_rows(forward(n1, test.features).logits());
        Matrix p2 = softmax_rows(forward(n2, test.features).logits());
        std::size_t hits = 0;
        for (std::size_t i = 0; i < test.size(); ++i) {
            int best = 0;
            double best_p = -1.0;
            for (int c = 0; c < 3; ++c) {
                const double p = 0.5 * (p1.at(i, c) + p2.at(i, c));
                if (p > best_p) {
                    best_p = p;
                    best = c;
                }
            }
            if (best == test.labels[i]) ++hits;
        }
        CHECK(r.acc_ensemble ==
              doctest::Approx(static_cast<double>(hits) / test.size()).epsilon(1e-15));
    }
}

TEST_CASE("ce_baseline mirrors one network across both columns") {
    TrainConfig cfg = tiny_config();
    cfg.variant = Variant::CeBaseline;
    NoisyDataset train = tiny_noisy();
    NoisyDataset test = generate_blobs(3, 10, 4, 3.0, 99);
    RunResult r = run_crosssplit(train, test, cfg);
    REQUIRE(r.log.rows.size() == static_cast<std::size_t>(cfg.e_max));
    for (const EpochMetrics& row : r.log.rows) {
        CHECK(row.test_acc_n1 == row.test_acc_n2);
        CHECK(row.test_acc_ens == row.test_acc_n1);
        CHECK(row.train_acc_clean_n1 == row.train_acc_clean_n2);
        CHECK(row.train_acc_noisy_n1 == row.train_acc_noisy_n2);
        CHECK(row.gamma == 0.0);
        CHECK(row.unsup_loss == 0.0);
        CHECK(row.con_loss == 0.0);
    }
    CHECK(params_equal(r.pair.net1, r.pair.net2));
}

TEST_CASE("run_ablation_suite runs every variant and isolates failures") {
    TrainConfig cfg = tiny_config();
    cfg.e_max = 4;
    cfg.e_warm = 2;
    NoisyDataset train = tiny_noisy();
    NoisyDataset test = generate_blobs(3, 5, 4, 3.0, 99);
    std::vector<Variant> variants{Variant::Full, Variant::CeBaseline};
    auto entries = run_ablation_suite(train, test, cfg, variants);
    REQUIRE(entries.size() == 2);
    CHECK(entries[0].variant == Variant::Full);
    CHECK(entries[1].variant == Variant::CeBaseline);
    for (const auto& e : entries) {
        REQUIRE(e.result.has_value());
        CHECK(e.error.empty());
        CHECK(e.result->log.rows.size() == 4);
    }
}

TEST_CASE("exploding inputs surface as DivergedError with the epoch") {
    NoisyDataset train = tiny_noisy();
    for (Example& ex : train.examples) {
        for (double& f : ex.features) f *= 1e160;
    }
    NoisyDataset test = generate_blobs(3, 5, 4, 3.0, 99);
    TrainConfig cfg = tiny_config();
    try {
        run_crosssplit(train, test, cfg);
        FAIL("expected DivergedError");
    } catch (const DivergedError& e) {
        CHECK(e.epoch == 1);
        CHECK(std::string(e.what()).find("epoch") != std::string::npos);
    }
}

TEST_CASE("invalid training configs are rejected") {
    NoisyDataset train = tiny_noisy();
    NoisyDataset test = generate_blobs(3, 5, 4, 3.0, 99);
    TrainConfig cfg = tiny_config();
    cfg.e_max = -1;
    CHECK_THROWS_AS(run_crosssplit(train, test, cfg), ConfigError);
    cfg = tiny_config();
    cfg.batch_size = 0;
    CHECK_THROWS_AS(run_crosssplit(train, test, cfg), ConfigError);
    cfg = tiny_config();
    cfg.base_lr = 0.0;
    CHECK_THROWS_AS(run_crosssplit(train, test, cfg), ConfigError);
    cfg = tiny_config();
    cfg.momentum = 1.0;
    CHECK_THROWS_AS(run_crosssplit(train, test, cfg), ConfigError);
    cfg = tiny_config();
    cfg.hidden = {};
    CHECK_THROWS_AS(run_crosssplit(train, test, cfg), ConfigError);
}
