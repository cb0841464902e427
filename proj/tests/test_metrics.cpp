// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "crosssplit/errors.hpp"
#include "crosssplit/metrics.hpp"
#include "crosssplit/rng.hpp"
#include "doctest.h"
#include "testutil.hpp"

using namespace crosssplit;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

std::string slurp(const std::string& path) {
    std::ifstream f(path);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

EpochMetrics sample_row(int epoch) {
    EpochMetrics m;
    m.epoch = epoch;
    m.gamma = 0.6;
    m.lr = 0.1 + 0.2;  // deliberately not exactly representable as 0.3
    m.train_acc_clean_n1 = 0.91;
    m.train_acc_noisy_n1 = 0.12;
    m.train_acc_clean_n2 = 0.93;
    m.train_acc_noisy_n2 = 0.08;
    m.test_acc_n1 = 0.88;
    m.test_acc_n2 = 0.87;
    m.test_acc_ens = 0.9 + epoch * 1e-9;
    m.beta_mean_clean = 1.0 / 3.0;
    m.beta_mean_noisy = 2.0 / 3.0;
    m.sup_loss = 0.4567;
    m.unsup_loss = 0.0123;
    m.con_loss = 3.14159;
    m.mask_fraction = 0.75;
    return m;
}

// Single-layer identity net of width c: logits == features.
MlpNetwork identity_net(int c) {
    MlpNetwork net = make_mlp({c, c}, 1);
    for (int i = 0; i < c; ++i) {
        for (int j = 0; j < c; ++j) net.weights[0].at(i, j) = (i == j) ? 1.0 : 0.0;
        net.biases[0][i] = 0.0;
    }
    return net;
}

// Features = 10 * onehot(label_source). With the identity net the prediction
// is exactly label_source.
NoisyDataset dataset_predicting(bool assigned) {
    NoisyDataset clean = generate_blobs(3, 10, 3, 2.0, 5);
    NoisyDataset ds = inject_symmetric_noise(clean, 0.4, 6);
    for (Example& ex : ds.examples) {
        const int target = assigned ? ex.assigned_label : ex.true_label;
        for (int j = 0; j < 3; ++j) ex.features[j] = (j == target) ? 10.0 : 0.0;
    }
    return ds;
}

}  // namespace

TEST_CASE("metrics log enforces strictly increasing epochs") {
    MetricsLog log;
    log.append(sample_row(1));
    log.append(sample_row(2));
    CHECK_THROWS_AS(log.append(sample_row(2)), ContractError);
    CHECK_THROWS_AS(log.append(sample_row(1)), ContractError);
    CHECK(log.rows.size() == 2);
}

TEST_CASE("csv round trip is exact for awkward doubles") {
    MetricsLog log;
    for (int e = 1; e <= 5; ++e) log.append(sample_row(e));
    const std::string path = temp_path("crosssplit_metrics_rt.csv");
    export_csv(log, path);
    MetricsLog back = import_csv(path);
    REQUIRE(back.rows.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(back.rows[i] == log.rows[i]);   // full-field equality, bit exact
    }
    // first line is the pinned header
    std::ifstream f(path);
    std::string first;
    std::getline(f, first);
    CHECK(first == kMetricsCsvHeader);
    std::remove(path.c_str());
}

TEST_CASE("empty log exports a header-only file") {
    const std::string path = temp_path("crosssplit_metrics_empty.csv");
    export_csv(MetricsLog{}, path);
    const std::string text = slurp(path);
    CHECK(text == std::string(kMetricsCsvHeader) + "\n");
    CHECK(import_csv(path).rows.empty());
    std::remove(path.c_str());
}

TEST_CASE("import rejects malformed csv") {
    const std::string path = temp_path("crosssplit_metrics_bad.csv");
    auto write_file = [&](const std::string& text) {
        std::ofstream f(path);
        f << text;
    };
    CHECK_THROWS_AS(import_csv(temp_path("crosssplit_metrics_missing.csv")), IoError);

    write_file("epoch,nope\n");
    CHECK_THROWS_AS(import_csv(path), ParseError);

    write_file(std::string(kMetricsCsvHeader) + "\n1,0.5\n");
    CHECK_THROWS_AS(import_csv(path), ParseError);

    write_file(std::string(kMetricsCsvHeader) +
               "\n1,0,0,0,0,0,0,0,0,0,0,0,0,0,0,zap\n");
    CHECK_THROWS_AS(import_csv(path), ParseError);
    std::remove(path.c_str());
}

TEST_CASE("memorization splits accuracy by the noise flag") {
    MlpNetwork net = identity_net(3);

    SUBCASE("predicting the assigned label memorizes everything") {
        NoisyDataset ds = dataset_predicting(true);
        MemorizationCounts mc = memorization_counts(net, ds);
        CHECK(mc.clean_total + mc.noisy_total == 30);
        CHECK(mc.noisy_total == 12);  // 0.4 * 30
        CHECK(mc.clean_hits == mc.clean_total);
        CHECK(mc.noisy_hits == mc.noisy_total);
        auto [acc_clean, acc_noisy] = memorization_metrics(net, ds);
        CHECK(acc_clean == 1.0);
        CHECK(acc_noisy == 1.0);
    }
    SUBCASE("predicting the true label scores zero on the noisy subset") {
        NoisyDataset ds = dataset_predicting(false);
        auto [acc_clean, acc_noisy] = memorization_metrics(net, ds);
        CHECK(acc_clean == 1.0);   // clean: assigned == true
        CHECK(acc_noisy == 0.0);   // noisy: assigned != true, prediction == true
    }
}

TEST_CASE("memorization counts match a brute-force recount") {
    NoisyDataset clean = generate_blobs(5, 40, 6, 2.0, 8);
    NoisyDataset ds = inject_symmetric_noise(clean, 0.3, 9);
    MlpNetwork net = make_mlp({6, 12, 5}, 33);
    MemorizationCounts mc = memorization_counts(net, ds);

    TrainView view = make_train_view(ds);
    Matrix probs = softmax_rows(forward(net, view.features).logits());
    std::int64_t clean_hits = 0, noisy_hits = 0, clean_total = 0, noisy_total = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        int best = 0;
        for (int c = 1; c < 5; ++c) {
            if (probs.at(i, c) > probs.at(i, best)) best = c;
        }
        const bool hit = best == ds.examples[i].assigned_label;
        if (ds.is_noisy(i)) {
            ++noisy_total;
            noisy_hits += hit;
        } else {
            ++clean_total;
            clean_hits += hit;
        }
    }
    CHECK(mc.clean_total == clean_total);
    CHECK(mc.noisy_total == noisy_total);
    CHECK(mc.clean_hits == clean_hits);
    CHECK(mc.noisy_hits == noisy_hits);
    CHECK(mc.clean_total + mc.noisy_total == static_cast<std::int64_t>(ds.size()));

    auto [acc_clean, acc_noisy] = memorization_metrics(net, ds);
    CHECK(acc_clean == doctest::Approx(double(clean_hits) / clean_total).epsilon(1e-15));
    CHECK(acc_noisy == doctest::Approx(double(noisy_hits) / noisy_total).epsilon(1e-15));

    CHECK_THROWS_AS(memorization_counts(net, NoisyDataset{}), ContractError);
}

TEST_CASE("beta_means averages by noise status of the listed ids") {
    NoisyDataset clean = generate_blobs(2, 2, 3, 2.0, 5);   // 4 examples
    NoisyDataset ds = inject_symmetric_noise(clean, 0.25, 6);  // exactly 1 noisy
    std::size_t noisy_idx = 99;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (ds.is_noisy(i)) noisy_idx = i;
    }
    REQUIRE(noisy_idx != 99);

    std::vector<std::int64_t> ids;
    std::vector<double> betas;
    double expect_noisy = 0.0, expect_clean = 0.0;
    int n_clean = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        ids.push_back(ds.examples[i].id);
        const double b = 0.1 * static_cast<double>(i + 1);
        betas.push_back(b);
        if (i == noisy_idx) {
            expect_noisy = b;
        } else {
            expect_clean += b;
            ++n_clean;
        }
    }
    auto [mean_clean, mean_noisy] = beta_means(betas, ids, ds);
    CHECK(mean_clean == doctest::Approx(expect_clean / n_clean).epsilon(1e-15));
    CHECK(mean_noisy == doctest::Approx(expect_noisy).epsilon(1e-15));

    CHECK_THROWS_AS(beta_means({0.5}, {12345}, ds), ContractError);  // unknown id
    CHECK_THROWS_AS(beta_means({0.5, 0.5}, {0}, ds), ContractError); // length mismatch
}

TEST_CASE("beta_means with an empty subset scores zero") {
    NoisyDataset clean = generate_blobs(2, 2, 3, 2.0, 5);  // no noise at all
    std::vector<std::int64_t> ids{0, 1};
    std::vector<double> betas{0.4, 0.6};
    auto [mean_clean, mean_noisy] = beta_means(betas, ids, clean);
    CHECK(mean_clean == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(mean_noisy == 0.0);
}

TEST_CASE("plotdata splits the log into three csv files") {
    MetricsLog log;
    for (int e = 1; e <= 3; ++e) log.append(sample_row(e));
    const std::string prefix = temp_path("crosssplit_plot");
    export_plotdata(log, prefix);

    const std::string clean_text = slurp(prefix + "_clean_acc.csv");
    CHECK(clean_text.substr(0, clean_text.find('\n')) == "epoch,n1,n2");
    CHECK(std::count(clean_text.begin(), clean_text.end(), '\n') == 4);

    const std::string noisy_text = slurp(prefix + "_noisy_acc.csv");
    CHECK(noisy_text.substr(0, noisy_text.find('\n')) == "epoch,n1,n2");

    const std::string test_text = slurp(prefix + "_test_acc.csv");
    CHECK(test_text.substr(0, test_text.find('\n')) == "epoch,n1,n2,ens");
    CHECK(std::count(test_text.begin(), test_text.end(), '\n') == 4);

    for (const char* suffix : {"_clean_acc.csv", "_noisy_acc.csv", "_test_acc.csv"}) {
        std::remove((prefix + suffix).c_str());
    }
}

TEST_CASE("embedding export carries one row per example") {
    NoisyDataset clean = generate_blobs(3, 4, 5, 2.0, 7);
    NoisyDataset ds = inject_symmetric_noise(clean, 0.25, 8);
    MlpNetwork net = make_mlp({5, 7, 3}, 44);  // penultimate width 7
    const std::string path = temp_path("crosssplit_emb.csv");
    export_embeddings(net, ds, path);

    std::ifstream f(path);
    std::string header;
    std::getline(f, header);
    CHECK(header.rfind("id,true_label,assigned_label,e0", 0) == 0);
    CHECK(header.find("e6") != std::string::npos);
    CHECK(header.find("e7") == std::string::npos);
    int rows = 0;
    std::string line;
    while (std::getline(f, line)) {
        if (!line.empty()) ++rows;
    }
    CHECK(rows == 12);
    f.close();

    // deterministic re-export
    const std::string path2 = temp_path("crosssplit_emb2.csv");
    export_embeddings(net, ds, path2);
    CHECK(slurp(path) == slurp(path2));
    std::remove(path.c_str());
    std::remove(path2.c_str());
}
