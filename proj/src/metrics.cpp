// SPDX-License-Identifier: Apache-2.0
#include "crosssplit/metrics.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "crosssplit/errors.hpp"
#include "crosssplit/matrix.hpp"

namespace crosssplit {

const char kMetricsCsvHeader[] =
    "epoch,gamma,lr,train_acc_clean_n1,train_acc_noisy_n1,train_acc_clean_n2,"
    "train_acc_noisy_n2,test_acc_n1,test_acc_n2,test_acc_ens,beta_mean_clean,"
    "beta_mean_noisy,sup_loss,unsup_loss,con_loss,mask_fraction";

void MetricsLog::append(const EpochMetrics& m) {
    if (!rows.empty() && m.epoch <= rows.back().epoch) {
        throw ContractError("metrics epoch " + std::to_string(m.epoch) +
                            " not greater than previous " +
                            std::to_string(rows.back().epoch));
    }
    rows.push_back(m);
}

bool operator==(const EpochMetrics& a, const EpochMetrics& b) {
    return a.epoch == b.epoch && a.gamma == b.gamma && a.lr == b.lr &&
           a.train_acc_clean_n1 == b.train_acc_clean_n1 &&
           a.train_acc_noisy_n1 == b.train_acc_noisy_n1 &&
           a.train_acc_clean_n2 == b.train_acc_clean_n2 &&
           a.train_acc_noisy_n2 == b.train_acc_noisy_n2 &&
           a.test_acc_n1 == b.test_acc_n1 && a.test_acc_n2 == b.test_acc_n2 &&
           a.test_acc_ens == b.test_acc_ens &&
           a.beta_mean_clean == b.beta_mean_clean &&
           a.beta_mean_noisy == b.beta_mean_noisy && a.sup_loss == b.sup_loss &&
           a.unsup_loss == b.unsup_loss && a.con_loss == b.con_loss &&
           a.mask_fraction == b.mask_fraction;
}

namespace {

Matrix dataset_features(const NoisyDataset& ds) {
    const std::size_t n = ds.examples.size();
    Matrix x(n, static_cast<std::size_t>(ds.dim));
    for (std::size_t i = 0; i < n; ++i) {
        const auto& f = ds.examples[i].features;
        std::copy(f.begin(), f.end(), x.row(i));
    }
    return x;
}

std::vector<int> predict_classes(const MlpNetwork& net, const Matrix& x) {
    ForwardCache cache = forward(net, x);
    const Matrix& logits = cache.logits();
    std::vector<int> pred(logits.rows);
    for (std::size_t i = 0; i < logits.rows; ++i) {
        const double* row = logits.row(i);
        std::size_t best = 0;
        for (std::size_t c = 1; c < logits.cols; ++c) {
            if (row[c] > row[best]) best = c;
        }
        pred[i] = static_cast<int>(best);
    }
    return pred;
}

std::string format_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw ContractError("double formatting failed");
    return std::string(buf, end);
}

double parse_double_field(const std::string& field, const std::string& ctx) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc() || p != field.data() + field.size()) {
        throw ParseError("bad numeric field '" + field + "' in " + ctx);
    }
    return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

std::ofstream open_for_write(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    return out;
}

}  // namespace

MemorizationCounts memorization_counts(const MlpNetwork& net, const NoisyDataset& ds) {
    if (ds.examples.empty()) throw ContractError("memorization on empty dataset");
    Matrix x = dataset_features(ds);
    std::vector<int> pred = predict_classes(net, x);
    MemorizationCounts c;
    for (std::size_t i = 0; i < ds.examples.size(); ++i) {
        const Example& ex = ds.examples[i];
        const bool hit = pred[i] == ex.assigned_label;
        if (ds.is_noisy(i)) {
            ++c.noisy_total;
            c.noisy_hits += hit ? 1 : 0;
        } else {
            ++c.clean_total;
            c.clean_hits += hit ? 1 : 0;
        }
    }
    return c;
}

std::pair<double, double> memorization_metrics(const MlpNetwork& net,
                                               const NoisyDataset& ds) {
    MemorizationCounts c = memorization_counts(net, ds);
    const double clean =
        c.clean_total > 0 ? static_cast<double>(c.clean_hits) / c.clean_total : 0.0;
    const double noisy =
        c.noisy_total > 0 ? static_cast<double>(c.noisy_hits) / c.noisy_total : 0.0;
    return {clean, noisy};
}

std::pair<double, double> beta_means(const std::vector<double>& betas,
                                     const std::vector<std::int64_t>& ids,
                                     const NoisyDataset& ds) {
    if (betas.size() != ids.size()) throw ContractError("betas/ids size mismatch");
    std::unordered_map<std::int64_t, std::size_t> pos;
    pos.reserve(ds.examples.size());
    for (std::size_t i = 0; i < ds.examples.size(); ++i) pos[ds.examples[i].id] = i;
    double sum_clean = 0.0, sum_noisy = 0.0;
    std::int64_t n_clean = 0, n_noisy = 0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        auto it = pos.find(ids[i]);
        if (it == pos.end()) {
            throw ContractError("beta id " + std::to_string(ids[i]) +
                                " not in dataset");
        }
        if (ds.is_noisy(it->second)) {
            sum_noisy += betas[i];
            ++n_noisy;
        } else {
            sum_clean += betas[i];
            ++n_clean;
        }
    }
    return {n_clean > 0 ? sum_clean / n_clean : 0.0,
            n_noisy > 0 ? sum_noisy / n_noisy : 0.0};
}

void export_csv(const MetricsLog& log, const std::string& path) {
    std::ofstream out = open_for_write(path);
    out << kMetricsCsvHeader << '\n';
    for (const EpochMetrics& m : log.rows) {
        out << m.epoch << ',' << format_double(m.gamma) << ','
            << format_double(m.lr) << ',' << format_double(m.train_acc_clean_n1)
            << ',' << format_double(m.train_acc_noisy_n1) << ','
            << format_double(m.train_acc_clean_n2) << ','
            << format_double(m.train_acc_noisy_n2) << ','
            << format_double(m.test_acc_n1) << ',' << format_double(m.test_acc_n2)
            << ',' << format_double(m.test_acc_ens) << ','
            << format_double(m.beta_mean_clean) << ','
            << format_double(m.beta_mean_noisy) << ','
            << format_double(m.sup_loss) << ',' << format_double(m.unsup_loss)
            << ',' << format_double(m.con_loss) << ','
            << format_double(m.mask_fraction) << '\n';
    }
    if (!out) throw IoError("write failed for '" + path + "'");
}

MetricsLog import_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty metrics file '" + path + "'");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kMetricsCsvHeader) {
        throw ParseError("bad metrics header in '" + path + "'");
    }
    MetricsLog log;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const std::string ctx = path + ":" + std::to_string(lineno);
        std::vector<std::string> f = split_csv_line(line);
        if (f.size() != 16) {
            throw ParseError("expected 16 fields, got " + std::to_string(f.size()) +
                             " in " + ctx);
        }
        EpochMetrics m;
        m.epoch = static_cast<int>(parse_double_field(f[0], ctx));
        m.gamma = parse_double_field(f[1], ctx);
        m.lr = parse_double_field(f[2], ctx);
        m.train_acc_clean_n1 = parse_double_field(f[3], ctx);
        m.train_acc_noisy_n1 = parse_double_field(f[4], ctx);
        m.train_acc_clean_n2 = parse_double_field(f[5], ctx);
        m.train_acc_noisy_n2 = parse_double_field(f[6], ctx);
        m.test_acc_n1 = parse_double_field(f[7], ctx);
        m.test_acc_n2 = parse_double_field(f[8], ctx);
        m.test_acc_ens = parse_double_field(f[9], ctx);
        m.beta_mean_clean = parse_double_field(f[10], ctx);
        m.beta_mean_noisy = parse_double_field(f[11], ctx);
        m.sup_loss = parse_double_field(f[12], ctx);
        m.unsup_loss = parse_double_field(f[13], ctx);
        m.con_loss = parse_double_field(f[14], ctx);
        m.mask_fraction = parse_double_field(f[15], ctx);
        log.append(m);
    }
    return log;
}

void export_plotdata(const MetricsLog& log, const std::string& prefix) {
    {
        std::ofstream out = open_for_write(prefix + "_clean_acc.csv");
        out << "epoch,n1,n2\n";
        for (const EpochMetrics& m : log.rows) {
            out << m.epoch << ',' << format_double(m.train_acc_clean_n1) << ','
                << format_double(m.train_acc_clean_n2) << '\n';
        }
    }
    {
        std::ofstream out = open_for_write(prefix + "_noisy_acc.csv");
        out << "epoch,n1,n2\n";
        for (const EpochMetrics& m : log.rows) {
            out << m.epoch << ',' << format_double(m.train_acc_noisy_n1) << ','
                << format_double(m.train_acc_noisy_n2) << '\n';
        }
    }
    {
        std::ofstream out = open_for_write(prefix + "_test_acc.csv");
        out << "epoch,n1,n2,ens\n";
        for (const EpochMetrics& m : log.rows) {
            out << m.epoch << ',' << format_double(m.test_acc_n1) << ','
                << format_double(m.test_acc_n2) << ','
                << format_double(m.test_acc_ens) << '\n';
        }
    }
}

void export_embeddings(const MlpNetwork& net, const NoisyDataset& ds,
                       const std::string& path) {
    Matrix x = dataset_features(ds);
    ForwardCache cache = forward(net, x);
    const Matrix& emb = cache.embeddings();
    std::ofstream out = open_for_write(path);
    out << "id,true_label,assigned_label";
    for (std::size_t j = 0; j < emb.cols; ++j) out << ",e" << j;
    out << '\n';
    for (std::size_t i = 0; i < ds.examples.size(); ++i) {
        const Example& ex = ds.examples[i];
        out << ex.id << ',' << ex.true_label << ',' << ex.assigned_label;
        const double* row = emb.row(i);
        for (std::size_t j = 0; j < emb.cols; ++j) out << ',' << format_double(row[j]);
        out << '\n';
    }
    if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace crosssplit
