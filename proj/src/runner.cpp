// SPDX-License-Identifier: Apache-2.0
#include "crosssplit/runner.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "crosssplit/errors.hpp"
#include "crosssplit/kernels.hpp"
#include "crosssplit/rng.hpp"

namespace fs = std::filesystem;

namespace crosssplit {

const char kVersionString[] = "crosssplit 1.0.0";

namespace {

constexpr std::uint64_t kTagTestSet = 0x74657374;  // "test"

std::string format_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw ContractError("double formatting failed");
    return std::string(buf, end);
}

std::string fixed4(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, 4);
    if (ec != std::errc()) throw ContractError("double formatting failed");
    return std::string(buf, end);
}

void make_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory '" + dir + "': " + ec.message());
}

std::ofstream open_for_write(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    return out;
}

void write_manifest(const FullConfig& cfg, const std::string& path) {
    std::ofstream out = open_for_write(path);
    out << "crosssplit-run-manifest,1\n";
    out << "version=" << kVersionString << '\n';
    out << "kernels=" << kernels().name << '\n';
    out << "variant=" << to_string(cfg.train.variant) << '\n';
    out << echo_config(cfg);
    if (!out) throw IoError("write failed for '" + path + "'");
}

void save_pair_checkpoints(const NetworkPair& pair, const std::string& dir,
                           const std::string& suffix) {
    save_checkpoint(pair.net1, pair.opt1, dir + "/checkpoint_net1_" + suffix + ".txt");
    save_checkpoint(pair.net2, pair.opt2, dir + "/checkpoint_net2_" + suffix + ".txt");
}

// Best and last-10-mean ensemble test accuracy for the ablation table.
std::pair<double, double> best_and_last10(const MetricsLog& log) {
    double best = 0.0, sum = 0.0;
    const std::size_t n = log.rows.size();
    const std::size_t tail = std::min<std::size_t>(10, n);
    for (std::size_t i = 0; i < n; ++i) {
        best = std::max(best, log.rows[i].test_acc_ens);
        if (i + tail >= n) sum += log.rows[i].test_acc_ens;
    }
    return {best, tail > 0 ? sum / static_cast<double>(tail) : 0.0};
}

std::string sanitize_cell(std::string s) {
    for (char& c : s) {
        if (c == ',' || c == '\n' || c == '\r' || c == '|') c = ';';
    }
    return s;
}

std::string run_name_for(const std::string& dir, std::set<std::string>& taken) {
    fs::path p = fs::path(dir).lexically_normal();
    std::string name = p.filename().string();
    if (name.empty() || name == ".") name = p.parent_path().filename().string();
    if (name.empty()) name = "run";
    std::string candidate = name;
    int suffix = 2;
    while (!taken.insert(candidate).second) {
        candidate = name + "_" + std::to_string(suffix++);
    }
    return candidate;
}

void write_curve_file(const std::string& path,
                      const std::vector<std::string>& names,
                      const std::vector<const MetricsLog*>& logs,
                      const std::vector<std::string>& parts,
                      double (*pick)(const EpochMetrics&, std::size_t part)) {
    std::ofstream out = open_for_write(path);
    out << "epoch";
    for (const std::string& name : names) {
        for (const std::string& part : parts) out << ',' << name << '_' << part;
    }
    out << '\n';

    std::set<int> epochs;
    std::vector<std::map<int, const EpochMetrics*>> by_epoch(logs.size());
    for (std::size_t r = 0; r < logs.size(); ++r) {
        for (const EpochMetrics& m : logs[r]->rows) {
            epochs.insert(m.epoch);
            by_epoch[r][m.epoch] = &m;
        }
    }
    for (int e : epochs) {
        out << e;
        for (std::size_t r = 0; r < logs.size(); ++r) {
            auto it = by_epoch[r].find(e);
            for (std::size_t part = 0; part < parts.size(); ++part) {
                out << ',';
                if (it != by_epoch[r].end()) out << format_double(pick(*it->second, part));
            }
        }
        out << '\n';
    }
    if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace

PreparedData prepare_datasets(const FullConfig& cfg) {
    const DataConfig& d = cfg.data;
    PreparedData out;

    NoisyDataset clean;
    if (!d.source_path.empty()) {
        clean = load_dataset(d.source_path);
        if (clean.num_classes != d.classes) {
            throw ConfigError("[data] classes=" + std::to_string(d.classes) +
                              " does not match loaded dataset (" +
                              std::to_string(clean.num_classes) + ")");
        }
        if (clean.dim != d.dim) {
            throw ConfigError("[data] dim=" + std::to_string(d.dim) +
                              " does not match loaded dataset (" +
                              std::to_string(clean.dim) + ")");
        }
    } else {
        clean = generate_blobs(d.classes, d.per_class, d.dim, d.separation, d.seed);
    }

    if (clean.noise.kind != NoiseSpec::Kind::None) {
        if (cfg.noise.kind != NoiseSpec::Kind::None) {
            throw ConfigError("loaded dataset already carries noise; set [noise] "
                              "kind=none to use it as-is");
        }
        out.train = std::move(clean);
    } else {
        switch (cfg.noise.kind) {
            case NoiseSpec::Kind::None:
                out.train = std::move(clean);
                break;
            case NoiseSpec::Kind::Symmetric:
                out.train = inject_symmetric_noise(clean, cfg.noise.ratio,
                                                   cfg.noise.seed);
                break;
            case NoiseSpec::Kind::Asymmetric: {
                const std::vector<int> flip_map =
                    circular_flip_map(clean.num_classes, cfg.noise.groups);
                out.train = inject_asymmetric_noise(clean, cfg.noise.ratio,
                                                    flip_map, cfg.noise.seed);
                break;
            }
        }
    }

    out.test = generate_blobs(out.train.num_classes, d.test_per_class,
                              out.train.dim, d.separation,
                              mix_seed({d.seed, kTagTestSet}));
    return out;
}

RunSummary run_to_directory(const FullConfig& cfg, const std::string& out_dir) {
    make_dir(out_dir);
    write_manifest(cfg, out_dir + "/manifest.txt");

    PreparedData data = prepare_datasets(cfg);

    const int interval = cfg.train.checkpoint_interval;
    EpochHook hook;
    if (interval > 0) {
        hook = [&out_dir, interval](int epoch, const NetworkPair& pair) {
            if (epoch % interval == 0) {
                save_pair_checkpoints(pair, out_dir,
                                      "epoch" + std::to_string(epoch));
            }
        };
    }

    RunResult rr = run_crosssplit(data.train, data.test, cfg.train, hook);
    export_csv(rr.log, out_dir + "/metrics.csv");
    save_pair_checkpoints(rr.pair, out_dir, "final");

    RunSummary summary;
    summary.log = std::move(rr.log);
    summary.wall_seconds = rr.wall_seconds;
    return summary;
}

AblateSummary ablate_to_directory(const FullConfig& cfg, const std::string& out_dir) {
    make_dir(out_dir);
    write_manifest(cfg, out_dir + "/manifest.txt");

    PreparedData data = prepare_datasets(cfg);
    AblateSummary summary;
    summary.entries =
        run_ablation_suite(data.train, data.test, cfg.train, cfg.ablation.variants);

    std::ofstream md = open_for_write(out_dir + "/ablation.md");
    std::ofstream csv = open_for_write(out_dir + "/ablation.csv");
    md << "| variant | best | last10 | status |\n";
    md << "|---|---|---|---|\n";
    csv << "variant,best,last10,status\n";

    for (const AblationEntry& entry : summary.entries) {
        const std::string name = to_string(entry.variant);
        if (entry.result) {
            ++summary.succeeded;
            const std::string dir = out_dir + "/" + name;
            make_dir(dir);
            FullConfig sub = cfg;
            sub.train.variant = entry.variant;
            write_manifest(sub, dir + "/manifest.txt");
            export_csv(entry.result->log, dir + "/metrics.csv");
            save_pair_checkpoints(entry.result->pair, dir, "final");

            const auto [best, last10] = best_and_last10(entry.result->log);
            md << "| " << name << " | " << fixed4(best) << " | " << fixed4(last10)
               << " | ok |\n";
            csv << name << ',' << format_double(best) << ','
                << format_double(last10) << ",ok\n";
        } else {
            ++summary.failed;
            md << "| " << name << " | - | - | FAILED: " << sanitize_cell(entry.error)
               << " |\n";
            csv << name << ",,,FAILED: " << sanitize_cell(entry.error) << '\n';
        }
    }
    if (!md || !csv) throw IoError("write failed for ablation tables");
    return summary;
}

void report_runs(const std::vector<std::string>& run_dirs,
                 const std::string& out_dir) {
    if (run_dirs.empty()) throw ConfigError("report needs at least one run directory");
    make_dir(out_dir);

    std::set<std::string> taken;
    std::vector<std::string> names;
    std::vector<MetricsLog> logs;
    for (const std::string& dir : run_dirs) {
        const std::string csv = dir + "/metrics.csv";
        if (!fs::exists(csv)) throw IoError("missing metrics.csv in '" + dir + "'");
        logs.push_back(import_csv(csv));
        names.push_back(run_name_for(dir, taken));
    }

    std::vector<const MetricsLog*> ptrs;
    ptrs.reserve(logs.size());
    for (const MetricsLog& l : logs) ptrs.push_back(&l);

    const std::vector<std::string> net_parts{"n1", "n2"};
    const std::vector<std::string> test_parts{"n1", "n2", "ens"};
    write_curve_file(out_dir + "/report_clean_acc.csv", names, ptrs, net_parts,
                     [](const EpochMetrics& m, std::size_t p) {
                         return p == 0 ? m.train_acc_clean_n1 : m.train_acc_clean_n2;
                     });
    write_curve_file(out_dir + "/report_noisy_acc.csv", names, ptrs, net_parts,
                     [](const EpochMetrics& m, std::size_t p) {
                         return p == 0 ? m.train_acc_noisy_n1 : m.train_acc_noisy_n2;
                     });
    write_curve_file(out_dir + "/report_test_acc.csv", names, ptrs, test_parts,
                     [](const EpochMetrics& m, std::size_t p) {
                         return p == 0   ? m.test_acc_n1
                                : p == 1 ? m.test_acc_n2
                                         : m.test_acc_ens;
                     });
}

}  // namespace crosssplit
