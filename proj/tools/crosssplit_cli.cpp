// SPDX-License-Identifier: Apache-2.0
// crosssplit command-line front end: gen-data, inject-noise, run, ablate, report.
#include <charconv>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "crosssplit/config.hpp"
#include "crosssplit/dataset.hpp"
#include "crosssplit/errors.hpp"
#include "crosssplit/kernels.hpp"
#include "crosssplit/runner.hpp"

namespace {

using namespace crosssplit;

std::vector<std::vector<int>> parse_groups(const std::string& text) {
    std::vector<std::vector<int>> groups;
    if (text.empty()) return groups;
    std::vector<int> cur;
    std::string item;
    auto flush_item = [&](bool end_group) {
        if (!item.empty()) {
            int v = 0;
            auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
            if (ec != std::errc() || p != item.data() + item.size()) {
                throw ConfigError("--groups: bad class index '" + item + "'");
            }
            cur.push_back(v);
            item.clear();
        }
        if (end_group) {
            if (cur.empty()) throw ConfigError("--groups: empty group");
            groups.push_back(cur);
            cur.clear();
        }
    };
    for (char ch : text) {
        if (ch == ',') flush_item(false);
        else if (ch == ';') flush_item(true);
        else if (ch != ' ') item.push_back(ch);
    }
    flush_item(true);
    return groups;
}

int cmd_gen_data(int classes, int per_class, int dim, double separation,
                 std::uint64_t seed, const std::string& out) {
    NoisyDataset ds = generate_blobs(classes, per_class, dim, separation, seed);
    save_dataset(ds, out);
    std::printf("wrote %zu examples (%d classes, dim %d) to %s\n", ds.size(),
                ds.num_classes, ds.dim, out.c_str());
    return 0;
}

int cmd_inject_noise(const std::string& in, const std::string& out,
                     const std::string& kind, double ratio, std::uint64_t seed,
                     const std::string& groups_text) {
    NoisyDataset ds = load_dataset(in);
    NoisyDataset noisy;
    if (kind == "symmetric") {
        if (!groups_text.empty()) {
            throw ConfigError("--groups only applies to asymmetric noise");
        }
        noisy = inject_symmetric_noise(ds, ratio, seed);
    } else if (kind == "asymmetric") {
        const auto flip_map = circular_flip_map(ds.num_classes, parse_groups(groups_text));
        noisy = inject_asymmetric_noise(ds, ratio, flip_map, seed);
    } else {
        throw ConfigError("--kind must be symmetric or asymmetric, got '" + kind + "'");
    }
    save_dataset(noisy, out);
    std::printf("flipped %lld of %zu labels (%s, ratio %.4f) -> %s\n",
                static_cast<long long>(noisy.noise.realized_flips), noisy.size(),
                kind.c_str(), ratio, out.c_str());
    return 0;
}

FullConfig load_with_overrides(const std::string& config_path,
                               const std::string& seed_text,
                               const std::string& variant_text) {
    FullConfig cfg = parse_config_file(config_path);
    if (!seed_text.empty()) {
        std::uint64_t s = 0;
        auto [p, ec] =
            std::from_chars(seed_text.data(), seed_text.data() + seed_text.size(), s);
        if (ec != std::errc() || p != seed_text.data() + seed_text.size()) {
            throw ConfigError("--seed: expected an unsigned integer, got '" +
                              seed_text + "'");
        }
        cfg.train.seed = s;
    }
    if (!variant_text.empty()) cfg.train.variant = variant_from_string(variant_text);
    return cfg;
}

int cmd_run(const std::string& config_path, const std::string& out_dir,
            const std::string& seed_text, const std::string& variant_text,
            const std::string& kernels_name) {
    if (!kernels_name.empty()) select_kernels(kernels_name);
    const FullConfig cfg = load_with_overrides(config_path, seed_text, variant_text);
    const RunSummary summary = run_to_directory(cfg, out_dir);
    const EpochMetrics& last = summary.log.rows.back();
    std::printf(
        "final epoch=%d variant=%s test_acc_ens=%.4f test_acc_n1=%.4f "
        "test_acc_n2=%.4f wall=%.1fs\n",
        last.epoch, to_string(cfg.train.variant).c_str(), last.test_acc_ens,
        last.test_acc_n1, last.test_acc_n2, summary.wall_seconds);
    std::printf("run artifacts in %s\n", out_dir.c_str());
    return 0;
}

int cmd_ablate(const std::string& config_path, const std::string& out_dir,
               const std::string& seed_text, const std::string& kernels_name) {
    if (!kernels_name.empty()) select_kernels(kernels_name);
    const FullConfig cfg = load_with_overrides(config_path, seed_text, "");
    const AblateSummary summary = ablate_to_directory(cfg, out_dir);
    for (const AblationEntry& e : summary.entries) {
        if (e.result) {
            const EpochMetrics& last = e.result->log.rows.back();
            std::printf("%-15s final test_acc_ens=%.4f\n",
                        to_string(e.variant).c_str(), last.test_acc_ens);
        } else {
            std::printf("%-15s FAILED: %s\n", to_string(e.variant).c_str(),
                        e.error.c_str());
        }
    }
    std::printf("tables in %s/ablation.md and %s/ablation.csv\n", out_dir.c_str(),
                out_dir.c_str());
    if (summary.succeeded == 0) {
        std::fprintf(stderr, "all %d variants failed\n", summary.failed);
        return 3;
    }
    return 0;
}

int cmd_report(const std::vector<std::string>& run_dirs, const std::string& out_dir) {
    report_runs(run_dirs, out_dir);
    std::printf("report curves in %s (report_clean_acc.csv, report_noisy_acc.csv, "
                "report_test_acc.csv)\n",
                out_dir.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CrossSplit noisy-label training lab"};
    app.require_subcommand(1);

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "Generate a Gaussian-blob dataset");
    int classes = 10, per_class = 500, dim = 16;
    double separation = 3.0;
    std::uint64_t gen_seed = 1;
    std::string gen_out;
    gen->add_option("--classes", classes)->required();
    gen->add_option("--per-class", per_class)->required();
    gen->add_option("--dim", dim)->required();
    gen->add_option("--separation", separation, "Class mean separation")
        ->capture_default_str();
    gen->add_option("--seed", gen_seed)->required();
    gen->add_option("--out", gen_out, "Output dataset file")->required();

    // inject-noise
    auto* inj = app.add_subcommand("inject-noise", "Corrupt labels of a dataset file");
    std::string inj_in, inj_out, inj_kind, inj_groups;
    double inj_ratio = 0.0;
    std::uint64_t inj_seed = 0;
    inj->add_option("--in", inj_in)->required();
    inj->add_option("--out", inj_out)->required();
    inj->add_option("--kind", inj_kind, "symmetric or asymmetric")->required();
    inj->add_option("--ratio", inj_ratio)->required();
    inj->add_option("--seed", inj_seed)->required();
    inj->add_option("--groups", inj_groups,
                    "Asymmetric cycles, e.g. '0,1,2;3,4' (default: all classes)");

    // run
    auto* run = app.add_subcommand("run", "Train per a config file");
    std::string run_config, run_out_dir, run_seed, run_variant, run_kernels;
    run->add_option("--config", run_config)->required();
    run->add_option("--out-dir", run_out_dir)->required();
    run->add_option("--seed", run_seed, "Override [train] seed");
    run->add_option("--variant", run_variant, "Override [ablation] variant");
    run->add_option("--kernels", run_kernels, "scalar, avx2, or auto");

    // ablate
    auto* abl = app.add_subcommand("ablate", "Run the ablation suite");
    std::string abl_config, abl_out_dir, abl_seed, abl_kernels;
    abl->add_option("--config", abl_config)->required();
    abl->add_option("--out-dir", abl_out_dir)->required();
    abl->add_option("--seed", abl_seed, "Override [train] seed");
    abl->add_option("--kernels", abl_kernels, "scalar, avx2, or auto");

    // report
    auto* rep = app.add_subcommand("report", "Merge run metrics into plot data");
    std::vector<std::string> rep_dirs;
    std::string rep_out_dir;
    rep->add_option("dirs", rep_dirs, "Run directories")->required()->expected(-1);
    rep->add_option("--out-dir", rep_out_dir)->required();

    try {
        app.parse(argc, argv);
        if (gen->parsed()) {
            return cmd_gen_data(classes, per_class, dim, separation, gen_seed, gen_out);
        }
        if (inj->parsed()) {
            return cmd_inject_noise(inj_in, inj_out, inj_kind, inj_ratio, inj_seed,
                                    inj_groups);
        }
        if (run->parsed()) {
            return cmd_run(run_config, run_out_dir, run_seed, run_variant, run_kernels);
        }
        if (abl->parsed()) {
            return cmd_ablate(abl_config, abl_out_dir, abl_seed, abl_kernels);
        }
        if (rep->parsed()) return cmd_report(rep_dirs, rep_out_dir);
        std::cerr << app.help();
        return 2;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const crosssplit::DivergedError& e) {
        std::cerr << "error: training diverged: " << e.what() << '\n';
        return 3;
    } catch (const crosssplit::IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    } catch (const crosssplit::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 1;
    }
}
