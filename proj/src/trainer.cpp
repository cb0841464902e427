// SPDX-License-Identifier: Apache-2.0
#include "crosssplit/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "crosssplit/errors.hpp"
#include "crosssplit/rng.hpp"

namespace crosssplit {

namespace {

constexpr std::uint64_t kTagNet = 0x6e6574;        // "net"
constexpr std::uint64_t kTagShuffle = 0x73687566;  // "shuf"
constexpr std::uint64_t kTagUnlabeled = 0x756e6c62;// "unlb"
constexpr std::uint64_t kTagAug = 0x617567;        // "aug"

void validate_train_config(const TrainConfig& cfg) {
    if (cfg.e_warm < 0) throw ConfigError("e_warm must be >= 0");
    if (cfg.e_max < cfg.e_warm) throw ConfigError("e_max must be >= e_warm");
    if (cfg.batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(cfg.base_lr > 0.0)) throw ConfigError("lr must be > 0");
    if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0)) {
        throw ConfigError("momentum must be in [0,1)");
    }
    if (cfg.weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
    if (cfg.gamma_delta < 1) throw ConfigError("gamma_delta must be >= 1");
    if (cfg.hidden.empty()) throw ConfigError("at least one hidden layer required");
    for (int h : cfg.hidden) {
        if (h < 1) throw ConfigError("hidden layer width must be >= 1");
    }
    const SslConfig& s = cfg.ssl;
    if (!(s.tau >= 0.0 && s.tau <= 1.0)) throw ConfigError("tau must be in [0,1]");
    if (s.lambda_u < 0.0) throw ConfigError("lambda_u must be >= 0");
    if (s.lambda_c < 0.0) throw ConfigError("lambda_c must be >= 0");
    if (!(s.mixup_alpha > 0.0)) throw ConfigError("mixup_alpha must be > 0");
    if (!(s.temperature > 0.0)) throw ConfigError("temperature must be > 0");
    if (s.weak_noise_sigma < 0.0) throw ConfigError("weak_noise_sigma must be >= 0");
    if (s.strong_noise_sigma < 0.0) throw ConfigError("strong_noise_sigma must be >= 0");
    if (!(s.strong_dropout_p >= 0.0 && s.strong_dropout_p <= 1.0)) {
        throw ConfigError("strong_dropout_p must be in [0,1]");
    }
    if (s.unlabeled_ratio < 0) throw ConfigError("unlabeled_ratio must be >= 0");
    if (cfg.checkpoint_interval < 0) throw ConfigError("checkpoint_interval must be >= 0");
}

// One plain-CE pass over the whole view (warmup and ce_baseline path).
double ce_epoch(MlpNetwork& net, OptimizerState& opt, const TrainView& view,
                int epoch, int k, const TrainConfig& cfg) {
    std::vector<std::size_t> order(view.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuf(mix_seed({cfg.seed, kTagShuffle, static_cast<std::uint64_t>(epoch),
                       static_cast<std::uint64_t>(k)}));
    shuf.shuffle(order);

    const double lr = lr_at(epoch - 1, opt.schedule, opt.base_lr);
    const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
    double loss_sum = 0.0;
    std::size_t n_sum = 0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
        const std::size_t end = std::min(order.size(), start + bs);
        const std::vector<std::size_t> batch(order.begin() + start,
                                             order.begin() + end);
        Matrix x = gather_rows(view.features, batch);
        Matrix t(batch.size(), static_cast<std::size_t>(view.num_classes));
        for (std::size_t i = 0; i < batch.size(); ++i) {
            t.at(i, static_cast<std::size_t>(view.labels[batch[i]])) = 1.0;
        }
        LossGrad lg = soft_ce_loss(net, x, t);
        if (!std::isfinite(lg.loss)) {
            throw DivergedError("warmup loss non-finite", epoch);
        }
        sgd_step(net, opt, lg.grads, lr);
        loss_sum += lg.loss * static_cast<double>(batch.size());
        n_sum += batch.size();
    }
    return n_sum > 0 ? loss_sum / static_cast<double>(n_sum) : 0.0;
}

double accuracy_from_probs(const Matrix& probs, const std::vector<int>& labels) {
    std::int64_t hits = 0;
    for (std::size_t i = 0; i < probs.rows; ++i) {
        const double* row = probs.row(i);
        std::size_t best = 0;
        for (std::size_t c = 1; c < probs.cols; ++c) {
            if (row[c] > row[best]) best = c;
        }
        if (static_cast<int>(best) == labels[i]) ++hits;
    }
    return probs.rows > 0 ? static_cast<double>(hits) / static_cast<double>(probs.rows)
                          : 0.0;
}

}  // namespace

std::string to_string(Variant v) {
    switch (v) {
        case Variant::Full: return "full";
        case Variant::NoSplit: return "no_split";
        case Variant::NoClassNorm: return "no_class_norm";
        case Variant::NoCorrection: return "no_correction";
        case Variant::NoContrastive: return "no_contrastive";
        case Variant::CeBaseline: return "ce_baseline";
    }
    throw ContractError("unknown variant");
}

Variant variant_from_string(const std::string& s) {
    for (Variant v : all_variants()) {
        if (to_string(v) == s) return v;
    }
    throw ConfigError("unknown variant '" + s +
                      "' (expected full, no_split, no_class_norm, no_correction, "
                      "no_contrastive, or ce_baseline)");
}

const std::vector<Variant>& all_variants() {
    static const std::vector<Variant> v{
        Variant::Full,         Variant::NoSplit,       Variant::NoClassNorm,
        Variant::NoCorrection, Variant::NoContrastive, Variant::CeBaseline,
    };
    return v;
}

NetworkPair make_network_pair(const TrainConfig& cfg, int input_dim,
                              int num_classes) {
    validate_train_config(cfg);
    if (input_dim < 1 || num_classes < 2) {
        throw ConfigError("network needs input_dim >= 1 and num_classes >= 2");
    }
    std::vector<int> sizes;
    sizes.reserve(cfg.hidden.size() + 2);
    sizes.push_back(input_dim);
    for (int h : cfg.hidden) sizes.push_back(h);
    sizes.push_back(num_classes);

    LrSchedule sched = cfg.schedule;
    sched.total_epochs = std::max(cfg.e_max, 1);

    NetworkPair pair;
    pair.net1 = make_mlp(sizes, mix_seed({cfg.seed, kTagNet, 0}));
    pair.net2 = make_mlp(sizes, mix_seed({cfg.seed, kTagNet, 1}));
    pair.opt1 = make_optimizer(pair.net1, cfg.momentum, cfg.weight_decay,
                               cfg.base_lr, sched);
    pair.opt2 = make_optimizer(pair.net2, cfg.momentum, cfg.weight_decay,
                               cfg.base_lr, sched);
    return pair;
}

double evaluate_single(const MlpNetwork& net, const TrainView& test) {
    if (net.output_dim() != test.num_classes) {
        throw ContractError("evaluate: class count mismatch");
    }
    ForwardCache cache = forward(net, test.features);
    return accuracy_from_probs(softmax_rows(cache.logits()), test.labels);
}

EvalResult evaluate(const MlpNetwork& net1, const MlpNetwork& net2,
                    const TrainView& test) {
    if (net1.output_dim() != test.num_classes ||
        net2.output_dim() != test.num_classes) {
        throw ContractError("evaluate: class count mismatch");
    }
    ForwardCache c1 = forward(net1, test.features);
    ForwardCache c2 = forward(net2, test.features);
    Matrix p1 = softmax_rows(c1.logits());
    Matrix p2 = softmax_rows(c2.logits());
    Matrix mean(p1.rows, p1.cols);
    for (std::size_t i = 0; i < p1.data.size(); ++i) {
        mean.data[i] = 0.5 * (p1.data[i] + p2.data[i]);
    }
    EvalResult r;
    r.acc_net1 = accuracy_from_probs(p1, test.labels);
    r.acc_net2 = accuracy_from_probs(p2, test.labels);
    r.acc_ensemble = accuracy_from_probs(mean, test.labels);
    return r;
}

double warmup(NetworkPair& pair, const TrainView& view, const TrainConfig& cfg) {
    validate_train_config(cfg);
    double last = 0.0;
    for (int epoch = 1; epoch <= cfg.e_warm; ++epoch) {
        const double l1 = ce_epoch(pair.net1, pair.opt1, view, epoch, 0, cfg);
        const double l2 = ce_epoch(pair.net2, pair.opt2, view, epoch, 1, cfg);
        last = 0.5 * (l1 + l2);
    }
    return last;
}

EpochStats train_epoch_for(int k, NetworkPair& pair, const TrainView& view,
                           const SplitAssignment& split, int epoch,
                           const TrainConfig& cfg) {
    if (k != 0 && k != 1) throw ContractError("network index must be 0 or 1");
    if (epoch <= cfg.e_warm) {
        throw ContractError("train_epoch_for called during warmup epochs");
    }
    if (cfg.variant == Variant::CeBaseline) {
        throw ContractError("ce_baseline has no correction epochs");
    }

    MlpNetwork& net = k == 0 ? pair.net1 : pair.net2;
    OptimizerState& opt = k == 0 ? pair.opt1 : pair.opt2;
    const MlpNetwork& peer = k == 0 ? pair.net2 : pair.net1;

    std::vector<std::size_t> own, unl;
    if (cfg.variant == Variant::NoSplit) {
        own.resize(view.size());
        std::iota(own.begin(), own.end(), std::size_t{0});
        unl = own;
    } else {
        own = k == 0 ? split.d1 : split.d2;
        unl = k == 0 ? split.d2 : split.d1;
    }
    if (own.empty() || unl.empty()) throw ContractError("empty split");

    Matrix own_x = gather_rows(view.features, own);
    std::vector<int> own_y(own.size());
    for (std::size_t i = 0; i < own.size(); ++i) own_y[i] = view.labels[own[i]];

    GammaSchedule gsched;
    gsched.e_warm = cfg.e_warm;
    gsched.delta = cfg.gamma_delta;
    CorrectionOptions copts;
    copts.enabled = cfg.variant != Variant::NoCorrection;
    copts.class_normalize = cfg.variant != Variant::NoClassNorm;

    EpochStats stats;
    stats.peer_revision_used = peer.revision;
    SoftLabelBatch slb = correct_labels(peer, own_x, own_y, view.num_classes,
                                        epoch, gsched, copts);
    stats.gamma = slb.gamma;
    stats.betas = slb.betas;
    stats.ids.resize(own.size());
    for (std::size_t i = 0; i < own.size(); ++i) stats.ids[i] = view.ids[own[i]];

    std::vector<std::size_t> order(own.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuf(mix_seed({cfg.seed, kTagShuffle, static_cast<std::uint64_t>(epoch),
                       static_cast<std::uint64_t>(k)}));
    shuf.shuffle(order);

    std::vector<std::size_t> uorder(unl.size());
    std::iota(uorder.begin(), uorder.end(), std::size_t{0});
    Rng ushuf(mix_seed({cfg.seed, kTagUnlabeled, static_cast<std::uint64_t>(epoch),
                        static_cast<std::uint64_t>(k)}));
    ushuf.shuffle(uorder);

    const double lr = lr_at(epoch - 1, opt.schedule, opt.base_lr);
    const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
    double sup_sum = 0.0, unsup_sum = 0.0, con_sum = 0.0, mask_sum = 0.0;
    std::size_t n_sum = 0, u_cursor = 0, batch_index = 0;

    for (std::size_t start = 0; start < order.size(); start += bs, ++batch_index) {
        const std::size_t end = std::min(order.size(), start + bs);
        const std::size_t nb = end - start;
        std::vector<std::size_t> lab_pos(order.begin() + start, order.begin() + end);
        std::vector<std::size_t> lab_view(nb);
        for (std::size_t i = 0; i < nb; ++i) lab_view[i] = own[lab_pos[i]];

        Matrix lab_x = gather_rows(view.features, lab_view);
        Matrix lab_t = gather_rows(slb.soft, lab_pos);

        Rng brng(mix_seed({cfg.seed, kTagAug, static_cast<std::uint64_t>(epoch),
                           static_cast<std::uint64_t>(batch_index),
                           static_cast<std::uint64_t>(k)}));

        LossGrad sup = supervised_loss(net, lab_x, lab_t, cfg.ssl, brng);

        const std::size_t ubs = nb * static_cast<std::size_t>(cfg.ssl.unlabeled_ratio);
        UnsupResult uns;
        LossGrad con;
        bool have_con = false;
        if (ubs > 0) {
            std::vector<std::size_t> u_view(ubs);
            for (std::size_t t = 0; t < ubs; ++t) {
                u_view[t] = unl[uorder[(u_cursor + t) % uorder.size()]];
            }
            u_cursor = (u_cursor + ubs) % uorder.size();
            Matrix unl_x = gather_rows(view.features, u_view);
            uns = unsupervised_loss(net, unl_x, cfg.ssl, brng);
            if (cfg.variant != Variant::NoContrastive && cfg.ssl.lambda_c != 0.0 &&
                ubs >= 2) {
                con = contrastive_loss(net, unl_x, cfg.ssl, brng);
                have_con = true;
            }
        }

        (void)total_loss(sup.loss, uns.loss, con.loss, cfg.ssl);

        Gradients g = std::move(sup.grads);
        if (ubs > 0) add_scaled(g, uns.grads, cfg.ssl.lambda_u);
        if (have_con) add_scaled(g, con.grads, cfg.ssl.lambda_c);
        sgd_step(net, opt, g, lr);

        const double w = static_cast<double>(nb);
        sup_sum += sup.loss * w;
        unsup_sum += uns.loss * w;
        con_sum += con.loss * w;
        mask_sum += uns.mask_fraction * w;
        n_sum += nb;
    }

    const double denom = static_cast<double>(n_sum);
    stats.sup_loss = sup_sum / denom;
    stats.unsup_loss = unsup_sum / denom;
    stats.con_loss = con_sum / denom;
    stats.mask_fraction = mask_sum / denom;
    return stats;
}

RunResult run_crosssplit(const NoisyDataset& train, const NoisyDataset& test,
                         const TrainConfig& cfg, const EpochHook& hook) {
    validate_train_config(cfg);
    if (train.examples.empty() || test.examples.empty()) {
        throw ConfigError("empty train or test dataset");
    }
    if (train.num_classes != test.num_classes) {
        throw ConfigError("train/test class count mismatch");
    }
    if (train.dim != test.dim) throw ConfigError("train/test dimension mismatch");

    const auto t0 = std::chrono::steady_clock::now();
    const TrainView view = make_train_view(train);
    const TrainView test_view = make_train_view(test);
    NetworkPair pair = make_network_pair(cfg, train.dim, train.num_classes);
    const SplitAssignment split = split_dataset(train, cfg.seed);

    RunResult rr;
    for (int epoch = 1; epoch <= cfg.e_max; ++epoch) {
        EpochMetrics m;
        m.epoch = epoch;
        m.lr = lr_at(epoch - 1, pair.opt1.schedule, pair.opt1.base_lr);
        try {
            if (cfg.variant == Variant::CeBaseline) {
                m.sup_loss = ce_epoch(pair.net1, pair.opt1, view, epoch, 0, cfg);
            } else if (epoch <= cfg.e_warm) {
                const double l1 = ce_epoch(pair.net1, pair.opt1, view, epoch, 0, cfg);
                const double l2 = ce_epoch(pair.net2, pair.opt2, view, epoch, 1, cfg);
                m.sup_loss = 0.5 * (l1 + l2);
            } else {
                const std::uint64_t rev2_before = pair.net2.revision;
                EpochStats s1 = train_epoch_for(0, pair, view, split, epoch, cfg);
                EpochStats s2 = train_epoch_for(1, pair, view, split, epoch, cfg);
                if (s1.peer_revision_used != rev2_before ||
                    s2.peer_revision_used != pair.net1.revision) {
                    throw ContractError("sequential correction order violated");
                }
                m.gamma = s1.gamma;
                m.sup_loss = 0.5 * (s1.sup_loss + s2.sup_loss);
                m.unsup_loss = 0.5 * (s1.unsup_loss + s2.unsup_loss);
                m.con_loss = 0.5 * (s1.con_loss + s2.con_loss);
                m.mask_fraction = 0.5 * (s1.mask_fraction + s2.mask_fraction);

                std::vector<double> betas = s1.betas;
                betas.insert(betas.end(), s2.betas.begin(), s2.betas.end());
                std::vector<std::int64_t> ids = s1.ids;
                ids.insert(ids.end(), s2.ids.begin(), s2.ids.end());
                const auto [bc, bn] = beta_means(betas, ids, train);
                m.beta_mean_clean = bc;
                m.beta_mean_noisy = bn;
            }
        } catch (const DivergedError& e) {
            throw DivergedError(std::string(e.what()) + " (epoch " +
                                    std::to_string(epoch) + ")",
                                epoch);
        }

        if (cfg.variant == Variant::CeBaseline) {
            const auto [ac, an] = memorization_metrics(pair.net1, train);
            m.train_acc_clean_n1 = m.train_acc_clean_n2 = ac;
            m.train_acc_noisy_n1 = m.train_acc_noisy_n2 = an;
            const double acc = evaluate_single(pair.net1, test_view);
            m.test_acc_n1 = m.test_acc_n2 = m.test_acc_ens = acc;
        } else {
            const auto [c1, n1] = memorization_metrics(pair.net1, train);
            const auto [c2, n2] = memorization_metrics(pair.net2, train);
            m.train_acc_clean_n1 = c1;
            m.train_acc_noisy_n1 = n1;
            m.train_acc_clean_n2 = c2;
            m.train_acc_noisy_n2 = n2;
            const EvalResult ev = evaluate(pair.net1, pair.net2, test_view);
            m.test_acc_n1 = ev.acc_net1;
            m.test_acc_n2 = ev.acc_net2;
            m.test_acc_ens = ev.acc_ensemble;
        }
        rr.log.append(m);
        if (hook) hook(epoch, pair);
    }

    if (cfg.variant == Variant::CeBaseline) {
        // Keep the returned pair coherent: the baseline trains one network.
        pair.net2 = pair.net1;
        pair.opt2 = pair.opt1;
    }
    rr.pair = std::move(pair);
    rr.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rr;
}

std::vector<AblationEntry> run_ablation_suite(const NoisyDataset& train,
                                              const NoisyDataset& test,
                                              const TrainConfig& base,
                                              const std::vector<Variant>& variants) {
    std::vector<AblationEntry> out;
    out.reserve(variants.size());
    for (Variant v : variants) {
        AblationEntry entry;
        entry.variant = v;
        TrainConfig cfg = base;
        cfg.variant = v;
        try {
            entry.result = run_crosssplit(train, test, cfg);
        } catch (const std::exception& e) {
            entry.error = e.what();
        }
        out.push_back(std::move(entry));
    }
    return out;
}

}  // namespace crosssplit
