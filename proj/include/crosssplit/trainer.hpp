// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "crosssplit/correction.hpp"
#include "crosssplit/dataset.hpp"
#include "crosssplit/metrics.hpp"
#include "crosssplit/nn.hpp"
#include "crosssplit/ssl.hpp"

namespace crosssplit {

enum class Variant {
    Full,
    NoSplit,
    NoClassNorm,
    NoCorrection,
    NoContrastive,
    CeBaseline,
};

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);
const std::vector<Variant>& all_variants();

struct TrainConfig {
    int e_warm = 5;
    int e_max = 60;
    int batch_size = 32;
    double base_lr = 0.05;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    LrSchedule schedule;            // total_epochs is pinned to e_max at run time
    int gamma_delta = 10;
    SslConfig ssl;
    Variant variant = Variant::Full;
    std::uint64_t seed = 1;
    std::vector<int> hidden{128, 128};
    int checkpoint_interval = 0;    // epochs between checkpoints; 0 = final only
};

struct NetworkPair {
    MlpNetwork net1, net2;
    OptimizerState opt1, opt2;
};

NetworkPair make_network_pair(const TrainConfig& cfg, int input_dim, int num_classes);

struct EvalResult {
    double acc_net1 = 0.0;
    double acc_net2 = 0.0;
    double acc_ensemble = 0.0;
};

// Ensemble = argmax of the mean of the two softmax outputs; ties go to the
// lowest class index.
EvalResult evaluate(const MlpNetwork& net1, const MlpNetwork& net2,
                    const TrainView& test);
double evaluate_single(const MlpNetwork& net, const TrainView& test);

// Plain-CE epochs on the full view for both networks (epochs 1..e_warm).
// Returns the mean supervised loss of the last warmup epoch (0 if e_warm==0).
double warmup(NetworkPair& pair, const TrainView& view, const TrainConfig& cfg);

struct EpochStats {
    double sup_loss = 0.0;
    double unsup_loss = 0.0;
    double con_loss = 0.0;
    double mask_fraction = 0.0;
    double gamma = 0.0;
    std::vector<double> betas;              // aligned with ids
    std::vector<std::int64_t> ids;
    std::uint64_t peer_revision_used = 0;   // sequential-semantics test seam
};

// One post-warmup epoch for network k (0 or 1): correction against the peer,
// then the SSL minibatch loop on (own split labeled, other split unlabeled).
EpochStats train_epoch_for(int k, NetworkPair& pair, const TrainView& view,
                           const SplitAssignment& split, int epoch,
                           const TrainConfig& cfg);

struct RunResult {
    MetricsLog log;
    NetworkPair pair;
    double wall_seconds = 0.0;
};

using EpochHook = std::function<void(int epoch, const NetworkPair&)>;

// The full procedure: split, warmup, then per epoch train net1 then net2
// (net2's correction sees net1's same-epoch update). ce_baseline trains a
// single network with plain CE for all epochs instead.
RunResult run_crosssplit(const NoisyDataset& train, const NoisyDataset& test,
                         const TrainConfig& cfg, const EpochHook& hook = {});

struct AblationEntry {
    Variant variant;
    std::optional<RunResult> result;  // empty if the run failed
    std::string error;
};

// One run per variant with identical seeds; failures are recorded, not fatal.
std::vector<AblationEntry> run_ablation_suite(const NoisyDataset& train,
                                              const NoisyDataset& test,
                                              const TrainConfig& base,
                                              const std::vector<Variant>& variants);

}  // namespace crosssplit
