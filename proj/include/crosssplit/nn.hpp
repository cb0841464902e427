// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crosssplit/matrix.hpp"

namespace crosssplit {

struct LrSchedule {
    enum class Kind { Cosine, Multistep };
    Kind kind = Kind::Cosine;
    int total_epochs = 1;
    std::vector<int> milestones;  // multistep only
    double decay = 0.1;           // multistep only
};

// lr at integer epoch e in [0, T]. Cosine: base*(1+cos(pi*e/T))/2.
// Multistep: base * decay^(number of milestones <= e).
double lr_at(int epoch, const LrSchedule& sched, double base_lr);

// Plain MLP, ReLU hidden layers, linear output. weights[l] is in x out.
// `revision` counts parameter updates; the trainer uses it to assert the
// sequential cross-correction order.
struct MlpNetwork {
    std::vector<int> layer_sizes;
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> biases;
    std::uint64_t revision = 0;

    int input_dim() const { return layer_sizes.front(); }
    int output_dim() const { return layer_sizes.back(); }
    std::size_t num_layers() const { return weights.size(); }
};

// Fan-in scaled uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)]; biases 0.
MlpNetwork make_mlp(const std::vector<int>& layer_sizes, std::uint64_t seed);

// act[0] is the input batch, act[l] the post-activation of layer l,
// act.back() the logits. pre[l] is the pre-activation of layer l.
struct ForwardCache {
    std::vector<Matrix> pre;
    std::vector<Matrix> act;
    const Matrix& logits() const { return act.back(); }
    // Penultimate representation fed to the contrastive loss.
    const Matrix& embeddings() const { return act[act.size() - 2]; }
};

ForwardCache forward(const MlpNetwork& net, const Matrix& batch);

Matrix softmax_rows(const Matrix& logits);

// Mean over rows of -sum_c target * ln(pred + eps), eps = 1e-12.
double cross_entropy_soft(const Matrix& pred_probs, const Matrix& targets);

struct Gradients {
    std::vector<Matrix> dw;
    std::vector<std::vector<double>> db;
};

Gradients zero_gradients(const MlpNetwork& net);
// acc += w * g
void add_scaled(Gradients& acc, const Gradients& g, double w);

// dlogits must already carry any mean-reduction factors. The overload with
// dembed injects an extra gradient into the penultimate activation (used by
// the contrastive term).
Gradients backward(const MlpNetwork& net, const ForwardCache& cache,
                   const Matrix& dlogits);
Gradients backward(const MlpNetwork& net, const ForwardCache& cache,
                   const Matrix& dlogits, const Matrix& dembed);

struct OptimizerState {
    std::vector<Matrix> vel_w;
    std::vector<std::vector<double>> vel_b;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    double base_lr = 0.05;
    LrSchedule schedule;
};

OptimizerState make_optimizer(const MlpNetwork& net, double momentum,
                              double weight_decay, double base_lr,
                              LrSchedule schedule);

// v <- momentum*v + grad + weight_decay*theta; theta <- theta - lr*v.
// Bumps net.revision. Throws DivergedError on non-finite gradients.
void sgd_step(MlpNetwork& net, OptimizerState& opt, const Gradients& grads,
              double lr);

// Exact text round trip of parameters plus optimizer state.
void save_checkpoint(const MlpNetwork& net, const OptimizerState& opt,
                     const std::string& path);
void load_checkpoint(MlpNetwork& net, OptimizerState& opt, const std::string& path);

}  // namespace crosssplit
