// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crosssplit/matrix.hpp"

namespace crosssplit {

struct Example {
    std::int64_t id = 0;
    std::vector<double> features;
    int true_label = 0;
    int assigned_label = 0;
};

struct NoiseSpec {
    enum class Kind { None, Symmetric, Asymmetric };
    Kind kind = Kind::None;
    double ratio = 0.0;
    std::uint64_t seed = 0;
    std::vector<int> flip_map;       // asymmetric only; empty otherwise
    std::int64_t realized_flips = 0;
};

std::string to_string(NoiseSpec::Kind kind);
NoiseSpec::Kind noise_kind_from_string(const std::string& s);

// Full dataset including ground truth. Training code never receives this
// type; it gets a TrainView. Only dataset and metrics code may look at
// true_label / is_noisy.
struct NoisyDataset {
    std::vector<Example> examples;
    int num_classes = 0;
    int dim = 0;
    std::uint64_t gen_seed = 0;
    NoiseSpec noise;

    std::size_t size() const { return examples.size(); }
    bool is_noisy(std::size_t i) const {
        return examples[i].assigned_label != examples[i].true_label;
    }
    std::int64_t noisy_count() const;
};

// What the trainer is allowed to see: features, assigned labels, ids.
struct TrainView {
    Matrix features;                // N x d
    std::vector<int> labels;        // assigned labels
    std::vector<std::int64_t> ids;
    int num_classes = 0;

    std::size_t size() const { return labels.size(); }
};

TrainView make_train_view(const NoisyDataset& ds);

struct SplitAssignment {
    std::vector<std::size_t> d1;    // indices into the dataset/view
    std::vector<std::size_t> d2;
    std::uint64_t seed = 0;
};

// Isotropic Gaussian blobs; class c is centered at separation * e_{c mod d}.
NoisyDataset generate_blobs(int num_classes, int per_class, int dim,
                            double separation, std::uint64_t seed);

NoisyDataset inject_symmetric_noise(const NoisyDataset& ds, double ratio,
                                    std::uint64_t seed);

// flip_map[c] is the wrong class assigned to flipped examples of true class c.
NoisyDataset inject_asymmetric_noise(const NoisyDataset& ds, double ratio,
                                     const std::vector<int>& flip_map,
                                     std::uint64_t seed);

// Circular shift inside each group: group {a,b,c} maps a->b->c->a.
// Groups must partition [0, C). An empty group list means one group of all
// classes.
std::vector<int> circular_flip_map(int num_classes,
                                   const std::vector<std::vector<int>>& groups);

// Random permutation; first ceil(N/2) ids form D1.
SplitAssignment split_dataset(const NoisyDataset& ds, std::uint64_t seed);

void save_dataset(const NoisyDataset& ds, const std::string& path);
NoisyDataset load_dataset(const std::string& path);

}  // namespace crosssplit
