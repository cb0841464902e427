// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace crosssplit {

// Combines seed components (run seed, purpose tag, epoch, batch, net index...)
// into one 64-bit stream seed. splitmix64-style finalizer per component, so
// nearby tuples land far apart.
std::uint64_t mix_seed(std::initializer_list<std::uint64_t> parts);

// All distribution transforms are hand-rolled on top of mt19937_64 because the
// std::*_distribution implementations are not pinned by the standard and the
// repo promises byte-identical reruns.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t raw() { return eng_(); }

    // 53-bit mantissa uniform in [0, 1).
    double uniform();

    // Uniform integer in [0, n), rejection-sampled so every value is exact.
    std::uint64_t uniform_int(std::uint64_t n);

    // Standard normal via Box-Muller; second draw of each pair is cached.
    double gaussian();

    // Beta(a, b) via Marsaglia-Tsang gammas.
    double beta(double a, double b);

    // Fisher-Yates. In-place, uses uniform_int.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_int(i));
            std::swap(v[i - 1], v[j]);
        }
    }

  private:
    double gamma_draw(double shape);

    std::mt19937_64 eng_;
    double cached_gauss_ = 0.0;
    bool has_cached_gauss_ = false;
};

}  // namespace crosssplit
