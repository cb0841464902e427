// SPDX-License-Identifier: Apache-2.0
#include "crosssplit/rng.hpp"

#include <cmath>

#include "crosssplit/errors.hpp"

namespace crosssplit {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

std::uint64_t mix_seed(std::initializer_list<std::uint64_t> parts) {
    std::uint64_t h = 0x6a09e667f3bcc908ULL;  // frac(sqrt 2)
    for (std::uint64_t p : parts) h = splitmix64(h ^ p);
    return h;
}

double Rng::uniform() {
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::uniform_int(std::uint64_t n) {
    if (n == 0) throw ContractError("uniform_int: n must be positive");
    // Reject the tail that would bias the modulus.
    std::uint64_t rem = (0xffffffffffffffffULL % n + 1) % n;
    std::uint64_t limit = 0xffffffffffffffffULL - rem;
    std::uint64_t r;
    do {
        r = eng_();
    } while (r > limit);
    return r % n;
}

double Rng::gaussian() {
    if (has_cached_gauss_) {
        has_cached_gauss_ = false;
        return cached_gauss_;
    }
    // u1 in (0,1]: flip the half-open interval to keep log() finite.
    double u1 = 1.0 - uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double t = 6.283185307179586476925286766559 * u2;
    cached_gauss_ = r * std::sin(t);
    has_cached_gauss_ = true;
    return r * std::cos(t);
}

double Rng::gamma_draw(double shape) {
    // Marsaglia-Tsang squeeze; the shape<1 boost is the standard power trick.
    if (shape < 1.0) {
        double u = 1.0 - uniform();
        return gamma_draw(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    double d = shape - 1.0 / 3.0;
    double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x, v;
        do {
            x = gaussian();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        double u = 1.0 - uniform();  // (0,1]
        if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
        if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
}

double Rng::beta(double a, double b) {
    if (a <= 0.0 || b <= 0.0) throw ContractError("beta: parameters must be positive");
    double g1 = gamma_draw(a);
    double g2 = gamma_draw(b);
    return g1 / (g1 + g2);
}

}  // namespace crosssplit
