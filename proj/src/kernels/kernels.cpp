// SPDX-License-Identifier: Apache-2.0
#include "crosssplit/kernels.hpp"

#include <cstdlib>

#include "crosssplit/errors.hpp"

namespace crosssplit {

namespace {

const KernelTable* g_active = nullptr;

const KernelTable* resolve(std::string_view name) {
    if (name == "scalar") return &kScalarKernels;
    if (name == "avx2") {
        if (!cpu_supports_avx2())
            throw ConfigError("kernels: avx2 requested but this CPU lacks AVX2/FMA");
        return &kAvx2Kernels;
    }
    if (name == "auto")
        return cpu_supports_avx2() ? &kAvx2Kernels : &kScalarKernels;
    throw ConfigError("kernels: unknown backend '" + std::string(name) +
                      "' (expected scalar, avx2 or auto)");
}

}  // namespace

bool cpu_supports_avx2() {
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}

const KernelTable& kernels() {
    if (!g_active) {
        const char* env = std::getenv("CROSSSPLIT_KERNELS");
        g_active = resolve(env && *env ? std::string_view(env) : "auto");
    }
    return *g_active;
}

void select_kernels(std::string_view name) { g_active = resolve(name); }

std::vector<std::string> available_kernels() {
    std::vector<std::string> v{"scalar"};
    if (cpu_supports_avx2()) v.push_back("avx2");
    return v;
}

}  // namespace crosssplit
