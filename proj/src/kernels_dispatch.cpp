#include "iss/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace iss::kern {

namespace {

const Kernels* g_forced = nullptr;

const Kernels& select() {
    if (const char* env = std::getenv("ISS_KERNELS")) {
        if (std::strcmp(env, "scalar") == 0) return scalar_kernels();
        if (std::strcmp(env, "avx2") == 0 && avx2_kernels() != nullptr) return *avx2_kernels();
    }
    if (const Kernels* k = avx2_kernels()) return *k;
    return scalar_kernels();
}

}  // namespace

const Kernels& active() {
    if (g_forced != nullptr) return *g_forced;
    static const Kernels& chosen = select();
    return chosen;
}

void force(const Kernels& k) { g_forced = &k; }

}  // namespace iss::kern
