#include "lldiff/blasdispatch.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>

#if defined(__linux__) && defined(__x86_64__)
#include <unistd.h>

#include <cblas.h>
#endif

namespace lldiff {

#if defined(__linux__) && defined(__x86_64__)

static bool legacy_core(const char* name) {
    static const char* legacy[] = {"Prescott", "Northwood", "Katmai",  "Banias",
                                   "Core2",    "Penryn",    "Nehalem", "Atom",
                                   "Opteron",  "Barcelona", "Bobcat",  "generic"};
    for (const char* l : legacy)
        if (std::strcmp(name, l) == 0) return true;
    return false;
}

void ensure_fast_blas(int argc, const char* const* argv) {
    (void)argc;
    if (std::getenv("LLDIFF_BLAS_REEXEC")) return;  // one attempt only
    const char* target = nullptr;
    if (__builtin_cpu_supports("avx512f"))
        target = "SKYLAKEX";
    else if (__builtin_cpu_supports("avx2"))
        target = "HASWELL";
    if (!target) return;
    const char* core = openblas_get_corename();
    if (!core || !legacy_core(core)) return;
    setenv("OPENBLAS_CORETYPE", target, 1);
    setenv("LLDIFF_BLAS_REEXEC", "1", 1);
    execv("/proc/self/exe", const_cast<char* const*>(argv));
    std::fprintf(stderr, "warning: BLAS kernel re-exec failed; continuing with %s kernels\n",
                 core);
}

#else

void ensure_fast_blas(int, const char* const*) {}

#endif

}  // namespace lldiff
