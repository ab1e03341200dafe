#pragma once

namespace lldiff {

// OpenBLAS picks its kernels from CPUID at load time; on some virtualized
// CPUs the model is masked and it silently falls back to a pre-AVX kernel,
// costing ~4x in GEMM throughput. When that happens on hardware that
// actually supports AVX-512/AVX2, re-exec the process once with
// OPENBLAS_CORETYPE pinned to the right kernel family. No-op everywhere
// else. Call first thing in main().
void ensure_fast_blas(int argc, const char* const* argv);

}  // namespace lldiff
