#include "prunelab/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace prunelab::kern {

const Ops& avx2_ops_impl();  // kernels_avx2.cpp

bool avx2_available() {
#if defined(__x86_64__) || defined(_M_X64)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

namespace {

struct Selection {
    const Ops* ops;
    const char* name;
};

Selection select() {
    const char* env = std::getenv("PRUNELAB_SIMD");
    if (env && std::strcmp(env, "scalar") == 0) return {&scalar_ops(), "scalar"};
    if (env && std::strcmp(env, "avx2") == 0 && avx2_available())
        return {&avx2_ops_impl(), "avx2"};
    if (env && std::strcmp(env, "avx2") == 0) return {&scalar_ops(), "scalar"};
    if (avx2_available()) return {&avx2_ops_impl(), "avx2"};
    return {&scalar_ops(), "scalar"};
}

const Selection& selection() {
    static const Selection s = select();
    return s;
}

}  // namespace

const Ops& ops() { return *selection().ops; }

std::string active_variant() { return selection().name; }

}  // namespace prunelab::kern
