#include "kerl/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace kerl::kernels {

#if defined(__x86_64__) || defined(_M_X64)
const Ops& avx2_ops_impl();
#endif
#if defined(__aarch64__)
const Ops& neon_ops_impl();
#endif

namespace {

const Ops* simd_ops_or_null() {
#if defined(__x86_64__) || defined(_M_X64)
    if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma"))
        return &avx2_ops_impl();
#elif defined(__aarch64__)
    return &neon_ops_impl();  // NEON is mandatory on aarch64
#endif
    return nullptr;
}

const Ops* select() {
    const char* env = std::getenv("KERL_KERNELS");
    if (env && std::strcmp(env, "scalar") == 0) return &scalar_ops();
    const Ops* simd = simd_ops_or_null();
    if (env && (std::strcmp(env, "avx2") == 0 || std::strcmp(env, "neon") == 0)) {
        if (simd && std::strcmp(simd->name, env) == 0) return simd;
        return &scalar_ops();  // requested backend unavailable here
    }
    return simd ? simd : &scalar_ops();
}

}  // namespace

const Ops& ops() {
    static const Ops* selected = select();
    return *selected;
}

std::vector<const Ops*> available_backends() {
    std::vector<const Ops*> v{&scalar_ops()};
    if (const Ops* simd = simd_ops_or_null()) v.push_back(simd);
    return v;
}

}  // namespace kerl::kernels
