#include "dqe/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>

namespace dqe::kernels {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(_M_X64)
    return __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}

namespace {

const Ops* resolve_default() {
    const char* env = std::getenv("DQE_KERNELS");
    if (env && std::strcmp(env, "scalar") == 0) return &scalar_ops();
    if (cpu_has_avx2()) {
        if (const Ops* v = avx2_ops()) return v;
    }
    return &scalar_ops();
}

std::atomic<const Ops*>& current() {
    static std::atomic<const Ops*> ops{resolve_default()};
    return ops;
}

}  // namespace

const Ops& active() { return *current().load(std::memory_order_relaxed); }

bool set_backend(const std::string& name) {
    if (name == "scalar") {
        current().store(&scalar_ops(), std::memory_order_relaxed);
        return true;
    }
    if (name == "avx2") {
        if (!cpu_has_avx2()) return false;
        const Ops* v = avx2_ops();
        if (!v) return false;
        current().store(v, std::memory_order_relaxed);
        return true;
    }
    return false;
}

}  // namespace dqe::kernels
