#include "swinforge/common.hpp"

#include <cstdlib>
#include <thread>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace swinforge {

static int resolve_threads() {
    const char* env = std::getenv("SWINFORGE_THREADS");
    int n = 0;
    if (env && *env) {
        n = std::atoi(env);
        if (n < 1) n = 1;
    } else {
        n = static_cast<int>(std::thread::hardware_concurrency());
        if (n < 1) n = 1;
    }
#ifdef _OPENMP
    omp_set_num_threads(n);
#endif
    return n;
}

int max_threads() {
    static int n = resolve_threads();
    return n;
}

bool deterministic_mode() { return max_threads() == 1; }

}  // namespace swinforge
