#include "sanet/parallel.hpp"

#include <algorithm>

namespace sanet::parallel {

namespace {
std::atomic<int> g_max_threads{1};
}

int max_threads() { return g_max_threads.load(); }

void set_max_threads(int n) { g_max_threads.store(std::max(1, n)); }

} // namespace sanet::parallel
