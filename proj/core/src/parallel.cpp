#include "ssa/parallel.hpp"

#include <atomic>

namespace ssa {
namespace {
std::atomic<unsigned> g_threads{1};
}

void set_num_threads(unsigned threads) { g_threads = std::max(1u, threads); }
unsigned num_threads() { return g_threads; }

}  // namespace ssa
