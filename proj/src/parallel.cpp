#include "crossfit/parallel.hpp"

#include <cstdlib>
#include <string>

namespace crossfit {

namespace {

int default_threads() {
  if (const char* env = std::getenv("CROSSFIT_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) return n;
    } catch (const std::exception&) {
    }
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

std::atomic<int>& thread_setting() {
  static std::atomic<int> setting{default_threads()};
  return setting;
}

}  // namespace

int num_threads() { return thread_setting().load(); }

void set_num_threads(int n) {
  if (n < 1) throw InputError("thread count must be positive");
  thread_setting().store(n);
}

}  // namespace crossfit
