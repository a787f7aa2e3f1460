#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace dfn {

// Exit codes used by the CLI: 0 success, 1 usage, 2 data, 3 numeric.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Counter-based generator so streams can be derived from (seed, epoch,
// sample) without any shared state between threads.
class SplitMix64 {
 public:
  explicit SplitMix64(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1)
  double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

  // uniform in [lo, hi)
  double next_range(double lo, double hi) {
    return lo + (hi - lo) * next_double();
  }

  // uniform integer in [0, n)
  uint64_t next_below(uint64_t n) { return next_u64() % n; }

  static uint64_t mix(uint64_t a, uint64_t b) {
    SplitMix64 g(a * 0x9e3779b97f4a7c15ull + b + 0x632be59bd9b4e019ull);
    return g.next_u64();
  }

 private:
  uint64_t state_;
};

}  // namespace dfn
