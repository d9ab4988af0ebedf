#ifndef RPL_RNG_HPP
#define RPL_RNG_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace rpl {

// Module ids used to key independent random streams.
enum class ModuleId : std::uint64_t {
  env = 1,
  rangelaw = 2,
  polymer = 3,
  stochproc = 4,
  varprob = 5,
  cli = 6,
};

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// SplitMix64 finalizer; bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t stream_key(std::uint64_t master, ModuleId module,
                                   std::uint64_t replica) noexcept {
  std::uint64_t k = mix64(master + kGolden);
  k = mix64(k ^ (static_cast<std::uint64_t>(module) * 0xd1b54a32d192ed03ULL));
  k = mix64(k ^ (replica * 0x8cb92ba72f3d8dd7ULL + 0x632be59bd9b4e019ULL));
  return k;
}

// Counter-based generator: output i is mix64(key + i * golden). Two
// streams never share state, so replicas can be generated in any order
// and on any thread with identical results.
class Stream {
 public:
  using result_type = std::uint64_t;

  Stream() = default;
  explicit Stream(std::uint64_t key) : key_(key) {}
  Stream(std::uint64_t master, ModuleId module, std::uint64_t replica)
      : key_(stream_key(master, module, replica)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    ++counter_;
    return mix64(key_ + counter_ * kGolden);
  }

  // Uniform on the open interval (0,1).
  double uniform() noexcept {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double a, double b) noexcept { return a + (b - a) * uniform(); }

  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform()));
    const double th = 2.0 * std::numbers::pi * uniform();
    spare_ = r * std::sin(th);
    has_spare_ = true;
    return r * std::cos(th);
  }

  // Child stream for sub-tasks (e.g. per-path refinement) that must not
  // perturb the parent's sequence.
  Stream split(std::uint64_t tag) const noexcept {
    return Stream(mix64(key_ ^ mix64(tag + 0x2545f4914f6cdd1dULL)));
  }

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace rpl

#endif  // RPL_RNG_HPP
