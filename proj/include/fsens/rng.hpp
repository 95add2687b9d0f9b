#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>

namespace fsens::rng {

// Mixes a root seed with a list of stream tags (SplitMix64 finalizer applied
// per tag). Every random stream in the library is derived this way, so a
// single root seed fixes folds, restarts, forests and simulated data.
std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> tags);

// Philox4x32-10 counter-based generator. The 64-bit key is the stream seed and
// the 128-bit counter advances by one per block of four 32-bit words, so the
// sequence depends only on (seed, position) and is identical on every
// platform.
class Philox {
 public:
  using result_type = std::uint64_t;

  explicit Philox(std::uint64_t seed, std::uint64_t stream = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  result_type operator()();

  // Uniform on the open interval (0, 1) with 53 random bits.
  double uniform();
  // Standard normal via Box-Muller; the second variate of each pair is cached.
  double normal();
  // Uniform integer in [0, bound) by Lemire's multiply-shift rejection.
  std::uint64_t below(std::uint64_t bound);

 private:
  void refill();

  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> counter_;
  std::array<std::uint32_t, 4> block_{};
  int used_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace fsens::rng
