// Seeded random streams. All sampling primitives are hand-rolled on top of
// std::mt19937_64 so that runs are bit-reproducible across standard library
// implementations (std::*_distribution outputs are not pinned by the
// standard, mt19937_64 itself is).
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace epgrad {

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}
}  // namespace detail

// Named substreams of a run seed. Keeping the ids stable is what makes a run
// reproducible when unrelated stages add or drop random draws.
enum class Stream : std::uint64_t {
  kDataGen = 1,
  kTaskSplit = 2,
  kNoise = 3,
  kInit = 4,  // trunk + pretext head
  kBatching = 5,
  kActionSampling = 6,
  kPretrain = 7,
  kContinualInit = 8,  // adapter factors + continual head extensions
};

class Rng {
 public:
  explicit Rng(std::uint64_t seed)
      : seed_(seed), gen_(detail::splitmix64(seed)) {}

  // Independent stream derived from this rng's seed; drawing from one stream
  // never perturbs another.
  Rng substream(Stream s) const {
    return Rng(detail::splitmix64(seed_ ^ (0xA5A5A5A5A5A5A5A5ULL +
                                           static_cast<std::uint64_t>(s))));
  }

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Unbiased integer in [0, n) via rejection.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("Rng::below: n must be positive");
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  // Box-Muller with a cached spare.
  double normal(double mu = 0.0, double sigma = 1.0) {
    if (has_spare_) {
      has_spare_ = false;
      return mu + spare_ * sigma;
    }
    const double u = 1.0 - uniform();  // (0, 1], keeps log finite
    const double v = uniform();
    const double r = std::sqrt(-2.0 * std::log(u));
    const double theta = 2.0 * M_PI * v;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return mu + r * std::cos(theta) * sigma;
  }

  // Inverse-CDF draw from a length-k probability vector.
  int categorical(const double* probs, int k) {
    const double u = uniform();
    double cum = 0.0;
    for (int i = 0; i < k; ++i) {
      cum += probs[i];
      if (u < cum) return i;
    }
    return k - 1;  // guards against cum < 1 from rounding
  }

  // Fisher-Yates; identical permutation for identical seeds everywhere.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace epgrad
