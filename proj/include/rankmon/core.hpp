#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>

namespace rankmon {

using NodeId = std::int32_t;
using Height = int;

// A single observation held by one sensor node. Ordering is lexicographic on
// (value, owner), which makes the global order strict even when raw values
// collide: two items held by distinct nodes never compare equal.
struct DataItem {
  std::int64_t value = 0;
  NodeId owner = 0;

  friend auto operator<=>(const DataItem&, const DataItem&) = default;
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

inline std::uint64_t splitmix_fini(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// SplitMix64 stream with cheap derivation of independent child streams.
// derive() depends only on the stream identity, not on how much has been
// consumed, so (seed, node id, instance id) sub-streams are reproducible and
// order-independent across trials and parallel amplification instances.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : base_(seed), state_(seed) {}

  Rng derive(std::uint64_t tag) const {
    return Rng(splitmix_fini(splitmix_fini(base_ + kGamma * (tag + 1)) + kGamma));
  }

  std::uint64_t u64() {
    state_ += kGamma;
    return splitmix_fini(state_);
  }

  // uniform in [0, 1)
  double real01() { return static_cast<double>(u64() >> 11) * 0x1.0p-53; }

  // uniform in [0, n)
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(u64()) * n) >> 64);
  }

  std::int64_t range(std::int64_t lo, std::int64_t hi) {  // [lo, hi)
    return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo)));
  }

  bool bernoulli(double p) { return real01() < p; }

  std::uint64_t stream_id() const { return base_; }

 private:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;
  std::uint64_t base_;
  std::uint64_t state_;
};

// Fixed tags for deriving purpose-specific sub-streams from a trial stream.
namespace rng_tag {
inline constexpr std::uint64_t kHeights = 1;
inline constexpr std::uint64_t kItems = 2;
inline constexpr std::uint64_t kScenario = 3;
inline constexpr std::uint64_t kSketch = 4;
inline constexpr std::uint64_t kQuery = 5;
inline constexpr std::uint64_t kSampling = 6;
inline constexpr std::uint64_t kReps = 7;
inline constexpr std::uint64_t kRedraw = 8;
inline constexpr std::uint64_t kTrial = 9;
}  // namespace rng_tag

// Geometric level sampler, Pr[h] = phi^(h-1) * (1-phi) for h >= 1.
// Inversion keeps the per-bin pmf exact up to double rounding.
class GeometricSampler {
 public:
  explicit GeometricSampler(double phi) : inv_ln_phi_(1.0 / std::log(phi)) {}

  Height operator()(Rng& rng) const {
    double u;
    do {
      u = rng.real01();
    } while (u <= 0.0);
    return 1 + static_cast<Height>(std::log(u) * inv_ln_phi_);
  }

 private:
  double inv_ln_phi_;
};

Height draw_height(double phi, Rng& rng);
Height clamp_height(Height h, Height h_max);

inline double log_base(double x, double base) { return std::log(x) / std::log(base); }

// log_{1/phi}(x)
inline double log_inv_phi(double x, double phi) { return std::log(x) / -std::log(phi); }

struct NodeState {
  NodeId id = 0;
  DataItem item{};
  Height height = 1;
  bool dirty = false;
};

enum class RefreshStrategy { kOracleMax, kDescendProbe };

struct Config {
  int n = 0;
  double phi = 0.5;
  int h_max = 0;  // 0 -> ceil(log_{1/phi}(n))
  double con = 0.25;
  double eps = 0.25;
  double delta = 0.1;
  double delta_prime = 0.1;
  std::uint64_t seed = 1;
  double amp_factor = 24.0;    // lambda
  double sample_const = 48.0;  // c_s
  RefreshStrategy refresh_strategy = RefreshStrategy::kOracleMax;
  int refill_max_attempts = 12;

  int effective_h_max() const {
    if (h_max > 0) return h_max;
    return static_cast<int>(std::ceil(log_inv_phi(static_cast<double>(n), phi)));
  }

  void validate() const;
};

// 1-based position of d in the sorted order of items. Test oracle; throws if
// d is not among items.
std::int64_t oracle_rank(std::span<const DataItem> items, const DataItem& d);

}  // namespace rankmon
