#include "rankmon/core.hpp"

#include <sstream>

namespace rankmon {

Height draw_height(double phi, Rng& rng) {
  GeometricSampler sampler(phi);
  return sampler(rng);
}

Height clamp_height(Height h, Height h_max) { return h < h_max ? h : h_max; }

void Config::validate() const {
  std::ostringstream err;
  if (n < 1) {
    err << "n must be >= 1 (got " << n << ")";
  } else if (!(phi > 0.0 && phi < 1.0)) {
    err << "phi must lie in (0,1) (got " << phi << ")";
  } else if (!(eps > 0.0 && eps < 1.0)) {
    err << "eps must lie in (0,1) (got " << eps << ")";
  } else if (!(delta > 0.0 && delta < 1.0)) {
    err << "delta must lie in (0,1) (got " << delta << ")";
  } else if (!(delta_prime > 0.0 && delta_prime < 1.0)) {
    err << "delta_prime must lie in (0,1) (got " << delta_prime << ")";
  } else if (con <= 0.0) {
    err << "con must be positive (got " << con << ")";
  } else if (amp_factor <= 0.0) {
    err << "amp_factor must be positive";
  } else if (sample_const <= 0.0) {
    err << "sample_const must be positive";
  } else if (h_max != 0 && h_max < static_cast<int>(std::ceil(log_inv_phi(n, phi)))) {
    err << "h_max must be >= ceil(log_{1/phi}(n)) = "
        << static_cast<int>(std::ceil(log_inv_phi(n, phi))) << " (got " << h_max << ")";
  } else if (refill_max_attempts < 2) {
    err << "refill_max_attempts must be >= 2";
  }
  const std::string msg = err.str();
  if (!msg.empty()) throw ConfigError(msg);
}

std::int64_t oracle_rank(std::span<const DataItem> items, const DataItem& d) {
  std::int64_t below = 0;
  bool present = false;
  for (const DataItem& it : items) {
    if (it < d) {
      ++below;
    } else if (it == d) {
      present = true;
    }
  }
  if (!present) throw std::invalid_argument("oracle_rank: item not among inputs");
  return below + 1;
}

}  // namespace rankmon
