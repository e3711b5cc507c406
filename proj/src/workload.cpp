#include "rankmon/workload.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace rankmon {

namespace {

// m distinct indices from [0, n) via partial Fisher-Yates over a persistent
// permutation; swaps are undone afterwards so epochs stay independent.
void sample_distinct(std::vector<NodeId>& perm, int m, Rng& rng, std::vector<NodeId>& out) {
  const int n = static_cast<int>(perm.size());
  out.clear();
  std::vector<std::pair<int, int>> swaps;
  swaps.reserve(static_cast<size_t>(m));
  for (int i = 0; i < m; ++i) {
    const int j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(n - i)));
    std::swap(perm[static_cast<size_t>(i)], perm[static_cast<size_t>(j)]);
    swaps.emplace_back(i, j);
    out.push_back(perm[static_cast<size_t>(i)]);
  }
  for (auto it = swaps.rbegin(); it != swaps.rend(); ++it) {
    std::swap(perm[static_cast<size_t>(it->first)], perm[static_cast<size_t>(it->second)]);
  }
}

}  // namespace

Scenario gen_random_updates(int n, int m, int epochs,
                            std::pair<std::int64_t, std::int64_t> value_range,
                            std::uint64_t seed) {
  if (m > n) throw ConfigError("gen_random_updates: m > n");
  Scenario s;
  s.n = n;
  s.epochs.resize(static_cast<size_t>(epochs));
  Rng rng = Rng(seed).derive(rng_tag::kScenario);
  std::vector<NodeId> perm(static_cast<size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<NodeId> chosen;
  for (Epoch& ep : s.epochs) {
    sample_distinct(perm, m, rng, chosen);
    ep.updates.reserve(static_cast<size_t>(m));
    for (NodeId id : chosen) {
      ep.updates.push_back(UpdateOp{id, rng.range(value_range.first, value_range.second)});
    }
  }
  return s;
}

Scenario gen_adversary_min(int n, int m, int epochs, std::uint64_t seed) {
  if (m > n) throw ConfigError("gen_adversary_min: m > n");
  if (epochs < 1) throw ConfigError("gen_adversary_min: need at least one epoch");
  Scenario s;
  s.n = n;
  s.epochs.resize(static_cast<size_t>(epochs) + 1);
  Rng rng = Rng(seed).derive(rng_tag::kScenario);

  const std::int64_t mm = m;
  // S_t for t >= 1 occupies [(T-t)*m, (T-t+1)*m); S_0 sits above them all.
  const std::int64_t s0_base = static_cast<std::int64_t>(epochs) * mm;

  std::vector<std::int64_t> offsets(static_cast<size_t>(n));
  std::iota(offsets.begin(), offsets.end(), 0);
  for (size_t i = offsets.size(); i > 1; --i) {
    std::swap(offsets[i - 1], offsets[rng.below(i)]);
  }

  Epoch& init = s.epochs[0];
  init.updates.reserve(static_cast<size_t>(n));
  std::vector<std::pair<std::int64_t, NodeId>> assigned;
  assigned.reserve(static_cast<size_t>(n));
  for (NodeId id = 0; id < n; ++id) {
    const std::int64_t v = s0_base + offsets[static_cast<size_t>(id)];
    init.updates.push_back(UpdateOp{id, v});
    assigned.emplace_back(v, id);
  }
  init.query = QuerySpec{QueryKind::kTopK, 1, 0.0, 0.0};

  // the m initially smallest nodes take every later epoch's updates
  std::sort(assigned.begin(), assigned.end());
  std::vector<NodeId> targets;
  targets.reserve(static_cast<size_t>(m));
  for (int i = 0; i < m; ++i) targets.push_back(assigned[static_cast<size_t>(i)].second);

  std::vector<std::int64_t> block(static_cast<size_t>(m));
  for (int t = 1; t <= epochs; ++t) {
    Epoch& ep = s.epochs[static_cast<size_t>(t)];
    const std::int64_t base = static_cast<std::int64_t>(epochs - t) * mm;
    std::iota(block.begin(), block.end(), base);
    for (size_t i = block.size(); i > 1; --i) {
      std::swap(block[i - 1], block[rng.below(i)]);
    }
    ep.updates.reserve(static_cast<size_t>(m));
    for (int i = 0; i < m; ++i) {
      ep.updates.push_back(UpdateOp{targets[static_cast<size_t>(i)], block[static_cast<size_t>(i)]});
    }
    ep.query = QuerySpec{QueryKind::kTopK, 1, 0.0, 0.0};
  }
  return s;
}

void write_scenario(const Scenario& s, std::ostream& os) {
  os << s.n << ' ' << s.epochs.size() << '\n';
  for (const Epoch& ep : s.epochs) {
    for (const UpdateOp& u : ep.updates) {
      os << "U " << u.node << ' ' << u.value << '\n';
    }
    if (ep.query) {
      if (ep.query->kind == QueryKind::kTopK) {
        os << "Q TOPK " << ep.query->k << '\n';
      } else {
        os << "Q KSEL " << ep.query->k << ' ' << ep.query->eps << ' ' << ep.query->delta
           << '\n';
      }
    }
    os << "E\n";
  }
}

Scenario read_scenario(std::istream& is) {
  Scenario s;
  std::size_t epochs = 0;
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("scenario: missing header");
  {
    std::istringstream hs(line);
    if (!(hs >> s.n >> epochs) || s.n < 1) throw ConfigError("scenario: bad header");
  }
  s.epochs.resize(epochs);
  std::size_t at = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (at >= epochs) throw ConfigError("scenario: more epochs than declared");
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "U") {
      UpdateOp u;
      if (!(ls >> u.node >> u.value) || u.node < 0 || u.node >= s.n) {
        throw ConfigError("scenario: bad update line: " + line);
      }
      s.epochs[at].updates.push_back(u);
    } else if (tag == "Q") {
      std::string kind;
      QuerySpec q;
      if (!(ls >> kind >> q.k) || q.k < 1) throw ConfigError("scenario: bad query line: " + line);
      if (kind == "TOPK") {
        q.kind = QueryKind::kTopK;
      } else if (kind == "KSEL") {
        q.kind = QueryKind::kKSelect;
        if (!(ls >> q.eps >> q.delta)) throw ConfigError("scenario: bad KSEL line: " + line);
      } else {
        throw ConfigError("scenario: unknown query kind: " + kind);
      }
      s.epochs[at].query = q;
    } else if (tag == "E") {
      ++at;
    } else {
      throw ConfigError("scenario: unknown line tag: " + tag);
    }
  }
  if (at != epochs) throw ConfigError("scenario: fewer epochs than declared");
  return s;
}

namespace {

// failures before the first success, Geom(p)
std::int64_t geometric_failures(double p, Rng& rng) {
  if (p >= 1.0) return 0;
  double u;
  do {
    u = rng.real01();
  } while (u <= 0.0);
  return static_cast<std::int64_t>(std::log(u) / std::log1p(-p));
}

// Exact Binomial(n, q) by skip-sampling the gaps between successes;
// O(successes) expected work regardless of n.
std::int64_t binomial_skip(std::int64_t n, double q, Rng& rng) {
  if (n <= 0 || q <= 0.0) return 0;
  if (q >= 1.0) return n;
  const double inv_log = 1.0 / std::log1p(-q);
  std::int64_t successes = 0;
  std::int64_t pos = 0;
  while (true) {
    double u;
    do {
      u = rng.real01();
    } while (u <= 0.0);
    pos += static_cast<std::int64_t>(std::log(u) * inv_log) + 1;
    if (pos > n) break;
    ++successes;
  }
  return successes;
}

}  // namespace

GeocoinStats geocoin_check(double phi, std::int64_t num_nodes, int trials,
                           std::uint64_t seed) {
  GeocoinStats stats;
  stats.expected_per_height = (1.0 - phi) / phi;
  stats.tail_bound = 1.0 / phi;

  const double big_h = log_inv_phi(static_cast<double>(num_nodes), phi);
  const int heights = std::max(1, static_cast<int>(std::ceil(big_h)) - 1);
  stats.mean_per_height.assign(static_cast<size_t>(heights), 0.0);

  const double p_tail = std::min(1.0, std::pow(phi, big_h - 1.0));
  Rng rng(seed);
  double tail_sum = 0.0;
  for (int t = 0; t < trials; ++t) {
    Rng trial_rng = rng.derive(static_cast<std::uint64_t>(t));
    for (int h = 1; h <= heights; ++h) {
      const double p_geo = std::pow(phi, static_cast<double>(h));
      const std::int64_t g = geometric_failures(p_geo, trial_rng);
      const double p_bin =
          std::pow(phi, static_cast<double>(h - 1)) * (1.0 - phi) / (1.0 - p_geo);
      stats.mean_per_height[static_cast<size_t>(h - 1)] +=
          static_cast<double>(binomial_skip(g, p_bin, trial_rng));
    }
    tail_sum += static_cast<double>(binomial_skip(num_nodes, p_tail, trial_rng));
  }
  for (double& v : stats.mean_per_height) v /= static_cast<double>(trials);
  stats.tail_mean = tail_sum / static_cast<double>(trials);
  return stats;
}

}  // namespace rankmon
