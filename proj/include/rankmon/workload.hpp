#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "rankmon/core.hpp"
#include "rankmon/queries.hpp"

namespace rankmon {

struct UpdateOp {
  NodeId node = 0;
  std::int64_t value = 0;
};

struct QuerySpec {
  QueryKind kind = QueryKind::kTopK;
  int k = 1;
  double eps = 0.25;
  double delta = 0.1;
};

struct Epoch {
  std::vector<UpdateOp> updates;
  std::optional<QuerySpec> query;
};

// An update-and-query script: epochs applied in order, each a batch of
// updates optionally followed by one query.
struct Scenario {
  int n = 0;
  std::vector<Epoch> epochs;
};

// Per-epoch: m distinct uniformly chosen nodes get fresh uniform values.
Scenario gen_random_updates(int n, int m, int epochs,
                            std::pair<std::int64_t, std::int64_t> value_range,
                            std::uint64_t seed);

// The min-tracking hard instance: value blocks S_0 (size n), S_1..S_T
// (size m) drawn from disjoint integer intervals with every item of S_{t+1}
// below every item of S_t. Epoch 0 assigns S_0 by a random permutation; the
// m nodes holding the initially smallest items take every later epoch's
// updates (a fresh permutation of S_t). Every epoch carries a Top-1 query.
Scenario gen_adversary_min(int n, int m, int epochs, std::uint64_t seed);

// Line-oriented scenario files: header "n T", then per epoch "U <node>
// <value>" lines followed by an optional "Q TOPK k" or "Q KSEL k eps delta".
void write_scenario(const Scenario& s, std::ostream& os);
Scenario read_scenario(std::istream& is);  // throws ConfigError on malformed input

// Analysis cross-check of the per-height response counts: geometric run
// lengths G_h with success probability phi^h, thinned by coins with
// p_h = phi^(h-1)(1-phi)/(1-phi^h). Expected value per height is
// (1-phi)/phi below log_{1/phi}(N); the tail is one Bernoulli experiment
// over N nodes with success probability phi^(H-1).
struct GeocoinStats {
  std::vector<double> mean_per_height;  // index 0 -> h = 1
  double tail_mean = 0.0;
  double expected_per_height = 0.0;  // (1-phi)/phi
  double tail_bound = 0.0;           // 1/phi
};

GeocoinStats geocoin_check(double phi, std::int64_t num_nodes, int trials,
                           std::uint64_t seed);

}  // namespace rankmon
