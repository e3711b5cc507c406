#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "rankmon/topk.hpp"

using namespace rankmon;

namespace {

std::vector<DataItem> random_items(int n, std::uint64_t seed, std::int64_t range = 1 << 20) {
  Rng rng(seed);
  std::vector<DataItem> items;
  items.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) items.push_back(DataItem{rng.range(0, range), i});
  return items;
}

std::vector<DataItem> smallest_k(std::vector<DataItem> items, int k) {
  std::sort(items.begin(), items.end());
  items.resize(static_cast<size_t>(std::min<size_t>(items.size(), static_cast<size_t>(k))));
  return items;
}

}  // namespace

TEST_CASE("single participant, k=1") {
  std::vector<DataItem> items = {{42, 0}};
  TopKOptions opt;
  opt.k = 1;
  opt.h_max = 4;
  CostLedger ledger;
  const TopKResult res = run_top_k(items, opt, Rng(1), ledger);
  CHECK(!res.failed);
  REQUIRE(res.items.size() == 1);
  CHECK(res.items[0] == items[0]);
}

TEST_CASE("k beyond the participant count fails with the full sorted list") {
  std::vector<DataItem> items = random_items(5, 77);
  TopKOptions opt;
  opt.k = 9;
  opt.h_max = 4;
  CostLedger ledger;
  const TopKResult res = run_top_k(items, opt, Rng(2), ledger);
  CHECK(res.failed);
  CHECK(res.items == smallest_k(items, 5));
}

TEST_CASE("output equals the sort oracle's k smallest on random instances") {
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const int n = 1 + static_cast<int>(seed % 7) * 50;
    const int k = 1 + static_cast<int>(seed % 5) * 3;
    // narrow range exercises duplicate values
    std::vector<DataItem> items = random_items(n, seed * 131 + 7, 64);
    TopKOptions opt;
    opt.k = std::min(k, n);
    opt.phi = seed % 2 == 0 ? 0.5 : 0.25;
    opt.h_max = 14;
    CostLedger ledger;
    const TopKResult res = run_top_k(items, opt, Rng(seed), ledger);
    CHECK(!res.failed);
    CHECK(res.items == smallest_k(items, opt.k));
  }
}

TEST_CASE("strict walk matches the early-exit output at higher cost") {
  std::vector<DataItem> items = random_items(512, 9);
  TopKOptions opt;
  opt.k = 16;
  opt.h_max = 9;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    CostLedger a, b;
    TopKOptions strict = opt;
    strict.strict_walk = true;
    const TopKResult r1 = run_top_k(items, opt, Rng(seed), a);
    const TopKResult r2 = run_top_k(items, strict, Rng(seed), b);
    CHECK(r1.items == r2.items);
    CHECK(b.rounds >= a.rounds);
  }
}

TEST_CASE("no node responds twice within one walk") {
  std::vector<DataItem> items = random_items(256, 5);
  TopKOptions opt;
  opt.k = 32;
  opt.h_max = 8;
  CostLedger ledger;
  EventTrace trace;
  run_top_k(items, opt, Rng(3), ledger, &trace);
  std::set<NodeId> seen;
  for (const auto& row : trace.rows()) {
    if (row.kind != EventKind::kUnicast) continue;
    CHECK(seen.insert(row.node).second);
  }
}

TEST_CASE("emission happens in ascending rank order") {
  // the result list itself must be ascending (in-order walk property)
  std::vector<DataItem> items = random_items(300, 21);
  TopKOptions opt;
  opt.k = 40;
  opt.h_max = 9;
  CostLedger ledger;
  const TopKResult res = run_top_k(items, opt, Rng(4), ledger);
  CHECK(std::is_sorted(res.items.begin(), res.items.end()));
}

TEST_CASE("message bound: mean responses <= k + ((1-phi)/phi) log_{1/phi} N + 1") {
  const int n = 1024;
  const int k = 8;
  const int trials = 400;
  for (double phi : {0.25, 0.5, 0.75}) {
    TopKOptions opt;
    opt.k = k;
    opt.phi = phi;
    opt.h_max = static_cast<int>(std::ceil(log_inv_phi(n, phi)));
    double sum = 0.0, sumsq = 0.0;
    for (int t = 0; t < trials; ++t) {
      std::vector<DataItem> items = random_items(n, 900 + static_cast<std::uint64_t>(t));
      CostLedger ledger;
      run_top_k(items, opt, Rng(static_cast<std::uint64_t>(t)), ledger);
      sum += static_cast<double>(ledger.unicasts);
      sumsq += static_cast<double>(ledger.unicasts) * static_cast<double>(ledger.unicasts);
    }
    const double mean = sum / trials;
    const double var = (sumsq - sum * sum / trials) / (trials - 1);
    const double stderr_mean = std::sqrt(var / trials);
    const double bound = k + (1.0 - phi) / phi * log_inv_phi(n, phi) + 1.0;
    CHECK(mean <= bound + 3.0 * stderr_mean);
  }
}

TEST_CASE("round bound: mean rounds <= 2(phi k + h_max) + 4 at phi = 1/2") {
  const int n = 4096;
  const int k = 10;
  const int trials = 800;
  TopKOptions opt;
  opt.k = k;
  opt.phi = 0.5;
  opt.h_max = 12;
  double sum = 0.0;
  for (int t = 0; t < trials; ++t) {
    std::vector<DataItem> items = random_items(n, 1700 + static_cast<std::uint64_t>(t));
    CostLedger ledger;
    run_top_k(items, opt, Rng(static_cast<std::uint64_t>(t) + 31), ledger);
    sum += static_cast<double>(ledger.rounds);
  }
  const double mean = sum / trials;
  CHECK(mean <= 2.0 * (opt.phi * k + opt.h_max) + 4.0);
}
