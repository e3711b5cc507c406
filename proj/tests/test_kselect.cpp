#include <algorithm>
#include <cmath>
#include <fstream>

#include "doctest.h"
#include "rankmon/harness.hpp"
#include "rankmon/kselect.hpp"

using namespace rankmon;

namespace {

std::vector<DataItem> random_items(int n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<DataItem> items;
  items.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) items.push_back(DataItem{rng.range(0, 1 << 24), i});
  return items;
}

Constants frozen_constants() {
#ifdef RANKMON_CONSTANTS_FILE
  std::ifstream probe(RANKMON_CONSTANTS_FILE);
  if (probe) return Constants::load(RANKMON_CONSTANTS_FILE);
#endif
  return Constants{};
}

}  // namespace

TEST_CASE("descent plan arithmetic, phi=1/2") {
  // log2(7*16) = 6.8074 -> h_min 7, alpha 0.8074, j* = round(2^alpha) = 2
  const CofaselPlan p16 = cofasel_plan(0.5, 16, 16);
  CHECK(p16.h_min == 7);
  CHECK(p16.alpha == doctest::Approx(0.8073549220576042).epsilon(1e-9));
  CHECK(p16.j_star == 2);
  CHECK(!p16.clamped);

  // log2(700) = 9.4512 -> h_min 10, j* = round(2^0.4512) = round(1.3672) = 1
  const CofaselPlan p100 = cofasel_plan(0.5, 100, 16);
  CHECK(p100.h_min == 10);
  CHECK(p100.j_star == 1);

  const CofaselPlan p1 = cofasel_plan(0.5, 1, 16);
  CHECK(p1.h_min == 3);
}

TEST_CASE("h_min clamps down to h_max for oversized k") {
  const CofaselPlan p = cofasel_plan(0.5, 1 << 20, 10);
  CHECK(p.h_min == 10);
  CHECK(p.clamped);
}

TEST_CASE("sample params") {
  const SampleParams sp = make_sample_params(0.25, 0.1, 100, 4.0);
  CHECK(sp.sample_size == doctest::Approx(16.0 * std::log(20.0)).epsilon(1e-12));
  CHECK(sp.coin_p == 1.0);  // (4/100)*47.93 > 1 caps at 1
  const SampleParams sp2 = make_sample_params(0.25, 0.1, 10000, 4.0);
  CHECK(sp2.coin_p == doctest::Approx(4.0 / 10000.0 * sp2.sample_size).epsilon(1e-12));
  CHECK(sp2.coin_p > 0.0);
  CHECK(sp2.coin_p <= 1.0);
}

TEST_CASE("single participant: cofasel returns that item") {
  std::vector<DataItem> one = {{17, 0}};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    CostLedger ledger;
    const SelectResult res = run_cofasel(one, 0.5, 8, 1, Rng(seed), ledger);
    CHECK(res.item == one[0]);
  }
}

TEST_CASE("cofasel output always originates from a participant") {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const int n = 2 + static_cast<int>(seed % 60);
    std::vector<DataItem> items = random_items(n, seed + 500);
    CostLedger ledger;
    const SelectResult res = run_cofasel(items, 0.5, 12, 4, Rng(seed), ledger);
    CHECK(std::find(items.begin(), items.end(), res.item) != items.end());
  }
}

TEST_CASE("cofasel lands in [k, 42k] with constant probability (smoke scale)") {
  const int n = 1 << 12;
  const int k = 8;
  const int trials = 500;
  int hits = 0;
  for (int t = 0; t < trials; ++t) {
    std::vector<DataItem> items = random_items(n, 3000 + static_cast<std::uint64_t>(t));
    CostLedger ledger;
    const SelectResult res =
        run_cofasel(items, 0.5, 12, k, Rng(static_cast<std::uint64_t>(t)), ledger);
    const std::int64_t r = oracle_rank(items, res.item);
    if (r >= k && r <= 42 * k) ++hits;
  }
  CHECK(static_cast<double>(hits) / trials >= 0.57);
}

TEST_CASE("cofasel rounds are exactly h_max - h_min + 1") {
  const int n = 1 << 12;
  const int h_max = 12;
  const CofaselPlan plan = cofasel_plan(0.5, 16, h_max);
  std::vector<DataItem> items = random_items(n, 8);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    CostLedger ledger;
    const SelectResult res = run_cofasel(items, 0.5, h_max, 16, Rng(seed), ledger);
    CHECK(!res.meta.extended_descent);
    CHECK(res.cost.rounds == h_max - plan.h_min + 1);
  }
}

TEST_CASE("amplification instance count and round batching") {
  CHECK(amp_instances(24.0, 1.0 / std::exp(1.0)) == 24);
  CHECK(amp_instances(6.0, 0.1) == 14);

  const int n = 1 << 12;
  const int h_max = 12;
  const CofaselPlan plan = cofasel_plan(0.5, 16, h_max);
  std::vector<DataItem> items = random_items(n, 12);
  CostLedger single, amped;
  run_cofasel(items, 0.5, h_max, 16, Rng(5), single);
  const SelectResult amp =
      run_cofasel_amp(items, 0.5, h_max, 16, 0.1, 6.0, Rng(5), amped);
  CHECK(amp.meta.instances == 14);
  // parallel instances share rounds; only the announcement adds one
  CHECK(amped.rounds == single.rounds + 1);
  CHECK(amped.rounds == h_max - plan.h_min + 2);
}

TEST_CASE("amplified messages scale linearly with the instance count") {
  const int n = 1 << 12;
  const int k = 16;
  const int trials = 120;
  const double lambda = 6.0;
  const int r = amp_instances(lambda, 0.1);
  double single_sum = 0.0, amp_sum = 0.0, amp_sumsq = 0.0;
  for (int t = 0; t < trials; ++t) {
    std::vector<DataItem> items = random_items(n, 4000 + static_cast<std::uint64_t>(t));
    CostLedger a, b;
    run_cofasel(items, 0.5, 12, k, Rng(static_cast<std::uint64_t>(t)), a);
    run_cofasel_amp(items, 0.5, 12, k, 0.1, lambda, Rng(static_cast<std::uint64_t>(t) + 9000),
                    b);
    single_sum += static_cast<double>(a.total_messages());
    const double tot = static_cast<double>(b.total_messages()) - 1.0;  // announcement
    amp_sum += tot;
    amp_sumsq += tot * tot;
  }
  const double single_mean = single_sum / trials;
  const double amp_mean = amp_sum / trials;
  const double var = (amp_sumsq - amp_sum * amp_sum / trials) / (trials - 1);
  const double stderr_mean = std::sqrt(var / trials);
  CHECK(std::abs(amp_mean - r * single_mean) <= 3.0 * stderr_mean + 0.05 * r * single_mean);
}

TEST_CASE("median amplification: stricter delta' fails no more often (same seeds)") {
  const int n = 1 << 12;
  const int k = 8;
  const int trials = 300;
  int fail_strict = 0, fail_loose = 0;
  for (int t = 0; t < trials; ++t) {
    std::vector<DataItem> items = random_items(n, 6000 + static_cast<std::uint64_t>(t));
    CostLedger a, b;
    const SelectResult strict =
        run_cofasel_amp(items, 0.5, 12, k, 0.05, 6.0, Rng(static_cast<std::uint64_t>(t)), a);
    const SelectResult loose =
        run_cofasel_amp(items, 0.5, 12, k, 0.3, 6.0, Rng(static_cast<std::uint64_t>(t)), b);
    const std::int64_t rs = oracle_rank(items, strict.item);
    const std::int64_t rl = oracle_rank(items, loose.item);
    fail_strict += (rs < k || rs > 42 * k) ? 1 : 0;
    fail_loose += (rl < k || rl > 42 * k) ? 1 : 0;
  }
  CHECK(fail_strict <= fail_loose);
}

TEST_CASE("p = 1 degenerates to exact selection below the pivot") {
  const int n = 1 << 12;
  const int k = 32;
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    std::vector<DataItem> items = random_items(n, 7000 + seed);
    CostLedger ledger;
    // sample_const huge: coin_p = 1 regardless of k
    const SelectResult res = run_approx_k_select(items, k, 0.5, 0.25, 0.1, 0.1, 12, 6.0,
                                                 1000.0, Rng(seed), ledger);
    const std::int64_t r = oracle_rank(items, res.item);
    if (!res.meta.shortfall) CHECK(r == k);
  }
}

TEST_CASE("approx k-select rounds are h_max - h_min + 3") {
  const int n = 1 << 12;
  const int k = 16;
  const int h_max = 12;
  const CofaselPlan plan = cofasel_plan(0.5, k, h_max);
  std::vector<DataItem> items = random_items(n, 31);
  CostLedger ledger;
  run_approx_k_select(items, k, 0.5, 0.25, 0.1, 0.1, h_max, 6.0, 4.0, Rng(3), ledger);
  CHECK(ledger.rounds == h_max - plan.h_min + 3);
}

TEST_CASE("sample count concentrates around coin_p * |below pivot|") {
  const int n = 1 << 12;
  const int k = 512;  // large k forces coin_p < 1
  const int trials = 200;
  int within = 0;
  for (int t = 0; t < trials; ++t) {
    std::vector<DataItem> items = random_items(n, 8000 + static_cast<std::uint64_t>(t));
    CostLedger ledger;
    const SelectResult res = run_approx_k_select(
        items, k, 0.5, 0.25, 0.1, 0.1, 12, 6.0, 4.0, Rng(static_cast<std::uint64_t>(t)), ledger);
    // the sampler ran below the amplified median pivot
    std::vector<DataItem> outs = res.meta.instance_outputs;
    std::sort(outs.begin(), outs.end());
    const DataItem pivot = outs[(outs.size() - 1) / 2];
    std::int64_t below = 0;
    for (const DataItem& it : items) {
      if (it < pivot) ++below;
    }
    const SampleParams sp = make_sample_params(0.25, 0.1, k, 4.0);
    const double expect = sp.coin_p * static_cast<double>(below);
    if (static_cast<double>(res.meta.samples) >= 0.5 * expect &&
        static_cast<double>(res.meta.samples) <= 2.0 * expect) {
      ++within;
    }
  }
  CHECK(static_cast<double>(within) / trials >= 0.99);
}

TEST_CASE("cofasel messages stay under c' (1/phi)(log(N/k)+1), frozen constant") {
  const Constants consts = frozen_constants();
  Config cfg;
  cfg.n = 1 << 16;
  cfg.phi = 0.5;
  cfg.seed = 171;
  for (int k : {16, 64}) {
    CofaselRunOptions opt;
    opt.k = k;
    opt.trials = 400;
    auto rows = run_cofasel_trials(cfg, opt);
    std::vector<double> totals;
    for (const TrialRow& r : rows) totals.push_back(static_cast<double>(r.messages_total));
    const Aggregate agg = Aggregate::of(totals);
    const double bound =
        consts.c_prime * (1.0 / cfg.phi) *
        (log_inv_phi(static_cast<double>(cfg.n) / static_cast<double>(k), cfg.phi) + 1.0);
    CHECK(agg.mean <= bound + 3.0 * agg.stderr_mean);
  }
}

TEST_CASE("output rank never exceeds 7k log^3(n) (tail bound, 10^4 trials)") {
  Config cfg;
  cfg.n = 1 << 16;
  cfg.phi = 0.5;
  cfg.seed = 181;
  CofaselRunOptions opt;
  opt.k = 16;
  opt.trials = 10000;
  auto rows = run_cofasel_trials(cfg, opt);
  const double log_n = std::log2(static_cast<double>(cfg.n));
  const double tail = 7.0 * 16.0 * log_n * log_n * log_n;
  for (const TrialRow& r : rows) {
    CHECK(static_cast<double>(r.result_rank) <= tail);
  }
}

TEST_CASE("top-k via select cost tracks c1 (k + log2 n), frozen constant") {
  const Constants consts = frozen_constants();
  Config cfg;
  cfg.n = 1 << 16;
  cfg.phi = 0.5;
  cfg.seed = 191;
  TopKRunOptions opt;
  opt.k = 64;
  opt.trials = 250;
  opt.via_select = true;
  auto rows = run_topk_trials(cfg, opt);
  std::vector<double> totals;
  for (const TrialRow& r : rows) {
    CHECK(r.pass);
    totals.push_back(static_cast<double>(r.messages_total));
  }
  const Aggregate agg = Aggregate::of(totals);
  const double bound = consts.c1 * (64.0 + std::log2(static_cast<double>(cfg.n)));
  CHECK(agg.mean <= bound + 3.0 * agg.stderr_mean);
}

TEST_CASE("top-k via select matches the sort oracle and falls back soundly") {
  int fallbacks = 0;
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const int n = 70 + static_cast<int>(seed % 200);
    const int k = 16;
    std::vector<DataItem> items = random_items(n, 9000 + seed);
    std::vector<DataItem> expect = items;
    std::sort(expect.begin(), expect.end());
    expect.resize(static_cast<size_t>(k));

    CostLedger ledger;
    bool fb = false;
    const TopKResult res =
        run_top_k_via_select(items, k, 0.5, 12, 2, Rng(seed), ledger, nullptr, &fb);
    CHECK(!res.failed);
    CHECK(res.items == expect);
    fallbacks += fb ? 1 : 0;
  }
  // small populations make pivot shortfalls likely enough to exercise the
  // fallback path at least once
  CHECK(fallbacks >= 1);
}
