#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "rankmon/harness.hpp"

using namespace rankmon;

TEST_CASE("aggregate recomputation matches") {
  const double xs[] = {3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0};
  const Aggregate a = Aggregate::of(xs);
  CHECK(a.count == 8);
  CHECK(a.mean == doctest::Approx(31.0 / 8.0));
  CHECK(a.min == 1.0);
  CHECK(a.max == 9.0);
  double ss = 0.0;
  for (double x : xs) ss += (x - a.mean) * (x - a.mean);
  CHECK(a.variance == doctest::Approx(ss / 7.0));
  CHECK(a.stderr_mean == doctest::Approx(std::sqrt(a.variance / 8.0)));
}

TEST_CASE("csv golden schema") {
  CHECK(csv_header() ==
        "trial,seed,protocol,n,phi,k,m,messages_unicast,messages_broadcast,"
        "messages_total,rounds,verdict,fallback_used,result_rank");
  TrialRow r;
  r.trial = 3;
  r.seed = 12345;
  r.protocol = "topk";
  r.n = 64;
  r.phi = 0.5;
  r.k = 4;
  r.m = 0;
  r.messages_unicast = 10;
  r.messages_broadcast = 7;
  r.messages_total = 17;
  r.rounds = 7;
  r.pass = true;
  r.fallback_used = false;
  r.result_rank = 4;
  const TrialRow rows[] = {r};
  CHECK(rows_to_csv(rows) ==
        csv_header() + std::string("\n3,12345,topk,64,0.5,4,0,10,7,17,7,pass,0,4\n"));
}

TEST_CASE("experiment CSV is byte-identical across reruns") {
  Config cfg;
  cfg.n = 256;
  cfg.phi = 0.5;
  cfg.seed = 11;
  TopKRunOptions opt;
  opt.k = 8;
  opt.trials = 20;
  const std::string a = rows_to_csv(run_topk_trials(cfg, opt));
  const std::string b = rows_to_csv(run_topk_trials(cfg, opt));
  CHECK(a == b);
  CHECK(a.substr(0, a.find('\n')) == csv_header());
}

TEST_CASE("aggregates recomputable from per-trial rows") {
  Config cfg;
  cfg.n = 512;
  cfg.seed = 21;
  TopKRunOptions opt;
  opt.k = 4;
  opt.trials = 40;
  const auto rows = run_topk_trials(cfg, opt);
  std::vector<double> totals;
  for (const TrialRow& r : rows) {
    CHECK(r.messages_total == r.messages_unicast + r.messages_broadcast);
    totals.push_back(static_cast<double>(r.messages_total));
  }
  const Aggregate agg = Aggregate::of(totals);
  double mean = 0.0;
  for (double t : totals) mean += t;
  mean /= static_cast<double>(totals.size());
  CHECK(agg.mean == doctest::Approx(mean));
}

TEST_CASE("rank oracle stays in sync with batched updates") {
  Rng rng(31);
  std::vector<DataItem> items;
  for (int i = 0; i < 500; ++i) items.push_back(DataItem{rng.range(0, 1000), i});
  RankOracle oracle;
  oracle.reset(items);
  CHECK(oracle.checksum() == items_checksum(items));

  for (int round = 0; round < 20; ++round) {
    std::vector<DataItem> rem, add;
    for (int j = 0; j < 30; ++j) {
      const size_t at = rng.below(items.size());
      rem.push_back(items[at]);
      items[at].value = rng.range(0, 1000);
      add.push_back(items[at]);
    }
    oracle.apply(rem, add);
    CHECK(oracle.checksum() == items_checksum(items));
    // rank answers agree with a linear count
    const DataItem probe = items[rng.below(items.size())];
    CHECK(oracle.rank_of(probe) == oracle_rank(items, probe));
  }
}

TEST_CASE("verify_top_k and window verdicts") {
  std::vector<DataItem> sorted = {{1, 0}, {2, 1}, {3, 2}, {4, 3}};
  std::vector<DataItem> good = {{1, 0}, {2, 1}};
  std::vector<DataItem> bad = {{1, 0}, {3, 2}};
  CHECK(verify_top_k(good, sorted, 2));
  CHECK(!verify_top_k(bad, sorted, 2));
  CHECK(!verify_top_k(good, sorted, 3));
}

TEST_CASE("constants round-trip through JSON") {
  Constants c;
  c.c3 = 1.75;
  c.lambda = 7.0;
  c.tol_position = 0.62;
  const std::string path = "test_constants_tmp.json";
  c.save(path);
  const Constants back = Constants::load(path);
  CHECK(back.c3 == doctest::Approx(1.75));
  CHECK(back.lambda == doctest::Approx(7.0));
  CHECK(back.tol_position == doctest::Approx(0.62));
  std::remove(path.c_str());
  CHECK_THROWS_AS(Constants::load("does_not_exist.json"), ConfigError);
}

TEST_CASE("refresh rows carry the m column and restored verdicts") {
  Config cfg;
  cfg.n = 1 << 12;
  cfg.seed = 77;
  const auto rows = run_refresh_trials(cfg, 32, 3, 4);
  CHECK(rows.size() == 12);
  for (const TrialRow& r : rows) {
    CHECK(r.protocol == "refresh");
    CHECK(r.m == 32);
    CHECK(r.pass);
  }
}
