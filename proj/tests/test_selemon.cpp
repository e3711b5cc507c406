#include <algorithm>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "rankmon/harness.hpp"
#include "rankmon/selemon.hpp"

using namespace rankmon;

namespace {

// desk-scale geometry used throughout: n=2^16, phi=1/2, C=1/4, h_max=16
SketchParams desk_params() { return SketchParams::make(1 << 16, 0.5, 0.25, 16); }

Constants test_constants() {
#ifdef RANKMON_CONSTANTS_FILE
  std::ifstream probe(RANKMON_CONSTANTS_FILE);
  if (probe) return Constants::load(RANKMON_CONSTANTS_FILE);
#endif
  return Constants{};
}

struct Sim {
  Network net;
  SeleMon mon;
  CostLedger ledger;

  explicit Sim(std::uint64_t seed, int n = 1 << 16,
               RefreshStrategy strategy = RefreshStrategy::kOracleMax)
      : net(n),
        mon(net, SketchParams::make(n, 0.5, 0.25, 16), Rng(seed).derive(rng_tag::kSketch),
            strategy) {
    Rng items_rng = Rng(seed).derive(rng_tag::kItems);
    for (int i = 0; i < n; ++i) {
      net.set_item(i, DataItem{items_rng.range(0, std::int64_t{1} << 40), i});
    }
    net.clear_dirty();
    mon.initialize(ledger);
  }

  std::vector<DataItem> sorted_items() const {
    std::vector<DataItem> items;
    for (const NodeState& ns : net.nodes()) items.push_back(ns.item);
    std::sort(items.begin(), items.end());
    return items;
  }
};

}  // namespace

TEST_CASE("desk-scale geometry") {
  const SketchParams p = desk_params();
  CHECK(p.unit == doctest::Approx(4.0));
  CHECK(p.levels == 3);
  CHECK(p.rank_boundary(0) == doctest::Approx(1.0));
  CHECK(p.rank_boundary(1) == doctest::Approx(256.0));
  CHECK(p.rank_boundary(2) == doctest::Approx(65536.0));
  CHECK(!p.structurally_empty(0));
  CHECK(!p.structurally_empty(1));
  CHECK(p.structurally_empty(2));

  CHECK(p.height_band(0, 1).lo == doctest::Approx(3.0));
  CHECK(p.height_band(0, 1).hi == doctest::Approx(5.0));
  CHECK(p.height_band(0, 2).hi == doctest::Approx(7.0));
  CHECK(p.height_band(1, 1).lo == doctest::Approx(11.0));
  CHECK(p.height_band(1, 2).hi == doctest::Approx(15.0));
  CHECK(p.class_height_range(1).lo == doctest::Approx(8.0));
  CHECK(p.class_height_range(1).hi == doctest::Approx(16.0));
}

TEST_CASE("classify_height: bands are half-open (lo, hi]") {
  const SketchParams p = desk_params();
  CHECK(p.classify_height(4) == std::make_pair(0, 1));
  CHECK(p.classify_height(5) == std::make_pair(0, 1));  // upper endpoint included
  CHECK(p.classify_height(2) == std::nullopt);
  CHECK(p.classify_height(3) == std::nullopt);  // lower endpoint excluded
  CHECK(p.classify_height(6) == std::make_pair(0, 2));
  CHECK(p.classify_height(8) == std::nullopt);  // tau=3 band is not materialized
  CHECK(p.classify_height(12) == std::make_pair(1, 1));
  CHECK(p.classify_height(14) == std::make_pair(1, 2));
  CHECK(p.classify_height(16) == std::nullopt);
}

TEST_CASE("class_of_height and level_for_rank") {
  const SketchParams p = desk_params();
  CHECK(p.class_of_height(1) == 0);
  CHECK(p.class_of_height(8) == 0);
  CHECK(p.class_of_height(9) == 1);
  CHECK(p.class_of_height(16) == 1);
  CHECK(p.level_for_rank(1) == 1);
  CHECK(p.level_for_rank(255) == 1);
  CHECK(p.level_for_rank(256) == 2);
  CHECK(p.level_for_rank(65535) == 2);
  CHECK(p.level_for_rank(65536) == 3);
}

TEST_CASE("initialize fills every non-sentinel level and clears dirty") {
  Sim sim(101);
  CHECK(sim.mon.initialized());
  CHECK(!sim.net.any_dirty());
  for (int l = 0; l < sim.mon.sketch().level_count(); ++l) {
    const LevelState& st = sim.mon.sketch().level(l);
    if (st.sentinel) continue;
    CHECK(st.filled);
    CHECK(st.alarm.has_value());
    CHECK(st.rep.has_value());
  }
  // representatives came from their own sub-class bands
  const SketchParams& p = sim.mon.params();
  for (int l : {0, 1}) {
    const LevelState& st = sim.mon.sketch().level(l);
    CHECK(p.height_band(l, 1).contains(st.alarm->height));
    CHECK(p.height_band(l, 2).contains(st.rep->height));
  }
  CHECK(sim.ledger.total_messages() > 0);
}

TEST_CASE("stored entries keep the smallest item seen per height") {
  Sim sim(303);
  const RankSketch& sk = sim.mon.sketch();
  for (Height h = 1; h <= sk.h_max(); ++h) {
    const auto& e = sk.entry_at(h);
    if (!e) continue;
    CHECK(e->height == h);
    CHECK(e->item.owner >= 0);
  }
  // every sub-class member set matches the by-height contents
  for (int l : {0, 1}) {
    for (int tau : {1, 2}) {
      for (const SketchEntry* e : sk.subclass_members(l, tau)) {
        CHECK(sim.mon.params().height_band(l, tau).contains(e->height));
      }
    }
  }
}

TEST_CASE("keep-smallest: stored entries undercut every responder at their height") {
  // Replay oracle over the event trace of a single-attempt INITIALIZE (one
  // probe round per height): the stored entry at height h must be the
  // smallest response of that height's round. Retry attempts are excluded
  // on purpose: they deliberately leave filled levels' entries alone.
  const int n = 1 << 12;
  const int h_max = 12;
  bool found_single_attempt = false;
  for (std::uint64_t seed = 0; seed < 64 && !found_single_attempt; ++seed) {
    Network net(n);
    Rng items_rng = Rng(seed).derive(rng_tag::kItems);
    for (int i = 0; i < n; ++i) {
      net.set_item(i, DataItem{items_rng.range(0, std::int64_t{1} << 40), i});
    }
    net.clear_dirty();
    SeleMon mon(net, SketchParams::make(n, 0.5, 0.25, h_max),
                Rng(seed).derive(rng_tag::kSketch));
    CostLedger ledger;
    EventTrace trace;
    mon.initialize(ledger, &trace);

    int probe_rounds = 0;
    for (const auto& row : trace.rows()) {
      if (row.kind == EventKind::kBroadcast && row.payload.rfind("probe", 0) == 0) {
        ++probe_rounds;
      }
    }
    if (probe_rounds != h_max) continue;  // took more than one attempt
    found_single_attempt = true;

    std::int64_t current_round = -1;
    int current_height = -1;
    std::int64_t round_min = std::numeric_limits<std::int64_t>::max();
    int checked = 0;
    auto flush = [&] {
      if (current_height < 1 || current_height > h_max) return;
      if (round_min == std::numeric_limits<std::int64_t>::max()) return;
      const auto& e = mon.sketch().entry_at(static_cast<Height>(current_height));
      REQUIRE(e.has_value());
      CHECK(e->item.value == round_min);
      ++checked;
    };
    for (const auto& row : trace.rows()) {
      if (row.kind == EventKind::kBroadcast) {
        flush();
        const std::string& p = row.payload;
        const auto at = p.find("h=");
        current_height = at == std::string::npos ? -1 : std::stoi(p.substr(at + 2));
        current_round = row.round;
        round_min = std::numeric_limits<std::int64_t>::max();
      } else if (row.round == current_round) {
        round_min = std::min(round_min, static_cast<std::int64_t>(std::stoll(row.payload)));
      }
    }
    flush();
    CHECK(checked > 0);
  }
  CHECK(found_single_attempt);
}

TEST_CASE("initialize cost tracks c2 * 2 log2 n") {
  const Constants consts = test_constants();
  Config cfg;
  cfg.n = 1 << 16;
  cfg.phi = 0.5;
  cfg.seed = 404;
  auto rows = run_selemon_init_trials(cfg, 120, {});
  double mean = 0.0;
  int count = 0;
  for (const TrialRow& r : rows) {
    if (r.protocol != "selemon-init") continue;
    mean += static_cast<double>(r.messages_total);
    ++count;
  }
  mean /= count;
  CHECK(mean <= consts.c2 * 2.0 * std::log2(65536.0));
}

TEST_CASE("update without a trigger costs nothing") {
  Sim sim(77);
  // a node whose height sits below every representative band and whose new
  // value stays above every alarm
  NodeId victim = -1;
  for (const NodeState& ns : sim.net.nodes()) {
    if (ns.height == 1 && !sim.mon.sketch().has_entry_of(ns.id)) {
      victim = ns.id;
      break;
    }
  }
  REQUIRE(victim >= 0);
  CostLedger ledger;
  sim.mon.update(victim, DataItem{std::int64_t{1} << 41, victim}, ledger);
  CHECK(ledger.total_messages() == 0);
  CHECK(sim.net.node(victim).dirty);
}

TEST_CASE("update to the node holding r_l sends one notice and unfills the level") {
  Sim sim(55);
  const LevelState& st = sim.mon.sketch().level(1);
  REQUIRE(st.filled);
  const NodeId owner = st.rep->item.owner;
  CostLedger ledger;
  sim.mon.update(owner, DataItem{std::int64_t{1} << 41, owner}, ledger);
  CHECK(ledger.unicasts == 1);
  CHECK(ledger.broadcasts == 0);
  CHECK(!sim.mon.sketch().level(1).filled);
  // entries of the whole class range were dropped
  const SketchParams& p = sim.mon.params();
  for (Height h = 1; h <= 16; ++h) {
    if (p.class_height_range(1).contains(h)) {
      CHECK(!sim.mon.sketch().entry_at(h).has_value());
    }
  }
}

TEST_CASE("an updated node's stored entry leaves the sketch") {
  Sim sim(808);
  NodeId owner = -1;
  for (Height h = 1; h <= 16; ++h) {
    const auto& e = sim.mon.sketch().entry_at(h);
    if (e) {
      owner = e->item.owner;
      break;
    }
  }
  REQUIRE(owner >= 0);
  CostLedger ledger;
  sim.mon.update(owner, DataItem{std::int64_t{1} << 41, owner}, ledger);
  for (Height h = 1; h <= 16; ++h) {
    const auto& e = sim.mon.sketch().entry_at(h);
    if (e) CHECK(e->item.owner != owner);
  }
}

TEST_CASE("refresh with no updates is free under oracle-max") {
  Sim sim(909);
  std::ostringstream before;
  sim.mon.sketch().write_snapshot_tsv(before);
  CostLedger ledger;
  sim.mon.refresh(ledger);
  CHECK(ledger.total_messages() == 0);
  CHECK(ledger.rounds == 0);
  std::ostringstream after;
  sim.mon.sketch().write_snapshot_tsv(after);
  CHECK(before.str() == after.str());
}

TEST_CASE("refresh restores every non-sentinel level") {
  Sim sim(111);
  // kill level 1 via its representative, then scatter a few updates
  const NodeId owner = sim.mon.sketch().level(1).rep->item.owner;
  CostLedger ledger;
  sim.mon.update(owner, DataItem{std::int64_t{1} << 41, owner}, ledger);
  Rng rng(4242);
  for (int i = 0; i < 32; ++i) {
    const NodeId id = static_cast<NodeId>(rng.below(static_cast<std::uint64_t>(sim.net.size())));
    sim.mon.update(id, DataItem{rng.range(0, std::int64_t{1} << 40), id}, ledger);
  }
  sim.mon.refresh(ledger);
  CHECK(!sim.net.any_dirty());
  for (int l = 0; l < sim.mon.sketch().level_count(); ++l) {
    const LevelState& st = sim.mon.sketch().level(l);
    if (!st.sentinel) CHECK(st.filled);
  }
}

TEST_CASE("descend-probe refresh pays for the max-height determination") {
  Sim oracle_sim(222, 1 << 16, RefreshStrategy::kOracleMax);
  Sim probe_sim(222, 1 << 16, RefreshStrategy::kDescendProbe);
  for (Sim* sim : {&oracle_sim, &probe_sim}) {
    Rng rng(31);
    CostLedger ledger;
    for (int i = 0; i < 64; ++i) {
      const NodeId id = static_cast<NodeId>(rng.below(static_cast<std::uint64_t>(sim->net.size())));
      sim->mon.update(id, DataItem{rng.range(0, std::int64_t{1} << 40), id}, ledger);
    }
  }
  CostLedger a, b;
  oracle_sim.mon.refresh(a);
  probe_sim.mon.refresh(b);
  CHECK(b.broadcasts > a.broadcasts);  // the band probes are charged
}

TEST_CASE("rough_rank level routing and sentinel delegation") {
  Sim sim(333);
  const auto r1 = sim.mon.rough_rank(1);
  REQUIRE(r1.has_value());
  CHECK(*r1 == sim.mon.sketch().level(1).rep->item);
  const auto r255 = sim.mon.rough_rank(255);
  CHECK(r255 == r1);
  // k in C_1 routes to the structurally empty level 2: delegate
  CHECK(sim.mon.rough_rank(256) == std::nullopt);
  CHECK(sim.mon.rough_rank(65536) == std::nullopt);
  CHECK_THROWS_AS(sim.mon.rough_rank(0), std::out_of_range);
  CHECK_THROWS_AS(sim.mon.rough_rank(65537), std::out_of_range);
}

TEST_CASE("rough_rank costs nothing") {
  Sim sim(444);
  const CostLedger before = sim.ledger;
  (void)sim.mon.rough_rank(10);
  CHECK(sim.ledger == before);
}

TEST_CASE("snapshot export format") {
  Sim sim(555);
  std::ostringstream os;
  sim.mon.sketch().write_snapshot_tsv(os);
  std::istringstream in(os.str());
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    ++lines;
    CHECK(std::count(line.begin(), line.end(), '\t') == 5);
  }
  CHECK(lines == sim.mon.sketch().level_count());
}

TEST_CASE("representative survives m < boundary scattered updates (statistical)") {
  const Constants consts = test_constants();
  const int trials = 120;
  int ok = 0;
  for (int t = 0; t < trials; ++t) {
    Sim sim(10000 + static_cast<std::uint64_t>(t));
    const SketchParams& p = sim.mon.params();
    CostLedger ledger;
    Rng rng(777 + static_cast<std::uint64_t>(t));
    for (int i = 0; i < 255; ++i) {  // m < rank_boundary(1) = 256
      const NodeId id = static_cast<NodeId>(rng.below(static_cast<std::uint64_t>(sim.net.size())));
      sim.mon.update(id, DataItem{rng.range(0, std::int64_t{1} << 40), id}, ledger);
    }
    const LevelState& st = sim.mon.sketch().level(1);
    if (st.filled) {
      const auto sorted = sim.sorted_items();
      auto it = std::lower_bound(sorted.begin(), sorted.end(), st.rep->item);
      const double r = static_cast<double>(it - sorted.begin()) + 1.0;
      if (it != sorted.end() && *it == st.rep->item && r >= p.rank_boundary(1) &&
          r < p.rank_boundary(2)) {
        ++ok;
      }
    }
  }
  const double rate = static_cast<double>(ok) / trials;
  CHECK(rate >= 1.0 - consts.tol_update_small);
}

TEST_CASE("m >= boundary adversarial updates below r_l fire the deletion trigger") {
  const Constants consts = test_constants();
  const int trials = 120;
  int fired = 0;
  for (int t = 0; t < trials; ++t) {
    Sim sim(20000 + static_cast<std::uint64_t>(t));
    CostLedger ledger;
    Rng rng(888 + static_cast<std::uint64_t>(t));
    // m = rank_boundary(0)*256 values pushed below everything: level 0's
    // representative no longer represents its class
    for (int i = 0; i < 256; ++i) {
      const NodeId id = static_cast<NodeId>(rng.below(static_cast<std::uint64_t>(sim.net.size())));
      sim.mon.update(id, DataItem{-1000000 - i, id}, ledger);
    }
    if (!sim.mon.sketch().level(0).filled) ++fired;
  }
  const double rate = static_cast<double>(fired) / trials;
  CHECK(rate >= 1.0 - consts.tol_update_large);
}

TEST_CASE("well-shaped and position coupling hold at calibrated tolerances") {
  const Constants consts = test_constants();
  const int trials = 100;
  std::int64_t ws_ok = 0, ws_all = 0, pos_ok = 0, pos_all = 0;
  for (int t = 0; t < trials; ++t) {
    Sim sim(30000 + static_cast<std::uint64_t>(t));
    const SketchParams& p = sim.mon.params();
    const auto sorted = sim.sorted_items();
    std::vector<Height> height_of(sorted.size());
    for (const NodeState& ns : sim.net.nodes()) {
      height_of[static_cast<size_t>(ns.id)] = ns.height;
    }
    for (int l = 0; l < p.levels; ++l) {
      if (p.structurally_empty(l)) continue;
      for (int tau = 1; tau <= 2; ++tau) {
        const double cap = p.height_band(l, tau).hi;
        const auto lo = static_cast<std::int64_t>(std::ceil(p.subclass_rank_lo(l, tau)));
        const auto hi = static_cast<std::int64_t>(std::floor(p.subclass_rank_hi(l, tau)));
        bool ok = true;
        for (std::int64_t r = std::max<std::int64_t>(1, lo);
             r <= std::min<std::int64_t>(static_cast<std::int64_t>(sorted.size()), hi); ++r) {
          if (static_cast<double>(height_of[static_cast<size_t>(
                  sorted[static_cast<size_t>(r - 1)].owner)]) > cap) {
            ok = false;
            break;
          }
        }
        ws_ok += ok ? 1 : 0;
        ++ws_all;
      }
      const LevelState& st = sim.mon.sketch().level(l);
      if (!st.filled) continue;
      for (int tau = 1; tau <= 2; ++tau) {
        const SketchEntry& e = tau == 1 ? *st.alarm : *st.rep;
        auto it = std::lower_bound(sorted.begin(), sorted.end(), e.item);
        const double r = static_cast<double>(it - sorted.begin()) + 1.0;
        if (r >= p.subclass_rank_lo(l, tau) && r <= p.subclass_rank_hi(l, tau)) ++pos_ok;
        ++pos_all;
      }
    }
  }
  CHECK(static_cast<double>(ws_ok) / static_cast<double>(ws_all) >=
        1.0 - consts.tol_wellshaped);
  CHECK(static_cast<double>(pos_ok) / static_cast<double>(pos_all) >=
        1.0 - consts.tol_position);
}
