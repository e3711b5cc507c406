#include "rankmon/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "rankmon/kselect.hpp"
#include "rankmon/selemon.hpp"
#include "rankmon/topk.hpp"

namespace rankmon {

namespace {

constexpr std::int64_t kValueLo = 0;
constexpr std::int64_t kValueHi = std::int64_t{1} << 40;

std::vector<DataItem> make_items(int n, Rng rng) {
  std::vector<DataItem> items(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    items[static_cast<size_t>(i)] = DataItem{rng.range(kValueLo, kValueHi), i};
  }
  return items;
}

std::int64_t rank_by_count(std::span<const DataItem> items, const DataItem& d) {
  std::int64_t below = 0;
  for (const DataItem& it : items) {
    if (it < d) ++below;
  }
  return below + 1;
}

Rng trial_rng(const Config& cfg, int trial) {
  return Rng(cfg.seed).derive(rng_tag::kTrial).derive(static_cast<std::uint64_t>(trial));
}

TrialRow base_row(const Config& cfg, int trial, std::string protocol, int k, int m) {
  TrialRow row;
  row.trial = trial;
  row.seed = trial_rng(cfg, trial).stream_id();
  row.protocol = std::move(protocol);
  row.n = cfg.n;
  row.phi = cfg.phi;
  row.k = k;
  row.m = m;
  return row;
}

void fill_cost(TrialRow& row, const CostLedger& cost) {
  row.messages_unicast = cost.unicasts;
  row.messages_broadcast = cost.broadcasts;
  row.messages_total = cost.total_messages();
  row.rounds = cost.rounds;
}

}  // namespace

Constants Constants::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open constants file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ConfigError("bad constants file " + path + ": " + e.what());
  }
  Constants c;
  auto get = [&j](const char* key, double fallback) {
    return j.contains(key) ? j.at(key).get<double>() : fallback;
  };
  c.c_prime = get("c_prime", c.c_prime);
  c.c1 = get("c1", c.c1);
  c.c2 = get("c2", c.c2);
  c.c3 = get("c3", c.c3);
  c.c4 = get("c4", c.c4);
  c.c5 = get("c5", c.c5);
  c.c6 = get("c6", c.c6);
  c.lambda = get("lambda", c.lambda);
  c.sample_const = get("sample_const", c.sample_const);
  c.tol_wellshaped = get("tol_wellshaped", c.tol_wellshaped);
  c.tol_position = get("tol_position", c.tol_position);
  c.tol_update_small = get("tol_update_small", c.tol_update_small);
  c.tol_update_large = get("tol_update_large", c.tol_update_large);
  c.tol_fallback = get("tol_fallback", c.tol_fallback);
  c.tol_rrs_upper = get("tol_rrs_upper", c.tol_rrs_upper);
  return c;
}

std::string Constants::to_json() const {
  nlohmann::json j;
  j["c_prime"] = c_prime;
  j["c1"] = c1;
  j["c2"] = c2;
  j["c3"] = c3;
  j["c4"] = c4;
  j["c5"] = c5;
  j["c6"] = c6;
  j["lambda"] = lambda;
  j["sample_const"] = sample_const;
  j["tol_wellshaped"] = tol_wellshaped;
  j["tol_position"] = tol_position;
  j["tol_update_small"] = tol_update_small;
  j["tol_update_large"] = tol_update_large;
  j["tol_fallback"] = tol_fallback;
  j["tol_rrs_upper"] = tol_rrs_upper;
  return j.dump(2) + "\n";
}

void Constants::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write constants file: " + path);
  out << to_json();
}

Aggregate Aggregate::of(std::span<const double> xs) {
  Aggregate a;
  a.count = static_cast<std::int64_t>(xs.size());
  if (xs.empty()) return a;
  a.min = xs[0];
  a.max = xs[0];
  double sum = 0.0;
  for (double x : xs) {
    sum += x;
    a.min = std::min(a.min, x);
    a.max = std::max(a.max, x);
  }
  a.mean = sum / static_cast<double>(a.count);
  double ss = 0.0;
  for (double x : xs) ss += (x - a.mean) * (x - a.mean);
  a.variance = a.count > 1 ? ss / static_cast<double>(a.count - 1) : 0.0;
  a.stderr_mean = std::sqrt(a.variance / static_cast<double>(a.count));
  return a;
}

double binom_stderr(double p_hat, std::int64_t trials) {
  if (trials <= 0) return 0.0;
  return std::sqrt(std::max(0.0, p_hat * (1.0 - p_hat)) / static_cast<double>(trials));
}

std::string csv_header() {
  return "trial,seed,protocol,n,phi,k,m,messages_unicast,messages_broadcast,"
         "messages_total,rounds,verdict,fallback_used,result_rank";
}

void write_csv(std::span<const TrialRow> rows, std::ostream& os) {
  os << csv_header() << '\n';
  for (const TrialRow& r : rows) {
    os << r.trial << ',' << r.seed << ',' << r.protocol << ',' << r.n << ',' << r.phi
       << ',' << r.k << ',' << r.m << ',' << r.messages_unicast << ','
       << r.messages_broadcast << ',' << r.messages_total << ',' << r.rounds << ','
       << (r.pass ? "pass" : "fail") << ',' << (r.fallback_used ? 1 : 0) << ','
       << r.result_rank << '\n';
  }
}

std::string rows_to_csv(std::span<const TrialRow> rows) {
  std::ostringstream os;
  write_csv(rows, os);
  return os.str();
}

void RankOracle::reset(std::span<const DataItem> items) {
  sorted_.assign(items.begin(), items.end());
  std::sort(sorted_.begin(), sorted_.end());
}

void RankOracle::apply(std::span<const DataItem> removals,
                       std::span<const DataItem> additions) {
  std::vector<DataItem> rem(removals.begin(), removals.end());
  std::vector<DataItem> add(additions.begin(), additions.end());
  std::sort(rem.begin(), rem.end());
  std::sort(add.begin(), add.end());

  // a node updated twice in one batch removes an item the same batch adds;
  // cancel those pairs so only net changes hit the multiset
  {
    std::vector<DataItem> rem2, add2;
    size_t i = 0, j = 0;
    while (i < rem.size() && j < add.size()) {
      if (rem[i] == add[j]) {
        ++i;
        ++j;
      } else if (rem[i] < add[j]) {
        rem2.push_back(rem[i++]);
      } else {
        add2.push_back(add[j++]);
      }
    }
    rem2.insert(rem2.end(), rem.begin() + static_cast<std::ptrdiff_t>(i), rem.end());
    add2.insert(add2.end(), add.begin() + static_cast<std::ptrdiff_t>(j), add.end());
    rem = std::move(rem2);
    add = std::move(add2);
  }

  std::vector<DataItem> next;
  next.reserve(sorted_.size() - rem.size() + add.size());
  size_t ri = 0;
  size_t ai = 0;
  for (const DataItem& it : sorted_) {
    if (ri < rem.size() && rem[ri] == it) {
      ++ri;
      continue;
    }
    while (ai < add.size() && add[ai] < it) next.push_back(add[ai++]);
    next.push_back(it);
  }
  while (ai < add.size()) next.push_back(add[ai++]);
  if (ri != rem.size()) throw std::invalid_argument("RankOracle: removal not present");
  sorted_ = std::move(next);
}

std::int64_t RankOracle::rank_of(const DataItem& d) const {
  auto it = std::lower_bound(sorted_.begin(), sorted_.end(), d);
  if (it == sorted_.end() || !(*it == d)) {
    throw std::invalid_argument("RankOracle: item not present");
  }
  return static_cast<std::int64_t>(it - sorted_.begin()) + 1;
}

std::uint64_t RankOracle::checksum() const { return items_checksum(sorted_); }

std::uint64_t items_checksum(std::span<const DataItem> items) {
  // order-independent fold
  std::uint64_t acc = 0x6a09e667f3bcc909ULL;
  for (const DataItem& it : items) {
    acc += splitmix_fini(static_cast<std::uint64_t>(it.value) * 0x9E3779B97F4A7C15ULL +
                         static_cast<std::uint64_t>(static_cast<std::uint32_t>(it.owner)));
  }
  return acc;
}

bool verify_top_k(std::span<const DataItem> result, std::span<const DataItem> oracle_sorted,
                  int k) {
  if (static_cast<int>(result.size()) != k) return false;
  if (static_cast<size_t>(k) > oracle_sorted.size()) return false;
  return std::equal(result.begin(), result.end(), oracle_sorted.begin(),
                    oracle_sorted.begin() + k);
}

std::vector<TrialRow> run_topk_trials(const Config& cfg, const TopKRunOptions& opt,
                                      EventTrace* trace) {
  std::vector<TrialRow> rows;
  rows.reserve(static_cast<size_t>(opt.trials));
  const int h_max = cfg.effective_h_max();
  const char* name = opt.via_select ? "topk-via-select"
                                    : (opt.strict_walk ? "topk-strict" : "topk");
  for (int t = 0; t < opt.trials; ++t) {
    Rng rng = trial_rng(cfg, t);
    if (trace) trace->set_trial(t);
    std::vector<DataItem> items = make_items(cfg.n, rng.derive(rng_tag::kItems));

    CostLedger ledger;
    TopKResult res;
    bool fallback = false;
    if (opt.via_select) {
      res = run_top_k_via_select(items, opt.k, cfg.phi, h_max, opt.via_c0,
                                 rng.derive(rng_tag::kQuery), ledger, trace, &fallback);
    } else {
      TopKOptions topt;
      topt.k = opt.k;
      topt.phi = cfg.phi;
      topt.h_max = h_max;
      topt.strict_walk = opt.strict_walk;
      res = run_top_k(items, topt, rng.derive(rng_tag::kQuery), ledger, trace);
    }

    TrialRow row = base_row(cfg, t, name, opt.k, 0);
    fill_cost(row, res.cost);
    row.fallback_used = fallback;
    if (!res.failed) {
      std::vector<DataItem> expect(items.begin(), items.end());
      const size_t kk = static_cast<size_t>(opt.k);
      std::partial_sort(expect.begin(), expect.begin() + static_cast<std::ptrdiff_t>(kk),
                        expect.end());
      expect.resize(kk);
      row.pass = std::equal(res.items.begin(), res.items.end(), expect.begin(), expect.end());
      row.result_rank = row.pass ? opt.k : -1;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<TrialRow> run_cofasel_trials(const Config& cfg, const CofaselRunOptions& opt,
                                         EventTrace* trace) {
  std::vector<TrialRow> rows;
  rows.reserve(static_cast<size_t>(opt.trials));
  const int h_max = cfg.effective_h_max();
  for (int t = 0; t < opt.trials; ++t) {
    Rng rng = trial_rng(cfg, t);
    if (trace) trace->set_trial(t);
    std::vector<DataItem> items = make_items(cfg.n, rng.derive(rng_tag::kItems));

    CostLedger ledger;
    SelectResult res;
    if (opt.amplified) {
      res = run_cofasel_amp(items, cfg.phi, h_max, opt.k, cfg.delta_prime, cfg.amp_factor,
                            rng.derive(rng_tag::kQuery), ledger, trace);
    } else {
      res = run_cofasel(items, cfg.phi, h_max, opt.k, rng.derive(rng_tag::kQuery), ledger,
                        trace);
    }

    TrialRow row = base_row(cfg, t, opt.amplified ? "cofasel-amp" : "cofasel", opt.k, 0);
    fill_cost(row, res.cost);
    row.result_rank = rank_by_count(items, res.item);
    row.pass = row.result_rank >= opt.k && row.result_rank <= 42 * std::int64_t{opt.k};
    row.fallback_used = res.meta.shortfall;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<TrialRow> run_approx_kselect_trials(const Config& cfg, int k, int trials,
                                                EventTrace* trace) {
  std::vector<TrialRow> rows;
  rows.reserve(static_cast<size_t>(trials));
  const int h_max = cfg.effective_h_max();
  for (int t = 0; t < trials; ++t) {
    Rng rng = trial_rng(cfg, t);
    if (trace) trace->set_trial(t);
    std::vector<DataItem> items = make_items(cfg.n, rng.derive(rng_tag::kItems));

    CostLedger ledger;
    const SelectResult res =
        run_approx_k_select(items, k, cfg.phi, cfg.eps, cfg.delta_prime, cfg.delta, h_max,
                            cfg.amp_factor, cfg.sample_const, rng.derive(rng_tag::kQuery),
                            ledger, trace);

    TrialRow row = base_row(cfg, t, "approk", k, 0);
    fill_cost(row, res.cost);
    row.result_rank = rank_by_count(items, res.item);
    row.pass = kselect_window_pass(row.result_rank, k, cfg.eps);
    row.fallback_used = res.meta.shortfall;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<TrialRow> run_selemon_init_trials(const Config& cfg, int trials,
                                              std::span<const std::int64_t> k_grid,
                                              EventTrace* trace) {
  std::vector<TrialRow> rows;
  const SketchParams params =
      SketchParams::make(cfg.n, cfg.phi, cfg.con, cfg.effective_h_max());
  for (int t = 0; t < trials; ++t) {
    Rng rng = trial_rng(cfg, t);
    if (trace) trace->set_trial(t);
    Network net(cfg.n);
    {
      Rng items_rng = rng.derive(rng_tag::kItems);
      for (int i = 0; i < cfg.n; ++i) {
        net.set_item(i, DataItem{items_rng.range(kValueLo, kValueHi), i});
      }
      net.clear_dirty();
    }
    SeleMon mon(net, params, rng.derive(rng_tag::kSketch), cfg.refresh_strategy,
                cfg.refill_max_attempts);
    CostLedger init_ledger;
    mon.initialize(init_ledger, trace);

    std::vector<DataItem> items;
    items.reserve(static_cast<size_t>(cfg.n));
    for (const NodeState& ns : net.nodes()) items.push_back(ns.item);
    std::sort(items.begin(), items.end());

    {
      TrialRow row = base_row(cfg, t, "selemon-init", 0, 0);
      fill_cost(row, init_ledger);
      row.pass = true;
      for (int l = 0; l < mon.sketch().level_count(); ++l) {
        const LevelState& st = mon.sketch().level(l);
        if (!st.sentinel && !st.filled) row.pass = false;
      }
      rows.push_back(std::move(row));
    }

    for (std::int64_t k : k_grid) {
      TrialRow row = base_row(cfg, t, "rough-rank", static_cast<int>(k), 0);
      const std::optional<DataItem> d = mon.rough_rank(k);
      if (!d) {
        // delegate marker: downstream queries use the full population,
        // which trivially answers any rank >= k
        row.fallback_used = true;
        row.pass = true;
        row.result_rank = -1;
      } else {
        auto it = std::lower_bound(items.begin(), items.end(), *d);
        row.result_rank = static_cast<std::int64_t>(it - items.begin()) + 1;
        row.pass = row.result_rank >= k;
        // upper clause: when the representative still sits in its class, its
        // rank may not exceed the next level's boundary
        const int level = params.level_for_rank(static_cast<double>(k));
        const double lo = params.rank_boundary(level);
        const double hi = params.rank_boundary(level + 1);
        const bool member = static_cast<double>(row.result_rank) >= lo &&
                            static_cast<double>(row.result_rank) < hi;
        row.pass = row.pass && (!member || static_cast<double>(row.result_rank) <= hi);
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::vector<TrialRow> run_refresh_trials(const Config& cfg, int m, int refreshes,
                                         int trials, EventTrace* trace) {
  std::vector<TrialRow> rows;
  const SketchParams params =
      SketchParams::make(cfg.n, cfg.phi, cfg.con, cfg.effective_h_max());
  for (int t = 0; t < trials; ++t) {
    Rng rng = trial_rng(cfg, t);
    if (trace) trace->set_trial(t);
    Network net(cfg.n);
    {
      Rng items_rng = rng.derive(rng_tag::kItems);
      for (int i = 0; i < cfg.n; ++i) {
        net.set_item(i, DataItem{items_rng.range(kValueLo, kValueHi), i});
      }
      net.clear_dirty();
    }
    SeleMon mon(net, params, rng.derive(rng_tag::kSketch), cfg.refresh_strategy,
                cfg.refill_max_attempts);
    CostLedger init_ledger;
    mon.initialize(init_ledger, trace);

    const Scenario scenario = gen_random_updates(
        cfg.n, m, refreshes, {kValueLo, kValueHi}, rng.derive(rng_tag::kScenario).stream_id());
    CostLedger ledger;
    for (int e = 0; e < refreshes; ++e) {
      for (const UpdateOp& u : scenario.epochs[static_cast<size_t>(e)].updates) {
        mon.update(u.node, DataItem{u.value, u.node}, ledger, trace);
      }
      const CostLedger before = ledger;
      mon.refresh(ledger, trace);

      TrialRow row = base_row(cfg, t, "refresh", 0, m);
      row.trial = t * refreshes + e;
      fill_cost(row, ledger - before);
      row.pass = true;
      for (int l = 0; l < mon.sketch().level_count(); ++l) {
        const LevelState& st = mon.sketch().level(l);
        if (!st.sentinel && !st.filled) row.pass = false;
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::vector<TrialRow> run_query_trials(const Config& cfg, const QueryRunOptions& opt,
                                       const Constants& consts, EventTrace* trace) {
  std::vector<TrialRow> rows;
  const SketchParams params =
      SketchParams::make(cfg.n, cfg.phi, cfg.con, cfg.effective_h_max());
  const char* name = opt.kind == QueryKind::kTopK ? "query-topk" : "query-ksel";
  for (int t = 0; t < opt.trials; ++t) {
    Rng rng = trial_rng(cfg, t);
    if (trace) trace->set_trial(t);
    Network net(cfg.n);
    std::vector<DataItem> items;
    {
      Rng items_rng = rng.derive(rng_tag::kItems);
      for (int i = 0; i < cfg.n; ++i) {
        net.set_item(i, DataItem{items_rng.range(kValueLo, kValueHi), i});
      }
      net.clear_dirty();
      items.reserve(static_cast<size_t>(cfg.n));
      for (const NodeState& ns : net.nodes()) items.push_back(ns.item);
    }
    RankOracle oracle;
    oracle.reset(items);

    SeleMon mon(net, params, rng.derive(rng_tag::kSketch), cfg.refresh_strategy,
                cfg.refill_max_attempts);
    CostLedger init_ledger;
    mon.initialize(init_ledger, trace);

    const Scenario scenario = gen_random_updates(
        cfg.n, opt.m, opt.epochs, {kValueLo, kValueHi},
        rng.derive(rng_tag::kScenario).stream_id());

    CostLedger update_ledger;
    std::vector<DataItem> removals;
    std::vector<DataItem> additions;
    for (int e = 0; e < opt.epochs; ++e) {
      removals.clear();
      additions.clear();
      for (const UpdateOp& u : scenario.epochs[static_cast<size_t>(e)].updates) {
        removals.push_back(net.node(u.node).item);
        const DataItem d{u.value, u.node};
        additions.push_back(d);
        mon.update(u.node, d, update_ledger, trace);
      }
      oracle.apply(removals, additions);

      CostLedger ledger;
      Rng qrng = rng.derive(rng_tag::kQuery).derive(static_cast<std::uint64_t>(e));
      QueryReport rep;
      if (opt.kind == QueryKind::kTopK) {
        rep = query_top_k(opt.k, mon, qrng, oracle.sorted(), ledger, trace);
      } else {
        rep = query_k_select(opt.k, opt.eps, opt.delta, mon, qrng, consts.lambda,
                             consts.sample_const, oracle.sorted(), ledger, trace);
      }

      TrialRow row = base_row(cfg, t, name, opt.k, opt.m);
      row.trial = t * opt.epochs + e;
      fill_cost(row, rep.cost);
      row.pass = rep.pass;
      row.fallback_used = rep.fallback_used;
      row.result_rank = rep.result_rank;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

bool validate_adversary_scenario(const Scenario& s, int m, std::string* error) {
  auto fail = [&](const std::string& why) {
    if (error) *error = why;
    return false;
  };
  if (s.epochs.empty()) return fail("no epochs");
  if (static_cast<int>(s.epochs[0].updates.size()) != s.n) {
    return fail("epoch 0 must assign every node");
  }
  // fixed node set across later epochs
  std::vector<NodeId> first_targets;
  for (size_t e = 1; e < s.epochs.size(); ++e) {
    const Epoch& ep = s.epochs[e];
    if (static_cast<int>(ep.updates.size()) != m) return fail("epoch size != m");
    std::vector<NodeId> targets;
    for (const UpdateOp& u : ep.updates) targets.push_back(u.node);
    std::sort(targets.begin(), targets.end());
    if (std::adjacent_find(targets.begin(), targets.end()) != targets.end()) {
      return fail("duplicate node in epoch");
    }
    if (e == 1) {
      first_targets = targets;
    } else if (targets != first_targets) {
      return fail("node set N not fixed across epochs");
    }
  }
  // strict inter-block ordering: max(S_{t+1}) < min(S_t)
  std::int64_t prev_min = std::numeric_limits<std::int64_t>::max();
  for (const Epoch& ep : s.epochs) {
    std::int64_t lo = std::numeric_limits<std::int64_t>::max();
    std::int64_t hi = std::numeric_limits<std::int64_t>::min();
    for (const UpdateOp& u : ep.updates) {
      lo = std::min(lo, u.value);
      hi = std::max(hi, u.value);
    }
    if (hi >= prev_min) return fail("value blocks not strictly descending");
    prev_min = lo;
  }
  // after any epoch t >= 1 the global minimum's owner is in N
  if (s.epochs.size() > 1) {
    std::vector<std::int64_t> current(static_cast<size_t>(s.n));
    for (const UpdateOp& u : s.epochs[0].updates) {
      current[static_cast<size_t>(u.node)] = u.value;
    }
    for (size_t e = 1; e < s.epochs.size(); ++e) {
      for (const UpdateOp& u : s.epochs[e].updates) {
        current[static_cast<size_t>(u.node)] = u.value;
      }
      NodeId min_owner = 0;
      for (int i = 1; i < s.n; ++i) {
        if (current[static_cast<size_t>(i)] < current[static_cast<size_t>(min_owner)]) {
          min_owner = i;
        }
      }
      if (!std::binary_search(first_targets.begin(), first_targets.end(), min_owner)) {
        return fail("global minimum owned outside N after epoch");
      }
    }
  }
  if (error) error->clear();
  return true;
}

AdversaryRunResult run_adversary_trials(const Config& cfg, int m, int epochs, int trials,
                                        EventTrace* trace) {
  AdversaryRunResult out;
  const SketchParams params =
      SketchParams::make(cfg.n, cfg.phi, cfg.con, cfg.effective_h_max());
  for (int t = 0; t < trials; ++t) {
    Rng rng = trial_rng(cfg, t);
    if (trace) trace->set_trial(t);
    const Scenario scenario =
        gen_adversary_min(cfg.n, m, epochs, rng.derive(rng_tag::kScenario).stream_id());
    std::string why;
    if (!validate_adversary_scenario(scenario, m, &why)) {
      out.instances_valid = false;
      out.validation_error = why;
    }

    Network net(cfg.n);
    RankOracle oracle;
    SeleMon mon(net, params, rng.derive(rng_tag::kSketch), cfg.refresh_strategy,
                cfg.refill_max_attempts);

    CostLedger update_ledger;
    std::vector<DataItem> removals;
    std::vector<DataItem> additions;
    for (size_t e = 0; e < scenario.epochs.size(); ++e) {
      const Epoch& ep = scenario.epochs[e];
      if (e == 0) {
        for (const UpdateOp& u : ep.updates) net.set_item(u.node, DataItem{u.value, u.node});
        net.clear_dirty();
        std::vector<DataItem> items;
        for (const NodeState& ns : net.nodes()) items.push_back(ns.item);
        oracle.reset(items);
        CostLedger init_ledger;
        mon.initialize(init_ledger, trace);
        TrialRow row = base_row(cfg, t, "adversary-top1", 1, m);
        row.trial = t * static_cast<int>(scenario.epochs.size());
        fill_cost(row, init_ledger);
        row.pass = true;
        out.rows.push_back(std::move(row));
        continue;
      }
      removals.clear();
      additions.clear();
      for (const UpdateOp& u : ep.updates) {
        removals.push_back(net.node(u.node).item);
        const DataItem d{u.value, u.node};
        additions.push_back(d);
        mon.update(u.node, d, update_ledger, trace);
      }
      oracle.apply(removals, additions);

      CostLedger ledger;
      Rng qrng = rng.derive(rng_tag::kQuery).derive(static_cast<std::uint64_t>(e));
      QueryReport rep = query_top_k(1, mon, qrng, oracle.sorted(), ledger, trace);

      TrialRow row = base_row(cfg, t, "adversary-top1", 1, m);
      row.trial = t * static_cast<int>(scenario.epochs.size()) + static_cast<int>(e);
      fill_cost(row, rep.cost);
      row.pass = rep.pass;
      row.fallback_used = rep.fallback_used;
      row.result_rank = rep.result_rank;
      out.rows.push_back(std::move(row));
    }
  }
  return out;
}

std::vector<TrialRow> run_scenario_trials(const Config& cfg, const Scenario& scenario,
                                          int trials, const Constants& consts,
                                          EventTrace* trace) {
  std::vector<TrialRow> rows;
  const SketchParams params =
      SketchParams::make(cfg.n, cfg.phi, cfg.con, cfg.effective_h_max());
  for (int t = 0; t < trials; ++t) {
    Rng rng = trial_rng(cfg, t);
    if (trace) trace->set_trial(t);
    Network net(cfg.n);
    {
      Rng items_rng = rng.derive(rng_tag::kItems);
      for (int i = 0; i < cfg.n; ++i) {
        net.set_item(i, DataItem{items_rng.range(kValueLo, kValueHi), i});
      }
      net.clear_dirty();
    }
    RankOracle oracle;
    {
      std::vector<DataItem> items;
      for (const NodeState& ns : net.nodes()) items.push_back(ns.item);
      oracle.reset(items);
    }
    SeleMon mon(net, params, rng.derive(rng_tag::kSketch), cfg.refresh_strategy,
                cfg.refill_max_attempts);
    CostLedger init_ledger;
    mon.initialize(init_ledger, trace);

    CostLedger update_ledger;
    std::vector<DataItem> removals;
    std::vector<DataItem> additions;
    int qidx = 0;
    for (size_t e = 0; e < scenario.epochs.size(); ++e) {
      const Epoch& ep = scenario.epochs[e];
      removals.clear();
      additions.clear();
      for (const UpdateOp& u : ep.updates) {
        removals.push_back(net.node(u.node).item);
        const DataItem d{u.value, u.node};
        additions.push_back(d);
        mon.update(u.node, d, update_ledger, trace);
      }
      oracle.apply(removals, additions);
      if (!ep.query) continue;

      CostLedger ledger;
      Rng qrng = rng.derive(rng_tag::kQuery).derive(static_cast<std::uint64_t>(e));
      QueryReport rep;
      if (ep.query->kind == QueryKind::kTopK) {
        rep = query_top_k(ep.query->k, mon, qrng, oracle.sorted(), ledger, trace);
      } else {
        rep = query_k_select(ep.query->k, ep.query->eps, ep.query->delta, mon, qrng,
                             consts.lambda, consts.sample_const, oracle.sorted(), ledger,
                             trace);
      }
      TrialRow row = base_row(cfg, t,
                              ep.query->kind == QueryKind::kTopK ? "query-topk" : "query-ksel",
                              ep.query->k, static_cast<int>(ep.updates.size()));
      row.trial = t * 100000 + qidx++;
      fill_cost(row, rep.cost);
      row.pass = rep.pass;
      row.fallback_used = rep.fallback_used;
      row.result_rank = rep.result_rank;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

}  // namespace rankmon
