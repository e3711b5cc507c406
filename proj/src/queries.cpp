#include "rankmon/queries.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace rankmon {

namespace {

std::vector<DataItem> participants_below(const Network& net,
                                         const std::optional<DataItem>& d) {
  std::vector<DataItem> out;
  out.reserve(static_cast<size_t>(net.size()));
  for (const NodeState& ns : net.nodes()) {
    if (!d || ns.item <= *d) out.push_back(ns.item);
  }
  return out;
}

std::int64_t sorted_rank(std::span<const DataItem> sorted, const DataItem& d) {
  auto it = std::lower_bound(sorted.begin(), sorted.end(), d);
  return static_cast<std::int64_t>(it - sorted.begin()) + 1;
}

void announce_pivot(const std::optional<DataItem>& d, CostLedger& ledger,
                    EventTrace* trace) {
  std::ostringstream os;
  if (d) {
    os << "query pivot d=" << d->value;
  } else {
    os << "query pivot full";
  }
  broadcast_value(os.str(), ledger, trace);
}

}  // namespace

bool kselect_window_pass(std::int64_t rank, int k, double eps) {
  const double r = static_cast<double>(rank);
  const double kk = static_cast<double>(k);
  return r >= (1.0 - eps) * kk - 1e-9 && r <= (1.0 + eps) * kk + 1e-9;
}

QueryReport query_top_k(int k, SeleMon& mon, const Rng& rng,
                        std::span<const DataItem> oracle_sorted, CostLedger& ledger,
                        EventTrace* trace) {
  QueryReport rep;
  rep.kind = QueryKind::kTopK;
  rep.k = k;
  const CostLedger before = ledger;

  Network& net = mon.network();
  if (net.any_dirty()) {
    const CostLedger pre = ledger;
    mon.refresh(ledger, trace);
    rep.refresh_share = ledger - pre;
  }

  const std::optional<DataItem> d = mon.rough_rank(k);  // throws for k > n
  announce_pivot(d, ledger, trace);
  rep.fallback_used = !d.has_value();  // sentinel: no pruning available

  TopKOptions opt;
  opt.k = k;
  opt.phi = mon.params().phi;
  opt.h_max = mon.params().h_max;

  std::vector<DataItem> part = participants_below(net, d);
  TopKResult res = run_top_k(part, opt, rng.derive(1), ledger, trace);
  if (res.failed) {
    rep.fallback_used = true;
    std::vector<DataItem> all = participants_below(net, std::nullopt);
    res = run_top_k(all, opt, rng.derive(2), ledger, trace);
  }
  rep.items = std::move(res.items);

  rep.pass = !res.failed && static_cast<size_t>(k) <= oracle_sorted.size() &&
             std::equal(rep.items.begin(), rep.items.end(), oracle_sorted.begin(),
                        oracle_sorted.begin() + k);
  rep.result_rank = rep.pass ? k : -1;
  rep.cost = ledger - before;
  return rep;
}

QueryReport query_k_select(int k, double eps, double delta, SeleMon& mon, const Rng& rng,
                           double lambda, double sample_const,
                           std::span<const DataItem> oracle_sorted, CostLedger& ledger,
                           EventTrace* trace) {
  QueryReport rep;
  rep.kind = QueryKind::kKSelect;
  rep.k = k;
  const CostLedger before = ledger;

  Network& net = mon.network();
  if (net.any_dirty()) {
    const CostLedger pre = ledger;
    mon.refresh(ledger, trace);
    rep.refresh_share = ledger - pre;
  }

  const std::optional<DataItem> d = mon.rough_rank(k);
  rep.fallback_used = !d.has_value();
  announce_pivot(d, ledger, trace);

  // internal failure probability for the amplified stage
  const double delta_prime = 1.0 / std::log2(static_cast<double>(net.size()));

  std::vector<DataItem> part = participants_below(net, d);
  const SelectResult sel =
      run_approx_k_select(part, k, mon.params().phi, eps, delta_prime, delta,
                          mon.params().h_max, lambda, sample_const, rng.derive(3),
                          ledger, trace);
  rep.selected = sel.item;
  rep.result_rank = sorted_rank(oracle_sorted, sel.item);
  rep.pass = kselect_window_pass(rep.result_rank, k, eps);
  rep.cost = ledger - before;
  return rep;
}

}  // namespace rankmon
