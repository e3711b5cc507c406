#include "rankmon/kselect.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <sstream>

namespace rankmon {

CofaselPlan cofasel_plan(double phi, int k, int h_max) {
  CofaselPlan plan;
  const double level = log_inv_phi(7.0 * static_cast<double>(k), phi);
  const double rounded = std::round(level);
  if (std::abs(level - rounded) < 1e-9) {
    // log_{1/phi}(7k) integral: 0 < alpha < 1 is unattainable, take alpha = 1
    plan.alpha = 1.0;
    plan.h_min = static_cast<int>(rounded);
  } else {
    const double fl = std::floor(level);
    plan.alpha = level - fl;
    plan.h_min = static_cast<int>(fl) + 1;
  }
  plan.j_star = std::max(1, static_cast<int>(std::llround(std::pow(1.0 / phi, plan.alpha))));
  if (plan.h_min > h_max) {
    plan.h_min = h_max;
    plan.clamped = true;
  }
  if (plan.h_min < 1) plan.h_min = 1;
  return plan;
}

SampleParams make_sample_params(double eps, double delta, int k, double sample_const) {
  SampleParams sp;
  sp.eps = eps;
  sp.delta = delta;
  sp.sample_size = (1.0 / (eps * eps)) * std::log(2.0 / delta);
  sp.coin_p = std::min(1.0, (sample_const / static_cast<double>(k)) * sp.sample_size);
  return sp;
}

int amp_instances(double lambda, double delta_prime) {
  return std::max(1, static_cast<int>(std::ceil(lambda * std::log(1.0 / delta_prime))));
}

namespace {

struct InstanceState {
  std::optional<DataItem> d_min;
  bool resolved = false;  // output fixed (h_min handled)
  bool shortfall = false;
  bool extended = false;
};

// Shared descent for single and amplified runs. Returns per-instance state
// after the h_max..h_min loop plus any rescue levels below h_min.
std::vector<InstanceState> descend(const InstanceView& view, const CofaselPlan& plan,
                                   int h_max, CostLedger& ledger, EventTrace* trace) {
  const int r = view.instances();
  std::vector<InstanceState> st(static_cast<size_t>(r));
  std::vector<Probe> batch;
  for (int h = h_max; h >= plan.h_min; --h) {
    batch.clear();
    for (int inst = 0; inst < r; ++inst) {
      Probe p;
      p.upper = st[static_cast<size_t>(inst)].d_min;
      p.pred = HeightPred::kExact;
      p.height = h;
      p.instance = inst;
      batch.push_back(p);
    }
    auto responses = issue_probe_batch(view, batch, ledger, trace);
    for (int inst = 0; inst < r; ++inst) {
      auto& s = st[static_cast<size_t>(inst)];
      const auto& rs = responses[static_cast<size_t>(inst)];
      if (h > plan.h_min) {
        if (!rs.empty()) s.d_min = rs.front().item;  // else d_min unchanged
      } else {
        if (static_cast<int>(rs.size()) >= plan.j_star) {
          s.d_min = rs[static_cast<size_t>(plan.j_star - 1)].item;
          s.resolved = true;
        } else if (!rs.empty()) {
          s.d_min = rs.back().item;  // largest available response
          s.resolved = true;
          s.shortfall = true;
        } else if (s.d_min) {
          s.resolved = true;
          s.shortfall = true;
        }
        // else: nothing seen anywhere yet; rescue levels below handle it
      }
    }
  }

  // Rescue: a participant set whose heights all fell below h_min produced no
  // response at all. Keep descending until something answers so the output
  // still originates from a participant.
  for (int h = plan.h_min - 1; h >= 1; --h) {
    bool pending = false;
    batch.clear();
    for (int inst = 0; inst < r; ++inst) {
      if (st[static_cast<size_t>(inst)].resolved || st[static_cast<size_t>(inst)].d_min)
        continue;
      pending = true;
      Probe p;
      p.pred = HeightPred::kExact;
      p.height = h;
      p.instance = inst;
      batch.push_back(p);
    }
    if (!pending) break;
    auto responses = issue_probe_batch(view, batch, ledger, trace);
    for (size_t bi = 0; bi < batch.size(); ++bi) {
      auto& s = st[static_cast<size_t>(batch[bi].instance)];
      const auto& rs = responses[bi];
      if (!rs.empty()) {
        s.d_min = rs.front().item;
        s.resolved = true;
        s.shortfall = true;
        s.extended = true;
      }
    }
  }
  return st;
}

}  // namespace

SelectResult run_cofasel(std::span<const DataItem> participants, double phi, int h_max,
                         int k, const Rng& rng, CostLedger& ledger, EventTrace* trace) {
  assert(!participants.empty());
  const CostLedger before = ledger;
  const CofaselPlan plan = cofasel_plan(phi, k, h_max);
  InstanceView view(participants, 1, phi, h_max, rng.derive(rng_tag::kHeights));
  auto st = descend(view, plan, h_max, ledger, trace);

  SelectResult res;
  res.item = *st[0].d_min;
  res.meta.shortfall = st[0].shortfall;
  res.meta.extended_descent = st[0].extended;
  res.meta.clamped_h_min = plan.clamped;
  res.cost = ledger - before;
  return res;
}

SelectResult run_cofasel_amp(std::span<const DataItem> participants, double phi,
                             int h_max, int k, double delta_prime, double lambda,
                             const Rng& rng, CostLedger& ledger, EventTrace* trace) {
  assert(!participants.empty());
  const CostLedger before = ledger;
  const CofaselPlan plan = cofasel_plan(phi, k, h_max);
  const int r = amp_instances(lambda, delta_prime);
  InstanceView view(participants, r, phi, h_max, rng.derive(rng_tag::kHeights));
  auto st = descend(view, plan, h_max, ledger, trace);

  SelectResult res;
  res.meta.instances = r;
  res.meta.clamped_h_min = plan.clamped;
  std::vector<DataItem> outs;
  outs.reserve(static_cast<size_t>(r));
  for (const InstanceState& s : st) {
    outs.push_back(*s.d_min);
    res.meta.shortfall |= s.shortfall;
    res.meta.extended_descent |= s.extended;
  }
  res.meta.instance_outputs = outs;
  std::sort(outs.begin(), outs.end());
  res.item = outs[static_cast<size_t>((r - 1) / 2)];

  // Winner announced to the nodes; the costed round the theorem adds on top
  // of the probe loop.
  std::ostringstream payload;
  payload << "select d=" << res.item.value;
  broadcast_value(payload.str(), ledger, trace);

  res.cost = ledger - before;
  return res;
}

SelectResult run_approx_k_select(std::span<const DataItem> participants, int k,
                                 double phi, double eps, double delta_prime,
                                 double delta, int h_max, double lambda,
                                 double sample_const, const Rng& rng,
                                 CostLedger& ledger, EventTrace* trace) {
  const CostLedger before = ledger;
  SelectResult amp = run_cofasel_amp(participants, phi, h_max, k, delta_prime, lambda,
                                     rng, ledger, trace);
  const DataItem d = amp.item;
  const SampleParams sp = make_sample_params(eps, delta, k, sample_const);

  // Sampling round: every node below d tosses a coin, successes report.
  ledger.rounds += 1;
  Rng coin_rng = rng.derive(rng_tag::kSampling);
  std::vector<DataItem> samples;
  for (const DataItem& it : participants) {
    if (!(it < d)) continue;
    Rng node_rng = coin_rng.derive(static_cast<std::uint64_t>(it.owner));
    if (node_rng.real01() < sp.coin_p) {
      ledger.unicasts += 1;
      if (trace) trace->log_unicast(ledger.rounds, 0, it.owner, it);
      samples.push_back(it);
    }
  }
  std::sort(samples.begin(), samples.end());

  SelectResult res;
  res.meta = amp.meta;
  res.meta.samples = static_cast<std::int64_t>(samples.size());
  const int want = static_cast<int>(std::ceil(sp.coin_p * static_cast<double>(k)));
  if (static_cast<int>(samples.size()) >= want) {
    res.item = samples[static_cast<size_t>(want - 1)];
  } else if (!samples.empty()) {
    res.item = samples.back();
    res.meta.shortfall = true;
  } else {
    res.item = d;  // nothing below d at all
    res.meta.shortfall = true;
  }
  res.cost = ledger - before;
  return res;
}

TopKResult run_top_k_via_select(std::span<const DataItem> participants, int k,
                                double phi, int h_max, int c0, const Rng& rng,
                                CostLedger& ledger, EventTrace* trace,
                                bool* fallback_used) {
  const CostLedger before = ledger;
  if (fallback_used) *fallback_used = false;

  // Pivot descent: k' = 2k, stop early and take the smallest response seen.
  const double level = log_inv_phi(7.0 * 2.0 * static_cast<double>(k), phi);
  int h_stop = static_cast<int>(std::ceil(level)) + c0;
  if (h_stop > h_max) h_stop = h_max;
  if (h_stop < 1) h_stop = 1;

  InstanceView view(participants, 1, phi, h_max, rng.derive(rng_tag::kHeights));
  std::optional<DataItem> d;
  for (int h = h_max; h >= h_stop; --h) {
    Probe p;
    p.upper = d;
    p.pred = HeightPred::kExact;
    p.height = h;
    const auto rs = issue_probe(view, p, ledger, trace);
    if (!rs.empty()) d = rs.front().item;
  }

  TopKOptions opt;
  opt.k = k;
  opt.phi = phi;
  opt.h_max = h_max;

  TopKResult res;
  bool restricted_ok = false;
  if (d) {
    std::ostringstream payload;
    payload << "topk pivot d=" << d->value;
    broadcast_value(payload.str(), ledger, trace);
    std::vector<DataItem> below;
    for (const DataItem& it : participants) {
      if (it <= *d) below.push_back(it);
    }
    if (!below.empty()) {
      res = run_top_k(below, opt, rng.derive(1), ledger, trace);
      restricted_ok = !res.failed;
    }
  }
  if (!restricted_ok) {
    if (fallback_used) *fallback_used = true;
    res = run_top_k(participants, opt, rng.derive(2), ledger, trace);
  }
  res.cost = ledger - before;
  return res;
}

}  // namespace rankmon
