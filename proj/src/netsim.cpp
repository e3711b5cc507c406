#include "rankmon/netsim.hpp"

#include <cassert>
#include <sstream>

namespace rankmon {

void EventTrace::write_tsv(std::ostream& os) const {
  for (const Row& r : rows_) {
    os << r.trial << '\t' << r.round << '\t'
       << (r.kind == EventKind::kBroadcast ? "BCAST" : "UNICAST") << '\t' << r.instance
       << '\t';
    if (r.node < 0) {
      os << '-';
    } else {
      os << r.node;
    }
    os << '\t' << r.payload << '\n';
  }
}

std::string EventTrace::to_tsv() const {
  std::ostringstream os;
  write_tsv(os);
  return os.str();
}

Network::Network(int n) : nodes_(static_cast<size_t>(n)) {
  for (int i = 0; i < n; ++i) {
    nodes_[static_cast<size_t>(i)].id = i;
    nodes_[static_cast<size_t>(i)].item.owner = i;
  }
}

void Network::set_item(NodeId id, const DataItem& d) {
  NodeState& ns = nodes_[static_cast<size_t>(id)];
  ns.item = d;
  if (!ns.dirty) {
    ns.dirty = true;
    dirty_.push_back(id);
  }
}

void Network::clear_dirty() {
  for (NodeId id : dirty_) nodes_[static_cast<size_t>(id)].dirty = false;
  dirty_.clear();
}

void Network::collect(const Probe& p, std::vector<Response>& out) const {
  out.clear();
  if (p.dirty_only) {
    for (NodeId id : dirty_) {
      const NodeState& ns = nodes_[static_cast<size_t>(id)];
      if (p.admits_height(ns.height) && p.admits_item(ns.item))
        out.push_back(Response{ns.item, ns.id});
    }
  } else {
    for (const NodeState& ns : nodes_) {
      if (p.admits_height(ns.height) && p.admits_item(ns.item))
        out.push_back(Response{ns.item, ns.id});
    }
  }
  std::sort(out.begin(), out.end(),
            [](const Response& a, const Response& b) { return a.item < b.item; });
}

InstanceView::InstanceView(std::span<const DataItem> participants, int instances,
                           double phi, int h_max, const Rng& height_rng)
    : h_max_(h_max), population_(participants.size()) {
  buckets_.resize(static_cast<size_t>(instances));
  GeometricSampler sampler(phi);
  for (int inst = 0; inst < instances; ++inst) {
    auto& by_height = buckets_[static_cast<size_t>(inst)];
    by_height.assign(static_cast<size_t>(h_max_) + 1, {});
    Rng rng = height_rng.derive(static_cast<std::uint64_t>(inst));
    for (const DataItem& d : participants) {
      Height h = clamp_height(sampler(rng), h_max_);
      by_height[static_cast<size_t>(h)].push_back(Response{d, d.owner});
    }
  }
}

InstanceView::InstanceView(std::span<const DataItem> items,
                           std::span<const Height> heights, int h_max)
    : h_max_(h_max), population_(items.size()) {
  assert(items.size() == heights.size());
  buckets_.resize(1);
  auto& by_height = buckets_[0];
  by_height.assign(static_cast<size_t>(h_max_) + 1, {});
  for (size_t i = 0; i < items.size(); ++i) {
    Height h = clamp_height(heights[i], h_max_);
    by_height[static_cast<size_t>(h)].push_back(Response{items[i], items[i].owner});
  }
}

void InstanceView::sort_buckets() {
  if (sorted_) return;
  for (auto& inst : buckets_) {
    for (auto& bucket : inst) {
      std::sort(bucket.begin(), bucket.end(),
                [](const Response& a, const Response& b) { return a.item < b.item; });
    }
  }
  sorted_ = true;
}

void InstanceView::collect(const Probe& p, std::vector<Response>& out) const {
  assert(!p.dirty_only && "views carry no dirty flags");
  out.clear();
  const auto& by_height = buckets_[static_cast<size_t>(p.instance)];
  const Height lo = p.height;
  const Height hi = p.pred == HeightPred::kExact ? p.height : h_max_;
  for (Height h = lo; h <= hi; ++h) {
    const auto& bucket = by_height[static_cast<size_t>(h)];
    if (sorted_) {
      // window slice via binary search, then linear copy
      auto first = bucket.begin();
      auto last = bucket.end();
      if (p.lower) {
        first = std::upper_bound(first, last, *p.lower,
                                 [](const DataItem& v, const Response& r) { return v < r.item; });
      }
      if (p.upper) {
        last = std::lower_bound(first, last, *p.upper,
                                [](const Response& r, const DataItem& v) { return r.item < v; });
      }
      out.insert(out.end(), first, last);
    } else {
      for (const Response& r : bucket) {
        if (p.admits_item(r.item)) out.push_back(r);
      }
    }
  }
  std::sort(out.begin(), out.end(),
            [](const Response& a, const Response& b) { return a.item < b.item; });
}

std::string probe_summary(const Probe& p) {
  std::ostringstream os;
  os << "probe h" << (p.pred == HeightPred::kAtLeast ? ">=" : "=") << p.height << " (";
  if (p.lower) {
    os << p.lower->value;
  } else {
    os << "-inf";
  }
  os << ',';
  if (p.upper) {
    os << p.upper->value;
  } else {
    os << "+inf";
  }
  os << ')';
  if (p.dirty_only) os << " dirty";
  return os.str();
}

template <typename Target>
std::vector<std::vector<Response>> issue_probe_batch(const Target& target,
                                                     std::span<const Probe> probes,
                                                     CostLedger& ledger,
                                                     EventTrace* trace) {
  ledger.rounds += 1;
  const std::int64_t round = ledger.rounds;
  std::vector<std::vector<Response>> all;
  all.reserve(probes.size());
  for (const Probe& p : probes) {
    ledger.broadcasts += 1;
    if (trace) trace->log_broadcast(round, p.instance, probe_summary(p));
    std::vector<Response> rs;
    target.collect(p, rs);
    ledger.unicasts += static_cast<std::int64_t>(rs.size());
    if (trace) {
      for (const Response& r : rs) trace->log_unicast(round, p.instance, r.node, r.item);
    }
    all.push_back(std::move(rs));
  }
  return all;
}

template std::vector<std::vector<Response>> issue_probe_batch<Network>(
    const Network&, std::span<const Probe>, CostLedger&, EventTrace*);
template std::vector<std::vector<Response>> issue_probe_batch<InstanceView>(
    const InstanceView&, std::span<const Probe>, CostLedger&, EventTrace*);

std::vector<Response> issue_probe(const Network& net, const Probe& p, CostLedger& ledger,
                                  EventTrace* trace) {
  return std::move(issue_probe_batch(net, std::span<const Probe>(&p, 1), ledger, trace)[0]);
}

std::vector<Response> issue_probe(const InstanceView& view, const Probe& p,
                                  CostLedger& ledger, EventTrace* trace) {
  return std::move(issue_probe_batch(view, std::span<const Probe>(&p, 1), ledger, trace)[0]);
}

void broadcast_value(std::string payload, CostLedger& ledger, EventTrace* trace,
                     int instance) {
  ledger.rounds += 1;
  ledger.broadcasts += 1;
  if (trace) trace->log_broadcast(ledger.rounds, instance, std::move(payload));
}

void broadcast_batch(std::span<const std::string> payloads, CostLedger& ledger,
                     EventTrace* trace, int instance) {
  if (payloads.empty()) return;
  ledger.rounds += 1;
  ledger.broadcasts += static_cast<std::int64_t>(payloads.size());
  if (trace) {
    for (const std::string& s : payloads) trace->log_broadcast(ledger.rounds, instance, s);
  }
}

void unicast_to_server(NodeId node, const DataItem& payload, CostLedger& ledger,
                       EventTrace* trace, int instance) {
  ledger.unicasts += 1;
  if (trace) trace->log_unicast(ledger.rounds, instance, node, payload);
}

}  // namespace rankmon
