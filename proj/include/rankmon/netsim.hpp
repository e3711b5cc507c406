#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "rankmon/core.hpp"

namespace rankmon {

// Unit-cost message accounting for one protocol execution. Every broadcast
// and every unicast costs exactly one message; totals never decrease within
// a run.
struct CostLedger {
  std::int64_t broadcasts = 0;
  std::int64_t unicasts = 0;
  std::int64_t rounds = 0;

  std::int64_t total_messages() const { return broadcasts + unicasts; }

  CostLedger& operator+=(const CostLedger& o) {
    broadcasts += o.broadcasts;
    unicasts += o.unicasts;
    rounds += o.rounds;
    return *this;
  }

  friend CostLedger operator-(CostLedger a, const CostLedger& b) {
    a.broadcasts -= b.broadcasts;
    a.unicasts -= b.unicasts;
    a.rounds -= b.rounds;
    return a;
  }

  friend bool operator==(const CostLedger&, const CostLedger&) = default;
};

enum class HeightPred { kAtLeast, kExact };

// A server probe: nodes respond when their item lies strictly inside the
// open value window, their height satisfies the predicate, and (optionally)
// they are dirty. instance tags the amplification instance the probe belongs
// to so parallel instances can share a round.
struct Probe {
  std::optional<DataItem> lower{};  // respond iff lower < d_i
  std::optional<DataItem> upper{};  // respond iff d_i < upper
  HeightPred pred = HeightPred::kAtLeast;
  Height height = 1;
  bool dirty_only = false;
  int instance = 0;

  bool admits_item(const DataItem& d) const {
    if (lower && !(*lower < d)) return false;
    if (upper && !(d < *upper)) return false;
    return true;
  }

  bool admits_height(Height h) const {
    return pred == HeightPred::kAtLeast ? h >= height : h == height;
  }
};

struct Response {
  DataItem item{};
  NodeId node = 0;
};

enum class EventKind { kBroadcast, kUnicast };

// Append-only log of every charged message; the replay oracle in tests
// recounts it against the ledger. One tab-separated line per event:
// trial, round, BCAST|UNICAST, instance, node|-, payload summary.
class EventTrace {
 public:
  struct Row {
    int trial;
    std::int64_t round;
    EventKind kind;
    int instance;
    NodeId node;  // -1 for broadcasts
    std::string payload;
  };

  void set_trial(int trial) { trial_ = trial; }
  int trial() const { return trial_; }

  void log_broadcast(std::int64_t round, int instance, std::string payload) {
    rows_.push_back(Row{trial_, round, EventKind::kBroadcast, instance, -1, std::move(payload)});
  }
  void log_unicast(std::int64_t round, int instance, NodeId node, const DataItem& d) {
    rows_.push_back(Row{trial_, round, EventKind::kUnicast, instance, node,
                        std::to_string(d.value)});
  }

  const std::vector<Row>& rows() const { return rows_; }
  void clear() { rows_.clear(); }

  void write_tsv(std::ostream& os) const;
  std::string to_tsv() const;

 private:
  int trial_ = 0;
  std::vector<Row> rows_;
};

// Live node population: per-node state plus a dirty list. Answers probes by
// scanning current items/heights; used by the update/refresh machinery and
// by tests that mirror the three-node examples.
class Network {
 public:
  explicit Network(int n);

  int size() const { return static_cast<int>(nodes_.size()); }
  NodeState& node(NodeId id) { return nodes_[static_cast<size_t>(id)]; }
  const NodeState& node(NodeId id) const { return nodes_[static_cast<size_t>(id)]; }
  std::span<const NodeState> nodes() const { return nodes_; }

  // Overwrites node's item, marks it dirty. Height is untouched here; the
  // caller decides when to redraw.
  void set_item(NodeId id, const DataItem& d);
  void set_height(NodeId id, Height h) { nodes_[static_cast<size_t>(id)].height = h; }

  const std::vector<NodeId>& dirty_nodes() const { return dirty_; }
  bool any_dirty() const { return !dirty_.empty(); }
  void clear_dirty();

  void collect(const Probe& p, std::vector<Response>& out) const;

 private:
  std::vector<NodeState> nodes_;
  std::vector<NodeId> dirty_;
};

// Per-height buckets of (item, node) for one or more amplification
// instances, each instance with its own independently drawn heights. The
// one-shot protocols probe this snapshot; a view is rebuilt per protocol run
// (the protocols are memoryless).
class InstanceView {
 public:
  // Draws fresh geometric heights (clamped to h_max) for every participant
  // in every instance. Instance j consumes stream rng.derive(j).
  InstanceView(std::span<const DataItem> participants, int instances, double phi,
               int h_max, const Rng& height_rng);

  // Single instance over externally supplied (item, height) pairs.
  InstanceView(std::span<const DataItem> items, std::span<const Height> heights,
               int h_max);

  int instances() const { return static_cast<int>(buckets_.size()); }
  int h_max() const { return h_max_; }
  std::size_t population() const { return population_; }

  // Sorts every bucket by item; needed before window probes with kAtLeast
  // predicates (the in-order tree walk). Idempotent.
  void sort_buckets();

  void collect(const Probe& p, std::vector<Response>& out) const;

  std::span<const Response> bucket(int instance, Height h) const {
    return buckets_[static_cast<size_t>(instance)][static_cast<size_t>(h)];
  }

 private:
  int h_max_;
  std::size_t population_ = 0;
  bool sorted_ = false;
  // buckets_[instance][height] -> responses at exactly that height
  std::vector<std::vector<std::vector<Response>>> buckets_;
};

// One communication round: every probe in the batch costs one broadcast,
// every response one unicast, and the batch advances rounds by exactly one
// regardless of its size. Responses are sorted ascending by item.
template <typename Target>
std::vector<std::vector<Response>> issue_probe_batch(const Target& target,
                                                     std::span<const Probe> probes,
                                                     CostLedger& ledger,
                                                     EventTrace* trace = nullptr);

extern template std::vector<std::vector<Response>> issue_probe_batch<Network>(
    const Network&, std::span<const Probe>, CostLedger&, EventTrace*);
extern template std::vector<std::vector<Response>> issue_probe_batch<InstanceView>(
    const InstanceView&, std::span<const Probe>, CostLedger&, EventTrace*);

std::vector<Response> issue_probe(const Network& net, const Probe& p, CostLedger& ledger,
                                  EventTrace* trace = nullptr);
std::vector<Response> issue_probe(const InstanceView& view, const Probe& p,
                                  CostLedger& ledger, EventTrace* trace = nullptr);

// Standalone informational broadcast (one message, one round).
void broadcast_value(std::string payload, CostLedger& ledger, EventTrace* trace = nullptr,
                     int instance = 0);

// Batched informational broadcasts: one round, |payloads| messages.
void broadcast_batch(std::span<const std::string> payloads, CostLedger& ledger,
                     EventTrace* trace = nullptr, int instance = 0);

// Node-initiated notice to the server (one unicast, no round advance).
void unicast_to_server(NodeId node, const DataItem& payload, CostLedger& ledger,
                       EventTrace* trace = nullptr, int instance = 0);

std::string probe_summary(const Probe& p);

}  // namespace rankmon
