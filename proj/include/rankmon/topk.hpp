#pragma once

#include <span>
#include <vector>

#include "rankmon/netsim.hpp"

namespace rankmon {

struct TopKOptions {
  int k = 1;
  double phi = 0.5;
  int h_max = 1;
  // Literal recursion: |S| = k is only checked when a branch bottoms out at
  // h = 0 instead of terminating the walk at the k-th emission. Same output,
  // a few extra probes; kept for A/B cost comparison.
  bool strict_walk = false;
};

struct TopKResult {
  // Ascending; exactly the k smallest participants unless failed. When
  // failed (k exceeds the participant count) this holds the full sorted
  // participant list instead.
  std::vector<DataItem> items;
  CostLedger cost;
  bool failed = false;
};

// One-shot exact Top-k: geometric heights induce a search-tree structure and
// an in-order walk emits the k smallest items in ascending order, one probe
// per communication round. Heights are drawn per invocation (clamped to
// h_max; equivalent in response distribution since the walk starts at h_max).
TopKResult run_top_k(std::span<const DataItem> participants, const TopKOptions& opt,
                     const Rng& rng, CostLedger& ledger, EventTrace* trace = nullptr);

// Same walk over an existing single-instance view (no height redraw).
TopKResult run_top_k_on_view(InstanceView& view, const TopKOptions& opt,
                             CostLedger& ledger, EventTrace* trace = nullptr);

}  // namespace rankmon
