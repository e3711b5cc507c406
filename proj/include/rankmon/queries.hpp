#pragma once

#include <span>
#include <vector>

#include "rankmon/kselect.hpp"
#include "rankmon/selemon.hpp"
#include "rankmon/topk.hpp"

namespace rankmon {

enum class QueryKind { kTopK, kKSelect };

struct QueryReport {
  QueryKind kind = QueryKind::kTopK;
  int k = 0;
  std::vector<DataItem> items;  // TOPK output
  DataItem selected{};          // KSELECT output
  CostLedger cost;              // refresh share + announcement + one-shot (+ fallback)
  CostLedger refresh_share;
  bool pass = false;
  bool fallback_used = false;
  std::int64_t result_rank = -1;
};

// Exact Top-k for the current time step: refresh when dirty, prune the
// participant set with a rough-rank pivot (inclusive, so the pivot item
// itself stays eligible), fall back to the full population when the pruned
// set is too small. Always exact. oracle_sorted is the harness's sorted
// multiset of current items, used only for the verdict.
QueryReport query_top_k(int k, SeleMon& mon, const Rng& rng,
                        std::span<const DataItem> oracle_sorted, CostLedger& ledger,
                        EventTrace* trace = nullptr);

// (eps, delta)-approximate k-select with internal failure probability
// delta' = 1/log2(n).
QueryReport query_k_select(int k, double eps, double delta, SeleMon& mon, const Rng& rng,
                           double lambda, double sample_const,
                           std::span<const DataItem> oracle_sorted, CostLedger& ledger,
                           EventTrace* trace = nullptr);

bool kselect_window_pass(std::int64_t rank, int k, double eps);

}  // namespace rankmon
