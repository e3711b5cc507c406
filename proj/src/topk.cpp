#include "rankmon/topk.hpp"

namespace rankmon {

namespace {

class Walk {
 public:
  Walk(InstanceView& view, const TopKOptions& opt, CostLedger& ledger, EventTrace* trace)
      : view_(view), opt_(opt), ledger_(ledger), trace_(trace) {
    items_.reserve(static_cast<size_t>(opt.k));
  }

  void run() {
    recurse(std::nullopt, std::nullopt, opt_.h_max);
  }

  std::vector<DataItem> take_items() { return std::move(items_); }
  bool satisfied() const { return static_cast<int>(items_.size()) >= opt_.k; }

 private:
  bool done() const { return done_; }

  void emit(const DataItem& d) {
    if (static_cast<int>(items_.size()) < opt_.k) items_.push_back(d);
    if (!opt_.strict_walk && static_cast<int>(items_.size()) == opt_.k) done_ = true;
  }

  void recurse(std::optional<DataItem> lo, std::optional<DataItem> hi, int h) {
    if (done_) return;
    if (h == 0) {
      if (opt_.strict_walk && static_cast<int>(items_.size()) == opt_.k) done_ = true;
      return;
    }
    Probe p;
    p.lower = lo;
    p.upper = hi;
    p.pred = HeightPred::kAtLeast;
    p.height = h;
    const std::vector<Response> rs = issue_probe(view_, p, ledger_, trace_);
    if (rs.empty()) {
      recurse(lo, hi, h - 1);
      return;
    }
    recurse(lo, rs.front().item, h - 1);
    if (done_) return;
    emit(rs.front().item);
    for (size_t i = 0; i + 1 < rs.size(); ++i) {
      recurse(rs[i].item, rs[i + 1].item, h - 1);
      if (done_) return;
      emit(rs[i + 1].item);
    }
    recurse(rs.back().item, hi, h - 1);
  }

  InstanceView& view_;
  const TopKOptions& opt_;
  CostLedger& ledger_;
  EventTrace* trace_;
  std::vector<DataItem> items_;
  bool done_ = false;
};

}  // namespace

TopKResult run_top_k_on_view(InstanceView& view, const TopKOptions& opt,
                             CostLedger& ledger, EventTrace* trace) {
  view.sort_buckets();
  const CostLedger before = ledger;

  Walk walk(view, opt, ledger, trace);
  walk.run();

  TopKResult res;
  res.items = walk.take_items();
  res.failed = static_cast<int>(res.items.size()) < opt.k;
  res.cost = ledger - before;
  return res;
}

TopKResult run_top_k(std::span<const DataItem> participants, const TopKOptions& opt,
                     const Rng& rng, CostLedger& ledger, EventTrace* trace) {
  InstanceView view(participants, 1, opt.phi, opt.h_max, rng.derive(rng_tag::kHeights));
  return run_top_k_on_view(view, opt, ledger, trace);
}

}  // namespace rankmon
