#pragma once

#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "rankmon/netsim.hpp"

namespace rankmon {

// Class/sub-class geometry. Ranks are cut into classes with boundaries
// (log2 n)^(8*C*level); each class carries a height band holding the expected
// maximum heights of its items, split into four sub-bands of which only
// tau' in {1,2} are materialized for representatives.
struct SketchParams {
  int n = 0;
  double phi = 0.5;
  double con = 0.25;
  int h_max = 1;
  double unit = 1.0;  // H = log_{1/phi}(log2 n)
  int levels = 0;     // materialized level indices 0..levels-1

  struct Band {
    double lo = 0.0;  // half-open (lo, hi]
    double hi = 0.0;
    bool contains(Height h) const { return static_cast<double>(h) > lo && static_cast<double>(h) <= hi; }
  };

  static SketchParams make(int n, double phi, double con, int h_max);

  double rank_boundary(int level) const;          // (log2 n)^(8*con*level)
  Band class_height_range(int level) const;       // (level*8CH, (level+1)*8CH]
  Band height_band(int level, int tau) const;     // sub-band, tau in 0..3
  double subclass_rank_lo(int level, int tau) const;
  double subclass_rank_hi(int level, int tau) const;

  // Sub-class windows past the population can never hold an item.
  bool structurally_empty(int level) const;

  // (level, tau') with tau' in {1,2} when h falls in a materialized band.
  std::optional<std::pair<int, int>> classify_height(Height h) const;

  // Level whose class height range contains h (clamped to the top level).
  int class_of_height(Height h) const;

  // Level answering a rank-k request: k in C_{level-1}.
  int level_for_rank(double k) const;
};

struct SketchEntry {
  DataItem item{};
  Height height = 1;  // height at the time the entry was stored
};

struct LevelState {
  bool sentinel = false;  // structurally empty or refill-exhausted: delegate
  bool filled = false;
  std::optional<SketchEntry> alarm;  // a_l, drawn from S_{l,1}
  std::optional<SketchEntry> rep;    // r_l, drawn from S_{l,2}
};

// Server-side state: smallest response per height plus per-level
// representatives. S_{l,tau'} is derived from by-height entries whose stored
// height falls in the band.
class RankSketch {
 public:
  RankSketch() = default;
  RankSketch(const SketchParams& params);

  const SketchParams& params() const { return params_; }
  int h_max() const { return params_.h_max; }

  const std::optional<SketchEntry>& entry_at(Height h) const {
    return by_height_[static_cast<size_t>(h)];
  }
  void store_entry(Height h, const SketchEntry& e) { by_height_[static_cast<size_t>(h)] = e; }
  void erase_entry(Height h) { by_height_[static_cast<size_t>(h)].reset(); }

  // Removes every stored entry owned by the node; returns true if any was.
  bool erase_entries_of(NodeId id);
  bool has_entry_of(NodeId id) const;

  LevelState& level(int l) { return levels_[static_cast<size_t>(l)]; }
  const LevelState& level(int l) const { return levels_[static_cast<size_t>(l)]; }
  int level_count() const { return static_cast<int>(levels_.size()); }

  std::vector<const SketchEntry*> subclass_members(int l, int tau) const;

  // Drops all entries in the level's class height range and unfills it.
  void delete_level(int l);

  std::int64_t time_step() const { return time_step_; }
  void advance_time() { ++time_step_; }

  void write_snapshot_tsv(std::ostream& os) const;

 private:
  SketchParams params_;
  std::vector<std::optional<SketchEntry>> by_height_;
  std::vector<LevelState> levels_;
  std::int64_t time_step_ = 0;
};

// What the nodes currently know about representatives, i.e. the content of
// the last table broadcasts. All nodes receive every broadcast, so their
// cached copies are identical; one shared board stands in for them. Rows go
// stale between a server-side deletion and the next broadcast by design.
struct RepBoard {
  struct Row {
    bool valid = false;
    SketchEntry alarm{};
    SketchEntry rep{};
  };
  std::vector<Row> rows;
};

// The SeleMon life cycle driver: owns the sketch and the broadcast board,
// mutates the live network (height redraws, dirty bookkeeping), and charges
// all communication to the ledger handed into each operation.
class SeleMon {
 public:
  SeleMon(Network& net, const SketchParams& params, const Rng& rng,
          RefreshStrategy strategy = RefreshStrategy::kOracleMax,
          int refill_max_attempts = 12);

  void initialize(CostLedger& ledger, EventTrace* trace = nullptr);
  void update(NodeId id, const DataItem& d, CostLedger& ledger, EventTrace* trace = nullptr);
  void refresh(CostLedger& ledger, EventTrace* trace = nullptr);

  // Item answering rank k with rank in [k, k*polylog] w.h.p.; nullopt is the
  // "use full population" marker (sentinel or unfilled level). Costs zero
  // messages and zero rounds. Throws std::out_of_range for k > n.
  std::optional<DataItem> rough_rank(std::int64_t k) const;

  const RankSketch& sketch() const { return sketch_; }
  const RepBoard& board() const { return board_; }
  const SketchParams& params() const { return params_; }
  bool initialized() const { return initialized_; }
  Network& network() { return net_; }
  const Network& network() const { return net_; }

 private:
  // Refill every unfilled non-sentinel level <= max_level from the given
  // participants (empty span = everyone). Chained CoFaSel descents; first
  // attempt reaches h = 1, retries only the unfilled bands.
  void rebuild_levels(int max_level, std::span<const NodeId> participants,
                      CostLedger& ledger, EventTrace* trace);

  void broadcast_reps(std::span<const int> levels, CostLedger& ledger, EventTrace* trace);

  // Max-height class of dirty nodes: free for the oracle-max strategy, band
  // by band probes for descend-probe. -1 when nothing is dirty.
  int max_dirty_class(CostLedger& ledger, EventTrace* trace);

  std::optional<DataItem> restriction_item(int l_star) const;

  Network& net_;
  SketchParams params_;
  RankSketch sketch_;
  RepBoard board_;
  Rng rep_rng_;
  Rng height_rng_;
  Rng redraw_rng_;
  GeometricSampler sampler_;
  RefreshStrategy strategy_;
  int refill_max_attempts_;
  bool initialized_ = false;
  std::uint64_t rebuild_counter_ = 0;
};

}  // namespace rankmon
