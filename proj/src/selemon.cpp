#include "rankmon/selemon.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <sstream>

namespace rankmon {

SketchParams SketchParams::make(int n, double phi, double con, int h_max) {
  SketchParams p;
  p.n = n;
  p.phi = phi;
  p.con = con;
  p.h_max = h_max;
  const double log_n = std::log2(static_cast<double>(n));
  p.unit = log_inv_phi(log_n, phi);
  // materialize every level whose lower rank boundary is within the
  // population, plus the structurally empty ones up to where the class
  // height range clears h_max (they still answer class_of_height queries)
  int levels = 0;
  while (p.rank_boundary(levels) <= static_cast<double>(n)) ++levels;
  while (levels * 8.0 * con * p.unit < static_cast<double>(h_max)) ++levels;
  p.levels = levels;
  return p;
}

double SketchParams::rank_boundary(int level) const {
  const double log_n = std::log2(static_cast<double>(n));
  return std::pow(log_n, 8.0 * con * static_cast<double>(level));
}

SketchParams::Band SketchParams::class_height_range(int level) const {
  const double w = 8.0 * con * unit;
  return Band{static_cast<double>(level) * w, static_cast<double>(level + 1) * w};
}

SketchParams::Band SketchParams::height_band(int level, int tau) const {
  const double base = static_cast<double>(level) * 8.0 * con;
  return Band{(base + (2.0 * tau + 1.0) * con) * unit,
              (base + (2.0 * tau + 3.0) * con) * unit};
}

double SketchParams::subclass_rank_lo(int level, int tau) const {
  const double log_n = std::log2(static_cast<double>(n));
  return std::pow(log_n, (static_cast<double>(level) * 8.0 + 2.0 * tau) * con);
}

double SketchParams::subclass_rank_hi(int level, int tau) const {
  const double log_n = std::log2(static_cast<double>(n));
  return std::pow(log_n, (static_cast<double>(level) * 8.0 + 2.0 * tau + 2.0) * con);
}

bool SketchParams::structurally_empty(int level) const {
  // no rank can fall inside the tau'=1 window (and a fortiori tau'=2)
  return subclass_rank_lo(level, 1) > static_cast<double>(n);
}

std::optional<std::pair<int, int>> SketchParams::classify_height(Height h) const {
  for (int l = 0; l < levels; ++l) {
    if (static_cast<double>(h) <= class_height_range(l).lo) break;
    for (int tau = 1; tau <= 2; ++tau) {
      if (height_band(l, tau).contains(h)) return std::make_pair(l, tau);
    }
  }
  return std::nullopt;
}

int SketchParams::class_of_height(Height h) const {
  for (int l = 0; l < levels; ++l) {
    if (static_cast<double>(h) <= class_height_range(l).hi) return l;
  }
  return levels - 1;
}

int SketchParams::level_for_rank(double k) const {
  int l = 1;
  while (rank_boundary(l) <= k) ++l;
  return l;  // k in C_{l-1}; may exceed the top materialized level
}

RankSketch::RankSketch(const SketchParams& params) : params_(params) {
  by_height_.assign(static_cast<size_t>(params.h_max) + 1, std::nullopt);
  levels_.resize(static_cast<size_t>(params.levels));
  for (int l = 0; l < params.levels; ++l) {
    levels_[static_cast<size_t>(l)].sentinel = params.structurally_empty(l);
  }
}

bool RankSketch::erase_entries_of(NodeId id) {
  bool any = false;
  for (auto& e : by_height_) {
    if (e && e->item.owner == id) {
      e.reset();
      any = true;
    }
  }
  return any;
}

bool RankSketch::has_entry_of(NodeId id) const {
  for (const auto& e : by_height_) {
    if (e && e->item.owner == id) return true;
  }
  return false;
}

std::vector<const SketchEntry*> RankSketch::subclass_members(int l, int tau) const {
  std::vector<const SketchEntry*> out;
  const SketchParams::Band band = params_.height_band(l, tau);
  for (Height h = 1; h <= params_.h_max; ++h) {
    const auto& e = by_height_[static_cast<size_t>(h)];
    if (e && band.contains(h)) out.push_back(&*e);
  }
  return out;
}

void RankSketch::delete_level(int l) {
  const SketchParams::Band range = params_.class_height_range(l);
  for (Height h = 1; h <= params_.h_max; ++h) {
    if (range.contains(h)) by_height_[static_cast<size_t>(h)].reset();
  }
  LevelState& st = levels_[static_cast<size_t>(l)];
  st.filled = false;
  st.alarm.reset();
  st.rep.reset();
}

void RankSketch::write_snapshot_tsv(std::ostream& os) const {
  for (int l = 0; l < level_count(); ++l) {
    const LevelState& st = levels_[static_cast<size_t>(l)];
    os << l << '\t' << (st.sentinel ? "sentinel" : (st.filled ? "filled" : "unfilled"));
    for (const auto& e : {st.alarm, st.rep}) {
      if (e) {
        os << '\t' << e->item.value << '/' << e->height;
      } else {
        os << '\t' << '-';
      }
    }
    os << '\t' << subclass_members(l, 1).size() << '\t' << subclass_members(l, 2).size()
       << '\n';
  }
}

SeleMon::SeleMon(Network& net, const SketchParams& params, const Rng& rng,
                 RefreshStrategy strategy, int refill_max_attempts)
    : net_(net),
      params_(params),
      sketch_(params),
      rep_rng_(rng.derive(rng_tag::kReps)),
      height_rng_(rng.derive(rng_tag::kHeights)),
      redraw_rng_(rng.derive(rng_tag::kRedraw)),
      sampler_(params.phi),
      strategy_(strategy),
      refill_max_attempts_(refill_max_attempts) {
  board_.rows.resize(static_cast<size_t>(params.levels));
}

void SeleMon::rebuild_levels(int max_level, std::span<const NodeId> participants,
                             CostLedger& ledger, EventTrace* trace) {
  std::vector<NodeId> everyone;
  auto population = [&]() -> std::span<const NodeId> {
    if (everyone.empty()) {
      everyone.resize(static_cast<size_t>(net_.size()));
      for (int i = 0; i < net_.size(); ++i) everyone[static_cast<size_t>(i)] = i;
    }
    return everyone;
  };
  if (participants.empty()) participants = population();

  auto unfilled = [&]() {
    std::vector<int> out;
    for (int l = 0; l <= max_level && l < sketch_.level_count(); ++l) {
      const LevelState& st = sketch_.level(l);
      if (!st.sentinel && !st.filled) out.push_back(l);
    }
    return out;
  };

  std::vector<DataItem> items;
  std::vector<Height> heights;
  int attempt = 0;
  for (std::vector<int> todo = unfilled(); !todo.empty(); todo = unfilled()) {
    ++attempt;
    if (attempt > refill_max_attempts_) {
      // population cannot support these levels at this scale: delegate
      for (int l : todo) sketch_.level(l).sentinel = true;
      break;
    }
    std::span<const NodeId> part = participants;
    if (attempt > refill_max_attempts_ / 2) part = population();

    // lowest height any unfilled level still needs
    int floor_h = 1;
    if (attempt > 1) {
      double lo = params_.height_band(todo.front(), 1).lo;
      for (int l : todo) lo = std::min(lo, params_.height_band(l, 1).lo);
      floor_h = std::max(1, static_cast<int>(std::floor(lo)) + 1);
    }

    // fresh geometric heights for every participant of this attempt
    items.clear();
    heights.clear();
    items.reserve(part.size());
    heights.reserve(part.size());
    Rng attempt_rng = height_rng_.derive(rebuild_counter_++);
    for (NodeId id : part) {
      const Height h = clamp_height(sampler_(attempt_rng), params_.h_max);
      net_.set_height(id, h);
      items.push_back(net_.node(id).item);
      heights.push_back(h);
    }
    InstanceView view(items, heights, params_.h_max);

    auto storable = [&](Height h) {
      const int cls = params_.class_of_height(h);
      for (int l : todo) {
        if (l == cls) return true;
      }
      return false;
    };

    // chained descent: probe d_i < d_min at each exact height, keep the
    // smallest response per storable height
    std::optional<DataItem> d_min;
    for (Height h = params_.h_max; h >= floor_h; --h) {
      Probe p;
      p.upper = d_min;
      p.pred = HeightPred::kExact;
      p.height = h;
      const auto rs = issue_probe(view, p, ledger, trace);
      if (rs.empty()) continue;
      d_min = rs.front().item;
      if (storable(h)) {
        const auto& existing = sketch_.entry_at(h);
        if (!existing || rs.front().item < existing->item) {
          sketch_.store_entry(h, SketchEntry{rs.front().item, h});
        }
      }
    }

    for (int l : todo) {
      auto s1 = sketch_.subclass_members(l, 1);
      auto s2 = sketch_.subclass_members(l, 2);
      if (s1.empty() || s2.empty()) continue;
      LevelState& st = sketch_.level(l);
      st.alarm = *s1[rep_rng_.below(s1.size())];
      st.rep = *s2[rep_rng_.below(s2.size())];
      st.filled = true;
    }
  }
}

void SeleMon::broadcast_reps(std::span<const int> levels, CostLedger& ledger,
                             EventTrace* trace) {
  if (levels.empty()) return;
  std::vector<std::string> payloads;
  for (int l : levels) {
    const LevelState& st = sketch_.level(l);
    RepBoard::Row& row = board_.rows[static_cast<size_t>(l)];
    std::ostringstream os;
    if (st.filled) {
      row.valid = true;
      row.alarm = *st.alarm;
      row.rep = *st.rep;
      os << "reps L" << l << " a=" << st.alarm->item.value << " r=" << st.rep->item.value;
    } else {
      row.valid = false;
      os << "reps L" << l << " cleared";
    }
    payloads.push_back(os.str());
  }
  broadcast_batch(payloads, ledger, trace);
}

void SeleMon::initialize(CostLedger& ledger, EventTrace* trace) {
  sketch_ = RankSketch(params_);
  for (auto& row : board_.rows) row.valid = false;
  rebuild_levels(sketch_.level_count() - 1, {}, ledger, trace);
  std::vector<int> rebuilt;
  for (int l = 0; l < sketch_.level_count(); ++l) {
    if (!sketch_.level(l).sentinel) rebuilt.push_back(l);
  }
  broadcast_reps(rebuilt, ledger, trace);
  net_.clear_dirty();
  initialized_ = true;
}

void SeleMon::update(NodeId id, const DataItem& d, CostLedger& ledger, EventTrace* trace) {
  NodeState& ns = net_.node(id);
  const DataItem old_item = ns.item;
  const Height old_height = ns.height;

  net_.set_item(id, d);
  sketch_.erase_entries_of(id);

  // node-local trigger check against the broadcast-cached representative table
  std::vector<int> fired;
  for (int l = 0; l < static_cast<int>(board_.rows.size()); ++l) {
    const RepBoard::Row& row = board_.rows[static_cast<size_t>(l)];
    if (!row.valid) continue;
    const bool hit_rep = old_item == row.alarm.item || old_item == row.rep.item;
    const bool in_band = old_height >= row.alarm.height && old_height <= row.rep.height;
    if (hit_rep || (in_band && d < row.alarm.item)) fired.push_back(l);
  }
  if (!fired.empty()) {
    unicast_to_server(id, d, ledger, trace);
    for (int l : fired) {
      if (l < sketch_.level_count()) sketch_.delete_level(l);
    }
  }

  ns.height = clamp_height(sampler_(redraw_rng_), params_.h_max);
}

int SeleMon::max_dirty_class(CostLedger& ledger, EventTrace* trace) {
  if (!net_.any_dirty()) return -1;
  if (strategy_ == RefreshStrategy::kOracleMax) {
    Height max_h = 1;
    for (NodeId id : net_.dirty_nodes()) max_h = std::max(max_h, net_.node(id).height);
    return params_.class_of_height(max_h);
  }
  // descend-probe: one broadcast per sub-band from the top until a dirty
  // node answers; the responding band pins the class
  struct Step {
    int level;
    Height threshold;
  };
  std::vector<Step> steps;
  for (int l = params_.levels - 1; l >= 0; --l) {
    for (int tau = 3; tau >= 0; --tau) {
      const auto band = params_.height_band(l, tau);
      const Height t = static_cast<Height>(std::floor(band.lo)) + 1;
      if (t > params_.h_max) continue;
      if (!steps.empty() && steps.back().threshold <= t) continue;
      steps.push_back(Step{l, t});
    }
  }
  if (steps.empty() || steps.back().threshold > 1) {
    steps.push_back(Step{0, 1});
  }
  for (const Step& s : steps) {
    Probe p;
    p.pred = HeightPred::kAtLeast;
    p.height = s.threshold;
    p.dirty_only = true;
    const auto rs = issue_probe(net_, p, ledger, trace);
    if (!rs.empty()) {
      Height max_h = s.threshold;
      for (const Response& r : rs) {
        max_h = std::max(max_h, net_.node(r.node).height);
      }
      return params_.class_of_height(max_h);
    }
  }
  return 0;
}

std::optional<DataItem> SeleMon::restriction_item(int l_star) const {
  // The rebuild of level l_star must see all ranks its class spans, so the
  // bound comes from the lowest filled level strictly above it. Restricting
  // by r_{l_star} itself would re-source the level from below its own
  // representative and shrink it monotonically across refreshes.
  for (int l = l_star + 1; l < sketch_.level_count(); ++l) {
    const LevelState& st = sketch_.level(l);
    if (st.sentinel) break;
    if (st.filled) return st.rep->item;
  }
  return std::nullopt;  // full population
}

void SeleMon::refresh(CostLedger& ledger, EventTrace* trace) {
  assert(initialized_);
  sketch_.advance_time();

  // lowest level above which everything is filled
  int unfilled_top = -1;
  for (int l = sketch_.level_count() - 1; l >= 0; --l) {
    const LevelState& st = sketch_.level(l);
    if (!st.sentinel && !st.filled) {
      unfilled_top = l;
      break;
    }
  }
  const int dirty_class = max_dirty_class(ledger, trace);
  const int l_star = std::max(unfilled_top, dirty_class);
  if (l_star < 0) {
    net_.clear_dirty();
    return;
  }

  const std::optional<DataItem> bound = restriction_item(l_star);
  std::vector<NodeId> participants;
  if (bound) {
    for (const NodeState& ns : net_.nodes()) {
      if (ns.item < *bound) participants.push_back(ns.id);
    }
  }

  std::vector<int> rebuilt;
  for (int l = 0; l <= l_star && l < sketch_.level_count(); ++l) {
    if (sketch_.level(l).sentinel) continue;
    sketch_.delete_level(l);
    rebuilt.push_back(l);
  }
  rebuild_levels(l_star, participants, ledger, trace);
  broadcast_reps(rebuilt, ledger, trace);
  net_.clear_dirty();
}

std::optional<DataItem> SeleMon::rough_rank(std::int64_t k) const {
  if (k < 1 || k > net_.size()) {
    throw std::out_of_range("rough_rank: rank outside [1, n]");
  }
  const int l = params_.level_for_rank(static_cast<double>(k));
  if (l >= sketch_.level_count()) return std::nullopt;
  const LevelState& st = sketch_.level(l);
  if (st.sentinel || !st.filled) return std::nullopt;
  return st.rep->item;
}

}  // namespace rankmon
