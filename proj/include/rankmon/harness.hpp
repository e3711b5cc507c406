#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "rankmon/core.hpp"
#include "rankmon/netsim.hpp"
#include "rankmon/queries.hpp"
#include "rankmon/workload.hpp"

namespace rankmon {

// Frozen constants produced by the calibrate subcommand. Acceptance runs and
// the statistical tests read these instead of re-deriving them, so every
// threshold is pinned before the run.
struct Constants {
  // defaults mirror calibration/frozen.json (one calibrate run, seed 1)
  double c_prime = 1.04;  // CoFaSel messages vs (1/phi)(log_{1/phi}(N/k)+1)
  double c1 = 2.72;       // top-k via select vs (k + log2 n)
  double c2 = 2.24;       // INITIALIZE vs 2*log2 n
  double c3 = 0.91;       // REFRESH response slope vs 2*log2 m
  double c4 = 15.95;      // REFRESH response intercept
  double c5 = 1.24;       // query top-k slope vs (log2 m + log2 log2 n)
  double c6 = 30.78;      // query top-k intercept
  double lambda = 14.0;   // amplification multiplier (spec default 24)
  double sample_const = 2.0;  // c_s (spec default 48)
  double tol_wellshaped = 0.40;
  double tol_position = 0.73;
  double tol_update_small = 0.07;
  double tol_update_large = 0.02;
  double tol_fallback = 0.03;
  double tol_rrs_upper = 0.35;  // rank(rough_rank) <= boundary slack

  static Constants load(const std::string& path);  // throws ConfigError
  void save(const std::string& path) const;
  std::string to_json() const;
};

struct Aggregate {
  std::int64_t count = 0;
  double mean = 0.0;
  double variance = 0.0;  // sample variance
  double stderr_mean = 0.0;
  double min = 0.0;
  double max = 0.0;

  static Aggregate of(std::span<const double> xs);
};

double binom_stderr(double p_hat, std::int64_t trials);

// One CSV row. Column set is fixed:
// trial,seed,protocol,n,phi,k,m,messages_unicast,messages_broadcast,
// messages_total,rounds,verdict,fallback_used,result_rank
struct TrialRow {
  int trial = 0;
  std::uint64_t seed = 0;
  std::string protocol;
  int n = 0;
  double phi = 0.5;
  int k = 0;
  int m = 0;
  std::int64_t messages_unicast = 0;
  std::int64_t messages_broadcast = 0;
  std::int64_t messages_total = 0;
  std::int64_t rounds = 0;
  bool pass = false;
  bool fallback_used = false;
  std::int64_t result_rank = -1;
};

std::string csv_header();
void write_csv(std::span<const TrialRow> rows, std::ostream& os);
std::string rows_to_csv(std::span<const TrialRow> rows);

// Sorted multiset of all current items, replaying the same epochs the
// protocols see. Batched update application keeps epochs O(n + m log m).
class RankOracle {
 public:
  void reset(std::span<const DataItem> items);
  void apply(std::span<const DataItem> removals, std::span<const DataItem> additions);
  std::span<const DataItem> sorted() const { return sorted_; }
  std::int64_t rank_of(const DataItem& d) const;
  std::uint64_t checksum() const;

 private:
  std::vector<DataItem> sorted_;
};

std::uint64_t items_checksum(std::span<const DataItem> items);

bool verify_top_k(std::span<const DataItem> result, std::span<const DataItem> oracle_sorted,
                  int k);

// --- experiment runners ------------------------------------------------

struct TopKRunOptions {
  int k = 10;
  int trials = 100;
  bool strict_walk = false;
  bool via_select = false;
  int via_c0 = 2;
};

std::vector<TrialRow> run_topk_trials(const Config& cfg, const TopKRunOptions& opt,
                                      EventTrace* trace = nullptr);

struct CofaselRunOptions {
  int k = 16;
  int trials = 100;
  bool amplified = false;
};

std::vector<TrialRow> run_cofasel_trials(const Config& cfg, const CofaselRunOptions& opt,
                                         EventTrace* trace = nullptr);

std::vector<TrialRow> run_approx_kselect_trials(const Config& cfg, int k, int trials,
                                                EventTrace* trace = nullptr);

// Fresh initializations; one row per (trial, grid k) with the rough-rank
// verdict of criterion 8.
std::vector<TrialRow> run_selemon_init_trials(const Config& cfg, int trials,
                                              std::span<const std::int64_t> k_grid,
                                              EventTrace* trace = nullptr);

// m random updates then REFRESH, repeated; one row per refresh.
std::vector<TrialRow> run_refresh_trials(const Config& cfg, int m, int refreshes,
                                         int trials, EventTrace* trace = nullptr);

struct QueryRunOptions {
  QueryKind kind = QueryKind::kTopK;
  int k = 32;
  int m = 256;
  int epochs = 50;
  int trials = 20;
  double eps = 0.25;
  double delta = 0.1;
};

// Multi-epoch runs against a live sketch; one row per query.
std::vector<TrialRow> run_query_trials(const Config& cfg, const QueryRunOptions& opt,
                                       const Constants& consts,
                                       EventTrace* trace = nullptr);

struct AdversaryRunResult {
  std::vector<TrialRow> rows;  // one per epoch query
  bool instances_valid = true;
  std::string validation_error;
};

AdversaryRunResult run_adversary_trials(const Config& cfg, int m, int epochs, int trials,
                                        EventTrace* trace = nullptr);

// Construction invariants of the hard instance, checked exhaustively.
bool validate_adversary_scenario(const Scenario& s, int m, std::string* error = nullptr);

// Scenario-file driven run (CLI --scenario).
std::vector<TrialRow> run_scenario_trials(const Config& cfg, const Scenario& scenario,
                                          int trials, const Constants& consts,
                                          EventTrace* trace = nullptr);

// --- calibration and acceptance ----------------------------------------

Constants calibrate(std::uint64_t seed, std::ostream& log);

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
};

std::vector<CriterionResult> run_acceptance(const Constants& consts, std::ostream& os,
                                            std::uint64_t seed = 1);

}  // namespace rankmon
