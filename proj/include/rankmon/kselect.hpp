#pragma once

#include <optional>
#include <span>
#include <vector>

#include "rankmon/netsim.hpp"
#include "rankmon/topk.hpp"

namespace rankmon {

// Descent schedule for one CoFaSel run. h_min targets rank ~7k; alpha is the
// fractional part of log_{1/phi}(7k) and j_star the response index picked at
// the final level.
struct CofaselPlan {
  int h_min = 1;
  double alpha = 1.0;
  int j_star = 1;
  bool clamped = false;  // h_min exceeded h_max and was clamped down
};

CofaselPlan cofasel_plan(double phi, int k, int h_max);

struct SelectMeta {
  bool shortfall = false;         // fewer than j_star (or p*k) responses at the end
  bool extended_descent = false;  // descended below h_min to find any response
  bool clamped_h_min = false;
  int instances = 1;
  std::int64_t samples = 0;                 // ApproKSel sampling responses
  std::vector<DataItem> instance_outputs;   // amplified runs only
};

struct SelectResult {
  DataItem item{};
  CostLedger cost;
  SelectMeta meta;
};

// Chernoff sample size and coin bias for the sampling stage.
struct SampleParams {
  double eps = 0.0;
  double delta = 0.0;
  double sample_size = 0.0;  // (1/eps^2) * ln(2/delta)
  double coin_p = 1.0;       // min(1, (c_s/k) * sample_size)
};

SampleParams make_sample_params(double eps, double delta, int k, double sample_const);

// Constant-factor selection: clamp heights, descend h_max..h_min probing
// {d_i < d_min, h_i = h}, keep the smallest response per level, and output
// the j_star-th smallest response at h_min. Lands in [k, 42k] with constant
// probability.
SelectResult run_cofasel(std::span<const DataItem> participants, double phi, int h_max,
                         int k, const Rng& rng, CostLedger& ledger,
                         EventTrace* trace = nullptr);

// Median-of-instances amplification. r = max(1, ceil(lambda * ln(1/delta')))
// independent instances run batched per height, so rounds match a single
// instance plus one final broadcast of the winner.
SelectResult run_cofasel_amp(std::span<const DataItem> participants, double phi,
                             int h_max, int k, double delta_prime, double lambda,
                             const Rng& rng, CostLedger& ledger,
                             EventTrace* trace = nullptr);

int amp_instances(double lambda, double delta_prime);

// (eps, delta)-approximate k-select: CoFaSelAmp pins d with rank ~[k, 42k],
// then every node below d reports with probability coin_p and the server
// outputs the ceil(p*k)-th smallest sample. One extra round past the
// amplified run.
SelectResult run_approx_k_select(std::span<const DataItem> participants, int k,
                                 double phi, double eps, double delta_prime,
                                 double delta, int h_max, double lambda,
                                 double sample_const, const Rng& rng,
                                 CostLedger& ledger, EventTrace* trace = nullptr);

// Exact Top-k in O(log(n/k)) rounds: one CoFaSel descent down to
// ceil(log_{1/phi}(7*2k)) + c0 yields a pivot d; Top-k then runs only over
// {i : d_i <= d}, falling back to the full set when that slice is too small.
TopKResult run_top_k_via_select(std::span<const DataItem> participants, int k,
                                double phi, int h_max, int c0, const Rng& rng,
                                CostLedger& ledger, EventTrace* trace = nullptr,
                                bool* fallback_used = nullptr);

}  // namespace rankmon
