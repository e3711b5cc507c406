// Command-line driver: one subcommand per protocol or experiment family,
// CSV per-trial output, optional event traces, calibration and the
// acceptance battery. Exit codes: 0 ok, 1 acceptance/threshold violation,
// 2 configuration error.

#include <fstream>
#include <iostream>
#include <numeric>

#include "CLI11.hpp"
#include "rankmon/harness.hpp"

namespace {

using namespace rankmon;

struct CommonArgs {
  Config cfg;
  int k = 10;
  int m = 0;
  int epochs = 50;
  int trials = 100;
  std::string refresh = "oracle";
  std::string scenario_path;
  std::string out_path;
  std::string constants_path;
  std::string trace_path;
  // thresholds (optional): nonzero -> enforced, exit 1 on violation
  double assert_mean_total_le = 0.0;
  double assert_mean_unicast_le = 0.0;
  double assert_pass_rate_ge = 0.0;
};

void add_common(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("--n", a.cfg.n, "node count")->required();
  cmd->add_option("--phi", a.cfg.phi, "geometric failure parameter");
  cmd->add_option("--hmax", a.cfg.h_max, "max height (0 = ceil(log_{1/phi} n))");
  cmd->add_option("--k", a.k, "rank parameter");
  cmd->add_option("--eps", a.cfg.eps, "approximation epsilon");
  cmd->add_option("--delta", a.cfg.delta, "failure probability delta");
  cmd->add_option("--delta-prime", a.cfg.delta_prime, "internal failure probability");
  cmd->add_option("--con", a.cfg.con, "class width constant C");
  cmd->add_option("--m", a.m, "updates per epoch");
  cmd->add_option("--epochs", a.epochs, "epochs per trial");
  cmd->add_option("--trials", a.trials, "trial count");
  cmd->add_option("--seed", a.cfg.seed, "root seed");
  cmd->add_option("--refresh-strategy", a.refresh, "oracle | probe");
  cmd->add_option("--scenario", a.scenario_path, "scenario file");
  cmd->add_option("--out", a.out_path, "CSV output path");
  cmd->add_option("--constants", a.constants_path, "frozen constants JSON");
  cmd->add_option("--trace", a.trace_path, "event trace output path");
  cmd->add_option("--assert-mean-total-le", a.assert_mean_total_le,
                  "fail (exit 1) if mean total messages exceed this");
  cmd->add_option("--assert-mean-unicast-le", a.assert_mean_unicast_le,
                  "fail (exit 1) if mean unicast messages exceed this");
  cmd->add_option("--assert-pass-rate-ge", a.assert_pass_rate_ge,
                  "fail (exit 1) if the pass rate drops below this");
}

Constants load_constants(const CommonArgs& a) {
  if (a.constants_path.empty()) return Constants{};
  return Constants::load(a.constants_path);
}

void finish_config(CommonArgs& a) {
  a.cfg.refresh_strategy =
      a.refresh == "probe" ? RefreshStrategy::kDescendProbe : RefreshStrategy::kOracleMax;
  a.cfg.validate();
}

int emit(const CommonArgs& a, std::span<const TrialRow> rows, EventTrace* trace) {
  if (!a.out_path.empty()) {
    std::ofstream out(a.out_path);
    if (!out) throw ConfigError("cannot write " + a.out_path);
    write_csv(rows, out);
  }
  if (trace && !a.trace_path.empty()) {
    std::ofstream out(a.trace_path);
    if (!out) throw ConfigError("cannot write " + a.trace_path);
    trace->write_tsv(out);
  }

  std::vector<double> totals, unicasts, rounds;
  std::int64_t passed = 0;
  for (const TrialRow& r : rows) {
    totals.push_back(static_cast<double>(r.messages_total));
    unicasts.push_back(static_cast<double>(r.messages_unicast));
    rounds.push_back(static_cast<double>(r.rounds));
    passed += r.pass ? 1 : 0;
  }
  const Aggregate t = Aggregate::of(totals);
  const Aggregate u = Aggregate::of(unicasts);
  const Aggregate rd = Aggregate::of(rounds);
  const double rate =
      rows.empty() ? 0.0 : static_cast<double>(passed) / static_cast<double>(rows.size());
  std::cout << "rows=" << rows.size() << " pass_rate=" << rate
            << " mean_total=" << t.mean << " (stderr " << t.stderr_mean << ")"
            << " mean_unicast=" << u.mean << " mean_rounds=" << rd.mean << "\n";

  int rc = 0;
  if (a.assert_mean_total_le > 0.0 && t.mean > a.assert_mean_total_le) rc = 1;
  if (a.assert_mean_unicast_le > 0.0 && u.mean > a.assert_mean_unicast_le) rc = 1;
  if (a.assert_pass_rate_ge > 0.0 && rate < a.assert_pass_rate_ge) rc = 1;
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rank-based distributed monitoring simulator"};
  app.require_subcommand(1);

  CommonArgs a;
  bool strict_walk = false;
  bool via_select = false;
  bool amplified = false;
  std::string query_kind = "topk";
  std::uint64_t cal_seed = 1;
  std::string cal_out = "calibration/frozen.json";

  auto* topk = app.add_subcommand("topk", "one-shot exact Top-k trials");
  add_common(topk, a);
  topk->add_flag("--strict-walk", strict_walk, "literal recursion (no early exit)");
  topk->add_flag("--via-select", via_select, "pivot through a CoFaSel descent first");

  auto* cofasel = app.add_subcommand("cofasel", "constant-factor selection trials");
  add_common(cofasel, a);
  cofasel->add_flag("--amplify", amplified, "median-of-instances amplification");

  auto* kselect = app.add_subcommand("kselect", "approximate k-select trials");
  add_common(kselect, a);

  auto* selemon = app.add_subcommand("selemon", "sketch INITIALIZE / REFRESH experiments");
  add_common(selemon, a);

  auto* query = app.add_subcommand("query", "multi-epoch queries against the sketch");
  add_common(query, a);
  query->add_option("--kind", query_kind, "topk | ksel");

  auto* adversary = app.add_subcommand("adversary", "min-tracking hard instance");
  add_common(adversary, a);
  std::string export_scenario_path;
  adversary->add_option("--export-scenario", export_scenario_path,
                        "write the generated instance as a scenario file");

  auto* geocoin = app.add_subcommand("geocoin", "per-height response-count cross-check");
  add_common(geocoin, a);

  auto* calibrate_cmd = app.add_subcommand("calibrate", "run pilots, freeze constants");
  calibrate_cmd->add_option("--seed", cal_seed, "pilot seed");
  calibrate_cmd->add_option("--out", cal_out, "output JSON path");

  auto* accept = app.add_subcommand("accept", "run the acceptance battery");
  accept->add_option("--constants", a.constants_path, "frozen constants JSON");
  accept->add_option("--seed", a.cfg.seed, "root seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (calibrate_cmd->parsed()) {
      Constants c = rankmon::calibrate(cal_seed, std::cout);
      c.save(cal_out);
      std::cout << "wrote " << cal_out << "\n";
      return 0;
    }
    if (accept->parsed()) {
      const Constants consts = load_constants(a);
      const auto results = run_acceptance(consts, std::cout, a.cfg.seed);
      for (const CriterionResult& r : results) {
        if (!r.pass) return 1;
      }
      return 0;
    }

    finish_config(a);
    const Constants consts = load_constants(a);
    EventTrace trace;
    EventTrace* tr = a.trace_path.empty() ? nullptr : &trace;

    std::vector<TrialRow> rows;
    if (topk->parsed()) {
      TopKRunOptions opt;
      opt.k = a.k;
      opt.trials = a.trials;
      opt.strict_walk = strict_walk;
      opt.via_select = via_select;
      rows = run_topk_trials(a.cfg, opt, tr);
    } else if (cofasel->parsed()) {
      CofaselRunOptions opt;
      opt.k = a.k;
      opt.trials = a.trials;
      opt.amplified = amplified;
      if (amplified) a.cfg.amp_factor = consts.lambda;
      rows = run_cofasel_trials(a.cfg, opt, tr);
    } else if (kselect->parsed()) {
      a.cfg.amp_factor = consts.lambda;
      a.cfg.sample_const = consts.sample_const;
      rows = run_approx_kselect_trials(a.cfg, a.k, a.trials, tr);
    } else if (selemon->parsed()) {
      if (a.m > 0) {
        rows = run_refresh_trials(a.cfg, a.m, a.epochs, a.trials, tr);
      } else {
        std::vector<std::int64_t> grid;
        for (std::int64_t k = 1; k <= a.cfg.n; k *= 4) grid.push_back(k);
        rows = run_selemon_init_trials(a.cfg, a.trials, grid, tr);
      }
    } else if (query->parsed()) {
      if (!a.scenario_path.empty()) {
        std::ifstream in(a.scenario_path);
        if (!in) throw ConfigError("cannot open " + a.scenario_path);
        const Scenario s = read_scenario(in);
        if (s.n != a.cfg.n) throw ConfigError("scenario n mismatch");
        rows = run_scenario_trials(a.cfg, s, a.trials, consts, tr);
      } else {
        QueryRunOptions opt;
        opt.kind = query_kind == "ksel" ? QueryKind::kKSelect : QueryKind::kTopK;
        opt.k = a.k;
        opt.m = a.m;
        opt.epochs = a.epochs;
        opt.trials = a.trials;
        opt.eps = a.cfg.eps;
        opt.delta = a.cfg.delta;
        rows = run_query_trials(a.cfg, opt, consts, tr);
      }
    } else if (adversary->parsed()) {
      const int m = a.m > 0 ? a.m : 16;
      if (!export_scenario_path.empty()) {
        const Scenario s = gen_adversary_min(a.cfg.n, m, a.epochs, a.cfg.seed);
        std::ofstream out(export_scenario_path);
        if (!out) throw ConfigError("cannot write " + export_scenario_path);
        write_scenario(s, out);
      }
      auto out = run_adversary_trials(a.cfg, m, a.epochs, a.trials, tr);
      if (!out.instances_valid) {
        std::cerr << "instance validation failed: " << out.validation_error << "\n";
        return 1;
      }
      rows = std::move(out.rows);
    } else if (geocoin->parsed()) {
      const GeocoinStats st = geocoin_check(a.cfg.phi, a.cfg.n, a.trials, a.cfg.seed);
      std::ostream* os = &std::cout;
      std::ofstream file;
      if (!a.out_path.empty()) {
        file.open(a.out_path);
        if (!file) throw ConfigError("cannot write " + a.out_path);
        os = &file;
      }
      *os << "h,mean_c,expected\n";
      for (size_t h = 0; h < st.mean_per_height.size(); ++h) {
        *os << (h + 1) << ',' << st.mean_per_height[h] << ',' << st.expected_per_height
            << '\n';
      }
      *os << "tail," << st.tail_mean << ',' << st.tail_bound << '\n';
      return 0;
    }

    return emit(a, rows, tr);
  } catch (const rankmon::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const CLI::ParseError& e) {
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
