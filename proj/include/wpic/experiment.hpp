#pragma once

// Experiment runner: single runs, parameter sweeps, ensemble averages, and
// the robust-vs-non-robust comparison. Emits runs.csv (one row per run),
// summary.csv (ensemble means per sweep point) and, for single runs,
// trace_<seed>.csv files.
//
// Seed derivation for run i (0-based): channel seed i+1, estimation-error
// seed (i+1)*0x9E3779B97F4A7C15 + 12345, tau-init seed (i+1)*0xBF58476D1CE4E5B9 + 1.
// Sweep points share the seed list, so curves across a sweep use common
// random channels.

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wpic/channel.hpp"
#include "wpic/model.hpp"
#include "wpic/optimizer.hpp"
#include "wpic/problem.hpp"
#include "wpic/util.hpp"

namespace wpic {

enum class ExperimentKind {
  SingleRun,
  PmaxSweep,
  PairCountSweep,
  RhoSweep,
  AsymmetricSweep,
  EhModelCompare,
};

inline std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::SingleRun: return "single";
    case ExperimentKind::PmaxSweep: return "pmax-sweep";
    case ExperimentKind::PairCountSweep: return "pairs-sweep";
    case ExperimentKind::RhoSweep: return "rho-sweep";
    case ExperimentKind::AsymmetricSweep: return "asym-sweep";
    case ExperimentKind::EhModelCompare: return "eh-compare";
  }
  return "?";
}

inline ExperimentKind experiment_kind_from_string(const std::string& s) {
  if (s == "single") return ExperimentKind::SingleRun;
  if (s == "pmax-sweep") return ExperimentKind::PmaxSweep;
  if (s == "pairs-sweep") return ExperimentKind::PairCountSweep;
  if (s == "rho-sweep") return ExperimentKind::RhoSweep;
  if (s == "asym-sweep") return ExperimentKind::AsymmetricSweep;
  if (s == "eh-compare") return ExperimentKind::EhModelCompare;
  throw std::invalid_argument("unknown experiment kind '" + s + "'");
}

struct Experiment {
  ExperimentKind kind = ExperimentKind::SingleRun;
  std::string config_json;  // raw config document; sweeps modify and reload it
  int num_seeds = 1;
  std::string out_dir;
  ProblemKind problem = ProblemKind::SumThroughput;
  bool with_baseline = false;
  bool dump_channels = false;
  int threads = 0;

  // sweep grids (defaults chosen per kind when empty)
  std::vector<double> sweep_values;

  OuterOptions outer;
  SolverOptions solver;
};

struct RunRow {
  std::string experiment;
  std::string sweep_param;
  double sweep_value = 0.0;
  int seed = 0;
  std::string problem;
  std::string eh;
  double csi_rho = 1.0;
  std::string scheme;  // standard | baseline | robust | nonrobust
  std::string status;  // ok | infeasible_tau | error
  double tau = 0.0;
  double sum_rate = 0.0;
  double min_rate = 0.0;
  double objective = 0.0;         // reported metric (true-channel eval for rho sweep)
  double objective_design = 0.0;  // design-stage objective
  int outer_iters = 0;
  int inner_iters = 0;
  double max_violation = 0.0;
  double mean_recv_uw = 0.0;     // mean received RF power at the final waveform
  double mean_harvest_uj = 0.0;  // mean harvested energy at the final design
  bool reprojected = false;
  std::string note;
};

namespace experiment_detail {

inline std::uint64_t channel_seed(int i) { return static_cast<std::uint64_t>(i) + 1; }
inline std::uint64_t csi_seed(int i) {
  return (static_cast<std::uint64_t>(i) + 1) * 0x9E3779B97F4A7C15ULL + 12345ULL;
}
inline std::uint64_t tau_seed(int i) {
  return (static_cast<std::uint64_t>(i) + 1) * 0xBF58476D1CE4E5B9ULL + 1ULL;
}

inline std::string sanitize(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  return s;
}

// Applies a sweep override to the raw config document.
inline NetworkConfig config_for(const Experiment& exp, double sweep_value) {
  nlohmann::json j = nlohmann::json::parse(exp.config_json);
  switch (exp.kind) {
    case ExperimentKind::PmaxSweep:
      j.erase("p_max_w");
      j["p_max_dbm"] = sweep_value;
      break;
    case ExperimentKind::PairCountSweep:
      j["num_pairs"] = static_cast<int>(sweep_value);
      break;
    case ExperimentKind::RhoSweep:
      j["csi"]["rho_h"] = sweep_value;
      j["csi"]["rho_g"] = sweep_value;
      break;
    case ExperimentKind::AsymmetricSweep: {
      // Two-pair corner layout; IT_1 moves away along the 45-degree axis.
      const double dx = sweep_value / std::sqrt(2.0);
      j["num_pairs"] = 2;
      j["geometry"]["layout"] = {
          {"type", "positions"},
          {"et_xy_m", {{0.0, 10.0}, {0.0, 0.0}}},
          {"it_xy_m", {{10.0 + dx, 12.0 + dx}, {10.0, 0.0}}},
      };
      break;
    }
    case ExperimentKind::EhModelCompare:
      if (sweep_value == 0.0) {
        j["eh_model"] = {{"type", "linear"}};
      } else {
        if (!j["eh_model"].contains("n_sat_uw") && !j["eh_model"].contains("n_sat_w"))
          j["eh_model"] = {{"type", "nonlinear"},
                           {"n_sat_uw", 48.86},
                           {"a_tilde_per_w", 26515.46},
                           {"b_tilde_uw", -29.81}};
        else
          j["eh_model"]["type"] = "nonlinear";
      }
      break;
    case ExperimentKind::SingleRun:
      break;
  }
  return load_config(j.dump());
}

inline std::vector<double> default_sweep(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::PmaxSweep: return {20, 24, 28, 32, 36, 39, 42, 45};
    case ExperimentKind::PairCountSweep: return {2, 3, 4, 5, 6};
    case ExperimentKind::RhoSweep: return {0.5, 0.7, 0.9, 1.0};
    case ExperimentKind::AsymmetricSweep: return {0, 5, 10, 15, 20, 25, 30};
    case ExperimentKind::EhModelCompare: return {0, 1};
    default: return {0};
  }
}

inline std::string sweep_param_name(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::PmaxSweep: return "p_max_dbm";
    case ExperimentKind::PairCountSweep: return "num_pairs";
    case ExperimentKind::RhoSweep: return "rho";
    case ExperimentKind::AsymmetricSweep: return "delta_x_m";
    case ExperimentKind::EhModelCompare: return "nonlinear";
    default: return "none";
  }
}

// Uniform down-scaling of p so that every C3 holds under the true channels.
inline bool reproject_powers(const NetworkConfig& cfg, const HarvestModel& true_harvest,
                             DesignVariables& v) {
  double c = 1.0;
  for (int k = 0; k < cfg.num_pairs; ++k) {
    const double budget =
        true_harvest.energy(k, v.x, v.tau) + cfg.e_initial[k] - cfg.p_circuit[k];
    const double use = cfg.amp_eff[k] * (1.0 - v.tau) * v.p[k];
    if (use > budget) c = std::min(c, budget > 0.0 ? budget / use : 0.0);
  }
  if (c < 1.0) {
    v.p *= std::max(0.0, c);
    return true;
  }
  return false;
}

inline void fill_design_metrics(const NetworkConfig& cfg, const ProblemInstance& inst,
                                const RunOutput& out, RunRow& row) {
  const VectorXd rates = inst.rates(out.vars);
  row.tau = out.vars.tau;
  row.sum_rate = rates.sum();
  row.min_rate = rates.minCoeff();
  row.objective_design = inst.objective(out.vars);
  row.objective = row.objective_design;
  row.outer_iters = out.trace.outer_iterations;
  row.inner_iters = out.trace.inner_iterations;
  row.max_violation = inst.max_violation(out.vars);
  double recv = 0.0, harv = 0.0;
  for (int k = 0; k < cfg.num_pairs; ++k) {
    recv += inst.harvest.received(k, out.vars.x);
    harv += inst.harvest.energy(k, out.vars.x, out.vars.tau);
  }
  row.mean_recv_uw = recv / cfg.num_pairs * 1e6;
  row.mean_harvest_uj = harv / cfg.num_pairs * 1e6;
}

}  // namespace experiment_detail

struct ExperimentResult {
  std::vector<RunRow> rows;
  std::string runs_csv_path;
  std::string summary_csv_path;
};

inline void write_runs_csv(const std::vector<RunRow>& rows, std::ostream& os) {
  os << "experiment,sweep_param,sweep_value,seed,problem,eh,csi_rho,scheme,status,tau,"
        "sum_rate,min_rate,objective,objective_design,outer_iters,inner_iters,"
        "max_violation,mean_recv_uw,mean_harvest_uj,reprojected,note\n";
  char buf[512];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf),
                  "%s,%s,%.9g,%d,%s,%s,%.9g,%s,%s,%.9g,%.9g,%.9g,%.9g,%.9g,%d,%d,%.3g,%.9g,%.9g,%d,%s\n",
                  r.experiment.c_str(), r.sweep_param.c_str(), r.sweep_value, r.seed,
                  r.problem.c_str(), r.eh.c_str(), r.csi_rho, r.scheme.c_str(), r.status.c_str(),
                  r.tau, r.sum_rate, r.min_rate, r.objective, r.objective_design, r.outer_iters,
                  r.inner_iters, r.max_violation, r.mean_recv_uw, r.mean_harvest_uj,
                  r.reprojected ? 1 : 0, r.note.c_str());
    os << buf;
  }
}

inline void write_summary_csv(const std::vector<RunRow>& rows, std::ostream& os) {
  // group key: (sweep_value, problem, eh, scheme)
  struct Agg {
    int n = 0, ok = 0;
    double obj = 0, sum = 0, min = 0, tau = 0;
    std::vector<double> xi;  // per-seed loss (rho sweep)
  };
  std::map<std::tuple<double, std::string, std::string, std::string>, Agg> groups;
  // pair robust/nonrobust by (sweep_value, seed) for the loss metric
  struct LossPair {
    double robust = std::numeric_limits<double>::quiet_NaN();
    double nonrobust = std::numeric_limits<double>::quiet_NaN();
  };
  std::map<std::pair<double, int>, LossPair> loss_pairs;
  for (const auto& r : rows) {
    auto& a = groups[{r.sweep_value, r.problem, r.eh, r.scheme}];
    ++a.n;
    if (r.status == "ok") {
      ++a.ok;
      a.obj += r.objective;
      a.sum += r.sum_rate;
      a.min += r.min_rate;
      a.tau += r.tau;
    }
    if (r.status == "ok" && (r.scheme == "robust" || r.scheme == "nonrobust")) {
      auto& lp = loss_pairs[{r.sweep_value, r.seed}];
      (r.scheme == "robust" ? lp.robust : lp.nonrobust) = r.objective;
    }
  }
  for (auto& [key, lp] : loss_pairs) {
    if (std::isnan(lp.robust) || std::isnan(lp.nonrobust)) continue;
    double xi;
    if (lp.robust == lp.nonrobust)
      xi = 0.0;  // bit-identical designs (rho = 1) give zero loss exactly
    else if (lp.robust > 0.0)
      xi = 1.0 - lp.nonrobust / lp.robust;
    else
      continue;
    for (auto& [gkey, agg] : groups)
      if (std::get<0>(gkey) == key.first && std::get<3>(gkey) == "robust")
        agg.xi.push_back(xi);
  }
  os << "experiment,sweep_param,sweep_value,problem,eh,scheme,n_runs,n_ok,mean_objective,"
        "mean_sum_rate,mean_min_rate,mean_tau,mean_xi,max_xi\n";
  const std::string exp_name = rows.empty() ? "" : rows.front().experiment;
  const std::string param = rows.empty() ? "" : rows.front().sweep_param;
  char buf[512];
  for (const auto& [key, a] : groups) {
    const double n = std::max(1, a.ok);
    std::string xi_mean = "", xi_max = "";
    if (!a.xi.empty()) {
      double m = 0, mx = -1e300;
      for (double x : a.xi) {
        m += x;
        mx = std::max(mx, x);
      }
      char t[64];
      std::snprintf(t, sizeof(t), "%.9g", m / a.xi.size());
      xi_mean = t;
      std::snprintf(t, sizeof(t), "%.9g", mx);
      xi_max = t;
    }
    std::snprintf(buf, sizeof(buf), "%s,%s,%.9g,%s,%s,%s,%d,%d,%.9g,%.9g,%.9g,%.9g,%s,%s\n",
                  exp_name.c_str(), param.c_str(), std::get<0>(key), std::get<1>(key).c_str(),
                  std::get<2>(key).c_str(), std::get<3>(key).c_str(), a.n, a.ok, a.obj / n,
                  a.sum / n, a.min / n, a.tau / n, xi_mean.c_str(), xi_max.c_str());
    os << buf;
  }
}

inline ExperimentResult run_experiment(const Experiment& exp) {
  using namespace experiment_detail;
  namespace fs = std::filesystem;

  std::vector<double> sweep = exp.sweep_values;
  if (sweep.empty()) sweep = default_sweep(exp.kind);
  const std::string param = sweep_param_name(exp.kind);
  const std::string exp_name = to_string(exp.kind);
  const std::string prob_name =
      exp.problem == ProblemKind::SumThroughput ? "sum" : "maxmin";

  struct Task {
    int sweep_idx;
    int seed_idx;
  };
  std::vector<Task> tasks;
  for (int s = 0; s < static_cast<int>(sweep.size()); ++s)
    for (int i = 0; i < exp.num_seeds; ++i) tasks.push_back({s, i});

  // Each task may emit several rows (schemes); collect per task, then flatten.
  std::vector<std::vector<RunRow>> task_rows(tasks.size());
  std::vector<std::pair<int, RunTrace>> traces;  // (seed, trace) for single runs
  std::mutex trace_mutex;

  auto run_task = [&](int ti) {
    const Task& task = tasks[ti];
    const double sv = sweep[task.sweep_idx];
    RunRow base;
    base.experiment = exp_name;
    base.sweep_param = param;
    base.sweep_value = sv;
    base.seed = task.seed_idx;
    base.problem = prob_name;
    auto& out_rows = task_rows[ti];

    NetworkConfig cfg;
    try {
      cfg = config_for(exp, sv);
    } catch (const std::exception& e) {
      base.scheme = "standard";
      base.status = "error";
      base.note = sanitize(e.what());
      out_rows.push_back(base);
      return;
    }
    base.eh = cfg.eh_kind == EhModelKind::Linear ? "linear" : "nonlinear";
    base.csi_rho = cfg.csi.rho_h;

    OuterOptions outer = exp.outer;
    outer.tau_init.kind = TauInit::Kind::Random;
    outer.tau_init.seed = tau_seed(task.seed_idx);

    const ChannelSet truth = generate_channels(cfg, channel_seed(task.seed_idx));
    const bool imperfect = !cfg.csi.perfect();
    const ChannelSet est =
        imperfect ? apply_csi_error(truth, cfg, csi_seed(task.seed_idx)) : truth;

    auto run_scheme = [&](const std::string& scheme, const ChannelSet& design_channels,
                          bool baseline) {
      RunRow row = base;
      row.scheme = scheme;
      try {
        OuterOptions o = outer;
        o.baseline = baseline;
        const RunOutput out = run_design(cfg, design_channels, exp.problem, o, exp.solver);
        const Combining comb = baseline ? Combining::Incoherent : Combining::Coherent;
        ProblemInstance inst = make_problem(cfg, design_channels, exp.problem, comb);
        fill_design_metrics(cfg, inst, out, row);
        row.status = "ok";
        if (exp.kind == ExperimentKind::RhoSweep) {
          // Evaluate the design on the true channels. The non-robust design
          // claimed the estimates were exact, so its powers are re-projected
          // when C3 breaks under the truth; the robust design's contract is
          // average-sense feasibility, which it satisfies by construction.
          ProblemInstance true_inst = make_problem(cfg, truth, exp.problem, comb);
          DesignVariables v = out.vars;
          if (scheme == "nonrobust")
            row.reprojected = reproject_powers(cfg, true_inst.harvest, v);
          const VectorXd r = true_inst.rates(v);
          row.sum_rate = r.sum();
          row.min_rate = r.minCoeff();
          row.objective = true_inst.objective(v);
          row.max_violation = true_inst.max_violation(v);
        }
        if (exp.kind == ExperimentKind::SingleRun) {
          std::lock_guard<std::mutex> lk(trace_mutex);
          traces.emplace_back(task.seed_idx, out.trace);
        }
      } catch (const TauInfeasible& e) {
        row.status = "infeasible_tau";
        row.note = sanitize(e.what());
      } catch (const std::exception& e) {
        row.status = "error";
        row.note = sanitize(e.what());
      }
      out_rows.push_back(std::move(row));
    };

    if (exp.kind == ExperimentKind::RhoSweep) {
      run_scheme("robust", est, false);
      run_scheme("nonrobust", imperfect ? estimates_as_truth(est) : est, false);
    } else {
      run_scheme("standard", est, false);
      if (exp.with_baseline) run_scheme("baseline", est, true);
    }
  };

  parallel_for(static_cast<int>(tasks.size()), run_task, exp.threads);

  ExperimentResult result;
  for (auto& rows : task_rows)
    for (auto& r : rows) result.rows.push_back(std::move(r));

  if (!exp.out_dir.empty()) {
    fs::create_directories(exp.out_dir);
    result.runs_csv_path = (fs::path(exp.out_dir) / "runs.csv").string();
    result.summary_csv_path = (fs::path(exp.out_dir) / "summary.csv").string();
    std::ofstream runs(result.runs_csv_path);
    write_runs_csv(result.rows, runs);
    std::ofstream summary(result.summary_csv_path);
    write_summary_csv(result.rows, summary);
    std::sort(traces.begin(), traces.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& [seed, trace] : traces) {
      std::ofstream tf(fs::path(exp.out_dir) / ("trace_" + std::to_string(seed) + ".csv"));
      trace.write_csv(tf);
    }
    if (exp.dump_channels && exp.kind == ExperimentKind::SingleRun) {
      for (int i = 0; i < exp.num_seeds; ++i) {
        NetworkConfig cfg = config_for(exp, sweep.front());
        const ChannelSet truth = generate_channels(cfg, channel_seed(i));
        const ChannelSet cs = cfg.csi.perfect() ? truth : apply_csi_error(truth, cfg, csi_seed(i));
        std::ofstream cf(fs::path(exp.out_dir) / ("channels_" + std::to_string(i) + ".csv"));
        write_channel_csv(cs, cf);
      }
    }
  }
  return result;
}

}  // namespace wpic
