// Batch experiment runner for the wireless-powered interference channel
// simulator. See README.md for the config schema and output formats.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "wpic/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"wpic simulate: throughput optimization experiments for "
               "wireless-powered interference channels"};

  std::string config_path;
  std::string experiment = "single";
  int seeds = 1;
  std::string out_dir = "out";
  std::string problem = "sum";
  std::string eh_override, csi_override;
  bool baseline = false;
  bool dump_channels = false;
  std::vector<double> sweep_values;
  int threads = 0;

  app.add_option("--config", config_path, "config JSON file")->required()->check(CLI::ExistingFile);
  app.add_option("--experiment", experiment,
                 "single|pmax-sweep|pairs-sweep|rho-sweep|asym-sweep|eh-compare");
  app.add_option("--seeds", seeds, "ensemble size")->check(CLI::PositiveNumber);
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--problem", problem, "sum|maxmin");
  app.add_option("--eh", eh_override, "override EH model: linear|nonlinear");
  app.add_option("--csi", csi_override, "override CSI: perfect|imperfect");
  app.add_flag("--baseline", baseline, "also run the power-only baseline");
  app.add_flag("--dump-channels", dump_channels, "write channel realizations (single runs)");
  app.add_option("--sweep", sweep_values, "explicit sweep grid")->delimiter(',');
  app.add_option("--threads", threads, "worker threads (default: WPIC_THREADS or all cores)");
  CLI11_PARSE(app, argc, argv);

  try {
    std::ifstream in(config_path);
    std::stringstream ss;
    ss << in.rdbuf();
    nlohmann::json cfg = nlohmann::json::parse(ss.str());

    if (eh_override == "linear") {
      cfg["eh_model"] = {{"type", "linear"}};
    } else if (eh_override == "nonlinear") {
      if (!cfg["eh_model"].contains("n_sat_uw") && !cfg["eh_model"].contains("n_sat_w"))
        cfg["eh_model"] = {{"type", "nonlinear"},
                           {"n_sat_uw", 48.86},
                           {"a_tilde_per_w", 26515.46},
                           {"b_tilde_uw", -29.81}};
      else
        cfg["eh_model"]["type"] = "nonlinear";
    } else if (!eh_override.empty()) {
      throw std::invalid_argument("--eh must be linear or nonlinear");
    }
    if (csi_override == "perfect") {
      cfg["csi"] = {{"rho_h", 1.0}, {"rho_g", 1.0}};
    } else if (csi_override == "imperfect") {
      const double rho_h = cfg.contains("csi") ? cfg["csi"].value("rho_h", 1.0) : 1.0;
      const double rho_g = cfg.contains("csi") ? cfg["csi"].value("rho_g", 1.0) : 1.0;
      cfg["csi"] = {{"rho_h", rho_h == 1.0 ? 0.9 : rho_h},
                    {"rho_g", rho_g == 1.0 ? 0.9 : rho_g}};
    } else if (!csi_override.empty()) {
      throw std::invalid_argument("--csi must be perfect or imperfect");
    }

    wpic::Experiment exp;
    exp.kind = wpic::experiment_kind_from_string(experiment);
    exp.config_json = cfg.dump();
    exp.num_seeds = seeds;
    exp.out_dir = out_dir;
    exp.problem = (problem == "maxmin") ? wpic::ProblemKind::MaxMin
                                        : wpic::ProblemKind::SumThroughput;
    if (problem != "sum" && problem != "maxmin")
      throw std::invalid_argument("--problem must be sum or maxmin");
    exp.with_baseline = baseline;
    exp.dump_channels = dump_channels;
    exp.sweep_values = sweep_values;
    exp.threads = threads;

    // Validate the (base) config up front for a readable error.
    wpic::load_config(exp.config_json);

    const wpic::ExperimentResult result = wpic::run_experiment(exp);
    int ok = 0;
    for (const auto& r : result.rows) ok += (r.status == "ok");
    std::cout << "wrote " << result.rows.size() << " runs (" << ok << " ok) to "
              << result.runs_csv_path << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
