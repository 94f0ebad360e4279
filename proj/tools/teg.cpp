#include <CLI11.hpp>

#include "teg/baseline.hpp"
#include "teg/scenario.hpp"
#include "teg/verify.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;

namespace {

teg::ConfigFile load_config(const std::string& path,
                            const std::vector<std::string>& overrides) {
  teg::ConfigFile cfg = teg::ConfigFile::parse_file(path);
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("override must be section.key=value: " + kv);
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  return cfg;
}

void write_summary(const std::string& out_dir, const teg::Json& summary) {
  if (out_dir.empty()) {
    std::cout << summary.dump(2) << std::endl;
    return;
  }
  fs::create_directories(out_dir);
  std::ofstream f(out_dir + "/summary.json");
  f << summary.dump(2) << '\n';
  std::cout << summary.dump(2) << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"thermo-economic governor simulator"};
  app.require_subcommand(1);

  std::string config_path, out_dir, param;
  long seed = -1;
  int threads = 0;
  bool dump_field = false;
  std::vector<std::string> overrides;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "scenario config file")->required();
    cmd->add_option("--out", out_dir, "output directory");
    cmd->add_option("--set", overrides, "override section.key=value");
  };

  CLI::App* run = app.add_subcommand("run", "run a scenario");
  add_common(run);
  run->add_option("--seed", seed, "override run.seed");
  run->add_option("--threads", threads, "agent-stepping threads");
  run->add_flag("--dump-field", dump_field, "write field.tsv snapshot");

  CLI::App* baseline = app.add_subcommand("baseline", "run the centralized baseline");
  add_common(baseline);

  CLI::App* sweep = app.add_subcommand("sweep", "run a parameter sweep");
  add_common(sweep);
  sweep->add_option("--param", param, "section.key=v1,v2,...")->required();

  CLI::App* verify = app.add_subcommand("verify", "run a verification suite");
  std::string which;
  verify->add_option("what", which, "equilibrium|lyapunov|damping|convergence")->required();
  add_common(verify);

  CLI11_PARSE(app, argc, argv);

  try {
    teg::ConfigFile file = load_config(config_path, overrides);
    if (run->parsed()) {
      if (seed >= 0) file.set("run.seed", std::to_string(seed));
      if (threads > 0) file.set("run.threads", std::to_string(threads));
      const auto cfg = teg::ScenarioConfig::from_config(file);
      const teg::Json summary = teg::run_scenario_to_dir(cfg, out_dir, dump_field);
      if (out_dir.empty()) std::cout << summary.dump(2) << std::endl;
      return 0;
    }
    if (baseline->parsed()) {
      const auto cfg = teg::ScenarioConfig::from_config(file);
      teg::BaselineModel model;
      model.tau = file.get_double("baseline.tau", 1e-3);
      model.arrival_rate = file.get_double("baseline.arrival_rate", 0.0);
      model.fear_alpha = file.get_double("baseline.fear_alpha", 0.4);
      const teg::BaselineRun result = teg::run_baseline(cfg, model);
      teg::Json summary{{"mode", "baseline"},
                        {"mean_decision_latency", result.mean_decision_latency},
                        {"queue_length", result.queue_length}};
      if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        result.log.write_jsonl_file(out_dir + "/events.jsonl");
        std::ofstream m(out_dir + "/metrics.csv");
        result.metrics.write_csv(m);
      }
      write_summary(out_dir, summary);
      return 0;
    }
    if (sweep->parsed()) {
      const auto eq = param.find('=');
      if (eq == std::string::npos) throw std::runtime_error("--param needs key=v1,v2,...");
      const std::string key = param.substr(0, eq);
      std::vector<std::string> values;
      std::istringstream vs(param.substr(eq + 1));
      std::string v;
      while (std::getline(vs, v, ',')) values.push_back(v);
      teg::Json runs = teg::Json::array();
      for (const auto& value : values) {
        teg::ConfigFile point = file;
        point.set(key, value);
        const auto cfg = teg::ScenarioConfig::from_config(point);
        const std::string dir =
            out_dir.empty() ? "" : out_dir + "/" + key + "=" + value;
        teg::Json summary = teg::run_scenario_to_dir(cfg, dir);
        summary["param"] = key + "=" + value;
        runs.push_back(summary);
      }
      write_summary(out_dir, teg::Json{{"sweep", param}, {"runs", runs}});
      return 0;
    }
    if (verify->parsed()) {
      const auto cfg = teg::ScenarioConfig::from_config(file);
      teg::Json report;
      if (which == "equilibrium") {
        report = teg::verify_equilibrium_invariance(cfg);
      } else if (which == "lyapunov") {
        report = teg::verify_lyapunov_scenario(cfg);
      } else if (which == "damping") {
        report = teg::verify_damping_comparison(cfg);
      } else if (which == "convergence") {
        report = teg::measure_convergence(cfg, {64, 256, 1024}, {2, 4});
      } else {
        throw std::runtime_error("unknown verification: " + which);
      }
      teg::Json summary{{"verdicts", {{report.value("name", which), report["pass"]}}},
                        {"report", report}};
      write_summary(out_dir, summary);
      return report["pass"].get<bool>() ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  }
  return 0;
}
