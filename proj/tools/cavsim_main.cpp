#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "cavsim/metrics.hpp"
#include "cavsim/model.hpp"
#include "cavsim/sim.hpp"
#include "cavsim/suites.hpp"

namespace fs = std::filesystem;
using namespace cavsim;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitSuiteFail = 1;
constexpr int kExitUsage = 2;

struct RunFlags {
  std::string scenario;
  std::string out_dir;
  bool force = false;
  std::optional<uint64_t> seed;
  std::optional<bool> mitigation;
  std::optional<bool> robust;
  std::optional<bool> trust_aware;
};

std::string default_out_root() {
  const char* env = std::getenv("CAVSIM_OUT");
  return env ? env : "out";
}

int load_with_flags(const RunFlags& flags, ScenarioConfig& cfg) {
  LoadResult loaded = load_scenario_file(flags.scenario);
  if (!loaded.ok()) {
    for (const auto& e : loaded.errors) std::cerr << "scenario: " << e << "\n";
    return kExitUsage;
  }
  cfg = std::move(loaded.config);
  if (flags.seed) {
    cfg.arrivals.seed = *flags.seed * 3 + 1;
    cfg.noise.seed = *flags.seed * 3 + 2;
    cfg.perception.seed = *flags.seed * 3 + 3;
  }
  if (flags.mitigation) cfg.mitigation.enabled = *flags.mitigation;
  if (flags.robust) cfg.toggles.robust = *flags.robust;
  if (flags.trust_aware) cfg.toggles.trust_aware = *flags.trust_aware;
  return kExitOk;
}

int prepare_out_dir(const std::string& dir, bool force) {
  if (fs::exists(dir) && !fs::is_empty(dir) && !force) {
    std::cerr << "output directory " << dir << " is not empty (use --force)\n";
    return kExitUsage;
  }
  fs::create_directories(dir);
  return kExitOk;
}

void write_sidecar(const std::string& dir) {
  // Wall-clock info stays out of the deterministic artifacts.
  std::ofstream meta(dir + "/run_meta.json");
  meta << "{\"wall_time\":" << std::time(nullptr) << "}\n";
}

int cmd_run(const RunFlags& flags) {
  ScenarioConfig cfg;
  if (int rc = load_with_flags(flags, cfg); rc != kExitOk) return rc;
  std::string dir =
      flags.out_dir.empty() ? default_out_root() + "/" + cfg.name : flags.out_dir;
  if (int rc = prepare_out_dir(dir, flags.force); rc != kExitOk) return rc;

  Trace trace = Simulation(cfg).run();
  trace.write(dir);
  Summary summary = summarize(trace, cfg.fuel);
  {
    std::ofstream f(dir + "/summary.json", std::ios::binary);
    f << summary.to_json().dump(2) << "\n";
  }
  write_sidecar(dir);
  std::cout << "wrote " << dir << "/trace.csv, events.csv, summary.json\n";
  std::cout << "exited=" << summary.exited_real << " holdup=" << summary.holdup
            << " mean_travel_time=" << summary.mean_travel_time << "\n";
  return kExitOk;
}

int cmd_sweep(const RunFlags& flags, const std::vector<double>& fractions, int repeats) {
  ScenarioConfig base_cfg;
  if (int rc = load_with_flags(flags, base_cfg); rc != kExitOk) return rc;
  std::string dir =
      flags.out_dir.empty() ? default_out_root() + "/" + base_cfg.name + "-sweep"
                            : flags.out_dir;
  if (int rc = prepare_out_dir(dir, flags.force); rc != kExitOk) return rc;

  std::ostringstream table;
  table << "fake_fraction,repeat,exited,holdup,blocked,mean_travel_time,sd_travel_time,"
           "mean_energy,mean_fuel,detections_tp,detections_fp,collisions\n";
  for (double fraction : fractions) {
    for (int rep = 0; rep < repeats; ++rep) {
      ScenarioConfig cfg = base_cfg;
      uint64_t seed = (flags.seed ? *flags.seed : 1) + uint64_t(rep);
      cfg.arrivals.seed = seed * 3 + 1;
      cfg.noise.seed = seed * 3 + 2;
      cfg.perception.seed = seed * 3 + 3;
      int fakes = int(std::lround(fraction * cfg.arrivals.count));
      // Scale the sybil injection to the requested proportion of traffic.
      bool has_sybil = false;
      for (auto& a : cfg.attacks)
        if (a.kind == "sybil") {
          a.count = fakes;
          has_sybil = true;
        }
      if (!has_sybil && fakes > 0) {
        AttackSpec sybil;
        sybil.kind = "sybil";
        sybil.start = 0.2;
        sybil.count = fakes;
        sybil.routes = cfg.arrivals.routes.empty() ? std::vector<std::string>{"W.R.S"}
                                                   : cfg.arrivals.routes;
        sybil.generator.kind = "stall";
        sybil.generator.x0 = 40.0;
        sybil.generator.v0 = 6.0;
        sybil.generator.stop_before = 48.0;
        cfg.attacks.push_back(sybil);
      }
      cfg.mitigation.max_sybil = std::max(cfg.mitigation.max_sybil, fakes);
      Summary s = summarize(Simulation(cfg).run(), cfg.fuel);
      char line[512];
      std::snprintf(line, sizeof line, "%.3g,%d,%d,%d,%d,%.10g,%.10g,%.10g,%.10g,%d,%d,%ld\n",
                    fraction, rep, s.exited_real, s.holdup, s.blocked_arrivals,
                    s.mean_travel_time, s.sd_travel_time, s.mean_energy, s.mean_fuel,
                    s.detections_tp, s.detections_fp, s.collisions);
      table << line;
      std::cout << "fraction " << fraction << " repeat " << rep << " done\n";
    }
  }
  std::ofstream f(dir + "/sweep.csv", std::ios::binary);
  f << table.str();
  write_sidecar(dir);
  std::cout << "wrote " << dir << "/sweep.csv\n";
  return kExitOk;
}

int cmd_verify(const std::string& suite) {
  bool ok;
  if (suite == "all") {
    ok = true;
    for (const auto& name : suite_names()) ok &= run_suite(name, std::cout);
  } else {
    ok = run_suite(suite, std::cout);
  }
  return ok ? kExitOk : kExitSuiteFail;
}

int cmd_plotdata(const std::string& trace_path, const std::string& out_dir) {
  std::ifstream in(trace_path);
  if (!in) {
    std::cerr << "cannot open " << trace_path << "\n";
    return kExitUsage;
  }
  fs::create_directories(out_dir);
  std::ofstream barriers(out_dir + "/barriers.csv", std::ios::binary);
  std::ofstream trustf(out_dir + "/trust.csv", std::ios::binary);
  std::ofstream gantt(out_dir + "/gantt.csv", std::ios::binary);
  barriers << "t,vehicle,b_rear,b_merge\n";
  trustf << "t,vehicle,tau\n";
  gantt << "t,vehicle,index\n";

  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() < 14) continue;
    const std::string& t = cells[0];
    const std::string& vehicle = cells[1];
    if (!cells[10].empty() || !cells[11].empty())
      barriers << t << ',' << vehicle << ',' << cells[10] << ',' << cells[11] << "\n";
    trustf << t << ',' << vehicle << ',' << cells[9] << "\n";
    gantt << t << ',' << vehicle << ',' << cells[2] << "\n";
  }
  std::cout << "wrote " << out_dir << "/barriers.csv, trust.csv, gantt.csv\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trust-aware event-triggered intersection coordination simulator"};
  app.require_subcommand(1);

  RunFlags flags;
  std::vector<double> fractions{0.0};
  int repeats = 1;
  std::string suite = "all";
  std::string trace_path, plot_out = "plotdata";

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("scenario", flags.scenario, "scenario JSON file")->required();
    cmd->add_option("--out", flags.out_dir, "output directory");
    cmd->add_flag("--force", flags.force, "allow writing into a non-empty directory");
    cmd->add_option_function<uint64_t>(
        "--seed", [&](const uint64_t& s) { flags.seed = s; }, "seed override");
    cmd->add_option_function<bool>(
        "--mitigation", [&](const bool& b) { flags.mitigation = b; },
        "mitigation on/off override");
    cmd->add_option_function<bool>(
        "--robust", [&](const bool& b) { flags.robust = b; },
        "robustification on/off override");
    cmd->add_option_function<bool>(
        "--trust-aware", [&](const bool& b) { flags.trust_aware = b; },
        "trust-aware on/off override");
  };

  CLI::App* run = app.add_subcommand("run", "run one scenario");
  add_common(run);

  CLI::App* sweep = app.add_subcommand("sweep", "grid over spoofed-traffic proportions");
  add_common(sweep);
  sweep->add_option("--fake-fraction", fractions, "fractions of spoofed arrivals")
      ->delimiter(',');
  sweep->add_option("--repeats", repeats, "runs per grid point");

  CLI::App* verify = app.add_subcommand("verify", "run a named verification suite");
  verify->add_option("suite", suite, "suite name or 'all'");

  CLI::App* plotdata = app.add_subcommand("plotdata", "emit tidy CSVs from a trace");
  plotdata->add_option("trace", trace_path, "trace.csv path")->required();
  plotdata->add_option("--out", plot_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (run->parsed()) return cmd_run(flags);
    if (sweep->parsed()) return cmd_sweep(flags, fractions, repeats);
    if (verify->parsed()) return cmd_verify(suite);
    if (plotdata->parsed()) return cmd_plotdata(trace_path, plot_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
