#include <cstdlib>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "st2/host.hpp"
#include "st2/scripted.hpp"

namespace fs = std::filesystem;
using namespace st2;

namespace {

ExperimentConfig resolve_config(const std::string& path) {
  if (!path.empty()) return load_config(path);
  if (const char* env = std::getenv(kConfigEnvVar); env && *env) return load_config(env);
  return {};
}

int cmd_run_scripted(const std::string& config, std::optional<std::uint64_t> seed, const std::string& framework,
                     const std::string& strategy, const std::string& out, int batch, const std::string& out_csv) {
  ExperimentConfig cfg = resolve_config(config);
  if (seed) cfg.teacher.seed = *seed;
  if (!framework.empty()) cfg.session.framework = framework_from_string(framework);
  if (!strategy.empty()) cfg.teacher.strategy = strategy_from_string(strategy);

  std::vector<ReportRow> rows;
  const std::uint64_t first = cfg.teacher.seed;
  for (int k = 0; k < batch; ++k) {
    cfg.teacher.seed = first + static_cast<std::uint64_t>(k);
    const ScriptedResult r = run_scripted(cfg);
    if (!out.empty()) {
      fs::path dest = out;
      if (batch > 1) {
        fs::create_directories(dest);
        dest /= run_label(cfg) + ".json";
      } else if (dest.has_parent_path()) {
        fs::create_directories(dest.parent_path());
      }
      save_session(dest, r.session);
    }
    rows.push_back(r.row);
  }
  write_report_csv(std::cout, rows);
  if (!out_csv.empty()) {
    std::ofstream csv(out_csv);
    write_report_csv(csv, rows);
  }
  for (const auto& r : rows)
    if (!r.error.empty()) return 1;
  return 0;
}

int cmd_replay(const std::string& path) {
  const SessionFile file = load_session(path);
  const ReplayOutcome out = replay_session(file);
  for (std::size_t k = 0; k < out.regenerated.episodes.size(); ++k) {
    const auto& e = out.regenerated.episodes[k];
    std::cout << "episode " << k + 1 << ": ticks " << e.result.tick_from << "-" << e.result.tick_to
              << " success=" << e.result.success << " trajectory_jerk=" << e.metrics.trajectory_jerk
              << " torque_jerk=" << e.metrics.torque_jerk << " time=" << e.metrics.execution_time << "s\n";
  }
  if (out.identical()) {
    std::cout << "replay identical\n";
    return 0;
  }
  std::cout << "replay differs in:";
  for (const auto& m : out.mismatches) std::cout << " " << m;
  std::cout << "\n";
  return 1;
}

int cmd_report(const std::string& dir, const std::string& out_csv) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  std::vector<ReportRow> rows;
  std::vector<DetectorReport> reports;
  for (const auto& f : files) {
    const SessionFile s = load_session(f);
    rows.push_back(report_row(s, f.stem().string()));
    for (const auto& e : s.episodes) reports.push_back(e.result.report);
  }
  if (out_csv.empty()) {
    write_report_csv(std::cout, rows);
  } else {
    std::ofstream csv(out_csv);
    write_report_csv(csv, rows);
  }
  std::cout << "detector frequency over " << reports.size() << " trials (%):";
  if (!reports.empty())
    for (const auto& [code, pct] : detector_frequencies(reports)) std::cout << " " << to_string(code) << "=" << pct;
  std::cout << "\n";
  return 0;
}

int cmd_export_tree(const std::string& session, const std::string& out) {
  const std::string dot = export_flow_tree(load_session(session).flow_tree);
  if (out.empty() || out == "-") {
    std::cout << dot;
  } else {
    std::ofstream f(out);
    f << dot;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Segmented kinesthetic teaching simulator"};
  app.require_subcommand(1);

  std::string config, framework, strategy, out, out_csv, listen = "127.0.0.1:7777", session, sessions_dir;
  std::string serve_out = "session.json", tree_out;
  std::optional<std::uint64_t> seed;
  int batch = 1;

  auto* run = app.add_subcommand("run-scripted", "Scripted teaching session followed by autonomous trials");
  run->add_option("--config", config, "Experiment config (JSON); defaults to $ST2_CONFIG");
  run->add_option("--seed", seed, "Teacher seed (first seed of a batch)");
  run->add_option("--framework", framework, "Teaching framework")->check(CLI::IsMember({"monolithic", "st2"}));
  run->add_option("--strategy", strategy, "Key-point strategy")
      ->check(CLI::IsMember({"every_waypoint", "user03_style", "none", "random_k"}));
  run->add_option("--out", out, "Session file (a directory when --batch > 1)");
  run->add_option("--batch", batch, "Number of consecutive seeds")->check(CLI::PositiveNumber);
  run->add_option("--out-csv", out_csv, "Also write the report table here");

  auto* srv = app.add_subcommand("serve", "Host an interactive session over TCP");
  srv->add_option("--config", config, "Experiment config (JSON); defaults to $ST2_CONFIG");
  srv->add_option("--listen", listen, "host:port");
  srv->add_option("--out", serve_out, "Session file written when the client disconnects")->capture_default_str();

  auto* rep = app.add_subcommand("replay", "Re-run a session file and verify every stored artifact");
  rep->add_option("--session", session, "Session file")->required();

  auto* report = app.add_subcommand("report", "Aggregate session files into a report table");
  report->add_option("--sessions-dir", sessions_dir, "Directory of session files")->required();
  report->add_option("--out-csv", out_csv, "Output CSV (stdout when omitted)");

  auto* tree = app.add_subcommand("export-tree", "Write a session's flow tree as a Graphviz digraph");
  tree->add_option("--session", session, "Session file")->required();
  tree->add_option("--out", tree_out, "Output .dot file (stdout when omitted)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run_scripted(config, seed, framework, strategy, out, batch, out_csv);
    if (*srv) return serve(resolve_config(config), listen, serve_out, std::cerr);
    if (*rep) return cmd_replay(session);
    if (*report) return cmd_report(sessions_dir, out_csv);
    if (*tree) return cmd_export_tree(session, tree_out);
  } catch (const SessionLoadError& e) {
    std::cerr << "load error in section '" << e.section() << "': " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
