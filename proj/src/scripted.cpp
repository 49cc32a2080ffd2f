#include "st2/scripted.hpp"

#include <functional>

namespace st2 {

std::string run_label(const ExperimentConfig& cfg) {
  return to_string(cfg.session.framework) + "-" + to_string(cfg.teacher.strategy) + "-" +
         std::to_string(cfg.teacher.seed);
}

ScriptedResult run_scripted(const ExperimentConfig& cfg) {
  ScriptedResult out;
  Engine engine(cfg.session, cfg.world);
  const WaypointPlan plan = canonical_plan(cfg.world.layout);
  std::vector<EpisodeEntry> episodes;
  try {
    out.demo = demonstrate(engine, plan, cfg.teacher, cfg.fault);
    for (int trial = 0; trial < cfg.max_trials; ++trial) {
      CorrectionSupervisor supervisor(plan, cfg.teacher);
      const EpisodeResult res = run_full_auto(engine, std::ref(supervisor));
      episodes.push_back(measure_episode(engine, res));
      out.outcomes.push_back(res.success);
      out.corrections.insert(out.corrections.end(), supervisor.log().begin(), supervisor.log().end());
      if (res.success) break;
    }
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  out.session = capture_session(engine, cfg, std::move(episodes));
  out.row = report_row(out.session, run_label(cfg));
  if (out.error) out.row.error = *out.error;
  return out;
}

ReportRow report_row(const SessionFile& file, const std::string& label) {
  ReportRow row;
  row.label = label;
  row.framework = to_string(file.config.session.framework);
  row.strategy = to_string(file.config.teacher.strategy);
  row.seed = file.config.teacher.seed;
  row.trials = static_cast<int>(file.episodes.size());
  std::vector<bool> outcomes;
  for (const auto& e : file.episodes) outcomes.push_back(e.result.success);
  if (!outcomes.empty()) {
    row.score = score(outcomes, std::max<int>(file.config.max_trials, static_cast<int>(outcomes.size())));
    row.metrics = file.episodes.back().metrics;
  }
  return row;
}

CorrectionCost correction_cost(const ExperimentConfig& cfg, const DemoFault& fault) {
  CorrectionCost out;

  ExperimentConfig seg = cfg;
  seg.session.framework = Framework::St2;
  seg.fault = fault;
  const ScriptedResult r = run_scripted(seg);
  for (const auto& s : r.session.dataset.segments)
    for (const auto& run : s.corrections) out.segmented += static_cast<long>(run.size());
  out.segmented_success = !r.outcomes.empty() && r.outcomes.back();

  ExperimentConfig mono = cfg;
  mono.session.framework = Framework::Monolithic;
  Engine engine(mono.session, mono.world);
  const DemoLog log = demonstrate(engine, canonical_plan(mono.world.layout), mono.teacher, fault);
  const long redo_from = fault.task > 1 ? log.task_end_tick[static_cast<std::size_t>(fault.task - 2)] : 0;
  out.monolithic = log.ticks - redo_from;
  return out;
}

}  // namespace st2
