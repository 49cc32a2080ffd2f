#include "st2/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <regex>
#include <sstream>

namespace st2 {

Eigen::MatrixX3d pose_trajectory(const std::vector<TickRecord>& records) {
  Eigen::MatrixX3d out(static_cast<Eigen::Index>(records.size()), 3);
  double theta = 0.0;
  for (std::size_t k = 0; k < records.size(); ++k) {
    const auto& ee = records[k].ee;
    theta = k == 0 ? ee.theta : theta + angle_diff(ee.theta, records[k - 1].ee.theta);
    out.row(static_cast<Eigen::Index>(k)) << ee.x, ee.z, theta;
  }
  return out;
}

Eigen::MatrixX3d force_trajectory(const std::vector<TickRecord>& records) {
  Eigen::MatrixX3d out(static_cast<Eigen::Index>(records.size()), 3);
  for (std::size_t k = 0; k < records.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = records[k].force.transpose();
  return out;
}

TrialScore score(const std::vector<bool>& outcomes, int max_trials) {
  if (outcomes.empty()) throw MetricError("score: no trials");
  if (static_cast<int>(outcomes.size()) > max_trials) throw MetricError("score: more trials than allowed");
  for (std::size_t k = 0; k < outcomes.size(); ++k)
    if (outcomes[k]) return {static_cast<int>(k) + 1, 1.0 / static_cast<double>(k + 1)};
  return {};
}

std::map<ErrorCode, double> detector_frequencies(const std::vector<DetectorReport>& batch) {
  std::map<ErrorCode, double> out;
  for (auto code : kAllErrorCodes) {
    long n = 0;
    for (const auto& r : batch) n += r.has(code) ? 1 : 0;
    out[code] = batch.empty() ? 0.0 : 100.0 * static_cast<double>(n) / static_cast<double>(batch.size());
  }
  return out;
}

EpisodeMetrics episode_metrics(const std::vector<TickRecord>& records, long from, long to, double dt, bool success,
                               const DetectorReport& report) {
  std::vector<TickRecord> span;
  for (const auto& r : records)
    if (r.tick >= from && r.tick < to) span.push_back(r);
  EpisodeMetrics m;
  if (span.size() >= 4) {
    m.trajectory_jerk = jerk_frobenius(pose_trajectory(span), dt);
    m.torque_jerk = jerk_frobenius(force_trajectory(span), dt);
  }
  m.execution_time = static_cast<double>(to - from) * dt;
  m.success = success;
  for (auto code : kAllErrorCodes) m.detector_counts[code] = report.has(code) ? 1 : 0;
  return m;
}

std::string export_flow_tree(const FlowTree& tree) {
  std::ostringstream out;
  out << "digraph flow {\n";
  out << "  graph [current=" << tree.current() << "];\n";
  for (const auto& n : tree.nodes()) {
    const std::string action = to_string(n.action);
    out << "  n" << n.id << " [action=\"" << action << "\", segments=\"" << n.segment_from << "-" << n.segment_to
        << "\", ticks=\"" << n.tick_from << "-" << n.tick_to << "\", label=\"" << action << "\\nsegments "
        << n.segment_from << "-" << n.segment_to << "\\nticks " << n.tick_from << "-" << n.tick_to << "\"];\n";
  }
  for (const auto& n : tree.nodes())
    if (n.parent >= 0) out << "  n" << n.parent << " -> n" << n.id << ";\n";
  out << "}\n";
  return out.str();
}

FlowTree parse_flow_tree(const std::string& text) {
  static const std::regex node_re(
      R"re(  n(\d+) \[action="(\w+)", segments="(\d+)-(\d+)", ticks="(\d+)-(\d+)", label="[^"]*"\];)re");
  static const std::regex edge_re(R"(  n(\d+) -> n(\d+);)");
  static const std::regex current_re(R"(  graph \[current=(\d+)\];)");

  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "digraph flow {") throw std::invalid_argument("flow tree: missing header");
  std::vector<FlowNode> nodes;
  int current = -1;
  bool closed = false;
  std::smatch m;
  while (std::getline(in, line)) {
    if (line == "}") {
      closed = true;
      break;
    }
    if (std::regex_match(line, m, current_re)) {
      current = std::stoi(m[1]);
    } else if (std::regex_match(line, m, node_re)) {
      FlowNode n;
      n.id = std::stoi(m[1]);
      n.action = flow_action_from_string(m[2]);
      n.segment_from = std::stoi(m[3]);
      n.segment_to = std::stoi(m[4]);
      n.tick_from = std::stol(m[5]);
      n.tick_to = std::stol(m[6]);
      if (n.id != static_cast<int>(nodes.size())) throw std::invalid_argument("flow tree: nodes out of order");
      nodes.push_back(n);
    } else if (std::regex_match(line, m, edge_re)) {
      const int parent = std::stoi(m[1]);
      const int child = std::stoi(m[2]);
      if (child < 0 || child >= static_cast<int>(nodes.size()))
        throw std::invalid_argument("flow tree: edge to unknown node");
      nodes[static_cast<std::size_t>(child)].parent = parent;
    } else {
      throw std::invalid_argument("flow tree: unexpected line: " + line);
    }
  }
  if (!closed) throw std::invalid_argument("flow tree: missing closing brace");
  if (current < 0) throw std::invalid_argument("flow tree: missing current node");
  return FlowTree::from_nodes(std::move(nodes), current);
}

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::vector<double> numeric(const ReportRow& r) {
  std::vector<double> v{static_cast<double>(r.trials),
                        static_cast<double>(r.score.trials_to_success.value_or(0)),
                        r.score.score,
                        r.metrics.success ? 1.0 : 0.0,
                        r.metrics.trajectory_jerk,
                        r.metrics.torque_jerk,
                        r.metrics.execution_time};
  for (auto code : kAllErrorCodes) {
    const auto it = r.metrics.detector_counts.find(code);
    v.push_back(it == r.metrics.detector_counts.end() ? 0.0 : static_cast<double>(it->second));
  }
  return v;
}

}  // namespace

void write_report_csv(std::ostream& out, const std::vector<ReportRow>& rows) {
  out << "label,framework,strategy,seed,trials,trials_to_success,score,success,trajectory_jerk,torque_jerk,"
         "execution_time";
  for (auto code : kAllErrorCodes) out << "," << to_string(code);
  out << ",error\n";

  std::vector<std::vector<double>> values;
  for (const auto& r : rows) {
    values.push_back(numeric(r));
    const auto& v = values.back();
    out << r.label << "," << r.framework << "," << r.strategy << "," << r.seed;
    for (double x : v) out << "," << num(x);
    std::string note = r.error;
    std::replace(note.begin(), note.end(), ',', ';');
    std::replace(note.begin(), note.end(), '\n', ' ');
    out << "," << note << "\n";
  }
  if (values.empty()) return;

  const std::size_t cols = values.front().size();
  const double n = static_cast<double>(values.size());
  std::vector<double> mean(cols, 0.0), sd(cols, 0.0);
  for (const auto& v : values)
    for (std::size_t c = 0; c < cols; ++c) mean[c] += v[c];
  for (auto& m : mean) m /= n;
  if (values.size() > 1) {
    for (const auto& v : values)
      for (std::size_t c = 0; c < cols; ++c) sd[c] += (v[c] - mean[c]) * (v[c] - mean[c]);
    for (auto& s : sd) s = std::sqrt(s / (n - 1));
  }
  out << "mean,,,";
  for (double x : mean) out << "," << num(x);
  out << ",\nstd,,,";
  for (double x : sd) out << "," << num(x);
  out << ",\n";
}

}  // namespace st2
