#include "st2/ggp_policy.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace st2 {

double kernel_value(const TimedState& a, const TimedState& b, const KernelParams& params) {
  const double dt = std::abs(static_cast<double>(a.t - b.t)) / params.lambda_t;
  return std::exp(-pose_distance(a, b, params)) * std::exp(-dt);
}

namespace {

void append_run(Policy& policy, const std::vector<TimedState>& run) {
  for (std::size_t j = 0; j < run.size(); ++j) {
    policy.inputs.push_back(run[j]);
    policy.labels.push_back(j + 1 < run.size() ? run[j + 1] : run[j]);
  }
}

}  // namespace

Policy train(const Segment& segment, const KernelParams& params) {
  if (segment.samples.empty())
    throw TrainingError("cannot train segment " + std::to_string(segment.id) + ": no samples");
  params.validate();
  Policy policy;
  policy.params = params;
  policy.segment_id = segment.id;
  const std::size_t total = segment.samples.size() + segment.correction_count();
  policy.inputs.reserve(total);
  policy.labels.reserve(total);
  append_run(policy, segment.samples);
  for (const auto& run : segment.corrections) append_run(policy, run);
  return policy;
}

Prediction predict(const Policy& policy, const TimedState& query) {
  Prediction out;
  double best = -1.0;
  for (std::size_t j = 0; j < policy.inputs.size(); ++j) {
    const double k = kernel_value(query, policy.inputs[j], policy.params);
    if (k > best) {
      best = k;
      out.nearest_index = j;
    }
  }
  if (policy.inputs.empty()) return out;
  out.mean = policy.labels[out.nearest_index];
  out.sigma = std::clamp(1.0 - best, 0.0, 1.0);
  return out;
}

PolicySet train_all(const Dataset& dataset, const KernelParams& params) {
  PolicySet out;
  out.reserve(dataset.segments.size());
  for (const auto& seg : dataset.segments) {
    if (seg.empty()) break;  // an open, not-yet-recorded segment ends the trainable prefix
    out.push_back(std::make_shared<const Policy>(train(seg, params)));
  }
  return out;
}

PolicySet retrain_dirty(const Dataset& dataset, const PolicySet& policies, const std::set<int>& dirty,
                        const KernelParams& params) {
  for (int id : dirty)
    if (id < 1 || id > static_cast<int>(dataset.segments.size()))
      throw std::out_of_range("retrain_dirty: unknown segment id " + std::to_string(id));

  PolicySet out;
  out.reserve(dataset.segments.size());
  for (std::size_t k = 0; k < dataset.segments.size(); ++k) {
    const auto& seg = dataset.segments[k];
    if (seg.empty()) break;
    const int id = static_cast<int>(k) + 1;
    const bool reuse = !dirty.contains(id) && k < policies.size() && policies[k] && policies[k]->segment_id == seg.id &&
                       policies[k]->params == params;
    out.push_back(reuse ? policies[k] : std::make_shared<const Policy>(train(seg, params)));
  }
  return out;
}

}  // namespace st2
