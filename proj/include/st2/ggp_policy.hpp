#ifndef ST2_GGP_POLICY_HPP
#define ST2_GGP_POLICY_HPP

#include <memory>
#include <set>
#include <stdexcept>
#include <vector>

#include "st2/core_model.hpp"

namespace st2 {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Time-encoded graph-GP policy. The one-hot kernel collapses the GP
/// posterior to label playback of the nearest training input, so the
/// policy is just the input/label pairs.
struct Policy {
  std::vector<TimedState> inputs;
  std::vector<TimedState> labels;
  KernelParams params;
  int segment_id = 0;

  std::size_t size() const { return inputs.size(); }
  bool operator==(const Policy&) const = default;
};

struct Prediction {
  TimedState mean;
  double sigma = 1.0;
  std::size_t nearest_index = 0;
};

/// Ordered per-segment policies. Entries are shared so that untouched
/// segments survive a partial retrain as the same object.
using PolicySet = std::vector<std::shared_ptr<const Policy>>;

/// exp(-pose_distance) * exp(-|dt| / lambda_t).
double kernel_value(const TimedState& a, const TimedState& b, const KernelParams& params);

/// Labels are the next sample of the same run; the last sample labels itself.
/// Correction runs are appended after the primary demonstration, each with
/// its own shifted labels.
Policy train(const Segment& segment, const KernelParams& params);

/// Linear scan for the most correlated training input. Ties go to the lowest index.
Prediction predict(const Policy& policy, const TimedState& query);

PolicySet train_all(const Dataset& dataset, const KernelParams& params);

/// Retrains only the segments listed in `dirty`. The result equals
/// train_all(dataset, params). Throws std::out_of_range on unknown ids.
PolicySet retrain_dirty(const Dataset& dataset, const PolicySet& policies, const std::set<int>& dirty,
                        const KernelParams& params);

}  // namespace st2

#endif  // ST2_GGP_POLICY_HPP
