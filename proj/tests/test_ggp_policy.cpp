#include <random>

#include "doctest.h"
#include "st2/ggp_policy.hpp"
#include "support.hpp"

using namespace st2;
using namespace st2::testing;

namespace {

TimedState at(double x, int t) { return {EndEffectorPose(x, 0.0, 0.0), GripState::Open, t}; }

}  // namespace

TEST_CASE("kernel_value examples") {
  KernelParams unit{.lambda_p = 1, .lambda_theta = 1, .lambda_g = 1, .lambda_t = 1, .w_p = 1, .w_theta = 0, .w_g = 0};
  CHECK(kernel_value(at(0.2, 3), at(0.2, 3), unit) == 1.0);
  CHECK(kernel_value(at(0.0, 3), at(1.0, 3), unit) == doctest::Approx(0.367879441171).epsilon(1e-11));
  CHECK(kernel_value(at(0.0, 3), at(1.0, 4), unit) == doctest::Approx(0.135335283237).epsilon(1e-11));
  CHECK(kernel_value(at(0.0, 4), at(1.0, 3), unit) == kernel_value(at(1.0, 3), at(0.0, 4), unit));
}

TEST_CASE("train shifts labels by one") {
  Segment s;
  s.append({0.1, 0, 0}, GripState::Open);
  s.append({0.2, 0, 0}, GripState::Open);
  s.append({0.3, 0, 0}, GripState::Closed);
  const Policy p = train(s, {});
  REQUIRE(p.size() == 3);
  CHECK(p.inputs == s.samples);
  CHECK(p.labels[0] == s.samples[1]);
  CHECK(p.labels[1] == s.samples[2]);
  CHECK(p.labels[2] == s.samples[2]);
  CHECK(p.segment_id == 1);

  Segment one;
  one.append({0.4, 0.1, 0.2}, GripState::Open);
  const Policy q = train(one, {});
  CHECK(q.inputs == one.samples);
  CHECK(q.labels == one.samples);

  CHECK_THROWS_AS(train(Segment{}, {}), TrainingError);
}

TEST_CASE("train appends correction runs with their own labels") {
  Segment s;
  s.append({0.1, 0, 0}, GripState::Open);
  s.append({0.2, 0, 0}, GripState::Open);
  s.corrections.push_back({at(0.5, 1), at(0.6, 2)});
  s.corrections.push_back({at(0.9, 2)});
  const Policy p = train(s, {});
  REQUIRE(p.size() == 5);
  CHECK(p.labels[1] == s.samples[1]);
  CHECK(p.inputs[2] == s.corrections[0][0]);
  CHECK(p.labels[2] == s.corrections[0][1]);
  CHECK(p.labels[3] == s.corrections[0][1]);
  CHECK(p.labels[4] == s.corrections[1][0]);
}

TEST_CASE("predict on training inputs") {
  std::mt19937_64 rng(11);
  const Segment s = random_segment(rng, 5);
  const Policy p = train(s, {});
  const Prediction pr = predict(p, s.samples[2]);
  CHECK(pr.nearest_index == 2);
  CHECK(pr.mean == s.samples[3]);
  CHECK(pr.sigma == doctest::Approx(0.0));

  const Prediction far = predict(p, {EndEffectorPose(1e6, 1e6, 0), GripState::Open, 100000});
  CHECK(far.sigma == doctest::Approx(1.0));
}

TEST_CASE("predict ties go to the lowest index") {
  Policy p;
  p.inputs = {at(0.25, 1), at(0.75, 1), at(0.75, 1)};
  p.labels = {at(0.0, 1), at(0.5, 1), at(0.7, 1)};
  for (int k = 0; k < 5; ++k) CHECK(predict(p, at(0.75, 1)).nearest_index == 1);
  // equidistant neighbours on both sides
  CHECK(predict(p, at(0.5, 1)).nearest_index == 0);
}

TEST_CASE("predict matches a linear-scan oracle") {
  std::mt19937_64 rng(12);
  const KernelParams kp{.w_g = 0.5};
  const Segment s = random_segment(rng, 50);
  const Policy p = train(s, kp);
  for (int k = 0; k < 200; ++k) {
    const TimedState q = random_state(rng, 60);
    const Prediction pr = predict(p, q);
    const OracleHit hit = oracle_nearest(p.inputs, q, kp);
    CHECK(pr.nearest_index == hit.index);
    CHECK(pr.mean == p.labels[hit.index]);
    CHECK(pr.sigma == doctest::Approx(1.0 - hit.k).epsilon(1e-12));
    CHECK(pr.sigma >= 0.0);
    CHECK(pr.sigma <= 1.0);
  }
}

TEST_CASE("sigma grows along a ray from a single input") {
  Segment s;
  s.append({0.5, 0.3, 0.2}, GripState::Open);
  const Policy p = train(s, {});
  std::mt19937_64 rng(13);
  std::normal_distribution<double> n;
  for (int ray = 0; ray < 20; ++ray) {
    Eigen::Vector3d dir(n(rng), n(rng), n(rng));
    dir.normalize();
    double prev = -1.0;
    for (int k = 0; k <= 40; ++k) {
      const double r = 0.005 * k;
      const double sigma = predict(p, {EndEffectorPose(0.5 + r * dir.x(), 0.3 + r * dir.y(), 0.2 + r * dir.z()), GripState::Open, 1}).sigma;
      CHECK(sigma > prev);
      prev = sigma;
    }
  }
}

TEST_CASE("retrain_dirty equals full retraining") {
  std::mt19937_64 rng(14);
  Dataset d;
  for (int id = 1; id <= 3; ++id) d.segments.push_back(random_segment(rng, 10 + id, id));
  const KernelParams kp;
  const PolicySet full = train_all(d, kp);
  REQUIRE(full.size() == 3);

  const PolicySet same = retrain_dirty(d, full, {}, kp);
  for (std::size_t k = 0; k < 3; ++k) CHECK(same[k].get() == full[k].get());

  Dataset changed = d;
  changed.segments[1].samples.back().pose.x += 0.1;
  const PolicySet partial = retrain_dirty(changed, full, {2}, kp);
  CHECK(partial[0].get() == full[0].get());
  CHECK(partial[2].get() == full[2].get());
  CHECK(*partial[1] == train(changed.segments[1], kp));

  const PolicySet fresh = train_all(changed, kp);
  const PolicySet all = retrain_dirty(changed, full, {1, 2, 3}, kp);
  for (std::size_t k = 0; k < 3; ++k) CHECK(*all[k] == *fresh[k]);

  CHECK_THROWS_AS(retrain_dirty(d, full, {4}, kp), std::out_of_range);
}
