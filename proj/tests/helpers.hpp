#pragma once

#include "tmm/task_model.hpp"

#include <vector>

namespace tmm::testing {

/// Two agents, two latent values, two states; every probability is chosen by the caller.
/// Agent i at latent x plays action 0 w.p. p0[i][x].
inline TaskModel two_state_model() {
  TaskModelSpec spec;
  spec.state_labels = {"s0", "s1"};
  spec.latent_labels = {"a", "b"};
  spec.agent_names = {"one", "two"};
  spec.action_labels = {{"go", "stay"}, {"go", "stay"}};
  for (int s = 0; s < 2; ++s)
    for (int j = 0; j < 4; ++j) spec.transitions.push_back({{static_cast<StateId>(1 - s), 1.0}});
  spec.initial = {{0, 1.0}};
  spec.terminal = {false, false};
  return TaskModel(std::move(spec));
}

inline std::vector<Policy> two_action_policies(const std::vector<std::vector<double>> &p0) {
  std::vector<Policy> out;
  for (std::size_t i = 0; i < p0.size(); ++i) {
    std::vector<double> table;
    for (int s = 0; s < 2; ++s)
      for (double p : p0[i]) {
        table.push_back(p);
        table.push_back(1.0 - p);
      }
    out.emplace_back(i, 2, p0[i].size(), 2, std::move(table));
  }
  return out;
}

/// Trajectory alternating s0, s1, ... with the given joint actions.
inline Trajectory alternating(const std::vector<JointAction> &actions) {
  Trajectory t;
  t.states.push_back(0);
  for (const auto &a : actions) {
    t.joint_actions.push_back(a);
    t.states.push_back(static_cast<StateId>(1 - t.states.back()));
  }
  return t;
}

} // namespace tmm::testing
