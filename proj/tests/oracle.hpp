#pragma once

// Test-only reference implementations. Nothing here calls into the inference code.

#include "tmm/task_model.hpp"

#include <random>
#include <vector>

namespace tmm::testing {

/// Direct-product posterior over every profile, in enumerate order. With
/// `with_dynamics` the initial-state and transition factors are multiplied in
/// as well. Returns an all-zero vector when every profile has zero likelihood.
inline std::vector<double> brute_force_posterior(const TaskModel &model, const std::vector<Policy> &policies,
                                                 const std::vector<std::vector<double>> &prior,
                                                 const Trajectory &traj, bool with_dynamics = false) {
  const auto n = model.agent_count();
  const auto nx = model.latent_count();
  std::size_t total = 1;
  for (std::size_t i = 0; i < n; ++i) total *= nx;

  std::vector<double> w(total, 0.0);
  for (std::size_t code = 0; code < total; ++code) {
    std::vector<std::size_t> x(n);
    std::size_t rest = code;
    for (std::size_t i = n; i-- > 0;) {
      x[i] = rest % nx;
      rest /= nx;
    }
    double p = 1.0;
    for (std::size_t i = 0; i < n; ++i) p *= prior[i][x[i]];
    if (with_dynamics) p *= model.initial_prob(traj.states.front());
    for (std::size_t j = 0; j < traj.joint_actions.size(); ++j) {
      const auto &a = traj.joint_actions[j];
      for (std::size_t i = 0; i < n; ++i)
        p *= policies[i].row(traj.states[j], static_cast<LatentId>(x[i]))[a[i]];
      if (with_dynamics) p *= model.transition_prob(traj.states[j], a, traj.states[j + 1]);
    }
    w[code] = p;
  }
  double z = 0.0;
  for (double v : w) z += v;
  if (z > 0.0)
    for (double &v : w) v /= z;
  return w;
}

struct RandomInstance {
  TaskModel model;
  std::vector<Policy> policies;
  std::vector<std::vector<double>> prior;
  Trajectory traj;
};

inline std::vector<double> random_distribution(std::mt19937_64 &rng, std::size_t k, double zero_rate,
                                               double floor = 0.0) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(k);
  double sum = 0.0;
  for (auto &x : v) {
    x = u(rng) < zero_rate ? 0.0 : floor + u(rng);
    sum += x;
  }
  if (sum == 0.0) {
    v[std::uniform_int_distribution<std::size_t>(0, k - 1)(rng)] = 1.0;
    sum = 1.0;
  }
  for (auto &x : v) x /= sum;
  return v;
}

inline std::size_t draw(std::mt19937_64 &rng, const std::vector<double> &p) {
  return std::discrete_distribution<std::size_t>(p.begin(), p.end())(rng);
}

/// Random task with |S| <= max_states, |X| <= max_latents, n <= max_agents and
/// a trajectory of length <= max_steps sampled under a random true profile.
/// `zero_rate` sparsifies policy rows; `floor` bounds probabilities away from 0.
inline RandomInstance random_instance(std::mt19937_64 &rng, std::size_t max_states, std::size_t max_latents,
                                      std::size_t max_agents, std::size_t max_steps, double zero_rate = 0.3,
                                      double floor = 0.0) {
  auto pick = [&](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); };
  const auto ns = pick(1, max_states);
  const auto nx = pick(1, max_latents);
  const auto n = pick(1, max_agents);
  const auto k = pick(0, max_steps);

  TaskModelSpec spec;
  for (std::size_t s = 0; s < ns; ++s) spec.state_labels.push_back("s" + std::to_string(s));
  for (std::size_t x = 0; x < nx; ++x) spec.latent_labels.push_back("x" + std::to_string(x));
  std::vector<std::size_t> actions(n);
  for (std::size_t i = 0; i < n; ++i) {
    spec.agent_names.push_back("agent" + std::to_string(i));
    actions[i] = pick(1, 3);
    std::vector<std::string> labels;
    for (std::size_t a = 0; a < actions[i]; ++a) labels.push_back("a" + std::to_string(a));
    spec.action_labels.push_back(labels);
  }
  std::size_t joint = 1;
  for (auto c : actions) joint *= c;
  for (std::size_t r = 0; r < ns * joint; ++r) {
    auto p = random_distribution(rng, ns, 0.3);
    std::vector<Outcome> row;
    for (std::size_t s = 0; s < ns; ++s)
      if (p[s] > 0.0) row.push_back({static_cast<StateId>(s), p[s]});
    spec.transitions.push_back(std::move(row));
  }
  const auto init = random_distribution(rng, ns, 0.3);
  for (std::size_t s = 0; s < ns; ++s)
    if (init[s] > 0.0) spec.initial.push_back({static_cast<StateId>(s), init[s]});
  spec.terminal.assign(ns, false);
  TaskModel model(std::move(spec));

  std::vector<Policy> policies;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> table;
    for (std::size_t r = 0; r < ns * nx; ++r) {
      auto p = random_distribution(rng, actions[i], zero_rate, floor);
      table.insert(table.end(), p.begin(), p.end());
    }
    policies.emplace_back(i, ns, nx, actions[i], std::move(table));
  }
  std::vector<std::vector<double>> prior;
  for (std::size_t i = 0; i < n; ++i) prior.push_back(random_distribution(rng, nx, 0.0, floor));

  // Roll out under a profile drawn from the prior so the likelihood is positive.
  std::vector<std::size_t> truth(n);
  for (std::size_t i = 0; i < n; ++i) truth[i] = draw(rng, prior[i]);
  Trajectory traj;
  std::vector<double> init_p(ns, 0.0);
  for (const auto &o : model.initial()) init_p[o.next] += o.prob;
  traj.states.push_back(static_cast<StateId>(draw(rng, init_p)));
  for (std::size_t j = 0; j < k; ++j) {
    JointAction a(n);
    for (std::size_t i = 0; i < n; ++i) {
      auto row = policies[i].row(traj.states.back(), static_cast<LatentId>(truth[i]));
      a[i] = static_cast<ActionId>(draw(rng, std::vector<double>(row.begin(), row.end())));
    }
    std::vector<double> next(ns, 0.0);
    for (const auto &o : model.transition(traj.states.back(), a)) next[o.next] += o.prob;
    traj.states.push_back(static_cast<StateId>(draw(rng, next)));
    traj.joint_actions.push_back(std::move(a));
  }
  return {std::move(model), std::move(policies), std::move(prior), std::move(traj)};
}

} // namespace tmm::testing
