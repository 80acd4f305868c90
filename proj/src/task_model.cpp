#include "tmm/task_model.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <set>
#include <sstream>

namespace tmm {

namespace {

constexpr double kRowTolerance = 1e-9;

template <typename Labels>
std::optional<std::string> first_duplicate(const Labels &labels) {
  std::set<std::string_view> seen;
  for (const auto &l : labels) {
    if (!seen.insert(l).second) return std::string(l);
  }
  return std::nullopt;
}

} // namespace

bool LatentProfile::is_aligned() const {
  return std::adjacent_find(values.begin(), values.end(), std::not_equal_to<>()) == values.end();
}

std::vector<LatentProfile> enumerate_profiles(std::size_t agents, std::size_t latents) {
  std::vector<LatentProfile> out;
  if (agents == 0 || latents == 0) return out;
  std::size_t total = 1;
  for (std::size_t i = 0; i < agents; ++i) total *= latents;
  out.reserve(total);
  LatentProfile p{std::vector<LatentId>(agents, 0)};
  for (std::size_t n = 0; n < total; ++n) {
    out.push_back(p);
    for (std::size_t i = agents; i-- > 0;) {
      if (++p.values[i] < latents) break;
      p.values[i] = 0;
    }
  }
  return out;
}

TaskModel::TaskModel(TaskModelSpec spec) : spec_(std::move(spec)) {
  if (spec_.agent_names.empty()) throw DimensionError("task model needs at least one agent");
  if (spec_.action_labels.size() != spec_.agent_names.size())
    throw DimensionError("one action set per agent required");
  for (const auto &actions : spec_.action_labels) {
    if (actions.empty()) throw DimensionError("empty action set");
    joint_count_ *= actions.size();
  }
  if (spec_.latent_labels.empty()) throw DimensionError("empty latent space");
  if (spec_.latent_labels.size() > 256) throw DimensionError("latent space too large");
  const auto n = spec_.state_labels.size();
  if (n == 0) throw DimensionError("empty state space");
  if (spec_.transitions.size() != n * joint_count_)
    throw DimensionError("transition table must have states x joint actions rows");
  if (spec_.terminal.size() != n) throw DimensionError("terminal flags must cover every state");
  if (!spec_.reward.empty() && spec_.reward.size() != n)
    throw DimensionError("reward map must cover every state");
}

std::optional<ActionId> TaskModel::find_action(std::size_t agent, std::string_view label) const {
  const auto &labels = spec_.action_labels.at(agent);
  auto it = std::find(labels.begin(), labels.end(), label);
  if (it == labels.end()) return std::nullopt;
  return static_cast<ActionId>(it - labels.begin());
}

std::optional<LatentId> TaskModel::find_latent(std::string_view label) const {
  auto it = std::find(spec_.latent_labels.begin(), spec_.latent_labels.end(), label);
  if (it == spec_.latent_labels.end()) return std::nullopt;
  return static_cast<LatentId>(it - spec_.latent_labels.begin());
}

std::size_t TaskModel::joint_index(const JointAction &a) const {
  if (a.size() != agent_count())
    throw DimensionError("joint action has " + std::to_string(a.size()) + " components, expected " +
                         std::to_string(agent_count()));
  std::size_t index = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto count = action_count(i);
    if (a[i] >= count) throw DimensionError("action id out of range for agent " + agent_name(i));
    index = index * count + a[i];
  }
  return index;
}

JointAction TaskModel::joint_action(std::size_t index) const {
  JointAction a(agent_count());
  for (std::size_t i = agent_count(); i-- > 0;) {
    const auto count = action_count(i);
    a[i] = static_cast<ActionId>(index % count);
    index /= count;
  }
  return a;
}

std::span<const Outcome> TaskModel::transition(StateId s, const JointAction &a) const {
  if (s >= state_count()) throw DimensionError("state id out of range");
  return transition_row(s, joint_index(a));
}

double TaskModel::transition_prob(StateId s, const JointAction &a, StateId next) const {
  double p = 0.0;
  for (const auto &o : transition(s, a))
    if (o.next == next) p += o.prob;
  return p;
}

double TaskModel::initial_prob(StateId s) const {
  double p = 0.0;
  for (const auto &o : spec_.initial)
    if (o.next == s) p += o.prob;
  return p;
}

double TaskModel::reward(StateId s) const {
  if (spec_.reward.empty()) return 0.0;
  return spec_.reward.at(s);
}

Policy::Policy(std::size_t agent_index, std::size_t states, std::size_t latents, std::size_t actions,
               std::vector<double> table)
    : agent_(agent_index), states_(states), latents_(latents), actions_(actions),
      table_(std::move(table)) {
  if (table_.size() != states_ * latents_ * actions_)
    throw std::invalid_argument("policy table size does not match states x latents x actions");
  for (std::size_t s = 0; s < states_; ++s) {
    for (std::size_t x = 0; x < latents_; ++x) {
      auto r = row(static_cast<StateId>(s), static_cast<LatentId>(x));
      double sum = 0.0;
      for (double p : r) {
        if (!(p >= 0.0 && p <= 1.0))
          throw std::invalid_argument("policy probability outside [0, 1]");
        sum += p;
      }
      if (std::abs(sum - 1.0) > kRowTolerance) {
        std::ostringstream msg;
        msg << "policy row for agent " << agent_ << " state " << s << " latent " << x
            << " sums to " << sum;
        throw std::invalid_argument(msg.str());
      }
    }
  }
}

std::span<const double> Policy::row(StateId s, LatentId x) const {
  if (s >= states_ || x >= latents_) throw DimensionError("policy lookup outside table");
  return std::span<const double>(table_).subspan((static_cast<std::size_t>(s) * latents_ + x) * actions_,
                                                 actions_);
}

double Policy::prob(StateId s, LatentId x, ActionId a) const {
  if (a >= actions_) throw DimensionError("policy lookup outside table");
  return row(s, x)[a];
}

Trajectory Trajectory::slice(std::size_t first, std::size_t last) const {
  last = std::min(last, steps());
  first = std::min(first, last);
  Trajectory out;
  out.states.assign(states.begin() + static_cast<std::ptrdiff_t>(first),
                    states.begin() + static_cast<std::ptrdiff_t>(last) + 1);
  out.joint_actions.assign(joint_actions.begin() + static_cast<std::ptrdiff_t>(first),
                           joint_actions.begin() + static_cast<std::ptrdiff_t>(last));
  out.ground_truth = ground_truth;
  out.seed = seed;
  out.capped = capped;
  return out;
}

std::string to_string(ViolationKind kind) {
  switch (kind) {
  case ViolationKind::non_stochastic_row: return "non-stochastic row";
  case ViolationKind::dangling_identifier: return "dangling identifier";
  case ViolationKind::duplicate_identifier: return "duplicate identifier";
  case ViolationKind::unreachable_terminal: return "unreachable terminal";
  case ViolationKind::shape_mismatch: return "shape mismatch";
  }
  return "unknown";
}

std::vector<Violation> validate_task(const TaskModel &model) {
  std::vector<Violation> out;
  const auto &spec = model.spec();
  const auto n = model.state_count();

  auto check_unique = [&](const auto &labels, const std::string &what) {
    if (auto dup = first_duplicate(labels))
      out.push_back({ViolationKind::duplicate_identifier, what + " label '" + *dup + "' repeated"});
  };
  check_unique(spec.state_labels, "state");
  check_unique(spec.latent_labels, "latent");
  check_unique(spec.agent_names, "agent");
  for (std::size_t i = 0; i < spec.action_labels.size(); ++i)
    check_unique(spec.action_labels[i], "action (agent " + spec.agent_names[i] + ")");

  auto check_row = [&](std::span<const Outcome> row, const std::string &where) {
    double sum = 0.0;
    bool dangling = false;
    for (const auto &o : row) {
      if (o.next >= n) {
        out.push_back({ViolationKind::dangling_identifier,
                       where + " references unknown state " + std::to_string(o.next)});
        dangling = true;
      }
      if (!(o.prob >= 0.0 && o.prob <= 1.0)) {
        out.push_back({ViolationKind::non_stochastic_row, where + " has probability outside [0, 1]"});
        return;
      }
      sum += o.prob;
    }
    if (!dangling && std::abs(sum - 1.0) > kRowTolerance) {
      std::ostringstream msg;
      msg << where << " sums to " << sum;
      out.push_back({ViolationKind::non_stochastic_row, msg.str()});
    }
  };

  check_row(model.initial(), "initial distribution");
  for (StateId s = 0; s < n; ++s) {
    if (model.is_terminal(s)) continue;
    for (std::size_t j = 0; j < model.joint_action_count(); ++j)
      check_row(model.transition_row(s, j),
                "transition row (" + spec.state_labels[s] + ", joint " + std::to_string(j) + ")");
  }

  // A terminal state must be reachable from the initial support.
  std::vector<bool> seen(n, false);
  std::deque<StateId> frontier;
  for (const auto &o : model.initial()) {
    if (o.next < n && o.prob > 0.0 && !seen[o.next]) {
      seen[o.next] = true;
      frontier.push_back(o.next);
    }
  }
  bool reached = false;
  while (!frontier.empty() && !reached) {
    const StateId s = frontier.front();
    frontier.pop_front();
    if (model.is_terminal(s)) {
      reached = true;
      break;
    }
    for (std::size_t j = 0; j < model.joint_action_count(); ++j) {
      for (const auto &o : model.transition_row(s, j)) {
        if (o.next < n && o.prob > 0.0 && !seen[o.next]) {
          seen[o.next] = true;
          frontier.push_back(o.next);
        }
      }
    }
  }
  if (!reached)
    out.push_back({ViolationKind::unreachable_terminal, "no terminal state reachable from the initial support"});
  return out;
}

std::vector<Violation> validate_policies(const TaskModel &model, std::span<const Policy> policies) {
  std::vector<Violation> out;
  if (policies.size() != model.agent_count()) {
    out.push_back({ViolationKind::shape_mismatch, "expected one policy per agent"});
    return out;
  }
  for (std::size_t i = 0; i < policies.size(); ++i) {
    const auto &p = policies[i];
    if (p.agent_index() != i)
      out.push_back({ViolationKind::shape_mismatch, "policy " + std::to_string(i) + " has agent index " +
                                                        std::to_string(p.agent_index())});
    if (p.state_count() != model.state_count() || p.latent_count() != model.latent_count() ||
        p.action_count() != model.action_count(i))
      out.push_back({ViolationKind::shape_mismatch,
                     "policy table for agent " + model.agent_name(i) + " does not match the model"});
  }
  return out;
}

double joint_action_probability(std::span<const Policy> policies, StateId s, const LatentProfile &profile,
                                const JointAction &a) {
  if (policies.size() != profile.size() || policies.size() != a.size())
    throw DimensionError("policies, profile and joint action must have one entry per agent");
  double p = 1.0;
  for (std::size_t i = 0; i < policies.size(); ++i) p *= policies[i].prob(s, profile.values[i], a[i]);
  return p;
}

} // namespace tmm
