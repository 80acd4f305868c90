#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tmm {

using StateId = std::uint32_t;
using ActionId = std::uint16_t;
using LatentId = std::uint8_t;

/// One action per agent, indexed by agent.
using JointAction = std::vector<ActionId>;

/// Thrown when sizes of policies, profiles, joint actions or tables disagree.
class DimensionError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when observed data is impossible under every hypothesis the model admits.
class ModelInconsistencyError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct Outcome {
  StateId next;
  double prob;
};

/// Joint assignment of latent estimates, one per agent.
struct LatentProfile {
  std::vector<LatentId> values;

  [[nodiscard]] std::size_t size() const { return values.size(); }
  [[nodiscard]] bool is_aligned() const;

  friend auto operator<=>(const LatentProfile &, const LatentProfile &) = default;
  friend bool operator==(const LatentProfile &, const LatentProfile &) = default;
};

/// Enumerate every profile of `agents` components over `latents` values in
/// lexicographic order, first agent most significant.
std::vector<LatentProfile> enumerate_profiles(std::size_t agents, std::size_t latents);

/// Raw ingredients of a task model. Tables are dense; `transitions` is indexed
/// by `state * joint_action_count + joint_index`.
struct TaskModelSpec {
  std::vector<std::string> state_labels;
  std::vector<std::string> latent_labels;
  std::vector<std::string> agent_names;
  std::vector<std::vector<std::string>> action_labels; // per agent
  std::vector<std::vector<Outcome>> transitions;
  std::vector<Outcome> initial;
  std::vector<bool> terminal;
  std::vector<double> reward; // empty means zero everywhere
};

/**
 * Finite multi-agent task with a time-invariant latent feature: observable
 * states, a latent value set shared by all agents, per-agent action sets, a
 * transition kernel over joint actions, an initial state distribution, a
 * terminal predicate and a reward map.
 *
 * Construction checks only table shapes; semantic checks (stochastic rows,
 * dangling ids, reachability) are reported by validate_task().
 */
class TaskModel {
public:
  explicit TaskModel(TaskModelSpec spec);

  [[nodiscard]] std::size_t state_count() const { return spec_.state_labels.size(); }
  [[nodiscard]] std::size_t latent_count() const { return spec_.latent_labels.size(); }
  [[nodiscard]] std::size_t agent_count() const { return spec_.agent_names.size(); }
  [[nodiscard]] std::size_t action_count(std::size_t agent) const {
    return spec_.action_labels.at(agent).size();
  }
  [[nodiscard]] std::size_t joint_action_count() const { return joint_count_; }

  [[nodiscard]] const std::string &state_label(StateId s) const { return spec_.state_labels.at(s); }
  [[nodiscard]] const std::string &latent_label(LatentId x) const { return spec_.latent_labels.at(x); }
  [[nodiscard]] const std::string &agent_name(std::size_t i) const { return spec_.agent_names.at(i); }
  [[nodiscard]] const std::string &action_label(std::size_t agent, ActionId a) const {
    return spec_.action_labels.at(agent).at(a);
  }
  [[nodiscard]] std::optional<ActionId> find_action(std::size_t agent, std::string_view label) const;
  [[nodiscard]] std::optional<LatentId> find_latent(std::string_view label) const;

  [[nodiscard]] std::size_t joint_index(const JointAction &a) const;
  [[nodiscard]] JointAction joint_action(std::size_t index) const;

  [[nodiscard]] std::span<const Outcome> transition(StateId s, const JointAction &a) const;
  [[nodiscard]] std::span<const Outcome> transition_row(StateId s, std::size_t joint) const {
    return spec_.transitions.at(static_cast<std::size_t>(s) * joint_count_ + joint);
  }
  /// T(next | s, a); zero when `next` is not in the row's support.
  [[nodiscard]] double transition_prob(StateId s, const JointAction &a, StateId next) const;

  [[nodiscard]] std::span<const Outcome> initial() const { return spec_.initial; }
  [[nodiscard]] double initial_prob(StateId s) const;
  [[nodiscard]] bool is_terminal(StateId s) const { return spec_.terminal.at(s); }
  [[nodiscard]] double reward(StateId s) const;

  [[nodiscard]] const TaskModelSpec &spec() const { return spec_; }

private:
  TaskModelSpec spec_;
  std::size_t joint_count_ = 1;
};

/// Conditional action distribution pi_i(a_i | s, x_i) stored as a dense table.
class Policy {
public:
  /// `table` is indexed by `(state * latents + latent) * actions + action`.
  /// Throws std::invalid_argument unless every row is a distribution.
  Policy(std::size_t agent_index, std::size_t states, std::size_t latents, std::size_t actions,
         std::vector<double> table);

  [[nodiscard]] std::size_t agent_index() const { return agent_; }
  [[nodiscard]] std::size_t state_count() const { return states_; }
  [[nodiscard]] std::size_t latent_count() const { return latents_; }
  [[nodiscard]] std::size_t action_count() const { return actions_; }

  [[nodiscard]] double prob(StateId s, LatentId x, ActionId a) const;
  [[nodiscard]] std::span<const double> row(StateId s, LatentId x) const;

private:
  std::size_t agent_;
  std::size_t states_;
  std::size_t latents_;
  std::size_t actions_;
  std::vector<double> table_;
};

/// Observable record of one execution: s^0..s^k and a^0..a^{k-1}.
struct Trajectory {
  std::vector<StateId> states;
  std::vector<JointAction> joint_actions;
  std::optional<LatentProfile> ground_truth; // evaluation only, never read by inference
  std::uint64_t seed = 0;
  bool capped = false; // episode cap reached before a terminal state

  [[nodiscard]] std::size_t steps() const { return joint_actions.size(); }
  /// Steps [first, last) with the states that bracket them; metadata is kept.
  [[nodiscard]] Trajectory slice(std::size_t first, std::size_t last) const;

  friend bool operator==(const Trajectory &, const Trajectory &) = default;
};

enum class ViolationKind {
  non_stochastic_row,
  dangling_identifier,
  duplicate_identifier,
  unreachable_terminal,
  shape_mismatch,
};

struct Violation {
  ViolationKind kind;
  std::string message;
};

std::string to_string(ViolationKind kind);

/// Report-style model check; an empty result means the model is valid.
std::vector<Violation> validate_task(const TaskModel &model);

/// Policy table shape and agent index checks against a model.
std::vector<Violation> validate_policies(const TaskModel &model, std::span<const Policy> policies);

/// prod_i pi_i(a_i | s, x_i).
double joint_action_probability(std::span<const Policy> policies, StateId s,
                                const LatentProfile &profile, const JointAction &a);

} // namespace tmm
