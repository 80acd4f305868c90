#pragma once

#include "tmm/inference.hpp"
#include "tmm/simulator.hpp"
#include "tmm/task_model.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace tmm {

/// Serialized data that does not match the expected record layout.
class SchemaError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Raised when a trajectory lacks the event a partial view is cut at.
class TruncationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct Truncation {
  Trajectory partial;
  bool short_window = false;
};

/// Everything the harness needs to simulate, serialize and evaluate one task.
struct Scenario {
  std::string name;
  TaskModel model;
  std::vector<Policy> policies;
  ProfileSampler sampler;
  PriorSpec prior;
  /// Observable features of a state. Never carries latent values.
  std::function<nlohmann::json(StateId)> encode_state;
  /// Inverse of encode_state; throws SchemaError on unknown or missing fields.
  std::function<StateId(const nlohmann::json &)> decode_state;
  /// Execution-time view; throws TruncationError when the cut event is missing.
  std::function<Truncation(const Trajectory &)> truncate;
  /// Optional near-miss predicate, evaluated on full trajectories.
  std::function<bool(const Trajectory &)> near_miss;
};

} // namespace tmm
