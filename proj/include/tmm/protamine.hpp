#pragma once

#include "tmm/scenario.hpp"

#include <vector>

namespace tmm::protamine {

// Agents, actions and latent values. Ids are stable and appear in serialized data
// only through their labels.
inline constexpr std::size_t kSurgeon = 0;    // attending surgeon (AS)
inline constexpr std::size_t kResident = 1;   // resident anesthesiologist (RA)

enum SurgeonAction : ActionId { kRequest = 0, kRemoveCannula = 1, kSurgeonNoop = 2 };
enum ResidentAction : ActionId { kIncremental = 0, kBolus = 1, kCommunicate = 2, kResidentNoop = 3 };
enum Strategy : LatentId { kIncrementalModel = 0, kBolusModel = 1 };

enum class Patient : std::uint8_t { nominal, allergic, adverse };

struct Params {
  double p_allergic_per_increment = 0.01;
  double p_adverse_bolus = 0.8;
  double comm_rate_correct = 0.3;
  double comm_rate_incorrect = 0.1;
  double p_ra_bolus = 0.5;
  double p_request = 0.25;        // surgeon request rate before the phase starts
  double p_remove_cannula = 0.5;  // per in-phase step while cannulas remain
  std::vector<int> dosage_ladder{0, 10, 25, 50, 75, 100};
  int cannulas = 2;

  /// Throws std::invalid_argument on out-of-range values.
  void check() const;
};

struct State {
  bool phase = false;
  std::size_t dosage_level = 0; // index into the dosage ladder
  int cannulas_removed = 0;
  Patient patient = Patient::nominal;

  friend bool operator==(const State &, const State &) = default;
};

/// Dense indexing of the finite protamine state space.
class StateSpace {
public:
  explicit StateSpace(const Params &params);

  [[nodiscard]] std::size_t size() const;
  [[nodiscard]] StateId encode(const State &s) const;
  [[nodiscard]] State decode(StateId id) const;
  [[nodiscard]] int dosage_percent(const State &s) const { return ladder_.at(s.dosage_level); }
  [[nodiscard]] std::size_t top_level() const { return ladder_.size() - 1; }
  [[nodiscard]] int cannulas() const { return cannulas_; }
  [[nodiscard]] bool is_terminal(const State &s) const;

private:
  std::vector<int> ladder_;
  int cannulas_;
};

const char *to_string(Patient p);

TaskModel build_task(const Params &params);
std::vector<Policy> ground_truth_policies(const Params &params);
/// Surgeon always holds the incremental model; the resident holds bolus w.p. p_ra_bolus.
ProfileSampler profile_sampler(const Params &params);
/// Surgeon pinned to incremental, resident uniform.
PriorSpec default_prior();

/// Prefix ending right after the first step in which the surgeon requests protamine.
Trajectory truncation_point(const Trajectory &traj);

/// A bolus was given and the patient stayed nominal.
bool is_near_miss(const Params &params, const Trajectory &traj);
bool has_bolus(const Trajectory &traj);

Scenario make_scenario(const Params &params = {});

} // namespace tmm::protamine
