#include "tmm/protamine.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace tmm::protamine {

namespace {

constexpr std::size_t kPatientStates = 3;

void check_probability(double p, const char *name) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument(std::string("protamine parameter ") + name +
                                                           " must be in [0, 1]");
}

std::string label(const StateSpace &space, const State &s) {
  return std::string("phase=") + (s.phase ? "1" : "0") + ",dosage=" + std::to_string(space.dosage_percent(s)) +
         ",cannulas=" + std::to_string(s.cannulas_removed) + ",patient=" + to_string(s.patient);
}

// Splits `base` into a nominal branch and a reaction branch of probability p.
void push_reaction(std::vector<Outcome> &row, const StateSpace &space, State next, double p, Patient reaction) {
  if (p < 1.0) row.push_back({space.encode(next), 1.0 - p});
  if (p > 0.0) {
    next.patient = reaction;
    row.push_back({space.encode(next), p});
  }
}

} // namespace

void Params::check() const {
  check_probability(p_allergic_per_increment, "p_allergic_per_increment");
  check_probability(p_adverse_bolus, "p_adverse_bolus");
  check_probability(comm_rate_correct, "comm_rate_correct");
  check_probability(comm_rate_incorrect, "comm_rate_incorrect");
  check_probability(p_ra_bolus, "p_ra_bolus");
  check_probability(p_request, "p_request");
  check_probability(p_remove_cannula, "p_remove_cannula");
  if (p_request == 0.0) throw std::invalid_argument("p_request must be positive or the phase never starts");
  if (dosage_ladder.size() < 2 || dosage_ladder.front() != 0)
    throw std::invalid_argument("dosage ladder must start at 0 and have at least two levels");
  if (!std::is_sorted(dosage_ladder.begin(), dosage_ladder.end()) ||
      std::set<int>(dosage_ladder.begin(), dosage_ladder.end()).size() != dosage_ladder.size())
    throw std::invalid_argument("dosage ladder must be strictly increasing");
  if (cannulas < 0) throw std::invalid_argument("cannula count must be non-negative");
  if (cannulas > 0 && p_remove_cannula == 0.0)
    throw std::invalid_argument("p_remove_cannula must be positive when cannulas remain");
}

const char *to_string(Patient p) {
  switch (p) {
  case Patient::nominal: return "nominal";
  case Patient::allergic: return "allergic";
  case Patient::adverse: return "adverse";
  }
  return "unknown";
}

StateSpace::StateSpace(const Params &params) : ladder_(params.dosage_ladder), cannulas_(params.cannulas) {}

std::size_t StateSpace::size() const {
  return 2 * ladder_.size() * static_cast<std::size_t>(cannulas_ + 1) * kPatientStates;
}

StateId StateSpace::encode(const State &s) const {
  if (s.dosage_level >= ladder_.size() || s.cannulas_removed < 0 || s.cannulas_removed > cannulas_)
    throw std::out_of_range("protamine state outside the state space");
  std::size_t id = s.phase ? 1 : 0;
  id = id * ladder_.size() + s.dosage_level;
  id = id * static_cast<std::size_t>(cannulas_ + 1) + static_cast<std::size_t>(s.cannulas_removed);
  id = id * kPatientStates + static_cast<std::size_t>(s.patient);
  return static_cast<StateId>(id);
}

State StateSpace::decode(StateId id) const {
  if (id >= size()) throw std::out_of_range("protamine state id out of range");
  State s;
  std::size_t rest = id;
  s.patient = static_cast<Patient>(rest % kPatientStates);
  rest /= kPatientStates;
  s.cannulas_removed = static_cast<int>(rest % static_cast<std::size_t>(cannulas_ + 1));
  rest /= static_cast<std::size_t>(cannulas_ + 1);
  s.dosage_level = rest % ladder_.size();
  s.phase = rest / ladder_.size() == 1;
  return s;
}

bool StateSpace::is_terminal(const State &s) const {
  if (s.patient != Patient::nominal) return true;
  return s.cannulas_removed == cannulas_ && s.dosage_level == top_level();
}

TaskModel build_task(const Params &params) {
  params.check();
  const StateSpace space(params);
  TaskModelSpec spec;
  spec.agent_names = {"AS", "RA"};
  spec.action_labels = {{"request", "remove_cannula", "noop"}, {"incremental", "bolus", "communicate", "noop"}};
  spec.latent_labels = {"incremental", "bolus"};
  const std::size_t joint = 3 * 4;

  spec.state_labels.reserve(space.size());
  spec.terminal.reserve(space.size());
  spec.transitions.reserve(space.size() * joint);
  for (StateId id = 0; id < space.size(); ++id) {
    const State s = space.decode(id);
    spec.state_labels.push_back(label(space, s));
    spec.terminal.push_back(space.is_terminal(s));
    for (ActionId as = 0; as < 3; ++as) {
      for (ActionId ra = 0; ra < 4; ++ra) {
        std::vector<Outcome> row;
        if (space.is_terminal(s)) {
          row.push_back({id, 1.0});
          spec.transitions.push_back(std::move(row));
          continue;
        }
        State next = s;
        if (as == kRequest) next.phase = true;
        if (as == kRemoveCannula && s.phase && s.cannulas_removed < space.cannulas()) ++next.cannulas_removed;

        const bool can_dose = s.phase && s.dosage_level < space.top_level();
        if (ra == kIncremental && can_dose) {
          ++next.dosage_level;
          push_reaction(row, space, next, params.p_allergic_per_increment, Patient::allergic);
        } else if (ra == kBolus && can_dose) {
          next.dosage_level = space.top_level();
          push_reaction(row, space, next, params.p_adverse_bolus, Patient::adverse);
        } else {
          row.push_back({space.encode(next), 1.0});
        }
        spec.transitions.push_back(std::move(row));
      }
    }
  }
  spec.initial = {{space.encode(State{}), 1.0}};
  return TaskModel(std::move(spec));
}

std::vector<Policy> ground_truth_policies(const Params &params) {
  params.check();
  const StateSpace space(params);
  const std::size_t n = space.size();
  std::vector<double> surgeon(n * 2 * 3, 0.0);
  std::vector<double> resident(n * 2 * 4, 0.0);

  for (StateId id = 0; id < n; ++id) {
    const State s = space.decode(id);
    const bool terminal = space.is_terminal(s);
    for (LatentId x = 0; x < 2; ++x) {
      double *as = &surgeon[(id * 2 + x) * 3];
      if (terminal) {
        as[kSurgeonNoop] = 1.0;
      } else if (!s.phase) {
        as[kRequest] = params.p_request;
        as[kSurgeonNoop] = 1.0 - params.p_request;
      } else if (s.cannulas_removed < space.cannulas()) {
        as[kRemoveCannula] = params.p_remove_cannula;
        as[kSurgeonNoop] = 1.0 - params.p_remove_cannula;
      } else {
        as[kSurgeonNoop] = 1.0;
      }

      double *ra = &resident[(id * 2 + x) * 4];
      if (terminal) {
        ra[kResidentNoop] = 1.0;
      } else if (!s.phase) {
        const double c = x == kIncrementalModel ? params.comm_rate_correct : params.comm_rate_incorrect;
        ra[kCommunicate] = c;
        ra[kResidentNoop] = 1.0 - c;
      } else if (s.dosage_level < space.top_level()) {
        ra[x == kIncrementalModel ? kIncremental : kBolus] = 1.0;
      } else {
        ra[kResidentNoop] = 1.0;
      }
    }
  }
  std::vector<Policy> out;
  out.emplace_back(kSurgeon, n, 2, 3, std::move(surgeon));
  out.emplace_back(kResident, n, 2, 4, std::move(resident));
  return out;
}

ProfileSampler profile_sampler(const Params &params) {
  params.check();
  return ProfileSampler({{LatentProfile{{kIncrementalModel, kIncrementalModel}}, 1.0 - params.p_ra_bolus},
                         {LatentProfile{{kIncrementalModel, kBolusModel}}, params.p_ra_bolus}});
}

PriorSpec default_prior() { return PriorSpec{{{1.0, 0.0}, {0.5, 0.5}}}; }

Trajectory truncation_point(const Trajectory &traj) {
  for (std::size_t j = 0; j < traj.steps(); ++j) {
    if (traj.joint_actions[j].at(kSurgeon) == kRequest) return traj.slice(0, j + 1);
  }
  throw TruncationError("no protamine request found in trajectory");
}

bool has_bolus(const Trajectory &traj) {
  return std::any_of(traj.joint_actions.begin(), traj.joint_actions.end(),
                     [](const JointAction &a) { return a.at(kResident) == kBolus; });
}

bool is_near_miss(const Params &params, const Trajectory &traj) {
  if (!has_bolus(traj)) return false;
  const StateSpace space(params);
  return space.decode(traj.states.back()).patient == Patient::nominal;
}

Scenario make_scenario(const Params &params) {
  params.check();
  const StateSpace space(params);
  auto encode_state = [space](StateId id) {
    const State s = space.decode(id);
    return nlohmann::json{{"phase", s.phase},
                          {"dosage", space.dosage_percent(s)},
                          {"cannulas_removed", s.cannulas_removed},
                          {"patient", to_string(s.patient)}};
  };
  auto decode_state = [space, ladder = params.dosage_ladder](const nlohmann::json &j) {
    if (!j.is_object() || j.size() != 4)
      throw SchemaError("protamine state must have exactly phase, dosage, cannulas_removed, patient");
    try {
      State s;
      s.phase = j.at("phase").get<bool>();
      const int dose = j.at("dosage").get<int>();
      auto it = std::find(ladder.begin(), ladder.end(), dose);
      if (it == ladder.end()) throw SchemaError("dosage " + std::to_string(dose) + " is not on the ladder");
      s.dosage_level = static_cast<std::size_t>(it - ladder.begin());
      s.cannulas_removed = j.at("cannulas_removed").get<int>();
      if (s.cannulas_removed < 0 || s.cannulas_removed > space.cannulas())
        throw SchemaError("cannulas_removed out of range");
      const auto patient = j.at("patient").get<std::string>();
      if (patient == "nominal") s.patient = Patient::nominal;
      else if (patient == "allergic") s.patient = Patient::allergic;
      else if (patient == "adverse") s.patient = Patient::adverse;
      else throw SchemaError("unknown patient state '" + patient + "'");
      return space.encode(s);
    } catch (const nlohmann::json::exception &e) {
      throw SchemaError(std::string("malformed protamine state: ") + e.what());
    }
  };
  auto truncate = [](const Trajectory &t) { return Truncation{truncation_point(t), false}; };
  auto near_miss = [params](const Trajectory &t) { return is_near_miss(params, t); };
  Scenario sc{
      .name = "protamine",
      .model = build_task(params),
      .policies = ground_truth_policies(params),
      .sampler = profile_sampler(params),
      .prior = default_prior(),
      .encode_state = std::move(encode_state),
      .decode_state = std::move(decode_state),
      .truncate = std::move(truncate),
      .near_miss = std::move(near_miss),
  };
  return sc;
}

} // namespace tmm::protamine
