#pragma once

#include "tmm/scenario.hpp"

#include <array>
#include <optional>
#include <vector>

namespace tmm::tool_delivery {

inline constexpr std::size_t kScrubNurse = 0;       // SN, inside the sterile region
inline constexpr std::size_t kCirculatingNurse = 1; // CN, moves on the grid

enum ScrubAction : ActionId { kRequest = 0, kAccept = 1, kScrubNoop = 2 };
enum CirculatingAction : ActionId {
  kNorth = 0,
  kSouth = 1,
  kEast = 2,
  kWest = 3,
  kPick = 4,
  kHandover = 5,
  kCirculatingNoop = 6,
};
inline constexpr std::size_t kScrubActions = 3;
inline constexpr std::size_t kCirculatingActions = 7;

enum class Tool : LatentId { sutures = 0, scalpel = 1 };

/// Where an extra tool is: at its home (cabinet for sutures, storage for the
/// scalpel), carried by the CN, or delivered into the sterile area.
enum class ToolLocation : std::uint8_t { home, carried, sterile };

enum class Delivery : std::uint8_t { ongoing, accepted, rejected };

struct Cell {
  int row = 0;
  int col = 0;
  friend bool operator==(const Cell &, const Cell &) = default;
};

struct Layout {
  int rows = 5;
  int cols = 5;
  std::vector<Cell> sterile = {{3, 2}, {3, 3}, {3, 4}, {4, 2}, {4, 3}, {4, 4}};
  Cell cabinet{0, 0};
  Cell storage{4, 0};
  Cell scrub_nurse{4, 3};
  Cell handover{3, 1};

  /// Throws std::invalid_argument when the layout breaks its invariants.
  void check() const;
  [[nodiscard]] bool in_grid(Cell c) const { return c.row >= 0 && c.row < rows && c.col >= 0 && c.col < cols; }
  [[nodiscard]] bool is_sterile(Cell c) const;
};

struct Params {
  double p_misunderstand = 0.3;
  double p_contamination_event = 0.1;
  double p_suturing_next = 0.5; // incision already made, so suturing comes next
  double cue_strength = 0.85;   // P(cued tool) when exactly one cue fires
  double request_rate = 0.3;    // per pre-request step
  double p_sn_scalpel = 0.5;    // ground-truth share of scalpel requests
  double p_reminder = 0.5;      // SN repeats the request while the CN is off track
  double cn_move_noise = 0.05;

  void check() const;
};

struct State {
  Cell cn;
  ToolLocation sutures = ToolLocation::home;
  ToolLocation scalpel = ToolLocation::home;
  bool incision = false;
  bool requested = false;
  bool contaminated = false;
  Delivery delivery = Delivery::ongoing;

  [[nodiscard]] std::optional<Tool> carried() const;
  [[nodiscard]] std::optional<Tool> delivered() const;
  [[nodiscard]] ToolLocation location(Tool t) const { return t == Tool::sutures ? sutures : scalpel; }
  friend bool operator==(const State &, const State &) = default;
};

struct RequestPolicy {
  double p_scalpel;
  double p_sutures;
  double request_rate;
};

/// Grid geometry, state indexing and the behaviour models of both nurses.
class World {
public:
  World(Layout layout, Params params);

  [[nodiscard]] const Layout &layout() const { return layout_; }
  [[nodiscard]] const Params &params() const { return params_; }

  [[nodiscard]] std::size_t state_count() const;
  [[nodiscard]] StateId encode(const State &s) const;
  [[nodiscard]] State decode(StateId id) const;
  [[nodiscard]] bool is_terminal(const State &s) const { return s.delivery != Delivery::ongoing; }
  [[nodiscard]] State initial_state(bool incision) const;

  [[nodiscard]] Cell home(Tool t) const { return t == Tool::sutures ? layout_.cabinet : layout_.storage; }
  /// Shortest walking distance over non-sterile cells; -1 when unreachable.
  [[nodiscard]] int distance(Cell from, Cell to) const;
  /// Result of a move action; nullopt when the grid edge or the sterile region blocks it.
  [[nodiscard]] std::optional<Cell> step(Cell from, ActionId move) const;
  /// First move on a shortest path, vertical moves preferred; nullopt when already there.
  [[nodiscard]] std::optional<ActionId> move_toward(Cell from, Cell to) const;

  [[nodiscard]] RequestPolicy sn_request_policy(const State &s) const;
  /// CN is not on any shortest route from the handover cell to tool `need`,
  /// or is carrying the other tool.
  [[nodiscard]] bool off_track(const State &s, Tool need) const;
  [[nodiscard]] std::array<double, kScrubActions> sn_policy(const State &s, Tool need) const;
  [[nodiscard]] std::array<double, kCirculatingActions> cn_policy(const State &s, Tool belief) const;
  [[nodiscard]] std::vector<Outcome> transition(const State &s, ActionId sn, ActionId cn) const;

private:
  [[nodiscard]] std::size_t cell_index(Cell c) const;

  Layout layout_;
  Params params_;
  std::vector<Cell> free_cells_;
  std::vector<int> cell_slot_; // grid cell -> index in free_cells_, -1 if sterile
  std::vector<int> dist_;      // free x free shortest paths
};

const char *to_string(Tool t);
const char *location_name(Tool t, ToolLocation loc);

RequestPolicy sn_request_policy(const State &s, const Params &params);
std::array<double, kCirculatingActions> cn_policy(const State &s, Tool belief, const Layout &layout,
                                                  const Params &params);

TaskModel build_task(const Layout &layout, const Params &params);
std::vector<Policy> ground_truth_policies(const Layout &layout, const Params &params);
/// SN needs the scalpel w.p. p_sn_scalpel; the CN misunderstands w.p. p_misunderstand.
ProfileSampler profile_sampler(const Params &params);

/// Index of the step carrying the first request, if any.
std::optional<std::size_t> first_request(const Trajectory &traj);
/// Seven-step window: two steps before the first request and the request step
/// plus its four successors. Requests at step 0 or 1 keep the first seven steps
/// and set short_window.
Truncation truncation_point(const Trajectory &traj);

Scenario make_scenario(const Layout &layout = {}, const Params &params = {});

} // namespace tmm::tool_delivery
