#include "tmm/tool_delivery.hpp"

#include <algorithm>
#include <deque>
#include <stdexcept>

namespace tmm::tool_delivery {

namespace {

// Tool placements with at most one tool carried, in a fixed order.
constexpr std::array<std::pair<ToolLocation, ToolLocation>, 8> kToolConfigs{{
    {ToolLocation::home, ToolLocation::home},
    {ToolLocation::home, ToolLocation::carried},
    {ToolLocation::home, ToolLocation::sterile},
    {ToolLocation::carried, ToolLocation::home},
    {ToolLocation::carried, ToolLocation::sterile},
    {ToolLocation::sterile, ToolLocation::home},
    {ToolLocation::sterile, ToolLocation::carried},
    {ToolLocation::sterile, ToolLocation::sterile},
}};

constexpr std::array<Cell, 4> kMoveDelta{{{-1, 0}, {1, 0}, {0, 1}, {0, -1}}}; // N, S, E, W

void check_probability(double p, const char *name) {
  if (!(p >= 0.0 && p <= 1.0))
    throw std::invalid_argument(std::string("tool delivery parameter ") + name + " must be in [0, 1]");
}

bool adjacent(Cell a, Cell b) { return std::abs(a.row - b.row) + std::abs(a.col - b.col) == 1; }

std::string cell_string(Cell c) { return "(" + std::to_string(c.row) + "," + std::to_string(c.col) + ")"; }

const char *delivery_name(Delivery d) {
  switch (d) {
  case Delivery::ongoing: return "ongoing";
  case Delivery::accepted: return "accepted";
  case Delivery::rejected: return "rejected";
  }
  return "unknown";
}

std::string label(const State &s) {
  return "cn=" + cell_string(s.cn) + ",sutures=" + location_name(Tool::sutures, s.sutures) +
         ",scalpel=" + location_name(Tool::scalpel, s.scalpel) + ",incision=" + (s.incision ? "1" : "0") +
         ",requested=" + (s.requested ? "1" : "0") + ",contaminated=" + (s.contaminated ? "1" : "0") +
         ",delivery=" + delivery_name(s.delivery);
}

} // namespace

bool Layout::is_sterile(Cell c) const { return std::find(sterile.begin(), sterile.end(), c) != sterile.end(); }

void Layout::check() const {
  if (rows < 1 || cols < 1) throw std::invalid_argument("layout grid must be non-empty");
  for (const auto &c : sterile)
    if (!in_grid(c)) throw std::invalid_argument("sterile cell " + cell_string(c) + " outside the grid");
  for (auto [cell, name] : {std::pair{cabinet, "cabinet"}, std::pair{storage, "storage"}, std::pair{handover, "handover"}}) {
    if (!in_grid(cell)) throw std::invalid_argument(std::string(name) + " cell outside the grid");
    if (is_sterile(cell)) throw std::invalid_argument(std::string(name) + " cell must be outside the sterile region");
  }
  if (cabinet == storage) throw std::invalid_argument("cabinet and storage must be distinct cells");
  if (!in_grid(scrub_nurse) || !is_sterile(scrub_nurse))
    throw std::invalid_argument("scrub nurse cell must lie inside the sterile region");
  if (std::none_of(sterile.begin(), sterile.end(), [&](Cell c) { return adjacent(c, handover); }))
    throw std::invalid_argument("handover cell must border the sterile region");
}

void Params::check() const {
  check_probability(p_misunderstand, "p_misunderstand");
  check_probability(p_contamination_event, "p_contamination_event");
  check_probability(p_suturing_next, "p_suturing_next");
  check_probability(cue_strength, "cue_strength");
  check_probability(request_rate, "request_rate");
  check_probability(p_sn_scalpel, "p_sn_scalpel");
  check_probability(p_reminder, "p_reminder");
  check_probability(cn_move_noise, "cn_move_noise");
  if (p_sn_scalpel == 0.0 || p_sn_scalpel == 1.0)
    throw std::invalid_argument("p_sn_scalpel must lie strictly between 0 and 1");
  if (request_rate == 0.0) throw std::invalid_argument("request_rate must be positive");
}

std::optional<Tool> State::carried() const {
  if (sutures == ToolLocation::carried) return Tool::sutures;
  if (scalpel == ToolLocation::carried) return Tool::scalpel;
  return std::nullopt;
}

std::optional<Tool> State::delivered() const {
  if (sutures == ToolLocation::sterile) return Tool::sutures;
  if (scalpel == ToolLocation::sterile) return Tool::scalpel;
  return std::nullopt;
}

const char *to_string(Tool t) { return t == Tool::sutures ? "sutures" : "scalpel"; }

const char *location_name(Tool t, ToolLocation loc) {
  switch (loc) {
  case ToolLocation::home: return t == Tool::sutures ? "cabinet" : "storage";
  case ToolLocation::carried: return "carried_by_CN";
  case ToolLocation::sterile: return "sterile_area";
  }
  return "unknown";
}

World::World(Layout layout, Params params) : layout_(std::move(layout)), params_(params) {
  layout_.check();
  params_.check();
  cell_slot_.assign(static_cast<std::size_t>(layout_.rows * layout_.cols), -1);
  for (int r = 0; r < layout_.rows; ++r) {
    for (int c = 0; c < layout_.cols; ++c) {
      if (layout_.is_sterile({r, c})) continue;
      cell_slot_[static_cast<std::size_t>(r * layout_.cols + c)] = static_cast<int>(free_cells_.size());
      free_cells_.push_back({r, c});
    }
  }
  const auto nf = free_cells_.size();
  dist_.assign(nf * nf, -1);
  for (std::size_t src = 0; src < nf; ++src) {
    std::deque<std::size_t> frontier{src};
    dist_[src * nf + src] = 0;
    while (!frontier.empty()) {
      const auto u = frontier.front();
      frontier.pop_front();
      for (ActionId m = kNorth; m <= kWest; ++m) {
        auto v = step(free_cells_[u], m);
        if (!v) continue;
        const auto vi = cell_index(*v);
        if (dist_[src * nf + vi] < 0) {
          dist_[src * nf + vi] = dist_[src * nf + u] + 1;
          frontier.push_back(vi);
        }
      }
    }
  }
  for (Cell target : {layout_.cabinet, layout_.storage})
    if (distance(layout_.handover, target) < 0)
      throw std::invalid_argument("cabinet and storage must be reachable from the handover cell");
}

std::size_t World::cell_index(Cell c) const {
  if (!layout_.in_grid(c)) throw std::out_of_range("cell outside the grid");
  const int slot = cell_slot_[static_cast<std::size_t>(c.row * layout_.cols + c.col)];
  if (slot < 0) throw std::out_of_range("cell " + cell_string(c) + " is sterile");
  return static_cast<std::size_t>(slot);
}

std::size_t World::state_count() const { return free_cells_.size() * kToolConfigs.size() * 8 * 3; }

StateId World::encode(const State &s) const {
  const auto cfg = std::find(kToolConfigs.begin(), kToolConfigs.end(), std::pair{s.sutures, s.scalpel});
  if (cfg == kToolConfigs.end()) throw std::out_of_range("both tools cannot be carried at once");
  std::size_t id = cell_index(s.cn);
  id = id * kToolConfigs.size() + static_cast<std::size_t>(cfg - kToolConfigs.begin());
  id = id * 2 + (s.incision ? 1 : 0);
  id = id * 2 + (s.requested ? 1 : 0);
  id = id * 2 + (s.contaminated ? 1 : 0);
  id = id * 3 + static_cast<std::size_t>(s.delivery);
  return static_cast<StateId>(id);
}

State World::decode(StateId id) const {
  if (id >= state_count()) throw std::out_of_range("tool delivery state id out of range");
  State s;
  std::size_t rest = id;
  s.delivery = static_cast<Delivery>(rest % 3);
  rest /= 3;
  s.contaminated = rest % 2;
  rest /= 2;
  s.requested = rest % 2;
  rest /= 2;
  s.incision = rest % 2;
  rest /= 2;
  std::tie(s.sutures, s.scalpel) = kToolConfigs[rest % kToolConfigs.size()];
  s.cn = free_cells_[rest / kToolConfigs.size()];
  return s;
}

State World::initial_state(bool incision) const {
  State s;
  s.cn = layout_.handover;
  s.incision = incision;
  return s;
}

int World::distance(Cell from, Cell to) const {
  return dist_[cell_index(from) * free_cells_.size() + cell_index(to)];
}

std::optional<Cell> World::step(Cell from, ActionId move) const {
  if (move > kWest) return std::nullopt;
  const Cell to{from.row + kMoveDelta[move].row, from.col + kMoveDelta[move].col};
  if (!layout_.in_grid(to) || layout_.is_sterile(to)) return std::nullopt;
  return to;
}

std::optional<ActionId> World::move_toward(Cell from, Cell to) const {
  const int d = distance(from, to);
  if (d <= 0) return std::nullopt;
  for (ActionId m = kNorth; m <= kWest; ++m) {
    if (auto next = step(from, m); next && distance(*next, to) == d - 1) return m;
  }
  return std::nullopt;
}

RequestPolicy World::sn_request_policy(const State &s) const {
  const bool scalpel_cue = s.contaminated;
  const bool sutures_cue = s.incision;
  double p_scalpel = 0.5;
  if (scalpel_cue && !sutures_cue) p_scalpel = params_.cue_strength;
  else if (sutures_cue && !scalpel_cue) p_scalpel = 1.0 - params_.cue_strength;
  return {p_scalpel, 1.0 - p_scalpel, params_.request_rate};
}

bool World::off_track(const State &s, Tool need) const {
  if (auto c = s.carried()) return *c != need;
  if (s.location(need) != ToolLocation::home) return false;
  const Cell target = home(need);
  return distance(layout_.handover, s.cn) + distance(s.cn, target) > distance(layout_.handover, target);
}

std::array<double, kScrubActions> World::sn_policy(const State &s, Tool need) const {
  std::array<double, kScrubActions> p{};
  auto mix = [&](ActionId act, double q) {
    p[act] = q;
    p[kScrubNoop] += 1.0 - q;
  };
  if (is_terminal(s)) {
    p[kScrubNoop] = 1.0;
  } else if (auto d = s.delivered()) {
    p[*d == need ? kAccept : kScrubNoop] = 1.0;
  } else if (!s.requested) {
    // Per-step chance of requesting `need` is rate * P(need | cues); dividing by
    // the prior share of `need` gives the rate conditioned on holding that need.
    const auto rp = sn_request_policy(s);
    const double cue = need == Tool::scalpel ? rp.p_scalpel : rp.p_sutures;
    const double prior = need == Tool::scalpel ? params_.p_sn_scalpel : 1.0 - params_.p_sn_scalpel;
    mix(kRequest, std::min(1.0, rp.request_rate * cue / prior));
  } else if (off_track(s, need)) {
    mix(kRequest, params_.p_reminder);
  } else {
    p[kScrubNoop] = 1.0;
  }
  return p;
}

std::array<double, kCirculatingActions> World::cn_policy(const State &s, Tool belief) const {
  std::array<double, kCirculatingActions> p{};
  if (is_terminal(s) || !s.requested || s.delivered()) {
    p[kCirculatingNoop] = 1.0;
    return p;
  }
  const auto carried = s.carried();
  std::optional<ActionId> intended;
  if (carried) {
    intended = s.cn == layout_.handover ? std::optional<ActionId>(kHandover) : move_toward(s.cn, layout_.handover);
  } else if (s.location(belief) == ToolLocation::home) {
    intended = s.cn == home(belief) ? std::optional<ActionId>(kPick) : move_toward(s.cn, home(belief));
  }
  const ActionId chosen = intended.value_or(kCirculatingNoop);

  std::vector<ActionId> feasible;
  for (ActionId m = kNorth; m <= kWest; ++m)
    if (step(s.cn, m)) feasible.push_back(m);
  if (!carried && s.location(belief) == ToolLocation::home && s.cn == home(belief)) feasible.push_back(kPick);
  if (carried && s.cn == layout_.handover) feasible.push_back(kHandover);

  p[chosen] = 1.0 - params_.cn_move_noise;
  for (auto a : feasible) p[a] += params_.cn_move_noise / static_cast<double>(feasible.size());
  return p;
}

std::vector<Outcome> World::transition(const State &s, ActionId sn, ActionId cn) const {
  if (is_terminal(s)) return {{encode(s), 1.0}};
  State next = s;
  if (s.delivered()) {
    next.delivery = sn == kAccept ? Delivery::accepted : Delivery::rejected;
    return {{encode(next), 1.0}};
  }
  if (sn == kRequest) next.requested = true;

  const auto carried = s.carried();
  if (cn <= kWest) {
    if (auto to = step(s.cn, cn)) next.cn = *to;
  } else if (cn == kPick && !carried) {
    if (s.cn == layout_.cabinet && s.sutures == ToolLocation::home) next.sutures = ToolLocation::carried;
    else if (s.cn == layout_.storage && s.scalpel == ToolLocation::home) next.scalpel = ToolLocation::carried;
  } else if (cn == kHandover && carried && s.cn == layout_.handover) {
    (*carried == Tool::sutures ? next.sutures : next.scalpel) = ToolLocation::sterile;
  }

  const double pc = params_.p_contamination_event;
  if (s.requested || s.contaminated || pc == 0.0) return {{encode(next), 1.0}};
  std::vector<Outcome> row;
  if (pc < 1.0) row.push_back({encode(next), 1.0 - pc});
  next.contaminated = true;
  row.push_back({encode(next), pc});
  return row;
}

RequestPolicy sn_request_policy(const State &s, const Params &params) {
  return World(Layout{}, params).sn_request_policy(s);
}

std::array<double, kCirculatingActions> cn_policy(const State &s, Tool belief, const Layout &layout,
                                                  const Params &params) {
  return World(layout, params).cn_policy(s, belief);
}

TaskModel build_task(const Layout &layout, const Params &params) {
  const World world(layout, params);
  TaskModelSpec spec;
  spec.agent_names = {"SN", "CN"};
  spec.action_labels = {{"request", "accept", "noop"},
                        {"north", "south", "east", "west", "pick", "handover", "noop"}};
  spec.latent_labels = {"sutures", "scalpel"};
  const auto n = world.state_count();
  spec.state_labels.reserve(n);
  spec.terminal.reserve(n);
  spec.transitions.reserve(n * kScrubActions * kCirculatingActions);
  for (StateId id = 0; id < n; ++id) {
    const State s = world.decode(id);
    spec.state_labels.push_back(label(s));
    spec.terminal.push_back(world.is_terminal(s));
    for (ActionId sn = 0; sn < kScrubActions; ++sn)
      for (ActionId cn = 0; cn < kCirculatingActions; ++cn) spec.transitions.push_back(world.transition(s, sn, cn));
  }
  const double ps = params.p_suturing_next;
  if (ps < 1.0) spec.initial.push_back({world.encode(world.initial_state(false)), 1.0 - ps});
  if (ps > 0.0) spec.initial.push_back({world.encode(world.initial_state(true)), ps});
  return TaskModel(std::move(spec));
}

std::vector<Policy> ground_truth_policies(const Layout &layout, const Params &params) {
  const World world(layout, params);
  const auto n = world.state_count();
  std::vector<double> sn(n * 2 * kScrubActions);
  std::vector<double> cn(n * 2 * kCirculatingActions);
  for (StateId id = 0; id < n; ++id) {
    const State s = world.decode(id);
    for (LatentId x = 0; x < 2; ++x) {
      const auto ps = world.sn_policy(s, static_cast<Tool>(x));
      std::copy(ps.begin(), ps.end(), sn.begin() + static_cast<std::ptrdiff_t>((id * 2 + x) * kScrubActions));
      const auto pc = world.cn_policy(s, static_cast<Tool>(x));
      std::copy(pc.begin(), pc.end(), cn.begin() + static_cast<std::ptrdiff_t>((id * 2 + x) * kCirculatingActions));
    }
  }
  std::vector<Policy> out;
  out.emplace_back(kScrubNurse, n, 2, kScrubActions, std::move(sn));
  out.emplace_back(kCirculatingNurse, n, 2, kCirculatingActions, std::move(cn));
  return out;
}

ProfileSampler profile_sampler(const Params &params) {
  params.check();
  const double sc = params.p_sn_scalpel;
  const double mis = params.p_misunderstand;
  constexpr auto su = static_cast<LatentId>(Tool::sutures);
  constexpr auto sp = static_cast<LatentId>(Tool::scalpel);
  return ProfileSampler({{LatentProfile{{su, su}}, (1.0 - sc) * (1.0 - mis)},
                         {LatentProfile{{su, sp}}, (1.0 - sc) * mis},
                         {LatentProfile{{sp, su}}, sc * mis},
                         {LatentProfile{{sp, sp}}, sc * (1.0 - mis)}});
}

std::optional<std::size_t> first_request(const Trajectory &traj) {
  for (std::size_t j = 0; j < traj.steps(); ++j)
    if (traj.joint_actions[j].at(kScrubNurse) == kRequest) return j;
  return std::nullopt;
}

Truncation truncation_point(const Trajectory &traj) {
  constexpr std::size_t kBefore = 2;
  constexpr std::size_t kWindow = 7;
  const auto r = first_request(traj);
  if (!r) throw TruncationError("no tool request found in trajectory");
  const std::size_t first = *r >= kBefore ? *r - kBefore : 0;
  return {traj.slice(first, first + kWindow), *r < kBefore};
}

Scenario make_scenario(const Layout &layout, const Params &params) {
  const World world(layout, params);
  auto encode_state = [world](StateId id) {
    const State s = world.decode(id);
    nlohmann::json carried = nullptr;
    if (auto c = s.carried()) carried = c == Tool::sutures ? "sutures_extra" : "scalpel_extra";
    return nlohmann::json{
        {"cn_position", {s.cn.row, s.cn.col}},
        {"tool_positions",
         {{"sutures_extra", location_name(Tool::sutures, s.sutures)},
          {"scalpel_extra", location_name(Tool::scalpel, s.scalpel)}}},
        {"carried", carried},
        {"patient_status", s.incision},
        {"request_status", s.requested},
        {"scalpel_contaminated", s.contaminated},
        {"delivery", delivery_name(s.delivery)},
    };
  };
  auto decode_state = [world](const nlohmann::json &j) {
    static const std::vector<std::string> kKeys{"carried",        "cn_position",          "delivery",
                                                "patient_status", "request_status",       "scalpel_contaminated",
                                                "tool_positions"};
    if (!j.is_object()) throw SchemaError("tool delivery state must be an object");
    for (const auto &[key, value] : j.items())
      if (std::find(kKeys.begin(), kKeys.end(), key) == kKeys.end())
        throw SchemaError("unexpected field '" + key + "' in observable state");
    try {
      State s;
      const auto pos = j.at("cn_position");
      if (!pos.is_array() || pos.size() != 2) throw SchemaError("cn_position must be [row, col]");
      s.cn = {pos[0].get<int>(), pos[1].get<int>()};
      if (!world.layout().in_grid(s.cn) || world.layout().is_sterile(s.cn))
        throw SchemaError("cn_position must be a non-sterile grid cell");
      const auto &tools = j.at("tool_positions");
      if (!tools.is_object() || tools.size() != 2) throw SchemaError("tool_positions must list both extra tools");
      auto parse_loc = [](Tool t, const std::string &name) {
        for (auto loc : {ToolLocation::home, ToolLocation::carried, ToolLocation::sterile})
          if (name == location_name(t, loc)) return loc;
        throw SchemaError("unknown location '" + name + "' for " + to_string(t));
      };
      s.sutures = parse_loc(Tool::sutures, tools.at("sutures_extra").get<std::string>());
      s.scalpel = parse_loc(Tool::scalpel, tools.at("scalpel_extra").get<std::string>());
      s.incision = j.at("patient_status").get<bool>();
      s.requested = j.at("request_status").get<bool>();
      s.contaminated = j.at("scalpel_contaminated").get<bool>();
      const auto delivery = j.at("delivery").get<std::string>();
      if (delivery == "ongoing") s.delivery = Delivery::ongoing;
      else if (delivery == "accepted") s.delivery = Delivery::accepted;
      else if (delivery == "rejected") s.delivery = Delivery::rejected;
      else throw SchemaError("unknown delivery status '" + delivery + "'");

      const auto &carried = j.at("carried");
      std::optional<Tool> expect;
      if (!carried.is_null()) {
        const auto c = carried.get<std::string>();
        if (c == "sutures_extra") expect = Tool::sutures;
        else if (c == "scalpel_extra") expect = Tool::scalpel;
        else throw SchemaError("unknown carried tool '" + c + "'");
      }
      if (s.sutures == ToolLocation::carried && s.scalpel == ToolLocation::carried)
        throw SchemaError("both tools cannot be carried at once");
      if (expect != s.carried()) throw SchemaError("carried tool disagrees with tool_positions");
      return world.encode(s);
    } catch (const nlohmann::json::exception &e) {
      throw SchemaError(std::string("malformed tool delivery state: ") + e.what());
    }
  };
  auto truncate = [](const Trajectory &t) { return truncation_point(t); };
  Scenario sc{
      .name = "tooldelivery",
      .model = build_task(layout, params),
      .policies = ground_truth_policies(layout, params),
      .sampler = profile_sampler(params),
      .prior = PriorSpec::uniform(2, 2),
      .encode_state = std::move(encode_state),
      .decode_state = std::move(decode_state),
      .truncate = std::move(truncate),
      .near_miss = {},
  };
  return sc;
}

} // namespace tmm::tool_delivery
