#include "tmm/serialization.hpp"

#include <fstream>
#include <sstream>

namespace tmm {

namespace {

using nlohmann::json;

[[noreturn]] void fail(std::size_t line, const std::string &what) {
  throw SchemaError("line " + std::to_string(line) + ": " + what);
}

void require_keys(const json &rec, std::initializer_list<const char *> allowed, std::size_t line) {
  for (const auto &[key, value] : rec.items()) {
    bool ok = false;
    for (const char *a : allowed) ok = ok || key == a;
    if (!ok) fail(line, "unexpected field '" + key + "' in " + rec.value("record", std::string("record")) + " record");
  }
}

class LineReader {
public:
  explicit LineReader(std::istream &in) : in_(in) {}

  // Next non-blank line parsed as an object; nullopt at end of stream.
  std::optional<json> next() {
    std::string text;
    while (std::getline(in_, text)) {
      ++line_;
      if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
      json rec;
      try {
        rec = json::parse(text);
      } catch (const json::parse_error &e) {
        fail(line_, std::string("malformed record: ") + e.what());
      }
      if (!rec.is_object() || !rec.contains("record") || !rec["record"].is_string())
        fail(line_, "record must be an object with a 'record' tag");
      return rec;
    }
    return std::nullopt;
  }

  [[nodiscard]] std::size_t line() const { return line_; }

private:
  std::istream &in_;
  std::size_t line_ = 0;
};

} // namespace

void write_trajectory(std::ostream &out, const Scenario &sc, const Trajectory &traj, bool include_ground_truth) {
  const auto &m = sc.model;
  json header{{"record", "header"}, {"schema_version", kSchemaVersion}, {"scenario", sc.name},
              {"seed", traj.seed},  {"steps", traj.steps()},            {"capped", traj.capped}};
  out << header.dump() << '\n';
  for (std::size_t t = 0; t < traj.states.size(); ++t) {
    json step{{"record", "step"}, {"t", t}, {"state", sc.encode_state(traj.states[t])}};
    if (t < traj.steps()) {
      json actions = json::object();
      const auto &a = traj.joint_actions[t];
      for (std::size_t i = 0; i < m.agent_count(); ++i) actions[m.agent_name(i)] = m.action_label(i, a.at(i));
      step["actions"] = std::move(actions);
    }
    out << step.dump() << '\n';
  }
  if (include_ground_truth && traj.ground_truth) {
    json truth = json::object();
    for (std::size_t i = 0; i < m.agent_count(); ++i)
      truth[m.agent_name(i)] = m.latent_label(traj.ground_truth->values.at(i));
    out << json{{"record", "evaluation"}, {"ground_truth", truth}}.dump() << '\n';
  }
}

std::vector<Trajectory> read_trajectories(std::istream &in, const Scenario &sc) {
  const auto &m = sc.model;
  LineReader reader(in);
  std::vector<Trajectory> out;
  std::optional<json> rec = reader.next();
  while (rec) {
    if ((*rec)["record"] != "header") fail(reader.line(), "expected a header record");
    require_keys(*rec, {"record", "schema_version", "scenario", "seed", "steps", "capped"}, reader.line());
    Trajectory traj;
    std::size_t steps = 0;
    try {
      if (rec->at("schema_version").get<int>() != kSchemaVersion)
        fail(reader.line(), "schema version " + rec->at("schema_version").dump() + " is not supported (expected " +
                                std::to_string(kSchemaVersion) + ")");
      if (rec->at("scenario").get<std::string>() != sc.name)
        fail(reader.line(), "record belongs to scenario '" + rec->at("scenario").get<std::string>() + "', not '" +
                                sc.name + "'");
      traj.seed = rec->at("seed").get<std::uint64_t>();
      steps = rec->at("steps").get<std::size_t>();
      traj.capped = rec->at("capped").get<bool>();
    } catch (const json::exception &e) {
      fail(reader.line(), std::string("bad header: ") + e.what());
    }

    for (std::size_t t = 0; t <= steps; ++t) {
      auto step = reader.next();
      if (!step) fail(reader.line(), "stream ended inside a trajectory");
      if ((*step)["record"] != "step") fail(reader.line(), "expected a step record");
      require_keys(*step, {"record", "t", "state", "actions"}, reader.line());
      try {
        if (step->at("t").get<std::size_t>() != t) fail(reader.line(), "step index out of order");
        traj.states.push_back(sc.decode_state(step->at("state")));
        const bool last = t == steps;
        if (last != !step->contains("actions"))
          fail(reader.line(), last ? "final state must not carry actions" : "step is missing actions");
        if (!last) {
          const auto &actions = step->at("actions");
          if (!actions.is_object() || actions.size() != m.agent_count())
            fail(reader.line(), "actions must name one action per agent");
          JointAction a(m.agent_count());
          for (std::size_t i = 0; i < m.agent_count(); ++i) {
            const auto label = actions.at(m.agent_name(i)).get<std::string>();
            auto id = m.find_action(i, label);
            if (!id) fail(reader.line(), "unknown action '" + label + "' for agent " + m.agent_name(i));
            a[i] = *id;
          }
          traj.joint_actions.push_back(std::move(a));
        }
      } catch (const SchemaError &e) {
        if (std::string_view(e.what()).starts_with("line ")) throw;
        fail(reader.line(), e.what());
      } catch (const json::exception &e) {
        fail(reader.line(), std::string("bad step: ") + e.what());
      }
    }

    rec = reader.next();
    if (rec && (*rec)["record"] == "evaluation") {
      require_keys(*rec, {"record", "ground_truth"}, reader.line());
      try {
        const auto &truth = rec->at("ground_truth");
        LatentProfile profile{std::vector<LatentId>(m.agent_count())};
        for (std::size_t i = 0; i < m.agent_count(); ++i) {
          const auto label = truth.at(m.agent_name(i)).get<std::string>();
          auto x = m.find_latent(label);
          if (!x) fail(reader.line(), "unknown latent value '" + label + "'");
          profile.values[i] = *x;
        }
        traj.ground_truth = std::move(profile);
      } catch (const json::exception &e) {
        fail(reader.line(), std::string("bad evaluation record: ") + e.what());
      }
      rec = reader.next();
    }
    out.push_back(std::move(traj));
  }
  return out;
}

std::string serialize_trajectory(const Scenario &sc, const Trajectory &traj, bool include_ground_truth) {
  std::ostringstream out;
  write_trajectory(out, sc, traj, include_ground_truth);
  return out.str();
}

Trajectory deserialize_trajectory(const Scenario &sc, const std::string &text) {
  std::istringstream in(text);
  auto all = read_trajectories(in, sc);
  if (all.size() != 1) throw SchemaError("expected exactly one trajectory, found " + std::to_string(all.size()));
  return std::move(all.front());
}

void write_dataset(const std::filesystem::path &path, const Scenario &sc, const std::vector<Trajectory> &data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  for (const auto &t : data) write_trajectory(out, sc, t);
}

std::vector<Trajectory> read_dataset(const std::filesystem::path &path, const Scenario &sc) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_trajectories(in, sc);
}

std::string strip_ground_truth(const std::string &text) {
  std::istringstream in(text);
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line)) {
    const auto rec = json::parse(line, nullptr, false);
    if (rec.is_object() && rec.value("record", std::string()) == "evaluation") continue;
    out << line << '\n';
  }
  return out.str();
}

} // namespace tmm
