#include "tmm/protamine.hpp"
#include "tmm/serialization.hpp"
#include "tmm/tool_delivery.hpp"

#include <doctest.h>

#include <sstream>

using namespace tmm;
using nlohmann::json;

namespace {

std::vector<Trajectory> sample(const Scenario &sc, std::size_t n, std::uint64_t seed) {
  SimConfig cfg;
  cfg.seed = seed;
  cfg.profile_sampler = sc.sampler;
  return generate_dataset(sc.model, sc.policies, cfg, n);
}

std::vector<json> lines(const std::string &text) {
  std::vector<json> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) out.push_back(json::parse(line));
  return out;
}

std::string join(const std::vector<json> &recs) {
  std::string out;
  for (const auto &r : recs) out += r.dump() + "\n";
  return out;
}

} // namespace

TEST_CASE("round trip for generated trajectories") {
  for (const auto &sc : {protamine::make_scenario(), tool_delivery::make_scenario()}) {
    const auto data = sample(sc, 50, 21);
    for (const auto &t : data) CHECK(deserialize_trajectory(sc, serialize_trajectory(sc, t)) == t);

    std::stringstream stream;
    for (const auto &t : data) write_trajectory(stream, sc, t);
    CHECK(read_trajectories(stream, sc) == data);
  }
}

TEST_CASE("stripped streams lose only the ground truth") {
  const auto sc = protamine::make_scenario();
  const auto data = sample(sc, 10, 3);
  std::string text;
  for (const auto &t : data) text += serialize_trajectory(sc, t);
  std::istringstream in(strip_ground_truth(text));
  const auto back = read_trajectories(in, sc);
  REQUIRE(back.size() == data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    CHECK_FALSE(back[i].ground_truth.has_value());
    CHECK(back[i].states == data[i].states);
    CHECK(back[i].joint_actions == data[i].joint_actions);
  }
  CHECK(strip_ground_truth(text).find("ground_truth") == std::string::npos);
}

TEST_CASE("observable records carry no latent values") {
  const auto sc = tool_delivery::make_scenario();
  for (const auto &t : sample(sc, 20, 8)) {
    for (const auto &rec : lines(serialize_trajectory(sc, t, false))) {
      CHECK(rec["record"] != "evaluation");
      if (rec["record"] != "step") continue;
      const auto &state = rec["state"];
      CHECK(state["request_status"].is_boolean());
      for (const auto &[key, value] : state.items()) {
        CHECK(key != "requested_tool");
        CHECK(key != "ground_truth");
        // No observable value names a latent label directly.
        if (value.is_string()) {
          CHECK(value != "sutures");
          CHECK(value != "scalpel");
        }
      }
    }
  }
}

TEST_CASE("schema enforcement") {
  const auto sc = protamine::make_scenario();
  const auto t = sample(sc, 1, 4).front();
  const auto recs = lines(serialize_trajectory(sc, t));

  SUBCASE("latent field injected into a state") {
    auto bad = recs;
    bad[1]["state"]["resident_model"] = "bolus";
    CHECK_THROWS_AS((void)deserialize_trajectory(sc, join(bad)), SchemaError);
  }
  SUBCASE("latent field injected into a step") {
    auto bad = recs;
    bad[1]["latent"] = {{"RA", "bolus"}};
    CHECK_THROWS_AS((void)deserialize_trajectory(sc, join(bad)), SchemaError);
  }
  SUBCASE("schema version mismatch") {
    auto bad = recs;
    bad[0]["schema_version"] = 2;
    CHECK_THROWS_WITH_AS((void)deserialize_trajectory(sc, join(bad)), doctest::Contains("schema version"),
                         SchemaError);
  }
  SUBCASE("wrong scenario") {
    auto bad = recs;
    bad[0]["scenario"] = "tooldelivery";
    CHECK_THROWS_AS((void)deserialize_trajectory(sc, join(bad)), SchemaError);
  }
  SUBCASE("unknown action label names its line") {
    auto bad = recs;
    bad[1]["actions"]["RA"] = "infuse";
    CHECK_THROWS_WITH_AS((void)deserialize_trajectory(sc, join(bad)), doctest::Contains("line 2"), SchemaError);
  }
  SUBCASE("truncated stream") {
    auto bad = recs;
    bad.pop_back();
    bad.pop_back();
    CHECK_THROWS_AS((void)deserialize_trajectory(sc, join(bad)), SchemaError);
  }
  SUBCASE("dosage off the ladder") {
    auto bad = recs;
    bad[1]["state"]["dosage"] = 33;
    CHECK_THROWS_AS((void)deserialize_trajectory(sc, join(bad)), SchemaError);
  }
  SUBCASE("malformed json") {
    CHECK_THROWS_AS((void)deserialize_trajectory(sc, "{not json\n"), SchemaError);
  }
}

TEST_CASE("tool delivery decode rejects sterile positions and unknown keys") {
  const auto sc = tool_delivery::make_scenario();
  auto state = sc.encode_state(0);
  CHECK(sc.decode_state(state) == 0);
  auto bad = state;
  bad["cn_position"] = {4, 3};
  CHECK_THROWS_AS((void)sc.decode_state(bad), SchemaError);
  bad = state;
  bad["requested_tool"] = "scalpel";
  CHECK_THROWS_AS((void)sc.decode_state(bad), SchemaError);
}
