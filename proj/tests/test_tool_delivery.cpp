#include "tmm/inference.hpp"
#include "tmm/tool_delivery.hpp"

#include <doctest.h>

#include <deque>
#include <set>

using namespace tmm;
using namespace tmm::tool_delivery;

namespace {

State requested_at(Cell c) {
  State s;
  s.cn = c;
  s.requested = true;
  return s;
}

double prob_of(const World &w, const std::vector<Outcome> &row, const State &target) {
  double p = 0.0;
  for (const auto &o : row)
    if (o.next == w.encode(target)) p += o.prob;
  return p;
}

Trajectory with_scrub_actions(const std::vector<ActionId> &sn) {
  Trajectory t;
  t.states.assign(sn.size() + 1, 0);
  for (auto a : sn) t.joint_actions.push_back({a, kCirculatingNoop});
  return t;
}

} // namespace

TEST_CASE("layout defaults satisfy their invariants") {
  const Layout layout;
  CHECK_NOTHROW(layout.check());
  CHECK_FALSE(layout.is_sterile(layout.cabinet));
  CHECK_FALSE(layout.is_sterile(layout.storage));
  CHECK(layout.is_sterile(layout.scrub_nurse));

  Layout bad;
  bad.cabinet = {3, 3};
  CHECK_THROWS_AS(bad.check(), std::invalid_argument);
  bad = Layout{};
  bad.handover = {0, 4};
  CHECK_THROWS_AS(bad.check(), std::invalid_argument);
}

TEST_CASE("state encoding round trips") {
  const World w{Layout{}, Params{}};
  CHECK(w.state_count() == 19 * 8 * 8 * 3);
  for (StateId s = 0; s < w.state_count(); ++s) CHECK(w.encode(w.decode(s)) == s);
}

TEST_CASE("tool delivery kernel") {
  const World w{Layout{}, Params{}};

  SUBCASE("unobstructed move east") {
    const auto from = requested_at({2, 2});
    CHECK(prob_of(w, w.transition(from, kScrubNoop, kEast), requested_at({2, 3})) == 1.0);
    CHECK(w.step({2, 2}, kEast) == Cell{2, 3});
  }
  SUBCASE("moves into the sterile region are blocked") {
    const auto from = requested_at({3, 1});
    CHECK(prob_of(w, w.transition(from, kScrubNoop, kEast), from) == 1.0);
    CHECK_FALSE(w.step({2, 2}, kSouth).has_value());
    CHECK_FALSE(w.step({0, 0}, kNorth).has_value());
  }
  SUBCASE("pick at home cells") {
    auto s = requested_at({4, 0});
    auto picked = s;
    picked.scalpel = ToolLocation::carried;
    CHECK(prob_of(w, w.transition(s, kScrubNoop, kPick), picked) == 1.0);
    s = requested_at({2, 0});
    CHECK(prob_of(w, w.transition(s, kScrubNoop, kPick), s) == 1.0);
  }
  SUBCASE("handover then accept ends the episode") {
    auto s = requested_at({3, 1});
    s.scalpel = ToolLocation::carried;
    auto delivered = s;
    delivered.scalpel = ToolLocation::sterile;
    CHECK(prob_of(w, w.transition(s, kScrubNoop, kHandover), delivered) == 1.0);
    CHECK(delivered.delivered() == Tool::scalpel);
    auto accepted = delivered;
    accepted.delivery = Delivery::accepted;
    CHECK(prob_of(w, w.transition(delivered, kAccept, kCirculatingNoop), accepted) == 1.0);
    CHECK(w.is_terminal(accepted));
    auto rejected = delivered;
    rejected.delivery = Delivery::rejected;
    CHECK(prob_of(w, w.transition(delivered, kScrubNoop, kCirculatingNoop), rejected) == 1.0);
  }
  SUBCASE("contamination fires only before the request") {
    State s;
    s.cn = {3, 1};
    auto dirty = s;
    dirty.contaminated = true;
    CHECK(prob_of(w, w.transition(s, kScrubNoop, kCirculatingNoop), dirty) == doctest::Approx(0.1));
    CHECK(prob_of(w, w.transition(requested_at({3, 1}), kScrubNoop, kCirculatingNoop), requested_at({3, 1})) == 1.0);
  }
}

TEST_CASE("scrub nurse request policy") {
  const Params params;
  State s;
  s.contaminated = true;
  CHECK(sn_request_policy(s, params).p_scalpel == doctest::Approx(0.85));
  s.incision = true;
  CHECK(sn_request_policy(s, params).p_scalpel == doctest::Approx(0.5));
  s.contaminated = false;
  CHECK(sn_request_policy(s, params).p_sutures == doctest::Approx(0.85));
  s.incision = false;
  CHECK(sn_request_policy(s, params).p_scalpel == doctest::Approx(0.5));
  CHECK(sn_request_policy(s, params).p_sutures == doctest::Approx(0.5));
}

TEST_CASE("scrub nurse policy rows") {
  const World w{Layout{}, Params{}};
  State s;
  s.cn = {3, 1};
  s.contaminated = true;
  // rate * P(scalpel | cue) / P(scalpel) = 0.3 * 0.85 / 0.5
  CHECK(w.sn_policy(s, Tool::scalpel)[kRequest] == doctest::Approx(0.51));
  CHECK(w.sn_policy(s, Tool::sutures)[kRequest] == doctest::Approx(0.09));
  auto delivered = requested_at({3, 1});
  delivered.sutures = ToolLocation::sterile;
  CHECK(w.sn_policy(delivered, Tool::sutures)[kAccept] == 1.0);
  CHECK(w.sn_policy(delivered, Tool::scalpel)[kScrubNoop] == 1.0);
}

TEST_CASE("circulating nurse policy") {
  const Layout layout;
  const Params params;
  const double noise = params.cn_move_noise;

  SUBCASE("one cell from storage believing scalpel") {
    const auto p = cn_policy(requested_at({3, 0}), Tool::scalpel, layout, params);
    // Feasible: N, S, E.
    CHECK(p[kSouth] == doctest::Approx(1.0 - noise + noise / 3));
    CHECK(p[kNorth] == doctest::Approx(noise / 3));
    CHECK(p[kWest] == 0.0);
  }
  SUBCASE("at the cabinet believing sutures") {
    const auto p = cn_policy(requested_at({0, 0}), Tool::sutures, layout, params);
    CHECK(p[kPick] == doctest::Approx(1.0 - noise + noise / 3));
  }
  SUBCASE("idle before any request") {
    State s;
    s.cn = {2, 2};
    for (auto belief : {Tool::sutures, Tool::scalpel}) {
      const auto p = cn_policy(s, belief, layout, params);
      CHECK(p[kCirculatingNoop] == 1.0);
    }
  }
  SUBCASE("carrying heads for the handover cell") {
    auto s = requested_at({1, 1});
    s.sutures = ToolLocation::carried;
    const auto p = cn_policy(s, Tool::sutures, layout, params);
    CHECK(p[kSouth] > 0.9);
  }
}

TEST_CASE("truncation windows") {
  std::vector<ActionId> sn(30, kScrubNoop);
  SUBCASE("request at step 10 keeps steps 8..14") {
    sn[10] = kRequest;
    sn[12] = kRequest;
    const auto t = with_scrub_actions(sn);
    CHECK(first_request(t) == 10);
    const auto cut = truncation_point(t);
    CHECK(cut.partial.steps() == 7);
    CHECK_FALSE(cut.short_window);
    CHECK(cut.partial.joint_actions[2][kScrubNurse] == kRequest);
  }
  SUBCASE("request at step 1 keeps steps 0..6 and flags a short window") {
    sn[1] = kRequest;
    const auto cut = truncation_point(with_scrub_actions(sn));
    CHECK(cut.partial.steps() == 7);
    CHECK(cut.partial.joint_actions[1][kScrubNurse] == kRequest);
    CHECK(cut.short_window);
  }
  SUBCASE("no request") {
    CHECK_THROWS_AS((void)truncation_point(with_scrub_actions(sn)), TruncationError);
  }
  SUBCASE("late request yields a shorter tail") {
    sn.resize(12);
    sn[10] = kRequest;
    CHECK(truncation_point(with_scrub_actions(sn)).partial.steps() == 4);
  }
}

TEST_CASE("reachable states respect the sterile region and conserve tools") {
  const Layout layout;
  const Params params;
  const World w{layout, params};
  const auto model = build_task(layout, params);
  std::vector<bool> seen(model.state_count(), false);
  std::deque<StateId> frontier;
  for (const auto &o : model.initial()) {
    seen[o.next] = true;
    frontier.push_back(o.next);
  }
  std::size_t reached = 0;
  while (!frontier.empty()) {
    const auto s = frontier.front();
    frontier.pop_front();
    ++reached;
    const State st = w.decode(s);
    CHECK_FALSE(layout.is_sterile(st.cn));
    CHECK_FALSE((st.sutures == ToolLocation::carried && st.scalpel == ToolLocation::carried));
    CHECK_FALSE((st.sutures == ToolLocation::sterile && st.scalpel == ToolLocation::sterile));
    for (std::size_t j = 0; j < model.joint_action_count(); ++j)
      for (const auto &o : model.transition_row(s, j))
        if (o.prob > 0.0 && !seen[o.next]) {
          seen[o.next] = true;
          frontier.push_back(o.next);
        }
  }
  CHECK(reached > 100);
}

TEST_CASE("noise-free circulating nurse reveals its belief on the first move") {
  Params params;
  params.cn_move_noise = 0.0;
  const Layout layout;
  const auto sc = make_scenario(layout, params);
  const World w{layout, params};
  for (auto belief : {Tool::sutures, Tool::scalpel}) {
    const auto s0 = requested_at(layout.handover);
    const auto p = w.cn_policy(s0, belief);
    ActionId move = kCirculatingNoop;
    for (ActionId a = 0; a < kCirculatingActions; ++a)
      if (p[a] == 1.0) move = a;
    REQUIRE(move != kCirculatingNoop);
    Trajectory t;
    t.states = {w.encode(s0), w.encode(requested_at(*w.step(s0.cn, move)))};
    t.joint_actions = {{kScrubNoop, move}};
    const auto post = posterior(sc.model, sc.policies, PriorSpec::uniform(2, 2), t);
    CHECK(per_agent_marginals(post)[kCirculatingNurse][static_cast<LatentId>(belief)] == 1.0);
  }
}

TEST_CASE("profile sampler mixes misunderstanding into the CN latent") {
  const Params params;
  const auto sampler = profile_sampler(params);
  double misaligned = 0.0;
  for (const auto &[p, w] : sampler.entries())
    if (!p.is_aligned()) misaligned += w;
  CHECK(misaligned == doctest::Approx(params.p_misunderstand));
}
