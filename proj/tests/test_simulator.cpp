#include "helpers.hpp"

#include "tmm/metrics.hpp"
#include "tmm/protamine.hpp"
#include "tmm/simulator.hpp"

#include <doctest.h>

#include <cstdlib>

using namespace tmm;

namespace {

// s0 -> s1 -> s2 (terminal); one agent whose policy is a point mass on "go".
struct Chain {
  TaskModel model;
  std::vector<Policy> policies;
};

Chain deterministic_chain() {
  TaskModelSpec spec;
  spec.state_labels = {"s0", "s1", "s2"};
  spec.latent_labels = {"x"};
  spec.agent_names = {"solo"};
  spec.action_labels = {{"go", "wait"}};
  spec.transitions = {{{1, 1.0}}, {{0, 1.0}}, {{2, 1.0}}, {{1, 1.0}}, {{2, 1.0}}, {{2, 1.0}}};
  spec.initial = {{0, 1.0}};
  spec.terminal = {false, false, true};
  return {TaskModel(spec), {Policy(0, 3, 1, 2, {1, 0, 1, 0, 0, 1})}};
}

SimConfig config(std::uint64_t seed, std::vector<std::pair<LatentProfile, double>> entries) {
  SimConfig cfg;
  cfg.seed = seed;
  cfg.profile_sampler = ProfileSampler(std::move(entries));
  return cfg;
}

} // namespace

TEST_CASE("point-mass model yields the unique trajectory for any seed") {
  const auto chain = deterministic_chain();
  for (std::uint64_t seed : {0ULL, 1ULL, 99ULL, 123456789ULL}) {
    Rng rng(seed);
    const auto t = generate_trajectory(chain.model, chain.policies, LatentProfile{{0}}, SimConfig{}, rng);
    CHECK(t.states == std::vector<StateId>{0, 1, 2});
    CHECK(t.joint_actions == std::vector<JointAction>{{0}, {0}});
    CHECK_FALSE(t.capped);
  }
}

TEST_CASE("episode cap stops non-terminating rollouts") {
  const auto model = testing::two_state_model();
  const auto policies = testing::two_action_policies({{0.5, 0.5}, {0.5, 0.5}});
  SimConfig cfg;
  cfg.episode_cap = 17;
  Rng rng(3);
  const auto t = generate_trajectory(model, policies, LatentProfile{{0, 0}}, cfg, rng);
  CHECK(t.steps() == 17);
  CHECK(t.capped);
}

TEST_CASE("ProfileSampler validates its weights") {
  CHECK_THROWS_AS(ProfileSampler({{LatentProfile{{0}}, 0.6}}), std::invalid_argument);
  CHECK_THROWS_AS(ProfileSampler({{LatentProfile{{0}}, 1.2}, {LatentProfile{{1}}, -0.2}}), std::invalid_argument);
  CHECK_NOTHROW(ProfileSampler({{LatentProfile{{0}}, 0.25}, {LatentProfile{{1}}, 0.75}}));
}

TEST_CASE("protamine incremental rollout raises dosage one level at a time") {
  const protamine::Params params;
  const protamine::StateSpace space(params);
  const auto model = protamine::build_task(params);
  const auto policies = protamine::ground_truth_policies(params);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const auto t = generate_trajectory(model, policies, LatentProfile{{0, 0}}, SimConfig{}, rng);
    for (std::size_t j = 0; j + 1 < t.states.size(); ++j) {
      const auto a = space.decode(t.states[j]).dosage_level;
      const auto b = space.decode(t.states[j + 1]).dosage_level;
      CHECK(b >= a);
      CHECK(b - a <= 1);
    }
  }
}

TEST_CASE("generate_dataset") {
  const protamine::Params params;
  const auto model = protamine::build_task(params);
  const auto policies = protamine::ground_truth_policies(params);
  SimConfig cfg;
  cfg.seed = 11;
  cfg.profile_sampler = protamine::profile_sampler(params);

  SUBCASE("same seed twice gives identical data") {
    CHECK(generate_dataset(model, policies, cfg, 40) == generate_dataset(model, policies, cfg, 40));
  }
  SUBCASE("serial and parallel agree") {
    CHECK(generate_dataset(model, policies, cfg, 60, Execution::serial) ==
          generate_dataset(model, policies, cfg, 60, Execution::parallel));
  }
  SUBCASE("episodes are prefix-stable in count") {
    const auto small = generate_dataset(model, policies, cfg, 5);
    const auto big = generate_dataset(model, policies, cfg, 20);
    for (std::size_t i = 0; i < small.size(); ++i) CHECK(small[i] == big[i]);
  }
  SUBCASE("count 1 and count 300") {
    const auto one = generate_dataset(model, policies, cfg, 1);
    REQUIRE(one.size() == 1);
    CHECK(one[0].ground_truth.has_value());
    CHECK(generate_dataset(model, policies, cfg, 300).size() == 300);
    CHECK_THROWS_AS((void)generate_dataset(model, policies, cfg, 0), std::invalid_argument);
  }
  SUBCASE("different seeds differ") {
    auto other = cfg;
    other.seed = 12;
    CHECK(generate_dataset(model, policies, cfg, 20) != generate_dataset(model, policies, other, 20));
  }
}

TEST_CASE("misaligned fraction at p = 0.5 lies in the binomial 99% interval") {
  const auto chain = deterministic_chain();
  std::vector<Policy> pol;
  pol.emplace_back(0, 3, 2, 2, std::vector<double>{1, 0, 1, 0, 1, 0, 1, 0, 0, 1, 0, 1});
  TaskModelSpec spec = chain.model.spec();
  spec.latent_labels = {"a", "b"};
  spec.agent_names = {"one", "two"};
  spec.action_labels = {{"go", "wait"}, {"only"}};
  spec.transitions = {{{1, 1.0}}, {{0, 1.0}}, {{2, 1.0}}, {{1, 1.0}}, {{2, 1.0}}, {{2, 1.0}}};
  const TaskModel model(spec);
  pol.emplace_back(1, 3, 2, 1, std::vector<double>(6, 1.0));

  const auto [lo, hi] = binomial_interval(300, 0.5, 0.99);
  for (std::uint64_t seed : {1ULL, 7ULL, 2024ULL}) {
    const auto cfg = config(seed, {{LatentProfile{{0, 0}}, 0.5}, {LatentProfile{{0, 1}}, 0.5}});
    const auto data = generate_dataset(model, pol, cfg, 300);
    std::size_t mis = 0;
    for (const auto &t : data) mis += t.ground_truth->is_aligned() ? 0 : 1;
    CHECK(mis >= lo);
    CHECK(mis <= hi);
  }
}

TEST_CASE("TMM_WORKERS overrides the worker count") {
  ::setenv("TMM_WORKERS", "3", 1);
  CHECK(worker_count() == 3);
  ::unsetenv("TMM_WORKERS");
  CHECK(worker_count() >= 1);
}

TEST_CASE("episode seeds are distinct and stable") {
  CHECK(episode_seed(7, 0) != episode_seed(7, 1));
  CHECK(episode_seed(7, 0) != episode_seed(8, 0));
  static_assert(episode_seed(7, 3) == episode_seed(7, 3));
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    const double u = uniform01(rng);
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}
