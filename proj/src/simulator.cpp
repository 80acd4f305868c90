#include "tmm/simulator.hpp"

#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace tmm {

ProfileSampler::ProfileSampler(std::vector<std::pair<LatentProfile, double>> entries)
    : entries_(std::move(entries)) {
  if (entries_.empty()) throw std::invalid_argument("profile sampler needs at least one profile");
  double sum = 0.0;
  for (const auto &[profile, p] : entries_) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("profile probability outside [0, 1]");
    if (profile.size() != entries_.front().first.size())
      throw std::invalid_argument("profiles in a sampler must have equal length");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("profile sampler probabilities must sum to 1");
}

const LatentProfile &ProfileSampler::sample(Rng &rng) const {
  if (entries_.empty()) throw std::logic_error("sampling from an empty profile sampler");
  return entries_[sample_index(rng, entries_, [](const auto &e) { return e.second; })].first;
}

Trajectory generate_trajectory(const TaskModel &model, std::span<const Policy> policies,
                               const LatentProfile &profile, const SimConfig &cfg, Rng &rng) {
  if (cfg.episode_cap < 1) throw std::invalid_argument("episode cap must be at least 1");
  if (policies.size() != model.agent_count() || profile.size() != model.agent_count())
    throw DimensionError("need one policy and one latent value per agent");
  for (auto x : profile.values)
    if (x >= model.latent_count()) throw DimensionError("profile value outside the latent space");

  Trajectory traj;
  traj.ground_truth = profile;
  const auto init = model.initial();
  StateId s = init[sample_index(rng, init, [](const Outcome &o) { return o.prob; })].next;
  traj.states.push_back(s);

  const auto n = model.agent_count();
  while (!model.is_terminal(s)) {
    if (traj.steps() >= cfg.episode_cap) {
      traj.capped = true;
      break;
    }
    JointAction a(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = policies[i].row(s, profile.values[i]);
      a[i] = static_cast<ActionId>(sample_index(rng, row));
      if (row[a[i]] <= 0.0)
        throw std::logic_error("policy row for agent " + model.agent_name(i) + " in state " +
                               model.state_label(s) + " has no support");
    }
    const auto row = model.transition(s, a);
    if (row.empty()) throw std::logic_error("empty transition row at state " + model.state_label(s));
    s = row[sample_index(rng, row, [](const Outcome &o) { return o.prob; })].next;
    traj.joint_actions.push_back(std::move(a));
    traj.states.push_back(s);
  }
  return traj;
}

namespace {

Trajectory generate_episode(const TaskModel &model, std::span<const Policy> policies, const SimConfig &cfg,
                            std::size_t index) {
  const auto seed = episode_seed(cfg.seed, index);
  Rng rng(seed);
  const auto &profile = cfg.profile_sampler.sample(rng);
  auto traj = generate_trajectory(model, policies, profile, cfg, rng);
  traj.seed = seed;
  return traj;
}

} // namespace

std::vector<Trajectory> generate_dataset(const TaskModel &model, std::span<const Policy> policies,
                                         const SimConfig &cfg, std::size_t count, Execution exec) {
  if (count < 1) throw std::invalid_argument("dataset count must be at least 1");
  std::vector<Trajectory> out(count);
  if (exec == Execution::serial) {
    for (std::size_t i = 0; i < count; ++i) out[i] = generate_episode(model, policies, cfg, i);
    return out;
  }

  // Exceptions must not escape an OpenMP region; keep the first one and rethrow.
  std::exception_ptr failure;
  const auto n = static_cast<std::ptrdiff_t>(count);
#pragma omp parallel for schedule(dynamic, 8) num_threads(worker_count())
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      out[static_cast<std::size_t>(i)] = generate_episode(model, policies, cfg, static_cast<std::size_t>(i));
    } catch (...) {
#pragma omp critical(tmm_sim_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

int worker_count() {
  if (const char *env = std::getenv("TMM_WORKERS")) {
    try {
      const int n = std::stoi(env);
      if (n >= 1) return n;
    } catch (const std::exception &) {
    }
  }
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

} // namespace tmm
