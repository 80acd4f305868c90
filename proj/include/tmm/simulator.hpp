#pragma once

#include "tmm/random.hpp"
#include "tmm/task_model.hpp"

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace tmm {

/// Distribution over latent profiles used to assign ground truth per episode.
class ProfileSampler {
public:
  ProfileSampler() = default;
  /// Throws std::invalid_argument unless weights are in [0, 1] and sum to 1.
  explicit ProfileSampler(std::vector<std::pair<LatentProfile, double>> entries);

  [[nodiscard]] const LatentProfile &sample(Rng &rng) const;
  [[nodiscard]] const std::vector<std::pair<LatentProfile, double>> &entries() const { return entries_; }

private:
  std::vector<std::pair<LatentProfile, double>> entries_;
};

struct SimConfig {
  std::size_t episode_cap = 200;
  std::uint64_t seed = 0;
  ProfileSampler profile_sampler;
};

enum class Execution { serial, parallel };

/// Roll out one episode: sample s^0, then alternate joint-action draws from the
/// per-agent policies and next-state draws from T until a terminal state or
/// the episode cap.
Trajectory generate_trajectory(const TaskModel &model, std::span<const Policy> policies,
                               const LatentProfile &profile, const SimConfig &cfg, Rng &rng);

/// Episode i draws its profile and rollout from episode_seed(cfg.seed, i), so
/// serial and parallel execution give identical datasets.
std::vector<Trajectory> generate_dataset(const TaskModel &model, std::span<const Policy> policies,
                                         const SimConfig &cfg, std::size_t count,
                                         Execution exec = Execution::parallel);

/// Worker count for the parallel kernels; honours TMM_WORKERS when set.
int worker_count();

} // namespace tmm
