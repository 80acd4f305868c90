#pragma once

#include "tmm/simulator.hpp"
#include "tmm/task_model.hpp"

#include <span>
#include <string>
#include <vector>

namespace tmm {

/// Independent per-agent priors over the shared latent space.
struct PriorSpec {
  std::vector<std::vector<double>> per_agent;

  static PriorSpec uniform(std::size_t agents, std::size_t latents);
  /// Throws std::invalid_argument unless every row is a distribution over `latents` values.
  void check(std::size_t agents, std::size_t latents) const;
};

enum class Verdict { aligned, misaligned, ambiguous };

std::string to_string(Verdict v);

/// Log-posterior differences within this bound count as a MAP tie.
inline constexpr double kTieTolerance = 1e-12;

struct AlignmentPosterior {
  std::size_t agent_count = 0;
  std::size_t latent_count = 0;
  /// Normalized per-agent log posteriors; the joint is their sum.
  std::vector<std::vector<double>> agent_log_weights;
  /// Joint table in enumerate_profiles() order.
  std::vector<LatentProfile> profiles;
  std::vector<double> log_weights;
  bool normalized = false;
  LatentProfile map_profile;
  std::vector<LatentProfile> map_ties;
  Verdict verdict = Verdict::ambiguous;

  [[nodiscard]] double probability(const LatentProfile &p) const;
};

/**
 * Posterior over joint latent profiles given an observed (possibly partial)
 * trajectory:
 *
 *   log w(x) = sum_i [ log p(x_i) + sum_j log pi_i(a_i^j | s^j, x_i) ].
 *
 * Transition and initial-state terms do not depend on the profile and are
 * never evaluated. The sum is accumulated per agent (O(n |X| k)) and the joint
 * table is assembled afterwards.
 *
 * Throws ModelInconsistencyError when every profile has zero likelihood and
 * DimensionError on shape mismatches.
 */
AlignmentPosterior posterior(const TaskModel &model, std::span<const Policy> policies, const PriorSpec &prior,
                             const Trajectory &traj);

/// Marginal distribution of each agent's latent value, summed from the joint table.
std::vector<std::vector<double>> per_agent_marginals(const AlignmentPosterior &post);

struct MisalignmentReport {
  Verdict verdict;
  LatentProfile map_profile;
  double p_misaligned; // posterior mass on non-aligned profiles
};

MisalignmentReport detect_misalignment(const AlignmentPosterior &post);

/// Posterior + verdict for a batch; entries whose likelihood is zero everywhere
/// come back with `error` set instead of throwing.
struct BatchResult {
  MisalignmentReport report;
  std::string error;
};

std::vector<BatchResult> infer_batch(const TaskModel &model, std::span<const Policy> policies,
                                     const PriorSpec &prior, std::span<const Trajectory> trajs,
                                     Execution exec = Execution::parallel);

} // namespace tmm
