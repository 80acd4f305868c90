#include "tmm/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace tmm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double safe_log(double p) { return p > 0.0 ? std::log(p) : kNegInf; }

double log_sum_exp(std::span<const double> v) {
  const double m = *std::max_element(v.begin(), v.end());
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

} // namespace

PriorSpec PriorSpec::uniform(std::size_t agents, std::size_t latents) {
  return PriorSpec{std::vector<std::vector<double>>(agents, std::vector<double>(latents, 1.0 / latents))};
}

void PriorSpec::check(std::size_t agents, std::size_t latents) const {
  if (per_agent.size() != agents) throw std::invalid_argument("prior needs one distribution per agent");
  for (const auto &row : per_agent) {
    if (row.size() != latents) throw std::invalid_argument("prior row length must equal the latent count");
    double sum = 0.0;
    for (double p : row) {
      if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("prior probability outside [0, 1]");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("prior row must sum to 1");
  }
}

std::string to_string(Verdict v) {
  switch (v) {
  case Verdict::aligned: return "aligned";
  case Verdict::misaligned: return "misaligned";
  case Verdict::ambiguous: return "ambiguous";
  }
  return "unknown";
}

double AlignmentPosterior::probability(const LatentProfile &p) const {
  auto it = std::lower_bound(profiles.begin(), profiles.end(), p);
  if (it == profiles.end() || *it != p) return 0.0;
  return std::exp(log_weights[static_cast<std::size_t>(it - profiles.begin())]);
}

AlignmentPosterior posterior(const TaskModel &model, std::span<const Policy> policies, const PriorSpec &prior,
                             const Trajectory &traj) {
  const auto n = model.agent_count();
  const auto nx = model.latent_count();
  if (policies.size() != n) throw DimensionError("need one policy per agent");
  prior.check(n, nx);
  if (traj.states.size() != traj.joint_actions.size() + 1)
    throw DimensionError("trajectory must have exactly one more state than joint actions");
  for (std::size_t i = 0; i < n; ++i) {
    if (policies[i].latent_count() != nx || policies[i].action_count() != model.action_count(i))
      throw DimensionError("policy for agent " + model.agent_name(i) + " does not match the model");
  }

  AlignmentPosterior post;
  post.agent_count = n;
  post.latent_count = nx;
  post.agent_log_weights.assign(n, std::vector<double>(nx, 0.0));

  for (std::size_t i = 0; i < n; ++i) {
    auto &lw = post.agent_log_weights[i];
    for (std::size_t x = 0; x < nx; ++x) lw[x] = safe_log(prior.per_agent[i][x]);
  }
  for (std::size_t j = 0; j < traj.joint_actions.size(); ++j) {
    const StateId s = traj.states[j];
    const auto &a = traj.joint_actions[j];
    if (a.size() != n) throw DimensionError("joint action at step " + std::to_string(j) + " has wrong arity");
    for (std::size_t i = 0; i < n; ++i) {
      auto &lw = post.agent_log_weights[i];
      for (std::size_t x = 0; x < nx; ++x) {
        if (lw[x] == kNegInf) continue;
        lw[x] += safe_log(policies[i].prob(s, static_cast<LatentId>(x), a[i]));
      }
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    auto &lw = post.agent_log_weights[i];
    const double z = log_sum_exp(lw);
    if (z == kNegInf)
      throw ModelInconsistencyError("trajectory has zero likelihood under every latent value of agent " +
                                    model.agent_name(i));
    for (auto &v : lw) v = v == kNegInf ? kNegInf : v - z;
  }

  post.profiles = enumerate_profiles(n, nx);
  post.log_weights.reserve(post.profiles.size());
  double best = kNegInf;
  for (const auto &p : post.profiles) {
    double lw = 0.0;
    for (std::size_t i = 0; i < n && lw != kNegInf; ++i) lw += post.agent_log_weights[i][p.values[i]];
    post.log_weights.push_back(lw);
    best = std::max(best, lw);
  }
  post.normalized = true;

  for (std::size_t k = 0; k < post.profiles.size(); ++k) {
    if (post.log_weights[k] != kNegInf && best - post.log_weights[k] <= kTieTolerance)
      post.map_ties.push_back(post.profiles[k]);
  }
  post.map_profile = post.map_ties.front();
  const bool map_aligned = post.map_profile.is_aligned();
  const bool disagree = std::any_of(post.map_ties.begin(), post.map_ties.end(),
                                    [&](const LatentProfile &p) { return p.is_aligned() != map_aligned; });
  post.verdict = disagree ? Verdict::ambiguous : (map_aligned ? Verdict::aligned : Verdict::misaligned);
  return post;
}

std::vector<std::vector<double>> per_agent_marginals(const AlignmentPosterior &post) {
  std::vector<std::vector<double>> out(post.agent_count, std::vector<double>(post.latent_count, 0.0));
  for (std::size_t k = 0; k < post.profiles.size(); ++k) {
    const double w = std::exp(post.log_weights[k]);
    for (std::size_t i = 0; i < post.agent_count; ++i) out[i][post.profiles[k].values[i]] += w;
  }
  return out;
}

MisalignmentReport detect_misalignment(const AlignmentPosterior &post) {
  double p_mis = 0.0;
  for (std::size_t k = 0; k < post.profiles.size(); ++k)
    if (!post.profiles[k].is_aligned()) p_mis += std::exp(post.log_weights[k]);
  return {post.verdict, post.map_profile, std::clamp(p_mis, 0.0, 1.0)};
}

std::vector<BatchResult> infer_batch(const TaskModel &model, std::span<const Policy> policies,
                                     const PriorSpec &prior, std::span<const Trajectory> trajs,
                                     Execution exec) {
  std::vector<BatchResult> out(trajs.size());
  auto one = [&](std::size_t k) {
    try {
      out[k].report = detect_misalignment(posterior(model, policies, prior, trajs[k]));
    } catch (const ModelInconsistencyError &e) {
      out[k].error = e.what();
    }
  };
  if (exec == Execution::serial) {
    for (std::size_t k = 0; k < trajs.size(); ++k) one(k);
    return out;
  }
  std::exception_ptr failure;
  const auto n = static_cast<std::ptrdiff_t>(trajs.size());
#pragma omp parallel for schedule(dynamic, 16) num_threads(worker_count())
  for (std::ptrdiff_t k = 0; k < n; ++k) {
    try {
      one(static_cast<std::size_t>(k));
    } catch (...) {
#pragma omp critical(tmm_infer_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

} // namespace tmm
