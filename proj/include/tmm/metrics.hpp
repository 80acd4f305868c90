#pragma once

#include "tmm/inference.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace tmm {

/// Positive class is "misaligned". Ambiguous verdicts are scored as wrong:
/// FN when the truth is misaligned, FP when it is aligned.
struct Confusion {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  [[nodiscard]] std::size_t total() const { return tp + fp + tn + fn; }
  friend bool operator==(const Confusion &, const Confusion &) = default;
};

struct SequenceResult {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  bool truth_misaligned = false;
  Verdict verdict = Verdict::ambiguous;
  LatentProfile map_profile;
  double p_misaligned = 0.0;
  std::size_t steps = 0;
  bool short_window = false;
  std::string excluded; // non-empty when the sequence has no view in this mode
};

struct MetricsReport {
  std::string mode;
  Confusion confusion;
  std::size_t evaluated = 0;
  std::size_t excluded = 0;
  std::size_t ambiguous = 0;
  std::optional<double> accuracy;  // over evaluated sequences
  std::optional<double> recall;
  std::optional<double> precision;
  /// (TP+TN) / (evaluated + excluded), excluded sequences scored as wrong.
  std::optional<double> accuracy_all;
  std::vector<SequenceResult> sequences;
  double runtime_seconds = 0.0; // kept out of the deterministic report
};

/// Confusion metrics for parallel verdict/truth lists. Throws
/// std::invalid_argument on empty input and DimensionError on a length mismatch.
MetricsReport compute_metrics(std::span<const Verdict> verdicts, std::span<const bool> truth_misaligned);

/// Fill confusion and rates of `report` from its sequences, skipping excluded ones.
void finalize_metrics(MetricsReport &report);

nlohmann::json to_json(const MetricsReport &r, const std::vector<std::string> &latent_labels);

/// Central acceptance region [lo, hi] of Binomial(n, p): P(X < lo) <= a/2 and
/// P(X > hi) <= a/2 with a = 1 - level, as tight as possible.
std::pair<std::size_t, std::size_t> binomial_interval(std::size_t n, double p, double level);

} // namespace tmm
