#include "tmm/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace tmm {

namespace {

std::optional<double> ratio(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

void tally(Confusion &c, bool truth, Verdict v) {
  const bool said_misaligned = v == Verdict::misaligned;
  if (v == Verdict::ambiguous) {
    (truth ? c.fn : c.fp) += 1;
  } else if (truth) {
    (said_misaligned ? c.tp : c.fn) += 1;
  } else {
    (said_misaligned ? c.fp : c.tn) += 1;
  }
}

nlohmann::json opt(const std::optional<double> &v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

double binomial_pmf(std::size_t n, std::size_t k, double p) {
  if (p == 0.0) return k == 0 ? 1.0 : 0.0;
  if (p == 1.0) return k == n ? 1.0 : 0.0;
  const double nn = static_cast<double>(n);
  const double kk = static_cast<double>(k);
  return std::exp(std::lgamma(nn + 1) - std::lgamma(kk + 1) - std::lgamma(nn - kk + 1) + kk * std::log(p) +
                  (nn - kk) * std::log1p(-p));
}

} // namespace

void finalize_metrics(MetricsReport &r) {
  r.confusion = {};
  r.evaluated = r.excluded = r.ambiguous = 0;
  for (const auto &s : r.sequences) {
    if (!s.excluded.empty()) {
      ++r.excluded;
      continue;
    }
    ++r.evaluated;
    if (s.verdict == Verdict::ambiguous) ++r.ambiguous;
    tally(r.confusion, s.truth_misaligned, s.verdict);
  }
  const auto &c = r.confusion;
  r.accuracy = ratio(c.tp + c.tn, c.total());
  r.recall = ratio(c.tp, c.tp + c.fn);
  r.precision = ratio(c.tp, c.tp + c.fp);
  r.accuracy_all = ratio(c.tp + c.tn, c.total() + r.excluded);
}

MetricsReport compute_metrics(std::span<const Verdict> verdicts, std::span<const bool> truth_misaligned) {
  if (verdicts.empty()) throw std::invalid_argument("cannot compute metrics of an empty verdict list");
  if (verdicts.size() != truth_misaligned.size())
    throw DimensionError("verdict and ground-truth lists differ in length");
  MetricsReport r;
  r.sequences.resize(verdicts.size());
  for (std::size_t k = 0; k < verdicts.size(); ++k) {
    r.sequences[k].index = k;
    r.sequences[k].verdict = verdicts[k];
    r.sequences[k].truth_misaligned = truth_misaligned[k];
  }
  finalize_metrics(r);
  return r;
}

nlohmann::json to_json(const MetricsReport &r, const std::vector<std::string> &latent_labels) {
  nlohmann::json seqs = nlohmann::json::array();
  for (const auto &s : r.sequences) {
    nlohmann::json map = nlohmann::json::array();
    for (auto x : s.map_profile.values) map.push_back(latent_labels.at(x));
    nlohmann::json j{{"index", s.index},
                     {"seed", s.seed},
                     {"truth", s.truth_misaligned ? "misaligned" : "aligned"},
                     {"steps", s.steps}};
    if (s.excluded.empty()) {
      j["verdict"] = to_string(s.verdict);
      j["map_profile"] = std::move(map);
      j["p_misaligned"] = s.p_misaligned;
      j["short_window"] = s.short_window;
    } else {
      j["excluded"] = s.excluded;
    }
    seqs.push_back(std::move(j));
  }
  const auto &c = r.confusion;
  return {{"mode", r.mode},
          {"evaluated", r.evaluated},
          {"excluded", r.excluded},
          {"ambiguous", r.ambiguous},
          {"confusion", {{"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn}}},
          {"accuracy", opt(r.accuracy)},
          {"accuracy_all", opt(r.accuracy_all)},
          {"recall", opt(r.recall)},
          {"precision", opt(r.precision)},
          {"sequences", std::move(seqs)}};
}

std::pair<std::size_t, std::size_t> binomial_interval(std::size_t n, double p, double level) {
  const double tail = (1.0 - level) / 2.0;
  std::size_t lo = 0;
  double below = 0.0;
  while (lo < n && below + binomial_pmf(n, lo, p) <= tail) below += binomial_pmf(n, lo++, p);
  std::size_t hi = n;
  double above = 0.0;
  while (hi > lo && above + binomial_pmf(n, hi, p) <= tail) above += binomial_pmf(n, hi--, p);
  return {lo, hi};
}

} // namespace tmm
