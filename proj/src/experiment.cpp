#include "tmm/experiment.hpp"
#include "tmm/serialization.hpp"

#include <chrono>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace tmm {

namespace {

using nlohmann::json;

void reject_unknown(const json &j, std::initializer_list<const char *> allowed, const std::string &where) {
  if (!j.is_object()) throw std::invalid_argument(where + " must be an object");
  for (const auto &[key, value] : j.items()) {
    bool ok = false;
    for (const char *a : allowed) ok = ok || key == a;
    if (!ok) throw std::invalid_argument("unknown key '" + key + "' in " + where);
  }
}

template <typename T> void read_if(const json &j, const char *key, T &out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

tool_delivery::Cell read_cell(const json &j) {
  if (!j.is_array() || j.size() != 2) throw std::invalid_argument("grid cells are written as [row, col]");
  return {j[0].get<int>(), j[1].get<int>()};
}

json cell_json(tool_delivery::Cell c) { return json::array({c.row, c.col}); }

json opt(const std::optional<double> &v) { return v ? json(*v) : json(nullptr); }

std::string fmt_rate(const std::optional<double> &v) {
  if (!v) return "n/a";
  std::ostringstream s;
  s << std::fixed << std::setprecision(1) << 100.0 * *v << "%";
  return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

} // namespace

Mode parse_mode(const std::string &text) {
  if (text == "posthoc") return Mode::posthoc;
  if (text == "execution-time" || text == "execution_time") return Mode::execution_time;
  if (text == "both") return Mode::both;
  throw std::invalid_argument("unknown mode '" + text + "' (expected posthoc, execution-time or both)");
}

std::string to_string(Mode m) {
  switch (m) {
  case Mode::posthoc: return "posthoc";
  case Mode::execution_time: return "execution-time";
  case Mode::both: return "both";
  }
  return "unknown";
}

void ExperimentConfig::check() const {
  if (scenario != "protamine" && scenario != "tooldelivery")
    throw std::invalid_argument("unknown scenario '" + scenario + "' (expected protamine or tooldelivery)");
  if (count < 1) throw std::invalid_argument("count must be at least 1");
  if (episode_cap < 1) throw std::invalid_argument("episode_cap must be at least 1");
  if (format != "json" && format != "csv") throw std::invalid_argument("format must be json or csv");
  if (scenario == "protamine") protamine.check();
  else tool_delivery::World(layout, tool_delivery);
}

ExperimentConfig config_from_json(const json &j) {
  ExperimentConfig cfg;
  try {
    reject_unknown(j, {"scenario", "count", "seed", "mode", "episode_cap", "protamine", "tooldelivery", "prior",
                       "output", "format"},
                   "config");
    read_if(j, "scenario", cfg.scenario);
    read_if(j, "count", cfg.count);
    read_if(j, "seed", cfg.seed);
    read_if(j, "episode_cap", cfg.episode_cap);
    read_if(j, "format", cfg.format);
    if (j.contains("mode")) cfg.mode = parse_mode(j.at("mode").get<std::string>());
    if (j.contains("output")) cfg.output_dir = j.at("output").get<std::string>();
    if (j.contains("protamine")) {
      const auto &p = j.at("protamine");
      reject_unknown(p, {"p_allergic_per_increment", "p_adverse_bolus", "comm_rate_correct", "comm_rate_incorrect",
                         "p_ra_bolus", "p_request", "p_remove_cannula", "dosage_ladder", "cannulas"},
                     "protamine");
      auto &q = cfg.protamine;
      read_if(p, "p_allergic_per_increment", q.p_allergic_per_increment);
      read_if(p, "p_adverse_bolus", q.p_adverse_bolus);
      read_if(p, "comm_rate_correct", q.comm_rate_correct);
      read_if(p, "comm_rate_incorrect", q.comm_rate_incorrect);
      read_if(p, "p_ra_bolus", q.p_ra_bolus);
      read_if(p, "p_request", q.p_request);
      read_if(p, "p_remove_cannula", q.p_remove_cannula);
      read_if(p, "dosage_ladder", q.dosage_ladder);
      read_if(p, "cannulas", q.cannulas);
    }
    if (j.contains("tooldelivery")) {
      const auto &t = j.at("tooldelivery");
      reject_unknown(t, {"params", "layout"}, "tooldelivery");
      if (t.contains("params")) {
        const auto &p = t.at("params");
        reject_unknown(p, {"p_misunderstand", "p_contamination_event", "p_suturing_next", "cue_strength",
                           "request_rate", "p_sn_scalpel", "p_reminder", "cn_move_noise"},
                       "tooldelivery.params");
        auto &q = cfg.tool_delivery;
        read_if(p, "p_misunderstand", q.p_misunderstand);
        read_if(p, "p_contamination_event", q.p_contamination_event);
        read_if(p, "p_suturing_next", q.p_suturing_next);
        read_if(p, "cue_strength", q.cue_strength);
        read_if(p, "request_rate", q.request_rate);
        read_if(p, "p_sn_scalpel", q.p_sn_scalpel);
        read_if(p, "p_reminder", q.p_reminder);
        read_if(p, "cn_move_noise", q.cn_move_noise);
      }
      if (t.contains("layout")) {
        const auto &l = t.at("layout");
        reject_unknown(l, {"rows", "cols", "sterile", "cabinet", "storage", "scrub_nurse", "handover"},
                       "tooldelivery.layout");
        auto &q = cfg.layout;
        read_if(l, "rows", q.rows);
        read_if(l, "cols", q.cols);
        if (l.contains("sterile")) {
          q.sterile.clear();
          for (const auto &c : l.at("sterile")) q.sterile.push_back(read_cell(c));
        }
        if (l.contains("cabinet")) q.cabinet = read_cell(l.at("cabinet"));
        if (l.contains("storage")) q.storage = read_cell(l.at("storage"));
        if (l.contains("scrub_nurse")) q.scrub_nurse = read_cell(l.at("scrub_nurse"));
        if (l.contains("handover")) q.handover = read_cell(l.at("handover"));
      }
    }
    if (j.contains("prior") && !j.at("prior").is_null())
      cfg.prior = PriorSpec{j.at("prior").get<std::vector<std::vector<double>>>()};
  } catch (const json::exception &e) {
    throw std::invalid_argument(std::string("bad config value: ") + e.what());
  }
  cfg.check();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error &e) {
    throw std::invalid_argument("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

json to_json(const ExperimentConfig &cfg) {
  const auto &p = cfg.protamine;
  const auto &t = cfg.tool_delivery;
  const auto &l = cfg.layout;
  json sterile = json::array();
  for (auto c : l.sterile) sterile.push_back(cell_json(c));
  json j{{"scenario", cfg.scenario},
         {"count", cfg.count},
         {"seed", cfg.seed},
         {"mode", to_string(cfg.mode)},
         {"episode_cap", cfg.episode_cap},
         {"format", cfg.format},
         {"protamine",
          {{"p_allergic_per_increment", p.p_allergic_per_increment},
           {"p_adverse_bolus", p.p_adverse_bolus},
           {"comm_rate_correct", p.comm_rate_correct},
           {"comm_rate_incorrect", p.comm_rate_incorrect},
           {"p_ra_bolus", p.p_ra_bolus},
           {"p_request", p.p_request},
           {"p_remove_cannula", p.p_remove_cannula},
           {"dosage_ladder", p.dosage_ladder},
           {"cannulas", p.cannulas}}},
         {"tooldelivery",
          {{"params",
            {{"p_misunderstand", t.p_misunderstand},
             {"p_contamination_event", t.p_contamination_event},
             {"p_suturing_next", t.p_suturing_next},
             {"cue_strength", t.cue_strength},
             {"request_rate", t.request_rate},
             {"p_sn_scalpel", t.p_sn_scalpel},
             {"p_reminder", t.p_reminder},
             {"cn_move_noise", t.cn_move_noise}}},
           {"layout",
            {{"rows", l.rows},
             {"cols", l.cols},
             {"sterile", sterile},
             {"cabinet", cell_json(l.cabinet)},
             {"storage", cell_json(l.storage)},
             {"scrub_nurse", cell_json(l.scrub_nurse)},
             {"handover", cell_json(l.handover)}}}}}};
  j["prior"] = cfg.prior ? json(cfg.prior->per_agent) : json(nullptr);
  return j;
}

Scenario make_scenario(const ExperimentConfig &cfg) {
  cfg.check();
  if (cfg.scenario == "protamine") return protamine::make_scenario(cfg.protamine);
  return tool_delivery::make_scenario(cfg.layout, cfg.tool_delivery);
}

SimConfig sim_config(const ExperimentConfig &cfg, const Scenario &sc) {
  return SimConfig{.episode_cap = cfg.episode_cap, .seed = cfg.seed, .profile_sampler = sc.sampler};
}

MetricsReport evaluate(const Scenario &sc, const PriorSpec &prior, std::span<const Trajectory> data, bool truncated,
                       Execution exec) {
  const auto t0 = std::chrono::steady_clock::now();
  MetricsReport report;
  report.mode = truncated ? "execution-time" : "posthoc";
  report.sequences.resize(data.size());

  std::vector<Trajectory> views;
  std::vector<std::size_t> owner;
  views.reserve(data.size());
  for (std::size_t k = 0; k < data.size(); ++k) {
    auto &seq = report.sequences[k];
    seq.index = k;
    seq.seed = data[k].seed;
    seq.truth_misaligned = data[k].ground_truth && !data[k].ground_truth->is_aligned();
    if (!truncated) {
      views.push_back(data[k]);
    } else {
      try {
        auto cut = sc.truncate(data[k]);
        seq.short_window = cut.short_window;
        views.push_back(std::move(cut.partial));
      } catch (const TruncationError &e) {
        seq.excluded = e.what();
        continue;
      }
    }
    seq.steps = views.back().steps();
    owner.push_back(k);
  }

  const auto results = infer_batch(sc.model, sc.policies, prior, views, exec);
  for (std::size_t v = 0; v < results.size(); ++v) {
    auto &seq = report.sequences[owner[v]];
    if (!results[v].error.empty())
      throw ModelInconsistencyError("sequence " + std::to_string(owner[v]) + ": " + results[v].error);
    seq.verdict = results[v].report.verdict;
    seq.map_profile = results[v].report.map_profile;
    seq.p_misaligned = results[v].report.p_misaligned;
  }
  finalize_metrics(report);
  report.runtime_seconds = seconds_since(t0);
  return report;
}

ExperimentResult run_experiment(const ExperimentConfig &cfg) {
  const auto sc = make_scenario(cfg);
  const auto prior = cfg.prior.value_or(sc.prior);
  prior.check(sc.model.agent_count(), sc.model.latent_count());

  ExperimentResult res;
  const auto t0 = std::chrono::steady_clock::now();
  res.dataset = generate_dataset(sc.model, sc.policies, sim_config(cfg, sc), cfg.count, cfg.execution);
  res.generation_seconds = seconds_since(t0);

  auto &st = res.stats;
  st.sequences = res.dataset.size();
  std::size_t total_len = 0;
  for (const auto &t : res.dataset) {
    st.misaligned += t.ground_truth && !t.ground_truth->is_aligned();
    st.capped += t.capped;
    total_len += t.steps();
    try {
      sc.truncate(t);
      ++st.with_request;
    } catch (const TruncationError &) {
    }
  }
  st.mean_length = static_cast<double>(total_len) / static_cast<double>(st.sequences);

  if (cfg.mode != Mode::execution_time) res.posthoc = evaluate(sc, prior, res.dataset, false, cfg.execution);
  if (cfg.mode != Mode::posthoc) res.execution_time = evaluate(sc, prior, res.dataset, true, cfg.execution);

  if (cfg.scenario == "protamine") {
    std::size_t bolus = 0, near = 0;
    for (const auto &t : res.dataset) {
      bolus += protamine::has_bolus(t);
      near += protamine::is_near_miss(cfg.protamine, t);
    }
    st.bolus_episodes = bolus;
    st.near_misses = near;
    if (res.posthoc && bolus > 0) {
      std::size_t correct = 0;
      for (std::size_t k = 0; k < res.dataset.size(); ++k) {
        if (!protamine::has_bolus(res.dataset[k])) continue;
        const auto &s = res.posthoc->sequences[k];
        correct += s.verdict == (s.truth_misaligned ? Verdict::misaligned : Verdict::aligned);
      }
      st.posthoc_bolus_accuracy = static_cast<double>(correct) / static_cast<double>(bolus);
    }
  }

  if (!cfg.output_dir.empty()) write_artifacts(cfg, sc, res, cfg.output_dir);
  return res;
}

json metrics_json(const ExperimentConfig &cfg, const Scenario &sc, const ExperimentResult &res) {
  const auto &st = res.stats;
  json dataset{{"sequences", st.sequences},     {"misaligned", st.misaligned},
               {"capped", st.capped},           {"with_request", st.with_request},
               {"mean_length", st.mean_length}};
  if (st.bolus_episodes) dataset["bolus_episodes"] = *st.bolus_episodes;
  if (st.near_misses) dataset["near_misses"] = *st.near_misses;
  if (st.bolus_episodes) dataset["posthoc_bolus_accuracy"] = opt(st.posthoc_bolus_accuracy);

  auto summary = [&](const MetricsReport &r) {
    auto j = to_json(r, sc.model.spec().latent_labels);
    j.erase("sequences");
    return j;
  };
  json out{{"scenario", cfg.scenario}, {"seed", cfg.seed}, {"count", cfg.count}, {"dataset", dataset}};
  out["config"] = to_json(cfg);
  out["posthoc"] = res.posthoc ? summary(*res.posthoc) : json(nullptr);
  out["execution_time"] = res.execution_time ? summary(*res.execution_time) : json(nullptr);
  return out;
}

std::string metrics_table(const ExperimentConfig &cfg, const ExperimentResult &res) {
  std::ostringstream s;
  const auto &st = res.stats;
  s << "scenario " << cfg.scenario << "  seed " << cfg.seed << "  sequences " << st.sequences << "  misaligned "
    << st.misaligned << "  mean length " << std::fixed << std::setprecision(1) << st.mean_length << '\n';
  if (st.bolus_episodes) s << "bolus episodes " << *st.bolus_episodes << "  near misses " << *st.near_misses << '\n';
  s << "with request " << st.with_request << "  capped " << st.capped << "\n\n";
  s << std::left << std::setw(16) << "mode" << std::setw(10) << "evaluated" << std::setw(10) << "excluded"
    << std::setw(6) << "TP" << std::setw(6) << "FP" << std::setw(6) << "TN" << std::setw(6) << "FN" << std::setw(11)
    << "ambiguous" << std::setw(10) << "accuracy" << std::setw(10) << "recall" << std::setw(11) << "precision"
    << "acc(all)" << '\n';
  for (const auto *r : {res.posthoc ? &*res.posthoc : nullptr, res.execution_time ? &*res.execution_time : nullptr}) {
    if (!r) continue;
    const auto &c = r->confusion;
    s << std::setw(16) << r->mode << std::setw(10) << r->evaluated << std::setw(10) << r->excluded << std::setw(6)
      << c.tp << std::setw(6) << c.fp << std::setw(6) << c.tn << std::setw(6) << c.fn << std::setw(11) << r->ambiguous
      << std::setw(10) << fmt_rate(r->accuracy) << std::setw(10) << fmt_rate(r->recall) << std::setw(11)
      << fmt_rate(r->precision) << fmt_rate(r->accuracy_all) << '\n';
  }
  return s.str();
}

std::string results_csv(const Scenario &sc, const ExperimentResult &res) {
  std::ostringstream s;
  s << "mode,index,seed,truth,verdict,map_profile,p_misaligned,steps,short_window,excluded\n";
  for (const auto *r : {res.posthoc ? &*res.posthoc : nullptr, res.execution_time ? &*res.execution_time : nullptr}) {
    if (!r) continue;
    for (const auto &q : r->sequences) {
      std::string map;
      for (auto x : q.map_profile.values) map += (map.empty() ? "" : "|") + sc.model.latent_label(x);
      s << r->mode << ',' << q.index << ',' << q.seed << ',' << (q.truth_misaligned ? "misaligned" : "aligned") << ','
        << (q.excluded.empty() ? to_string(q.verdict) : "") << ',' << map << ',' << std::setprecision(17)
        << q.p_misaligned << ',' << q.steps << ',' << (q.short_window ? 1 : 0) << ',' << (q.excluded.empty() ? 0 : 1)
        << '\n';
    }
  }
  return s.str();
}

void write_artifacts(const ExperimentConfig &cfg, const Scenario &sc, const ExperimentResult &res,
                     const std::filesystem::path &dir) {
  std::filesystem::create_directories(dir);
  write_dataset(dir / "dataset.jsonl", sc, res.dataset);
  auto write = [&](const std::filesystem::path &name, const std::string &text) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
    out << text;
  };
  write("metrics.json", metrics_json(cfg, sc, res).dump(2) + "\n");
  write("metrics.txt", metrics_table(cfg, res));
  if (cfg.format == "csv") {
    write("results.csv", results_csv(sc, res));
  } else {
    json per{{"posthoc", res.posthoc ? to_json(*res.posthoc, sc.model.spec().latent_labels)["sequences"] : json(nullptr)},
             {"execution_time",
              res.execution_time ? to_json(*res.execution_time, sc.model.spec().latent_labels)["sequences"] : json(nullptr)}};
    write("results.json", per.dump(2) + "\n");
  }
  json timing{{"generation_seconds", res.generation_seconds},
              {"posthoc_seconds", res.posthoc ? json(res.posthoc->runtime_seconds) : json(nullptr)},
              {"execution_time_seconds", res.execution_time ? json(res.execution_time->runtime_seconds) : json(nullptr)},
              {"workers", worker_count()}};
  write("timing.json", timing.dump(2) + "\n");
}

} // namespace tmm
