#include "cli.hpp"

#include "tmm/experiment.hpp"
#include "tmm/serialization.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>

namespace tmm::cli {

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kInconsistent = 2;

struct Options {
  std::string scenario;
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> count;
  std::string mode;
  std::string out;
  std::string format;
  std::string input;
};

void add_common(CLI::App *cmd, Options &o) {
  cmd->add_option("--scenario", o.scenario, "protamine or tooldelivery")->check(CLI::IsMember({"protamine", "tooldelivery"}));
  cmd->add_option("--config", o.config, "JSON experiment config")->check(CLI::ExistingFile);
}

ExperimentConfig resolve(const Options &o) {
  ExperimentConfig cfg = o.config.empty() ? ExperimentConfig{} : load_config(o.config);
  if (!o.scenario.empty()) cfg.scenario = o.scenario;
  if (o.seed) cfg.seed = *o.seed;
  if (o.count) cfg.count = *o.count;
  if (!o.mode.empty()) cfg.mode = parse_mode(o.mode);
  if (!o.out.empty()) cfg.output_dir = o.out;
  if (!o.format.empty()) cfg.format = o.format;
  cfg.check();
  return cfg;
}

int cmd_validate(const Options &o, std::ostream &out) {
  const auto cfg = resolve(o);
  const auto sc = make_scenario(cfg);
  auto report = validate_task(sc.model);
  for (auto &v : validate_policies(sc.model, sc.policies)) report.push_back(std::move(v));
  out << "scenario " << sc.name << ": " << sc.model.state_count() << " states, " << sc.model.joint_action_count()
      << " joint actions, " << sc.model.agent_count() << " agents\n";
  for (const auto &v : report) out << "  " << to_string(v.kind) << ": " << v.message << '\n';
  out << (report.empty() ? "valid\n" : "INVALID\n");
  return report.empty() ? kOk : kInconsistent;
}

int cmd_generate(const Options &o, std::ostream &out) {
  auto cfg = resolve(o);
  if (cfg.output_dir.empty()) throw std::invalid_argument("generate needs --out");
  const auto sc = make_scenario(cfg);
  const auto data = generate_dataset(sc.model, sc.policies, sim_config(cfg, sc), cfg.count, cfg.execution);
  std::filesystem::create_directories(cfg.output_dir);
  write_dataset(cfg.output_dir / "dataset.jsonl", sc, data);
  out << "wrote " << data.size() << " trajectories to " << (cfg.output_dir / "dataset.jsonl").string() << '\n';
  return kOk;
}

int cmd_infer(const Options &o, std::ostream &out) {
  auto cfg = resolve(o);
  const auto sc = make_scenario(cfg);
  const auto data = read_dataset(o.input, sc);
  if (data.empty()) throw SchemaError("input contains no trajectories");
  const auto prior = cfg.prior.value_or(sc.prior);

  ExperimentResult res;
  res.dataset = data;
  if (cfg.mode != Mode::execution_time) res.posthoc = evaluate(sc, prior, data, false, cfg.execution);
  if (cfg.mode != Mode::posthoc) res.execution_time = evaluate(sc, prior, data, true, cfg.execution);

  nlohmann::json verdicts{
      {"posthoc", res.posthoc ? to_json(*res.posthoc, sc.model.spec().latent_labels)["sequences"] : nlohmann::json(nullptr)},
      {"execution_time", res.execution_time ? to_json(*res.execution_time, sc.model.spec().latent_labels)["sequences"]
                                            : nlohmann::json(nullptr)}};
  const std::string text = cfg.format == "csv" ? results_csv(sc, res) : verdicts.dump(2) + "\n";
  if (cfg.output_dir.empty()) {
    out << text;
  } else {
    std::filesystem::create_directories(cfg.output_dir);
    std::ofstream f(cfg.output_dir / (cfg.format == "csv" ? "verdicts.csv" : "verdicts.json"), std::ios::binary);
    f << text;
    out << "wrote verdicts for " << data.size() << " trajectories to " << cfg.output_dir.string() << '\n';
  }
  return kOk;
}

int cmd_evaluate(const Options &o, std::ostream &out) {
  const auto cfg = resolve(o);
  const auto res = run_experiment(cfg);
  out << metrics_table(cfg, res);
  if (!cfg.output_dir.empty()) out << "artifacts in " << cfg.output_dir.string() << '\n';
  return kOk;
}

} // namespace

int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
  CLI::App app{"Team mental-model alignment: simulate surgical team scenarios and infer latent misalignment", "tmm"};
  app.require_subcommand(1);
  Options o;

  auto *generate = app.add_subcommand("generate", "simulate a dataset and write it to --out");
  auto *infer = app.add_subcommand("infer", "infer alignment verdicts for serialized trajectories");
  auto *evaluate = app.add_subcommand("evaluate", "generate, infer and score the full evaluation protocol");
  auto *validate = app.add_subcommand("validate", "run scenario self-checks");
  for (auto *cmd : {generate, infer, evaluate, validate}) add_common(cmd, o);
  for (auto *cmd : {generate, evaluate}) {
    cmd->add_option("--seed", o.seed, "master RNG seed");
    cmd->add_option("--count", o.count, "number of sequences")->check(CLI::PositiveNumber);
  }
  for (auto *cmd : {infer, evaluate}) {
    cmd->add_option("--mode", o.mode, "posthoc, execution-time or both")
        ->check(CLI::IsMember({"posthoc", "execution-time", "execution_time", "both"}));
    cmd->add_option("--format", o.format, "per-sequence output format")->check(CLI::IsMember({"json", "csv"}));
  }
  for (auto *cmd : {generate, infer, evaluate}) cmd->add_option("--out", o.out, "output directory");
  infer->add_option("--input", o.input, "trajectory stream (.jsonl)")->required()->check(CLI::ExistingFile);

  std::vector<const char *> argv;
  for (const auto &a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*validate) return cmd_validate(o, out);
    if (*generate) return cmd_generate(o, out);
    if (*infer) return cmd_infer(o, out);
    return cmd_evaluate(o, out);
  } catch (const ModelInconsistencyError &e) {
    err << "model inconsistency: " << e.what() << '\n';
    return kInconsistent;
  } catch (const SchemaError &e) {
    err << "schema error: " << e.what() << '\n';
    return kInconsistent;
  } catch (const std::invalid_argument &e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception &e) {
    err << "error: " << e.what() << '\n';
    return kInconsistent;
  }
}

} // namespace tmm::cli
