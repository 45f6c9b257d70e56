// taxind: taxonomy induction and evaluation command-line driver.
//
// Exit codes: 0 success, 2 config/input error, 3 provider error, 4 infeasible
// taxonomy, 1 unexpected failure.

#include <filesystem>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "taxind/llm/hashing_embedder.hpp"
#include "taxind/llm/http_backend.hpp"
#include "taxind/llm/oracle.hpp"
#include "taxind/pipeline.hpp"
#include "taxind/wikipedia.hpp"

namespace fs = std::filesystem;
using namespace taxind;

namespace {

enum ExitCode { kOk = 0, kInternal = 1, kInput = 2, kProvider = 3, kInfeasible = 4 };

int exit_code_for(ErrorCode code) {
  if (code == ErrorCode::Infeasible) return kInfeasible;
  if (is_provider_error(code)) return kProvider;
  return kInput;
}

struct RunArgs {
  std::string task;
  std::string config;
  std::string llm_mode = "replay";
  std::string transcript;
  std::string definitions = "skip";
  bool no_hpcs = false;
  bool no_lscsf = false;
  std::optional<int> k2;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mutuality;
  std::string out_dir;
  bool resume = false;
  std::string stop_after = "arborescence";
  bool quiet = false;
};

void add_run_flags(CLI::App* cmd, RunArgs& a, bool task_required) {
  auto* task = cmd->add_option("--task", a.task, "Task JSON file");
  if (task_required) task->required()->check(CLI::ExistingFile);
  cmd->add_option("--config", a.config, "Pipeline config JSON")->check(CLI::ExistingFile);
  cmd->add_option("--llm-mode", a.llm_mode, "live, record or replay")
      ->check(CLI::IsMember({"live", "record", "replay"}));
  cmd->add_option("--transcript", a.transcript, "Transcript JSONL (record/replay)");
  cmd->add_option("--definitions", a.definitions, "live, snapshot:<path> or skip");
  cmd->add_flag("--no-hpcs", a.no_hpcs, "Disable hybrid candidate selection (all terms are candidates)");
  cmd->add_flag("--no-lscsf", a.no_lscsf, "Disable structural score calibration");
  cmd->add_option("--k2", a.k2, "Parents kept per child after ranking")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", a.seed, "Seed recorded in the manifest and sent to providers");
  cmd->add_option("--mutuality", a.mutuality, "reciprocal-prune or off")
      ->check(CLI::IsMember({"reciprocal-prune", "off"}));
  cmd->add_option("--out-dir", a.out_dir, "Directory for artifacts")->required();
  cmd->add_flag("--resume", a.resume, "Reuse stage artifacts whose digests match");
  cmd->add_option("--stop-after", a.stop_after, "Last stage to run")
      ->check(CLI::IsMember({"definitions", "candidates", "ranking", "calibration", "arborescence"}));
  cmd->add_flag("-q,--quiet", a.quiet, "Do not echo warnings");
}

PipelineConfig build_config(const RunArgs& a) {
  PipelineConfig c = a.config.empty() ? PipelineConfig{} : load_config(a.config);
  if (a.no_hpcs) c.enable_hpcs = false;
  if (a.no_lscsf) c.enable_lscsf = false;
  if (a.k2) c.k2 = *a.k2;
  if (a.seed) c.seed = *a.seed;
  if (a.mutuality) c.mutuality = parse_mutuality(*a.mutuality);
  c.validate();
  return c;
}

std::shared_ptr<llm::Transcript> open_transcript(const RunArgs& a, llm::LlmMode mode) {
  if (mode == llm::LlmMode::live) return std::make_shared<llm::Transcript>();
  if (a.transcript.empty()) throw Error(ErrorCode::ConfigError, "--transcript is required in record/replay mode");
  if (fs::exists(a.transcript)) return std::make_shared<llm::Transcript>(llm::Transcript::load(a.transcript));
  if (mode == llm::LlmMode::replay) throw Error(ErrorCode::ConfigError, "transcript '" + a.transcript + "' not found");
  return std::make_shared<llm::Transcript>();
}

std::shared_ptr<llm::LlmGateway> live_gateway(const PipelineConfig& c, const RunArgs& a) {
  auto mode = llm::parse_llm_mode(a.llm_mode);
  std::shared_ptr<llm::ChatBackend> chat;
  std::shared_ptr<llm::EmbeddingBackend> embed;
  if (mode != llm::LlmMode::replay) {
    auto key = llm::api_key_from_env(c.provider.api_key_env);
    chat = std::make_shared<llm::HttpChatBackend>(c.provider.chat_endpoint, key, c.provider.timeout_s);
    embed = std::make_shared<llm::HttpEmbeddingBackend>(c.provider.embedding_endpoint, key, c.provider.timeout_s);
  }
  return std::make_shared<llm::LlmGateway>(gateway_options(c, mode), open_transcript(a, mode), chat, embed);
}

std::shared_ptr<EncyclopediaClient> encyclopedia_for(const DefinitionSource& source, const PipelineConfig& c) {
  if (source.kind == DefinitionMode::live) return std::make_shared<WikipediaClient>(c.provider.encyclopedia_endpoint);
  return nullptr;
}

void print_metrics(const MetricsReport& m, std::ostream& out) {
  auto pct = [](double x) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(2) << as_percent(x);
    return s.str();
  };
  out << "P_a " << pct(m.ancestor_precision) << "  R_a " << pct(m.ancestor_recall) << "  F1_a "
      << pct(m.ancestor_f1) << "\n"
      << "P_e " << pct(m.edge_precision) << "  R_e " << pct(m.edge_recall) << "  F1_e " << pct(m.edge_f1) << "\n";
}

RunOptions run_options(const RunArgs& a, const std::string& out_dir, const std::string& task_name) {
  RunOptions o;
  o.out_dir = out_dir;
  o.definitions = parse_definition_source(a.definitions);
  o.resume = a.resume;
  o.stop_after = parse_stage(a.stop_after);
  o.task_name = task_name;
  o.echo_warnings = !a.quiet;
  return o;
}

int cmd_run(const RunArgs& a) {
  auto config = build_config(a);
  auto task = load_task(a.task);
  auto gateway = live_gateway(config, a);
  auto options = run_options(a, a.out_dir, fs::path(a.task).stem().string());
  auto save = [&] {
    if (gateway->options().mode == llm::LlmMode::record) gateway->transcript().save(a.transcript);
  };
  try {
    auto result = run_pipeline(task, config, options, *gateway, encyclopedia_for(options.definitions, config));
    save();
    if (!result.completed) {
      std::cout << "stopped after stage '" << a.stop_after << "'; artifacts in " << a.out_dir << "\n";
      return kOk;
    }
    std::cout << "taxonomy: " << (fs::path(a.out_dir) / artifact::taxonomy).string() << " ("
              << result.taxonomy->taxonomy.edges.size() << " edges)\n";
    if (result.metrics) print_metrics(*result.metrics, std::cout);
  } catch (...) {
    save();
    throw;
  }
  return kOk;
}

/// Gold taxonomy from either a task file (gold_edges) or a taxonomy file.
Taxonomy load_gold(const std::string& path) {
  auto j = read_json_file(path);
  if (j.contains("terms")) {
    auto task = task_from_json(j);
    if (!task.gold) throw Error(ErrorCode::GoldInvalid, "'" + path + "' has no gold_edges");
    return *task.gold;
  }
  return predicted_from_json(j).taxonomy;
}

int cmd_eval(const std::string& pred_path, const std::string& gold_path, const std::string& out_path) {
  auto pred = predicted_from_json(read_json_file(pred_path)).taxonomy;
  auto gold = load_gold(gold_path);
  auto counts = evaluation_counts(pred, gold);
  print_metrics(report_from_counts(counts), std::cout);
  if (!out_path.empty()) save_json(out_path, metrics_report_json({{fs::path(pred_path).stem().string(), counts}}));
  return kOk;
}

int cmd_convert(const std::string& format, const std::string& input, const std::string& terms,
                const std::string& output, const std::string& root_definition) {
  auto task = convert_external(parse_external_format(format), input,
                               terms.empty() ? std::nullopt : std::optional<std::string>(terms));
  if (!root_definition.empty()) task.root_definition = root_definition;
  save_json(output, to_json(task));
  std::cout << "root \"" << task.root << "\", " << task.terms.size() << " terms, " << task.gold->edges.size()
            << " gold edges -> " << output << "\n";
  return kOk;
}

int cmd_oracle_transcript(const RunArgs& a, bool append) {
  auto config = build_config(a);
  auto task = load_task(a.task);
  if (a.transcript.empty()) throw Error(ErrorCode::ConfigError, "--transcript output path is required");
  auto gateway = std::make_shared<llm::LlmGateway>(gateway_options(config, llm::LlmMode::record),
                                                   append && fs::exists(a.transcript)
                                                       ? std::make_shared<llm::Transcript>(llm::Transcript::load(a.transcript))
                                                       : std::make_shared<llm::Transcript>(),
                                                   std::make_shared<llm::GoldOracleChat>(task),
                                                   std::make_shared<llm::HashingEmbedder>());
  auto options = run_options(a, a.out_dir, fs::path(a.task).stem().string());
  auto result = run_pipeline(task, config, options, *gateway);
  gateway->transcript().save(a.transcript);
  std::cout << "recorded " << gateway->transcript().size() << " entries -> " << a.transcript << "\n";
  if (result.metrics) print_metrics(*result.metrics, std::cout);
  return kOk;
}

int cmd_sweep(const RunArgs& a, const std::vector<std::string>& tasks, int jobs) {
  auto config = build_config(a);
  auto gateway = live_gateway(config, a);
  std::vector<std::pair<std::string, EvaluationCounts>> per_task(tasks.size());
  std::vector<char> has_gold(tasks.size(), 0);
  try {
    parallel_for(tasks.size(), jobs, [&](std::size_t i) {
      auto name = fs::path(tasks[i]).stem().string();
      auto task = load_task(tasks[i]);
      auto options = run_options(a, (fs::path(a.out_dir) / name).string(), name);
      auto result = run_pipeline(task, config, options, *gateway, encyclopedia_for(options.definitions, config));
      if (result.counts) {
        per_task[i] = {name, *result.counts};
        has_gold[i] = 1;
      }
    });
  } catch (...) {
    if (gateway->options().mode == llm::LlmMode::record) gateway->transcript().save(a.transcript);
    throw;
  }
  if (gateway->options().mode == llm::LlmMode::record) gateway->transcript().save(a.transcript);
  std::vector<std::pair<std::string, EvaluationCounts>> scored;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (has_gold[i]) scored.push_back(per_task[i]);
  }
  std::cout << tasks.size() << " tasks, " << scored.size() << " with gold\n";
  if (!scored.empty()) {
    std::vector<EvaluationCounts> counts;
    for (const auto& [_, c] : scored) counts.push_back(c);
    std::cout << "micro average:\n";
    print_metrics(micro_average(counts), std::cout);
    save_json((fs::path(a.out_dir) / artifact::metrics).string(), metrics_report_json(scored));
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"taxind: zero-shot taxonomy induction with LLM-assisted parent selection"};
  app.require_subcommand(1);

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "Induce a taxonomy for one task");
  add_run_flags(run, run_args, true);

  std::string pred_path, gold_path, eval_out;
  auto* eval = app.add_subcommand("eval", "Score a predicted taxonomy against a gold one");
  eval->add_option("--pred", pred_path, "Predicted taxonomy JSON")->required()->check(CLI::ExistingFile);
  eval->add_option("--gold", gold_path, "Gold task or taxonomy JSON")->required()->check(CLI::ExistingFile);
  eval->add_option("--out", eval_out, "Write the metrics report here");

  std::string format = "edge-list", input, terms_file, output, root_definition;
  auto* convert = app.add_subcommand("convert", "Convert an external edge list into a task file");
  convert->add_option("--format", format, "edge-list or term-relation")
      ->check(CLI::IsMember({"edge-list", "term-relation"}));
  convert->add_option("--input", input, "child<TAB>parent relation file")->required()->check(CLI::ExistingFile);
  convert->add_option("--terms", terms_file, "Term file (term-relation format)")->check(CLI::ExistingFile);
  convert->add_option("--output", output, "Task JSON to write")->required();
  convert->add_option("--root-definition", root_definition, "Definition to store for the root");

  RunArgs oracle_args;
  auto* oracle = app.add_subcommand("oracle-transcript",
                                    "Record a replay transcript answered from the task's gold tree");
  add_run_flags(oracle, oracle_args, true);
  bool append = false;
  oracle->add_flag("--append", append, "Extend an existing transcript instead of replacing it");

  RunArgs sweep_args;
  std::vector<std::string> sweep_tasks;
  int jobs = 1;
  auto* sweep = app.add_subcommand("sweep", "Run several tasks and micro-average their metrics");
  add_run_flags(sweep, sweep_args, false);
  sweep->add_option("--tasks", sweep_tasks, "Task files")->required()->check(CLI::ExistingFile);
  sweep->add_option("--jobs", jobs, "Tasks processed concurrently")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kOk : kInput;
  }

  try {
    if (*run) return cmd_run(run_args);
    if (*eval) return cmd_eval(pred_path, gold_path, eval_out);
    if (*convert) return cmd_convert(format, input, terms_file, output, root_definition);
    if (*oracle) return cmd_oracle_transcript(oracle_args, append);
    if (*sweep) return cmd_sweep(sweep_args, sweep_tasks, jobs);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInternal;
  }
  return kInput;
}
